#pragma once

// Command-line front end: run configuration, report serialisation and the
// verify / spectrum / solve commands.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "openrg/algebra.hpp"
#include "openrg/manybody.hpp"

namespace openrg::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit-code contract.
enum ExitCode : int { kPass = 0, kNumericalFailure = 1, kConfigError = 2 };

struct RunSettings {
  std::string command;                 // verify | spectrum | solve
  std::uint64_t seed = 1;
  int cap = kDefaultLengthCap;
  double tolerance = 1e-8;             // relative energy tolerance
  double residual_tolerance = 1e-8;    // Bethe residual tolerance
  std::string out;                     // report path, stdout when empty
  std::string csv;                     // optional CSV table (spectrum)
  bool fixed_clock = false;

  // verify
  int samples = 8;                     // random (u, v) pairs
  Complex eta{0.1, 0.05};
  double corrupt_r = 0.0;              // fault injection into R(u)(0,0)

  // spectrum
  bool sector_fallback = false;        // acknowledge Gamma = 0 sector mode

  // solve
  std::string method = "continuation"; // continuation | heine-stieltjes
  std::vector<double> gamma_path;      // empty: the single point model.Gamma
  int state = 0;                       // seed state, ascending ED energy
  std::string seeds_from;              // prior spectrum or solve report
};

struct RunConfig {
  ModelParams model;
  std::optional<EtaExpansion> boundary;
  RunSettings run;

  /// The expansion used by verify: [boundary] if given, else the model's.
  EtaExpansion expansion() const { return boundary ? *boundary : model.expansion(); }
};

/// Defaults: L = 4, z_j = 1 + 0.3 j, G = 0.8, Gamma = 0.3.
RunConfig default_config();

/// Parses TOML-style text with sections [model], [boundary], [run] on top of
/// default_config(). Throws ConfigError with the line number on any problem.
/// Relative paths in [run] are resolved against `base_dir`.
RunConfig parse_config(std::string_view text, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

/// Checks every cross-field invariant. Throws ConfigError.
void validate(const RunConfig& config);

// Reports. Numbers are written with 17 significant digits, complex numbers
// as {"re": .., "im": ..}.
using Json = nlohmann::ordered_json;

Json complex_json(Complex z);
std::string dump_json(const Json& value);
/// Writes to a temporary sibling and renames it into place.
void write_atomically(const std::string& path, const std::string& content);

struct CommandResult {
  int exit_code = kPass;
  Json report;
  std::string csv;
};

CommandResult cmd_verify(const RunConfig& config);
CommandResult cmd_spectrum(const RunConfig& config);
CommandResult cmd_solve(const RunConfig& config);

/// Full command-line entry point. Never throws; returns the exit code.
int run(int argc, const char* const* argv);

}  // namespace openrg::cli
