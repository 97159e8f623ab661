#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "openrg/cli.hpp"
#include "openrg/errors.hpp"

using namespace openrg;
using namespace openrg::cli;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(OPENRG_FIXTURE_DIR) + "/" + name; }

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("openrg_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "openrg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

Complex as_complex(const Json& j) { return {j.at("re").get<double>(), j.at("im").get<double>()}; }

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const RunConfig c = parse_config("");
    CHECK(c.model.length == 4);
    CHECK(c.model.z[0] == doctest::Approx(1.3));
    CHECK(c.model.z[3] == doctest::Approx(2.2));
    CHECK(c.model.G == 0.8);
    CHECK(c.model.Gamma == 0.3);
    CHECK_FALSE(c.boundary.has_value());
    CHECK(c.run.cap == kDefaultLengthCap);
    CHECK_NOTHROW(validate(c));
  }
  SUBCASE("values, comments and multi-line arrays") {
    const RunConfig c = parse_config(R"(
# leading comment
[model]
z = [0.9,   # first
     1.4,
     2.0]
G = -1.5
Gamma = 2e-1

[boundary]
xi = [0.1, -0.2]
psi = 0.5

[run]
seed = 42
out = "reports/out.json"
sector_fallback = true
gamma_path = [0.3, 0.2, 0.1]
method = "heine-stieltjes"
)",
                                     "/base");
    CHECK(c.model.length == 3);
    CHECK(c.model.z[2] == 2.0);
    CHECK(c.model.G == -1.5);
    CHECK(c.model.Gamma == 0.2);
    REQUIRE(c.boundary.has_value());
    CHECK(c.boundary->xi == Complex(0.1, -0.2));
    CHECK(c.boundary->psi == Complex(0.5, 0.0));
    CHECK(c.boundary->alpha == Complex(c.model.alpha(), 0.0));
    CHECK(c.run.seed == 42);
    CHECK(c.run.out == "/base/reports/out.json");
    CHECK(c.run.sector_fallback);
    CHECK(c.run.gamma_path.size() == 3);
    CHECK(c.run.method == "heine-stieltjes");
    CHECK_NOTHROW(validate(c));
  }
  SUBCASE("L alone gets the default couplings") {
    const RunConfig c = parse_config("[model]\nL = 2\n");
    REQUIRE(c.model.z.size() == 2);
    CHECK(c.model.z[1] == doctest::Approx(1.6));
  }
  SUBCASE("rejections name the line") {
    auto message = [](const std::string& text) {
      try {
        validate(parse_config(text));
      } catch (const ConfigError& err) {
        return std::string(err.what());
      }
      return std::string();
    };
    CHECK(message("[model]\nfoo = 1\n").find("line 2: unknown key 'foo'") != std::string::npos);
    CHECK(message("[extras]\n").find("unknown section") != std::string::npos);
    CHECK(message("G = 1\n").find("outside of a section") != std::string::npos);
    CHECK(message("[model]\nG = 1\nG = 2\n").find("duplicate key") != std::string::npos);
    CHECK(message("[model]\nG = \"big\"\n").find("must be a number") != std::string::npos);
    CHECK(message("[model]\nz = [1.0, 2.0\n").find("unbalanced") != std::string::npos);
    CHECK(message("[model]\nL = 2.5\n").find("integer") != std::string::npos);
    CHECK(message("[model]\nz = [1.0, 1.0]\n").find("distinct") != std::string::npos);
    CHECK(message("[model]\nL = 3\nz = [1.0, 2.0]\n").find("expected 3 couplings") != std::string::npos);
    CHECK(message("[model]\nG = 0\n").find("nonzero") != std::string::npos);
    CHECK(message("[run]\ntol = -1\n").find("tol must be positive") != std::string::npos);
    CHECK(message("[run]\nmethod = \"guess\"\n").find("method") != std::string::npos);
    CHECK(message("[run]\ngamma_path = [0.3, 0.1, 0.2]\n").find("monotone") != std::string::npos);
    CHECK(message("[boundary]\npsi = 1\nphi = -1\n").find("psi*phi + 1") != std::string::npos);
    CHECK(message("[model]\nL = 13\n").find("exceeds the cap") != std::string::npos);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), ConfigError); }
}

TEST_CASE("report serialisation") {
  Json j;
  j["third"] = 1.0 / 3.0;
  j["tiny"] = 5e-324;
  j["bad"] = std::nan("");
  j["z"] = complex_json(Complex(0.1, -2.5));
  j["n"] = 7;
  const std::string text = dump_json(j);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
  CHECK(text.find("\"bad\": null") != std::string::npos);
  CHECK(text.find("{\"re\": 0.10000000000000001, \"im\": -2.5}") != std::string::npos);
  const Json back = Json::parse(text);
  CHECK(back["third"].get<double>() == 1.0 / 3.0);
  CHECK(back["tiny"].get<double>() == 5e-324);
  CHECK(back["n"].get<int>() == 7);

  const fs::path dir = scratch_dir();
  const fs::path target = dir / "nested" / "report.json";
  write_atomically(target.string(), text);
  CHECK(slurp(target) == text);
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(target.parent_path())) ++entries;
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch_dir();
  const std::string out = (dir / "report.json").string();

  SUBCASE("default verify passes") {
    CHECK(invoke({"verify", "--out", out}) == kPass);
    const Json r = read_json(out);
    CHECK(r["pass"].get<bool>());
    CHECK(r["identities"].size() >= 16);
    for (const auto& row : r["identities"]) CHECK(row["pass"].get<bool>());
  }
  SUBCASE("spelled-out defaults give the same verify report") {
    CHECK(invoke({"verify", "--fixed-clock", "--out", out}) == kPass);
    const std::string second = (dir / "second.json").string();
    CHECK(invoke({"verify", "--config", fixture("default.toml"), "--fixed-clock", "--out", second}) == kPass);
    CHECK(slurp(out) == slurp(second));
  }
  SUBCASE("duplicate couplings") {
    CHECK(invoke({"verify", "--config", fixture("duplicate_eps.toml"), "--out", out}) == kConfigError);
    CHECK_FALSE(fs::exists(out));
  }
  SUBCASE("corrupted R fails the Yang-Baxter row only") {
    CHECK(invoke({"verify", "--config", fixture("corrupted_r.toml"), "--out", out}) == kNumericalFailure);
    const Json r = read_json(out);
    CHECK_FALSE(r["pass"].get<bool>());
    for (const auto& row : r["identities"]) {
      CHECK(row["pass"].get<bool>() == (row["name"] != "yang_baxter"));
    }
  }
  SUBCASE("length above the cap") {
    CHECK(invoke({"spectrum", "--config", fixture("oversize.toml"), "--out", out}) == kConfigError);
  }
  SUBCASE("unknown key") {
    CHECK(invoke({"spectrum", "--config", fixture("unknown_key.toml"), "--out", out}) == kConfigError);
  }
  SUBCASE("bad command line") {
    CHECK(invoke({}) == kConfigError);
    CHECK(invoke({"transmogrify"}) == kConfigError);
    CHECK(invoke({"spectrum", "--seed", "minus-one"}) == kConfigError);
    CHECK(invoke({"spectrum", "--config", "/nonexistent.toml"}) == kConfigError);
  }
  SUBCASE("forced collision") {
    CHECK(invoke({"solve", "--config", fixture("collision.toml"), "--out", out}) == kNumericalFailure);
    const Json r = read_json(out);
    CHECK(r["status"] == "collision");
    CHECK(r["points"].back()["collided"].get<bool>());
    CHECK_FALSE(r["diagnostics"].empty());
  }
  fs::remove_all(dir);
}

TEST_CASE("spectrum command") {
  const fs::path dir = scratch_dir();
  const std::string out = (dir / "spectrum.json").string();

  SUBCASE("five-site fixture") {
    CHECK(invoke({"spectrum", "--config", fixture("spectrum_l5.toml"), "--out", out}) == kPass);
    const Json r = read_json(out);
    CHECK(r["header"]["seed"].get<int>() == 7);
    CHECK(r["records"].size() == 32);
    CHECK(r["summary"]["matched"].get<int>() == 32);
    CHECK(r["summary"]["max_rel_error"].get<double>() < 1e-8);
    for (const auto& rec : r["records"]) CHECK(rec["bae_residual"].get<double>() < 1e-8);
  }
  SUBCASE("single site closed form") {
    CHECK(invoke({"spectrum", "--config", fixture("spectrum_l1.toml"), "--out", out}) == kPass);
    const Json r = read_json(out);
    REQUIRE(r["records"].size() == 2);
    const double z = 1.5, g = 0.3, e = std::sqrt(z * z * z * z / 4.0 + g * g * z * z);
    CHECK(std::abs(as_complex(r["records"][0]["energy_bethe"]) - Complex(-e, 0.0)) < 1e-12);
    CHECK(std::abs(as_complex(r["records"][1]["energy_bethe"]) - Complex(e, 0.0)) < 1e-12);
  }
  SUBCASE("fixed seed and clock give byte-identical reports") {
    const std::string a = (dir / "a.json").string(), b = (dir / "b.json").string();
    CHECK(invoke({"spectrum", "--config", fixture("spectrum_l5.toml"), "--fixed-clock", "--out", a}) == kPass);
    CHECK(invoke({"--fixed-clock", "spectrum", "--config", fixture("spectrum_l5.toml"), "--out", b}) == kPass);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).find("1970-01-01T00:00:00Z") != std::string::npos);
  }
  SUBCASE("CSV table") {
    const fs::path cfg = dir / "csv.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.4]\n[run]\ncsv = \"table.csv\"\n";
    CHECK(invoke({"spectrum", "--config", cfg.string(), "--out", out}) == kPass);
    std::istringstream csv(slurp(dir / "table.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "index,E_ED,E_Bethe_re,E_Bethe_im,dE,residual");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 4);
  }
  SUBCASE("Gamma = 0 switches to sectors with a warning") {
    const fs::path cfg = dir / "u1.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.4, 1.9]\nGamma = 0\n";
    CHECK(invoke({"spectrum", "--config", cfg.string(), "--out", out}) == kPass);
    const Json r = read_json(out);
    CHECK(r["summary"]["sector_mode"].get<bool>());
    CHECK(r["diagnostics"][0].get<std::string>().find("warning") == 0);
  }
  SUBCASE("tolerance override") {
    CHECK(invoke({"spectrum", "--config", fixture("spectrum_l1.toml"), "--tol", "1e-300", "--out", out}) ==
          kNumericalFailure);
  }
  fs::remove_all(dir);
}

TEST_CASE("solve command") {
  const fs::path dir = scratch_dir();
  const std::string out = (dir / "solve.json").string();

  auto spectrum_energies = [&](double gamma) {
    const fs::path cfg = dir / "endpoint.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.6]\nG = 0.8\nGamma = " << gamma << "\n";
    const std::string path = (dir / "endpoint.json").string();
    REQUIRE(invoke({"spectrum", "--config", cfg.string(), "--out", path}) == kPass);
    const Json report = read_json(path);
    std::vector<double> e;
    for (const auto& rec : report["records"]) e.push_back(rec["energy_ed"].get<double>());
    return e;
  };
  auto nearest = [](Complex value, const std::vector<double>& spectrum) {
    double best = INFINITY;
    for (double e : spectrum) best = std::min(best, std::abs(value - e));
    return best;
  };

  SUBCASE("path endpoints agree with the spectrum command") {
    CHECK(invoke({"solve", "--config", fixture("solve_l2.toml"), "--out", out}) == kPass);
    const Json r = read_json(out);
    CHECK(r["status"] == "ok");
    const auto& pts = r["points"];
    REQUIRE(pts.size() == 5);
    CHECK(nearest(as_complex(pts.front()["energy"]), spectrum_energies(0.3)) < 1e-9);
    CHECK(nearest(as_complex(pts.back()["energy"]), spectrum_energies(0.1)) < 1e-9);
    CHECK(std::abs(as_complex(pts.front()["energy"]) - r["seeds"]["energy_ed"].get<double>()) < 1e-9);
  }
  SUBCASE("single point is a refinement") {
    const fs::path cfg = dir / "single.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.6]\n[run]\nstate = 3\n";
    CHECK(invoke({"solve", "--config", cfg.string(), "--out", out}) == kPass);
    const Json r = read_json(out);
    REQUIRE(r["points"].size() == 1);
    const auto& seed = r["seeds"]["roots"]["inverse"];
    const auto& got = r["points"][0]["roots"]["inverse"];
    for (std::size_t i = 0; i < seed.size(); ++i) {
      CHECK(std::abs(as_complex(seed[i]) - as_complex(got[i])) < 1e-12 * std::abs(as_complex(seed[i])));
    }
  }
  SUBCASE("seeds from a previous report") {
    const std::string first = (dir / "first.json").string();
    REQUIRE(invoke({"solve", "--config", fixture("solve_l2.toml"), "--out", first}) == kPass);
    const fs::path cfg = dir / "resume.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.6]\n[run]\ngamma_path = [0.1, 0.05]\nseeds_from = \"first.json\"\n";
    CHECK(invoke({"solve", "--config", cfg.string(), "--out", out}) == kPass);
    const Json r = read_json(out);
    CHECK(r["seeds"]["source"] == "file");
    CHECK(nearest(as_complex(r["points"].back()["energy"]), spectrum_energies(0.05)) < 1e-9);
  }
  SUBCASE("Heine-Stieltjes path") {
    const fs::path cfg = dir / "hs.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.6]\n[run]\nmethod = \"heine-stieltjes\"\n"
                          "gamma_path = [0.3, 0.2]\nstate = 2\n";
    CHECK(invoke({"solve", "--config", cfg.string(), "--out", out}) == kPass);
    const Json r = read_json(out);
    for (const auto& pt : r["points"]) CHECK(pt["coefficient_residual"].get<double>() < 1e-10);
    CHECK(nearest(as_complex(r["points"].back()["energy"]), spectrum_energies(0.2)) < 1e-9);
  }
  SUBCASE("malformed seeds file") {
    std::ofstream(dir / "junk.json") << "{\"points\": [{\"roots\": {\"inverse\": [1, 2]}}]}";
    const fs::path cfg = dir / "junk.toml";
    std::ofstream(cfg) << "[model]\nz = [1.0, 1.6]\n[run]\nseeds_from = \"junk.json\"\n";
    CHECK(invoke({"solve", "--config", cfg.string(), "--out", out}) == kConfigError);
  }
  fs::remove_all(dir);
}
