// TOML-style run configuration: `key = value` lines under [model],
// [boundary] and [run]. Values are numbers, "strings", booleans or
// [arrays] (which may span lines). Complex values are [re, im].

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "openrg/cli.hpp"
#include "openrg/errors.hpp"

namespace openrg::cli {

namespace {

struct Value {
  enum class Kind { Number, String, Bool, Array } kind = Kind::Number;
  double number = 0.0;
  std::string text;
  bool flag = false;
  std::vector<Value> items;
  int line = 0;
};

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Drops a trailing comment, respecting quoted strings.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

class ValueParser {
 public:
  ValueParser(std::string_view s, int line) : s_(s), line_(line) {}

  Value parse_all() {
    Value v = parse();
    skip_space();
    if (pos_ != s_.size()) fail(line_, "trailing characters after value: '" + std::string(s_.substr(pos_)) + "'");
    return v;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) ++pos_;
  }

  Value parse() {
    skip_space();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    Value v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '"') {
      v.kind = Value::Kind::String;
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
        v.text += s_[pos_++];
      }
      if (pos_ >= s_.size()) fail(line_, "unterminated string");
      ++pos_;
      return v;
    }
    if (c == '[') {
      v.kind = Value::Kind::Array;
      ++pos_;
      skip_space();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      for (;;) {
        v.items.push_back(parse());
        skip_space();
        if (pos_ >= s_.size()) fail(line_, "unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          skip_space();
          if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return v;
          }
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        fail(line_, "expected ',' or ']' in array");
      }
    }
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' && s_[end] != '\t' &&
           s_[end] != '\n')
      ++end;
    const std::string token(s_.substr(pos_, end - pos_));
    pos_ = end;
    if (token == "true" || token == "false") {
      v.kind = Value::Kind::Bool;
      v.flag = token == "true";
      return v;
    }
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits += ch;
    }
    char* stop = nullptr;
    v.number = std::strtod(digits.c_str(), &stop);
    if (digits.empty() || *stop != '\0') fail(line_, "cannot parse value '" + token + "'");
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

std::string kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::Number: return "a number";
    case Value::Kind::String: return "a string";
    case Value::Kind::Bool: return "a boolean";
    case Value::Kind::Array: return "an array";
  }
  return "a value";
}

void expect(const Value& v, Value::Kind kind, const std::string& key) {
  if (v.kind != kind) fail(v.line, "'" + key + "' must be " + kind_name(kind) + ", got " + kind_name(v.kind));
}

double as_number(const Value& v, const std::string& key) {
  expect(v, Value::Kind::Number, key);
  if (!std::isfinite(v.number)) fail(v.line, "'" + key + "' must be finite");
  return v.number;
}

long long as_integer(const Value& v, const std::string& key) {
  const double x = as_number(v, key);
  if (x != std::floor(x) || std::abs(x) > 9.0e15) fail(v.line, "'" + key + "' must be an integer");
  return static_cast<long long>(x);
}

std::uint64_t as_seed(const Value& v, const std::string& key) {
  const long long x = as_integer(v, key);
  if (x < 0) fail(v.line, "'" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(x);
}

std::vector<double> as_numbers(const Value& v, const std::string& key) {
  expect(v, Value::Kind::Array, key);
  std::vector<double> out;
  for (const auto& item : v.items) out.push_back(as_number(item, key));
  return out;
}

Complex as_complex(const Value& v, const std::string& key) {
  if (v.kind == Value::Kind::Number) return {as_number(v, key), 0.0};
  const auto parts = as_numbers(v, key);
  if (parts.size() != 2) fail(v.line, "'" + key + "' must be a number or [re, im]");
  return {parts[0], parts[1]};
}

std::string as_string(const Value& v, const std::string& key) {
  expect(v, Value::Kind::String, key);
  return v.text;
}

bool as_bool(const Value& v, const std::string& key) {
  expect(v, Value::Kind::Bool, key);
  return v.flag;
}

using Section = std::map<std::string, Value>;

void reject_unknown(const Section& section, const std::string& name, const std::set<std::string>& known) {
  for (const auto& [key, value] : section) {
    if (!known.count(key)) fail(value.line, "unknown key '" + key + "' in [" + name + "]");
  }
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  c.model.length = 4;
  for (int j = 1; j <= 4; ++j) c.model.z.push_back(1.0 + 0.3 * j);
  c.model.G = 0.8;
  c.model.Gamma = 0.3;
  return c;
}

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header");
      current = std::string(trim(s.substr(1, s.size() - 2)));
      if (current != "model" && current != "boundary" && current != "run") {
        fail(line, "unknown section [" + current + "]");
      }
      if (sections.count(current)) fail(line, "section [" + current + "] appears twice");
      sections[current];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) fail(line, "expected 'key = value'");
    if (current.empty()) fail(line, "key outside of a section");
    const std::string key(trim(s.substr(0, eq)));
    if (key.empty()) fail(line, "empty key");
    std::string value(trim(s.substr(eq + 1)));
    // Arrays may continue over several lines.
    const int start = line;
    auto depth = [](const std::string& v) {
      int d = 0;
      bool quoted = false;
      for (char c : v) {
        if (c == '"') quoted = !quoted;
        if (!quoted) d += (c == '[') - (c == ']');
      }
      return d;
    };
    while (depth(value) > 0 && std::getline(in, raw)) {
      ++line;
      value += ' ';
      value += std::string(trim(strip_comment(raw)));
    }
    if (depth(value) != 0) fail(start, "unbalanced brackets in '" + key + "'");
    if (sections[current].count(key)) fail(start, "duplicate key '" + key + "' in [" + current + "]");
    sections[current][key] = ValueParser(value, start).parse_all();
  }

  RunConfig c = default_config();
  if (auto it = sections.find("model"); it != sections.end()) {
    const Section& m = it->second;
    reject_unknown(m, "model", {"L", "z", "G", "Gamma"});
    const bool has_l = m.count("L"), has_z = m.count("z");
    if (has_l) {
      const long long n = as_integer(m.at("L"), "L");
      if (n < 1 || n > 62) fail(m.at("L").line, "'L' must lie in [1, 62]");
      c.model.length = static_cast<int>(n);
    }
    if (has_z) {
      c.model.z = as_numbers(m.at("z"), "z");
      if (!has_l) c.model.length = static_cast<int>(c.model.z.size());
    } else if (has_l) {
      c.model.z.clear();
      for (int j = 1; j <= c.model.length; ++j) c.model.z.push_back(1.0 + 0.3 * j);
    }
    if (m.count("G")) c.model.G = as_number(m.at("G"), "G");
    if (m.count("Gamma")) c.model.Gamma = as_number(m.at("Gamma"), "Gamma");
  }
  if (auto it = sections.find("boundary"); it != sections.end()) {
    const Section& b = it->second;
    reject_unknown(b, "boundary", {"xi", "psi", "phi", "alpha", "beta", "gamma", "delta", "lambda", "mu"});
    EtaExpansion ep = c.model.expansion();
    const std::pair<const char*, Complex*> fields[] = {
        {"xi", &ep.xi},       {"psi", &ep.psi},     {"phi", &ep.phi},
        {"alpha", &ep.alpha}, {"beta", &ep.beta},   {"gamma", &ep.gamma},
        {"delta", &ep.delta}, {"lambda", &ep.lambda}, {"mu", &ep.mu}};
    for (const auto& [name, slot] : fields) {
      if (b.count(name)) *slot = as_complex(b.at(name), name);
    }
    c.boundary = ep;
  }
  if (auto it = sections.find("run"); it != sections.end()) {
    const Section& r = it->second;
    reject_unknown(r, "run",
                   {"command", "seed", "cap", "tol", "residual_tol", "out", "csv", "fixed_clock", "samples",
                    "eta", "corrupt_r", "sector_fallback", "method", "gamma_path", "state", "seeds_from"});
    RunSettings& s = c.run;
    if (r.count("command")) s.command = as_string(r.at("command"), "command");
    if (r.count("seed")) s.seed = as_seed(r.at("seed"), "seed");
    if (r.count("cap")) s.cap = static_cast<int>(as_integer(r.at("cap"), "cap"));
    if (r.count("tol")) s.tolerance = as_number(r.at("tol"), "tol");
    if (r.count("residual_tol")) s.residual_tolerance = as_number(r.at("residual_tol"), "residual_tol");
    if (r.count("out")) s.out = resolve(as_string(r.at("out"), "out"), base_dir);
    if (r.count("csv")) s.csv = resolve(as_string(r.at("csv"), "csv"), base_dir);
    if (r.count("fixed_clock")) s.fixed_clock = as_bool(r.at("fixed_clock"), "fixed_clock");
    if (r.count("samples")) s.samples = static_cast<int>(as_integer(r.at("samples"), "samples"));
    if (r.count("eta")) s.eta = as_complex(r.at("eta"), "eta");
    if (r.count("corrupt_r")) s.corrupt_r = as_number(r.at("corrupt_r"), "corrupt_r");
    if (r.count("sector_fallback")) s.sector_fallback = as_bool(r.at("sector_fallback"), "sector_fallback");
    if (r.count("method")) s.method = as_string(r.at("method"), "method");
    if (r.count("gamma_path")) s.gamma_path = as_numbers(r.at("gamma_path"), "gamma_path");
    if (r.count("state")) s.state = static_cast<int>(as_integer(r.at("state"), "state"));
    if (r.count("seeds_from")) s.seeds_from = resolve(as_string(r.at("seeds_from"), "seeds_from"), base_dir);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::filesystem::path(path).parent_path().string());
}

void validate(const RunConfig& c) {
  const RunSettings& r = c.run;
  if (r.cap < 1 || r.cap > 14) throw ConfigError("cap must lie in [1, 14]");
  try {
    c.model.validate(r.cap);
    if (c.boundary) c.boundary->validate();
  } catch (const DomainError& err) {
    throw ConfigError(std::string("invalid model: ") + err.what());
  }
  if (!(r.tolerance > 0.0)) throw ConfigError("tol must be positive");
  if (!(r.residual_tolerance > 0.0)) throw ConfigError("residual_tol must be positive");
  if (r.samples < 1) throw ConfigError("samples must be at least 1");
  if (std::abs(r.eta) < kPoleGuard) throw ConfigError("eta must be nonzero");
  if (r.method != "continuation" && r.method != "heine-stieltjes") {
    throw ConfigError("method must be \"continuation\" or \"heine-stieltjes\", got \"" + r.method + "\"");
  }
  for (std::size_t i = 1; i < r.gamma_path.size(); ++i) {
    const double a = r.gamma_path[i] - r.gamma_path[i - 1], b = r.gamma_path[1] - r.gamma_path[0];
    if (a == 0.0 || (a > 0.0) != (b > 0.0)) throw ConfigError("gamma_path must be strictly monotone");
  }
  if (r.state < 0) throw ConfigError("state must be non-negative");
  if (r.seeds_from.empty() && r.command == "solve" && r.state >= (1 << c.model.length)) {
    throw ConfigError("state " + std::to_string(r.state) + " exceeds the 2^L - 1 available states");
  }
}

}  // namespace openrg::cli
