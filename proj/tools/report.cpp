#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "openrg/cli.hpp"

namespace openrg::cli {

namespace {

std::string number(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool is_scalar(const Json& v) { return !v.is_object() && !v.is_array(); }

bool is_flat(const Json& v) {
  if (v.is_array()) {
    for (const auto& item : v) {
      if (!is_scalar(item) && !is_flat(item)) return false;
    }
    return true;
  }
  // {"re": .., "im": ..} and similar small records stay on one line.
  if (v.is_object() && v.size() <= 2) {
    for (const auto& item : v) {
      if (!is_scalar(item)) return false;
    }
    return true;
  }
  return false;
}

void write(const Json& v, std::string& out, int indent, bool inline_mode) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case Json::value_t::null: out += "null"; return;
    case Json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; return;
    case Json::value_t::number_integer: out += std::to_string(v.get<std::int64_t>()); return;
    case Json::value_t::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); return;
    case Json::value_t::number_float: out += number(v.get<double>()); return;
    case Json::value_t::string: out += v.dump(); return;
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      const bool flat = inline_mode || is_flat(v);
      out += '[';
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += flat ? ", " : ",";
        if (!flat) out += "\n" + inner;
        write(item, out, indent + 1, flat);
        first = false;
      }
      if (!flat) out += "\n" + pad;
      out += ']';
      return;
    }
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      const bool flat = inline_mode || is_flat(v);
      out += '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out += flat ? ", " : ",";
        if (!flat) out += "\n" + inner;
        out += Json(key).dump();
        out += ": ";
        write(item, out, indent + 1, flat);
        first = false;
      }
      if (!flat) out += "\n" + pad;
      out += '}';
      return;
    }
    default: out += v.dump(); return;
  }
}

}  // namespace

Json complex_json(Complex z) {
  Json j = Json::object();
  j["re"] = z.real();
  j["im"] = z.imag();
  return j;
}

std::string dump_json(const Json& value) {
  std::string out;
  write(value, out, 0, false);
  out += '\n';
  return out;
}

void write_atomically(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move report into '" + path + "': " + ec.message());
  }
}

}  // namespace openrg::cli
