#include "opcert/core/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "opcert/core/error.hpp"

namespace opcert {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::config, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(ErrorCode::config, origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) fail(ErrorCode::config, origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.set(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void KeyValues::set(const std::string& key, const std::string& value) {
  if (!has(key)) order_.push_back(key);
  values_[key] = value;
}

void KeyValues::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValues::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void KeyValues::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

const std::string& KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::config, origin_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValues::get_double(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "inf") return INFINITY;
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) fail(ErrorCode::config, origin_ + ": key '" + key + "' is not a number: " + v);
  return d;
}

std::int64_t KeyValues::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    fail(ErrorCode::config, origin_ + ": key '" + key + "' is not an integer: " + v);
  return out;
}

std::uint64_t KeyValues::get_uint(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    fail(ErrorCode::config, origin_ + ": key '" + key + "' is not a non-negative integer: " + v);
  return out;
}

bool KeyValues::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::config, origin_ + ": key '" + key + "' is not a boolean: " + v);
}

void KeyValues::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& k : order_)
    if (!allowed.count(k)) fail(ErrorCode::config, origin_ + ": unknown key '" + k + "'");
}

std::string KeyValues::str() const {
  std::string out;
  for (const auto& k : order_) out += k + " = " + values_.at(k) + "\n";
  return out;
}

void KeyValues::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot write '" + path + "'");
  out << str();
  out.flush();
  require(out.good(), ErrorCode::io, "write failed on '" + path + "'");
}

}  // namespace opcert
