#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace opcert {

/// Ordered `key = value` text records. Lines starting with '#' are comments.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<text>");
  static KeyValues load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set_bool(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Raises ErrorCode::config naming the first key outside `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  const std::vector<std::string>& keys() const noexcept { return order_; }
  std::string str() const;
  void save(const std::string& path) const;

 private:
  std::string origin_ = "<text>";
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace opcert
