#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tryw {

using ConfigValue =
    std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

// Flat view of a TOML-subset document: `key = value` lines, `[section]`
// headers (keys become "section.key"), `#` comments, basic strings with
// \" \\ \n \t escapes, integers, floats, booleans and arrays of strings.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }
  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  // Integers are accepted where a float is expected.
  std::optional<double> get_double(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<std::string>> get_string_list(const std::string& key) const;

 private:
  std::map<std::string, ConfigValue> values_;
};

}  // namespace tryw
