#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace peano {

/// A value in a config file: number, bool, string or (nested) array.
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<double, bool, std::string, Array> data;
  int line = 0;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
};

/// Sectioned key = value files, a small subset of TOML:
///
///   # comment
///   [sde]
///   ladder = [0.5, 0.35, 0.25]
///   dt = "auto"
///
/// Arrays may span lines. Keys outside any section are rejected.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text, const std::string& source = "<string>");
  static ConfigDocument from_file(const std::string& path);

  const std::string& source() const { return source_; }
  std::vector<std::string> sections() const;
  bool has_section(const std::string& section) const { return values_.count(section) > 0; }
  bool has(const std::string& section, const std::string& key) const;
  const ConfigValue& at(const std::string& section, const std::string& key) const;

  double number(const std::string& section, const std::string& key) const;
  double number_or(const std::string& section, const std::string& key, double fallback) const;
  long integer_or(const std::string& section, const std::string& key, long fallback) const;
  std::string string_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& section, const std::string& key) const;
  std::vector<std::vector<double>> rows(const std::string& section, const std::string& key) const;

  /// Throws a config error naming the first key of `section` not in `allowed`.
  void reject_unknown(const std::string& section, const std::vector<std::string>& allowed) const;
  void reject_unknown_sections(const std::vector<std::string>& allowed) const;

 private:
  std::string source_;
  std::vector<std::string> order_;
  std::map<std::string, std::map<std::string, ConfigValue>> values_;
};

}  // namespace peano
