#include "peano/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "peano/error.hpp"

namespace peano {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing '#' comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

int bracket_depth(const std::string& s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && in_string) ++i;
    else if (s[i] == '"') in_string = !in_string;
    else if (!in_string && s[i] == '[') ++depth;
    else if (!in_string && s[i] == ']') --depth;
  }
  return depth;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, const std::string& where, int line) : s_(text), where_(where), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse();
    skip_space();
    if (pos_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::Config, where_ + ":" + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  ConfigValue parse() {
    skip_space();
    if (pos_ >= s_.size()) fail("missing value");
    ConfigValue v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '[') {
      ++pos_;
      ConfigValue::Array items;
      skip_space();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        v.data = items;
        return v;
      }
      for (;;) {
        items.push_back(parse());
        skip_space();
        if (pos_ >= s_.size()) fail("unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          skip_space();
          if (pos_ < s_.size() && s_[pos_] == ']') {  // trailing comma
            ++pos_;
            break;
          }
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          break;
        }
        fail("expected ',' or ']' in array");
      }
      v.data = std::move(items);
      return v;
    }
    if (c == '"') {
      std::string out;
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
          const char e = s_[++pos_];
          out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        } else {
          out += s_[pos_];
        }
        ++pos_;
      }
      if (pos_ >= s_.size()) fail("unterminated string");
      ++pos_;
      v.data = out;
      return v;
    }
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      v.data = true;
      return v;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      v.data = false;
      return v;
    }
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || std::strchr("+-._", s_[end])))
      ++end;
    std::string token = s_.substr(pos_, end - pos_);
    token.erase(std::remove(token.begin(), token.end(), '_'), token.end());
    if (!token.empty() && token[0] == '+') token.erase(0, 1);
    double x = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), x);
    if (token.empty() || res.ec != std::errc() || res.ptr != token.data() + token.size())
      fail("cannot parse value '" + s_.substr(pos_, std::max<std::size_t>(end - pos_, 1)) + "'");
    pos_ = end;
    v.data = x;
    return v;
  }

  const std::string& s_;
  std::string where_;
  int line_;
  std::size_t pos_ = 0;
};

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& source) {
  ConfigDocument doc;
  doc.source_ = source;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') throw Error(ErrorKind::Config, where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_name(section)) throw Error(ErrorKind::Config, where + ": bad section name '" + section + "'");
      if (doc.values_.count(section)) throw Error(ErrorKind::Config, where + ": section [" + section + "] repeated");
      doc.values_[section];
      doc.order_.push_back(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_name(key)) throw Error(ErrorKind::Config, where + ": bad key '" + key + "'");
    if (section.empty()) throw Error(ErrorKind::Config, where + ": key '" + key + "' outside any section");
    std::string value = trim(line.substr(eq + 1));
    const int start = line_no;
    while (bracket_depth(value) > 0 && std::getline(in, raw)) {
      ++line_no;
      value += " " + trim(strip_comment(raw));
    }
    if (bracket_depth(value) != 0)
      throw Error(ErrorKind::Config, source + ":" + std::to_string(start) + ": unbalanced brackets");
    auto& sec = doc.values_[section];
    if (sec.count(key)) throw Error(ErrorKind::Config, where + ": '" + section + "." + key + "' set twice");
    sec[key] = ValueParser(value, source, start).parse_all();
  }
  return doc;
}

ConfigDocument ConfigDocument::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::vector<std::string> ConfigDocument::sections() const { return order_; }

bool ConfigDocument::has(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section);
  return it != values_.end() && it->second.count(key) > 0;
}

const ConfigValue& ConfigDocument::at(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw Error(ErrorKind::Config, "missing required key '" + section + "." + key + "'");
  return values_.at(section).at(key);
}

double ConfigDocument::number(const std::string& section, const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (!v.is_number()) throw Error(ErrorKind::Config, "'" + section + "." + key + "' must be a number");
  return std::get<double>(v.data);
}

double ConfigDocument::number_or(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

long ConfigDocument::integer_or(const std::string& section, const std::string& key, long fallback) const {
  if (!has(section, key)) return fallback;
  const double v = number(section, key);
  if (v != std::floor(v) || std::abs(v) > 9.0e15)
    throw Error(ErrorKind::Config, "'" + section + "." + key + "' must be an integer");
  return static_cast<long>(v);
}

std::string ConfigDocument::string_or(const std::string& section, const std::string& key,
                                      const std::string& fallback) const {
  if (!has(section, key)) return fallback;
  const ConfigValue& v = at(section, key);
  if (!v.is_string()) throw Error(ErrorKind::Config, "'" + section + "." + key + "' must be a string");
  return std::get<std::string>(v.data);
}

std::vector<double> ConfigDocument::numbers(const std::string& section, const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (!v.is_array()) throw Error(ErrorKind::Config, "'" + section + "." + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& item : std::get<ConfigValue::Array>(v.data)) {
    if (!item.is_number())
      throw Error(ErrorKind::Config, "'" + section + "." + key + "' must be an array of numbers");
    out.push_back(std::get<double>(item.data));
  }
  return out;
}

std::vector<std::vector<double>> ConfigDocument::rows(const std::string& section, const std::string& key) const {
  const ConfigValue& v = at(section, key);
  const std::string what = "'" + section + "." + key + "' must be an array of number arrays";
  if (!v.is_array()) throw Error(ErrorKind::Config, what);
  std::vector<std::vector<double>> out;
  for (const auto& row : std::get<ConfigValue::Array>(v.data)) {
    if (row.is_number()) {  // a bare number is a 1-vector
      out.push_back({std::get<double>(row.data)});
      continue;
    }
    if (!row.is_array()) throw Error(ErrorKind::Config, what);
    std::vector<double> r;
    for (const auto& item : std::get<ConfigValue::Array>(row.data)) {
      if (!item.is_number()) throw Error(ErrorKind::Config, what);
      r.push_back(std::get<double>(item.data));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void ConfigDocument::reject_unknown(const std::string& section, const std::vector<std::string>& allowed) const {
  const auto it = values_.find(section);
  if (it == values_.end()) return;
  for (const auto& [key, value] : it->second)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorKind::Config, source_ + ":" + std::to_string(value.line) + ": unknown key '" + section + "." +
                                         key + "'");
}

void ConfigDocument::reject_unknown_sections(const std::vector<std::string>& allowed) const {
  for (const auto& s : order_)
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end())
      throw Error(ErrorKind::Config, source_ + ": unknown section [" + s + "]");
}

}  // namespace peano
