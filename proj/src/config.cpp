#include "tryw/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <iterator>

#include "tryw/error.hpp"

namespace tryw {

namespace {

class LineParser {
 public:
  LineParser(const std::string& line, int line_no) : s_(line), line_no_(line_no) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("config line " + std::to_string(line_no_) + ": " + what);
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string key() {
    skip_ws();
    if (peek() == '"') return basic_string();
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
            s_[pos_] == '-' || s_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    return s_.substr(start, pos_ - start);
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos_ >= s_.size()) fail("dangling escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  ConfigValue value() {
    skip_ws();
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '[') {
      ++pos_;
      std::vector<std::string> items;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return items;
      }
      while (true) {
        skip_ws();
        items.push_back(basic_string());
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          skip_ws();
          if (peek() == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        expect(']');
        break;
      }
      return items;
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '#' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok) {
      if (ch != '_') digits.push_back(ch);
    }
    if (digits.empty()) fail("missing value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      const auto* first = digits.data() + (digits[0] == '+' ? 1 : 0);
      const auto [p, ec] = std::from_chars(first, digits.data() + digits.size(), v);
      if (ec != std::errc() || p != digits.data() + digits.size()) fail("bad integer: " + tok);
      return v;
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(digits, &used);
      if (used != digits.size()) fail("bad float: " + tok);
      return v;
    } catch (const std::logic_error&) {
      fail("bad float: " + tok);
    }
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
  int line_no_;
};

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::string section;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    start = end + 1;

    LineParser p(line, line_no);
    if (p.at_end_or_comment()) continue;
    if (p.peek() == '[') {
      p.expect('[');
      section = p.key();
      p.expect(']');
      if (!p.at_end_or_comment()) p.fail("trailing characters after section header");
      continue;
    }
    std::string key = p.key();
    if (!section.empty()) key = section + "." + key;
    p.expect('=');
    ConfigValue v = p.value();
    if (!p.at_end_or_comment()) p.fail("trailing characters after value");
    if (doc.values_.count(key)) p.fail("duplicate key: " + key);
    doc.values_[key] = std::move(v);
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  return parse(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::optional<std::string> ConfigDocument::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw ValidationError("config key '" + key + "' must be a string");
}

std::optional<std::int64_t> ConfigDocument::get_int(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  throw ValidationError("config key '" + key + "' must be an integer");
}

std::optional<double> ConfigDocument::get_double(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw ValidationError("config key '" + key + "' must be a number");
}

std::optional<bool> ConfigDocument::get_bool(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* b = std::get_if<bool>(&it->second)) return *b;
  throw ValidationError("config key '" + key + "' must be a boolean");
}

std::optional<std::vector<std::string>> ConfigDocument::get_string_list(
    const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (const auto* l = std::get_if<std::vector<std::string>>(&it->second)) return *l;
  throw ValidationError("config key '" + key + "' must be an array of strings");
}

}  // namespace tryw
