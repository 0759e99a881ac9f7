#include "capplan/textio.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "capplan/error.hpp"

namespace capplan::textio {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf.data(), end);
}

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) return format_double(value);
  std::array<char, 128> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::fixed, decimals);
  if (ec != std::errc{}) throw Error("format_fixed: conversion failed");
  return std::string(buf.data(), end);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  if (text == "inf" || text == "Inf") return HUGE_VAL;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kSpace);
  return text.substr(first, last - first + 1);
}

Delimiter detect_delimiter(std::string_view header) {
  return header.find(',') != std::string_view::npos ? Delimiter::Comma
                                                    : Delimiter::Whitespace;
}

std::vector<std::string> split_fields(std::string_view line, Delimiter delimiter) {
  std::vector<std::string> fields;
  if (delimiter == Delimiter::Comma) {
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto piece = line.substr(start, comma == std::string_view::npos
                                                ? std::string_view::npos
                                                : comma - start);
      fields.emplace_back(trim(piece));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return fields;
  }
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    const auto start = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    fields.emplace_back(line.substr(start, pos - start));
  }
  return fields;
}

bool is_comment_or_blank(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

std::string kind_tag(std::string_view kind) {
  return "# capplan " + std::string(kind);
}

std::optional<std::string> parse_kind_tag(std::string_view line) {
  constexpr std::string_view kPrefix = "# capplan ";
  line = trim(line);
  if (line.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  return std::string(trim(line.substr(kPrefix.size())));
}

bool KvSection::has(std::string_view key) const { return find(key) != nullptr; }

const std::string* KvSection::find(std::string_view key) const {
  // Later entries override earlier ones.
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->first == key) return &it->second;
  }
  return nullptr;
}

std::string KvSection::get_string(std::string_view key) const {
  if (const auto* v = find(key)) return *v;
  throw ConfigError("missing key '" + std::string(key) + "'" +
                    (name.empty() ? std::string() : " in [" + name + "]"));
}

std::string KvSection::get_string(std::string_view key, std::string fallback) const {
  if (const auto* v = find(key)) return *v;
  return fallback;
}

double KvSection::get_double(std::string_view key) const {
  const auto text = get_string(key);
  const auto value = parse_double(text);
  if (!value) throw ConfigError("key '" + std::string(key) + "': not a number: '" + text + "'");
  return *value;
}

double KvSection::get_double(std::string_view key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KvSection::get_int(std::string_view key) const {
  const auto text = get_string(key);
  const auto value = parse_int(text);
  if (!value) throw ConfigError("key '" + std::string(key) + "': not an integer: '" + text + "'");
  return *value;
}

std::int64_t KvSection::get_int(std::string_view key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<KvSection> parse_kv(std::istream& in) {
  std::vector<KvSection> sections(1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    const auto t = trim(line);
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      sections.push_back(KvSection{std::string(trim(t.substr(1, t.size() - 2))), {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    sections.back().entries.emplace_back(std::string(trim(t.substr(0, eq))),
                                         std::string(trim(t.substr(eq + 1))));
  }
  if (sections.front().entries.empty() && sections.size() > 1) {
    sections.erase(sections.begin());
  }
  return sections;
}

KvSection parse_kv_flat(std::istream& in) {
  KvSection merged;
  for (auto& s : parse_kv(in)) {
    for (auto& e : s.entries) merged.entries.push_back(std::move(e));
  }
  return merged;
}

void write_kv(std::ostream& out, std::string_view key, std::string_view value) {
  out << key << '=' << value << '\n';
}

void write_kv(std::ostream& out, std::string_view key, double value) {
  write_kv(out, key, format_double(value));
}

}  // namespace capplan::textio
