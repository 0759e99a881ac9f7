#pragma once

// Small text helpers shared by the file formats: number formatting that
// round-trips exactly, delimited-row splitting, and key=value documents.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace capplan::textio {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Fixed-point with the given number of decimals.
std::string format_fixed(double value, int decimals);

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

std::string_view trim(std::string_view text);

enum class Delimiter { Comma, Whitespace };

/// Comma if the header line contains one, otherwise whitespace.
Delimiter detect_delimiter(std::string_view header);

std::vector<std::string> split_fields(std::string_view line, Delimiter delimiter);

/// True for blank lines and lines whose first non-space character is '#'.
bool is_comment_or_blank(std::string_view line);

/// First line of every file the toolkit writes: "# capplan <kind>".
std::string kind_tag(std::string_view kind);

/// Returns the kind from a "# capplan <kind>" line, if it is one.
std::optional<std::string> parse_kind_tag(std::string_view line);

/// Ordered key=value pairs, optionally grouped under "[section]" headers.
struct KvSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(std::string_view key) const;
  const std::string* find(std::string_view key) const;

  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
};

/// Parses key=value lines. Entries before the first section header land in a
/// section with an empty name. Comments ('#') and blank lines are skipped.
std::vector<KvSection> parse_kv(std::istream& in);

/// Convenience for documents without sections: all entries merged in order.
KvSection parse_kv_flat(std::istream& in);

void write_kv(std::ostream& out, std::string_view key, std::string_view value);
void write_kv(std::ostream& out, std::string_view key, double value);

}  // namespace capplan::textio
