#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hydat::csv {

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_record(std::string_view line);

/// Quotes a field only when it contains a comma, quote or leading/trailing space.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Line-oriented reader that tracks 1-based line numbers and skips blank lines.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// The raw text of the most recent record, without the line terminator.
  const std::string& raw() const noexcept { return line_; }
  std::size_t line_number() const noexcept { return line_number_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t line_number_ = 0;
};

/// Empty (after trimming) means null. Throws ValidationError tagged with the
/// line number on non-numeric text.
std::optional<double> parse_optional_double(std::string_view field, std::size_t line,
                                            std::string_view column);
double parse_double(std::string_view field, std::size_t line, std::string_view column);
long long parse_integer(std::string_view field, std::size_t line, std::string_view column);

std::string trim(std::string_view s);

/// Fixed-point rendering used by every exported table.
std::string fixed(double value, int decimals);

/// Shortest text that parses back to the same double.
std::string exact(double value);

}  // namespace hydat::csv
