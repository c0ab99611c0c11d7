#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rits {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict parse: the whole field must be a number.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

/// Splits one delimited line. Fields are trimmed of surrounding blanks and a
/// trailing carriage return. No quoting.
std::vector<std::string> split_fields(std::string_view line, char delimiter = ',');

/// Comma-separated table writer with a mandatory header row.
class TableWriter {
 public:
  TableWriter(std::ostream& out, std::vector<std::string> header);

  TableWriter& cell(const std::string& text);
  TableWriter& cell(double v);
  TableWriter& cell(long long v);
  TableWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  void end_row();

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::size_t pending_ = 0;
};

}  // namespace rits
