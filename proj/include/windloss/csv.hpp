#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace windloss {

/// Input that cannot be processed at all (missing file, bad header, duplicate key).
/// Row-level problems are reported as rejects instead.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or nullopt.
  std::optional<std::size_t> find_column(std::string_view name) const;
};

/// Comma-separated, optional double-quote quoting with "" escapes, CRLF tolerated.
/// `source` is used in error messages only.
CsvTable read_csv(std::istream& in, std::string_view source = "<stream>");
CsvTable read_csv_file(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);
std::string format_fixed(double value, int decimals);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);
std::string_view trim(std::string_view text);

}  // namespace windloss
