#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sharplab::cli {

/// 17 significant digits, round-trip exact; "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

/// Header plus rows, written RFC-4180 style (CRLF-free: rows end in '\n').
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;
};

/// Quotes fields containing separators, quotes or line breaks.
std::string csv_field(const std::string& field);

/// Minimal RFC-4180 reader, used by tests and the acceptance runner.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

}  // namespace sharplab::cli
