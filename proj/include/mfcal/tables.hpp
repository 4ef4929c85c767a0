#pragma once

// Text formatting shared by every emitted file: 17-significant-digit floats
// and simple comma-separated tables.

#include <filesystem>
#include <string>
#include <vector>

namespace mfcal {

/// "%.17g"; NaN is written as NA.
std::string format_double(double x);

/// Parses a full-cell decimal number; returns false on trailing garbage.
bool parse_double(const std::string& cell, double& out);

/// Splits one line on commas, trimming surrounding blanks and a trailing '\r'.
std::vector<std::string> split_csv_line(const std::string& line);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Reads a header + rows table; throws ParseError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mfcal
