#include "mfcal/tables.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfcal/errors.hpp"

namespace mfcal {

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return false;
  if (errno == ERANGE && std::isinf(v)) return false;
  out = v;
  return true;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cur.substr(b, e - b + 1));
    cur.clear();
  };
  for (const char c : line) {
    if (c == ',') flush();
    else cur.push_back(c);
  }
  flush();
  return cells;
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size())
    throw ArgumentError("CsvTable: row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header_.size()));
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto put = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out.push_back(',');
      out += cells[i];
    }
    out.push_back('\n');
  };
  put(header_);
  for (const auto& r : rows_) put(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text_file(path, str()); }

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] != '#') {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw ParseError(0, path.string() + ": missing header row");
  CsvTable table(header);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(lineno, path.string() + ": expected " + std::to_string(header.size()) +
                                   " cells, found " + std::to_string(cells.size()));
    table.add_row(std::move(cells));
  }
  return table;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mfcal
