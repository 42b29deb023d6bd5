#include "cryopose/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cryopose/errors.hpp"
#include "cryopose/io.hpp"

namespace cryopose {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require_column(const std::string& name) const {
  const int c = column(name);
  CP_CHECK(c >= 0, DataError, "CSV is missing required column '" + name + "'");
  return c;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  CP_CHECK(in.good(), DataError, "cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split_line(line);
      first = false;
    } else {
      auto fields = split_line(line);
      CP_CHECK(fields.size() == table.header.size(), DataError,
               "CSV row width differs from header in " + path);
      table.rows.push_back(std::move(fields));
    }
  }
  CP_CHECK(!first, DataError, "CSV file has no header: " + path);
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& row : rows) {
    CP_CHECK(row.size() == header.size(), Error, "CSV row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  atomic_write_file(path, os.str());
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_optional(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

std::optional<double> parse_optional(const std::string& field) {
  if (field.empty()) return std::nullopt;
  return parse_double(field);
}

double parse_double(const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    CP_CHECK(pos == field.size(), DataError, "trailing characters in number: " + field);
    return v;
  } catch (const std::invalid_argument&) {
    throw DataError("not a number: '" + field + "'");
  } catch (const std::out_of_range&) {
    throw DataError("number out of range: '" + field + "'");
  }
}

}  // namespace cryopose
