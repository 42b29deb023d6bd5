#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cryopose {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Atomic write; no quoting (fields must not contain commas or newlines).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Round-trip-exact decimal formatting ("%.17g").
std::string fmt_double(double v);
/// Empty string for absent optionals (the "field not applicable" convention).
std::string fmt_optional(const std::optional<double>& v);
std::optional<double> parse_optional(const std::string& field);
double parse_double(const std::string& field);

}  // namespace cryopose
