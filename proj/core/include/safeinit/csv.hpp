#pragma once

#include <string>
#include <utility>
#include <vector>

namespace safeinit::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws ParseError
};

// Strict numeric CSV with a mandatory header row; errors name row/column.
Table read(const std::string& path);
void write(const std::string& path, const Table& table);

// Flat key = value serialization used for certificates and policies.
void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& items);
std::vector<std::pair<std::string, std::string>> read_kv(const std::string& path);

std::string format_double(double v);

}  // namespace safeinit::csv
