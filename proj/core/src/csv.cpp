#include "safeinit/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "safeinit/errors.hpp"

namespace safeinit::csv {

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("csv: missing column '" + name + "'");
}

static std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw ParseError("csv: " + path + " is empty or lacks a header");
  t.header = split_line(line);

  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw ParseError("csv: " + path + " row " + std::to_string(row_no) +
                       ": expected " + std::to_string(t.header.size()) +
                       " columns, got " + std::to_string(cells.size()));
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      errno = 0;
      char* end = nullptr;
      double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0' || errno == ERANGE)
        throw ParseError("csv: " + path + " row " + std::to_string(row_no) +
                         " column " + t.header[c] + ": not a number: '" + cells[c] + "'");
      vals.push_back(v);
    }
    t.rows.push_back(std::move(vals));
  }
  return t;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw ParseError("csv: cannot write " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& items) {
  std::ofstream out(path);
  if (!out) throw ParseError("kv: cannot write " + path);
  for (const auto& [k, v] : items) out << k << " = " << v << "\n";
}

std::vector<std::pair<std::string, std::string>> read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("kv: cannot open " + path);
  std::vector<std::pair<std::string, std::string>> items;
  std::string line;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("kv: " + path + " line " + std::to_string(row_no) + ": no '='");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    items.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return items;
}

}  // namespace safeinit::csv
