// Minimal CSV writer/reader for the experiment artifacts. Values are written
// with %.17g so emitted files round-trip bit-exactly and runs hash-compare.

#ifndef SVBMPC_CSV_HPP
#define SVBMPC_CSV_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace svbmpc {

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const
  {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw std::runtime_error("CsvTable: no column named " + name);
  }

  std::vector<double> column(const std::string& name) const
  {
    const int idx = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(idx)]);
    return out;
  }
};

inline std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const CsvTable& table)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw std::runtime_error("write_csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
  if (!out)
    throw std::runtime_error("write_csv: write failed for " + path);
}

inline CsvTable read_csv(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("read_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.columns.push_back(cell);

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.columns.size());
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      const double v = std::stod(cell, &pos);
      row.push_back(v);
    }
    if (row.size() != table.columns.size())
      throw std::runtime_error("read_csv: ragged row in " + path);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace svbmpc

#endif  // SVBMPC_CSV_HPP
