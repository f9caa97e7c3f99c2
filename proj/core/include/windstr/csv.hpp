#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace windstr {

// Formats a double with the shortest representation that round-trips, so a
// rerun of the same scenario produces byte-identical files. Never uses
// locale-dependent formatting.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& names);
  void row(const std::vector<double>& values);

 private:
  std::ostream& os_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace windstr
