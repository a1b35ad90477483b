#pragma once

#include <string>
#include <vector>

// Minimal CSV support for the interchange files written and read by the
// toolkit. Numbers are written with std::to_chars (shortest round-trip form)
// so repeated runs produce byte-identical artifacts.

namespace mzgrad::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
  std::vector<double> values(const std::string& name) const;  // throws when absent
};

std::string format_double(double v);

void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows);

// Parses a numeric CSV with a header line. Blank lines and lines starting
// with '#' are skipped. Throws std::runtime_error with a line number on
// malformed input.
Table read(const std::string& path);

}  // namespace mzgrad::csv
