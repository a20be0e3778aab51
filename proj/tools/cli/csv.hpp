#pragma once

// Plot-ready CSV: '.' decimal separator, LF line endings, one header row.
// Numbers carry 17 significant digits so that a write/read cycle is exact.

#include <ostream>
#include <string>
#include <vector>

#include "biphoton/mzi.hpp"

namespace biphoton::cli {

std::string format_number(double v);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

/// Reads a scan with columns l_ag_um, visibility and optionally sigma (any
/// order, extra columns ignored). Rows are sorted by l_ag_um. Throws
/// InputError with the offending line number.
VisibilityScan parse_scan_csv(const std::string& text, const std::string& origin = "<string>");
VisibilityScan load_scan_csv(const std::string& path);

}  // namespace biphoton::cli
