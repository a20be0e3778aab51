#include "cli/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "cli/scenario.hpp"

namespace biphoton::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& what) {
  throw InputError(origin + ":" + std::to_string(line) + ": " + what);
}

double parse_cell(const std::string& cell, const std::string& origin, std::size_t line,
                  const std::string& column) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    fail(origin, line, "column " + column + ": '" + cell + "' is not a finite number");
  return v;
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header)
    : out_(out), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::logic_error("CSV row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
  out_ << '\n';
}

VisibilityScan parse_scan_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw InputError(origin + ": empty file, expected a header row");

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_l = column("l_ag_um");
  const auto c_v = column("visibility");
  const auto c_s = column("sigma");
  if (!c_l || !c_v) fail(origin, lineno, "header must name columns l_ag_um and visibility");

  VisibilityScan scan;
  scan.kind = ScanKind::visibility;
  scan.source = ScanSource::measured;
  std::vector<std::pair<std::size_t, ScanPoint>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      fail(origin, lineno, "expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(cells.size()));
    ScanPoint p;
    p.l_ag = parse_cell(cells[*c_l], origin, lineno, "l_ag_um") * 1e-6;
    p.value = parse_cell(cells[*c_v], origin, lineno, "visibility");
    if (p.value < 0.0 || p.value > 1.0) fail(origin, lineno, "visibility must lie in [0, 1]");
    if (c_s) {
      p.sigma = parse_cell(cells[*c_s], origin, lineno, "sigma");
      if (!(*p.sigma > 0.0)) fail(origin, lineno, "sigma must be positive");
    }
    rows.emplace_back(lineno, p);
  }
  if (rows.empty()) throw InputError(origin + ": no data rows");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.l_ag < b.second.l_ag; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].second.l_ag == rows[i - 1].second.l_ag)
      fail(origin, rows[i].first, "duplicate l_ag_um value");
  for (auto& r : rows) scan.points.push_back(r.second);
  return scan;
}

VisibilityScan load_scan_csv(const std::string& path) { return parse_scan_csv(read_file(path), path); }

}  // namespace biphoton::cli
