#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "whittaker/model.hpp"

// Bundle CSV: optional `# ...` comment lines, header `t,T_1_1,T_2_1,T_2_2,...`
// in level-major order, one row per grid point. Doubles are written in
// shortest round-trip form so reading back is exact.
namespace whittaker::csv {

inline std::string column_name(TriIndex idx) {
  return "T_" + std::to_string(idx.n) + "_" + std::to_string(idx.k);
}

inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw ValidationError("cannot format value");
  return {buf, end};
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError("invalid number '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

// Number of levels whose triangle has exactly `count` entries, or 0.
inline int levels_for_count(std::size_t count) {
  for (int n = 1; triangle_size(n) <= count; ++n)
    if (triangle_size(n) == count) return n;
  return 0;
}

inline void check_header(const std::vector<std::string_view>& cols, std::size_t offset) {
  const int levels = levels_for_count(cols.size() - offset);
  if (levels == 0) throw ValidationError("header column count is not triangular");
  for (std::size_t i = offset; i < cols.size(); ++i) {
    std::string_view c = cols[i];
    if (!c.empty() && c.back() == '\r') c.remove_suffix(1);
    if (c != column_name(tri_index(i - offset)))
      throw ValidationError("unexpected column '" + std::string(c) + "', expected " +
                            column_name(tri_index(i - offset)));
  }
}

struct Document {
  std::vector<std::string> comments;  // comment lines without the leading "# "
  std::string header;
  std::vector<std::string> rows;
};

inline Document read_document(std::istream& in) {
  Document doc;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      doc.comments.emplace_back(body);
    } else if (doc.header.empty()) {
      doc.header = line;
    } else {
      doc.rows.push_back(line);
    }
  }
  if (doc.header.empty()) throw ValidationError("missing CSV header");
  return doc;
}

inline void write_bundle(std::ostream& out, const PathBundle& bundle,
                         const std::vector<std::string>& comments = {},
                         const std::vector<std::string>& footer = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << 't';
  for (std::size_t p = 0; p < bundle.size(); ++p) out << ',' << column_name(tri_index(p));
  out << '\n';
  const auto& grid = bundle.grid();
  for (std::size_t i = 0; i < grid.points(); ++i) {
    out << format_double(grid.time(i));
    for (std::size_t p = 0; p < bundle.size(); ++p) out << ',' << format_double(bundle.path(p)[i]);
    out << '\n';
  }
  for (const auto& c : footer) out << "# " << c << '\n';
}

inline PathBundle parse_bundle(const Document& doc) {
  const auto cols = split(doc.header);
  if (cols.size() < 2 || cols[0] != "t") throw ValidationError("bundle header must start with 't'");
  check_header(cols, 1);
  const int levels = levels_for_count(cols.size() - 1);
  if (doc.rows.size() < 2) throw ValidationError("bundle needs at least two rows");

  std::vector<double> times;
  std::vector<std::vector<double>> values(cols.size() - 1);
  for (const auto& row : doc.rows) {
    const auto cells = split(row);
    if (cells.size() != cols.size())
      throw ValidationError("row has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(cols.size()));
    times.push_back(parse_double(cells[0]));
    for (std::size_t p = 0; p + 1 < cells.size(); ++p) values[p].push_back(parse_double(cells[p + 1]));
  }
  TimeGrid grid(times.front(), times.back(), times.size() - 1);
  const double tol = 1e-9 * std::max(1.0, grid.length());
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - grid.time(i)) > tol) throw ValidationError("bundle time column is not uniform");
  std::vector<SamplePath> paths;
  for (auto& v : values) paths.emplace_back(grid, std::move(v));
  return {levels, std::move(paths)};
}

inline PathBundle read_bundle(std::istream& in) { return parse_bundle(read_document(in)); }

inline PathBundle read_bundle_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_bundle(in);
}

inline void write_configuration(std::ostream& out, const TriangularConfiguration& config,
                                const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t p = 0; p < config.size(); ++p) out << (p ? "," : "") << column_name(tri_index(p));
  out << '\n';
  for (std::size_t p = 0; p < config.size(); ++p) out << (p ? "," : "") << format_double(config.entries()[p]);
  out << '\n';
}

// Accepts either a one-row configuration file or a bundle file (first row is used).
inline TriangularConfiguration read_configuration(std::istream& in) {
  const auto doc = read_document(in);
  auto cols = split(doc.header);
  const std::size_t offset = (!cols.empty() && cols[0] == "t") ? 1 : 0;
  check_header(cols, offset);
  if (doc.rows.empty()) throw ValidationError("configuration file has no values");
  const auto cells = split(doc.rows.front());
  if (cells.size() != cols.size()) throw ValidationError("configuration row width mismatch");
  std::vector<double> v;
  for (std::size_t i = offset; i < cells.size(); ++i) v.push_back(parse_double(cells[i]));
  return {levels_for_count(v.size()), std::move(v)};
}

inline TriangularConfiguration read_configuration_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_configuration(in);
}

}  // namespace whittaker::csv
