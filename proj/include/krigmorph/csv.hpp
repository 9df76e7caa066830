#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "mesh_io.hpp"
#include "param.hpp"

namespace krigmorph {

/// Node displacements as CSV: one "x,y,z" row per node in selection order.
/// A first line that does not parse as numbers is taken as a header. Blank
/// lines are ignored.
inline DisplacementVector read_displacements_csv(
    const std::filesystem::path &path) {
  const auto lines = io_detail::read_lines(path);
  std::vector<Vector3> rows;
  bool first = true;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      continue;
    }
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      auto cell = line.substr(start, comma == std::string_view::npos
                                         ? std::string_view::npos
                                         : comma - start);
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cells.push_back(b == std::string_view::npos ? std::string_view{}
                                                  : cell.substr(b, e - b + 1));
      if (comma == std::string_view::npos) {
        break;
      }
      start = comma + 1;
    }
    if (cells.size() != 3) {
      throw ParseError("expected 3 comma-separated values, found " +
                       std::to_string(cells.size()), ln + 1);
    }
    try {
      rows.emplace_back(io_detail::parse_double(cells[0], ln + 1, "value"),
                        io_detail::parse_double(cells[1], ln + 1, "value"),
                        io_detail::parse_double(cells[2], ln + 1, "value"));
    } catch (const ParseError &) {
      if (!first) {
        throw;
      }
    }
    first = false;
  }
  if (rows.empty()) {
    throw ParseError(path.string() + ": no displacement rows");
  }
  Matrix d(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return DisplacementVector(std::move(d));
}

inline void write_displacements_csv(const DisplacementVector &d,
                                    const std::filesystem::path &path) {
  std::string out = "x,y,z\n";
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      if (k > 0) {
        out += ',';
      }
      io_detail::format_double(out, d.values()(i, k));
    }
    out += '\n';
  }
  io_detail::write_text(path, out);
}

} // namespace krigmorph
