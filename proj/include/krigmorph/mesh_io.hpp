#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "mesh.hpp"

namespace krigmorph {

enum class MeshFormat { vtk_legacy_ascii, obj, xyz, auto_detect };

using WarningSink = std::function<void(std::string_view)>;

inline MeshFormat format_from_path(const std::filesystem::path &path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".vtk") {
    return MeshFormat::vtk_legacy_ascii;
  }
  if (ext == ".obj") {
    return MeshFormat::obj;
  }
  if (ext == ".xyz") {
    return MeshFormat::xyz;
  }
  throw ConfigError("cannot infer mesh format from extension '" + ext +
                    "' of " + path.string() + " (expected .vtk, .obj or .xyz)");
}

namespace io_detail {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) {
      ++j;
    }
    if (j > i) {
      out.push_back(line.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line,
                           const char *what = "coordinate") {
  if (!tok.empty() && tok.front() == '+') {
    tok.remove_prefix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("non-numeric " + std::string(what) + " '" +
                     std::string(tok) + "'", line);
  }
  if (!std::isfinite(v)) {
    throw ParseError("non-finite " + std::string(what) + " '" +
                     std::string(tok) + "'", line);
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view tok, std::size_t line, const char *what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("expected integer " + std::string(what) + ", got '" +
                     std::string(tok) + "'", line);
  }
  return v;
}

inline void format_double(std::string &out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline std::vector<std::string> read_lines(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

inline void write_text(const std::filesystem::path &path,
                       const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << text;
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

// Whitespace-separated token stream over the lines of a legacy VTK file,
// remembering the line each token came from.
class TokenStream {
public:
  TokenStream(const std::vector<std::string> &lines, std::size_t first_line)
      : lines_(lines), line_(first_line) {}

  bool next(std::string_view &tok) {
    while (pos_ >= toks_.size()) {
      if (line_ >= lines_.size()) {
        return false;
      }
      toks_ = split(lines_[line_]);
      pos_ = 0;
      ++line_;
    }
    tok = toks_[pos_++];
    return true;
  }

  std::string_view expect(const char *what) {
    std::string_view tok;
    if (!next(tok)) {
      throw ParseError(std::string("unexpected end of file, expected ") + what,
                       line_);
    }
    return tok;
  }

  /// One-based line number of the most recent token.
  std::size_t line() const { return line_; }

  /// Rest of the current line, for keywords with free-form arguments.
  std::vector<std::string_view> rest_of_line() {
    std::vector<std::string_view> out(toks_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      toks_.end());
    pos_ = toks_.size();
    return out;
  }

private:
  const std::vector<std::string> &lines_;
  std::size_t line_;
  std::vector<std::string_view> toks_;
  std::size_t pos_ = 0;
};

inline bool is_polydata_block(std::string_view kw) {
  return kw == "VERTICES" || kw == "LINES" || kw == "POLYGONS" ||
         kw == "TRIANGLE_STRIPS";
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

inline Mesh read_vtk(const std::filesystem::path &path) {
  const auto lines = read_lines(path);
  if (lines.size() < 4 || !lines[0].starts_with("# vtk DataFile Version")) {
    throw ParseError("missing '# vtk DataFile Version' header", 1);
  }
  if (upper(split(lines[2]).empty() ? "" : split(lines[2])[0]) != "ASCII") {
    throw ParseError("only ASCII legacy VTK is supported", 3);
  }
  const auto ds = split(lines[3]);
  if (ds.size() != 2 || upper(ds[0]) != "DATASET") {
    throw ParseError("expected 'DATASET <type>'", 4);
  }
  Mesh mesh;
  mesh.id = path.stem().string();
  const auto type = upper(ds[1]);
  if (type == "POLYDATA") {
    mesh.dataset = Dataset::polydata;
  } else if (type == "UNSTRUCTURED_GRID") {
    mesh.dataset = Dataset::unstructured_grid;
  } else {
    throw ParseError("unsupported VTK dataset type '" + std::string(ds[1]) +
                     "' (only UNSTRUCTURED_GRID and POLYDATA)", 4);
  }

  TokenStream ts(lines, 4);
  bool have_points = false;
  std::size_t cells_count = 0;
  std::size_t point_data = 0;
  bool in_point_data = false;
  std::string_view kw_tok;
  while (ts.next(kw_tok)) {
    const auto kw = upper(kw_tok);
    const std::size_t kw_line = ts.line();
    if (kw == "POINTS") {
      if (have_points) {
        throw ParseError("duplicate POINTS section", kw_line);
      }
      const auto n = parse_int<std::size_t>(ts.expect("point count"), kw_line,
                                            "point count");
      ts.expect("point data type");
      mesh.points.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
          const auto tok = ts.expect("point coordinate");
          mesh.points[i][k] = parse_double(tok, ts.line());
        }
      }
      have_points = true;
    } else if (is_polydata_block(kw) || kw == "CELLS") {
      if ((kw == "CELLS") != (mesh.dataset == Dataset::unstructured_grid)) {
        throw ParseError("section " + kw + " does not belong to dataset " +
                         type, kw_line);
      }
      const auto n = parse_int<std::size_t>(ts.expect("cell count"), kw_line,
                                            "cell count");
      const auto size = parse_int<std::size_t>(ts.expect("cell list size"),
                                               kw_line, "cell list size");
      CellBlock block{kw, {}};
      block.cells.reserve(n);
      std::size_t consumed = 0;
      for (std::size_t c = 0; c < n; ++c) {
        const auto k = parse_int<std::size_t>(ts.expect("cell size"), ts.line(),
                                              "cell size");
        std::vector<std::size_t> cell(k);
        for (auto &idx : cell) {
          idx = parse_int<std::size_t>(ts.expect("cell index"), ts.line(),
                                       "cell index");
          if (have_points && idx >= mesh.points.size()) {
            throw ParseError(kw + " index " + std::to_string(idx) +
                             " out of range (" +
                             std::to_string(mesh.points.size()) + " points)",
                             ts.line());
          }
        }
        consumed += k + 1;
        block.cells.push_back(std::move(cell));
      }
      if (consumed != size) {
        throw ParseError(kw + " list size " + std::to_string(size) +
                         " does not match contents (" +
                         std::to_string(consumed) + ")", kw_line);
      }
      if (kw == "CELLS") {
        cells_count = n;
      }
      mesh.cells.push_back(std::move(block));
    } else if (kw == "CELL_TYPES") {
      const auto n = parse_int<std::size_t>(ts.expect("cell type count"),
                                            kw_line, "cell type count");
      if (n != cells_count) {
        throw ParseError("CELL_TYPES count " + std::to_string(n) +
                         " does not match CELLS count " +
                         std::to_string(cells_count), kw_line);
      }
      mesh.cell_types.resize(n);
      for (auto &t : mesh.cell_types) {
        t = parse_int<int>(ts.expect("cell type"), ts.line(), "cell type");
      }
    } else if (kw == "POINT_DATA") {
      point_data = parse_int<std::size_t>(ts.expect("point data count"),
                                          kw_line, "point data count");
      if (point_data != mesh.points.size()) {
        throw ParseError("POINT_DATA count " + std::to_string(point_data) +
                         " does not match point count " +
                         std::to_string(mesh.points.size()), kw_line);
      }
      in_point_data = true;
    } else if (kw == "SCALARS" && in_point_data) {
      const auto args = ts.rest_of_line();
      if (args.size() < 2 || args.size() > 3) {
        throw ParseError("expected 'SCALARS name type [components]'", kw_line);
      }
      if (args.size() == 3 &&
          parse_int<int>(args[2], kw_line, "component count") != 1) {
        throw ParseError("only single-component SCALARS are supported",
                         kw_line);
      }
      std::string_view next = ts.expect("LOOKUP_TABLE or value");
      if (upper(next) == "LOOKUP_TABLE") {
        ts.expect("lookup table name");
        next = ts.expect("scalar value");
      }
      std::vector<double> values(point_data);
      for (std::size_t i = 0; i < point_data; ++i) {
        if (i > 0) {
          next = ts.expect("scalar value");
        }
        values[i] = parse_double(next, ts.line(), "scalar value");
      }
      mesh.point_fields.push_back({std::string(args[0]), std::move(values)});
    } else {
      throw ParseError("unsupported or malformed section '" +
                       std::string(kw_tok) + "'", kw_line);
    }
  }
  if (!have_points) {
    throw ParseError("no POINTS section");
  }
  if (mesh.dataset == Dataset::unstructured_grid &&
      mesh.cell_types.size() != cells_count) {
    throw ParseError("CELLS section without matching CELL_TYPES");
  }
  for (const auto &block : mesh.cells) {
    for (const auto &cell : block.cells) {
      for (auto idx : cell) {
        if (idx >= mesh.points.size()) {
          throw ParseError(block.keyword + " index " + std::to_string(idx) +
                           " out of range");
        }
      }
    }
  }
  return mesh;
}

inline std::string vtk_text(const Mesh &mesh) {
  std::string out;
  out.reserve(mesh.points.size() * 64);
  out += "# vtk DataFile Version 3.0\n";
  out += mesh.id.empty() ? "krigmorph" : mesh.id;
  out += "\nASCII\nDATASET ";
  out += mesh.dataset == Dataset::polydata ? "POLYDATA" : "UNSTRUCTURED_GRID";
  out += "\nPOINTS " + std::to_string(mesh.points.size()) + " double\n";
  for (const auto &p : mesh.points) {
    format_double(out, p.x());
    out += ' ';
    format_double(out, p.y());
    out += ' ';
    format_double(out, p.z());
    out += '\n';
  }
  for (const auto &block : mesh.cells) {
    std::size_t size = 0;
    for (const auto &c : block.cells) {
      size += c.size() + 1;
    }
    out += block.keyword + ' ' + std::to_string(block.cells.size()) + ' ' +
           std::to_string(size) + '\n';
    for (const auto &c : block.cells) {
      out += std::to_string(c.size());
      for (auto idx : c) {
        out += ' ';
        out += std::to_string(idx);
      }
      out += '\n';
    }
    if (block.keyword == "CELLS") {
      out += "CELL_TYPES " + std::to_string(mesh.cell_types.size()) + '\n';
      for (int t : mesh.cell_types) {
        out += std::to_string(t);
        out += '\n';
      }
    }
  }
  if (!mesh.point_fields.empty()) {
    out += "POINT_DATA " + std::to_string(mesh.points.size()) + '\n';
    for (const auto &f : mesh.point_fields) {
      out += "SCALARS " + f.name + " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) {
        format_double(out, v);
        out += '\n';
      }
    }
  }
  return out;
}

inline Mesh read_obj(const std::filesystem::path &path) {
  const auto lines = read_lines(path);
  Mesh mesh;
  mesh.id = path.stem().string();
  CellBlock faces{"POLYGONS", {}};
  std::vector<std::size_t> face_lines;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto toks = split(lines[ln]);
    if (toks.empty() || toks[0].starts_with('#')) {
      continue;
    }
    if (toks[0] == "v") {
      if (toks.size() < 4) {
        throw ParseError("vertex needs three coordinates", ln + 1);
      }
      mesh.points.emplace_back(parse_double(toks[1], ln + 1),
                               parse_double(toks[2], ln + 1),
                               parse_double(toks[3], ln + 1));
    } else if (toks[0] == "f") {
      if (toks.size() < 2) {
        throw ParseError("face without vertices", ln + 1);
      }
      std::vector<std::size_t> face;
      for (std::size_t k = 1; k < toks.size(); ++k) {
        const auto vtx = toks[k].substr(0, toks[k].find('/'));
        const auto idx = parse_int<long long>(vtx, ln + 1, "face index");
        long long resolved = idx > 0 ? idx - 1
                                     : static_cast<long long>(mesh.points.size()) + idx;
        if (idx == 0 || resolved < 0) {
          throw ParseError("face index " + std::string(vtx) + " out of range",
                           ln + 1);
        }
        face.push_back(static_cast<std::size_t>(resolved));
      }
      faces.cells.push_back(std::move(face));
      face_lines.push_back(ln + 1);
    }
  }
  for (std::size_t c = 0; c < faces.cells.size(); ++c) {
    for (auto idx : faces.cells[c]) {
      if (idx >= mesh.points.size()) {
        throw ParseError("face index " + std::to_string(idx + 1) +
                         " out of range (" + std::to_string(mesh.points.size()) +
                         " vertices)", face_lines[c]);
      }
    }
  }
  if (!faces.cells.empty()) {
    mesh.cells.push_back(std::move(faces));
  }
  return mesh;
}

inline std::string obj_text(const Mesh &mesh) {
  std::string out;
  out.reserve(mesh.points.size() * 64);
  for (const auto &p : mesh.points) {
    out += "v ";
    format_double(out, p.x());
    out += ' ';
    format_double(out, p.y());
    out += ' ';
    format_double(out, p.z());
    out += '\n';
  }
  for (const auto &block : mesh.cells) {
    for (const auto &c : block.cells) {
      out += 'f';
      for (auto idx : c) {
        out += ' ';
        out += std::to_string(idx + 1);
      }
      out += '\n';
    }
  }
  return out;
}

inline Mesh read_xyz(const std::filesystem::path &path) {
  const auto lines = read_lines(path);
  Mesh mesh;
  mesh.id = path.stem().string();
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    line = line.substr(0, line.find('#'));
    const auto toks = split(line);
    if (toks.empty()) {
      continue;
    }
    if (toks.size() != 3) {
      throw ParseError("expected three coordinates, found " +
                       std::to_string(toks.size()) + " values", ln + 1);
    }
    mesh.points.emplace_back(parse_double(toks[0], ln + 1),
                             parse_double(toks[1], ln + 1),
                             parse_double(toks[2], ln + 1));
  }
  return mesh;
}

inline std::string xyz_text(const Mesh &mesh) {
  std::string out;
  out.reserve(mesh.points.size() * 64);
  for (const auto &p : mesh.points) {
    format_double(out, p.x());
    out += ' ';
    format_double(out, p.y());
    out += ' ';
    format_double(out, p.z());
    out += '\n';
  }
  return out;
}

} // namespace io_detail

/// Reads a mesh; points keep their file order. The mesh id is the file stem.
inline Mesh read_mesh(const std::filesystem::path &path,
                      MeshFormat format = MeshFormat::auto_detect) {
  if (format == MeshFormat::auto_detect) {
    format = format_from_path(path);
  }
  Mesh mesh;
  switch (format) {
  case MeshFormat::vtk_legacy_ascii:
    mesh = io_detail::read_vtk(path);
    break;
  case MeshFormat::obj:
    mesh = io_detail::read_obj(path);
    break;
  case MeshFormat::xyz:
  default:
    mesh = io_detail::read_xyz(path);
    break;
  }
  if (mesh.points.empty()) {
    throw ParseError(path.string() + ": no points");
  }
  return mesh;
}

/// Writes coordinates with 17 significant digits so a read gives back the
/// same doubles. Point fields need VTK; XYZ drops connectivity (reported to
/// `warn`); OBJ holds surface polygons only.
inline void write_mesh(const Mesh &mesh, const std::filesystem::path &path,
                       MeshFormat format = MeshFormat::auto_detect,
                       const WarningSink &warn = {}) {
  mesh.validate();
  if (format == MeshFormat::auto_detect) {
    format = format_from_path(path);
  }
  if (format != MeshFormat::vtk_legacy_ascii && !mesh.point_fields.empty()) {
    throw ConfigError("point fields can only be written to VTK files");
  }
  switch (format) {
  case MeshFormat::vtk_legacy_ascii:
    io_detail::write_text(path, io_detail::vtk_text(mesh));
    break;
  case MeshFormat::obj:
    for (const auto &block : mesh.cells) {
      if (block.keyword != "POLYGONS") {
        throw ConfigError("OBJ output supports polygon faces only, mesh has " +
                          block.keyword);
      }
    }
    io_detail::write_text(path, io_detail::obj_text(mesh));
    break;
  case MeshFormat::xyz:
  default:
    if (mesh.has_connectivity() && warn) {
      warn("XYZ output drops the connectivity of mesh '" + mesh.id + "'");
    }
    io_detail::write_text(path, io_detail::xyz_text(mesh));
    break;
  }
}

} // namespace krigmorph
