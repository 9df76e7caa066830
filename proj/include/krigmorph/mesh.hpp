#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace krigmorph {

enum class Dataset { polydata, unstructured_grid };

/// One connectivity section, e.g. VTK "POLYGONS" or "CELLS". Each cell is a
/// list of zero-based point indices. Cells are carried through untouched.
struct CellBlock {
  std::string keyword;
  std::vector<std::vector<std::size_t>> cells;

  bool operator==(const CellBlock &) const = default;
};

struct PointField {
  std::string name;
  std::vector<double> values;

  bool operator==(const PointField &) const = default;
};

struct Mesh {
  std::string id;
  PointList points;
  Dataset dataset = Dataset::polydata;
  std::vector<CellBlock> cells;
  /// VTK cell type codes, one per cell of the "CELLS" block.
  std::vector<int> cell_types;
  std::vector<PointField> point_fields;

  std::size_t point_count() const { return points.size(); }

  bool has_connectivity() const { return !cells.empty(); }

  const PointField *field(const std::string &name) const {
    for (const auto &f : point_fields) {
      if (f.name == name) {
        return &f;
      }
    }
    return nullptr;
  }

  void set_field(std::string name, std::vector<double> values) {
    if (values.size() != points.size()) {
      throw DimensionMismatch("field '" + name + "' has " +
                              std::to_string(values.size()) +
                              " values for " + std::to_string(points.size()) +
                              " points");
    }
    for (auto &f : point_fields) {
      if (f.name == name) {
        f.values = std::move(values);
        return;
      }
    }
    point_fields.push_back({std::move(name), std::move(values)});
  }

  void validate() const {
    if (points.empty()) {
      throw DomainError("mesh '" + id + "' has no points");
    }
    for (const auto &block : cells) {
      for (const auto &cell : block.cells) {
        for (auto idx : cell) {
          if (idx >= points.size()) {
            throw DomainError("mesh '" + id + "': " + block.keyword +
                              " index " + std::to_string(idx) +
                              " out of range");
          }
        }
      }
    }
    for (const auto &f : point_fields) {
      if (f.values.size() != points.size()) {
        throw DimensionMismatch("mesh '" + id + "': field '" + f.name +
                                "' length does not match point count");
      }
    }
  }

  bool operator==(const Mesh &other) const {
    if (id != other.id || dataset != other.dataset || cells != other.cells ||
        cell_types != other.cell_types || point_fields != other.point_fields ||
        points.size() != other.points.size()) {
      return false;
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i] != other.points[i]) {
        return false;
      }
    }
    return true;
  }
};

/// Copy of `mesh` with point i moved by row i of `displacement` (|P| x 3).
/// Connectivity and fields are unchanged.
inline Mesh displace_points(const Mesh &mesh, const Matrix &displacement) {
  if (displacement.rows() != static_cast<Eigen::Index>(mesh.point_count()) ||
      displacement.cols() != 3) {
    throw DimensionMismatch(
        "displacement is " + std::to_string(displacement.rows()) + "x" +
        std::to_string(displacement.cols()) + ", mesh has " +
        std::to_string(mesh.point_count()) + " points");
  }
  Mesh out = mesh;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    out.points[i] += displacement.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return out;
}

} // namespace krigmorph
