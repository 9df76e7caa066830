#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "base64.hpp"
#include "errors.hpp"
#include "fixed_geometry.hpp"
#include "kernel.hpp"
#include "param.hpp"

// Parametrization file (.mprm): one UTF-8 JSON document.
//
//   format_version     1
//   kernel             {"family": "gaussian" | "matern32" | "matern52",
//                       "theta": number}
//   fixed              fixed-geometry array or null
//   nodes              [[x, y, z], ...] in selection order
//   selection_trace    [{"index": i, "variance": v}, ...]
//   jitter             diagonal shift used when factorizing K(M,M)
//   final_max_variance largest candidate variance after selection
//   meshes             [{"id": s, "point_count": n, "weights_b64": b}, ...]
//
// weights_b64 is the m x point_count weight block, row-major, each entry a
// little-endian IEEE-754 binary64, base64 encoded.

namespace krigmorph::mprm {

inline constexpr int kFormatVersion = 1;

inline std::string encode_weights(const Matrix &w) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(w.size()) * 8);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(w(r, c));
      for (int b = 0; b < 8; ++b) {
        bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      }
    }
  }
  return base64::encode(bytes);
}

inline Matrix decode_weights(const std::string &text, Eigen::Index rows,
                             Eigen::Index cols, const std::string &id) {
  const auto bytes = base64::decode(text);
  const auto expected = static_cast<std::size_t>(rows) *
                        static_cast<std::size_t>(cols) * 8;
  if (bytes.size() != expected) {
    throw ParseError("mesh '" + id + "': weights payload size is " +
                     std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(expected) + " (" + std::to_string(rows) +
                     " nodes x " + std::to_string(cols) + " points x 8)");
  }
  Matrix w(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= std::uint64_t{bytes[k++]} << (8 * b);
      }
      w(r, c) = std::bit_cast<double>(bits);
    }
  }
  return w;
}

inline nlohmann::ordered_json to_json(const Parametrization &p) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["format_version"] = kFormatVersion;
  doc["kernel"] = {{"family", std::string(to_string(p.kernel.family()))},
                   {"theta", p.kernel.theta()}};
  if (p.kernel.fixed()) {
    doc["fixed"] = to_json(*p.kernel.fixed());
  } else {
    doc["fixed"] = nullptr;
  }
  auto nodes = ordered_json::array();
  for (const auto &x : p.nodes) {
    nodes.push_back({x.x(), x.y(), x.z()});
  }
  doc["nodes"] = std::move(nodes);
  auto trace = ordered_json::array();
  for (const auto &s : p.selection_trace) {
    trace.push_back({{"index", s.index}, {"variance", s.variance}});
  }
  doc["selection_trace"] = std::move(trace);
  doc["jitter"] = p.chol.jitter;
  doc["final_max_variance"] = p.final_max_variance;
  auto meshes = ordered_json::array();
  for (const auto &m : p.meshes) {
    meshes.push_back({{"id", m.id},
                      {"point_count", m.point_count()},
                      {"weights_b64", encode_weights(m.weights)}});
  }
  doc["meshes"] = std::move(meshes);
  return doc;
}

namespace detail {

template <class Json>
const Json &field(const Json &obj, const char *key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string("parametrization: missing field '") + key +
                     "'");
  }
  return obj.at(key);
}

template <class Json> double number(const Json &v, const char *what) {
  if (!v.is_number()) {
    throw ParseError(std::string("parametrization: '") + what +
                     "' must be a number");
  }
  return v.template get<double>();
}

} // namespace detail

inline Parametrization from_json(const nlohmann::json &doc) {
  using detail::field;
  using detail::number;

  const auto &version = field(doc, "format_version");
  if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
    throw ParseError("unsupported format_version " + version.dump() +
                     " (expected " + std::to_string(kFormatVersion) + ")");
  }
  try {
    const auto &kernel_doc = field(doc, "kernel");
    const auto &family = field(kernel_doc, "family");
    if (!family.is_string()) {
      throw ParseError("parametrization: kernel family must be a string");
    }
    std::optional<FixedGeometry> fixed;
    if (const auto &f = field(doc, "fixed"); !f.is_null()) {
      fixed = fixed_geometry_from_json(f);
    }
    KernelSpec kernel(parse_kernel_family(family.get<std::string>()),
                      number(field(kernel_doc, "theta"), "theta"),
                      std::move(fixed));

    PointList nodes;
    for (const auto &n : field(doc, "nodes")) {
      if (!n.is_array() || n.size() != 3) {
        throw ParseError("parametrization: each node must be [x, y, z]");
      }
      nodes.emplace_back(number(n[0], "node"), number(n[1], "node"),
                         number(n[2], "node"));
    }
    if (nodes.empty()) {
      throw ParseError("parametrization: no nodes");
    }

    std::vector<SelectionStep> trace;
    for (const auto &s : field(doc, "selection_trace")) {
      const auto &idx = field(s, "index");
      if (!idx.is_number_unsigned()) {
        throw ParseError("parametrization: trace index must be unsigned");
      }
      trace.push_back({idx.get<std::size_t>(),
                       number(field(s, "variance"), "variance")});
    }

    CholeskyFactor chol = factorize_nodes(kernel, nodes);
    const double final_var =
        number(field(doc, "final_max_variance"), "final_max_variance");
    Parametrization p{std::move(kernel), std::move(nodes), std::move(trace),
                      std::move(chol), {}, final_var};

    const auto m = static_cast<Eigen::Index>(p.node_count());
    for (const auto &mesh : field(doc, "meshes")) {
      const auto &id = field(mesh, "id");
      const auto &count = field(mesh, "point_count");
      const auto &payload = field(mesh, "weights_b64");
      if (!id.is_string() || !count.is_number_unsigned() ||
          !payload.is_string()) {
        throw ParseError("parametrization: malformed mesh entry");
      }
      const auto name = id.get<std::string>();
      if (p.find_mesh(name) != nullptr) {
        throw ParseError("parametrization: duplicate mesh id '" + name + "'");
      }
      p.meshes.push_back(
          {name, decode_weights(payload.get<std::string>(), m,
                                count.get<Eigen::Index>(), name)});
    }
    return p;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("parametrization: ") + e.what());
  } catch (const ConfigError &e) {
    throw ParseError(std::string("parametrization: ") + e.what());
  } catch (const DomainError &e) {
    throw ParseError(std::string("parametrization: ") + e.what());
  }
}

inline void save(const Parametrization &p, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << to_json(p).dump(1) << '\n';
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

inline Parametrization load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

} // namespace krigmorph::mprm
