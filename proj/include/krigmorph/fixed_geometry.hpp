#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "errors.hpp"
#include "geometry.hpp"

namespace krigmorph {

struct Sphere {
  Point3 center;
  double radius;

  double distance(const Point3 &x) const {
    return std::max(0.0, (x - center).norm() - radius);
  }
};

/// Axis-aligned box, closed.
struct Box {
  Point3 min;
  Point3 max;

  double distance(const Point3 &x) const {
    const Vector3 below = (min - x).cwiseMax(0.0);
    const Vector3 above = (x - max).cwiseMax(0.0);
    return (below + above).norm();
  }
};

/// Closed half-space {x : (x - point) . normal <= 0}; `normal` points out of
/// the fixed region and is stored normalized.
struct HalfSpace {
  Point3 point;
  Vector3 normal;

  double distance(const Point3 &x) const {
    return std::max(0.0, (x - point).dot(normal));
  }
};

using Primitive = std::variant<Sphere, Box, HalfSpace>;

/// Union of analytic primitives. The distance d_F(x) is the exact Euclidean
/// distance to the union and is zero inside or on the boundary.
class FixedGeometry {
public:
  explicit FixedGeometry(std::vector<Primitive> primitives)
      : primitives_(std::move(primitives)) {
    if (primitives_.empty()) {
      throw ConfigError("fixed geometry needs at least one primitive");
    }
    for (auto &p : primitives_) {
      std::visit([](auto &prim) { validate(prim); }, p);
    }
  }

  const std::vector<Primitive> &primitives() const { return primitives_; }

  double distance(const Point3 &x) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto &p : primitives_) {
      best = std::min(best, std::visit([&](const auto &prim) {
                          return prim.distance(x);
                        }, p));
      if (best == 0.0) {
        break;
      }
    }
    return best;
  }

  bool contains(const Point3 &x) const { return distance(x) == 0.0; }

private:
  static void require_finite(const Eigen::Vector3d &v, const char *what) {
    if (!v.allFinite()) {
      throw ConfigError(std::string(what) + " must be finite");
    }
  }

  static void validate(Sphere &s) {
    require_finite(s.center, "sphere center");
    if (!(s.radius > 0.0) || !std::isfinite(s.radius)) {
      throw ConfigError("sphere radius must be positive");
    }
  }

  static void validate(Box &b) {
    require_finite(b.min, "box min");
    require_finite(b.max, "box max");
    if ((b.min.array() > b.max.array()).any()) {
      throw ConfigError("box min must not exceed max on any axis");
    }
  }

  static void validate(HalfSpace &h) {
    require_finite(h.point, "halfspace point");
    require_finite(h.normal, "halfspace normal");
    const double len = h.normal.norm();
    if (!(len > 0.0)) {
      throw ConfigError("halfspace normal must be non-zero");
    }
    h.normal /= len;
  }

  std::vector<Primitive> primitives_;
};

inline double distance_to_fixed(const FixedGeometry &geom, const Point3 &x) {
  return geom.distance(x);
}

// JSON form: [{"type": "sphere", "center": [x,y,z], "radius": r},
//             {"type": "box", "min": [...], "max": [...]},
//             {"type": "halfspace", "point": [...], "normal": [...]}]

namespace detail {

inline Point3 json_point(const nlohmann::json &obj, const char *key) {
  if (!obj.contains(key)) {
    throw ConfigError(std::string("fixed geometry: missing field '") + key + "'");
  }
  const auto &arr = obj.at(key);
  if (!arr.is_array() || arr.size() != 3) {
    throw ConfigError(std::string("fixed geometry: '") + key +
                      "' must be an array of three numbers");
  }
  Point3 p;
  for (int i = 0; i < 3; ++i) {
    if (!arr[i].is_number()) {
      throw ConfigError(std::string("fixed geometry: '") + key +
                        "' must be an array of three numbers");
    }
    p[i] = arr[i].get<double>();
  }
  return p;
}

inline nlohmann::json point_json(const Point3 &p) {
  return nlohmann::json::array({p.x(), p.y(), p.z()});
}

} // namespace detail

inline FixedGeometry fixed_geometry_from_json(const nlohmann::json &doc) {
  if (!doc.is_array()) {
    throw ConfigError("fixed geometry must be a JSON array of primitives");
  }
  std::vector<Primitive> prims;
  for (const auto &obj : doc) {
    if (!obj.is_object() || !obj.contains("type") || !obj["type"].is_string()) {
      throw ConfigError("fixed geometry: each primitive needs a string 'type'");
    }
    const auto type = obj["type"].get<std::string>();
    if (type == "sphere") {
      if (!obj.contains("radius") || !obj["radius"].is_number()) {
        throw ConfigError("fixed geometry: sphere needs numeric 'radius'");
      }
      prims.emplace_back(Sphere{detail::json_point(obj, "center"),
                                obj["radius"].get<double>()});
    } else if (type == "box") {
      prims.emplace_back(Box{detail::json_point(obj, "min"),
                             detail::json_point(obj, "max")});
    } else if (type == "halfspace") {
      prims.emplace_back(HalfSpace{detail::json_point(obj, "point"),
                                   detail::json_point(obj, "normal")});
    } else {
      throw ConfigError("fixed geometry: unknown primitive type '" + type + "'");
    }
  }
  return FixedGeometry(std::move(prims));
}

inline nlohmann::json to_json(const FixedGeometry &geom) {
  auto doc = nlohmann::json::array();
  for (const auto &p : geom.primitives()) {
    std::visit(
        [&](const auto &prim) {
          using T = std::decay_t<decltype(prim)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            doc.push_back({{"type", "sphere"},
                           {"center", detail::point_json(prim.center)},
                           {"radius", prim.radius}});
          } else if constexpr (std::is_same_v<T, Box>) {
            doc.push_back({{"type", "box"},
                           {"min", detail::point_json(prim.min)},
                           {"max", detail::point_json(prim.max)}});
          } else {
            doc.push_back({{"type", "halfspace"},
                           {"point", detail::point_json(prim.point)},
                           {"normal", detail::point_json(prim.normal)}});
          }
        },
        p);
  }
  return doc;
}

} // namespace krigmorph
