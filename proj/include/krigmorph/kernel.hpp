#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "errors.hpp"
#include "fixed_geometry.hpp"
#include "geometry.hpp"

namespace krigmorph {

enum class KernelFamily { gaussian, matern32, matern52 };

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
  case KernelFamily::gaussian:
    return "gaussian";
  case KernelFamily::matern32:
    return "matern32";
  case KernelFamily::matern52:
    return "matern52";
  }
  return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") {
    return KernelFamily::gaussian;
  }
  if (name == "matern32") {
    return KernelFamily::matern32;
  }
  if (name == "matern52") {
    return KernelFamily::matern52;
  }
  throw ConfigError("unknown kernel family '" + std::string(name) +
                    "' (expected gaussian, matern32 or matern52)");
}

/// Isotropic stationary covariance with unit variance, optionally multiplied
/// by the fixed-region modifier f(x) = kappa(0) - kappa(d_F(x)):
///
///   K(x, y) = kappa(|x - y|) * f(x) * f(y)
///
/// The modifier reuses the base family and theta. Immutable after
/// construction and safe to share across threads.
class KernelSpec {
public:
  KernelSpec(KernelFamily family, double theta,
             std::optional<FixedGeometry> fixed = std::nullopt)
      : family_(family), theta_(theta), fixed_(std::move(fixed)) {
    if (!(theta > 0.0) || !std::isfinite(theta)) {
      throw DomainError("theta must be positive and finite");
    }
  }

  KernelFamily family() const { return family_; }
  double theta() const { return theta_; }
  const std::optional<FixedGeometry> &fixed() const { return fixed_; }
  bool has_fixed() const { return fixed_.has_value(); }

  /// Base covariance at distance d, ignoring fixing. kappa(0) = 1.
  double kappa(double d) const {
    if (!(d >= 0.0)) {
      throw DomainError("kappa: distance must be non-negative");
    }
    return kappa_unchecked(d);
  }

  /// Fixed-region modifier f(x); 1 when no fixed geometry is configured.
  double modifier(const Point3 &x) const {
    if (!fixed_) {
      return 1.0;
    }
    return 1.0 - kappa_unchecked(fixed_->distance(x));
  }

  double cov(const Point3 &x, const Point3 &y) const {
    const double base = kappa_unchecked((x - y).norm());
    if (!fixed_) {
      return base;
    }
    return base * (modifier(x) * modifier(y));
  }

  /// Same as cov(x, y) with precomputed modifiers.
  double cov(const Point3 &x, double fx, const Point3 &y, double fy) const {
    const double base = kappa_unchecked((x - y).norm());
    return fixed_ ? base * (fx * fy) : base;
  }

  /// Prior variance K(x, x) = f(x)^2.
  double prior_variance(const Point3 &x) const {
    const double f = modifier(x);
    return f * f;
  }

private:
  double kappa_unchecked(double d) const {
    switch (family_) {
    case KernelFamily::gaussian: {
      const double r = d / theta_;
      return std::exp(-0.5 * r * r);
    }
    case KernelFamily::matern32: {
      const double r = std::sqrt(3.0) * d / theta_;
      return (1.0 + r) * std::exp(-r);
    }
    case KernelFamily::matern52: {
      const double r = std::sqrt(5.0) * d / theta_;
      return (1.0 + r + r * r / 3.0) * std::exp(-r);
    }
    }
    return 0.0;
  }

  KernelFamily family_;
  double theta_;
  std::optional<FixedGeometry> fixed_;
};

inline double kappa(const KernelSpec &spec, double d) { return spec.kappa(d); }

inline double cov(const KernelSpec &spec, const Point3 &x, const Point3 &y) {
  return spec.cov(x, y);
}

inline Vector modifiers(const KernelSpec &spec, PointSpan points) {
  Vector f(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    f[static_cast<Eigen::Index>(i)] = spec.modifier(points[i]);
  }
  return f;
}

/// K(X, Y) with entry (i, j) = cov(X_i, Y_j).
inline Matrix cov_matrix(const KernelSpec &spec, PointSpan xs, PointSpan ys) {
  if (xs.empty() || ys.empty()) {
    throw DomainError("cov_matrix: point lists must be non-empty");
  }
  const Vector fx = modifiers(spec, xs);
  const Vector fy = modifiers(spec, ys);
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto m = static_cast<Eigen::Index>(ys.size());
  Matrix out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, j) = spec.cov(xs[static_cast<std::size_t>(i)], fx[i],
                           ys[static_cast<std::size_t>(j)], fy[j]);
    }
  }
  return out;
}

} // namespace krigmorph
