#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernel.hpp"
#include "selection.hpp"
#include "spd.hpp"

namespace krigmorph {

inline constexpr std::size_t kDefaultChunk = 4096;

/// Node displacements d (m x 3), one row per morphing node in selection
/// order. These are the design variables of a downstream optimizer.
class DisplacementVector {
public:
  explicit DisplacementVector(Matrix values) : values_(std::move(values)) {
    if (values_.cols() != 3) {
      throw DimensionMismatch("displacements must have 3 columns");
    }
    if (!values_.allFinite()) {
      throw DomainError("displacements must be finite");
    }
  }

  static DisplacementVector zero(Eigen::Index nodes) {
    return DisplacementVector(Matrix::Zero(nodes, 3));
  }

  Eigen::Index rows() const { return values_.rows(); }
  const Matrix &values() const { return values_; }

private:
  Matrix values_;
};

inline CholeskyFactor factorize_nodes(const KernelSpec &kernel,
                                      PointSpan nodes) {
  if (nodes.empty()) {
    throw DomainError("no morphing nodes");
  }
  return factorize(cov_matrix(kernel, nodes, nodes));
}

/// sigma^2(x) = K(x,x) - K(x,M) K(M,M)^{-1} K(M,x), clamped to [0, K(x,x)].
inline Vector posterior_variance(const KernelSpec &kernel, PointSpan nodes,
                                 const CholeskyFactor &factor, PointSpan xs,
                                 std::size_t chunk = kDefaultChunk) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  if (chunk == 0) {
    throw DomainError("posterior_variance: chunk must be positive");
  }
  for (std::size_t begin = 0; begin < xs.size(); begin += chunk) {
    const std::size_t len = std::min(chunk, xs.size() - begin);
    const auto block = xs.subspan(begin, len);
    const Matrix v = forward_substitute(factor, cov_matrix(kernel, nodes, block));
    for (std::size_t k = 0; k < len; ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const double prior = kernel.prior_variance(block[k]);
      out[static_cast<Eigen::Index>(begin + k)] =
          std::clamp(prior - v.col(col).squaredNorm(), 0.0, prior);
    }
  }
  return out;
}

inline Vector posterior_variance(const KernelSpec &kernel, PointSpan nodes,
                                 PointSpan xs) {
  if (nodes.empty()) {
    Vector out(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = kernel.prior_variance(xs[i]);
    }
    return out;
  }
  return posterior_variance(kernel, nodes, factorize_nodes(kernel, nodes), xs);
}

/// W = K(M,M)^{-1} K(M,P), assembled `chunk` columns at a time.
inline Matrix build_weights(const KernelSpec &kernel, PointSpan nodes,
                            const CholeskyFactor &factor, PointSpan points,
                            std::size_t chunk = kDefaultChunk) {
  if (chunk == 0) {
    throw DomainError("build_weights: chunk must be positive");
  }
  if (points.empty()) {
    throw DomainError("build_weights: point list is empty");
  }
  Matrix w(static_cast<Eigen::Index>(nodes.size()),
           static_cast<Eigen::Index>(points.size()));
  for (std::size_t begin = 0; begin < points.size(); begin += chunk) {
    const std::size_t len = std::min(chunk, points.size() - begin);
    w.middleCols(static_cast<Eigen::Index>(begin),
                 static_cast<Eigen::Index>(len)) =
        solve(factor, cov_matrix(kernel, nodes, points.subspan(begin, len)));
  }
  return w;
}

inline Matrix build_weights(const KernelSpec &kernel, PointSpan nodes,
                            PointSpan points,
                            std::size_t chunk = kDefaultChunk) {
  return build_weights(kernel, nodes, factorize_nodes(kernel, nodes), points,
                       chunk);
}

/// m(P) = d^T W, returned as |P| x 3 (one displacement row per point).
inline Matrix apply_weights(const Matrix &weights,
                            const DisplacementVector &d) {
  if (weights.rows() != d.rows()) {
    throw DimensionMismatch("weights have " + std::to_string(weights.rows()) +
                            " node rows but displacement has " +
                            std::to_string(d.rows()));
  }
  return weights.transpose() * d.values();
}

struct DisplacementTarget {
  Point3 point;
  Vector3 value;
};

/// Node displacements whose interpolant best matches the prescribed point
/// displacements in the least-squares sense, per coordinate.
///
/// With A = K(M,M)^{-1} K(M,Q) the interpolant at the targets is A^T d. When
/// there are at least as many targets as nodes this solves the normal
/// equations (A A^T) d = A t; with fewer targets it returns the minimum-norm
/// exact fit d = A (A^T A)^{-1} t.
inline DisplacementVector fit_displacements(const KernelSpec &kernel,
                                            PointSpan nodes,
                                            std::span<const DisplacementTarget> targets) {
  if (targets.empty()) {
    throw DomainError("fit_displacements: no targets");
  }
  PointList q;
  q.reserve(targets.size());
  Matrix t(static_cast<Eigen::Index>(targets.size()), 3);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    q.push_back(targets[k].point);
    t.row(static_cast<Eigen::Index>(k)) = targets[k].value.transpose();
  }
  const Matrix a = build_weights(kernel, nodes, q);

  const bool overdetermined = a.cols() >= a.rows();
  const Matrix gram = overdetermined ? Matrix(a * a.transpose())
                                     : Matrix(a.transpose() * a);
  CholeskyFactor normal;
  try {
    normal = factorize(gram);
  } catch (const SingularMatrixError &) {
    normal.jitter = -1.0;
  }
  if (normal.jitter != 0.0) {
    throw SingularMatrixError(
        "fit_displacements: targets do not determine the node displacements "
        "(rank-deficient normal matrix); targets may be too far from all "
        "nodes relative to theta, inside the fixed region, or duplicated");
  }
  if (overdetermined) {
    return DisplacementVector(solve(normal, a * t));
  }
  return DisplacementVector(a * solve(normal, t));
}

struct MeshWeights {
  std::string id;
  Matrix weights;  // m x |P|

  Eigen::Index point_count() const { return weights.cols(); }
};

/// A precomputed morphing parametrization: the selected nodes, their kernel
/// and Cholesky factor, and one weight block per mesh to be morphed.
struct Parametrization {
  KernelSpec kernel;
  PointList nodes;
  std::vector<SelectionStep> selection_trace;
  CholeskyFactor chol;
  std::vector<MeshWeights> meshes;
  /// Largest residual variance over the candidates once selection stopped.
  double final_max_variance = 0.0;

  std::size_t node_count() const { return nodes.size(); }

  const MeshWeights *find_mesh(const std::string &id) const {
    for (const auto &m : meshes) {
      if (m.id == id) {
        return &m;
      }
    }
    return nullptr;
  }

  void add_mesh(std::string id, PointSpan points,
                std::size_t chunk = kDefaultChunk) {
    if (find_mesh(id) != nullptr) {
      throw ConfigError("duplicate mesh id '" + id + "'");
    }
    meshes.push_back(
        {std::move(id), build_weights(kernel, nodes, chol, points, chunk)});
  }

  Vector variance(PointSpan points) const {
    return posterior_variance(kernel, nodes, chol, points);
  }
};

/// Runs node selection over the surface candidates and factorizes K(M,M).
inline Parametrization build_parametrization(const KernelSpec &kernel,
                                             PointSpan surface,
                                             const StopCriteria &stop) {
  SelectionResult sel = select_nodes(kernel, surface, stop);
  if (sel.nodes.empty()) {
    throw NoSelectableCandidate(
        "no morphing node was selected; variance-tol is above every "
        "candidate's prior variance");
  }
  CholeskyFactor chol = factorize_nodes(kernel, sel.nodes);
  return Parametrization{kernel, std::move(sel.nodes),
                         std::move(sel.state.trace), std::move(chol),
                         {}, sel.state.max_residual()};
}

} // namespace krigmorph
