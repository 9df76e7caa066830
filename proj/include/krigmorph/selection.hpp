#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernel.hpp"

namespace krigmorph {

/// Candidates whose prior or residual variance is at or below this value are
/// treated as already explained and are never selected.
inline constexpr double kMinSelectableVariance = 1e-12;

/// Residuals in [-kResidualClampTolerance, 0) are rounding noise and clamp to
/// zero; anything more negative means the kernel is not PSD.
inline constexpr double kResidualClampTolerance = 1e-10;

/// Either criterion may be omitted, not both.
struct StopCriteria {
  std::optional<std::size_t> max_nodes = std::nullopt;
  std::optional<double> variance_tol = std::nullopt;

  void validate() const {
    if (!max_nodes && !variance_tol) {
      throw ConfigError(
          "selection needs max_nodes, variance_tol, or both");
    }
    if (max_nodes && *max_nodes == 0) {
      throw ConfigError("max-nodes must be positive");
    }
    if (variance_tol && !(*variance_tol >= 0.0)) {
      throw ConfigError("variance-tol must be non-negative");
    }
  }
};

struct SelectionStep {
  std::size_t index;  // into the candidate list as given
  double variance;    // residual variance at the moment of selection

  bool operator==(const SelectionStep &) const = default;
};

/// State of greedy maximum-variance selection, i.e. a partial pivoted
/// Cholesky factorization of K(S, S) that is never formed explicitly.
///
/// Column s of the factor holds, for every candidate i, the entry
/// L(i, s) with K(S_i, M_s) = sum_r L(i, r) L(M_s, r). The residual variance
/// of candidate i is K(S_i, S_i) - sum_s L(i, s)^2, which equals the
/// posterior variance given the selected nodes.
struct SelectionState {
  PointList candidates;
  Vector residual_variance;
  std::vector<Vector> factor_columns;
  std::vector<std::size_t> selected;
  std::vector<SelectionStep> trace;
  /// False for exact duplicates of an earlier candidate.
  std::vector<bool> unique;

  std::size_t size() const { return candidates.size(); }

  double factor(std::size_t i, std::size_t s) const {
    return factor_columns[s][static_cast<Eigen::Index>(i)];
  }

  /// Largest residual over candidates that may still be selected, or 0.
  double max_residual() const {
    double best = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const double r = residual_variance[static_cast<Eigen::Index>(i)];
      if (unique[i] && r > best) {
        best = r;
      }
    }
    return best;
  }
};

struct SelectionResult {
  SelectionState state;
  PointList nodes;
};

namespace detail {

// Marks every candidate that repeats the coordinates of a lower-indexed one.
inline std::vector<bool> unique_mask(PointSpan points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    const auto &p = points[a];
    const auto &q = points[b];
    if (p.x() != q.x()) {
      return p.x() < q.x();
    }
    if (p.y() != q.y()) {
      return p.y() < q.y();
    }
    if (p.z() != q.z()) {
      return p.z() < q.z();
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<bool> mask(points.size(), true);
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (points[order[k]] == points[order[k - 1]]) {
      mask[order[k]] = false;
    }
  }
  return mask;
}

} // namespace detail

/// Greedy selection of morphing nodes: repeatedly picks the candidate with
/// the largest posterior variance (lowest index on ties) and downdates all
/// residuals with one new pivoted-Cholesky column. Stops when the node budget
/// is reached, when the largest residual drops below `variance_tol`, or when
/// no candidate has variance above kMinSelectableVariance.
///
/// Extra memory is one length-n column per selected node plus O(n).
inline SelectionResult select_nodes(const KernelSpec &kernel,
                                    PointSpan candidates,
                                    const StopCriteria &stop) {
  stop.validate();
  if (candidates.empty()) {
    throw DomainError("select_nodes: candidate list is empty");
  }
  for (const auto &p : candidates) {
    if (!p.allFinite()) {
      throw DomainError("select_nodes: candidate coordinates must be finite");
    }
  }

  const std::size_t n = candidates.size();
  const auto ni = static_cast<Eigen::Index>(n);

  SelectionResult result;
  SelectionState &st = result.state;
  st.candidates.assign(candidates.begin(), candidates.end());
  st.unique = detail::unique_mask(candidates);

  const Vector f = modifiers(kernel, candidates);
  st.residual_variance = f.cwiseProduct(f);

  bool any_selectable = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (st.unique[i] &&
        st.residual_variance[static_cast<Eigen::Index>(i)] >
            kMinSelectableVariance) {
      any_selectable = true;
      break;
    }
  }
  if (!any_selectable) {
    throw NoSelectableCandidate(
        "select_nodes: every candidate lies in the fixed region or has "
        "negligible prior variance");
  }

  std::vector<bool> taken(n, false);
  if (stop.max_nodes) {
    const std::size_t budget = std::min(*stop.max_nodes, n);
    st.factor_columns.reserve(budget);
    st.selected.reserve(budget);
    st.trace.reserve(budget);
  }

  while (!stop.max_nodes || st.selected.size() < *stop.max_nodes) {
    std::size_t pivot = n;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = st.residual_variance[static_cast<Eigen::Index>(i)];
      if (st.unique[i] && !taken[i] && r > best) {
        best = r;
        pivot = i;
      }
    }
    if (pivot == n || best <= kMinSelectableVariance) {
      break;
    }
    if (stop.variance_tol && best < *stop.variance_tol) {
      break;
    }

    const Point3 &xj = candidates[pivot];
    const auto pj = static_cast<Eigen::Index>(pivot);
    Vector column(ni);
    for (Eigen::Index i = 0; i < ni; ++i) {
      column[i] = kernel.cov(candidates[static_cast<std::size_t>(i)], f[i], xj,
                             f[pj]);
    }
    for (const auto &prev : st.factor_columns) {
      column.noalias() -= prev[pj] * prev;
    }
    column /= std::sqrt(best);

    for (Eigen::Index i = 0; i < ni; ++i) {
      if (taken[static_cast<std::size_t>(i)]) {
        continue;
      }
      double &r = st.residual_variance[i];
      r -= column[i] * column[i];
      if (r < 0.0) {
        if (r < -kResidualClampTolerance) {
          throw InternalConsistencyError(
              "select_nodes: residual variance " + std::to_string(r) +
              " at candidate " + std::to_string(i) +
              " is negative; the kernel matrix is not positive semi-definite");
        }
        r = 0.0;
      }
    }
    st.residual_variance[pj] = 0.0;
    taken[pivot] = true;

    st.factor_columns.push_back(std::move(column));
    st.selected.push_back(pivot);
    st.trace.push_back({pivot, best});
    result.nodes.push_back(xj);
  }
  return result;
}

} // namespace krigmorph
