#pragma once

// Role distance and role diversity kernels.
//
// Everything here is a pure function of its arguments and is templated on the
// scalar type so the same code can be instantiated with `long double` when a
// higher-precision reference is wanted.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rolediv/error.hpp"

namespace rolediv::metrics {

template <typename Scalar>
using Distribution = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using DistanceMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

inline constexpr double kDefaultSmoothing = 1e-8;

/// Throws `bad-distribution` unless `p` is non-empty, non-negative and sums to 1.
template <typename Derived>
void check_distribution(const Eigen::MatrixBase<Derived>& p, double tol = 1e-9) {
  using std::abs;
  if (p.size() == 0) throw Error("bad-distribution", "empty distribution");
  if ((p.array() < 0).any()) throw Error("bad-distribution", "negative probability mass");
  if (abs(static_cast<double>(p.sum()) - 1.0) > tol)
    throw Error("bad-distribution", "mass does not sum to one");
}

template <typename Scalar>
struct ActionRoleProfile {
  int agent_id = 0;
  int center_step = 0;
  int half_window = 0;
  Distribution<Scalar> distribution;
};

/// Mean action distribution over steps [T-n, T+n] clipped to the episode.
/// Steps whose `active` flag is false are skipped; the divisor is the number
/// of steps actually averaged. Throws `empty-window` when nothing is averaged.
template <typename Scalar>
Distribution<Scalar> windowed_mean(std::span<const Distribution<Scalar>> history,
                                   std::span<const bool> active, int T, int n) {
  const int length = static_cast<int>(history.size());
  const int lo = std::max(0, T - n);
  const int hi = std::min(length - 1, T + n);
  Distribution<Scalar> sum;
  int count = 0;
  for (int t = lo; t <= hi; ++t) {
    if (!active.empty() && !active[t]) continue;
    if (count == 0) {
      sum = history[t];
    } else {
      if (history[t].size() != sum.size())
        throw Error("dimension-mismatch", "action counts differ inside the window");
      sum += history[t];
    }
    ++count;
  }
  if (count == 0) throw Error("empty-window", "no active step inside the window");
  sum /= sum.sum();
  return sum;
}

template <typename Scalar>
ActionRoleProfile<Scalar> action_role_profile(std::span<const Distribution<Scalar>> history,
                                              int T, int n, int agent_id = 0) {
  if (history.empty()) throw Error("empty-history");
  if (T < 0 || T >= static_cast<int>(history.size()))
    throw Error("bad-window", "center step outside the history");
  if (n < 0) throw Error("bad-window", "negative half window");
  return {agent_id, T, n, windowed_mean<Scalar>(history, {}, T, n)};
}

/// KL(p~||q~) + KL(q~||p~) of the epsilon-smoothed, renormalised inputs.
///
/// Evaluated as sum_k (p_k - q_k)(log p_k - log q_k), which is the same
/// quantity but is bitwise symmetric and non-negative term by term.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar symmetric_kl(const Eigen::MatrixBase<DerivedP>& p,
                                       const Eigen::MatrixBase<DerivedQ>& q,
                                       typename DerivedP::Scalar smoothing = kDefaultSmoothing) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != q.size()) throw Error("dimension-mismatch", "distributions differ in length");
  if (!(smoothing > Scalar(0))) throw Error("bad-smoothing", "smoothing must be positive");
  const Distribution<Scalar> ps = p.array() + smoothing;
  const Distribution<Scalar> qs = q.template cast<Scalar>().array() + smoothing;
  const Distribution<Scalar> pn = ps / ps.sum();
  const Distribution<Scalar> qn = qs / qs.sum();
  Scalar total = 0;
  for (Eigen::Index k = 0; k < pn.size(); ++k) {
    using std::log;
    total += (pn[k] - qn[k]) * (log(pn[k]) - log(qn[k]));
  }
  return total;
}

/// Maps raw action indices onto coarse intent classes (e.g. move / attack).
struct SemanticGrouping {
  std::vector<int> group_of;
  int group_count = 0;

  static SemanticGrouping identity(int action_count) {
    SemanticGrouping g;
    g.group_count = action_count;
    g.group_of.resize(action_count);
    for (int a = 0; a < action_count; ++a) g.group_of[a] = a;
    return g;
  }

  void validate() const {
    if (group_count <= 0) throw Error("bad-grouping", "group_count must be positive");
    if (group_count > static_cast<int>(group_of.size()))
      throw Error("bad-grouping", "more groups than actions");
    for (int g : group_of)
      if (g < 0 || g >= group_count) throw Error("bad-grouping", "group index out of range");
  }
};

template <typename Derived>
Distribution<typename Derived::Scalar> semantic_projection(const Eigen::MatrixBase<Derived>& d,
                                                           const SemanticGrouping& grouping) {
  if (d.size() != static_cast<Eigen::Index>(grouping.group_of.size()))
    throw Error("dimension-mismatch", "grouping domain differs from action count");
  Distribution<typename Derived::Scalar> out =
      Distribution<typename Derived::Scalar>::Zero(grouping.group_count);
  for (Eigen::Index a = 0; a < d.size(); ++a) out[grouping.group_of[a]] += d[a];
  return out;
}

template <typename Scalar>
struct ObservationDisk {
  Point2<Scalar> center = Point2<Scalar>::Zero();
  Scalar radius = 1;
};

/// Fraction of one vision disk covered by another of the same radius, given
/// the centre distance. 1 for coincident disks, 0 once they no longer touch.
template <typename Scalar>
Scalar overlap_fraction(Scalar distance, Scalar radius) {
  using std::acos;
  using std::sqrt;
  if (!(radius > Scalar(0))) throw Error("bad-radius", "vision radius must be positive");
  const Scalar l = distance;
  if (l <= Scalar(0)) return Scalar(1);
  if (l >= Scalar(2) * radius) return Scalar(0);
  // Lens = two circular sectors minus the kite spanned by the centres and the
  // two intersection points; the kite is twice the (l, r, r) triangle.
  const Scalar p = (l + Scalar(2) * radius) / Scalar(2);
  const Scalar heron = std::max(Scalar(0), p * (p - l) * (p - radius) * (p - radius));
  const Scalar kite = Scalar(2) * sqrt(heron);
  const Scalar lens = Scalar(2) * acos(l / (Scalar(2) * radius)) * radius * radius - kite;
  const Scalar fraction = lens / (std::numbers::pi_v<Scalar> * radius * radius);
  return std::clamp(fraction, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar observation_overlap(const ObservationDisk<Scalar>& a, const ObservationDisk<Scalar>& b) {
  using std::abs;
  if (!(a.radius > Scalar(0)) || !(b.radius > Scalar(0)))
    throw Error("bad-radius", "vision radius must be positive");
  if (abs(a.radius - b.radius) > Scalar(1e-12) * std::max(a.radius, b.radius))
    throw Error("unequal-radius", "overlap is defined for a shared vision scope only");
  return overlap_fraction<Scalar>((a.center - b.center).norm(), a.radius);
}

/// |v_i - v_j| normalised by the largest pairwise difference among all values.
/// Returns 0 when every value is equal.
template <typename Derived>
typename Derived::Scalar contribution_distance(const Eigen::MatrixBase<Derived>& values, int i,
                                               int j) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  if (values.size() < 2) throw Error("too-few-agents", "need at least two agent values");
  if (i < 0 || j < 0 || i >= values.size() || j >= values.size() || i == j)
    throw Error("bad-index", "agent pair out of range");
  const Scalar spread = values.maxCoeff() - values.minCoeff();
  if (!(spread > Scalar(0))) return Scalar(0);
  return std::min(Scalar(1), abs(values[i] - values[j]) / spread);
}

/// Throws `bad-distance-matrix` unless `m` is square, symmetric, non-negative
/// with a zero diagonal.
template <typename Derived>
void check_distance_matrix(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) throw Error("bad-distance-matrix", "matrix is not square");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) != 0) throw Error("bad-distance-matrix", "non-zero diagonal");
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) throw Error("bad-distance-matrix", "matrix is not symmetric");
      if (m(i, j) < 0) throw Error("bad-distance-matrix", "negative distance");
    }
  }
}

/// Builds the symmetric pairwise matrix from a distance callback d(i, j), i < j.
template <typename Scalar, typename Fn>
DistanceMatrix<Scalar> pairwise_matrix(int count, Fn&& distance) {
  DistanceMatrix<Scalar> m = DistanceMatrix<Scalar>::Zero(count, count);
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j) m(i, j) = m(j, i) = static_cast<Scalar>(distance(i, j));
  return m;
}

/// Mean role distance over the A(A-1)/2 unordered pairs of distinct agents.
template <typename Derived>
typename Derived::Scalar role_diversity(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) throw Error("bad-distance-matrix", "matrix is not square");
  const Eigen::Index a = m.rows();
  if (a < 2) throw Error("too-few-agents", "diversity needs at least two agents");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < a; ++i)
    for (Eigen::Index j = i + 1; j < a; ++j) total += m(i, j);
  return total / static_cast<Scalar>(a * (a - 1) / 2);
}

}  // namespace rolediv::metrics
