#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace rolediv {

// Euclidean projection onto the probability simplex {w >= 0, sum(w) = 1}
// (sort-based algorithm of Held, Wolfe and Crowder).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_to_simplex(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = v;
  const Eigen::Index n = x.size();
  std::vector<Scalar> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());

  Scalar cumulative = 0;
  Scalar theta = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const Scalar candidate = (cumulative - Scalar(1)) / Scalar(k + 1);
    if (sorted[k] - candidate > Scalar(0)) theta = candidate;
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = (x.array() - theta).max(Scalar(0)).matrix();
  // Renormalise away the rounding drift so callers can rely on sum == 1.
  const Scalar total = w.sum();
  if (total > Scalar(0)) w /= total;
  return w;
}

template <typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& w, typename Derived::Scalar tol = 1e-9) {
  return (w.array() >= -tol).all() && std::abs(w.sum() - 1) <= tol;
}

}  // namespace rolediv
