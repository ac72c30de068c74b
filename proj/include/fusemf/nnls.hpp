#pragma once

// Lawson-Hanson active-set solver for min ||A x - b||_2 subject to x >= 0.

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "fusemf/schema.hpp"

namespace fusemf {

struct NnlsResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
};

/// KKT residual of a candidate: max over i of the violations of
/// x_i >= 0, g_i >= 0 and x_i * g_i = 0, with g = A^T (A x - b).
inline double nnls_kkt_residual(const Matrix& a, const Vector& b, const Vector& x) {
  const Vector g = a.transpose() * (a * x - b);
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    worst = std::max(worst, -x(i));
    worst = std::max(worst, -g(i));
    worst = std::max(worst, std::abs(x(i) * g(i)));
  }
  return worst;
}

inline NnlsResult nnls(const Matrix& a, const Vector& b, double tolerance = 1e-8, int max_iters = 0) {
  const Index n = a.cols();
  if (a.rows() != b.size()) throw ValidationError("nnls: row count of A must match length of b");
  if (max_iters <= 0) max_iters = static_cast<int>(std::max<Index>(30, 3 * n));

  NnlsResult out;
  out.x = Vector::Zero(n);
  if (n == 0) {
    out.converged = true;
    return out;
  }
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Vector w = a.transpose() * b;

  // Unconstrained least squares on the passive columns; zero elsewhere.
  auto solve_passive = [&]() {
    std::vector<Index> cols;
    for (Index i = 0; i < n; ++i)
      if (passive[i]) cols.push_back(i);
    Matrix ap(a.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) ap.col(static_cast<Index>(c)) = a.col(cols[c]);
    const Vector zp = ap.completeOrthogonalDecomposition().solve(b);
    Vector z = Vector::Zero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zp(static_cast<Index>(c));
    return z;
  };

  while (out.iterations < max_iters) {
    Index best = -1;
    double best_w = tolerance;
    for (Index i = 0; i < n; ++i)
      if (!passive[i] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    if (best < 0) {
      out.converged = true;
      break;
    }
    passive[best] = true;
    ++out.iterations;

    Vector z = solve_passive();
    // Step back toward x until the passive set is feasible again.
    for (int inner = 0; inner < 3 * n + 3; ++inner) {
      double alpha = 1.0;
      bool infeasible = false;
      for (Index i = 0; i < n; ++i)
        if (passive[i] && z(i) <= 0.0) {
          infeasible = true;
          const double denom = out.x(i) - z(i);
          if (denom > 0.0) alpha = std::min(alpha, out.x(i) / denom);
        }
      if (!infeasible) break;
      out.x += alpha * (z - out.x);
      for (Index i = 0; i < n; ++i)
        if (passive[i] && out.x(i) <= 1e-15) {
          passive[i] = false;
          out.x(i) = 0.0;
        }
      z = solve_passive();
    }
    out.x = z.cwiseMax(0.0);
    w = a.transpose() * (b - a * out.x);
  }
  return out;
}

}  // namespace fusemf
