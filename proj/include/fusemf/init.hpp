#pragma once

// Initialization of the per-type factors G_i, and the error metric used to
// compare initializations against the best rank-k approximation.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusemf/random.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

enum class InitKind { random, random_c, random_acol, kmeans, nndsvda };

inline std::string_view to_string(InitKind kind) {
  switch (kind) {
    case InitKind::random: return "random";
    case InitKind::random_c: return "random_c";
    case InitKind::random_acol: return "random_acol";
    case InitKind::kmeans: return "kmeans";
    case InitKind::nndsvda: return "nndsvda";
  }
  return "?";
}

inline std::optional<InitKind> parse_init_kind(std::string_view name) {
  for (auto k : {InitKind::random, InitKind::random_c, InitKind::random_acol, InitKind::kmeans, InitKind::nndsvda})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

struct InitStrategy {
  InitKind kind = InitKind::random_acol;
  Index acol_subset_size = 5;
  double random_c_fraction = 0.2;  // share of densest columns forming the pool
  Index random_c_subset_size = 5;
  double kmeans_floor = 0.01;
  int kmeans_max_iters = 100;
};

/// Horizontal concatenation of every relation touching `type`, in declaration
/// order: R_ij as is when the type is the source, R_ji^T when it is the target.
inline Matrix build_profile(const FusionSchema& schema, TypeId type) {
  std::vector<const Matrix*> parts;
  std::vector<bool> transposed;
  Index cols = 0;
  for (const auto& rel : schema.relations()) {
    if (rel.source == type) {
      parts.push_back(&rel.values);
      transposed.push_back(false);
      cols += rel.values.cols();
    } else if (rel.target == type) {
      parts.push_back(&rel.values);
      transposed.push_back(true);
      cols += rel.values.rows();
    }
  }
  if (parts.empty()) throw ValidationError("type '" + schema.type(type).name + "' takes part in no relation");
  Matrix profile(schema.count(type), cols);
  Index at = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (transposed[i]) {
      profile.middleCols(at, parts[i]->rows()) = parts[i]->transpose();
      at += parts[i]->rows();
    } else {
      profile.middleCols(at, parts[i]->cols()) = *parts[i];
      at += parts[i]->cols();
    }
  }
  return profile;
}

namespace detail {

inline std::vector<Index> sample_without_replacement(Index population, Index count, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(population));
  std::iota(idx.begin(), idx.end(), Index{0});
  count = std::min(count, population);
  // partial Fisher-Yates
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, population - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

inline Vector column_average(const Matrix& profile, std::span<const Index> cols) {
  Vector acc = Vector::Zero(profile.rows());
  for (Index c : cols) acc += profile.col(c);
  return acc / static_cast<double>(cols.size());
}

/// Lloyd iterations from k-means++ seeds. Returns the cluster of each row.
inline std::vector<Index> kmeans_rows(const Matrix& data, Index k, int max_iters, Rng& rng) {
  const Index n = data.rows();
  Matrix centers(k, data.cols());
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  centers.row(0) = data.row(std::uniform_int_distribution<Index>(0, n - 1)(rng));
  for (Index c = 1; c < k; ++c) {
    double total = 0.0;
    for (Index p = 0; p < n; ++p) {
      d2[p] = std::min(d2[p], (data.row(p) - centers.row(c - 1)).squaredNorm());
      total += d2[p];
    }
    Index chosen = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (chosen = 0; chosen < n - 1; ++chosen) {
        u -= d2[chosen];
        if (u < 0.0) break;
      }
    } else {
      chosen = std::uniform_int_distribution<Index>(0, n - 1)(rng);
    }
    centers.row(c) = data.row(chosen);
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Index p = 0; p < n; ++p) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double d = (data.row(p) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[p] != best) {
        assign[p] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, data.cols());
    std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
    for (Index p = 0; p < n; ++p) {
      sums.row(assign[p]) += data.row(p);
      ++sizes[assign[p]];
    }
    for (Index c = 0; c < k; ++c)
      if (sizes[c] > 0) centers.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
  }
  return assign;
}

// NNDSVD with zeros filled by the mean of the data ("a" variant).
inline Matrix nndsvda(const Matrix& a, Index k) {
  const Index n = a.rows();
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix& U = svd.matrixU();
  const Matrix& V = svd.matrixV();
  const Vector& sigma = svd.singularValues();
  Matrix w = Matrix::Zero(n, k);
  const Index available = std::min<Index>(k, sigma.size());
  for (Index j = 0; j < available; ++j) {
    if (j == 0) {
      w.col(0) = std::sqrt(sigma(0)) * U.col(0).cwiseAbs();
      continue;
    }
    const Vector x = U.col(j), y = V.col(j);
    const Vector xp = x.cwiseMax(0.0), xn = (-x).cwiseMax(0.0);
    const Vector yp = y.cwiseMax(0.0), yn = (-y).cwiseMax(0.0);
    const double xpn = xp.norm(), ypn = yp.norm(), xnn = xn.norm(), ynn = yn.norm();
    const double mp = xpn * ypn, mn = xnn * ynn;
    if (mp >= mn) {
      if (xpn > 0.0) w.col(j) = std::sqrt(sigma(j) * mp) * xp / xpn;
    } else {
      if (xnn > 0.0) w.col(j) = std::sqrt(sigma(j) * mn) * xn / xnn;
    }
  }
  const double fill = std::max(a.mean(), 0.0);
  for (Index p = 0; p < w.rows(); ++p)
    for (Index q = 0; q < w.cols(); ++q)
      if (w(p, q) == 0.0) w(p, q) = fill;
  return w;
}

}  // namespace detail

/// One non-negative n_i x k factor from a type profile. Deterministic in seed.
inline Matrix init_factor(const InitStrategy& strategy, const Matrix& profile, Index k, std::uint64_t seed) {
  const Index n = profile.rows();
  const Index m = profile.cols();
  if (k < 1) throw ValidationError("rank must be >= 1");
  if (k > n) throw ValidationError("rank " + std::to_string(k) + " exceeds object count " + std::to_string(n));
  if (m < 1) throw ValidationError("empty profile");
  Rng rng(seed);
  Matrix g(n, k);

  switch (strategy.kind) {
    case InitKind::random:
      for (Index q = 0; q < k; ++q)
        for (Index p = 0; p < n; ++p) g(p, q) = uniform01(rng);
      break;

    case InitKind::random_acol: {
      if (strategy.acol_subset_size < 1) throw ValidationError("acol_subset_size must be >= 1");
      const Index subset = std::min(strategy.acol_subset_size, m);
      for (Index q = 0; q < k; ++q) {
        auto cols = detail::sample_without_replacement(m, subset, rng);
        g.col(q) = detail::column_average(profile, cols);
      }
      g = g.cwiseMax(0.0);
      break;
    }

    case InitKind::random_c: {
      std::vector<Index> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), Index{0});
      const Vector norms = profile.colwise().norm().transpose();
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms(a) > norms(b); });
      const Index pool = std::clamp<Index>(
          static_cast<Index>(std::ceil(strategy.random_c_fraction * static_cast<double>(m))), 1, m);
      const Index subset = std::min(std::max<Index>(strategy.random_c_subset_size, 1), pool);
      for (Index q = 0; q < k; ++q) {
        auto picks = detail::sample_without_replacement(pool, subset, rng);
        for (auto& p : picks) p = order[static_cast<std::size_t>(p)];
        g.col(q) = detail::column_average(profile, picks);
      }
      g = g.cwiseMax(0.0);
      break;
    }

    case InitKind::kmeans: {
      const auto assign = detail::kmeans_rows(profile, k, strategy.kmeans_max_iters, rng);
      g.setConstant(strategy.kmeans_floor);
      for (Index p = 0; p < n; ++p) g(p, assign[p]) = 1.0;
      break;
    }

    case InitKind::nndsvda:
      g = detail::nndsvda(profile, k);
      break;
  }
  return g;
}

/// Initial G_i for every type; type i draws from stream i of `seed`.
inline std::vector<Matrix> init_factors(const FusionSchema& schema, std::span<const Index> ranks,
                                        const InitStrategy& strategy, std::uint64_t seed) {
  std::vector<Matrix> G;
  G.reserve(schema.type_count());
  for (const auto& t : schema.types())
    G.push_back(init_factor(strategy, build_profile(schema, t.id), ranks[t.id.value], derive_seed(seed, t.id.value)));
  return G;
}

/// Frobenius distance from R to its best rank-k approximation.
inline double svd_distance(const Matrix& r, Index k) {
  const Index full = std::min(r.rows(), r.cols());
  if (k < 1 || k > full) throw ValidationError("svd_distance: k must lie in [1, min(rows, cols)]");
  Eigen::BDCSVD<Matrix> svd(r);
  const Vector& s = svd.singularValues();
  return s.tail(full - k).norm();
}

/// (||R - G_i S G_j^T|| - d) / d with d the rank-k SVD distance. Empty when
/// d < 1e-12 (rank-saturated: the approximation is already exact).
inline std::optional<double> relative_error(const Matrix& r, const Matrix& gi, const Matrix& s, const Matrix& gj,
                                            Index k) {
  const double d = svd_distance(r, k);
  if (d < 1e-12) return std::nullopt;
  const double fit = (r - gi * s * gj.transpose()).norm();
  return (fit - d) / d;
}

}  // namespace fusemf
