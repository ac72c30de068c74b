#pragma once

// Factorization rank estimation: fit quality on the target relation,
// consensus-clustering stability (cophenetic correlation) and a
// coordinate-wise bisection over per-type rank ranges.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fusemf/factorizer.hpp"
#include "fusemf/predict.hpp"
#include "fusemf/random.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

/// Sum of squared residuals over the observed cells.
inline double rss(const Matrix& r, const Matrix& reconstruction, const Mask& observed) {
  double acc = 0.0;
  for (Index q = 0; q < r.cols(); ++q)
    for (Index p = 0; p < r.rows(); ++p)
      if (observed(p, q)) {
        const double e = r(p, q) - reconstruction(p, q);
        acc += e * e;
      }
  return acc;
}

/// 1 - RSS / sum(R^2). RSS runs over observed cells, the denominator over
/// every cell. Empty for an all-zero R.
inline std::optional<double> explained_variance(const Matrix& r, const Matrix& reconstruction, const Mask& observed) {
  const double total = r.squaredNorm();
  if (total <= 0.0) return std::nullopt;
  return 1.0 - rss(r, reconstruction, observed) / total;
}

/// Binary n x n matrix: 1 where two rows of G share their argmax column
/// (ties go to the lowest column).
inline Matrix connectivity_matrix(const Matrix& g) {
  const Index n = g.rows();
  std::vector<Index> label(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) {
    Index best = 0;
    for (Index q = 1; q < g.cols(); ++q)
      if (g(p, q) > g(p, best)) best = q;
    label[p] = best;
  }
  Matrix c(n, n);
  for (Index p = 0; p < n; ++p)
    for (Index q = 0; q < n; ++q) c(p, q) = label[p] == label[q] ? 1.0 : 0.0;
  return c;
}

/// Cophenetic distances of average-linkage (UPGMA) clustering of a distance matrix.
inline Matrix average_linkage_cophenetic(const Matrix& dist) {
  const Index n = dist.rows();
  Matrix coph = Matrix::Zero(n, n);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) members[p] = {p};
  Matrix d = dist;  // inter-cluster average distances, indexed by cluster slot
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  for (Index merge = 0; merge + 1 < n; ++merge) {
    Index a = -1, b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (Index j = i + 1; j < n; ++j)
        if (alive[j] && d(i, j) < best) {
          best = d(i, j);
          a = i;
          b = j;
        }
    }
    for (Index p : members[a])
      for (Index q : members[b]) coph(p, q) = coph(q, p) = best;
    const double na = static_cast<double>(members[a].size());
    const double nb = static_cast<double>(members[b].size());
    for (Index k = 0; k < n; ++k) {
      if (!alive[k] || k == a || k == b) continue;
      d(a, k) = d(k, a) = (na * d(a, k) + nb * d(b, k)) / (na + nb);
    }
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    members[b].clear();
    alive[b] = false;
  }
  return coph;
}

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// Correlation between the consensus distances 1 - C and the cophenetic
/// distances of their average-linkage tree. Empty when the distances are
/// constant.
inline std::optional<double> cophenetic(const Matrix& consensus) {
  const Index n = consensus.rows();
  const Matrix dist = Matrix::Ones(n, n) - consensus;
  const Matrix coph = average_linkage_cophenetic(dist);
  std::vector<double> x, y;
  for (Index p = 0; p < n; ++p)
    for (Index q = p + 1; q < n; ++q) {
      x.push_back(dist(p, q));
      y.push_back(coph(p, q));
    }
  return pearson(x, y);
}

struct RankQuality {
  std::vector<Index> ranks;
  double rss = 0.0;
  double r2 = 0.0;          // held-in cells of the target
  double heldout_r2 = 0.0;  // cells hidden during internal cross-validation
  double rho = 1.0;         // cophenetic correlation of the target's source type
  std::vector<double> rho_per_type;
};

struct RankEvalConfig {
  int n_runs = 5;
  double holdout_fraction = 0.2;
  FitConfig fit;
  InitStrategy init;
  std::uint64_t seed = 0;
  double r2_tolerance = 0.01;  // r^2 gain below which a larger rank is not worth it
};

/// Copy of the schema with a random share of the observed target cells
/// hidden (value 0, unobserved). Returns the schema and the hidden-cell mask.
inline std::pair<FusionSchema, Mask> hide_target_cells(const FusionSchema& schema, double fraction, Rng& rng) {
  const auto idx = *schema.target_index();
  const auto& target = schema.relations()[idx];
  std::vector<std::pair<Index, Index>> cells;
  for (Index q = 0; q < target.values.cols(); ++q)
    for (Index p = 0; p < target.values.rows(); ++p)
      if (target.observed(p, q)) cells.emplace_back(p, q);
  const auto hide = static_cast<Index>(std::llround(fraction * static_cast<double>(cells.size())));
  Mask hidden = Mask::Constant(target.values.rows(), target.values.cols(), false);
  for (Index i = 0; i < hide; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), cells.size() - 1);
    std::swap(cells[static_cast<std::size_t>(i)], cells[pick(rng)]);
    hidden(cells[static_cast<std::size_t>(i)].first, cells[static_cast<std::size_t>(i)].second) = true;
  }
  Matrix values = target.values;
  Mask observed = target.observed;
  for (Index q = 0; q < values.cols(); ++q)
    for (Index p = 0; p < values.rows(); ++p)
      if (hidden(p, q)) {
        values(p, q) = 0.0;
        observed(p, q) = false;
      }
  FusionSchema train = schema;
  train.replace_relation_data(idx, std::move(values), std::move(observed));
  return {std::move(train), std::move(hidden)};
}

/// Internal cross-validation of one rank vector: n_runs seeded fits, each on
/// a random (1 - holdout) share of the observed target cells. RSS and r^2 are
/// averaged over runs; rho comes from the consensus of the per-run
/// connectivity matrices. A constant consensus (perfectly stable) counts as 1.
inline RankQuality evaluate_rank_vector(const FusionSchema& schema, std::span<const Index> ranks,
                                        const RankEvalConfig& config) {
  schema.require_valid();
  check_ranks(schema, ranks);
  if (config.n_runs < 1) throw ValidationError("n_runs must be >= 1");
  const auto& target = schema.target();
  const auto ti = target.source, tj = target.target;
  const double total = target.values.squaredNorm();

  RankQuality out;
  out.ranks.assign(ranks.begin(), ranks.end());
  std::vector<Matrix> consensus;
  for (const auto& t : schema.types()) consensus.push_back(Matrix::Zero(t.count, t.count));

  for (int run = 0; run < config.n_runs; ++run) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(run)));
    auto [train, hidden] = hide_target_cells(schema, config.holdout_fraction, rng);
    FitConfig fit = config.fit;
    fit.seed = derive_seed(config.seed, 100 + static_cast<std::uint64_t>(run));
    const auto result = factorize(train, ranks, config.init, fit);
    const Matrix rec = reconstruct(result.model, ti, tj);
    const auto& tr = train.target();
    out.rss += rss(tr.values, rec, tr.observed);
    out.r2 += explained_variance(tr.values, rec, tr.observed).value_or(0.0);
    out.heldout_r2 += total > 0.0 ? 1.0 - rss(target.values, rec, hidden) / total : 0.0;
    for (std::size_t i = 0; i < consensus.size(); ++i) consensus[i] += connectivity_matrix(result.model.G[i]);
  }
  const double runs = static_cast<double>(config.n_runs);
  out.rss /= runs;
  out.r2 /= runs;
  out.heldout_r2 /= runs;
  for (auto& c : consensus) {
    c /= runs;
    out.rho_per_type.push_back(cophenetic(c).value_or(1.0));
  }
  out.rho = out.rho_per_type[ti.value];
  return out;
}

struct RankRange {
  TypeId type;
  Index lo = 1;
  Index hi = 1;
};

struct RankSelection {
  std::vector<Index> ranks;
  std::vector<RankQuality> log;  // every evaluated rank vector, in evaluation order
  std::vector<int> evaluations_per_type;
};

/// Final pick among the evaluated ranks of one type: the smallest rank whose
/// held-in r^2 is within `tolerance` of the best r^2 seen for that type,
/// i.e. the point where adding latent dimensions stops paying off.
inline Index pick_rank(const std::map<Index, RankQuality>& evaluated, double tolerance) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [k, q] : evaluated) best = std::max(best, q.r2);
  for (const auto& [k, q] : evaluated)
    if (q.r2 >= best - tolerance) return k;
  return evaluated.rbegin()->first;
}

/// Coordinate-wise bisection for the r^2 elbow. Types are searched in the
/// order given; ranks of other types stay at their current estimate (range
/// midpoints at the start, `initial` for types without a range). For each
/// type lo and hi are evaluated, then the midpoint: if it already comes
/// within `tolerance` of hi's r^2 the search continues in [lo, mid], else in
/// [mid, hi], until the interval has width <= 1.
template <class Evaluator>
RankSelection select_ranks_with(std::span<const RankRange> ranges, std::vector<Index> initial, Evaluator&& evaluate,
                                double tolerance = 0.01) {
  if (ranges.empty()) throw ValidationError("select_ranks needs at least one rank range");
  if (!(tolerance >= 0.0)) throw ValidationError("rank tolerance must be >= 0");
  for (const auto& r : ranges) {
    if (r.lo < 1 || r.lo > r.hi) throw ValidationError("invalid rank range");
    if (r.type.value >= initial.size()) throw ValidationError("rank range names an unknown type");
    initial[r.type.value] = (r.lo + r.hi) / 2;
  }
  RankSelection out;
  std::map<std::vector<Index>, RankQuality> cache;
  std::vector<Index> current = std::move(initial);

  for (const auto& range : ranges) {
    std::map<Index, RankQuality> seen;
    int evaluations = 0;
    auto quality = [&](Index k) -> const RankQuality& {
      std::vector<Index> v = current;
      v[range.type.value] = k;
      auto it = cache.find(v);
      if (it == cache.end()) {
        it = cache.emplace(v, evaluate(std::as_const(v))).first;
        out.log.push_back(it->second);
        ++evaluations;
      }
      seen[k] = it->second;
      return it->second;
    };
    Index lo = range.lo, hi = range.hi;
    quality(lo);
    quality(hi);
    while (hi - lo > 1) {
      const Index mid = lo + (hi - lo) / 2;
      if (quality(hi).r2 - quality(mid).r2 <= tolerance)
        hi = mid;
      else
        lo = mid;
    }
    current[range.type.value] = pick_rank(seen, tolerance);
    out.evaluations_per_type.push_back(evaluations);
  }
  out.ranks = current;
  return out;
}

inline RankSelection select_ranks(const FusionSchema& schema, std::span<const RankRange> ranges,
                                  const RankEvalConfig& config, std::vector<Index> initial = {}) {
  schema.require_valid();
  if (initial.empty())
    for (const auto& t : schema.types()) initial.push_back(std::min<Index>(2, t.count));
  for (const auto& r : ranges)
    if (r.type.value >= schema.type_count() || r.hi > schema.count(r.type))
      throw ValidationError("rank range exceeds the object count of its type");
  return select_ranks_with(
      ranges, std::move(initial),
      [&](const std::vector<Index>& ranks) { return evaluate_rank_vector(schema, ranks, config); },
      config.r2_tolerance);
}

}  // namespace fusemf
