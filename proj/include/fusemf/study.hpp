#pragma once

// Initialization study: relative error of the target relation after a fixed
// number of iterations, per strategy, over a range of seeds.

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "fusemf/factorizer.hpp"
#include "fusemf/init.hpp"
#include "fusemf/predict.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

struct InitStudyRow {
  InitKind kind = InitKind::random;
  std::vector<double> errors;  // one per seed that was not rank-saturated
  int saturated = 0;
};

/// Err(iterations) of the target relation with k = max(k_i, k_j), capped at
/// min(n_i, n_j). Convergence checks are disabled so every run does exactly
/// `iterations` rounds.
inline std::vector<InitStudyRow> init_study(const FusionSchema& schema, std::span<const Index> ranks,
                                            std::span<const InitKind> kinds, std::span<const std::uint64_t> seeds,
                                            int iterations = 20) {
  schema.require_valid();
  check_ranks(schema, ranks);
  const auto& target = schema.target();
  const Index k = std::min({std::max(ranks[target.source.value], ranks[target.target.value]), target.values.rows(),
                            target.values.cols()});
  const FusionProblem problem(schema);
  FitConfig fit;
  fit.max_iters = iterations;
  fit.check_interval = std::max(iterations, 1);
  fit.epsilon = 1e-300;
  std::vector<InitStudyRow> rows;
  for (auto kind : kinds) {
    InitStudyRow row;
    row.kind = kind;
    InitStrategy init;
    init.kind = kind;
    for (auto seed : seeds) {
      const auto res = factorize(problem, init_factors(schema, ranks, init, seed), fit);
      const auto& m = res.model;
      const auto err = relative_error(target.values, m.G[target.source.value], m.core(target.source, target.target),
                                      m.G[target.target.value], k);
      if (err) row.errors.push_back(*err);
      else ++row.saturated;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fusemf
