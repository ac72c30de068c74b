#pragma once

// Early integration baseline: the assembled relation matrix is factorized as
// one unstructured symmetric matrix R ~ G S G^T with a single dense G and a
// full S, so neither factor keeps the per-type zero blocks.

#include <Eigen/Dense>

#include <vector>

#include "fusemf/blockops.hpp"
#include "fusemf/factorizer.hpp"
#include "fusemf/init.hpp"
#include "fusemf/nnls.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

struct FlatSystem {
  Matrix R;
  Matrix theta_pos;  // summed positive parts of all Theta^(t)
  Matrix theta_neg;
  std::vector<Index> row_offsets;  // where each type's objects start in R
  BlockKey target;
  Index rank = 1;  // sum of per-type ranks
};

inline FlatSystem flatten_early_integration(const FusionSchema& schema, std::span<const Index> ranks) {
  schema.require_valid();
  check_ranks(schema, ranks);
  const auto layout = BlockLayout::make(schema, ranks);
  FlatSystem flat;
  flat.R = assemble_relation_block(schema, layout);
  flat.theta_pos = Matrix::Zero(flat.R.rows(), flat.R.cols());
  flat.theta_neg = Matrix::Zero(flat.R.rows(), flat.R.cols());
  for (int t = 1; t <= schema.max_constraint_count(); ++t) {
    const auto split = split_pos_neg(assemble_constraint_block(schema, layout, t));
    flat.theta_pos += split.pos;
    flat.theta_neg += split.neg;
  }
  flat.row_offsets = layout.row_offsets;
  flat.target = {schema.target().source, schema.target().target};
  flat.rank = layout.total_rank();
  return flat;
}

struct FlatModel {
  Matrix G;  // sum(n) x k, no block structure
  Matrix S;  // k x k, full
  FitTrace trace;
};

inline double flat_objective(const FlatSystem& flat, const Matrix& g, const Matrix& s) {
  return (flat.R - g * s * g.transpose()).squaredNorm() +
         (g.transpose() * (flat.theta_pos - flat.theta_neg) * g).trace();
}

/// Same alternating updates as the structured factorizer, applied to the
/// whole matrix at once.
inline FlatModel fit_flat(const FlatSystem& flat, const InitStrategy& init, const FitConfig& config) {
  config.check();
  FlatModel m;
  m.G = init_factor(init, flat.R, flat.rank, config.seed);
  auto s_step = [&](const Matrix& g) {
    const Matrix p = gram_pinv(g);
    return Matrix(p * (g.transpose() * flat.R * g) * p);
  };
  m.S = s_step(m.G);
  const auto ti = flat.target.row.value, tj = flat.target.col.value;
  const Index r0 = flat.row_offsets[ti], c0 = flat.row_offsets[tj];
  const Index nr = flat.row_offsets[ti + 1] - r0, nc = flat.row_offsets[tj + 1] - c0;
  for (int it = 1; it <= config.max_iters; ++it) {
    const Matrix gs = m.G * m.S;
    const auto n = split_pos_neg(flat.R * gs);
    const auto d = split_pos_neg(m.S * (m.G.transpose() * m.G) * m.S);
    Matrix num = n.pos + m.G * d.neg + flat.theta_neg * m.G;
    Matrix den = n.neg + m.G * d.pos + flat.theta_pos * m.G;
    den.array() += kUpdateDelta;
    m.G = m.G.array() * (num.array() / den.array()).sqrt();
    m.S = s_step(m.G);
    m.trace.iterations_run = it;
    if (it % config.check_interval != 0) continue;
    m.trace.objective_samples.emplace_back(it, flat_objective(flat, m.G, m.S));
    const double res =
        (flat.R.block(r0, c0, nr, nc) - m.G.middleRows(r0, nr) * m.S * m.G.middleRows(c0, nc).transpose()).norm();
    m.trace.target_residuals.emplace_back(it, res);
    if (res < config.epsilon) {
      m.trace.converged = true;
      break;
    }
  }
  return m;
}

}  // namespace fusemf
