#pragma once

// Penalized collective tri-factorization R_ij ~ G_i S_ij G_j^T fitted by
// alternating a closed-form S step with a multiplicative G step.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fusemf/blockops.hpp"
#include "fusemf/init.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

struct FactorSystem {
  std::vector<Index> ranks;
  std::vector<Matrix> G;
  std::map<BlockKey, Matrix> S;

  bool has_core(TypeId i, TypeId j) const { return S.contains({i, j}); }
  const Matrix& core(TypeId i, TypeId j) const {
    auto it = S.find({i, j});
    if (it == S.end())
      throw ValidationError("no relation between types " + std::to_string(i.value) + " and " +
                            std::to_string(j.value) + " in the model");
    return it->second;
  }
};

struct FitConfig {
  double epsilon = 1e-5;
  int check_interval = 5;
  int max_iters = 500;
  std::uint64_t seed = 0;

  void check() const {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (check_interval < 1) throw ValidationError("check_interval must be >= 1");
    if (max_iters < 0) throw ValidationError("max_iters must be non-negative");
  }
};

struct FitTrace {
  int iterations_run = 0;
  std::vector<std::pair<int, double>> objective_samples;
  std::vector<std::pair<int, double>> target_residuals;
  bool converged = false;

  friend bool operator==(const FitTrace&, const FitTrace&) = default;
};

struct FitResult {
  FactorSystem model;
  FitTrace trace;
};

/// Denominator offset of the multiplicative G update.
inline constexpr double kUpdateDelta = 1e-12;

/// Schema data in the form the iterations consume: symmetrized relation
/// blocks and, per type, the summed positive/negative parts of its
/// constraint matrices.
class FusionProblem {
 public:
  explicit FusionProblem(const FusionSchema& schema) : blocks_(relation_blocks(schema)) {
    for (const auto& t : schema.types()) counts_.push_back(t.count);
    theta_pos_.resize(counts_.size());
    theta_neg_.resize(counts_.size());
    has_theta_.assign(counts_.size(), false);
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      theta_pos_[i] = Matrix::Zero(counts_[i], counts_[i]);
      theta_neg_[i] = Matrix::Zero(counts_[i], counts_[i]);
    }
    for (const auto& c : schema.constraints()) {
      auto split = split_pos_neg(c.values);
      theta_pos_[c.type.value] += split.pos;
      theta_neg_[c.type.value] += split.neg;
      has_theta_[c.type.value] = true;
    }
    if (auto t = schema.target_index()) target_ = BlockKey{schema.relations()[*t].source, schema.relations()[*t].target};
  }

  std::size_t type_count() const { return counts_.size(); }
  Index count(std::size_t i) const { return counts_[i]; }
  const std::map<BlockKey, Matrix>& blocks() const { return blocks_; }
  const Matrix& theta_pos(std::size_t i) const { return theta_pos_[i]; }
  const Matrix& theta_neg(std::size_t i) const { return theta_neg_[i]; }
  bool has_constraints(std::size_t i) const { return has_theta_[i]; }
  const std::optional<BlockKey>& target() const { return target_; }

 private:
  std::map<BlockKey, Matrix> blocks_;
  std::vector<Index> counts_;
  std::vector<Matrix> theta_pos_;
  std::vector<Matrix> theta_neg_;
  std::vector<bool> has_theta_;
  std::optional<BlockKey> target_;
};

/// S_ij = (G_i^T G_i)^+ G_i^T R_ij G_j (G_j^T G_j)^+ for every present block.
inline std::map<BlockKey, Matrix> update_s(const FusionProblem& problem, const std::vector<Matrix>& G) {
  std::vector<Matrix> pinv;
  pinv.reserve(G.size());
  for (const auto& g : G) pinv.push_back(gram_pinv(g));
  std::map<BlockKey, Matrix> S;
  for (const auto& [key, r] : problem.blocks()) {
    const auto i = key.row.value, j = key.col.value;
    S.emplace(key, pinv[i] * (G[i].transpose() * r * G[j]) * pinv[j]);
  }
  return S;
}

/// One multiplicative step on every G_i. With N_i = sum_j R_ij G_j S_ji and
/// D_i = sum_j S_ij G_j^T G_j S_ji, each entry is scaled by
///   sqrt((N+ + G D- + Theta- G) / (N- + G D+ + Theta+ G + delta)).
inline std::vector<Matrix> update_g(const FusionProblem& problem, const std::vector<Matrix>& G,
                                    const std::map<BlockKey, Matrix>& S) {
  const std::size_t r = G.size();
  std::vector<Matrix> N(r), D(r), gram(r);
  for (std::size_t i = 0; i < r; ++i) {
    N[i] = Matrix::Zero(G[i].rows(), G[i].cols());
    D[i] = Matrix::Zero(G[i].cols(), G[i].cols());
    gram[i] = G[i].transpose() * G[i];
  }
  for (const auto& [key, rij] : problem.blocks()) {
    const auto i = key.row.value, j = key.col.value;
    const Matrix& s_ji = S.at({key.col, key.row});
    const Matrix& s_ij = S.at(key);
    N[i].noalias() += rij * (G[j] * s_ji);
    D[i].noalias() += s_ij * gram[j] * s_ji;
  }
  std::vector<Matrix> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const auto n = split_pos_neg(N[i]);
    const auto d = split_pos_neg(D[i]);
    Matrix num = n.pos + G[i] * d.neg;
    Matrix den = n.neg + G[i] * d.pos;
    if (problem.has_constraints(i)) {
      num.noalias() += problem.theta_neg(i) * G[i];
      den.noalias() += problem.theta_pos(i) * G[i];
    }
    den.array() += kUpdateDelta;
    out[i] = G[i].array() * (num.array() / den.array()).sqrt();
  }
  return out;
}

/// ||R - G S G^T||_F^2 + sum_t tr(G^T Theta^(t) G), evaluated block by block.
inline double objective(const FusionProblem& problem, const std::vector<Matrix>& G,
                        const std::map<BlockKey, Matrix>& S) {
  double value = 0.0;
  for (const auto& [key, r] : problem.blocks()) {
    const auto i = key.row.value, j = key.col.value;
    value += (r - G[i] * S.at(key) * G[j].transpose()).squaredNorm();
  }
  for (std::size_t i = 0; i < G.size(); ++i) {
    if (!problem.has_constraints(i)) continue;
    const Matrix theta = problem.theta_pos(i) - problem.theta_neg(i);
    value += (G[i].transpose() * theta * G[i]).trace();
  }
  return value;
}

inline double target_residual(const Matrix& r, const Matrix& gi, const Matrix& s, const Matrix& gj) {
  return (r - gi * s * gj.transpose()).norm();
}

/// Stopping rule on the target block: residual norm strictly below epsilon.
inline bool converged(const Matrix& r, const Matrix& gi, const Matrix& s, const Matrix& gj, double epsilon) {
  return target_residual(r, gi, s, gj) < epsilon;
}

// Convenience overloads on a schema.
inline std::map<BlockKey, Matrix> update_s(const std::vector<Matrix>& G, const FusionSchema& schema) {
  return update_s(FusionProblem(schema), G);
}
inline std::vector<Matrix> update_g(const std::vector<Matrix>& G, const std::map<BlockKey, Matrix>& S,
                                    const FusionSchema& schema) {
  return update_g(FusionProblem(schema), G, S);
}
inline double objective(const std::vector<Matrix>& G, const std::map<BlockKey, Matrix>& S,
                        const FusionSchema& schema) {
  return objective(FusionProblem(schema), G, S);
}

/// Iterates from the given G: S is refreshed after every G step, so the
/// returned system is always self-consistent. Objective and target residual
/// are sampled, and convergence tested, every `check_interval` iterations.
inline FitResult factorize(const FusionProblem& problem, std::vector<Matrix> G, const FitConfig& config) {
  config.check();
  FitResult result;
  auto S = update_s(problem, G);
  const auto& target = problem.target();
  for (int it = 1; it <= config.max_iters; ++it) {
    G = update_g(problem, G, S);
    S = update_s(problem, G);
    result.trace.iterations_run = it;
    if (it % config.check_interval != 0) continue;
    result.trace.objective_samples.emplace_back(it, objective(problem, G, S));
    if (!target) continue;
    const auto i = target->row.value, j = target->col.value;
    const double res = target_residual(problem.blocks().at(*target), G[i], S.at(*target), G[j]);
    result.trace.target_residuals.emplace_back(it, res);
    if (res < config.epsilon) {
      result.trace.converged = true;
      break;
    }
  }
  for (const auto& g : G) result.model.ranks.push_back(g.cols());
  result.model.G = std::move(G);
  result.model.S = std::move(S);
  return result;
}

inline void check_ranks(const FusionSchema& schema, std::span<const Index> ranks) {
  if (ranks.size() != schema.type_count()) throw ValidationError("rank vector length must equal the number of types");
  for (const auto& t : schema.types()) {
    const Index k = ranks[t.id.value];
    if (k < 1 || k > t.count)
      throw ValidationError("rank " + std::to_string(k) + " for type '" + t.name + "' must lie in [1, " +
                            std::to_string(t.count) + "]");
  }
}

inline FitResult factorize(const FusionSchema& schema, std::span<const Index> ranks, const InitStrategy& init,
                           const FitConfig& config) {
  schema.require_valid();
  check_ranks(schema, ranks);
  config.check();
  return factorize(FusionProblem(schema), init_factors(schema, ranks, init, config.seed), config);
}

}  // namespace fusemf
