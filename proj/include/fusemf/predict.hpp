#pragma once

// Prediction from fitted factor systems: reconstruction of a relation,
// fold-in of unseen objects, mean-of-known candidate rules, percentile
// strength and majority voting across an ensemble.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fusemf/factorizer.hpp"
#include "fusemf/nnls.hpp"
#include "fusemf/random.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

/// R_hat_ij = G_i S_ij G_j^T.
inline Matrix reconstruct(const FactorSystem& model, TypeId i, TypeId j) {
  const Matrix& s = model.core(i, j);
  return model.G[i.value] * s * model.G[j.value].transpose();
}

struct FoldInOptions {
  double tolerance = 1e-8;
  /// Solve for all sum(k) coordinates instead of the k_i of the object's own
  /// type. Only the own-type part is used when extending a model.
  bool unrestricted = false;
};

/// Linear map from an object's latent coordinates to its predicted profile,
/// with rows laid out like build_profile. Relation (i,j) contributes
/// G_j S_ij^T, relation (j,i) contributes G_j S_ji.
inline Matrix fold_in_design(const FactorSystem& model, const FusionSchema& schema, TypeId type,
                             bool unrestricted = false) {
  const std::size_t r = model.G.size();
  std::vector<Index> col_offsets(r + 1, 0);
  for (std::size_t l = 0; l < r; ++l) col_offsets[l + 1] = col_offsets[l] + model.ranks[l];
  Index rows = 0;
  for (const auto& rel : schema.relations()) {
    if (rel.source == type) rows += rel.values.cols();
    else if (rel.target == type) rows += rel.values.rows();
  }
  const Index cols = unrestricted ? col_offsets[r] : model.ranks[type.value];
  Matrix a = Matrix::Zero(rows, cols);
  Index at = 0;
  for (const auto& rel : schema.relations()) {
    const bool leaving = rel.source == type;
    if (!leaving && rel.target != type) continue;
    const TypeId partner = leaving ? rel.target : rel.source;
    const Matrix& gj = model.G[partner.value];
    auto block_for = [&](TypeId own) -> std::optional<Matrix> {
      if (leaving) {
        if (!model.has_core(own, partner)) return std::nullopt;
        return Matrix(gj * model.core(own, partner).transpose());
      }
      if (!model.has_core(partner, own)) return std::nullopt;
      return Matrix(gj * model.core(partner, own));
    };
    if (unrestricted) {
      for (std::size_t l = 0; l < r; ++l)
        if (auto b = block_for(TypeId{l})) a.block(at, col_offsets[l], gj.rows(), b->cols()) = *b;
    } else if (auto b = block_for(type)) {
      a.middleRows(at, gj.rows()) = *b;
    }
    at += gj.rows();
  }
  return a;
}

/// Latent coordinates x >= 0 of a new object of `type` minimizing
/// ||A x - profile|| over the profile entries flagged in `observed`
/// (all entries when empty).
inline Vector fold_in(const FactorSystem& model, const FusionSchema& schema, TypeId type, const Vector& profile,
                      std::span<const bool> observed = {}, const FoldInOptions& options = {}) {
  const Matrix a = fold_in_design(model, schema, type, options.unrestricted);
  if (profile.size() != a.rows())
    throw ValidationError("profile length " + std::to_string(profile.size()) + " does not match expected " +
                          std::to_string(a.rows()) + " for type '" + schema.type(type).name + "'");
  if (!observed.empty() && static_cast<Index>(observed.size()) != profile.size())
    throw ValidationError("profile mask length mismatch");
  Matrix a_obs = a;
  Vector b_obs = profile;
  if (!observed.empty()) {
    const auto kept = static_cast<Index>(std::count(observed.begin(), observed.end(), true));
    a_obs.resize(kept, a.cols());
    b_obs.resize(kept);
    Index row = 0;
    for (Index p = 0; p < profile.size(); ++p)
      if (observed[static_cast<std::size_t>(p)]) {
        a_obs.row(row) = a.row(p);
        b_obs(row) = profile(p);
        ++row;
      }
  }
  Vector x = nnls(a_obs, b_obs, options.tolerance).x;
  if (!options.unrestricted) return x;
  Index offset = 0;
  for (std::size_t l = 0; l < type.value; ++l) offset += model.ranks[l];
  return x.segment(offset, model.ranks[type.value]);
}

/// Appends x^T as a new row of G_type; every S block is left untouched.
inline FactorSystem extend_model(FactorSystem model, TypeId type, const Vector& x) {
  Matrix& g = model.G[type.value];
  if (x.size() != g.cols()) throw ValidationError("fold-in vector length must equal the type's rank");
  g.conservativeResize(g.rows() + 1, Eigen::NoChange);
  g.row(g.rows() - 1) = x.transpose();
  return model;
}

/// Observed cells of a relation whose value is at least `threshold`.
inline Mask known_associations(const RelationMatrix& rel, double threshold = 0.5) {
  return rel.observed.array() && (rel.values.array() >= threshold);
}

struct CandidatePair {
  Index p = 0;
  Index q = 0;
  friend auto operator<=>(const CandidatePair&, const CandidatePair&) = default;
};

struct CandidateResult {
  std::vector<CandidatePair> pairs;
  Index skipped = 0;  // rows (or columns) without any known association
};

/// Pairs (p,q), q not known for p, whose score beats the mean score of p's
/// known associations. Rows without known associations emit nothing.
inline CandidateResult candidates_row_centric(const Matrix& scores, const Mask& known) {
  if (scores.rows() != known.rows() || scores.cols() != known.cols())
    throw ValidationError("score and known-association shapes differ");
  CandidateResult out;
  for (Index p = 0; p < scores.rows(); ++p) {
    double sum = 0.0;
    Index count = 0;
    for (Index m = 0; m < scores.cols(); ++m)
      if (known(p, m)) {
        sum += scores(p, m);
        ++count;
      }
    if (count == 0) {
      ++out.skipped;
      continue;
    }
    const double mean = sum / static_cast<double>(count);
    for (Index q = 0; q < scores.cols(); ++q)
      if (!known(p, q) && scores(p, q) > mean) out.pairs.push_back({p, q});
  }
  return out;
}

/// Column-wise counterpart: pairs (p,q) whose score beats the mean score of
/// the objects already associated with column q. Pairs come sorted by (p,q).
inline CandidateResult candidates_column_centric(const Matrix& scores, const Mask& known) {
  const Matrix st = scores.transpose();
  const Mask kt = known.transpose();
  auto res = candidates_row_centric(st, kt);
  for (auto& pair : res.pairs) std::swap(pair.p, pair.q);
  std::sort(res.pairs.begin(), res.pairs.end());
  return res;
}

/// Percentage of known-association scores in column q that are <= value.
/// Empty when the column has no known association.
inline std::optional<double> percentile_strength(const Matrix& scores, const Mask& known, Index q, double value) {
  Index total = 0, below = 0;
  for (Index p = 0; p < scores.rows(); ++p) {
    if (!known(p, q)) continue;
    ++total;
    if (scores(p, q) <= value) ++below;
  }
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(below) / static_cast<double>(total);
}

/// Smallest vote count that is more than half of the ensemble.
inline int majority_threshold(std::size_t ensemble_size) { return static_cast<int>(ensemble_size / 2 + 1); }

enum class CandidateMode { row, column };

struct Prediction {
  Index p = 0;
  Index q = 0;
  double score = 0.0;  // mean over members
  std::optional<double> percentile;
  int votes = 0;
};

struct PredictionSet {
  std::vector<Prediction> pairs;
  std::size_t ensemble_size = 0;
  Index skipped = 0;
};

/// Cellwise mean of equally shaped matrices. Each cell is summed in sorted
/// order so the result does not depend on the order of the inputs.
inline Matrix order_free_mean(std::span<const Matrix> mats) {
  if (mats.empty()) throw ValidationError("mean of an empty set of matrices");
  Matrix mean(mats.front().rows(), mats.front().cols());
  std::vector<double> cell(mats.size());
  for (Index p = 0; p < mean.rows(); ++p)
    for (Index q = 0; q < mean.cols(); ++q) {
      for (std::size_t m = 0; m < mats.size(); ++m) cell[m] = mats[m](p, q);
      std::sort(cell.begin(), cell.end());
      double sum = 0.0;
      for (double v : cell) sum += v;
      mean(p, q) = sum / static_cast<double>(cell.size());
    }
  return mean;
}

inline Matrix mean_reconstruction(std::span<const FactorSystem> models, TypeId i, TypeId j) {
  std::vector<Matrix> recs;
  recs.reserve(models.size());
  for (const auto& m : models) recs.push_back(reconstruct(m, i, j));
  return order_free_mean(recs);
}

/// Majority vote of the candidate rule over the ensemble on the target
/// relation. Survivors carry the mean score and its percentile among the
/// known associations of their column.
inline PredictionSet ensemble_predict(std::span<const FactorSystem> models, const FusionSchema& schema,
                                      CandidateMode mode = CandidateMode::row, double known_threshold = 0.5) {
  if (models.empty()) throw ValidationError("ensemble must contain at least one model");
  const auto& target = schema.target();
  const Mask known = known_associations(target, known_threshold);
  Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(known.rows(), known.cols());
  PredictionSet out;
  out.ensemble_size = models.size();
  for (const auto& model : models) {
    const Matrix scores = reconstruct(model, target.source, target.target);
    const auto cands =
        mode == CandidateMode::row ? candidates_row_centric(scores, known) : candidates_column_centric(scores, known);
    for (const auto& c : cands.pairs) ++votes(c.p, c.q);
    out.skipped = cands.skipped;
  }
  const Matrix mean = mean_reconstruction(models, target.source, target.target);
  const int needed = majority_threshold(models.size());
  for (Index p = 0; p < votes.rows(); ++p)
    for (Index q = 0; q < votes.cols(); ++q)
      if (votes(p, q) >= needed)
        out.pairs.push_back({p, q, mean(p, q), percentile_strength(mean, known, q, mean(p, q)), votes(p, q)});
  return out;
}

struct EnsembleConfig {
  std::size_t size = 15;
  /// Each member moves every k_i by one of {-1, 0, +1}, clamped to [1, n_i].
  bool perturb_ranks = true;
  std::uint64_t seed = 0;
};

struct EnsembleMember {
  FitResult fit;
  std::vector<Index> ranks;
  std::uint64_t seed = 0;
};

inline std::vector<Index> perturbed_ranks(const FusionSchema& schema, std::span<const Index> ranks,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> step(-1, 1);
  std::vector<Index> out(ranks.begin(), ranks.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp<Index>(out[i] + step(rng), 1, schema.types()[i].count);
  return out;
}

inline std::vector<EnsembleMember> fit_ensemble(const FusionSchema& schema, std::span<const Index> ranks,
                                                const InitStrategy& init, FitConfig fit,
                                                const EnsembleConfig& ensemble) {
  schema.require_valid();
  check_ranks(schema, ranks);
  if (ensemble.size < 1) throw ValidationError("ensemble size must be >= 1");
  const FusionProblem problem(schema);
  std::vector<EnsembleMember> members;
  members.reserve(ensemble.size);
  for (std::size_t m = 0; m < ensemble.size; ++m) {
    EnsembleMember member;
    member.seed = derive_seed(ensemble.seed, 1000 + m);
    member.ranks = ensemble.perturb_ranks ? perturbed_ranks(schema, ranks, derive_seed(member.seed, 7))
                                          : std::vector<Index>(ranks.begin(), ranks.end());
    fit.seed = member.seed;
    member.fit = factorize(problem, init_factors(schema, member.ranks, init, member.seed), fit);
    members.push_back(std::move(member));
  }
  return members;
}

inline std::vector<FactorSystem> models_of(const std::vector<EnsembleMember>& members) {
  std::vector<FactorSystem> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.fit.model);
  return out;
}

}  // namespace fusemf
