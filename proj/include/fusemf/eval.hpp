#pragma once

// Cross-validated evaluation of target-relation prediction: target
// balancing, F1, fold splitting with fold-in of held-out objects, the
// flattened baseline run under the same protocol, and source ablation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusemf/factorizer.hpp"
#include "fusemf/flat.hpp"
#include "fusemf/init.hpp"
#include "fusemf/predict.hpp"
#include "fusemf/random.hpp"
#include "fusemf/ranksel.hpp"
#include "fusemf/schema.hpp"
#include "fusemf/stats.hpp"

namespace fusemf {

/// Observed mask extended with as many sampled negatives as there are
/// positives. Negatives are drawn uniformly from cells that are neither
/// observed nor positive.
inline Mask balance_target(const Mask& positives, const Mask& observed, std::uint64_t seed) {
  if (positives.rows() != observed.rows() || positives.cols() != observed.cols())
    throw ValidationError("balance_target: mask shapes differ");
  const Index need = positives.count();
  Mask out = observed.array() || positives.array();
  if (need == 0) return out;
  std::vector<Index> free_cells;
  for (Index c = 0; c < out.size(); ++c)
    if (!out(c % out.rows(), c / out.rows())) free_cells.push_back(c);
  if (static_cast<Index>(free_cells.size()) < need)
    throw ValidationError("balance_target: " + std::to_string(free_cells.size()) +
                          " unobserved cells cannot supply " + std::to_string(need) + " negatives");
  Rng rng(seed);
  for (Index i = 0; i < need; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), free_cells.size() - 1);
    std::swap(free_cells[static_cast<std::size_t>(i)], free_cells[pick(rng)]);
    const Index c = free_cells[static_cast<std::size_t>(i)];
    out(c % out.rows(), c / out.rows()) = true;
  }
  return out;
}

struct ConfusionCounts {
  Index tp = 0, fp = 0, fn = 0;
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

inline double f1(const ConfusionCounts& c) {
  const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
}

/// Counts over the cells flagged in `scope` (all cells when empty).
inline ConfusionCounts confusion(const Mask& predicted, const Mask& truth, const Mask& scope = {}) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
    throw ValidationError("f1: prediction and truth shapes differ");
  ConfusionCounts c;
  for (Index q = 0; q < truth.cols(); ++q)
    for (Index p = 0; p < truth.rows(); ++p) {
      if (scope.size() != 0 && !scope(p, q)) continue;
      if (predicted(p, q) && truth(p, q)) ++c.tp;
      else if (predicted(p, q)) ++c.fp;
      else if (truth(p, q)) ++c.fn;
    }
  return c;
}

inline double f1(const Mask& predicted, const Mask& truth) { return f1(confusion(predicted, truth)); }

struct CvConfig {
  int folds = 10;
  std::uint64_t seed = 0;
  double threshold = 0.5;  // reconstructed score at or above which a pair is predicted
  bool balance = false;
  bool flatten = false;  // evaluate the flattened baseline instead

  void check(Index objects) const {
    if (folds < 2) throw ValidationError("folds must be >= 2");
    if (folds > objects)
      throw ValidationError("folds (" + std::to_string(folds) + ") exceed the " + std::to_string(objects) +
                            " objects of the target type");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0,1)");
  }
};

struct EvaluationReport {
  std::vector<double> fold_f1;            // thresholded mean reconstruction
  std::vector<double> fold_candidate_f1;  // majority vote of the column-centric rule
  double mean_f1 = 0.0;
  double mean_candidate_f1 = 0.0;
  std::vector<double> label_f1;  // per target column, pooled over folds
  Index skipped_rows = 0;        // held-out objects with an empty profile
  Index members_fitted = 0;
  Index members_converged = 0;
};

/// Training schema for one fold: test objects of `type` are removed from
/// every relation and constraint touching that type.
struct FoldSplit {
  FusionSchema train;
  std::vector<Index> train_objects;  // original indices, in training order
  std::vector<Index> test_objects;
};

namespace detail {

inline Matrix take_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

inline Mask take_rows(const Mask& m, std::span<const Index> rows) {
  Mask out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

}  // namespace detail

inline FoldSplit split_fold(const FusionSchema& schema, TypeId type, std::span<const Index> test_objects) {
  FoldSplit out;
  const Index n = schema.count(type);
  std::vector<bool> is_test(static_cast<std::size_t>(n), false);
  for (Index p : test_objects) {
    if (p < 0 || p >= n) throw ValidationError("test object index out of range");
    is_test[static_cast<std::size_t>(p)] = true;
  }
  for (Index p = 0; p < n; ++p) (is_test[static_cast<std::size_t>(p)] ? out.test_objects : out.train_objects).push_back(p);
  if (out.train_objects.empty()) throw ValidationError("fold leaves no training objects");
  const auto& keep = out.train_objects;

  for (const auto& t : schema.types())
    out.train.add_object_type(t.name, t.id == type ? static_cast<Index>(keep.size()) : t.count);
  for (const auto& rel : schema.relations()) {
    if (rel.source == type) {
      out.train.add_relation(rel.source, rel.target, detail::take_rows(rel.values, keep),
                             detail::take_rows(rel.observed, keep), rel.is_target);
    } else if (rel.target == type) {
      const Matrix vt = rel.values.transpose();
      const Mask ot = rel.observed.transpose();
      out.train.add_relation(rel.source, rel.target, detail::take_rows(vt, keep).transpose(),
                             detail::take_rows(ot, keep).transpose(), rel.is_target);
    } else {
      out.train.add_relation(rel.source, rel.target, rel.values, rel.observed, rel.is_target);
    }
  }
  for (const auto& c : schema.constraints()) {
    if (c.type != type) {
      out.train.add_constraint(c.type, c.values);
      continue;
    }
    const Matrix rows = detail::take_rows(c.values, keep);
    const Matrix both = detail::take_rows(Matrix(rows.transpose()), keep).transpose();
    out.train.add_constraint(c.type, both);
  }
  return out;
}

/// Profile of object p of `type` laid out like fold_in_design, with the
/// target relation and unobserved cells masked out.
struct ObjectProfile {
  Vector values;
  Eigen::Array<bool, Eigen::Dynamic, 1> observed;

  std::span<const bool> mask() const { return {observed.data(), static_cast<std::size_t>(observed.size())}; }
  bool empty() const { return !observed.any(); }
};

inline ObjectProfile object_profile(const FusionSchema& schema, TypeId type, Index p) {
  std::vector<double> v;
  std::vector<bool> o;
  for (const auto& rel : schema.relations()) {
    if (rel.source == type) {
      for (Index q = 0; q < rel.values.cols(); ++q) {
        v.push_back(rel.values(p, q));
        o.push_back(!rel.is_target && rel.observed(p, q));
      }
    } else if (rel.target == type) {
      for (Index q = 0; q < rel.values.rows(); ++q) {
        v.push_back(rel.values(q, p));
        o.push_back(!rel.is_target && rel.observed(q, p));
      }
    }
  }
  ObjectProfile out;
  out.values = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  out.observed.resize(static_cast<Index>(o.size()));
  for (std::size_t i = 0; i < o.size(); ++i) out.observed(static_cast<Index>(i)) = o[i];
  return out;
}

/// Assigns each object of the target type to a fold: a seeded shuffle dealt
/// round-robin, so fold sizes differ by at most one.
inline std::vector<std::vector<Index>> make_folds(Index objects, int folds, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(objects));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < order.size(); ++i) out[i % out.size()].push_back(order[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

struct ModelSpec {
  std::vector<Index> ranks;
  InitStrategy init;
  FitConfig fit;
  EnsembleConfig ensemble;
  /// When set, ranks are re-selected on every training fold (starting from
  /// `ranks`) instead of being fixed once for all folds.
  std::vector<RankRange> reselect_ranges;
  RankEvalConfig reselect;
};

namespace detail {

/// Per-member target scores for one fold: training rows first, then the
/// test rows in fold order.
struct FoldScores {
  std::vector<Matrix> members;
  Index converged = 0;
};

inline std::vector<Index> clamp_ranks(const FusionSchema& schema, std::vector<Index> ranks) {
  for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = std::clamp<Index>(ranks[i], 1, schema.types()[i].count);
  return ranks;
}

inline FoldScores structured_scores(const FoldSplit& split, const FusionSchema& full, const ModelSpec& spec,
                                    std::uint64_t seed) {
  const auto& target = split.train.target();
  const TypeId type = target.source;
  EnsembleConfig ens = spec.ensemble;
  ens.seed = seed;
  const auto ranks = clamp_ranks(split.train, spec.ranks);
  const auto members = fit_ensemble(split.train, ranks, spec.init, spec.fit, ens);
  FoldScores out;
  for (const auto& member : members) {
    FactorSystem model = member.fit.model;
    out.converged += member.fit.trace.converged;
    for (Index p : split.test_objects) {
      const auto prof = object_profile(full, type, p);
      const Vector x = fold_in(model, split.train, type, prof.values, prof.mask());
      model = extend_model(std::move(model), type, x);
    }
    out.members.push_back(reconstruct(model, type, target.target));
  }
  return out;
}

/// Flattened baseline: the test object's row of the single G is folded in
/// against G_partner S^T (leaving relations) or G_partner S (entering).
inline FoldScores flat_scores(const FoldSplit& split, const FusionSchema& full, const ModelSpec& spec,
                              std::uint64_t seed) {
  const auto& target = split.train.target();
  const TypeId type = target.source;
  FoldScores out;
  for (std::size_t m = 0; m < spec.ensemble.size; ++m) {
    const auto member_seed = derive_seed(seed, 1000 + m);
    auto ranks = spec.ensemble.perturb_ranks ? perturbed_ranks(split.train, spec.ranks, derive_seed(member_seed, 7))
                                             : spec.ranks;
    ranks = clamp_ranks(split.train, ranks);
    const auto flat = flatten_early_integration(split.train, ranks);
    FitConfig fit = spec.fit;
    fit.seed = member_seed;
    const auto model = fit_flat(flat, spec.init, fit);
    out.converged += model.trace.converged;
    auto rows_of = [&](TypeId t) {
      return model.G.middleRows(flat.row_offsets[t.value], flat.row_offsets[t.value + 1] - flat.row_offsets[t.value]);
    };
    Matrix design(0, model.S.rows());
    for (const auto& rel : split.train.relations()) {
      Matrix block;
      if (rel.source == type) block = rows_of(rel.target) * model.S.transpose();
      else if (rel.target == type) block = rows_of(rel.source) * model.S;
      else continue;
      design.conservativeResize(design.rows() + block.rows(), Eigen::NoChange);
      design.bottomRows(block.rows()) = block;
    }
    const Matrix partner_t = (model.S * rows_of(target.target).transpose());
    Matrix g_rows = rows_of(type);
    const Index n_train = g_rows.rows();
    g_rows.conservativeResize(n_train + static_cast<Index>(split.test_objects.size()), Eigen::NoChange);
    for (std::size_t t = 0; t < split.test_objects.size(); ++t) {
      const auto prof = object_profile(full, type, split.test_objects[t]);
      std::vector<Index> keep;
      for (Index r = 0; r < prof.observed.size(); ++r)
        if (prof.observed(r)) keep.push_back(r);
      const Matrix a = take_rows(design, keep);
      Vector b(static_cast<Index>(keep.size()));
      for (std::size_t r = 0; r < keep.size(); ++r) b(static_cast<Index>(r)) = prof.values(keep[r]);
      g_rows.row(n_train + static_cast<Index>(t)) = nnls(a, b).x.transpose();
    }
    out.members.push_back(g_rows * partner_t);
  }
  return out;
}

}  // namespace detail

/// Cross-validation over the objects of the target relation's source type.
/// Scores are computed on the observed target cells of the held-out rows,
/// with an observed value >= 0.5 counting as a true association.
inline EvaluationReport run_cv(const FusionSchema& input, const ModelSpec& spec, const CvConfig& cv) {
  input.require_valid();
  check_ranks(input, spec.ranks);
  FusionSchema schema = input;
  const auto tidx = *schema.target_index();
  if (cv.balance) {
    const auto& t = schema.target();
    const Mask positives = known_associations(t);
    schema.replace_relation_data(tidx, t.values, balance_target(positives, t.observed, derive_seed(cv.seed, 77)));
  }
  const auto& target = schema.target();
  const TypeId type = target.source;
  cv.check(schema.count(type));

  EvaluationReport report;
  const Index labels = target.values.cols();
  std::vector<ConfusionCounts> per_label(static_cast<std::size_t>(labels));
  const auto folds = make_folds(schema.count(type), cv.folds, derive_seed(cv.seed, 1));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto split = split_fold(schema, type, folds[f]);
    const auto fold_seed = derive_seed(cv.seed, 100 + f);
    ModelSpec fold_spec = spec;
    if (!spec.reselect_ranges.empty()) {
      auto ranges = spec.reselect_ranges;
      for (auto& r : ranges) r.hi = std::min(r.hi, split.train.count(r.type));
      fold_spec.ranks = select_ranks(split.train, ranges, spec.reselect, detail::clamp_ranks(split.train, spec.ranks)).ranks;
    }
    const auto scores = cv.flatten ? detail::flat_scores(split, schema, fold_spec, fold_seed)
                                   : detail::structured_scores(split, schema, fold_spec, fold_seed);
    for (Index p : split.test_objects) report.skipped_rows += object_profile(schema, type, p).empty();
    report.members_fitted += static_cast<Index>(scores.members.size());
    report.members_converged += scores.converged;

    const Index n_train = static_cast<Index>(split.train_objects.size());
    const Index n_test = static_cast<Index>(split.test_objects.size());
    const Mask test_scope = detail::take_rows(target.observed, split.test_objects);
    const Mask truth = detail::take_rows(Mask(known_associations(target)), split.test_objects);

    const Matrix mean = order_free_mean(scores.members);
    const Mask thresholded = (mean.bottomRows(n_test).array() >= cv.threshold);
    const auto counts = confusion(thresholded, truth, test_scope);
    report.fold_f1.push_back(f1(counts));
    for (Index q = 0; q < labels; ++q)
      per_label[static_cast<std::size_t>(q)] += confusion(thresholded.col(q), truth.col(q), test_scope.col(q));

    // Candidate rule: training rows keep their known associations, held-out
    // rows have none; a pair survives with a majority of member votes.
    Mask known(n_train + n_test, labels);
    known.topRows(n_train) = known_associations(split.train.target());
    known.bottomRows(n_test).setConstant(false);
    Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(n_test, labels);
    for (const auto& member : scores.members)
      for (const auto& c : candidates_column_centric(member, known).pairs)
        if (c.p >= n_train) ++votes(c.p - n_train, c.q);
    const int needed = majority_threshold(scores.members.size());
    const Mask voted = (votes.array() >= needed);
    report.fold_candidate_f1.push_back(f1(confusion(voted, truth, test_scope)));
  }
  report.mean_f1 = mean_of(report.fold_f1);
  report.mean_candidate_f1 = mean_of(report.fold_candidate_f1);
  for (const auto& c : per_label) report.label_f1.push_back(f1(c));
  return report;
}

/// Symmetric hold-out of constraint entries: a seeded share (1 - density) of
/// the upper-triangle positions, diagonal included, is zeroed in every
/// constraint matrix.
inline FusionSchema sparsify_constraints(const FusionSchema& schema, double density, std::uint64_t seed) {
  if (density < 0.0 || density > 1.0) throw ValidationError("constraint density must lie in [0,1]");
  FusionSchema out;
  for (const auto& t : schema.types()) out.add_object_type(t.name, t.count);
  for (const auto& rel : schema.relations())
    out.add_relation(rel.source, rel.target, rel.values, rel.observed, rel.is_target);
  std::uint64_t stream = 0;
  for (const auto& c : schema.constraints()) {
    Matrix v = c.values;
    const Index n = v.rows();
    std::vector<std::pair<Index, Index>> cells;
    for (Index q = 0; q < n; ++q)
      for (Index p = 0; p <= q; ++p) cells.emplace_back(p, q);
    Rng rng(derive_seed(seed, stream++));
    std::shuffle(cells.begin(), cells.end(), rng);
    const auto drop = static_cast<std::size_t>(std::llround((1.0 - density) * static_cast<double>(cells.size())));
    for (std::size_t i = 0; i < drop; ++i) v(cells[i].first, cells[i].second) = v(cells[i].second, cells[i].first) = 0.0;
    out.add_constraint(c.type, std::move(v));
  }
  return out;
}

struct AblationSubset {
  std::string name;
  std::vector<std::size_t> relations;    // indices into schema.relations()
  std::vector<std::size_t> constraints;  // indices into schema.constraints()
};

/// Schema restricted to a subset of sources. Types touched by no kept
/// relation are dropped; the result keeps the original type order. Also
/// returns the original id of every kept type.
inline std::pair<FusionSchema, std::vector<std::size_t>> subset_schema(const FusionSchema& schema,
                                                                      const AblationSubset& subset) {
  const auto fail = [&](const std::string& why) {
    throw ValidationError("ablation subset '" + subset.name + "': " + why);
  };
  std::vector<bool> used(schema.type_count(), false);
  bool has_target = false;
  for (auto r : subset.relations) {
    if (r >= schema.relations().size()) fail("unknown relation index " + std::to_string(r));
    const auto& rel = schema.relations()[r];
    used[rel.source.value] = used[rel.target.value] = true;
    has_target = has_target || rel.is_target;
  }
  if (!has_target) fail("does not include the target relation");
  std::vector<std::size_t> kept;
  std::vector<std::size_t> remap(schema.type_count(), 0);
  FusionSchema out;
  for (const auto& t : schema.types())
    if (used[t.id.value]) {
      remap[t.id.value] = kept.size();
      kept.push_back(t.id.value);
      out.add_object_type(t.name, t.count);
    }
  auto sorted_rel = subset.relations;
  std::sort(sorted_rel.begin(), sorted_rel.end());
  sorted_rel.erase(std::unique(sorted_rel.begin(), sorted_rel.end()), sorted_rel.end());
  for (auto r : sorted_rel) {
    const auto& rel = schema.relations()[r];
    out.add_relation(TypeId{remap[rel.source.value]}, TypeId{remap[rel.target.value]}, rel.values, rel.observed,
                     rel.is_target);
  }
  auto sorted_con = subset.constraints;
  std::sort(sorted_con.begin(), sorted_con.end());
  for (auto c : sorted_con) {
    if (c >= schema.constraints().size()) fail("unknown constraint index " + std::to_string(c));
    const auto& con = schema.constraints()[c];
    if (!used[con.type.value]) fail("constraint on '" + schema.type(con.type).name + "' whose type has no kept relation");
    out.add_constraint(TypeId{remap[con.type.value]}, con.values);
  }
  const auto report = out.validate();
  if (!report.connected) {
    std::string names;
    for (const auto& n : report.unreachable_types) names += (names.empty() ? "" : ", ") + n;
    fail("fusion graph is disconnected (unreachable: " + names + ")");
  }
  return {std::move(out), std::move(kept)};
}

struct AblationRow {
  std::string name;
  EvaluationReport report;
  double mean_f1 = 0.0;
  double sd_f1 = 0.0;  // across folds
};

/// run_cv for each subset, all with the same folds and seeds.
inline std::vector<AblationRow> ablation_run(const FusionSchema& schema, std::span<const AblationSubset> subsets,
                                             const ModelSpec& spec, const CvConfig& cv) {
  std::vector<std::pair<FusionSchema, std::vector<std::size_t>>> prepared;
  for (const auto& s : subsets) prepared.push_back(subset_schema(schema, s));  // validate every subset first
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    ModelSpec sub = spec;
    sub.ranks.clear();
    for (auto t : prepared[i].second) sub.ranks.push_back(spec.ranks[t]);
    AblationRow row;
    row.name = subsets[i].name;
    row.report = run_cv(prepared[i].first, sub, cv);
    row.mean_f1 = row.report.mean_f1;
    row.sd_f1 = stddev_of(row.report.fold_f1);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fusemf
