#pragma once

// Planted fusion systems with known factors, for desk-scale experiments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fusemf/blockops.hpp"
#include "fusemf/random.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

struct SyntheticSpec {
  std::vector<std::string> names;  // defaults to t1..tr
  std::vector<Index> sizes;
  std::vector<Index> ranks;
  std::vector<std::pair<std::size_t, std::size_t>> relations;
  std::size_t target_relation = 0;
  double noise_sigma = 0.0;
  double target_density = 1.0;
  bool binarize_target = false;
  std::vector<std::size_t> constrained_types;
  double informativeness = 1.0;
  double constraint_weight = 0.1;
  std::uint64_t seed = 0;

  void check() const {
    const auto r = sizes.size();
    if (r < 2) throw ValidationError("synthetic system needs at least two types");
    if (ranks.size() != r) throw ValidationError("one planted rank per type required");
    if (!names.empty() && names.size() != r) throw ValidationError("one name per type required");
    for (std::size_t i = 0; i < r; ++i)
      if (sizes[i] < 1 || ranks[i] < 1 || ranks[i] > sizes[i])
        throw ValidationError("planted ranks must lie in [1, n_i]");
    if (relations.empty() || target_relation >= relations.size())
      throw ValidationError("target relation index out of range");
    for (const auto& [a, b] : relations)
      if (a >= r || b >= r || a == b) throw ValidationError("invalid relation endpoints");
    for (auto t : constrained_types)
      if (t >= r) throw ValidationError("constrained type out of range");
    if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
    if (!(target_density > 0.0 && target_density <= 1.0)) throw ValidationError("target_density must lie in (0,1]");
    if (informativeness < 0.0 || informativeness > 1.0) throw ValidationError("informativeness must lie in [0,1]");
    if (constraint_weight < 0.0) throw ValidationError("constraint_weight must be >= 0");
  }
};

struct SyntheticData {
  FusionSchema schema;
  std::vector<Matrix> G;
  std::map<BlockKey, Matrix> S;
  Matrix target_truth;  // full normalized target before masking
  std::vector<std::vector<Index>> clusters;
};

/// Planted factors: each object gets a dominant entry in its cluster's column
/// (uniform in [0.7, 1]) over a faint background (uniform in [0, 0.05]).
/// Core entries are zero with probability 1/2, otherwise uniform in [0.5, 1].
/// R_ij = G_i S_ij G_j^T + N(0, sigma^2), clipped at 0. The target is scaled
/// into [0,1] by its maximum (or thresholded at half of it when binarized)
/// and masked to the requested density. Constraints mark same-cluster pairs
/// -1 and other pairs +1, each entry replaced by a random sign with
/// probability 1 - informativeness; the diagonal holds the row's absolute
/// sum so the penalty stays bounded below.
inline SyntheticData synth_generate(const SyntheticSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  const std::size_t r = spec.sizes.size();
  SyntheticData out;
  std::vector<TypeId> ids;
  for (std::size_t i = 0; i < r; ++i)
    ids.push_back(out.schema.add_object_type(spec.names.empty() ? "t" + std::to_string(i + 1) : spec.names[i],
                                             spec.sizes[i]));

  for (std::size_t i = 0; i < r; ++i) {
    const Index n = spec.sizes[i], k = spec.ranks[i];
    std::vector<Index> cluster(static_cast<std::size_t>(n));
    for (Index p = 0; p < n; ++p) cluster[p] = p % k;
    std::shuffle(cluster.begin(), cluster.end(), rng);
    Matrix g(n, k);
    for (Index p = 0; p < n; ++p)
      for (Index q = 0; q < k; ++q)
        g(p, q) = q == cluster[p] ? 0.7 + 0.3 * uniform01(rng) : 0.05 * uniform01(rng);
    out.G.push_back(std::move(g));
    out.clusters.push_back(std::move(cluster));
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t rel = 0; rel < spec.relations.size(); ++rel) {
    const auto [a, b] = spec.relations[rel];
    Matrix s(spec.ranks[a], spec.ranks[b]);
    for (Index p = 0; p < s.rows(); ++p)
      for (Index q = 0; q < s.cols(); ++q) s(p, q) = uniform01(rng) < 0.5 ? 0.0 : 0.5 + 0.5 * uniform01(rng);
    // keep every latent row and column in play
    for (Index p = 0; p < s.rows(); ++p)
      if (s.row(p).maxCoeff() == 0.0) s(p, std::uniform_int_distribution<Index>(0, s.cols() - 1)(rng)) = 1.0;
    for (Index q = 0; q < s.cols(); ++q)
      if (s.col(q).maxCoeff() == 0.0) s(std::uniform_int_distribution<Index>(0, s.rows() - 1)(rng), q) = 1.0;

    Matrix values = out.G[a] * s * out.G[b].transpose();
    if (spec.noise_sigma > 0.0)
      for (Index q = 0; q < values.cols(); ++q)
        for (Index p = 0; p < values.rows(); ++p) values(p, q) += spec.noise_sigma * noise(rng);
    values = values.cwiseMax(0.0);
    out.S.emplace(BlockKey{ids[a], ids[b]}, s);

    if (rel != spec.target_relation) {
      out.schema.add_relation(ids[a], ids[b], std::move(values));
      continue;
    }
    const double peak = values.maxCoeff();
    if (peak > 0.0) values /= peak;
    if (spec.binarize_target) values = (values.array() >= 0.5).cast<double>();
    out.target_truth = values;
    const Index cells = values.size();
    const auto observed_cells =
        static_cast<Index>(std::llround(spec.target_density * static_cast<double>(cells)));
    std::vector<Index> order(static_cast<std::size_t>(cells));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Mask observed = Mask::Constant(values.rows(), values.cols(), false);
    for (Index c = 0; c < observed_cells; ++c) {
      const Index cell = order[static_cast<std::size_t>(c)];
      observed(cell % values.rows(), cell / values.rows()) = true;
    }
    Matrix stored = values;
    for (Index q = 0; q < stored.cols(); ++q)
      for (Index p = 0; p < stored.rows(); ++p)
        if (!observed(p, q)) stored(p, q) = 0.0;
    out.schema.add_relation(ids[a], ids[b], std::move(stored), std::move(observed), true);
  }

  for (auto t : spec.constrained_types) {
    const Index n = spec.sizes[t];
    const auto& cluster = out.clusters[t];
    Matrix theta = Matrix::Zero(n, n);
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        double v = cluster[p] == cluster[q] ? -1.0 : 1.0;
        if (uniform01(rng) >= spec.informativeness) v = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        theta(p, q) = theta(q, p) = v;
      }
    for (Index p = 0; p < n; ++p) theta(p, p) = theta.row(p).cwiseAbs().sum();
    out.schema.add_constraint(ids[t], spec.constraint_weight * theta);
  }
  return out;
}

/// Three-type chain t1 - t2 - t3 with the t1-t2 relation as target.
inline SyntheticSpec chain_spec(std::vector<Index> sizes, std::vector<Index> ranks, double noise, double density,
                                std::uint64_t seed) {
  SyntheticSpec spec;
  spec.sizes = std::move(sizes);
  spec.ranks = std::move(ranks);
  spec.relations = {{0, 1}, {1, 2}};
  spec.noise_sigma = noise;
  spec.target_density = density;
  spec.seed = seed;
  return spec;
}

}  // namespace fusemf
