#pragma once

// Small planted instances of the two reference topologies.
//
// fig1: four types E1..E4 (6, 5, 4, 7 objects) with relations R12, R21,
// R23, R42, R41, R43 (no relation between E3 and E1), one constraint on E2
// and two on E4. R12 is the target.
//
// fig2: six types with relations R12 (target), R13, R14, R16, R45, R42,
// R62 and constraints on E1, E2, E5, E6. E3 and E5 reach the target type
// only through intermediaries.

#include <cstdint>

#include "fusemf/synth.hpp"

namespace fusemf {

inline SyntheticSpec fig1_spec(std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.names = {"E1", "E2", "E3", "E4"};
  s.sizes = {6, 5, 4, 7};
  s.ranks = {2, 2, 2, 3};
  s.relations = {{0, 1}, {1, 0}, {1, 2}, {3, 1}, {3, 0}, {3, 2}};
  s.target_relation = 0;
  s.noise_sigma = 0.01;
  s.seed = seed;
  return s;
}

inline FusionSchema fixture_fig1(std::uint64_t seed = 1) {
  auto data = synth_generate(fig1_spec(seed));
  // E4 carries a second, independent constraint
  Rng rng(derive_seed(seed, 4));
  const Index n = data.schema.count(TypeId{3});
  Matrix extra = Matrix::Zero(n, n);
  for (Index p = 0; p < n; ++p)
    for (Index q = p + 1; q < n; ++q) extra(p, q) = extra(q, p) = uniform01(rng) < 0.5 ? -0.1 : 0.1;
  for (Index p = 0; p < n; ++p) extra(p, p) = extra.row(p).cwiseAbs().sum();
  FusionSchema out;
  for (const auto& t : data.schema.types()) out.add_object_type(t.name, t.count);
  for (const auto& r : data.schema.relations()) out.add_relation(r.source, r.target, r.values, r.observed, r.is_target);
  // one on E2, two on E4
  Rng crng(derive_seed(seed, 2));
  for (TypeId t : {TypeId{1}, TypeId{3}}) {
    const Index m = out.count(t);
    Matrix theta = Matrix::Zero(m, m);
    const auto& cl = data.clusters[t.value];
    for (Index p = 0; p < m; ++p)
      for (Index q = p + 1; q < m; ++q) theta(p, q) = theta(q, p) = cl[p] == cl[q] ? -0.1 : 0.1;
    for (Index p = 0; p < m; ++p) theta(p, p) = theta.row(p).cwiseAbs().sum();
    out.add_constraint(t, theta);
  }
  out.add_constraint(TypeId{3}, extra);
  return out;
}

inline SyntheticSpec fig2_spec(std::uint64_t seed = 1) {
  SyntheticSpec s;
  s.names = {"E1", "E2", "E3", "E4", "E5", "E6"};
  s.sizes = {40, 15, 20, 18, 12, 14};
  s.ranks = {4, 3, 3, 3, 2, 3};
  // R12 first: it is the target
  s.relations = {{0, 1}, {0, 2}, {0, 3}, {0, 5}, {3, 4}, {3, 1}, {5, 1}};
  s.target_relation = 0;
  s.noise_sigma = 0.05;
  s.binarize_target = true;
  s.target_density = 1.0;
  s.constrained_types = {0, 1, 4, 5};
  s.informativeness = 0.9;
  s.seed = seed;
  return s;
}

inline FusionSchema fixture_fig2(std::uint64_t seed = 1) { return synth_generate(fig2_spec(seed)).schema; }

}  // namespace fusemf
