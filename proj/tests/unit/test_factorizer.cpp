#include <catch_amalgamated.hpp>

#include "fusemf/factorizer.hpp"
#include "fusemf/synth.hpp"
#include "../support/oracles.hpp"
#include "../support/random_systems.hpp"

using namespace fusemf;

namespace {

FusionSchema two_types(const Matrix& r12) {
  FusionSchema s;
  const auto a = s.add_object_type("a", r12.rows());
  const auto b = s.add_object_type("b", r12.cols());
  s.add_relation(a, b, r12, (r12.array() >= 0).all() && (r12.array() <= 1).all());
  return s;
}

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("update_s recovers exact cores", "[factorizer]") {
  Matrix r(2, 2);
  r << 3, 3, 6, 6;
  const auto s = two_types(r);
  const std::vector<Matrix> G{col({1, 2}), col({1, 1})};
  const auto S = update_s(G, s);
  CHECK(S.at({TypeId{0}, TypeId{1}})(0, 0) == Catch::Approx(3.0).epsilon(1e-14));
  // the symmetrized reverse block carries the transpose
  CHECK(S.at({TypeId{1}, TypeId{0}})(0, 0) == Catch::Approx(3.0).epsilon(1e-14));
  CHECK(S.size() == 2);
}

TEST_CASE("update_s hand cases", "[factorizer]") {
  const std::vector<Matrix> G{col({1, 1}), col({1, 1})};
  CHECK(update_s(G, two_types(Matrix::Constant(2, 2, 2.0))).at({TypeId{0}, TypeId{1}})(0, 0) ==
        Catch::Approx(2.0).epsilon(1e-14));
  CHECK(update_s(G, two_types(Matrix::Zero(2, 2))).at({TypeId{0}, TypeId{1}}).isZero(0));
}

TEST_CASE("update_g leaves an exact factorization unchanged", "[factorizer]") {
  Matrix g1(3, 2), g2(2, 2), s12(2, 2);
  g1 << 1, 0.2, 0.3, 1, 0.5, 0.5;
  g2 << 1, 0.1, 0.4, 0.9;
  s12 << 0.8, 0.1, 0.2, 0.6;
  const Matrix r = g1 * s12 * g2.transpose();
  const auto s = two_types(r / r.maxCoeff());
  const std::vector<Matrix> G{g1, g2};
  const auto S = update_s(G, s);
  const auto G2 = update_g(G, S, s);
  CHECK((G2[0] - g1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((G2[1] - g2).cwiseAbs().maxCoeff() <= 1e-12);
  const auto S2 = update_s(G2, s);
  CHECK((S2.at({TypeId{0}, TypeId{1}}) - S.at({TypeId{0}, TypeId{1}})).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("blockwise updates match the dense rules", "[factorizer]") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    testgen::Options opt;
    opt.constraints = seed % 2 == 1;
    opt.reverse_pairs = seed % 3 == 0;
    const auto sys = testgen::make(1000 + seed, opt);
    const FusionProblem problem(sys.schema);
    const auto S = update_s(problem, sys.G);
    const auto d = oracle::assemble(sys.schema, sys.G, S);
    const auto layout = BlockLayout::make(sys.schema, sys.ranks);

    const Matrix s_dense = oracle::update_s(d.R, d.G);
    CHECK((d.S - s_dense).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, s_dense.cwiseAbs().maxCoeff()));

    const auto G2 = update_g(problem, sys.G, S);
    const Matrix g_dense = oracle::update_g(d.R, d.G, d.S, d.thetas, kUpdateDelta);
    for (std::size_t i = 0; i < G2.size(); ++i)
      CHECK((G2[i] - oracle::diag_block(g_dense, layout, i)).cwiseAbs().maxCoeff() <= 1e-10);

    const double dense_obj = oracle::objective(d.R, d.G, d.S, d.thetas);
    CHECK(std::abs(objective(problem, sys.G, S) - dense_obj) <= 1e-10 * std::max(1.0, std::abs(dense_obj)));
  }
}

TEST_CASE("the fixed n=(3,4,2) k=(2,2,1) system matches the dense rule", "[factorizer]") {
  Rng rng(3);
  FusionSchema s;
  const auto a = s.add_object_type("a", 3), b = s.add_object_type("b", 4), c = s.add_object_type("c", 2);
  auto rnd = [&](Index r, Index k) {
    Matrix m(r, k);
    for (Index i = 0; i < m.size(); ++i) m(i) = uniform01(rng);
    return m;
  };
  s.add_relation(a, b, rnd(3, 4), true);
  s.add_relation(b, c, rnd(4, 2));
  Matrix theta = rnd(3, 3).array() - 0.5;
  s.add_constraint(a, Matrix(theta + theta.transpose()));
  const std::vector<Matrix> G{rnd(3, 2), rnd(4, 2), rnd(2, 1)};
  const auto S = update_s(G, s);
  const auto G2 = update_g(G, S, s);
  const auto d = oracle::assemble(s, G, S);
  const Matrix dense = oracle::update_g(d.R, d.G, d.S, d.thetas);
  const std::vector<Index> ranks{2, 2, 1};
  const auto layout = BlockLayout::make(s, ranks);
  for (std::size_t i = 0; i < 3; ++i) CHECK((G2[i] - oracle::diag_block(dense, layout, i)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("update_g keeps factors non-negative", "[factorizer]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    testgen::Options opt;
    opt.constraints = true;
    auto sys = testgen::make(seed, opt);
    const FusionProblem p(sys.schema);
    auto G = sys.G;
    for (int it = 0; it < 20; ++it) {
      G = update_g(p, G, update_s(p, G));
      for (const auto& g : G) REQUIRE(g.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("objective hand cases", "[factorizer]") {
  Matrix r(2, 2);
  r << 0.3, 0.3, 0.6, 0.6;
  SECTION("exact reconstruction without constraints") {
    const auto s = two_types(r);
    const std::vector<Matrix> G{col({1, 2}), col({1, 1})};
    CHECK(objective(G, update_s(G, s), s) == Catch::Approx(0.0).margin(1e-24));
  }
  SECTION("exact reconstruction with a must-link constraint") {
    auto s = two_types(r);
    Matrix theta(2, 2);
    theta << 0, -1, -1, 0;
    s.add_constraint(TypeId{0}, theta);
    const std::vector<Matrix> G{col({1, 2}), col({1, 1})};
    // tr(G^T Theta G) = 2 * (1 * -1 * 2) = -4
    CHECK(objective(G, update_s(G, s), s) == Catch::Approx(-4.0).epsilon(1e-12));
  }
  SECTION("zero factors") {
    const auto s = two_types(r);
    const std::vector<Matrix> G{Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
    std::map<BlockKey, Matrix> S{{{TypeId{0}, TypeId{1}}, Matrix::Zero(1, 1)}, {{TypeId{1}, TypeId{0}}, Matrix::Zero(1, 1)}};
    // both the block and its symmetrized transpose count
    CHECK(objective(G, S, s) == Catch::Approx(2.0 * r.squaredNorm()).epsilon(1e-14));
  }
}

TEST_CASE("converged is a strict threshold on the target residual", "[factorizer]") {
  Matrix r(2, 2);
  r << 3, 3, 6, 6;
  const Matrix gi = col({1, 2}), gj = col({1, 1});
  Matrix s(1, 1);
  s << 3;
  CHECK(converged(r, gi, s, gj, 1e-5));
  Matrix off = r;
  off(0, 0) += 1e-5;
  const double res = target_residual(off, gi, s, gj);
  CHECK(res == Catch::Approx(1e-5).epsilon(1e-9));
  CHECK_FALSE(converged(off, gi, s, gj, res));
  CHECK(converged(off, gi, s, gj, std::nextafter(res, 1.0)));
  CHECK(converged(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Zero(1, 1), Matrix::Zero(2, 1), 1e-5));
}

TEST_CASE("factorize", "[factorizer]") {
  SECTION("max_iters = 0 returns the initialization with S from one update_s") {
    const auto sys = testgen::make(7);
    FitConfig cfg;
    cfg.max_iters = 0;
    const auto res = factorize(FusionProblem(sys.schema), sys.G, cfg);
    CHECK(res.trace.iterations_run == 0);
    CHECK(res.trace.objective_samples.empty());
    for (std::size_t i = 0; i < sys.G.size(); ++i) CHECK(res.model.G[i] == sys.G[i]);
    CHECK(res.model.S == update_s(FusionProblem(sys.schema), sys.G));
  }
  SECTION("checkpoints fall on multiples of the interval") {
    const auto sys = testgen::make(8);
    FitConfig cfg;
    cfg.max_iters = 23;
    cfg.check_interval = 5;
    cfg.epsilon = 1e-300;
    const auto res = factorize(FusionProblem(sys.schema), sys.G, cfg);
    REQUIRE(res.trace.objective_samples.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(res.trace.objective_samples[i].first == static_cast<int>(5 * (i + 1)));
    CHECK(res.trace.iterations_run == 23);
    CHECK_FALSE(res.trace.converged);
  }
  SECTION("planted noiseless two-type system") {
    SyntheticSpec spec;
    spec.sizes = {20, 15};
    spec.ranks = {3, 2};
    spec.relations = {{0, 1}};
    spec.seed = 4;
    const auto data = synth_generate(spec);
    FitConfig cfg;
    cfg.max_iters = 3000;
    cfg.seed = 1;
    const auto res = factorize(data.schema, spec.ranks, InitStrategy{}, cfg);
    REQUIRE_FALSE(res.trace.target_residuals.empty());
    CHECK(res.trace.target_residuals.back().second < 1e-3);
  }
  SECTION("same seed, same trace") {
    const auto data = synth_generate(chain_spec({12, 10, 8}, {3, 2, 2}, 0.01, 0.8, 5));
    FitConfig cfg;
    cfg.seed = 9;
    cfg.max_iters = 60;
    const std::vector<Index> ranks{3, 2, 2};
    const auto a = factorize(data.schema, ranks, InitStrategy{}, cfg);
    const auto b = factorize(data.schema, ranks, InitStrategy{}, cfg);
    CHECK(a.trace == b.trace);
    CHECK(a.model.G == b.model.G);
  }
  SECTION("rank bounds") {
    const auto sys = testgen::make(1);
    std::vector<Index> too_big = sys.ranks;
    too_big[0] = sys.schema.count(TypeId{0}) + 1;
    CHECK_THROWS_AS(factorize(sys.schema, too_big, InitStrategy{}, FitConfig{}), ValidationError);
    std::vector<Index> zero = sys.ranks;
    zero[1] = 0;
    CHECK_THROWS_AS(factorize(sys.schema, zero, InitStrategy{}, FitConfig{}), ValidationError);
    FitConfig bad;
    bad.epsilon = 0;
    CHECK_THROWS_AS(factorize(sys.schema, sys.ranks, InitStrategy{}, bad), ValidationError);
  }
}

TEST_CASE("S blocks exist only for present relations", "[factorizer]") {
  const auto sys = testgen::make(21);
  const auto S = update_s(FusionProblem(sys.schema), sys.G);
  for (const auto& [key, s] : S) {
    CHECK(key.row != key.col);
    const bool present = sys.schema.find_relation(key.row, key.col) || sys.schema.find_relation(key.col, key.row);
    CHECK(present);
  }
}

TEST_CASE("objective descends at checkpoints and under the S step", "[factorizer]") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    testgen::Options opt;
    opt.max_n = 12;
    const auto sys = testgen::make(500 + seed, opt);
    const FusionProblem p(sys.schema);
    auto G = sys.G;
    auto S = update_s(p, G);
    double prev = objective(p, G, S);
    for (int it = 0; it < 100; ++it) {
      G = update_g(p, G, S);
      const double before_s = objective(p, G, S);
      S = update_s(p, G);
      const double after_s = objective(p, G, S);
      CHECK(after_s <= before_s * (1 + 1e-12) + 1e-12);
      CHECK(after_s <= prev * (1 + 1e-8) + 1e-12);
      prev = after_s;
    }
  }
}
