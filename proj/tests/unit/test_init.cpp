#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "fusemf/fixtures.hpp"
#include "fusemf/init.hpp"

using namespace fusemf;

TEST_CASE("build_profile concatenates touching relations", "[init]") {
  FusionSchema s;
  const auto a = s.add_object_type("a", 2), b = s.add_object_type("b", 3), c = s.add_object_type("c", 2);
  Matrix rab(2, 3), rcb(2, 3), rac(2, 2);
  rab << 1, 2, 3, 4, 5, 6;
  rcb << 7, 8, 9, 10, 11, 12;
  rac << 0.1, 0.2, 0.3, 0.4;
  s.add_relation(a, b, rab);
  s.add_relation(c, b, rcb);
  s.add_relation(a, c, rac);

  const Matrix pa = build_profile(s, a);
  REQUIRE(pa.rows() == 2);
  REQUIRE(pa.cols() == 5);
  CHECK(pa.leftCols(3) == rab);
  CHECK(pa.rightCols(2) == rac);

  const Matrix pb = build_profile(s, b);
  REQUIRE(pb.cols() == 4);
  CHECK(pb.leftCols(2) == rab.transpose());
  CHECK(pb.rightCols(2) == rcb.transpose());
}

TEST_CASE("random_acol averages column subsets", "[init]") {
  Matrix p(2, 2);
  p << 1, 3, 2, 4;
  InitStrategy st;
  st.kind = InitKind::random_acol;
  st.acol_subset_size = 2;
  const Matrix g = init_factor(st, p, 1, 5);
  CHECK(g(0, 0) == Catch::Approx(2.0));
  CHECK(g(1, 0) == Catch::Approx(3.0));

  // each column equals the mean of some size-p column subset
  Rng rng(2);
  Matrix wide(4, 9);
  for (Index i = 0; i < wide.size(); ++i) wide(i) = uniform01(rng);
  st.acol_subset_size = 3;
  const Matrix g3 = init_factor(st, wide, 3, 11);
  for (Index q = 0; q < 3; ++q) {
    bool found = false;
    for (int a = 0; a < 9 && !found; ++a)
      for (int b = a + 1; b < 9 && !found; ++b)
        for (int c = b + 1; c < 9 && !found; ++c) {
          const Vector mean = (wide.col(a) + wide.col(b) + wide.col(c)) / 3.0;
          found = (mean - g3.col(q)).cwiseAbs().maxCoeff() < 1e-12;
        }
    CHECK(found);
  }
}

TEST_CASE("random init lies in [0,1)", "[init]") {
  InitStrategy st;
  st.kind = InitKind::random;
  const Matrix g = init_factor(st, Matrix::Ones(6, 4), 3, 1);
  CHECK(g.minCoeff() >= 0.0);
  CHECK(g.maxCoeff() < 1.0);
}

TEST_CASE("random_c draws from the densest columns", "[init]") {
  Matrix p = Matrix::Zero(3, 10);
  p.col(7).setConstant(5.0);
  p.col(2).setConstant(0.1);
  InitStrategy st;
  st.kind = InitKind::random_c;
  st.random_c_fraction = 0.1;  // pool of one column
  st.random_c_subset_size = 3;
  const Matrix g = init_factor(st, p, 2, 9);
  CHECK(g == Matrix::Constant(3, 2, 5.0));
}

TEST_CASE("kmeans init is a floored indicator", "[init]") {
  Matrix p(6, 2);
  p << 0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1;
  InitStrategy st;
  st.kind = InitKind::kmeans;
  const Matrix g = init_factor(st, p, 2, 3);
  for (Index r = 0; r < 6; ++r) {
    CHECK(g.row(r).maxCoeff() == 1.0);
    CHECK(g.row(r).minCoeff() == st.kmeans_floor);
  }
  Index first_a, first_b;
  g.row(0).maxCoeff(&first_a);
  g.row(3).maxCoeff(&first_b);
  CHECK(first_a != first_b);
  for (Index r : {1, 2}) {
    Index c;
    g.row(r).maxCoeff(&c);
    CHECK(c == first_a);
  }
  for (Index r : {4, 5}) {
    Index c;
    g.row(r).maxCoeff(&c);
    CHECK(c == first_b);
  }
}

TEST_CASE("every strategy is non-negative, sized and seed-deterministic", "[init]") {
  const auto schema = fixture_fig1(3);
  const std::vector<Index> ranks{2, 2, 2, 3};
  for (auto kind : {InitKind::random, InitKind::random_c, InitKind::random_acol, InitKind::kmeans, InitKind::nndsvda}) {
    INFO(to_string(kind));
    InitStrategy st;
    st.kind = kind;
    const auto a = init_factors(schema, ranks, st, 17);
    const auto b = init_factors(schema, ranks, st, 17);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(a[i].rows() == schema.count(TypeId{i}));
      CHECK(a[i].cols() == ranks[i]);
      CHECK(a[i].minCoeff() >= 0.0);
      CHECK(a[i] == b[i]);
    }
  }
}

TEST_CASE("init_factor argument checks", "[init]") {
  InitStrategy st;
  CHECK_THROWS_AS(init_factor(st, Matrix::Ones(3, 3), 4, 1), ValidationError);
  CHECK_THROWS_AS(init_factor(st, Matrix::Ones(3, 3), 0, 1), ValidationError);
  CHECK_THROWS_AS(init_factor(st, Matrix(3, 0), 1, 1), ValidationError);
}

TEST_CASE("init kind names round-trip", "[init]") {
  for (auto kind : {InitKind::random, InitKind::random_c, InitKind::random_acol, InitKind::kmeans, InitKind::nndsvda})
    CHECK(parse_init_kind(to_string(kind)) == kind);
  CHECK_FALSE(parse_init_kind("bogus").has_value());
}

TEST_CASE("svd_distance agrees with eigenvalues of the Gram matrix", "[init]") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix r(7, 5);
    for (Index i = 0; i < r.size(); ++i) r(i) = uniform01(rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r.transpose() * r);
    const Vector ev = eig.eigenvalues();  // ascending
    for (Index k = 1; k <= 5; ++k) {
      double tail = 0.0;
      for (Index i = 0; i < 5 - k; ++i) tail += std::max(ev(i), 0.0);
      CHECK(svd_distance(r, k) == Catch::Approx(std::sqrt(tail)).margin(1e-9));
    }
  }
  CHECK_THROWS_AS(svd_distance(Matrix::Ones(3, 2), 3), ValidationError);
}

TEST_CASE("relative_error", "[init]") {
  Matrix r = Matrix::Zero(3, 3);
  r.diagonal() << 3, 2, 1;
  const Matrix gi = Matrix::Identity(3, 1), gj = Matrix::Identity(3, 1);
  Matrix s(1, 1);
  s << 3;
  // best rank-1 distance sqrt(5), achieved exactly
  CHECK(*relative_error(r, gi, s, gj, 1) == Catch::Approx(0.0).margin(1e-12));
  s << 0;
  CHECK(*relative_error(r, gi, s, gj, 1) == Catch::Approx(std::sqrt(14.0 / 5.0) - 1.0));
  // rank-saturated: distance at full rank is zero
  CHECK_FALSE(relative_error(r, Matrix::Identity(3, 3), Matrix::Identity(3, 3), Matrix::Identity(3, 3), 3).has_value());
}
