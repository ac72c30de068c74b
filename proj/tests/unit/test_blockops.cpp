#include <catch_amalgamated.hpp>

#include "fusemf/blockops.hpp"
#include "fusemf/fixtures.hpp"
#include "fusemf/random.hpp"
#include "../support/random_systems.hpp"

using namespace fusemf;

TEST_CASE("split_pos_neg", "[blockops]") {
  Matrix x(2, 2);
  x << 1, -2, 0, 3;
  const auto s = split_pos_neg(x);
  Matrix pos(2, 2), neg(2, 2);
  pos << 1, 0, 0, 3;
  neg << 0, 2, 0, 0;
  CHECK(s.pos == pos);
  CHECK(s.neg == neg);

  const auto z = split_pos_neg(Matrix::Zero(3, 2));
  CHECK(z.pos.isZero(0));
  CHECK(z.neg.isZero(0));

  const Matrix m = -Matrix::Constant(2, 3, 0.25);
  const auto n = split_pos_neg(m);
  CHECK(n.pos.isZero(0));
  CHECK(n.neg == -m);

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix r(4, 5);
    for (Index i = 0; i < r.size(); ++i) r(i) = uniform01(rng) - 0.5;
    const auto sp = split_pos_neg(r);
    CHECK((sp.pos - sp.neg) == r);
    CHECK(sp.pos.cwiseProduct(sp.neg).isZero(0));
    CHECK(sp.pos.minCoeff() >= 0.0);
    CHECK(sp.neg.minCoeff() >= 0.0);
  }
}

TEST_CASE("BlockLayout offsets", "[blockops]") {
  FusionSchema s;
  s.add_object_type("a", 2);
  s.add_object_type("b", 3);
  s.add_object_type("c", 4);
  const std::vector<Index> ranks{1, 2, 3};
  const auto l = BlockLayout::make(s, ranks);
  CHECK(l.row_offsets == std::vector<Index>{0, 2, 5, 9});
  CHECK(l.rank_offsets == std::vector<Index>{0, 1, 3, 6});
  CHECK(l.total_rows() == 9);
  CHECK(l.total_rank() == 6);
}

TEST_CASE("assemble_relation_block fills missing reverse blocks with transposes", "[blockops]") {
  FusionSchema s;
  const auto a = s.add_object_type("a", 2);
  const auto b = s.add_object_type("b", 3);
  Matrix r12(2, 3);
  r12 << 1, 2, 3, 4, 5, 6;
  s.add_relation(a, b, r12, false);
  const std::vector<Index> ranks{1, 1};
  const Matrix R = assemble_relation_block(s, BlockLayout::make(s, ranks));
  Matrix expected = Matrix::Zero(5, 5);
  expected.block(0, 2, 2, 3) = r12;
  expected.block(2, 0, 3, 2) = r12.transpose();
  CHECK(R == expected);
  CHECK(R == R.transpose());
}

TEST_CASE("assemble_relation_block keeps both directions when given", "[blockops]") {
  FusionSchema s;
  const auto a = s.add_object_type("a", 2);
  const auto b = s.add_object_type("b", 2);
  Matrix r12(2, 2), r21(2, 2);
  r12 << 1, 2, 3, 4;
  r21 << 9, 8, 7, 6;
  s.add_relation(a, b, r12);
  s.add_relation(b, a, r21);
  const std::vector<Index> ranks{1, 1};
  const Matrix R = assemble_relation_block(s, BlockLayout::make(s, ranks));
  CHECK(R.block(0, 2, 2, 2) == r12);
  CHECK(R.block(2, 0, 2, 2) == r21);
  CHECK(R.block(0, 0, 2, 2).isZero(0));
  CHECK(R.block(2, 2, 2, 2).isZero(0));
}

TEST_CASE("assemble_relation_block without relations is zero", "[blockops]") {
  FusionSchema s;
  s.add_object_type("a", 2);
  s.add_object_type("b", 2);
  const std::vector<Index> ranks{1, 1};
  CHECK(assemble_relation_block(s, BlockLayout::make(s, ranks)).isZero(0));
}

TEST_CASE("assemble_constraint_block follows the t > t_i rule", "[blockops]") {
  FusionSchema s;
  const auto a = s.add_object_type("a", 2);
  const auto b = s.add_object_type("b", 3);
  const std::vector<Index> ranks{1, 1};
  const auto layout = BlockLayout::make(s, ranks);

  const Matrix t1 = Matrix::Constant(3, 3, 1.0), t2 = Matrix::Constant(3, 3, -2.0);
  s.add_constraint(b, t1);
  s.add_constraint(b, t2);
  const Matrix theta2 = assemble_constraint_block(s, layout, 2);
  Matrix expected = Matrix::Zero(5, 5);
  expected.block(2, 2, 3, 3) = t2;
  CHECK(theta2 == expected);
  CHECK(assemble_constraint_block(s, layout, 3).isZero(0));
  CHECK_THROWS_AS(assemble_constraint_block(s, layout, 0), ValidationError);

  const Matrix ta = Matrix::Identity(2, 2);
  s.add_constraint(a, ta);
  const Matrix theta1 = assemble_constraint_block(s, layout, 1);
  CHECK(theta1.block(0, 0, 2, 2) == ta);
  CHECK(theta1.block(2, 2, 3, 3) == t1);
}

TEST_CASE("fig1 constraint block 2 touches only E4", "[blockops][fixtures]") {
  const auto s = fixture_fig1();
  const std::vector<Index> ranks{1, 1, 1, 1};
  const auto layout = BlockLayout::make(s, ranks);
  const Matrix theta2 = assemble_constraint_block(s, layout, 2);
  Matrix rest = theta2;
  rest.block(layout.row_offsets[3], layout.row_offsets[3], layout.rows(3), layout.rows(3)).setZero();
  CHECK(rest.isZero(0));
  CHECK_FALSE(theta2.isZero(0));
}

TEST_CASE("gram_pinv", "[blockops]") {
  SECTION("orthonormal columns give the identity") {
    Matrix q = Matrix::Zero(3, 2);
    q(0, 0) = 1;
    q(2, 1) = 1;
    CHECK(gram_pinv(q).isApprox(Matrix::Identity(2, 2), 1e-14));
  }
  SECTION("scalar Gram") {
    Matrix g(2, 1);
    g << 1, 2;
    CHECK(gram_pinv(g)(0, 0) == Catch::Approx(0.2).epsilon(1e-14));
  }
  SECTION("Penrose conditions, including rank-deficient inputs") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      Matrix g(6, 3);
      for (Index i = 0; i < g.size(); ++i) g(i) = uniform01(rng);
      if (trial % 3 == 0) g.col(2) = g.col(0);  // duplicate column
      if (trial % 5 == 0) g.col(1).setZero();
      const Matrix a = g.transpose() * g;
      const Matrix p = gram_pinv(g);
      REQUIRE(p.allFinite());
      CHECK((a * p * a - a).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((p * a * p - p).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(((a * p).transpose() - a * p).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(((p * a).transpose() - p * a).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("validated random schemas assemble without dimension errors", "[blockops]") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    testgen::Options opt;
    opt.types = 2 + static_cast<int>(seed % 4);
    opt.constraints = true;
    opt.reverse_pairs = seed % 2 == 0;
    const auto sys = testgen::make(seed, opt);
    REQUIRE(sys.schema.validate().ok());
    const auto layout = BlockLayout::make(sys.schema, sys.ranks);
    CHECK_NOTHROW(assemble_relation_block(sys.schema, layout));
    for (int t = 1; t <= sys.schema.max_constraint_count(); ++t)
      CHECK_NOTHROW(assemble_constraint_block(sys.schema, layout, t));
    const Matrix g = assemble_factor_block(layout, sys.G);
    CHECK(g.rows() == layout.total_rows());
    CHECK(g.cols() == layout.total_rank());
  }
}
