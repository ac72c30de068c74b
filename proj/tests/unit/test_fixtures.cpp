#include <catch_amalgamated.hpp>

#include "fusemf/eval.hpp"
#include "fusemf/fixtures.hpp"
#include "fusemf/io.hpp"

#include <filesystem>

using namespace fusemf;

TEST_CASE("fig1 fixture", "[fixtures]") {
  const auto s = fixture_fig1(1);
  CHECK(s.validate().ok());
  CHECK(s.relations().size() == 6);
  CHECK(s.constraint_count(TypeId{1}) == 1);
  CHECK(s.constraint_count(TypeId{3}) == 2);
  CHECK(s.max_constraint_count() == 2);
  CHECK(s.find_relation(TypeId{2}, TypeId{0}) == nullptr);
  CHECK(s.find_relation(TypeId{0}, TypeId{2}) == nullptr);
  CHECK(s.target().source == TypeId{0});
  CHECK(s.target().target == TypeId{1});
}

TEST_CASE("fig2 fixture", "[fixtures]") {
  const auto s = fixture_fig2(1);
  CHECK(s.validate().ok());
  CHECK(s.type_count() == 6);
  CHECK(s.relations().size() == 7);
  for (std::size_t t : {0, 1, 4, 5}) CHECK(s.constraint_count(TypeId{t}) >= 1);
  // E3 and E5 touch E1/E2 only through other types
  CHECK(s.find_relation(TypeId{4}, TypeId{0}) == nullptr);
  CHECK(s.find_relation(TypeId{2}, TypeId{1}) == nullptr);
  // dropping R45 leaves E5 unreachable
  std::vector<std::size_t> keep{0, 1, 2, 3, 5, 6};
  // as an ablation subset E5 is simply dropped
  CHECK(subset_schema(s, {"no45", keep, {}}).second == std::vector<std::size_t>{0, 1, 2, 3, 5});
  FusionSchema manual;
  for (const auto& t : s.types()) manual.add_object_type(t.name, t.count);
  for (auto r : keep) {
    const auto& rel = s.relations()[r];
    manual.add_relation(rel.source, rel.target, rel.values, rel.observed, rel.is_target);
  }
  const auto rep = manual.validate();
  CHECK_FALSE(rep.connected);
  CHECK(rep.unreachable_types == std::vector<std::string>{"E5"});
}

TEST_CASE("fixtures are seed-deterministic", "[fixtures]") {
  CHECK(fixture_fig2(3).target().values == fixture_fig2(3).target().values);
  CHECK(fixture_fig2(3).target().values != fixture_fig2(4).target().values);
}

TEST_CASE("shipped fixture files match the library fixtures", "[fixtures]") {
  const std::filesystem::path data = FUSEMF_DATA_DIR;
  const std::pair<const char*, FusionSchema> cases[] = {{"fig1", fixture_fig1(1)}, {"fig2", fixture_fig2(1)}};
  for (const auto& [name, schema] : cases) {
    INFO(name);
    const auto cfg = read_config(data / name / "config.txt");
    REQUIRE(cfg.schema.relations().size() == schema.relations().size());
    for (std::size_t r = 0; r < schema.relations().size(); ++r) {
      CHECK(cfg.schema.relations()[r].values == schema.relations()[r].values);
      CHECK(cfg.schema.relations()[r].is_target == schema.relations()[r].is_target);
    }
    REQUIRE(cfg.schema.constraints().size() == schema.constraints().size());
    for (std::size_t c = 0; c < schema.constraints().size(); ++c)
      CHECK(cfg.schema.constraints()[c].values == schema.constraints()[c].values);
  }
  CHECK_FALSE(read_config(data / "fig2" / "config_without_R45.txt").schema.validate().connected);
}
