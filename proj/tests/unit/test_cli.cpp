#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "fusemf/io.hpp"

using namespace fusemf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fusemf_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = std::string(FUSEMF_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("cli exit codes", "[cli]") {
  const auto dir = scratch("codes");
  REQUIRE(run("synth --fixture fig1 --out " + (dir / "d").string()) == 0);
  CHECK(run("validate " + (dir / "d" / "config.txt").string()) == 0);

  // disconnected: a type no relation touches
  auto text = slurp(dir / "d" / "config.txt");
  write_file_atomic(dir / "d" / "lonely.txt", "type E9 3\n" + text);
  const auto log = dir / "validate.log";
  CHECK(run("validate " + (dir / "d" / "lonely.txt").string(), log) == 1);
  CHECK_THAT(slurp(log), Catch::Matchers::ContainsSubstring("E9"));

  write_file_atomic(dir / "d" / "broken.txt", "type E1 3\nnonsense\n");
  CHECK(run("validate " + (dir / "d" / "broken.txt").string(), log) == 1);
  CHECK_THAT(slurp(log), Catch::Matchers::ContainsSubstring("broken.txt:2"));

  CHECK(run("validate " + (dir / "missing.txt").string()) != 0);
  CHECK(run("no-such-command") == 2);
  CHECK(run("fit " + (dir / "d" / "config.txt").string()) == 2);  // --out missing
}

TEST_CASE("cli fit and predict are byte-deterministic", "[cli]") {
  const auto dir = scratch("det");
  const auto cfg = (dir / "d" / "config.txt").string();
  REQUIRE(run("synth --fixture fig1 --seed 3 --out " + (dir / "d").string()) == 0);
  for (const char* m : {"m1", "m2"})
    REQUIRE(run("fit " + cfg + " --out " + (dir / m).string() + " --ensemble-size 3 --max-iters 40 --seed 5") == 0);
  for (const auto& e : fs::directory_iterator(dir / "m1"))
    CHECK(slurp(e.path()) == slurp(dir / "m2" / e.path().filename()));
  REQUIRE(run("predict " + (dir / "m1").string() + " --all-unobserved --out " + (dir / "p1.tsv").string()) == 0);
  REQUIRE(run("predict " + (dir / "m2").string() + " --all-unobserved --out " + (dir / "p2.tsv").string()) == 0);
  const auto p1 = slurp(dir / "p1.tsv");
  CHECK(p1 == slurp(dir / "p2.tsv"));
  CHECK(p1.rfind("# fusemf predictions\n# ensemble_size 3\n# majority_threshold 2\n", 0) == 0);

  // both or neither of --profile / --all-unobserved is an error
  CHECK(run("predict " + (dir / "m1").string()) == 1);
}

TEST_CASE("cli ensemble sizes", "[cli]") {
  const auto dir = scratch("sizes");
  const auto cfg = (dir / "d" / "config.txt").string();
  REQUIRE(run("synth --fixture fig1 --out " + (dir / "d").string()) == 0);
  for (int size : {1, 2, 4}) {
    const auto m = dir / ("m" + std::to_string(size));
    REQUIRE(run("fit " + cfg + " --max-iters 10 --ensemble-size " + std::to_string(size) + " --out " + m.string()) == 0);
    const auto stored = load_model(m);
    CHECK(stored.members.size() == static_cast<std::size_t>(size));
    CHECK(stored.manifest.at("majority_threshold") == size / 2 + 1);
  }
  CHECK(run("fit " + cfg + " --ensemble-size 0 --out " + (dir / "m0").string()) == 1);
}

TEST_CASE("cli synth density", "[cli]") {
  const auto dir = scratch("density");
  REQUIRE(run("synth --sizes 20,10,8 --ranks 3,2,2 --density 0.3 --seed 2 --out " + dir.string()) == 0);
  const auto cfg = read_config(dir / "config.txt");
  CHECK(cfg.schema.target().observed.count() == 60);
}

TEST_CASE("cli predict for a new object", "[cli]") {
  const auto dir = scratch("profile");
  REQUIRE(run("synth --fixture fig1 --out " + (dir / "d").string()) == 0);
  REQUIRE(run("fit " + (dir / "d" / "config.txt").string() + " --ensemble-size 3 --max-iters 30 --out " +
              (dir / "m").string()) == 0);
  const auto cfg = read_config(dir / "d" / "config.txt");
  // E1's profile: R12 (5, ignored), R21^T (5), R41^T (7)
  Matrix row = Matrix::Constant(1, 17, 0.3);
  write_matrix(dir / "new.mtx", row);
  REQUIRE(run("predict " + (dir / "m").string() + " --profile " + (dir / "new.mtx").string() + " --out " +
              (dir / "new.tsv").string()) == 0);
  const auto out = slurp(dir / "new.tsv");
  CHECK_THAT(out, Catch::Matchers::ContainsSubstring("col\tscore\tpercentile\tvotes\taccepted\n"));
  CHECK(std::count(out.begin(), out.end(), '\n') == 5 + 5);
  write_matrix(dir / "bad.mtx", Matrix::Constant(1, 4, 0.3));
  CHECK(run("predict " + (dir / "m").string() + " --profile " + (dir / "bad.mtx").string()) == 1);
}
