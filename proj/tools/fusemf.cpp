// fusemf: command-line front end.
//
//   fusemf validate    <config>
//   fusemf fit         <config> --out DIR [--ranks ...] [--rank-ranges ...]
//   fusemf predict     <model-dir> (--profile FILE | --all-unobserved) [--out FILE]
//   fusemf evaluate    <config> --out DIR [--folds N] [--flatten] [--ablate SPEC]
//   fusemf synth       --out DIR [--sizes ...] [--ranks ...] ...
//   fusemf init-study  <config> [--ranks ...] [--seeds N]
//
// Exit status: 0 success, 1 invalid input, 2 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fusemf/fusemf.hpp"

namespace {

using namespace fusemf;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

Index to_index(const std::string& s, const std::string& what) {
  auto v = detail::parse_number<Index>(s);
  if (!v) throw ValidationError("invalid " + what + " '" + s + "'");
  return *v;
}

/// "E1=4,E2=3" or positional "4,3".
std::vector<Index> parse_ranks(const std::string& text, const FusionSchema& schema) {
  const auto parts = split(text, ',');
  std::vector<Index> ranks(schema.type_count(), 0);
  if (!parts.empty() && parts.front().find('=') == std::string::npos) {
    if (parts.size() != schema.type_count())
      throw ValidationError("--ranks needs " + std::to_string(schema.type_count()) + " values");
    for (std::size_t i = 0; i < parts.size(); ++i) ranks[i] = to_index(parts[i], "rank");
    return ranks;
  }
  std::vector<bool> seen(schema.type_count(), false);
  for (const auto& p : parts) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ValidationError("expected <type>=<k> in --ranks, got '" + p + "'");
    const auto id = schema.type_id(p.substr(0, eq));
    ranks[id.value] = to_index(p.substr(eq + 1), "rank");
    seen[id.value] = true;
  }
  for (const auto& t : schema.types())
    if (!seen[t.id.value]) throw ValidationError("--ranks gives no rank for type '" + t.name + "'");
  return ranks;
}

/// "E1:1:8,E2:1:5"
std::vector<RankRange> parse_ranges(const std::string& text, const FusionSchema& schema) {
  std::vector<RankRange> out;
  for (const auto& p : split(text, ',')) {
    const auto f = split(p, ':');
    if (f.size() != 3) throw ValidationError("expected <type>:<lo>:<hi> in --rank-ranges, got '" + p + "'");
    out.push_back({schema.type_id(f[0]), to_index(f[1], "rank bound"), to_index(f[2], "rank bound")});
  }
  return out;
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> max_iters;
  std::optional<int> check_interval;
  std::optional<std::size_t> ensemble_size;
  std::optional<std::string> init;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--epsilon", epsilon, "Convergence threshold on the target residual (default 1e-5)");
    cmd->add_option("--max-iters", max_iters, "Iteration cap (default 500)");
    cmd->add_option("--check-interval", check_interval, "Iterations between convergence checks (default 5)");
    cmd->add_option("--ensemble-size", ensemble_size, "Number of factor systems voting (default 15)");
    cmd->add_option("--init", init, "random | random_c | random_acol | kmeans | nndsvda (default random_acol)");
  }

  /// Flags win over the configuration file.
  void apply(Config& cfg) const {
    if (seed) cfg.seed = *seed;
    if (epsilon) cfg.fit.epsilon = *epsilon;
    if (max_iters) cfg.fit.max_iters = *max_iters;
    if (check_interval) cfg.fit.check_interval = *check_interval;
    if (ensemble_size) cfg.ensemble_size = *ensemble_size;
    if (init) {
      auto kind = parse_init_kind(*init);
      if (!kind) throw ValidationError("unknown init strategy '" + *init + "'");
      cfg.init.kind = *kind;
    }
    cfg.fit.check();
    if (cfg.ensemble_size < 1) throw ValidationError("ensemble size must be >= 1");
  }
};

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) write_file_atomic(*out, text);
  else std::cout << text;
}

// ---- validate ----

int cmd_validate(const std::string& path) {
  const auto cfg = read_config(path);
  const auto report = cfg.schema.validate();
  std::cout << report.describe();
  return report.ok() ? kOk : kInvalid;
}

// ---- fit ----

struct FitArgs {
  std::string config;
  std::string out;
  std::optional<std::string> ranks;
  std::optional<std::string> ranges;
};

int cmd_fit(const FitArgs& a, const Common& common) {
  auto cfg = read_config(a.config);
  common.apply(cfg);
  cfg.schema.require_valid();
  std::optional<std::vector<Index>> ranks = cfg.ranks;
  if (a.ranks) ranks = parse_ranks(*a.ranks, cfg.schema);
  auto ranges = cfg.ranges;
  if (a.ranges) ranges = parse_ranges(*a.ranges, cfg.schema);

  nlohmann::ordered_json extra;
  if (!ranges.empty()) {
    // start from the given ranks; searched types without one start at lo
    std::vector<Index> initial = ranks.value_or(std::vector<Index>(cfg.schema.type_count(), 0));
    for (const auto& r : ranges)
      if (initial[r.type.value] == 0) initial[r.type.value] = r.lo;
    for (const auto& t : cfg.schema.types())
      if (initial[t.id.value] == 0) throw ValidationError("type '" + t.name + "' has neither a rank nor a range");
    for (const auto& r : ranges) initial[r.type.value] = std::clamp(initial[r.type.value], r.lo, r.hi);
    RankEvalConfig rc;
    rc.fit = cfg.fit;
    rc.init = cfg.init;
    rc.seed = derive_seed(cfg.seed, 11);
    const auto sel = select_ranks(cfg.schema, ranges, rc, initial);
    ranks = sel.ranks;
    auto log = nlohmann::ordered_json::array();
    for (const auto& q : sel.log)
      log.push_back({{"ranks", q.ranks}, {"rho", format_double(q.rho)}, {"r2", format_double(q.r2)}});
    extra["rank_search"] = log;
    std::cout << "selected ranks:";
    for (const auto& t : cfg.schema.types()) std::cout << ' ' << t.name << '=' << (*ranks)[t.id.value];
    std::cout << '\n';
  }
  if (!ranks) throw ValidationError("no ranks: give --ranks, --rank-ranges, or a ranks/range line in the config");

  EnsembleConfig ens;
  ens.size = cfg.ensemble_size;
  ens.seed = cfg.seed;
  const auto members = fit_ensemble(cfg.schema, *ranks, cfg.init, cfg.fit, ens);
  extra["ranks"] = *ranks;
  extra["seed"] = cfg.seed;
  extra["init"] = std::string(to_string(cfg.init.kind));
  extra["epsilon"] = format_double(cfg.fit.epsilon);
  extra["max_iters"] = cfg.fit.max_iters;
  extra["check_interval"] = cfg.fit.check_interval;
  save_model(a.out, cfg.schema, members, extra);
  int converged = 0;
  for (const auto& m : members) converged += m.fit.trace.converged;
  std::cout << "fitted " << members.size() << " member(s), " << converged << " converged; model written to " << a.out
            << '\n';
  return kOk;
}

// ---- predict ----

struct PredictArgs {
  std::string model;
  std::optional<std::string> profile;
  bool all_unobserved = false;
  std::optional<std::string> out;
  std::string mode = "row";
};

std::string prediction_header(std::size_t size, const std::string& mode) {
  // ceil((size+1)/2), the smallest strict majority
  const std::size_t needed = (size + 2) / 2;
  return "# fusemf predictions\n# ensemble_size " + std::to_string(size) + "\n# majority_threshold " +
         std::to_string(needed) + "\n# rule " + mode + "\n";
}

int cmd_predict(const PredictArgs& a) {
  if (a.profile.has_value() == a.all_unobserved) throw ValidationError("give exactly one of --profile or --all-unobserved");
  const auto stored = load_model(a.model);
  const auto& schema = stored.schema;
  const auto& target = schema.target();
  const std::size_t size = stored.members.size();

  if (a.all_unobserved) {
    if (a.mode != "row" && a.mode != "column") throw ValidationError("--mode must be row or column");
    const auto mode = a.mode == "row" ? CandidateMode::row : CandidateMode::column;
    const auto set = ensemble_predict(stored.members, schema, mode);
    std::string text = prediction_header(size, a.mode) + "# skipped " + std::to_string(set.skipped) + "\n";
    text += "row\tcol\tscore\tpercentile\tvotes\n";
    for (const auto& p : set.pairs) {
      if (target.observed(p.p, p.q)) continue;
      text += std::to_string(p.p) + "\t" + std::to_string(p.q) + "\t" + fmt(p.score) + "\t" +
              (p.percentile ? fmt(*p.percentile) : std::string("NA")) + "\t" + std::to_string(p.votes) + "\n";
    }
    emit(a.out, text);
    return kOk;
  }

  // New object of the target's source type: fold in, then score every column
  // with the column-centric rule against the stored known associations.
  const auto prof = read_matrix(*a.profile);
  if (prof.values.rows() != 1) throw ValidationError("profile file must hold a single row");
  const Vector values = prof.values.row(0).transpose();
  std::vector<bool> obs_vec(static_cast<std::size_t>(values.size()));
  for (Index q = 0; q < values.size(); ++q) obs_vec[static_cast<std::size_t>(q)] = prof.observed(0, q);
  const auto observed = std::make_unique<bool[]>(obs_vec.size());
  std::copy(obs_vec.begin(), obs_vec.end(), observed.get());
  const TypeId type = target.source;
  const Mask known_train = known_associations(target);
  const Index n = known_train.rows(), labels = known_train.cols();
  Mask known(n + 1, labels);
  known.topRows(n) = known_train;
  known.row(n).setConstant(false);

  std::vector<Matrix> scores;
  Eigen::VectorXi votes = Eigen::VectorXi::Zero(labels);
  for (const auto& member : stored.members) {
    const Vector x = fold_in(member, schema, type, values, std::span<const bool>(observed.get(), obs_vec.size()));
    const auto extended = extend_model(member, type, x);
    const Matrix s = reconstruct(extended, type, target.target);
    for (const auto& c : candidates_column_centric(s, known).pairs)
      if (c.p == n) ++votes(c.q);
    scores.push_back(s);
  }
  const Matrix mean = order_free_mean(scores);
  const int needed = majority_threshold(size);
  std::string text = prediction_header(size, "column") + "col\tscore\tpercentile\tvotes\taccepted\n";
  for (Index q = 0; q < labels; ++q) {
    const auto pct = percentile_strength(mean, known, q, mean(n, q));
    text += std::to_string(q) + "\t" + fmt(mean(n, q)) + "\t" + (pct ? fmt(*pct) : std::string("NA")) + "\t" +
            std::to_string(votes(q)) + "\t" + (votes(q) >= needed ? "1" : "0") + "\n";
  }
  emit(a.out, text);
  return kOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string config;
  std::string out;
  std::optional<std::string> ranks;
  int folds = 10;
  bool flatten = false;
  bool balance = false;
  double threshold = 0.5;
  std::optional<std::string> ablate;
};

/// "name=E1>E2,E1>E3,E1#1;..." with relations as SRC>DST and constraints as
/// TYPE#t (1-based t within the type).
std::vector<AblationSubset> parse_ablation(const std::string& spec, const FusionSchema& schema) {
  std::vector<AblationSubset> out;
  for (const auto& chunk : split(spec, ';')) {
    AblationSubset s;
    std::string items = chunk;
    if (const auto eq = chunk.find('='); eq != std::string::npos) {
      s.name = chunk.substr(0, eq);
      items = chunk.substr(eq + 1);
    } else {
      s.name = chunk;
    }
    for (const auto& item : split(items, ',')) {
      if (const auto gt = item.find('>'); gt != std::string::npos) {
        const auto src = schema.type_id(item.substr(0, gt)), dst = schema.type_id(item.substr(gt + 1));
        std::optional<std::size_t> idx;
        for (std::size_t r = 0; r < schema.relations().size(); ++r)
          if (schema.relations()[r].source == src && schema.relations()[r].target == dst) idx = r;
        if (!idx) throw ValidationError("ablation subset '" + s.name + "': no relation " + item);
        s.relations.push_back(*idx);
      } else if (const auto hash = item.find('#'); hash != std::string::npos) {
        const auto type = schema.type_id(item.substr(0, hash));
        const auto t = to_index(item.substr(hash + 1), "constraint index");
        std::optional<std::size_t> idx;
        for (std::size_t c = 0; c < schema.constraints().size(); ++c)
          if (schema.constraints()[c].type == type && schema.constraints()[c].index == t) idx = c;
        if (!idx) throw ValidationError("ablation subset '" + s.name + "': no constraint " + item);
        s.constraints.push_back(*idx);
      } else {
        throw ValidationError("ablation subset '" + s.name + "': cannot parse item '" + item + "'");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string report_rows(const std::string& model, const EvaluationReport& r) {
  std::string t;
  for (std::size_t f = 0; f < r.fold_f1.size(); ++f)
    t += model + "\t" + std::to_string(f) + "\t" + fmt(r.fold_f1[f]) + "\t" + fmt(r.fold_candidate_f1[f]) + "\n";
  t += model + "\tmean\t" + fmt(r.mean_f1) + "\t" + fmt(r.mean_candidate_f1) + "\n";
  return t;
}

int cmd_evaluate(const EvaluateArgs& a, const Common& common) {
  auto cfg = read_config(a.config);
  common.apply(cfg);
  cfg.schema.require_valid();
  auto ranks = cfg.ranks;
  if (a.ranks) ranks = parse_ranks(*a.ranks, cfg.schema);
  if (!ranks) throw ValidationError("evaluate needs ranks: give --ranks or a ranks line in the config");
  ModelSpec spec;
  spec.ranks = *ranks;
  spec.init = cfg.init;
  spec.fit = cfg.fit;
  spec.ensemble = EnsembleConfig{cfg.ensemble_size, true, cfg.seed};
  CvConfig cv;
  cv.folds = a.folds;
  cv.seed = cfg.seed;
  cv.balance = a.balance;
  cv.threshold = a.threshold;

  // parse the ablation spec up front so a bad subset fails before any fitting
  std::vector<AblationSubset> subsets;
  if (a.ablate) {
    subsets = parse_ablation(*a.ablate, cfg.schema);
    for (const auto& s : subsets) subset_schema(cfg.schema, s);
  }

  std::vector<std::pair<std::string, EvaluationReport>> reports;
  reports.emplace_back("structured", run_cv(cfg.schema, spec, cv));
  if (a.flatten) {
    cv.flatten = true;
    reports.emplace_back("flattened", run_cv(cfg.schema, spec, cv));
    cv.flatten = false;
  }
  std::string text = "model\tfold\tf1\tcandidate_f1\n";
  std::string labels = "model\tlabel\tf1\n";
  for (const auto& [name, r] : reports) {
    text += report_rows(name, r);
    for (std::size_t q = 0; q < r.label_f1.size(); ++q)
      labels += name + "\t" + std::to_string(q) + "\t" + fmt(r.label_f1[q]) + "\n";
  }
  for (const auto& [name, r] : reports)
    text += "# " + name + " skipped_rows " + std::to_string(r.skipped_rows) + " converged " +
            std::to_string(r.members_converged) + "/" + std::to_string(r.members_fitted) + "\n";
  write_file_atomic(fs::path(a.out) / "report.tsv", text);
  write_file_atomic(fs::path(a.out) / "labels.tsv", labels);
  std::cout << text;

  if (!subsets.empty()) {
    const auto rows = ablation_run(cfg.schema, subsets, spec, cv);
    std::string tab = "subset\tmean_f1\tsd_f1\tmean_candidate_f1\n";
    for (const auto& r : rows)
      tab += r.name + "\t" + fmt(r.mean_f1) + "\t" + fmt(r.sd_f1) + "\t" + fmt(r.report.mean_candidate_f1) + "\n";
    write_file_atomic(fs::path(a.out) / "ablation.tsv", tab);
    std::cout << tab;
  }
  return kOk;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::optional<std::string> fixture;
  std::string sizes = "40,30,20";
  std::string ranks = "4,3,2";
  std::string relations = "0>1,1>2";
  std::string constrain;
  double noise = 0.01;
  double density = 1.0;
  double informativeness = 1.0;
  double constraint_weight = 0.1;
  bool binarize = false;
};

int cmd_synth(const SynthArgs& a, const Common& common) {
  const std::uint64_t seed = common.seed.value_or(0);
  SyntheticSpec spec;
  if (a.fixture) {
    if (*a.fixture == "fig1") {
      const auto schema = fixture_fig1(seed);
      write_config(a.out, schema, fig1_spec(seed).ranks);
      std::cout << "wrote fixture fig1 to " << a.out << '\n';
      return kOk;
    }
    if (*a.fixture != "fig2") throw ValidationError("unknown fixture '" + *a.fixture + "' (fig1 or fig2)");
    spec = fig2_spec(seed);
  } else {
    for (const auto& s : split(a.sizes, ',')) spec.sizes.push_back(to_index(s, "size"));
    for (const auto& s : split(a.ranks, ',')) spec.ranks.push_back(to_index(s, "rank"));
    for (const auto& r : split(a.relations, ',')) {
      const auto gt = r.find('>');
      if (gt == std::string::npos) throw ValidationError("expected <i>><j> in --relations, got '" + r + "'");
      spec.relations.emplace_back(static_cast<std::size_t>(to_index(r.substr(0, gt), "type index")),
                                  static_cast<std::size_t>(to_index(r.substr(gt + 1), "type index")));
    }
    for (const auto& c : split(a.constrain, ','))
      spec.constrained_types.push_back(static_cast<std::size_t>(to_index(c, "type index")));
    spec.noise_sigma = a.noise;
    spec.target_density = a.density;
    spec.informativeness = a.informativeness;
    spec.constraint_weight = a.constraint_weight;
    spec.binarize_target = a.binarize;
    spec.seed = seed;
  }
  const auto data = synth_generate(spec);
  data.schema.require_valid();
  write_config(a.out, data.schema, spec.ranks);
  const fs::path truth = fs::path(a.out) / "truth";
  write_matrix(truth / "target.mtx", data.target_truth);
  std::string clusters;
  for (const auto& t : data.schema.types()) {
    write_matrix(truth / ("G_" + t.name + ".mtx"), data.G[t.id.value]);
    clusters += t.name;
    for (auto c : data.clusters[t.id.value]) clusters += " " + std::to_string(c);
    clusters += "\n";
  }
  write_file_atomic(truth / "clusters.txt", clusters);
  const auto& target = data.schema.target();
  std::cout << "wrote " << data.schema.type_count() << " types, " << data.schema.relations().size() << " relations, "
            << data.schema.constraints().size() << " constraints to " << a.out << "; target observed cells "
            << target.observed.count() << "/" << target.observed.size() << '\n';
  return kOk;
}

// ---- init-study ----

struct StudyArgs {
  std::string config;
  std::optional<std::string> ranks;
  int seeds = 20;
  int iterations = 20;
  std::string strategies = "random,random_c,random_acol,kmeans,nndsvda";
};

int cmd_init_study(const StudyArgs& a, const Common& common) {
  auto cfg = read_config(a.config);
  common.apply(cfg);
  cfg.schema.require_valid();
  auto ranks = cfg.ranks;
  if (a.ranks) ranks = parse_ranks(*a.ranks, cfg.schema);
  if (!ranks) throw ValidationError("init-study needs ranks: give --ranks or a ranks line in the config");
  if (a.seeds < 1 || a.iterations < 1) throw ValidationError("--seeds and --iterations must be >= 1");
  std::vector<InitKind> kinds;
  for (const auto& s : split(a.strategies, ',')) {
    auto k = parse_init_kind(s);
    if (!k) throw ValidationError("unknown init strategy '" + s + "'");
    kinds.push_back(*k);
  }
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < a.seeds; ++s) seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
  const auto rows = init_study(cfg.schema, *ranks, kinds, seeds, a.iterations);
  std::cout << "strategy\tmean_err\tsd_err\truns\tsaturated\n";
  for (const auto& r : rows)
    std::cout << to_string(r.kind) << '\t' << (r.errors.empty() ? "NA" : fmt(mean_of(r.errors))) << '\t'
              << (r.errors.empty() ? "NA" : fmt(stddev_of(r.errors))) << '\t' << r.errors.size() << '\t' << r.saturated
              << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collective matrix tri-factorization for data fusion"};
  app.require_subcommand(1);
  Common common;

  auto* validate = app.add_subcommand("validate", "Check a configuration and report the verdicts");
  std::string validate_config;
  validate->add_option("config", validate_config, "Configuration file")->required();

  auto* fit = app.add_subcommand("fit", "Fit an ensemble and persist it");
  FitArgs fit_args;
  fit->add_option("config", fit_args.config, "Configuration file")->required();
  fit->add_option("--out", fit_args.out, "Model directory")->required();
  fit->add_option("--ranks", fit_args.ranks, "Ranks, e.g. E1=4,E2=3 or 4,3");
  fit->add_option("--rank-ranges", fit_args.ranges, "Search ranges, e.g. E1:1:8,E2:1:8");
  common.add_to(fit);

  auto* predict = app.add_subcommand("predict", "Predict target associations from a stored model");
  PredictArgs predict_args;
  predict->add_option("model", predict_args.model, "Model directory")->required();
  predict->add_option("--profile", predict_args.profile, "Matrix file (one row) profiling a new object");
  predict->add_flag("--all-unobserved", predict_args.all_unobserved, "Score every unobserved target cell");
  predict->add_option("--mode", predict_args.mode, "Candidate rule for --all-unobserved: row | column");
  predict->add_option("--out", predict_args.out, "Output file (default: stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate target prediction");
  EvaluateArgs eval_args;
  evaluate->add_option("config", eval_args.config, "Configuration file")->required();
  evaluate->add_option("--out", eval_args.out, "Report directory")->required();
  evaluate->add_option("--ranks", eval_args.ranks, "Ranks, e.g. E1=4,E2=3 or 4,3");
  evaluate->add_option("--folds", eval_args.folds, "Number of folds (default 10)");
  evaluate->add_flag("--flatten", eval_args.flatten, "Also evaluate the flattened baseline");
  evaluate->add_flag("--balance", eval_args.balance, "Add sampled negatives to the target");
  evaluate->add_option("--threshold", eval_args.threshold, "Score threshold for predicted pairs (default 0.5)");
  evaluate->add_option("--ablate", eval_args.ablate, "Subsets, e.g. 'base=E1>E2;more=E1>E2,E1>E3,E1#1'");
  common.add_to(evaluate);

  auto* synth = app.add_subcommand("synth", "Write a planted synthetic system");
  SynthArgs synth_args;
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--fixture", synth_args.fixture, "fig1 | fig2 instead of the flags below");
  synth->add_option("--sizes", synth_args.sizes, "Objects per type (default 40,30,20)");
  synth->add_option("--ranks", synth_args.ranks, "Planted ranks (default 4,3,2)");
  synth->add_option("--relations", synth_args.relations, "0-based type pairs, first is the target (default 0>1,1>2)");
  synth->add_option("--constrain", synth_args.constrain, "Types that get a constraint matrix, e.g. 0,1");
  synth->add_option("--noise", synth_args.noise, "Noise standard deviation (default 0.01)");
  synth->add_option("--density", synth_args.density, "Observed share of target cells (default 1)");
  synth->add_option("--informativeness", synth_args.informativeness, "Share of constraint entries that are not random");
  synth->add_option("--constraint-weight", synth_args.constraint_weight, "Constraint scale (default 0.1)");
  synth->add_flag("--binarize", synth_args.binarize, "Threshold the target at 0.5");
  synth->add_option("--seed", common.seed, "Random seed");

  auto* study = app.add_subcommand("init-study", "Compare initialization strategies by relative error");
  StudyArgs study_args;
  study->add_option("config", study_args.config, "Configuration file")->required();
  study->add_option("--ranks", study_args.ranks, "Ranks, e.g. E1=4,E2=3 or 4,3");
  study->add_option("--seeds", study_args.seeds, "Number of seeds (default 20)");
  study->add_option("--iterations", study_args.iterations, "Iterations before measuring (default 20)");
  study->add_option("--strategies", study_args.strategies, "Comma-separated strategy names");
  common.add_to(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kRuntime;
  }

  try {
    if (*validate) return cmd_validate(validate_config);
    if (*fit) return cmd_fit(fit_args, common);
    if (*predict) return cmd_predict(predict_args);
    if (*evaluate) return cmd_evaluate(eval_args, common);
    if (*synth) return cmd_synth(synth_args, common);
    if (*study) return cmd_init_study(study_args, common);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
