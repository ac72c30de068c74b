#pragma once

// Text formats: coordinate matrix files, the schema configuration file and
// the on-disk model store (matrix files plus manifest.json).

#include <Eigen/Dense>
#include <json.hpp>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fusemf/error.hpp"
#include "fusemf/factorizer.hpp"
#include "fusemf/init.hpp"
#include "fusemf/predict.hpp"
#include "fusemf/ranksel.hpp"
#include "fusemf/schema.hpp"

namespace fusemf {

namespace fs = std::filesystem;

/// Writes through a sibling temp file and renames it into place.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  if constexpr (std::is_floating_point_v<T>) {
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
  } else {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  }
}

/// Calls fn(line_number, tokens) for each non-blank line not starting with
/// `comment`.
template <class Fn>
void for_each_line(const std::string& text, char comment, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == comment) continue;
    fn(number, tokens);
  }
}

}  // namespace detail

struct MatrixData {
  Matrix values;
  Mask observed;
};

inline constexpr std::string_view kMatrixHeader = "%%fusemf coordinate";

inline MatrixData parse_matrix(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(source, 1, "empty matrix file");
  const auto h = detail::split_ws(header);
  if (h.size() != 4 || h[0] != "%%fusemf" || h[1] != "coordinate")
    throw ParseError(source, 1, "expected header '%%fusemf coordinate <rows> <cols>'");
  const auto rows = detail::parse_number<Index>(h[2]);
  const auto cols = detail::parse_number<Index>(h[3]);
  if (!rows || !cols || *rows < 0 || *cols < 0) throw ParseError(source, 1, "invalid matrix dimensions");
  MatrixData m{Matrix::Zero(*rows, *cols), Mask::Constant(*rows, *cols, false)};
  std::string line;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    const auto t = detail::split_ws(line);
    if (t.empty() || t.front().front() == '%') continue;
    if (t.size() != 3) throw ParseError(source, number, "expected 'row col value'");
    const auto p = detail::parse_number<Index>(t[0]);
    const auto q = detail::parse_number<Index>(t[1]);
    const auto v = detail::parse_number<double>(t[2]);
    if (!p || !q) throw ParseError(source, number, "invalid index");
    if (!v) throw ParseError(source, number, "invalid value '" + std::string(t[2]) + "'");
    if (*p < 0 || *p >= *rows || *q < 0 || *q >= *cols)
      throw ParseError(source, number, "index (" + std::to_string(*p) + "," + std::to_string(*q) + ") out of bounds");
    if (m.observed(*p, *q))
      throw ParseError(source, number, "duplicate entry (" + std::to_string(*p) + "," + std::to_string(*q) + ")");
    m.values(*p, *q) = *v;
    m.observed(*p, *q) = true;
  }
  return m;
}

inline MatrixData read_matrix(const fs::path& path) { return parse_matrix(read_file(path), path.string()); }

/// Observed cells only, column-major order.
inline std::string format_matrix(const Matrix& values, const Mask& observed) {
  std::string out = std::string(kMatrixHeader) + " " + std::to_string(values.rows()) + " " +
                    std::to_string(values.cols()) + "\n";
  for (Index q = 0; q < values.cols(); ++q)
    for (Index p = 0; p < values.rows(); ++p)
      if (observed(p, q)) out += std::to_string(p) + " " + std::to_string(q) + " " + format_double(values(p, q)) + "\n";
  return out;
}

inline std::string format_matrix(const Matrix& values) {
  return format_matrix(values, Mask::Constant(values.rows(), values.cols(), true));
}

inline void write_matrix(const fs::path& path, const Matrix& values, const Mask& observed) {
  write_file_atomic(path, format_matrix(values, observed));
}
inline void write_matrix(const fs::path& path, const Matrix& values) { write_file_atomic(path, format_matrix(values)); }

/// Parsed configuration file. Directives, one per line ('#' comments):
///   type <name> <count>
///   relation <source> <target> <file> [target]
///   constraint <type> <file>
///   ranks <type>=<k> ...
///   range <type> <lo> <hi>
///   set <key> <value>     keys: epsilon max_iters check_interval ensemble_size seed init
/// Files are resolved relative to the configuration file.
struct Config {
  FusionSchema schema;
  std::optional<std::vector<Index>> ranks;
  std::vector<RankRange> ranges;
  FitConfig fit;
  InitStrategy init;
  std::size_t ensemble_size = 15;
  std::uint64_t seed = 0;
  // what the file set explicitly, so command-line flags only override the rest
  std::set<std::string> keys_set;
};

inline Config parse_config(const std::string& text, const std::string& source, const fs::path& base_dir) {
  Config cfg;
  std::map<std::string, Index> rank_of;
  int ranks_line = 0;
  detail::for_each_line(text, '#', [&](int line, const std::vector<std::string_view>& t) {
    const auto fail = [&](const std::string& what) { throw ParseError(source, line, what); };
    const auto type_of = [&](std::string_view name) {
      auto id = cfg.schema.find_type(name);
      if (!id) fail("unknown type '" + std::string(name) + "'");
      return *id;
    };
    const auto load = [&](std::string_view file) {
      try {
        return read_matrix(base_dir / std::string(file));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        fail(e.what());
      }
      return MatrixData{};
    };
    const std::string_view cmd = t[0];
    try {
      if (cmd == "type") {
        if (t.size() != 3) fail("usage: type <name> <count>");
        const auto n = detail::parse_number<Index>(t[2]);
        if (!n) fail("invalid count '" + std::string(t[2]) + "'");
        cfg.schema.add_object_type(std::string(t[1]), *n);
      } else if (cmd == "relation") {
        if (t.size() != 4 && !(t.size() == 5 && t[4] == "target")) fail("usage: relation <source> <target> <file> [target]");
        const auto src = type_of(t[1]), dst = type_of(t[2]);
        auto m = load(t[3]);
        cfg.schema.add_relation(src, dst, std::move(m.values), std::move(m.observed), t.size() == 5);
      } else if (cmd == "constraint") {
        if (t.size() != 3) fail("usage: constraint <type> <file>");
        const auto type = type_of(t[1]);
        auto m = load(t[2]);
        cfg.schema.add_constraint(type, std::move(m.values));
      } else if (cmd == "ranks") {
        if (t.size() < 2) fail("usage: ranks <type>=<k> ...");
        ranks_line = line;
        for (std::size_t i = 1; i < t.size(); ++i) {
          const auto eq = t[i].find('=');
          if (eq == std::string_view::npos) fail("expected <type>=<k>, got '" + std::string(t[i]) + "'");
          const auto k = detail::parse_number<Index>(t[i].substr(eq + 1));
          if (!k) fail("invalid rank in '" + std::string(t[i]) + "'");
          type_of(t[i].substr(0, eq));
          rank_of[std::string(t[i].substr(0, eq))] = *k;
        }
      } else if (cmd == "range") {
        if (t.size() != 4) fail("usage: range <type> <lo> <hi>");
        const auto lo = detail::parse_number<Index>(t[2]), hi = detail::parse_number<Index>(t[3]);
        if (!lo || !hi) fail("invalid range bounds");
        cfg.ranges.push_back({type_of(t[1]), *lo, *hi});
      } else if (cmd == "set") {
        if (t.size() != 3) fail("usage: set <key> <value>");
        const std::string key(t[1]);
        const auto bad = [&] { fail("invalid value '" + std::string(t[2]) + "' for " + key); };
        if (key == "epsilon") {
          auto v = detail::parse_number<double>(t[2]);
          if (!v) bad();
          cfg.fit.epsilon = *v;
        } else if (key == "max_iters" || key == "check_interval") {
          auto v = detail::parse_number<int>(t[2]);
          if (!v) bad();
          (key == "max_iters" ? cfg.fit.max_iters : cfg.fit.check_interval) = *v;
        } else if (key == "ensemble_size") {
          auto v = detail::parse_number<std::size_t>(t[2]);
          if (!v) bad();
          cfg.ensemble_size = *v;
        } else if (key == "seed") {
          auto v = detail::parse_number<std::uint64_t>(t[2]);
          if (!v) bad();
          cfg.seed = *v;
        } else if (key == "init") {
          auto v = parse_init_kind(t[2]);
          if (!v) bad();
          cfg.init.kind = *v;
        } else {
          fail("unknown setting '" + key + "'");
        }
        cfg.keys_set.insert(key);
      } else {
        fail("unknown directive '" + std::string(cmd) + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  });
  if (ranks_line > 0) {
    std::vector<Index> ranks;
    for (const auto& type : cfg.schema.types()) {
      auto it = rank_of.find(type.name);
      if (it == rank_of.end()) throw ParseError(source, ranks_line, "no rank given for type '" + type.name + "'");
      ranks.push_back(it->second);
    }
    cfg.ranks = std::move(ranks);
  }
  return cfg;
}

inline Config read_config(const fs::path& path) {
  return parse_config(read_file(path), path.string(), path.parent_path());
}

/// Config text referring to one matrix file per relation and constraint,
/// named r<k>.mtx and c<k>.mtx in declaration order.
struct ConfigFiles {
  std::string config;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
};

inline ConfigFiles format_config(const FusionSchema& schema, const std::optional<std::vector<Index>>& ranks = {}) {
  ConfigFiles out;
  std::string& c = out.config;
  for (const auto& t : schema.types()) c += "type " + t.name + " " + std::to_string(t.count) + "\n";
  for (std::size_t i = 0; i < schema.relations().size(); ++i) {
    const auto& r = schema.relations()[i];
    const std::string file = "r" + std::to_string(i + 1) + ".mtx";
    c += "relation " + schema.type(r.source).name + " " + schema.type(r.target).name + " " + file +
         (r.is_target ? " target" : "") + "\n";
    out.files.emplace_back(file, format_matrix(r.values, r.observed));
  }
  for (std::size_t i = 0; i < schema.constraints().size(); ++i) {
    const auto& k = schema.constraints()[i];
    const std::string file = "c" + std::to_string(i + 1) + ".mtx";
    c += "constraint " + schema.type(k.type).name + " " + file + "\n";
    out.files.emplace_back(file, format_matrix(k.values));
  }
  if (ranks) {
    c += "ranks";
    for (const auto& t : schema.types()) c += " " + t.name + "=" + std::to_string((*ranks)[t.id.value]);
    c += "\n";
  }
  return out;
}

inline void write_config(const fs::path& dir, const FusionSchema& schema,
                         const std::optional<std::vector<Index>>& ranks = {}, const std::string& extra = {}) {
  auto files = format_config(schema, ranks);
  for (const auto& [name, content] : files.files) write_file_atomic(dir / name, content);
  write_file_atomic(dir / "config.txt", files.config + extra);
}

// ---- model store ----

struct StoredModel {
  FusionSchema schema;  // relation shapes; only the target relation carries data
  std::vector<FactorSystem> members;
  nlohmann::ordered_json manifest;
};

inline std::string g_file(std::size_t member, const std::string& type) {
  return "m" + std::to_string(member) + "_G_" + type + ".mtx";
}
inline std::string s_file(std::size_t member, const std::string& a, const std::string& b) {
  return "m" + std::to_string(member) + "_S_" + a + "_" + b + ".mtx";
}

/// Persists every member's factors plus a manifest. Also keeps the target
/// relation (target.mtx) so predictions can tell known associations apart.
inline void save_model(const fs::path& dir, const FusionSchema& schema, const std::vector<EnsembleMember>& members,
                       const nlohmann::ordered_json& extra = {}) {
  using nlohmann::ordered_json;
  ordered_json m;
  m["format"] = "fusemf-model-1";
  ordered_json types = ordered_json::array();
  for (const auto& t : schema.types()) types.push_back({{"name", t.name}, {"count", t.count}});
  m["types"] = types;
  ordered_json rels = ordered_json::array();
  for (const auto& r : schema.relations())
    rels.push_back({{"source", schema.type(r.source).name}, {"target", schema.type(r.target).name}, {"is_target", r.is_target}});
  m["relations"] = rels;
  m["target_file"] = "target.mtx";
  m["ensemble_size"] = members.size();
  m["majority_threshold"] = majority_threshold(members.size());
  for (const auto& [k, v] : extra.items()) m[k] = v;
  ordered_json list = ordered_json::array();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& mem = members[i];
    ordered_json e;
    e["seed"] = mem.seed;
    e["ranks"] = mem.ranks;
    e["iterations"] = mem.fit.trace.iterations_run;
    e["converged"] = mem.fit.trace.converged;
    if (!mem.fit.trace.objective_samples.empty())
      e["final_objective"] = format_double(mem.fit.trace.objective_samples.back().second);
    if (!mem.fit.trace.target_residuals.empty())
      e["final_target_residual"] = format_double(mem.fit.trace.target_residuals.back().second);
    ordered_json gfiles = ordered_json::array(), sfiles = ordered_json::array();
    for (const auto& t : schema.types()) {
      const auto name = g_file(i, t.name);
      write_matrix(dir / name, mem.fit.model.G[t.id.value]);
      gfiles.push_back(name);
    }
    for (const auto& [key, s] : mem.fit.model.S) {
      const auto name = s_file(i, schema.type(key.row).name, schema.type(key.col).name);
      write_matrix(dir / name, s);
      sfiles.push_back({{"source", schema.type(key.row).name}, {"target", schema.type(key.col).name}, {"file", name}});
    }
    e["G"] = gfiles;
    e["S"] = sfiles;
    list.push_back(e);
  }
  m["members"] = list;
  const auto& target = schema.target();
  write_matrix(dir / "target.mtx", target.values, target.observed);
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

inline StoredModel load_model(const fs::path& dir) {
  StoredModel out;
  const auto manifest_path = dir / "manifest.json";
  try {
    out.manifest = nlohmann::ordered_json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }
  const auto& m = out.manifest;
  try {
    for (const auto& t : m.at("types")) out.schema.add_object_type(t.at("name").get<std::string>(), t.at("count").get<Index>());
    const auto target = read_matrix(dir / m.at("target_file").get<std::string>());
    for (const auto& r : m.at("relations")) {
      const auto src = out.schema.type_id(r.at("source").get<std::string>());
      const auto dst = out.schema.type_id(r.at("target").get<std::string>());
      if (r.at("is_target").get<bool>()) {
        out.schema.add_relation(src, dst, target.values, target.observed, true);
      } else {
        out.schema.add_relation(src, dst, Matrix::Zero(out.schema.count(src), out.schema.count(dst)));
      }
    }
    for (const auto& e : m.at("members")) {
      FactorSystem fs;
      for (const auto& name : e.at("G")) {
        fs.G.push_back(read_matrix(dir / name.get<std::string>()).values);
        fs.ranks.push_back(fs.G.back().cols());
      }
      for (const auto& s : e.at("S")) {
        const BlockKey key{out.schema.type_id(s.at("source").get<std::string>()),
                           out.schema.type_id(s.at("target").get<std::string>())};
        fs.S[key] = read_matrix(dir / s.at("file").get<std::string>()).values;
      }
      if (fs.G.size() != out.schema.type_count()) throw ValidationError("member has the wrong number of factors");
      out.members.push_back(std::move(fs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }
  if (out.members.empty()) throw ValidationError("model has no members");
  return out;
}

}  // namespace fusemf
