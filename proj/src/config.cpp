#include "bope/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "bope/errors.hpp"

namespace bope {

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

template <typename T>
T scalar(const YAML::Node& node, const std::string& field, const char* kind) {
  if (!node.IsScalar()) throw ConfigError(field, std::string("expected ") + kind, line_of(node));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, std::string("expected ") + kind + ", got '" + node.Scalar() + "'", line_of(node));
  }
}

int as_int(const YAML::Node& n, const std::string& f) { return scalar<int>(n, f, "an integer"); }
double as_double(const YAML::Node& n, const std::string& f) { return scalar<double>(n, f, "a number"); }
bool as_bool(const YAML::Node& n, const std::string& f) { return scalar<bool>(n, f, "true or false"); }
std::string as_string(const YAML::Node& n, const std::string& f) { return scalar<std::string>(n, f, "a string"); }

std::uint64_t as_seed(const YAML::Node& n, const std::string& f) {
  return scalar<std::uint64_t>(n, f, "a non-negative integer");
}

std::vector<double> as_doubles(const YAML::Node& n, const std::string& f) {
  if (n.IsScalar()) return {as_double(n, f)};
  if (!n.IsSequence()) throw ConfigError(f, "expected a number or a list of numbers", line_of(n));
  std::vector<double> out;
  for (const auto& item : n) out.push_back(as_double(item, f));
  return out;
}

void require_map(const YAML::Node& n, const std::string& f) {
  if (!n.IsMap()) throw ConfigError(f, "expected a mapping", line_of(n));
}

// Converts InputError from enum parsing into a located ConfigError.
template <typename F>
auto located(const YAML::Node& n, const std::string& f, F&& parse) {
  try {
    return parse();
  } catch (const InputError& e) {
    throw ConfigError(f, e.what(), line_of(n));
  }
}

void apply_dm(DmConfig& dm, const YAML::Node& node) {
  require_map(node, "dm");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const std::string f = "dm." + key;
    const YAML::Node& v = kv.second;
    if (key == "model") dm.model = located(v, f, [&] { return dm_model_from_string(as_string(v, f)); });
    else if (key == "sigma") dm.sigma = as_double(v, f);
    else if (key == "beta") dm.beta = as_double(v, f);
    else throw ConfigError(f, "unknown key", line_of(kv.first));
  }
}

void apply_ensemble(MonotonicEnsemble::Options& e, const YAML::Node& node) {
  require_map(node, "ensemble");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const std::string f = "ensemble." + key;
    const YAML::Node& v = kv.second;
    if (key == "size") e.ensemble_size = as_int(v, f);
    else if (key == "hidden") {
      if (!v.IsSequence()) throw ConfigError(f, "expected a list of layer widths", line_of(v));
      e.architecture.hidden.clear();
      for (const auto& w : v) e.architecture.hidden.push_back(as_int(w, f));
    } else if (key == "activation") {
      e.architecture.activation = located(v, f, [&] { return activation_from_string(as_string(v, f)); });
    } else if (key == "monotonic") e.architecture.monotonic = as_bool(v, f);
    else if (key == "epochs") e.train.epochs = as_int(v, f);
    else if (key == "learning_rate") e.train.learning_rate = as_double(v, f);
    else if (key == "learning_rate_min") e.train.learning_rate_min = as_double(v, f);
    else if (key == "cosine_period") e.train.cosine_period = as_int(v, f);
    else if (key == "early_stop_loss") e.train.early_stop_loss = as_double(v, f);
    else if (key == "threads") e.threads = as_int(v, f);
    else if (key == "input_scaling") e.scale_inputs = as_bool(v, f);
    else throw ConfigError(f, "unknown key", line_of(kv.first));
  }
}

void apply_acquisition(AcquisitionConfig& a, const YAML::Node& node) {
  require_map(node, "acquisition");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const std::string f = "acquisition." + key;
    const YAML::Node& v = kv.second;
    if (key == "posterior_samples") a.posterior_samples = as_int(v, f);
    else if (key == "raw_samples") a.raw_samples = as_int(v, f);
    else if (key == "restarts") a.restarts = as_int(v, f);
    else if (key == "batch_size") a.batch_size = as_int(v, f);
    else if (key == "refine_iterations") a.refine_iterations = as_int(v, f);
    else if (key == "pair_selection")
      a.pair_selection = located(v, f, [&] { return pair_criterion_from_string(as_string(v, f)); });
    else if (key == "exclude_asked_pairs") a.exclude_asked_pairs = as_bool(v, f);
    else throw ConfigError(f, "unknown key", line_of(kv.first));
  }
}

void apply_gp(GpFitOptions& g, const YAML::Node& node) {
  require_map(node, "gp");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const std::string f = "gp." + key;
    const YAML::Node& v = kv.second;
    if (key == "restarts") g.restarts = as_int(v, f);
    else if (key == "max_iterations") g.max_iterations = as_int(v, f);
    else throw ConfigError(f, "unknown key", line_of(kv.first));
  }
}

// Returns false for keys that are not run-configuration keys.
bool apply_run_key(RunConfig& cfg, const std::string& key, const YAML::Node& v) {
  if (key == "problem") cfg.problem = as_string(v, key);
  else if (key == "utility") cfg.utility = as_string(v, key);
  else if (key == "utility_params") {
    require_map(v, key);
    cfg.utility_params.clear();
    for (const auto& p : v) {
      const auto name = p.first.as<std::string>();
      cfg.utility_params[name] = as_doubles(p.second, key + "." + name);
    }
  } else if (key == "iterations") cfg.iterations = as_int(v, key);
  else if (key == "init_observations") cfg.init_observations = as_int(v, key);
  else if (key == "init_comparisons") cfg.init_comparisons = as_int(v, key);
  else if (key == "seed") cfg.seed = as_seed(v, key);
  else if (key == "algorithm") cfg.algorithm = located(v, key, [&] { return algorithm_from_string(as_string(v, key)); });
  else if (key == "regret_floor") cfg.regret_floor = as_double(v, key);
  else if (key == "early_stop") cfg.early_stop = as_bool(v, key);
  else if (key == "reference_optimum") {
    if (v.IsNull()) cfg.reference_optimum.reset();
    else cfg.reference_optimum = as_double(v, key);
  } else if (key == "dm") apply_dm(cfg.dm, v);
  else if (key == "ensemble") apply_ensemble(cfg.ensemble, v);
  else if (key == "acquisition") apply_acquisition(cfg.acquisition, v);
  else if (key == "gp") apply_gp(cfg.gp, v);
  else return false;
  return true;
}

// Line of the first occurrence of `key` at the top level, for errors that
// are only detected after parsing.
int top_level_line(const YAML::Node& root, const std::string& field) {
  const std::string head = field.substr(0, field.find('.'));
  if (!root.IsMap()) return 0;
  for (const auto& kv : root)
    if (kv.first.as<std::string>() == head) return line_of(kv.first);
  return 0;
}

void validate_located(const RunConfig& cfg, const YAML::Node& root) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw;
    // Strip the field prefix that ConfigError added, then relocate.
    std::string message = e.what();
    const std::string prefix = e.field() + ": ";
    if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
    throw ConfigError(e.field(), message, top_level_line(root, e.field()));
  }
}

YAML::Node parse_yaml(std::string_view text) {
  try {
    YAML::Node root = YAML::Load(std::string(text));
    if (root.IsNull()) return YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ConfigError("", "configuration must be a mapping", line_of(root));
    return root;
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig apply_run_map(const YAML::Node& root, RunConfig cfg, const std::set<std::string>& extra_keys = {}) {
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (extra_keys.count(key)) continue;
    if (!apply_run_key(cfg, key, kv.second)) throw ConfigError(key, "unknown key", line_of(kv.first));
  }
  return cfg;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const RunConfig& defaults) {
  const YAML::Node root = parse_yaml(text);
  RunConfig cfg = apply_run_map(root, defaults);
  validate_located(cfg, root);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path)); }

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError(std::string(assignment), "override must look like key=value");
  const std::string path(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  // Build the nested YAML mapping for a dotted key, then reuse the parser.
  std::string yaml;
  std::string indent;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      yaml += indent + part + ": " + value + "\n";
      break;
    }
    yaml += indent + part + ":\n";
    indent += "  ";
    start = dot + 1;
  }
  const YAML::Node root = parse_yaml(yaml);
  RunConfig next = apply_run_map(root, cfg);
  try {
    next.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("", std::string("override ") + std::string(assignment) + ": " + e.what());
  }
  cfg = std::move(next);
}

std::vector<BenchCell> BenchMatrix::cells() const {
  std::vector<BenchCell> out;
  for (const auto& problem : problems)
    for (Algorithm algorithm : algorithms)
      for (const auto& [name, condition] : conditions)
        for (std::uint64_t seed : seeds) {
          BenchCell cell;
          cell.problem = problem;
          cell.algorithm = to_string(algorithm);
          cell.condition = name;
          cell.seed = seed;
          cell.config = condition;
          cell.config.problem = problem;
          cell.config.algorithm = algorithm;
          cell.config.seed = seed;
          out.push_back(std::move(cell));
        }
  return out;
}

BenchMatrix parse_bench_matrix(std::string_view text) {
  const YAML::Node root = parse_yaml(text);
  const std::set<std::string> matrix_keys{"problems", "algorithms", "seeds", "conditions"};
  BenchMatrix m;
  m.base = apply_run_map(root, RunConfig{}, matrix_keys);

  const auto missing = [&](const char* key) {
    return ConfigError(key, "must be a non-empty list", top_level_line(root, key));
  };
  if (root["problems"]) {
    const YAML::Node& v = root["problems"];
    if (!v.IsSequence()) throw ConfigError("problems", "expected a list", line_of(v));
    for (const auto& p : v) m.problems.push_back(as_string(p, "problems"));
  }
  if (root["algorithms"]) {
    const YAML::Node& v = root["algorithms"];
    if (!v.IsSequence()) throw ConfigError("algorithms", "expected a list", line_of(v));
    for (const auto& a : v)
      m.algorithms.push_back(located(a, "algorithms", [&] { return algorithm_from_string(as_string(a, "algorithms")); }));
  }
  if (root["seeds"]) {
    const YAML::Node& v = root["seeds"];
    if (v.IsScalar()) {
      const int count = as_int(v, "seeds");
      if (count < 0) throw ConfigError("seeds", "count must be non-negative", line_of(v));
      for (int s = 0; s < count; ++s) m.seeds.push_back(static_cast<std::uint64_t>(s));
    } else if (v.IsSequence()) {
      for (const auto& s : v) m.seeds.push_back(as_seed(s, "seeds"));
    } else {
      throw ConfigError("seeds", "expected a list or a count", line_of(v));
    }
  }
  if (m.problems.empty()) throw missing("problems");
  if (m.algorithms.empty()) throw missing("algorithms");
  if (m.seeds.empty()) throw missing("seeds");

  if (root["conditions"]) {
    const YAML::Node& v = root["conditions"];
    if (!v.IsMap()) throw ConfigError("conditions", "expected a mapping of name to overrides", line_of(v));
    for (const auto& kv : v) {
      const auto name = kv.first.as<std::string>();
      if (!kv.second.IsMap() && !kv.second.IsNull())
        throw ConfigError("conditions." + name, "expected a mapping", line_of(kv.second));
      RunConfig c = kv.second.IsNull() ? m.base : apply_run_map(kv.second, m.base);
      m.conditions.emplace_back(name, std::move(c));
    }
    if (m.conditions.empty()) throw missing("conditions");
  } else {
    m.conditions.emplace_back("default", m.base);
  }

  for (const auto& problem : m.problems)
    for (const auto& [name, c] : m.conditions) {
      RunConfig probe = c;
      probe.problem = problem;
      try {
        probe.validate();
      } catch (const ConfigError& e) {
        throw ConfigError(e.field(), std::string("in cell ") + problem + "/" + name + ": " + e.what(),
                          top_level_line(root, e.field()));
      }
    }
  return m;
}

BenchMatrix load_bench_matrix(const std::filesystem::path& path) { return parse_bench_matrix(read_file(path)); }

std::string run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["problem"] = cfg.problem;
  j["utility"] = cfg.utility;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.utility_params) params[k] = v;
  j["utility_params"] = params;
  j["iterations"] = cfg.iterations;
  j["init_observations"] = cfg.init_observations;
  j["init_comparisons"] = cfg.init_comparisons;
  j["seed"] = cfg.seed;
  j["algorithm"] = to_string(cfg.algorithm);
  j["regret_floor"] = cfg.regret_floor;
  j["early_stop"] = cfg.early_stop;
  j["reference_optimum"] = cfg.reference_optimum ? nlohmann::ordered_json(*cfg.reference_optimum) : nlohmann::ordered_json();
  j["dm"] = {{"model", to_string(cfg.dm.model)}, {"sigma", cfg.dm.sigma}, {"beta", cfg.dm.beta}};
  const auto& e = cfg.ensemble;
  j["ensemble"] = {{"size", e.ensemble_size},
                   {"hidden", e.architecture.hidden},
                   {"activation", to_string(e.architecture.activation)},
                   {"monotonic", e.architecture.monotonic},
                   {"epochs", e.train.epochs},
                   {"learning_rate", e.train.learning_rate},
                   {"learning_rate_min", e.train.learning_rate_min},
                   {"cosine_period", e.train.cosine_period},
                   {"early_stop_loss", e.train.early_stop_loss},
                   {"threads", e.threads},
                   {"input_scaling", e.scale_inputs}};
  const auto& a = cfg.acquisition;
  j["acquisition"] = {{"posterior_samples", a.posterior_samples},
                      {"raw_samples", a.raw_samples},
                      {"restarts", a.restarts},
                      {"batch_size", a.batch_size},
                      {"refine_iterations", a.refine_iterations},
                      {"pair_selection", to_string(a.pair_selection)},
                      {"exclude_asked_pairs", a.exclude_asked_pairs}};
  j["gp"] = {{"restarts", cfg.gp.restarts}, {"max_iterations", cfg.gp.max_iterations}};
  return j.dump();
}

}  // namespace bope
