#include "bope/record_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bope/errors.hpp"

namespace bope {

namespace {

using json = nlohmann::ordered_json;

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  json cols = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(vector_json(m.col(c)));
  return {{"rows", m.rows()}, {"columns", cols}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto& cols = j.at("columns");
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const Eigen::VectorXd v = vector_from(cols[c]);
    if (v.size() != rows) throw InputError("matrix column has the wrong length");
    m.col(static_cast<Eigen::Index>(c)) = v;
  }
  return m;
}

}  // namespace

std::string record_to_jsonl(const RunRecord& r, bool include_timings) {
  std::ostringstream out;
  json header = {{"type", "header"},
                 {"schema", kRunSchema},
                 {"problem", r.problem},
                 {"utility", r.utility},
                 {"utility_hash", r.utility_hash},
                 {"algorithm", r.algorithm},
                 {"condition", r.condition},
                 {"seed", r.seed},
                 {"simulated", r.simulated},
                 {"reference_optimum", r.reference_optimum},
                 {"regret_floor", r.regret_floor},
                 {"init_designs", matrix_json(r.init_designs)},
                 {"init_outputs", matrix_json(r.init_outputs)},
                 {"initial_regret", r.initial_regret}};
  json comps = json::array();
  for (const auto& c : r.init_comparisons)
    comps.push_back({{"first", c.first}, {"second", c.second}, {"label", c.label}, {"was_error", c.was_error}});
  header["init_comparisons"] = comps;
  out << header.dump() << '\n';

  for (const auto& it : r.iterations) {
    json line = {{"type", "iteration"},
                 {"iteration", it.iteration},
                 {"x", vector_json(it.x)},
                 {"y", vector_json(it.y)},
                 {"acquisition_value", it.acquisition_value}};
    if (it.has_query)
      line["query"] = {{"first", it.pair_first},   {"second", it.pair_second}, {"fallback", it.pair_fallback},
                       {"label", it.label},        {"was_error", it.was_error}, {"true_gap", it.true_gap}};
    else
      line["query"] = nullptr;
    line["best_utility"] = it.best_utility;
    line["raw_regret"] = it.raw_regret;
    line["regret"] = it.regret;
    if (include_timings)
      line["timings"] = {{"gp_fit", it.timings.gp_fit},
                         {"utility_train", it.timings.utility_train},
                         {"acquisition", it.timings.acquisition},
                         {"evaluation", it.timings.evaluation},
                         {"pair_selection", it.timings.pair_selection}};
    out << line.dump() << '\n';
  }

  const json summary = {{"type", "summary"},
                        {"iterations", r.iterations.size()},
                        {"cumulative_errors", r.cumulative_errors},
                        {"termination", r.termination},
                        {"gp_summary", r.gp_summary},
                        {"ensemble_hash", r.ensemble_hash}};
  out << summary.dump() << '\n';
  return out.str();
}

RunRecord record_from_jsonl(std::string_view text) {
  RunRecord r;
  bool saw_header = false;
  bool saw_summary = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("schema").get<std::string>() != kRunSchema)
          throw InputError("unsupported schema '" + j.at("schema").get<std::string>() + "'");
        r.problem = j.at("problem").get<std::string>();
        r.utility = j.at("utility").get<std::string>();
        r.utility_hash = j.at("utility_hash").get<std::string>();
        r.algorithm = j.at("algorithm").get<std::string>();
        r.condition = j.at("condition").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.simulated = j.at("simulated").get<bool>();
        r.reference_optimum = j.at("reference_optimum").get<double>();
        r.regret_floor = j.at("regret_floor").get<double>();
        r.init_designs = matrix_from(j.at("init_designs"));
        r.init_outputs = matrix_from(j.at("init_outputs"));
        r.initial_regret = j.at("initial_regret").get<double>();
        for (const auto& c : j.at("init_comparisons"))
          r.init_comparisons.push_back({c.at("first").get<int>(), c.at("second").get<int>(),
                                        c.at("label").get<int>(), c.at("was_error").get<bool>()});
        saw_header = true;
      } else if (type == "iteration") {
        if (!saw_header) throw InputError("iteration before header");
        IterationRecord it;
        it.iteration = j.at("iteration").get<int>();
        it.x = vector_from(j.at("x"));
        it.y = vector_from(j.at("y"));
        it.acquisition_value = j.at("acquisition_value").get<double>();
        const auto& q = j.at("query");
        if (!q.is_null()) {
          it.has_query = true;
          it.pair_first = q.at("first").get<int>();
          it.pair_second = q.at("second").get<int>();
          it.pair_fallback = q.at("fallback").get<bool>();
          it.label = q.at("label").get<int>();
          it.was_error = q.at("was_error").get<bool>();
          it.true_gap = q.at("true_gap").get<double>();
        }
        it.best_utility = j.at("best_utility").get<double>();
        it.raw_regret = j.at("raw_regret").get<double>();
        it.regret = j.at("regret").get<double>();
        if (j.contains("timings")) {
          const auto& t = j.at("timings");
          it.timings = {t.at("gp_fit").get<double>(), t.at("utility_train").get<double>(),
                        t.at("acquisition").get<double>(), t.at("evaluation").get<double>(),
                        t.at("pair_selection").get<double>()};
        }
        r.iterations.push_back(std::move(it));
      } else if (type == "summary") {
        r.cumulative_errors = j.at("cumulative_errors").get<int>();
        r.termination = j.at("termination").get<std::string>();
        r.gp_summary = j.at("gp_summary").get<std::string>();
        r.ensemble_hash = j.at("ensemble_hash").get<std::string>();
        if (j.at("iterations").get<std::size_t>() != r.iterations.size())
          throw InputError("summary iteration count does not match the iteration lines");
        saw_summary = true;
      } else {
        throw InputError("unknown line type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("run record line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!saw_header || !saw_summary) throw InputError("run record needs a header and a summary line");
  return r;
}

void save_record(const std::filesystem::path& path, const RunRecord& record) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << record_to_jsonl(record);
}

RunRecord load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return record_from_jsonl(ss.str());
}

}  // namespace bope
