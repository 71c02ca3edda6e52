#include "bope/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "bope/errors.hpp"
#include "bope/random.hpp"

namespace bope {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string describe_gp(const GpSurrogate& gp) {
  std::string out;
  char buf[64];
  for (int o = 0; o < gp.num_outputs(); ++o) {
    const auto& h = gp.hyperparams(o);
    out += o == 0 ? "" : "; ";
    out += "out" + std::to_string(o) + " ls=[";
    for (Eigen::Index i = 0; i < h.lengthscales.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.4g", i == 0 ? "" : ",", h.lengthscales(i));
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "] sf2=%.4g sn2=%.4g", h.signal_variance, h.noise_variance);
    out += buf;
  }
  return out;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::BopeMonne: return "BopeMonne";
    case Algorithm::Random: return "Random";
    case Algorithm::KnownUtility: return "KnownUtility";
  }
  return "BopeMonne";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "BopeMonne") return Algorithm::BopeMonne;
  if (name == "Random") return Algorithm::Random;
  if (name == "KnownUtility") return Algorithm::KnownUtility;
  throw InputError("unknown algorithm '" + std::string(name) + "'");
}

int RunConfig::resolved_init_observations(int dim) const {
  return init_observations > 0 ? init_observations : (dim < 5 ? 16 : 32);
}

int RunConfig::resolved_init_comparisons(int dim) const {
  return init_comparisons > 0 ? init_comparisons : (dim < 5 ? 10 : 20);
}

std::string RunConfig::utility_name() const { return utility.empty() ? default_utility_for(problem) : utility; }

void RunConfig::validate() const {
  const auto names = problem_names();
  if (std::find(names.begin(), names.end(), problem) == names.end())
    throw ConfigError("problem", "unknown problem '" + problem + "'");
  const auto unames = utility_names();
  if (std::find(unames.begin(), unames.end(), utility_name()) == unames.end())
    throw ConfigError("utility", "unknown utility '" + utility_name() + "'");
  if (iterations < 0) throw ConfigError("iterations", "must be non-negative");
  if (init_observations < 0) throw ConfigError("init_observations", "must be non-negative");
  if (init_comparisons < 0) throw ConfigError("init_comparisons", "must be non-negative");
  if (!(regret_floor >= 0.0)) throw ConfigError("regret_floor", "must be non-negative");
  if (ensemble.ensemble_size < 1) throw ConfigError("ensemble.size", "must be at least 1");
  if (ensemble.architecture.hidden.empty()) throw ConfigError("ensemble.hidden", "needs at least one layer");
  for (int h : ensemble.architecture.hidden)
    if (h < 1) throw ConfigError("ensemble.hidden", "layer widths must be positive");
  if (ensemble.train.epochs < 1) throw ConfigError("ensemble.epochs", "must be at least 1");
  if (!(ensemble.train.learning_rate > 0.0)) throw ConfigError("ensemble.learning_rate", "must be positive");
  if (gp.restarts < 1) throw ConfigError("gp.restarts", "must be at least 1");
  try {
    dm.validate();
  } catch (const InputError& e) {
    throw ConfigError("dm", e.what());
  }
  try {
    acquisition.validate();
  } catch (const InputError& e) {
    throw ConfigError("acquisition", e.what());
  }
}

std::vector<double> RunRecord::regret_curve() const {
  std::vector<double> curve{initial_regret};
  for (const auto& it : iterations) curve.push_back(it.regret);
  return curve;
}

ObservationSet initial_observations(const OutputProblem& problem, int count, std::uint64_t seed) {
  const Box& box = problem.bounds();
  SobolSampler sobol(static_cast<unsigned>(problem.dim()), seed);
  const Eigen::MatrixXd designs = scale_to_box(sobol.draw(count), box.lower, box.upper);
  ObservationSet data(problem.dim(), problem.num_outputs());
  for (int i = 0; i < count; ++i) data.add(designs.col(i), problem.evaluate(designs.col(i)));
  return data;
}

std::vector<std::pair<int, int>> random_pairs(const Eigen::MatrixXd& outputs, int count, std::uint64_t seed) {
  const int n = static_cast<int>(outputs.cols());
  std::vector<std::pair<int, int>> candidates;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (outputs.col(i) != outputs.col(j)) candidates.emplace_back(i, j);
  if (count > static_cast<int>(candidates.size()))
    throw ConfigError("init_comparisons", std::to_string(count) + " comparisons requested but only " +
                                              std::to_string(candidates.size()) + " distinct pairs exist");
  // Partial Fisher-Yates with an explicit index draw keeps the result
  // independent of the standard library's shuffle implementation.
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const auto span = static_cast<std::uint64_t>(candidates.size() - static_cast<std::size_t>(i));
    const auto pick = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng() % span);
    std::swap(candidates[static_cast<std::size_t>(i)], candidates[pick]);
  }
  candidates.resize(static_cast<std::size_t>(count));
  return candidates;
}

double simple_regret(double optimum, const ObservationSet& data, const UtilityFunction& utility) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < data.size(); ++i) best = std::max(best, utility.evaluate(data.output(i)));
  return std::max(0.0, optimum - best);
}

MonotonicEnsemble train_utility(const ComparisonSet& comparisons, const RunConfig& cfg, std::uint64_t seed) {
  return MonotonicEnsemble::train(comparisons, cfg.ensemble, seed);
}

ExperimentOutcome experiment(const RunConfig& cfg, const OutputProblem& problem, const UtilityFunction* known,
                             const ObservationSet& data, const ComparisonSet& comparisons, int iteration) {
  ExperimentOutcome out;
  const auto t = static_cast<std::uint64_t>(iteration);
  if (cfg.algorithm == Algorithm::Random) {
    const auto start = Clock::now();
    SobolSampler sobol(static_cast<unsigned>(problem.dim()), derive_seed(cfg.seed, "random-designs"));
    const Eigen::MatrixXd unit = sobol.draw(iteration);
    out.x = scale_to_box(unit.col(iteration - 1), problem.bounds().lower, problem.bounds().upper);
    out.timings.acquisition = seconds_since(start);
    return out;
  }

  auto start = Clock::now();
  const GpSurrogate gp = GpSurrogate::fit(data, problem.bounds(), derive_seed(cfg.seed, "gp", t), cfg.gp);
  out.timings.gp_fit = seconds_since(start);
  out.gp_summary = describe_gp(gp);

  std::unique_ptr<UtilitySamples> samples;
  if (cfg.algorithm == Algorithm::KnownUtility) {
    if (known == nullptr) throw StateError("KnownUtility needs the true utility");
    samples = std::make_unique<FunctionUtilitySamples>(
        std::vector<FunctionUtilitySamples::Function>{[known](const OutputVector& y) { return known->evaluate(y); }});
  } else {
    start = Clock::now();
    out.ensemble = train_utility(comparisons, cfg, derive_seed(cfg.seed, "ensemble", t));
    out.timings.utility_train = seconds_since(start);
    samples = std::make_unique<EnsembleUtilitySamples>(*out.ensemble);
  }

  start = Clock::now();
  const auto opt = optimize_qneiuu(gp, *samples, data, problem.bounds(), cfg.acquisition,
                                   derive_seed(cfg.seed, "acquisition", t));
  out.timings.acquisition = seconds_since(start);
  out.x = opt.x;
  out.acquisition_value = opt.value;
  return out;
}

RunRecord run(const RunConfig& cfg) {
  cfg.validate();
  const OutputProblem problem = make_problem(cfg.problem);
  const UtilityFunction utility = make_utility(cfg.utility_name(), cfg.utility_params);
  if (utility.num_outputs() != 0 && utility.num_outputs() != problem.num_outputs())
    throw ConfigError("utility", "expects " + std::to_string(utility.num_outputs()) + " outputs but " +
                                     problem.name() + " has " + std::to_string(problem.num_outputs()));
  if (cfg.dm.model == DmModel::LiveHuman) throw ConfigError("dm.model", "a simulated run needs a simulated DM");

  RunRecord rec;
  rec.problem = problem.name();
  rec.utility = utility.name();
  rec.utility_hash = utility.params_hash();
  rec.algorithm = to_string(cfg.algorithm);
  rec.seed = cfg.seed;
  rec.regret_floor = cfg.regret_floor;
  rec.reference_optimum = cfg.reference_optimum ? *cfg.reference_optimum
                                                : shared_reference_cache().get(problem, utility);

  const int n0 = cfg.resolved_init_observations(problem.dim());
  const int m0 = cfg.resolved_init_comparisons(problem.dim());
  ObservationSet data = initial_observations(problem, n0, derive_seed(cfg.seed, "init-designs"));
  rec.init_designs = data.designs();
  rec.init_outputs = data.outputs();

  Rng dm_rng(derive_seed(cfg.seed, "dm"));
  ComparisonSet comparisons(problem.num_outputs());
  const bool asks = cfg.algorithm == Algorithm::BopeMonne;
  if (asks) {
    for (const auto& [i, j] : random_pairs(data.outputs(), m0, derive_seed(cfg.seed, "init-pairs"))) {
      const auto r = respond(utility.evaluate(data.output(i)), utility.evaluate(data.output(j)), cfg.dm, dm_rng);
      comparisons.add(data.output(i), data.output(j), r.label);
      rec.init_comparisons.push_back({i, j, r.label, r.was_error});
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < data.size(); ++i) best = std::max(best, utility.evaluate(data.output(i)));
  const auto floored = [&](double raw) {
    const double r = std::max(0.0, raw);
    return r < cfg.regret_floor ? cfg.regret_floor : r;
  };
  const double raw0 = rec.reference_optimum - best;
  rec.initial_regret = floored(raw0);
  rec.termination = "budget";
  if (cfg.early_stop && std::max(0.0, raw0) < cfg.regret_floor) {
    rec.termination = "regret_floor";
    return rec;
  }

  for (int t = 1; t <= cfg.iterations; ++t) {
    IterationRecord it;
    it.iteration = t;
    try {
      ExperimentOutcome exp = experiment(cfg, problem, &utility, data, comparisons, t);
      it.x = exp.x;
      it.acquisition_value = exp.acquisition_value;
      it.timings = exp.timings;
      if (!exp.gp_summary.empty()) rec.gp_summary = exp.gp_summary;
      if (exp.ensemble) rec.ensemble_hash = exp.ensemble->config_hash();

      const auto start = Clock::now();
      it.y = problem.evaluate(it.x);
      // A repeated design adds no information; the set keeps one copy.
      if (!data.contains(it.x)) data.add(it.x, it.y);
      it.timings.evaluation = seconds_since(start);

      if (asks) {
        const auto sel_start = Clock::now();
        const auto sel = select_pair(data.outputs(), *exp.ensemble, comparisons, cfg.acquisition);
        it.timings.pair_selection = seconds_since(sel_start);
        const OutputVector a = data.output(sel.first);
        const OutputVector b = data.output(sel.second);
        const auto r = respond(utility.evaluate(a), utility.evaluate(b), cfg.dm, dm_rng);
        comparisons.add(a, b, r.label);
        it.has_query = true;
        it.pair_first = sel.first;
        it.pair_second = sel.second;
        it.pair_fallback = sel.fallback;
        it.label = r.label;
        it.was_error = r.was_error;
        it.true_gap = r.gap;
        if (r.was_error) ++rec.cumulative_errors;
      }
    } catch (const std::exception& e) {
      rec.termination = std::string("error: ") + e.what();
      return rec;
    }

    best = std::max(best, utility.evaluate(it.y));
    it.best_utility = best;
    it.raw_regret = rec.reference_optimum - best;
    it.regret = floored(it.raw_regret);
    rec.iterations.push_back(std::move(it));
    if (cfg.early_stop && std::max(0.0, rec.iterations.back().raw_regret) < cfg.regret_floor) {
      rec.termination = "regret_floor";
      break;
    }
  }
  return rec;
}

double model_preference_probability(const GaussianBelief& a, const GaussianBelief& b) {
  const double gap = a.mean - b.mean;
  const double scale = std::sqrt(a.variance + b.variance);
  if (!(scale > 0.0)) return gap > 0.0 ? 1.0 : (gap < 0.0 ? 0.0 : 0.5);
  return normal_cdf(gap / scale);
}

double uncertainty_quality(const BeliefModel& model, const UtilityFunction& truth, const OutputPairs& pairs,
                           const DmConfig& dm, Rng& rng) {
  if (pairs.empty()) throw InputError("uncertainty_quality needs at least one pair");
  double total = 0.0;
  for (const auto& [a, b] : pairs) {
    const double p = model_preference_probability(model(a), model(b));
    const auto r = respond(truth.evaluate(a), truth.evaluate(b), dm, rng);
    total += r.label > 0 ? p : 1.0 - p;
  }
  return total / static_cast<double>(pairs.size());
}

double pairwise_accuracy(const BeliefModel& model, const UtilityFunction& truth, const OutputPairs& pairs) {
  if (pairs.empty()) throw InputError("pairwise_accuracy needs at least one pair");
  const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  int correct = 0;
  for (const auto& [a, b] : pairs) {
    const int predicted = sign(model(a).mean - model(b).mean);
    const int actual = sign(truth.evaluate(a) - truth.evaluate(b));
    correct += predicted == actual ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

ModelQuality model_quality_protocol(const RunConfig& cfg, int trials, std::uint64_t seed) {
  const OutputProblem problem = make_problem(cfg.problem);
  const UtilityFunction utility = make_utility(cfg.utility_name(), cfg.utility_params);
  const int pool_size = problem.dim() < 5 ? 160 : 320;
  const ObservationSet pool = initial_observations(problem, pool_size, derive_seed(seed, "pool"));

  Rng dm_rng(derive_seed(seed, "dm"));
  ComparisonSet train(problem.num_outputs());
  const int m = cfg.resolved_init_comparisons(problem.dim());
  for (const auto& [i, j] : random_pairs(pool.outputs(), m, derive_seed(seed, "train-pairs"))) {
    const auto r = respond(utility.evaluate(pool.output(i)), utility.evaluate(pool.output(j)), cfg.dm, dm_rng);
    train.add(pool.output(i), pool.output(j), r.label);
  }
  const MonotonicEnsemble ensemble = train_utility(train, cfg, derive_seed(seed, "ensemble"));

  OutputPairs test;
  for (const auto& [i, j] : random_pairs(pool.outputs(), trials, derive_seed(seed, "test-pairs")))
    test.emplace_back(pool.output(i), pool.output(j));
  const BeliefModel belief = [&](const OutputVector& y) { return ensemble.predict_belief(y); };
  ModelQuality q;
  q.uncertainty_quality = uncertainty_quality(belief, utility, test, cfg.dm, dm_rng);
  q.accuracy = pairwise_accuracy(belief, utility, test);
  return q;
}

}  // namespace bope
