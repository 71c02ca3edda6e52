#include <doctest.h>

#include <cmath>
#include <set>

#include "bope/errors.hpp"
#include "bope/loop.hpp"
#include "bope/record_io.hpp"

using namespace bope;

namespace {

// Small settings that keep a run to a second or two.
RunConfig quick_config(Algorithm algorithm = Algorithm::BopeMonne) {
  RunConfig cfg;
  cfg.problem = "DTLZ2";
  cfg.iterations = 3;
  cfg.algorithm = algorithm;
  cfg.seed = 11;
  cfg.ensemble.ensemble_size = 3;
  cfg.ensemble.train.epochs = 300;
  cfg.ensemble.train.cosine_period = 300;
  cfg.acquisition.posterior_samples = 8;
  cfg.acquisition.raw_samples = 32;
  cfg.acquisition.restarts = 2;
  cfg.acquisition.refine_iterations = 5;
  cfg.gp.restarts = 2;
  cfg.gp.max_iterations = 50;
  cfg.reference_optimum = 1.5 * std::hypot(3.5, 6.5);
  return cfg;
}

BeliefModel exact_model(const UtilityFunction& g, double sign = 1.0, double variance = 0.0) {
  return [&g, sign, variance](const OutputVector& y) { return GaussianBelief{sign * g.evaluate(y), variance}; };
}

OutputPairs sample_pairs(int count) {
  const auto data = initial_observations(make_problem("DTLZ2"), 32, 1);
  OutputPairs pairs;
  for (const auto& [a, b] : random_pairs(data.outputs(), count, 2)) pairs.emplace_back(data.output(a), data.output(b));
  return pairs;
}

}  // namespace

TEST_CASE("initial sizes follow the dimension rule") {
  RunConfig cfg;
  CHECK(cfg.resolved_init_observations(make_problem("DTLZ2").dim()) == 16);
  CHECK(cfg.resolved_init_comparisons(make_problem("DTLZ2").dim()) == 10);
  CHECK(cfg.resolved_init_observations(make_problem("ZDT1").dim()) == 32);
  CHECK(cfg.resolved_init_comparisons(make_problem("ZDT1").dim()) == 20);
  cfg.init_observations = 7;
  CHECK(cfg.resolved_init_observations(3) == 7);
}

TEST_CASE("initial designs are reproducible and in the box") {
  const auto p = make_problem("ZDT1");
  const auto a = initial_observations(p, 32, 4), b = initial_observations(p, 32, 4);
  CHECK(a.designs() == b.designs());
  CHECK(a.outputs() == b.outputs());
  for (int i = 0; i < a.size(); ++i) CHECK(p.bounds().contains(a.design(i)));
}

TEST_CASE("random pairs are distinct, valid and exhaustive when asked") {
  const auto data = initial_observations(make_problem("DTLZ2"), 6, 1);
  const auto pairs = random_pairs(data.outputs(), 15, 3);
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : pairs) {
    CHECK(a != b);
    seen.insert({std::min(a, b), std::max(a, b)});
  }
  CHECK(seen.size() == 15);
  CHECK(random_pairs(data.outputs(), 5, 3) == random_pairs(data.outputs(), 5, 3));
  CHECK_THROWS_AS(random_pairs(data.outputs(), 16, 3), ConfigError);
}

TEST_CASE("simple regret") {
  const auto p = make_problem("DTLZ2");
  const auto g = make_utility("Linear");
  auto data = initial_observations(p, 4, 1);
  const double opt = estimate_reference_optimum(p, g, 1 << 12).value;
  const double before = simple_regret(opt, data, g);
  CHECK(before > 0.0);
  const auto best = estimate_reference_optimum(p, g, 1 << 12);
  data.add(best.argmax, p.evaluate(best.argmax));
  CHECK(simple_regret(opt, data, g) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(simple_regret(opt, data, g) <= before);
}

TEST_CASE("zero iterations records only the initial regret") {
  auto cfg = quick_config();
  cfg.iterations = 0;
  const auto r = run(cfg);
  CHECK(r.iterations.empty());
  CHECK(r.regret_curve().size() == 1);
  CHECK(r.init_designs.cols() == 16);
  CHECK(r.init_comparisons.size() == 10);
  CHECK(r.termination == "budget");
}

TEST_CASE("BOPE run invariants and determinism") {
  const auto cfg = quick_config();
  const auto a = run(cfg);
  REQUIRE(a.termination == "budget");
  REQUIRE(a.iterations.size() == 3);
  const auto curve = a.regret_curve();
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
  int errors = 0;
  for (const auto& it : a.iterations) {
    CHECK(it.has_query);
    CHECK(it.was_error == is_preference_error(it.label, it.true_gap));
    errors += it.was_error;
    CHECK(it.regret >= cfg.regret_floor);
    CHECK(it.acquisition_value >= 0.0);
  }
  CHECK(a.cumulative_errors == errors);

  const auto b = run(cfg);
  CHECK(record_to_jsonl(a, false) == record_to_jsonl(b, false));

  auto other = cfg;
  other.seed = 12;
  CHECK(record_to_jsonl(run(other), false) != record_to_jsonl(a, false));
}

TEST_CASE("baselines ask no questions") {
  for (auto alg : {Algorithm::Random, Algorithm::KnownUtility}) {
    const auto r = run(quick_config(alg));
    CHECK(r.init_comparisons.empty());
    CHECK(r.iterations.size() == 3);
    for (const auto& it : r.iterations) CHECK_FALSE(it.has_query);
    CHECK(r.cumulative_errors == 0);
  }
}

TEST_CASE("reaching the floor stops the run") {
  auto cfg = quick_config();
  cfg.reference_optimum = -100.0;
  const auto r = run(cfg);
  CHECK(r.termination == "regret_floor");
  CHECK(r.iterations.empty());
  CHECK(r.initial_regret == cfg.regret_floor);
}

TEST_CASE("configuration problems surface as configuration errors") {
  auto cfg = quick_config();
  cfg.dm.model = DmModel::LiveHuman;
  CHECK_THROWS_AS(run(cfg), ConfigError);
  cfg = quick_config();
  cfg.utility = "KumaraswamyCDF";
  CHECK_THROWS_AS(run(cfg), ConfigError);
  cfg = quick_config();
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("model quality metrics on exact models") {
  const auto g = make_utility("Linear");
  const auto pairs = sample_pairs(50);
  Rng rng(1);
  CHECK(uncertainty_quality(exact_model(g), g, pairs, {DmModel::Noiseless}, rng) == 1.0);
  const BeliefModel flat = [](const OutputVector&) { return GaussianBelief{0.0, 1.0}; };
  CHECK(uncertainty_quality(flat, g, pairs, {DmModel::Gaussian, 0.1}, rng) == doctest::Approx(0.5));
  CHECK(pairwise_accuracy(exact_model(g), g, pairs) == 1.0);
  CHECK(pairwise_accuracy(exact_model(g, -1.0), g, pairs) == 0.0);
  CHECK(model_preference_probability({1.0, 0.0}, {0.0, 0.0}) == 1.0);
  CHECK(model_preference_probability({0.0, 0.0}, {0.0, 0.0}) == 0.5);
  CHECK(model_preference_probability({1.0, 0.5}, {0.0, 0.5}) == doctest::Approx(normal_cdf(1.0)));
}
