#include <doctest.h>

#include "bope/config.hpp"
#include "bope/errors.hpp"

using namespace bope;

namespace {

int error_line(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string error_field(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults carry the published hyperparameters") {
  const auto cfg = parse_run_config("");
  CHECK(cfg.problem == "DTLZ2");
  CHECK(cfg.ensemble.ensemble_size == 8);
  CHECK(cfg.ensemble.architecture.hidden == std::vector<int>{100, 10});
  CHECK(cfg.ensemble.train.epochs == 1600);
  CHECK(cfg.ensemble.train.learning_rate == 0.01);
  CHECK(cfg.ensemble.train.learning_rate_min == 1e-4);
  CHECK(cfg.acquisition.raw_samples == 256);
  CHECK(cfg.acquisition.restarts == 12);
  CHECK(cfg.acquisition.posterior_samples == 32);
  CHECK(cfg.dm.model == DmModel::Gaussian);
  CHECK(cfg.dm.sigma == 0.1);
  CHECK(cfg.regret_floor == 1e-5);
}

TEST_CASE("nested keys are read") {
  const auto cfg = parse_run_config(R"(
problem: ZDT1
utility: LinearExponential
utility_params: {scale: [3.0]}
iterations: 7
seed: 99
algorithm: Random
dm: {model: BradleyTerry, beta: 1.8}
ensemble:
  size: 2
  hidden: [20]
  activation: leaky_relu
  monotonic: false
acquisition: {pair_selection: EUBO, exclude_asked_pairs: false}
gp: {restarts: 3}
reference_optimum: 12.5
)");
  CHECK(cfg.problem == "ZDT1");
  CHECK(cfg.utility_params.at("scale") == std::vector<double>{3.0});
  CHECK(cfg.iterations == 7);
  CHECK(cfg.seed == 99);
  CHECK(cfg.algorithm == Algorithm::Random);
  CHECK(cfg.dm.model == DmModel::BradleyTerry);
  CHECK(cfg.dm.beta == 1.8);
  CHECK(cfg.ensemble.ensemble_size == 2);
  CHECK(cfg.ensemble.architecture.hidden == std::vector<int>{20});
  CHECK(cfg.ensemble.architecture.activation == Activation::LeakyRelu);
  CHECK_FALSE(cfg.ensemble.architecture.monotonic);
  CHECK(cfg.acquisition.pair_selection == PairCriterion::EUBO);
  CHECK_FALSE(cfg.acquisition.exclude_asked_pairs);
  CHECK(cfg.gp.restarts == 3);
  CHECK(cfg.reference_optimum == 12.5);
}

TEST_CASE("JSON input is accepted") {
  const auto cfg = parse_run_config(R"({"problem": "VLMOP3", "dm": {"sigma": 0.5}})");
  CHECK(cfg.problem == "VLMOP3");
  CHECK(cfg.dm.sigma == 0.5);
}

TEST_CASE("errors name the field and the line") {
  CHECK(error_field("problem: Nope\n") == "problem");
  CHECK(error_line("iterations: 3\nproblem: Nope\n") == 2);
  CHECK(error_line("iterations: 3\n\nbogus: 1\n") == 3);
  CHECK(error_field("dm:\n  sigma: abc\n") == "dm.sigma");
  CHECK(error_line("dm:\n  sigma: abc\n") == 2);
  CHECK(error_line("ensemble:\n  size: 0\n") > 0);
  CHECK(error_field("acquisition: {restarts: 999}") == "acquisition");
  CHECK(error_line("a: [unterminated\n") > 0);
  try {
    parse_run_config("seed: 1\nproblem: Nope\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2: problem") == 0);
  }
}

TEST_CASE("dotted overrides") {
  RunConfig cfg;
  apply_override(cfg, "dm.sigma=0.5");
  apply_override(cfg, "iterations=4");
  apply_override(cfg, "ensemble.hidden=[5, 3]");
  CHECK(cfg.dm.sigma == 0.5);
  CHECK(cfg.iterations == 4);
  CHECK(cfg.ensemble.architecture.hidden == std::vector<int>{5, 3});
  CHECK_THROWS_AS(apply_override(cfg, "nonsense"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "dm.nope=1"), ConfigError);
}

TEST_CASE("canonical JSON round trip") {
  auto cfg = parse_run_config("problem: OSY\nseed: 4\ndm: {model: Noiseless}\nensemble: {size: 3}\n");
  const auto back = parse_run_config(run_config_to_json(cfg));
  CHECK(run_config_to_json(back) == run_config_to_json(cfg));
  CHECK(back.problem == "OSY");
  CHECK(back.ensemble.ensemble_size == 3);
}

TEST_CASE("bench matrix expansion") {
  const auto m = parse_bench_matrix(R"(
iterations: 5
problems: [DTLZ2, ZDT1]
algorithms: [BopeMonne, Random]
seeds: 3
)");
  const auto cells = m.cells();
  CHECK(cells.size() == 12);
  CHECK(cells.front().config.iterations == 5);
  CHECK(cells.front().condition == "default");
  for (const auto& c : cells) {
    CHECK(c.config.problem == c.problem);
    CHECK(c.config.seed == c.seed);
  }

  const auto cond = parse_bench_matrix(R"(
problems: [DTLZ2]
algorithms: [BopeMonne]
seeds: [4, 5]
conditions:
  ieubo: {acquisition: {pair_selection: IEUBO}}
  eubo: {acquisition: {pair_selection: EUBO}}
)");
  const auto cc = cond.cells();
  CHECK(cc.size() == 4);
  int eubo = 0;
  for (const auto& c : cc) eubo += c.config.acquisition.pair_selection == PairCriterion::EUBO;
  CHECK(eubo == 2);

  CHECK_THROWS_AS(parse_bench_matrix("problems: []\nalgorithms: [Random]\nseeds: 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_bench_matrix("problems: [DTLZ2]\nalgorithms: [Random]\nseeds: 0\n"), ConfigError);
}
