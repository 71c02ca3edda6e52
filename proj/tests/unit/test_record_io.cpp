#include <doctest.h>

#include <filesystem>

#include "bope/errors.hpp"
#include "bope/record_io.hpp"

using namespace bope;

namespace {

RunRecord sample_record() {
  RunRecord r;
  r.problem = "DTLZ2";
  r.utility = "Linear";
  r.utility_hash = "abc";
  r.algorithm = "BopeMonne";
  r.condition = "ieubo";
  r.seed = 18446744073709551615ULL;
  r.reference_optimum = 11.073617271676;
  r.init_designs = Eigen::MatrixXd::Random(3, 4);
  r.init_outputs = Eigen::MatrixXd::Random(2, 4);
  r.init_comparisons = {{0, 1, 1, false}, {2, 3, -1, true}};
  r.initial_regret = 0.1 + 0.2;
  for (int t = 1; t <= 2; ++t) {
    IterationRecord it;
    it.iteration = t;
    it.x = Eigen::Vector3d(1.0 / 3.0, 0.1 * t, 1e-300);
    it.y = Eigen::Vector2d(std::nextafter(1.0, 2.0), -0.0);
    it.acquisition_value = 1.0 / 7.0;
    it.has_query = t == 1;
    it.pair_first = 0;
    it.pair_second = 4;
    it.label = -1;
    it.was_error = true;
    it.true_gap = 0.25;
    it.best_utility = 10.5;
    it.raw_regret = 0.57;
    it.regret = 0.57;
    it.timings.acquisition = 1.25;
    r.iterations.push_back(it);
  }
  r.cumulative_errors = 1;
  r.termination = "budget";
  r.gp_summary = "ls=[0.5]";
  r.ensemble_hash = "ff";
  return r;
}

}  // namespace

TEST_CASE("records round trip bit for bit") {
  const RunRecord r = sample_record();
  const std::string text = record_to_jsonl(r);
  const auto back = record_from_jsonl(text);
  CHECK(record_to_jsonl(back) == text);
  CHECK(back.seed == r.seed);
  CHECK(back.init_designs == r.init_designs);
  CHECK(back.iterations[0].x == r.iterations[0].x);
  CHECK(back.iterations[0].y(0) == std::nextafter(1.0, 2.0));
  CHECK(back.iterations[0].has_query);
  CHECK_FALSE(back.iterations[1].has_query);
  CHECK(back.iterations[0].timings.acquisition == 1.25);
  CHECK(back.init_comparisons.size() == 2);
  CHECK(back.init_comparisons[1].was_error);
}

TEST_CASE("timings can be left out") {
  const auto text = record_to_jsonl(sample_record(), false);
  CHECK(text.find("timings") == std::string::npos);
  CHECK(record_from_jsonl(text).iterations[0].timings.acquisition == 0.0);
}

TEST_CASE("files round trip") {
  const auto path = std::filesystem::temp_directory_path() / "bope_test_record" / "r.jsonl";
  const RunRecord r = sample_record();
  save_record(path, r);
  CHECK(record_to_jsonl(load_record(path)) == record_to_jsonl(r));
  std::filesystem::remove_all(path.parent_path());
  CHECK_THROWS_AS(load_record(path), InputError);
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(record_from_jsonl(""), InputError);
  CHECK_THROWS_AS(record_from_jsonl("{not json"), InputError);
  auto text = record_to_jsonl(sample_record());
  CHECK_THROWS_AS(record_from_jsonl(text.substr(0, text.rfind("{\"type\":\"summary\""))), InputError);
  auto wrong = text;
  wrong.replace(wrong.find(kRunSchema), std::string(kRunSchema).size(), "bope.run/9");
  CHECK_THROWS_AS(record_from_jsonl(wrong), InputError);
}
