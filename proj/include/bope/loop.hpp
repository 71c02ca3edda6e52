#ifndef BOPE_LOOP_HPP
#define BOPE_LOOP_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bope/acquisition.hpp"
#include "bope/dm.hpp"
#include "bope/gp.hpp"
#include "bope/monne.hpp"
#include "bope/problems.hpp"

namespace bope {

enum class Algorithm { BopeMonne, Random, KnownUtility };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

struct RunConfig {
  std::string problem = "DTLZ2";
  std::string utility;  // empty: the problem's default utility
  UtilityParams utility_params;
  int iterations = 20;
  int init_observations = 0;  // 0: 16 if d < 5, else 32
  int init_comparisons = 0;   // 0: 10 if d < 5, else 20
  DmConfig dm;
  Algorithm algorithm = Algorithm::BopeMonne;
  MonotonicEnsemble::Options ensemble;
  AcquisitionConfig acquisition;
  GpFitOptions gp;
  std::uint64_t seed = 0;
  double regret_floor = 1e-5;
  bool early_stop = true;
  std::optional<double> reference_optimum;  // skips the oracle when set

  /// Throws ConfigError naming the offending field.
  void validate() const;

  int resolved_init_observations(int dim) const;
  int resolved_init_comparisons(int dim) const;
  std::string utility_name() const;
};

struct StageTimings {
  double gp_fit = 0.0;
  double utility_train = 0.0;
  double acquisition = 0.0;
  double evaluation = 0.0;
  double pair_selection = 0.0;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  DesignPoint x;
  OutputVector y;
  double acquisition_value = 0.0;
  bool has_query = false;
  int pair_first = -1;  // columns of the observation set at query time
  int pair_second = -1;
  bool pair_fallback = false;
  int label = 0;
  bool was_error = false;
  double true_gap = 0.0;
  double best_utility = 0.0;
  double raw_regret = 0.0;
  double regret = 0.0;  // max(raw_regret, 0) lifted to the floor once below it
  StageTimings timings;
};

struct InitialComparison {
  int first = -1;
  int second = -1;
  int label = 0;
  bool was_error = false;
};

/// Full trace of one run. Everything except the timings is a deterministic
/// function of the configuration.
struct RunRecord {
  std::string problem;
  std::string utility;
  std::string utility_hash;
  std::string algorithm;
  std::string condition;  // benchmark condition name, empty for single runs
  std::uint64_t seed = 0;
  bool simulated = true;  // false for live human sessions: no ground truth
  double reference_optimum = 0.0;
  double regret_floor = 1e-5;
  Eigen::MatrixXd init_designs;  // dim × n0
  Eigen::MatrixXd init_outputs;  // k × n0
  std::vector<InitialComparison> init_comparisons;
  double initial_regret = 0.0;
  std::vector<IterationRecord> iterations;
  int cumulative_errors = 0;  // errors made during iterations, not initialization
  std::string termination;    // "budget", "regret_floor" or "error: ..."
  std::string gp_summary;
  std::string ensemble_hash;

  /// Regret after initialization followed by one entry per iteration.
  std::vector<double> regret_curve() const;
};

/// Scrambled Sobol designs over the box, evaluated through the problem.
ObservationSet initial_observations(const OutputProblem& problem, int count, std::uint64_t seed);

/// `count` distinct unordered pairs of columns with distinct outputs, drawn
/// uniformly without replacement. Throws ConfigError if too few pairs exist.
std::vector<std::pair<int, int>> random_pairs(const Eigen::MatrixXd& outputs, int count, std::uint64_t seed);

/// max(0, optimum − max_i g(y_i)).
double simple_regret(double optimum, const ObservationSet& data, const UtilityFunction& utility);

/// Trains the utility ensemble the configuration asks for.
MonotonicEnsemble train_utility(const ComparisonSet& comparisons, const RunConfig& cfg, std::uint64_t seed);

struct ExperimentOutcome {
  DesignPoint x;
  double acquisition_value = 0.0;
  std::optional<MonotonicEnsemble> ensemble;  // BopeMonne only
  std::string gp_summary;
  StageTimings timings;
};

/// One Experimentation stage: fit the output GP, train the utility model (or
/// use `known` for KnownUtility), and maximize qNEIUU. Random draws the next
/// unused scrambled Sobol point instead.
ExperimentOutcome experiment(const RunConfig& cfg, const OutputProblem& problem, const UtilityFunction* known,
                             const ObservationSet& data, const ComparisonSet& comparisons, int iteration);

/// The full optimization loop with a simulated decision maker. A surrogate failure ends the
/// run early; the partial record is returned with the reason in `termination`.
RunRecord run(const RunConfig& cfg);

/// Per-output belief used by the model-quality metrics.
using BeliefModel = std::function<GaussianBelief(const OutputVector&)>;
using OutputPairs = std::vector<std::pair<OutputVector, OutputVector>>;

/// P(first preferred) under independent Gaussian beliefs:
/// Φ((μ₁ − μ₂)/√(σ₁² + σ₂²)), or 0, ½, 1 by the sign of μ₁ − μ₂ when both
/// variances vanish.
double model_preference_probability(const GaussianBelief& a, const GaussianBelief& b);

/// Mean model probability of the decision maker's realized answer.
double uncertainty_quality(const BeliefModel& model, const UtilityFunction& truth, const OutputPairs& pairs,
                           const DmConfig& dm, Rng& rng);

/// Fraction of pairs where the sign of the mean gap equals the sign of the
/// true gap.
double pairwise_accuracy(const BeliefModel& model, const UtilityFunction& truth, const OutputPairs& pairs);

struct ModelQuality {
  double uncertainty_quality = 0.0;
  double accuracy = 0.0;
};

/// Pinned model-quality protocol: a Sobol pool of 160 (d < 5) or 320 designs,
/// `init_comparisons` noisy random comparisons among pool outputs for
/// training, then `trials` random pool pairs scored.
ModelQuality model_quality_protocol(const RunConfig& cfg, int trials, std::uint64_t seed);

}  // namespace bope

#endif  // BOPE_LOOP_HPP
