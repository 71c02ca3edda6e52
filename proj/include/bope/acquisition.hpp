#ifndef BOPE_ACQUISITION_HPP
#define BOPE_ACQUISITION_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bope/gp.hpp"
#include "bope/monne.hpp"
#include "bope/problems.hpp"

namespace bope {

enum class PairCriterion { IEUBO, EUBO };

std::string to_string(PairCriterion c);
PairCriterion pair_criterion_from_string(std::string_view name);

struct AcquisitionConfig {
  int posterior_samples = 32;
  int raw_samples = 256;
  int restarts = 12;
  int batch_size = 1;
  int refine_iterations = 50;
  PairCriterion pair_selection = PairCriterion::IEUBO;
  bool exclude_asked_pairs = true;

  /// Throws InputError when the invariants do not hold.
  void validate() const;
};

/// M utility draws g^j, each evaluated on a batch of outputs
/// (num_outputs × B → 1 × B).
class UtilitySamples {
 public:
  virtual ~UtilitySamples() = default;
  virtual int size() const = 0;
  virtual Eigen::RowVectorXd evaluate(int j, const Eigen::MatrixXd& outputs) const = 0;
};

/// The normalized members of a trained ensemble.
class EnsembleUtilitySamples final : public UtilitySamples {
 public:
  explicit EnsembleUtilitySamples(const MonotonicEnsemble& ensemble) : ensemble_(&ensemble) {}
  int size() const override { return ensemble_->size(); }
  Eigen::RowVectorXd evaluate(int j, const Eigen::MatrixXd& outputs) const override {
    return ensemble_->normalized_scores(j, outputs);
  }

 private:
  const MonotonicEnsemble* ensemble_;
};

/// Scalar functions of one output vector; used for the exact utility and stubs.
class FunctionUtilitySamples final : public UtilitySamples {
 public:
  using Function = std::function<double(const OutputVector&)>;
  explicit FunctionUtilitySamples(std::vector<Function> functions) : functions_(std::move(functions)) {}
  int size() const override { return static_cast<int>(functions_.size()); }
  Eigen::RowVectorXd evaluate(int j, const Eigen::MatrixXd& outputs) const override;

 private:
  std::vector<Function> functions_;
};

/// Monte Carlo qNEIUU for a single candidate (q = 1):
///   (1/(M·N)) Σ_j Σ_k { g^j(f^k(x)) − max_i g^j(f^k(X_n)) }⁺
/// with joint posterior draws f^k over X_n ∪ {x} from fixed base samples, so
/// repeated evaluations share common random numbers.
class QneiuuEvaluator {
 public:
  QneiuuEvaluator(const GpSurrogate& gp, const UtilitySamples& utility, const ObservationSet& data, int num_samples,
                  std::uint64_t seed);

  double operator()(const DesignPoint& x) const;

  struct Detail {
    Eigen::MatrixXd candidate_outputs;  // num_outputs × N
    Eigen::MatrixXd candidate_utility;  // M × N
    Eigen::MatrixXd incumbent_utility;  // M × N
    double value = 0.0;
  };
  Detail evaluate_detailed(const DesignPoint& x) const;

  const AnchoredPosteriorSampler& sampler() const { return sampler_; }

 private:
  const UtilitySamples* utility_;
  AnchoredPosteriorSampler sampler_;
  Eigen::MatrixXd incumbent_;  // M × N
};

/// One-shot evaluation of qNEIUU at `x`.
double qneiuu(const DesignPoint& x, const GpSurrogate& gp, const UtilitySamples& utility,
              const ObservationSet& data, const AcquisitionConfig& cfg, std::uint64_t seed);

struct AcquisitionOptimum {
  DesignPoint x;
  double value = 0.0;
  double best_raw_value = 0.0;
  bool refinement_failed = false;
  int evaluations = 0;
};

/// Multi-start maximization over a box: scrambled Sobol raw samples, then
/// bounded quasi-Newton refinement (finite-difference gradients) from the
/// best `restarts` of them. Never returns a point worse than the best raw sample.
AcquisitionOptimum maximize_acquisition(const std::function<double(const DesignPoint&)>& acquisition,
                                        const Box& bounds, const AcquisitionConfig& cfg, std::uint64_t seed);

AcquisitionOptimum optimize_qneiuu(const GpSurrogate& gp, const UtilitySamples& utility, const ObservationSet& data,
                                   const Box& bounds, const AcquisitionConfig& cfg, std::uint64_t seed);

/// E[max(X, Y)] for independent X ~ N(m1, s1²), Y ~ N(m2, s2²); s1, s2 are
/// standard deviations. Returns max(m1, m2) when both vanish.
double expected_max_gaussian(double m1, double s1, double m2, double s2);

double ieubo(const OutputVector& y1, const OutputVector& y2, const MonotonicEnsemble& utility);
double eubo_observed(const OutputVector& y1, const OutputVector& y2, const MonotonicEnsemble& utility);

struct PairSelection {
  int first = -1;
  int second = -1;
  double value = 0.0;
  bool fallback = false;  // every pair had been asked; exclusion was dropped
};

/// Relative width within which two criterion values are treated as tied.
inline constexpr double kPairTieTolerance = 1e-12;

/// Exhaustive argmax of the configured criterion over unordered pairs of
/// distinct observed outputs (columns of `outputs`). Ties, up to
/// kPairTieTolerance, go to the lexicographically smallest (i, j). Pairs whose outputs both match an
/// already-compared pair are skipped when exclusion is on.
PairSelection select_pair(const Eigen::MatrixXd& outputs, const MonotonicEnsemble& utility,
                          const ComparisonSet& history, const AcquisitionConfig& cfg);

/// Criterion value of pair (i, j) from precomputed ensemble beliefs and
/// normalized member scores (M × n).
double pair_criterion_value(PairCriterion criterion, int i, int j, const std::vector<GaussianBelief>& beliefs,
                            const Eigen::MatrixXd& member_scores);

}  // namespace bope

#endif  // BOPE_ACQUISITION_HPP
