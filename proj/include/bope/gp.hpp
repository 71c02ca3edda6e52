#ifndef BOPE_GP_HPP
#define BOPE_GP_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bope/problems.hpp"

namespace bope {

/// Mean and variance of a scalar Gaussian prediction.
struct GaussianBelief {
  double mean = 0.0;
  double variance = 0.0;
};

/// Evaluated designs paired with their observed outputs. Designs are stored
/// one per column (dim × n) and outputs likewise (num_outputs × n).
class ObservationSet {
 public:
  static constexpr double kDuplicateTolerance = 1e-12;

  ObservationSet(int dim, int num_outputs);

  /// Throws InputError on a dimension mismatch, a non-finite output, or a
  /// design within kDuplicateTolerance (max-norm) of an existing one.
  void add(const DesignPoint& x, const OutputVector& y);

  int size() const { return static_cast<int>(designs_.cols()); }
  int dim() const { return dim_; }
  int num_outputs() const { return num_outputs_; }
  bool contains(const DesignPoint& x) const;

  const Eigen::MatrixXd& designs() const { return designs_; }
  const Eigen::MatrixXd& outputs() const { return outputs_; }
  DesignPoint design(int i) const { return designs_.col(i); }
  OutputVector output(int i) const { return outputs_.col(i); }

 private:
  int dim_;
  int num_outputs_;
  Eigen::MatrixXd designs_;
  Eigen::MatrixXd outputs_;
};

/// Matérn-5/2 ARD hyperparameters of one output, in standardized output units
/// and unit-cube input units.
struct GpHyperparams {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;

  /// [log lengthscales..., log signal variance, log noise variance]
  Eigen::VectorXd to_log() const;
  static GpHyperparams from_log(const Eigen::VectorXd& log_params);
};

struct GpHyperparamBounds {
  double lengthscale_min = 1e-3;
  double lengthscale_max = 1e2;
  double signal_min = 1e-3;
  double signal_max = 1e3;
  double noise_min = 1e-8;
  double noise_max = 1.0;
};

/// k(a, b) = s² (1 + √5 r + 5r²/3) exp(−√5 r), r² = Σ ((a_i − b_i)/ℓ_i)².
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyperparams& h);
/// Cross-covariance matrix between the columns of `a` and the columns of `b`.
Eigen::MatrixXd matern52_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const GpHyperparams& h);

struct LmlValue {
  double value = 0.0;
  Eigen::VectorXd gradient;  // with respect to GpHyperparams::to_log()
};

/// Exact log marginal likelihood of a zero-mean GP and its analytic gradient.
/// `inputs` is dim × n, `targets` has length n. Throws NumericalError when the
/// Gram matrix cannot be factorized (no jitter is added here).
LmlValue log_marginal_likelihood(const GpHyperparams& h, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets);

struct GpFitOptions {
  int restarts = 5;
  int max_iterations = 200;
  GpHyperparamBounds bounds;
};

/// Per-output record of the hyperparameter search.
struct GpFitDiagnostics {
  std::vector<double> initial_lml;  // one per restart, at the starting point
  std::vector<double> final_lml;    // one per restart, after ascent
  double best_lml = 0.0;
  double jitter = 0.0;
};

/// Independent Matérn-5/2 ARD GPs, one per output. Inputs are min-max scaled to
/// the unit cube with the problem box; outputs are standardized per column.
/// Immutable after construction.
class GpSurrogate {
 public:
  static constexpr double kJitterStart = 1e-8;
  static constexpr double kJitterMax = 1e-4;

  /// Maximum-likelihood fit with multi-restart quasi-Newton ascent. Needs at
  /// least two observations.
  static GpSurrogate fit(const ObservationSet& data, const Box& bounds, std::uint64_t seed,
                         const GpFitOptions& options = {});

  /// Conditions on `data` with fixed hyperparameters, one entry per output.
  static GpSurrogate with_hyperparams(const ObservationSet& data, const Box& bounds,
                                      std::vector<GpHyperparams> hyperparams);

  int dim() const { return static_cast<int>(lower_.size()); }
  int num_outputs() const { return static_cast<int>(outputs_.size()); }
  int num_train() const { return static_cast<int>(train_inputs_.cols()); }

  /// Posterior of the latent function at `x`, original output units.
  std::vector<GaussianBelief> predict(const DesignPoint& x) const;

  /// num_outputs × m posterior means at the columns of `designs`.
  Eigen::MatrixXd posterior_mean(const Eigen::MatrixXd& designs) const;
  /// Posterior covariance of one output between two design sets, original units.
  Eigen::MatrixXd posterior_covariance(int output, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;

  /// `count` exact joint posterior draws over the columns of `designs`; each
  /// draw is m × num_outputs. Reproducible for a given seed.
  std::vector<Eigen::MatrixXd> sample_posterior(const Eigen::MatrixXd& designs, int count,
                                                std::uint64_t seed) const;

  const GpHyperparams& hyperparams(int output) const { return outputs_[static_cast<std::size_t>(output)].hyper; }
  const GpFitDiagnostics& diagnostics(int output) const {
    return outputs_[static_cast<std::size_t>(output)].diagnostics;
  }
  double output_mean(int output) const { return outputs_[static_cast<std::size_t>(output)].mean; }
  double output_scale(int output) const { return outputs_[static_cast<std::size_t>(output)].scale; }

  /// Unit-cube image of design columns.
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& designs) const;

  // Standardized-unit internals used by the conditional sampler.
  Eigen::MatrixXd standardized_mean(int output, const Eigen::MatrixXd& unit_designs) const;
  Eigen::MatrixXd standardized_covariance(int output, const Eigen::MatrixXd& unit_a,
                                          const Eigen::MatrixXd& unit_b) const;
  const Eigen::MatrixXd& train_inputs() const { return train_inputs_; }
  const Eigen::MatrixXd& cholesky(int output) const { return outputs_[static_cast<std::size_t>(output)].chol; }
  const Eigen::VectorXd& alpha(int output) const { return outputs_[static_cast<std::size_t>(output)].alpha; }

 private:
  struct OutputModel {
    GpHyperparams hyper;
    double mean = 0.0;
    double scale = 1.0;
    Eigen::MatrixXd chol;   // lower factor of K + σ²I (+ jitter)
    Eigen::VectorXd alpha;  // (K + σ²I)⁻¹ y
    GpFitDiagnostics diagnostics;
  };

  GpSurrogate(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::MatrixXd train_inputs)
      : lower_(std::move(lower)), upper_(std::move(upper)), train_inputs_(std::move(train_inputs)) {}

  static OutputModel condition(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& raw_targets,
                               GpHyperparams hyper);

  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::MatrixXd train_inputs_;  // unit cube, dim × n
  std::vector<OutputModel> outputs_;
};

/// Cholesky with a multiplicative jitter ladder on the diagonal
/// (1e-8 → 1e-4 times the mean diagonal). Returns the lower factor and the
/// jitter actually added. Throws NumericalError if every rung fails.
std::pair<Eigen::MatrixXd, double> jittered_cholesky(const Eigen::MatrixXd& matrix, const char* what);

/// Joint posterior draws over a fixed anchor set X_n plus one varying
/// candidate, drawn with base samples fixed at construction. Anchors come
/// first in the joint ordering, so the anchor draws do not depend on the
/// candidate and the candidate draw is its exact conditional given them.
/// Anchors are ordered lexicographically before factorization, which ties
/// the base samples to design points rather than to storage order.
class AnchoredPosteriorSampler {
 public:
  AnchoredPosteriorSampler(const GpSurrogate& gp, const Eigen::MatrixXd& anchors, int num_samples,
                           std::uint64_t seed);

  int num_samples() const { return num_samples_; }
  int num_anchors() const { return static_cast<int>(anchors_unit_.cols()); }

  /// Draw `s` at the anchors, num_outputs × n (anchor columns in caller order).
  Eigen::MatrixXd anchor_draw(int s) const;
  /// num_outputs × num_samples draws at the candidate.
  Eigen::MatrixXd candidate_draws(const DesignPoint& x) const;

  // Joint ordering internals, exposed for verification.
  const std::vector<Eigen::Index>& anchor_order() const { return order_; }
  const Eigen::MatrixXd& anchor_base_samples(int output) const { return base_anchor_[static_cast<std::size_t>(output)]; }
  const Eigen::VectorXd& candidate_base_samples(int output) const {
    return base_candidate_[static_cast<std::size_t>(output)];
  }
  double jitter(int output) const { return jitter_[static_cast<std::size_t>(output)]; }

 private:
  const GpSurrogate* gp_;
  int num_samples_;
  std::vector<Eigen::Index> order_;   // sorted position → caller column
  Eigen::MatrixXd anchors_unit_;      // sorted, unit cube
  std::vector<Eigen::MatrixXd> chol_anchor_;      // per output, n × n
  std::vector<Eigen::MatrixXd> train_solve_;      // per output, L_K⁻¹ k(X_train, anchors)
  std::vector<Eigen::MatrixXd> base_anchor_;      // per output, n × N
  std::vector<Eigen::VectorXd> base_candidate_;   // per output, N
  std::vector<Eigen::MatrixXd> anchor_draws_;     // per output, n × N (sorted order, standardized)
  std::vector<double> jitter_;
};

}  // namespace bope

#endif  // BOPE_GP_HPP
