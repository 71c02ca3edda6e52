#ifndef BOPE_MONNE_HPP
#define BOPE_MONNE_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bope/gp.hpp"
#include "bope/problems.hpp"

namespace bope {

/// Pairwise comparisons between output vectors. Label +1 means the first
/// output was preferred, −1 the second, 0 a tie. Outputs are stored one per
/// column (num_outputs × m).
class ComparisonSet {
 public:
  explicit ComparisonSet(int num_outputs);

  void add(const OutputVector& first, const OutputVector& second, int label);

  int size() const { return static_cast<int>(labels_.size()); }
  int num_outputs() const { return num_outputs_; }
  const Eigen::MatrixXd& first() const { return first_; }
  const Eigen::MatrixXd& second() const { return second_; }
  const std::vector<int>& labels() const { return labels_; }

  /// All 2m compared outputs: the first members followed by the second members.
  Eigen::MatrixXd compared_outputs() const;

 private:
  int num_outputs_;
  Eigen::MatrixXd first_;
  Eigen::MatrixXd second_;
  std::vector<int> labels_;
};

enum class Activation { Swish, Sigmoid, LeakyRelu };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct NetArchitecture {
  std::vector<int> hidden = {100, 10};
  Activation activation = Activation::Swish;
  /// When false the weights are used as-is (ablation) instead of exp(raw).
  bool monotonic = true;
};

/// Feedforward network whose effective weights are exp(raw weights), which
/// makes the output non-decreasing in every input when the activations are
/// non-decreasing on the range they see. An optional positive per-coordinate
/// affine scaling of the inputs (identity by default) preserves that order.
class MonotonicNet {
 public:
  struct Layer {
    Eigen::MatrixXd raw_weights;  // fan_out × fan_in
    Eigen::VectorXd raw_biases;
  };

  /// Raw weights ~ U[−1/s − 6, 1/s] and biases ~ U[−1/s, 1/s], s the fan-in of
  /// the receiving node. Non-monotonic nets draw weights from
  /// U[−1/√s, 1/√s]. The hinge scale starts at α = 1.
  static MonotonicNet init(int num_inputs, const NetArchitecture& arch, std::uint64_t seed);

  int num_inputs() const { return static_cast<int>(input_offset_.size()); }
  const NetArchitecture& architecture() const { return arch_; }

  double forward(const OutputVector& y) const;
  /// Scores for each column of `outputs` (num_inputs × B).
  Eigen::RowVectorXd forward_batch(const Eigen::MatrixXd& outputs) const;
  /// ∂forward/∂y by backpropagation.
  Eigen::VectorXd input_gradient(const OutputVector& y) const;

  /// α = softplus(hinge_scale_raw).
  double hinge_scale() const;
  double hinge_scale_raw() const { return hinge_scale_raw_; }
  void set_hinge_scale_raw(double raw) { hinge_scale_raw_ = raw; }

  Eigen::MatrixXd effective_weights(std::size_t layer) const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  void set_input_scaling(Eigen::VectorXd offset, Eigen::VectorXd scale);
  const Eigen::VectorXd& input_offset() const { return input_offset_; }
  const Eigen::VectorXd& input_scale() const { return input_scale_; }

  /// Layer by layer: raw weights (column-major), raw biases; then the raw hinge scale.
  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& params);
  Eigen::Index num_params() const;

  /// Forward pass keeping intermediates; `pre` holds pre-activations of the
  /// hidden layers and `post` the layer inputs (post[0] is the scaled input).
  struct Trace {
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> post;
    Eigen::RowVectorXd output;
  };
  Trace forward_trace(const Eigen::MatrixXd& outputs) const;
  /// Gradient with respect to flat_params() (hinge scale entry left at 0)
  /// given ∂loss/∂output for each batch column.
  Eigen::VectorXd backward(const Trace& trace, const Eigen::RowVectorXd& output_grad) const;

 private:
  MonotonicNet() = default;

  NetArchitecture arch_;
  std::vector<Layer> layers_;
  double hinge_scale_raw_ = 0.0;
  Eigen::VectorXd input_offset_;
  Eigen::VectorXd input_scale_;
};

struct HingeLoss {
  double value = 0.0;
  Eigen::VectorXd gradient;  // with respect to MonotonicNet::flat_params()
};

/// Σ over labelled pairs of max{0, 1 − α (g(y₁) − g(y₂)) p} plus Σ over tied
/// pairs of |g(y₁) − g(y₂)|.
HingeLoss hinge_loss(const MonotonicNet& net, const ComparisonSet& data, bool with_gradient = true);

struct TrainConfig {
  int epochs = 1600;
  double learning_rate = 0.01;
  double learning_rate_min = 1e-4;
  int cosine_period = 1600;
  double early_stop_loss = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct TrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
};

/// Full-batch Adam with cosine-annealed learning rate. Returns the
/// lowest-loss parameters seen, so the final loss never exceeds the initial
/// one. Throws TrainingError on a non-finite loss or gradient.
TrainResult train_member(MonotonicNet& net, const ComparisonSet& data, const TrainConfig& cfg);

struct NormStats {
  double g_max = 0.0;
  double mean = 0.0;
  double sigma = 1.0;
  bool sigma_fallback = false;
};

/// Statistics of one member's scores on the 2m compared outputs:
/// g_max = max, μ = mean, σ = sqrt(Σ (g − μ)² / m). A zero σ falls back to 1.
NormStats normalize(const MonotonicNet& member, const ComparisonSet& data);

/// Per-coordinate min and range of the compared outputs (range 1 when flat).
std::pair<Eigen::VectorXd, Eigen::VectorXd> compared_output_scaling(const ComparisonSet& data);

/// Ensemble of independently initialized monotonic nets, each normalized as
/// (g − g_max)/σ. Immutable once trained.
class MonotonicEnsemble {
 public:
  struct Options {
    int ensemble_size = 8;
    NetArchitecture architecture;
    TrainConfig train;
    int threads = 1;
    /// Map each output to [0, 1] over the compared range before the first
    /// layer. Off by default: members see raw outputs.
    bool scale_inputs = false;
  };

  /// Trains every member on the same data from its own seed. A member failure
  /// is rethrown as TrainingError carrying the member index.
  static MonotonicEnsemble train(const ComparisonSet& data, const Options& options, std::uint64_t seed);

  /// Assembles an ensemble from already trained members.
  static MonotonicEnsemble from_members(std::vector<MonotonicNet> members, const ComparisonSet& data);

  int size() const { return static_cast<int>(members_.size()); }
  int num_outputs() const { return members_.front().num_inputs(); }
  const MonotonicNet& member(int j) const { return members_[static_cast<std::size_t>(j)]; }
  const NormStats& stats(int j) const { return stats_[static_cast<std::size_t>(j)]; }
  const std::vector<TrainResult>& train_results() const { return train_results_; }

  double normalized_score(int j, const OutputVector& y) const;
  Eigen::RowVectorXd normalized_scores(int j, const Eigen::MatrixXd& outputs) const;

  /// Mean and population variance of the normalized member scores.
  GaussianBelief predict_belief(const OutputVector& y) const;
  std::vector<GaussianBelief> predict_beliefs(const Eigen::MatrixXd& outputs) const;

  /// Versioned JSON artifact: shapes, raw parameters, scaling, norm stats and
  /// a hash of the architecture.
  std::string serialize() const;
  static MonotonicEnsemble deserialize(std::string_view text);

  std::string config_hash() const;

 private:
  std::vector<MonotonicNet> members_;
  std::vector<NormStats> stats_;
  std::vector<TrainResult> train_results_;
};

}  // namespace bope

#endif  // BOPE_MONNE_HPP
