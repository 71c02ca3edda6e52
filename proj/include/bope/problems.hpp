#ifndef BOPE_PROBLEMS_HPP
#define BOPE_PROBLEMS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bope {

/// A point in design space, one coordinate per input dimension.
using DesignPoint = Eigen::VectorXd;
/// Objective values of one design, one entry per output.
using OutputVector = Eigen::VectorXd;

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Eigen::VectorXd& x) const;
};

/// Deterministic multi-output test function f_true over a box.
class OutputProblem {
 public:
  using Evaluator = std::function<OutputVector(const DesignPoint&)>;

  OutputProblem(std::string name, Box bounds, int num_outputs, Evaluator evaluator);

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(bounds_.dim()); }
  int num_outputs() const { return num_outputs_; }
  const Box& bounds() const { return bounds_; }

  /// Throws InputError on wrong dimension or a coordinate outside the box.
  OutputVector evaluate(const DesignPoint& x) const;

 private:
  std::string name_;
  Box bounds_;
  int num_outputs_;
  Evaluator evaluator_;
};

using UtilityParams = std::map<std::string, std::vector<double>>;

/// Deterministic utility g_true over output vectors, non-decreasing in every
/// coordinate on the reachable output range of the problem it is paired with.
class UtilityFunction {
 public:
  using Evaluator = std::function<double(const OutputVector&)>;

  // `num_outputs` of 0 accepts any dimension.
  UtilityFunction(std::string name, int num_outputs, UtilityParams params, Evaluator evaluator);

  const std::string& name() const { return name_; }
  int num_outputs() const { return num_outputs_; }
  const UtilityParams& params() const { return params_; }

  /// Throws InputError on a dimension mismatch.
  double evaluate(const OutputVector& y) const;

  /// Stable hex digest of name and parameters.
  std::string params_hash() const;

 private:
  std::string name_;
  int num_outputs_;
  UtilityParams params_;
  Evaluator evaluator_;
};

using ProblemFactory = std::function<OutputProblem()>;
using UtilityFactory = std::function<UtilityFunction(const UtilityParams& overrides)>;

/// Built-ins: DTLZ2, VLMOP3, ZDT1, OSY. Throws InputError for unknown names.
OutputProblem make_problem(std::string_view name);
/// Built-ins: Linear, Exponential, LinearExponential, Quadratic, KumaraswamyCDF,
/// CobbDouglas, SqrtSinLog, Constant. Overrides replace named defaults; an
/// unknown parameter name is an InputError.
UtilityFunction make_utility(std::string_view name, const UtilityParams& overrides = {});

/// Plug-in registration; a later registration under the same name wins.
void register_problem(const std::string& name, ProblemFactory factory);
void register_utility(const std::string& name, UtilityFactory factory);

std::vector<std::string> problem_names();
std::vector<std::string> utility_names();

/// Utility each built-in problem is benchmarked with.
std::string default_utility_for(std::string_view problem);

struct OutputRanges {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Per-output min and max over a scrambled Sobol sweep of the design box.
OutputRanges estimate_output_ranges(const OutputProblem& problem, int num_points = 1 << 16,
                                    std::uint64_t seed = 7);

struct ReferenceOptimum {
  double value = 0.0;
  DesignPoint argmax;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  int sweep_points = 0;
};

/// max_x g(f(x)): Sobol sweep over the box followed by bounded quasi-Newton
/// refinement from the best sweep points.
ReferenceOptimum estimate_reference_optimum(const OutputProblem& problem, const UtilityFunction& utility,
                                            int sweep_points = 1 << 20, std::uint64_t seed = 20240601,
                                            int refine_starts = 8);

/// Reference optima keyed by (problem, utility name, parameter hash). Backed by
/// an optional text sidecar file, one line per entry:
///   bope-reference-optima v1
///   <problem> <utility> <params-hash> <value> <seed>
/// Safe for concurrent use.
class ReferenceOptimumCache {
 public:
  ReferenceOptimumCache() = default;
  explicit ReferenceOptimumCache(std::filesystem::path sidecar);

  double get(const OutputProblem& problem, const UtilityFunction& utility);
  std::optional<double> lookup(const OutputProblem& problem, const UtilityFunction& utility) const;
  void put(const OutputProblem& problem, const UtilityFunction& utility, double value, std::uint64_t seed);

 private:
  static std::string key(const OutputProblem& problem, const UtilityFunction& utility);
  void load();
  void append(const std::string& key, double value, std::uint64_t seed);

  std::optional<std::filesystem::path> sidecar_;
  mutable std::mutex mutex_;
  std::map<std::string, double> values_;
};

/// Process-wide in-memory cache, used when no sidecar is configured.
ReferenceOptimumCache& shared_reference_cache();

}  // namespace bope

#endif  // BOPE_PROBLEMS_HPP
