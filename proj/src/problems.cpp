#include "bope/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <queue>
#include <sstream>

#include "bope/errors.hpp"
#include "bope/optim.hpp"
#include "bope/random.hpp"

namespace bope {

bool Box::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size()) return false;
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

OutputProblem::OutputProblem(std::string name, Box bounds, int num_outputs, Evaluator evaluator)
    : name_(std::move(name)), bounds_(std::move(bounds)), num_outputs_(num_outputs), evaluator_(std::move(evaluator)) {
  if (bounds_.lower.size() != bounds_.upper.size() || bounds_.lower.size() == 0)
    throw InputError("problem " + name_ + ": malformed bounds");
  if ((bounds_.lower.array() > bounds_.upper.array()).any())
    throw InputError("problem " + name_ + ": lower bound above upper bound");
  if (num_outputs_ < 1) throw InputError("problem " + name_ + ": needs at least one output");
}

OutputVector OutputProblem::evaluate(const DesignPoint& x) const {
  if (x.size() != bounds_.dim())
    throw InputError(name_ + ": expected design of dimension " + std::to_string(bounds_.dim()) + ", got " +
                     std::to_string(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= bounds_.lower(i) && x(i) <= bounds_.upper(i)))
      throw InputError(name_ + ": coordinate " + std::to_string(i) + " = " + std::to_string(x(i)) +
                       " outside [" + std::to_string(bounds_.lower(i)) + ", " + std::to_string(bounds_.upper(i)) +
                       "]");
  }
  OutputVector y = evaluator_(x);
  if (y.size() != num_outputs_) throw InputError(name_ + ": evaluator returned wrong output count");
  return y;
}

UtilityFunction::UtilityFunction(std::string name, int num_outputs, UtilityParams params, Evaluator evaluator)
    : name_(std::move(name)), num_outputs_(num_outputs), params_(std::move(params)), evaluator_(std::move(evaluator)) {}

double UtilityFunction::evaluate(const OutputVector& y) const {
  if (num_outputs_ > 0 && y.size() != num_outputs_)
    throw InputError(name_ + ": expected output of dimension " + std::to_string(num_outputs_) + ", got " +
                     std::to_string(y.size()));
  return evaluator_(y);
}

std::string UtilityFunction::params_hash() const {
  std::ostringstream canonical;
  canonical << name_ << '|';
  char buf[32];
  for (const auto& [key, values] : params_) {
    canonical << key << '=';
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      canonical << buf;
    }
    canonical << ';';
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

Box uniform_box(int dim, double lo, double hi) {
  return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
}

OutputProblem make_dtlz2() {
  constexpr int kOutputs = 2;
  return OutputProblem("DTLZ2", uniform_box(3, 0.0, 1.0), kOutputs, [](const DesignPoint& x) {
    double h = 0.0;
    for (Eigen::Index i = kOutputs - 1; i < x.size(); ++i) h += (x(i) - 0.5) * (x(i) - 0.5);
    const double angle = x(0) * std::numbers::pi / 2.0;
    OutputVector y(2);
    y << (1.0 + h) * std::cos(angle), (1.0 + h) * std::sin(angle);
    return y;
  });
}

OutputProblem make_vlmop3() {
  return OutputProblem("VLMOP3", uniform_box(2, -3.0, 3.0), 3, [](const DesignPoint& x) {
    const double x1 = x(0), x2 = x(1);
    const double r2 = x1 * x1 + x2 * x2;
    OutputVector y(3);
    y(0) = 0.5 * r2 + std::sin(r2);
    y(1) = std::pow(3.0 * x1 - 2.0 * x2 + 4.0, 2) / 8.0 + std::pow(x1 - x2 + 1.0, 2) / 27.0 + 15.0;
    y(2) = 1.0 / (r2 + 1.0) - 1.1 * std::exp(-r2);
    return y;
  });
}

OutputProblem make_zdt1() {
  return OutputProblem("ZDT1", uniform_box(10, 0.0, 1.0), 2, [](const DesignPoint& x) {
    const double d = static_cast<double>(x.size());
    const double g = 1.0 + 9.0 / (d - 1.0) * x.tail(x.size() - 1).sum();
    OutputVector y(2);
    y << x(0), g * (1.0 - std::sqrt(x(0) / g));
    return y;
  });
}

// OSY with its six constraints turned into outputs. The two original objective
// terms are non-negative on the box and are passed through unchanged. Each
// constraint c_i(x) >= 0 contributes its slack shifted by the analytic minimum
// of c_i over the box, so every output is non-negative, larger means more
// feasible, and a sum-of-squares utility is non-decreasing in every output.
OutputProblem make_osy() {
  Box box;
  box.lower.resize(6);
  box.upper.resize(6);
  box.lower << 0.0, 0.0, 1.0, 0.0, 1.0, 0.0;
  box.upper << 10.0, 10.0, 5.0, 6.0, 5.0, 10.0;
  return OutputProblem("OSY", std::move(box), 8, [](const DesignPoint& x) {
    const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4), x6 = x(5);
    OutputVector y(8);
    y(0) = 25.0 * std::pow(x1 - 2.0, 2) + std::pow(x2 - 2.0, 2) + std::pow(x3 - 1.0, 2) + std::pow(x4 - 4.0, 2) +
           std::pow(x5 - 1.0, 2);
    y(1) = x.squaredNorm();
    y(2) = (x1 + x2 - 2.0) + 2.0;                       // min -2
    y(3) = (6.0 - x1 - x2) + 14.0;                      // min -14
    y(4) = (2.0 - x2 + x1) + 8.0;                       // min -8
    y(5) = (2.0 - x1 + 3.0 * x2) + 8.0;                 // min -8
    y(6) = (4.0 - std::pow(x3 - 3.0, 2) - x4) + 6.0;    // min -6
    y(7) = (std::pow(x5 - 3.0, 2) + x6 - 4.0) + 4.0;    // min -4
    return y;
  });
}

const std::vector<double>& param(const UtilityParams& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw InputError("missing utility parameter " + key);
  return it->second;
}

UtilityParams merge_params(const std::string& utility, UtilityParams defaults, const UtilityParams& overrides) {
  for (const auto& [key, values] : overrides) {
    auto it = defaults.find(key);
    if (it == defaults.end()) throw InputError(utility + ": unknown parameter " + key);
    it->second = values;
  }
  return defaults;
}

void require_length(const std::string& utility, const std::string& key, const std::vector<double>& v,
                    std::size_t n) {
  if (v.size() != n)
    throw InputError(utility + ": parameter " + key + " needs " + std::to_string(n) + " values, got " +
                     std::to_string(v.size()));
}

UtilityFunction make_linear(const UtilityParams& overrides) {
  auto p = merge_params("Linear", {{"theta", {3.5, 6.5}}}, overrides);
  const auto theta = param(p, "theta");
  if (theta.empty()) throw InputError("Linear: theta must be non-empty");
  for (double t : theta)
    if (t < 0.0) throw InputError("Linear: theta must be non-negative for monotonicity");
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return UtilityFunction("Linear", static_cast<int>(theta.size()), p, [w](const OutputVector& y) { return w.dot(y); });
}

UtilityFunction make_exponential(const UtilityParams& overrides) {
  auto p = merge_params("Exponential", {{"theta", {0.35}}}, overrides);
  const auto& theta = param(p, "theta");
  require_length("Exponential", "theta", theta, 1);
  const double t = theta[0];
  if (!(t > 0.0)) throw InputError("Exponential: theta must be positive");
  return UtilityFunction("Exponential", 0, p, [t](const OutputVector& y) {
    return ((1.0 - (-t * y.array()).exp()) / t).sum();
  });
}

UtilityFunction make_linear_exponential(const UtilityParams& overrides) {
  auto p = merge_params("LinearExponential",
                        {{"shift", {2.0}}, {"weights", {5.0, 5.0}}, {"rates", {0.75, 1.25}}, {"scale", {2.0}}},
                        overrides);
  require_length("LinearExponential", "shift", param(p, "shift"), 1);
  require_length("LinearExponential", "weights", param(p, "weights"), 2);
  require_length("LinearExponential", "rates", param(p, "rates"), 2);
  require_length("LinearExponential", "scale", param(p, "scale"), 1);
  const double shift = param(p, "shift")[0];
  const double scale = param(p, "scale")[0];
  const auto w = param(p, "weights");
  const auto r = param(p, "rates");
  return UtilityFunction("LinearExponential", 2, p, [=](const OutputVector& y) {
    const double a = y(0) + shift, b = y(1) + shift;
    return w[0] * a + w[1] * b + scale * std::exp(r[0] * a) * std::exp(r[1] * b);
  });
}

UtilityFunction make_quadratic(const UtilityParams& overrides) {
  auto p = merge_params("Quadratic", {}, overrides);
  return UtilityFunction("Quadratic", 0, p, [](const OutputVector& y) { return y.squaredNorm(); });
}

UtilityFunction make_kumaraswamy(const UtilityParams& overrides) {
  auto p = merge_params("KumaraswamyCDF", {{"a", {0.5, 1.0, 1.5}}, {"b", {1.0, 2.0, 3.0}}}, overrides);
  const auto a = param(p, "a");
  const auto b = param(p, "b");
  require_length("KumaraswamyCDF", "b", b, a.size());
  return UtilityFunction("KumaraswamyCDF", static_cast<int>(a.size()), p, [a, b](const OutputVector& y) {
    double product = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double yi = std::clamp(y(static_cast<Eigen::Index>(i)), 0.0, 1.0);
      product *= 1.0 - std::pow(1.0 - std::pow(yi, a[i]), b[i]);
    }
    return product;
  });
}

UtilityFunction make_cobb_douglas(const UtilityParams& overrides) {
  auto p = merge_params("CobbDouglas",
                        {{"C", {50.0}}, {"theta", {0.75, 0.5, 0.5, 0.3, 0.7, 0.5, 0.65, 0.8, 0.55}}}, overrides);
  require_length("CobbDouglas", "C", param(p, "C"), 1);
  const double c = param(p, "C")[0];
  const auto theta = param(p, "theta");
  return UtilityFunction("CobbDouglas", static_cast<int>(theta.size()), p, [c, theta](const OutputVector& y) {
    double product = c;
    for (std::size_t i = 0; i < theta.size(); ++i) product *= y(static_cast<Eigen::Index>(i)) + theta[i];
    return product;
  });
}

// Two-output utility, non-decreasing on [0, 10]^2.
UtilityFunction make_sqrt_sin_log(const UtilityParams& overrides) {
  auto p = merge_params("SqrtSinLog", {}, overrides);
  return UtilityFunction("SqrtSinLog", 2, p, [](const OutputVector& y) {
    const double y1 = std::max(y(0), 0.0), y2 = std::max(y(1), 0.0);
    return std::sqrt(y1) + 0.9 * std::sin(y1) + std::log(y2 + std::exp(y1)) + 4.5 * std::sqrt(y2);
  });
}

UtilityFunction make_constant(const UtilityParams& overrides) {
  auto p = merge_params("Constant", {{"value", {0.0}}}, overrides);
  require_length("Constant", "value", param(p, "value"), 1);
  const double value = param(p, "value")[0];
  return UtilityFunction("Constant", 0, p, [value](const OutputVector&) { return value; });
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, ProblemFactory, std::less<>> problems{
      {"DTLZ2", make_dtlz2}, {"VLMOP3", make_vlmop3}, {"ZDT1", make_zdt1}, {"OSY", make_osy}};
  std::map<std::string, UtilityFactory, std::less<>> utilities{
      {"Linear", make_linear},
      {"Exponential", make_exponential},
      {"LinearExponential", make_linear_exponential},
      {"Quadratic", make_quadratic},
      {"KumaraswamyCDF", make_kumaraswamy},
      {"CobbDouglas", make_cobb_douglas},
      {"SqrtSinLog", make_sqrt_sin_log},
      {"Constant", make_constant},
  };
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

OutputProblem make_problem(std::string_view name) {
  ProblemFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.problems.find(name);
    if (it == r.problems.end()) throw InputError("unknown problem '" + std::string(name) + "'");
    factory = it->second;
  }
  return factory();
}

UtilityFunction make_utility(std::string_view name, const UtilityParams& overrides) {
  UtilityFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.utilities.find(name);
    if (it == r.utilities.end()) throw InputError("unknown utility '" + std::string(name) + "'");
    factory = it->second;
  }
  return factory(overrides);
}

void register_problem(const std::string& name, ProblemFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.problems[name] = std::move(factory);
}

void register_utility(const std::string& name, UtilityFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.utilities[name] = std::move(factory);
}

std::vector<std::string> problem_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.problems) names.push_back(name);
  return names;
}

std::vector<std::string> utility_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.utilities) names.push_back(name);
  return names;
}

std::string default_utility_for(std::string_view problem) {
  if (problem == "DTLZ2") return "Linear";
  if (problem == "VLMOP3") return "Exponential";
  if (problem == "ZDT1") return "LinearExponential";
  if (problem == "OSY") return "Quadratic";
  throw InputError("no default utility for problem '" + std::string(problem) + "'");
}

OutputRanges estimate_output_ranges(const OutputProblem& problem, int num_points, std::uint64_t seed) {
  SobolSampler sobol(static_cast<unsigned>(problem.dim()), seed);
  const auto& box = problem.bounds();
  OutputRanges ranges{Eigen::VectorXd::Constant(problem.num_outputs(), std::numeric_limits<double>::infinity()),
                      Eigen::VectorXd::Constant(problem.num_outputs(), -std::numeric_limits<double>::infinity())};
  const Eigen::VectorXd width = box.upper - box.lower;
  for (int i = 0; i < num_points; ++i) {
    const DesignPoint x = box.lower + sobol.next().cwiseProduct(width);
    const OutputVector y = problem.evaluate(x);
    ranges.lower = ranges.lower.cwiseMin(y);
    ranges.upper = ranges.upper.cwiseMax(y);
  }
  return ranges;
}

ReferenceOptimum estimate_reference_optimum(const OutputProblem& problem, const UtilityFunction& utility,
                                            int sweep_points, std::uint64_t seed, int refine_starts) {
  if (utility.num_outputs() > 0 && utility.num_outputs() != problem.num_outputs())
    throw InputError("utility " + utility.name() + " expects " + std::to_string(utility.num_outputs()) +
                     " outputs but problem " + problem.name() + " has " + std::to_string(problem.num_outputs()));

  const auto& box = problem.bounds();
  const Eigen::VectorXd width = box.upper - box.lower;
  auto value_at = [&](const DesignPoint& x) { return utility.evaluate(problem.evaluate(x)); };

  // Min-heap of the best sweep points.
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> best;
  std::vector<DesignPoint> kept;
  SobolSampler sobol(static_cast<unsigned>(problem.dim()), seed);
  for (int i = 0; i < sweep_points; ++i) {
    DesignPoint x = box.lower + sobol.next().cwiseProduct(width);
    const double v = value_at(x);
    if (static_cast<int>(best.size()) < refine_starts) {
      best.emplace(v, static_cast<int>(kept.size()));
      kept.push_back(std::move(x));
    } else if (v > best.top().first) {
      const int slot = best.top().second;
      best.pop();
      kept[static_cast<std::size_t>(slot)] = std::move(x);
      best.emplace(v, slot);
    }
  }

  ReferenceOptimum out;
  out.seed = seed;
  out.sweep_points = sweep_points;
  out.value = -std::numeric_limits<double>::infinity();
  while (!best.empty()) {
    const auto [v, slot] = best.top();
    best.pop();
    if (v > out.value) {
      out.value = v;
      out.argmax = kept[static_cast<std::size_t>(slot)];
    }
  }
  out.sweep_value = out.value;

  const Objective negated = with_numeric_gradient(
      [&](const Eigen::VectorXd& x) { return -value_at(x); }, box.lower, box.upper, 1e-7);
  BoxMinimizeOptions options;
  options.max_iterations = 500;
  options.relative_function_tolerance = 1e-15;
  options.projected_gradient_tolerance = 1e-12;
  for (const auto& start : kept) {
    const auto refined = minimize_box(negated, start, box.lower, box.upper, options);
    if (-refined.value > out.value) {
      out.value = -refined.value;
      out.argmax = refined.x;
    }
  }
  return out;
}

ReferenceOptimumCache::ReferenceOptimumCache(std::filesystem::path sidecar) : sidecar_(std::move(sidecar)) {
  load();
}

std::string ReferenceOptimumCache::key(const OutputProblem& problem, const UtilityFunction& utility) {
  return problem.name() + ' ' + utility.name() + ' ' + utility.params_hash();
}

void ReferenceOptimumCache::load() {
  std::ifstream in(*sidecar_);
  if (!in) return;
  std::string header;
  std::getline(in, header);
  if (header != "bope-reference-optima v1") return;
  std::string problem, utility, hash;
  double value;
  std::uint64_t seed;
  while (in >> problem >> utility >> hash >> value >> seed) values_[problem + ' ' + utility + ' ' + hash] = value;
}

void ReferenceOptimumCache::append(const std::string& key, double value, std::uint64_t seed) {
  if (!sidecar_) return;
  const bool fresh = !std::filesystem::exists(*sidecar_);
  if (sidecar_->has_parent_path()) std::filesystem::create_directories(sidecar_->parent_path());
  std::ofstream out(*sidecar_, std::ios::app);
  if (fresh) out << "bope-reference-optima v1\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out << key << ' ' << buf << ' ' << seed << '\n';
}

std::optional<double> ReferenceOptimumCache::lookup(const OutputProblem& problem,
                                                    const UtilityFunction& utility) const {
  std::lock_guard lock(mutex_);
  auto it = values_.find(key(problem, utility));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void ReferenceOptimumCache::put(const OutputProblem& problem, const UtilityFunction& utility, double value,
                                std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  const std::string k = key(problem, utility);
  if (values_.contains(k)) return;
  values_[k] = value;
  append(k, value, seed);
}

double ReferenceOptimumCache::get(const OutputProblem& problem, const UtilityFunction& utility) {
  if (auto hit = lookup(problem, utility)) return *hit;
  const auto optimum = estimate_reference_optimum(problem, utility);
  put(problem, utility, optimum.value, optimum.seed);
  return *lookup(problem, utility);
}

ReferenceOptimumCache& shared_reference_cache() {
  static ReferenceOptimumCache cache;
  return cache;
}

}  // namespace bope
