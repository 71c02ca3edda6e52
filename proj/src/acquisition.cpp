#include "bope/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bope/errors.hpp"
#include "bope/optim.hpp"
#include "bope/random.hpp"

namespace bope {

std::string to_string(PairCriterion c) { return c == PairCriterion::IEUBO ? "IEUBO" : "EUBO"; }

PairCriterion pair_criterion_from_string(std::string_view name) {
  if (name == "IEUBO") return PairCriterion::IEUBO;
  if (name == "EUBO") return PairCriterion::EUBO;
  throw InputError("unknown pair criterion '" + std::string(name) + "'");
}

void AcquisitionConfig::validate() const {
  if (posterior_samples < 1) throw InputError("posterior_samples must be at least 1");
  if (raw_samples < 1) throw InputError("raw_samples must be at least 1");
  if (restarts < 0 || restarts > raw_samples) throw InputError("restarts must lie in [0, raw_samples]");
  if (batch_size != 1) throw InputError("only batch size 1 is supported");
  if (refine_iterations < 0) throw InputError("refine_iterations must be non-negative");
}

Eigen::RowVectorXd FunctionUtilitySamples::evaluate(int j, const Eigen::MatrixXd& outputs) const {
  const auto& f = functions_[static_cast<std::size_t>(j)];
  Eigen::RowVectorXd values(outputs.cols());
  for (Eigen::Index c = 0; c < outputs.cols(); ++c) values(c) = f(outputs.col(c));
  return values;
}

QneiuuEvaluator::QneiuuEvaluator(const GpSurrogate& gp, const UtilitySamples& utility, const ObservationSet& data,
                                 int num_samples, std::uint64_t seed)
    : utility_(&utility), sampler_(gp, data.designs(), num_samples, seed) {
  const int n = sampler_.num_anchors();
  const int k = gp.num_outputs();
  // All anchor draws side by side: column s·n + i is draw s at anchor i.
  Eigen::MatrixXd stacked(k, static_cast<Eigen::Index>(n) * num_samples);
  for (int s = 0; s < num_samples; ++s) stacked.middleCols(static_cast<Eigen::Index>(s) * n, n) = sampler_.anchor_draw(s);
  incumbent_.resize(utility.size(), num_samples);
  for (int j = 0; j < utility.size(); ++j) {
    const Eigen::RowVectorXd u = utility.evaluate(j, stacked);
    for (int s = 0; s < num_samples; ++s) incumbent_(j, s) = u.segment(static_cast<Eigen::Index>(s) * n, n).maxCoeff();
  }
}

QneiuuEvaluator::Detail QneiuuEvaluator::evaluate_detailed(const DesignPoint& x) const {
  Detail d;
  d.candidate_outputs = sampler_.candidate_draws(x);
  d.candidate_utility.resize(utility_->size(), sampler_.num_samples());
  for (int j = 0; j < utility_->size(); ++j) d.candidate_utility.row(j) = utility_->evaluate(j, d.candidate_outputs);
  d.incumbent_utility = incumbent_;
  d.value = (d.candidate_utility - incumbent_).cwiseMax(0.0).mean();
  return d;
}

double QneiuuEvaluator::operator()(const DesignPoint& x) const { return evaluate_detailed(x).value; }

double qneiuu(const DesignPoint& x, const GpSurrogate& gp, const UtilitySamples& utility,
              const ObservationSet& data, const AcquisitionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return QneiuuEvaluator(gp, utility, data, cfg.posterior_samples, seed)(x);
}

AcquisitionOptimum maximize_acquisition(const std::function<double(const DesignPoint&)>& acquisition,
                                        const Box& bounds, const AcquisitionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SobolSampler sobol(static_cast<unsigned>(bounds.dim()), seed);
  const Eigen::MatrixXd raw = scale_to_box(sobol.draw(cfg.raw_samples), bounds.lower, bounds.upper);

  AcquisitionOptimum best;
  best.evaluations = cfg.raw_samples;
  std::vector<double> values(static_cast<std::size_t>(cfg.raw_samples));
  for (int i = 0; i < cfg.raw_samples; ++i) values[static_cast<std::size_t>(i)] = acquisition(raw.col(i));

  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
  });
  best.x = raw.col(order.front());
  best.value = values[static_cast<std::size_t>(order.front())];
  best.best_raw_value = best.value;

  const Objective negated = with_numeric_gradient([&](const Eigen::VectorXd& x) { return -acquisition(x); },
                                                  bounds.lower, bounds.upper, 1e-5);
  BoxMinimizeOptions options;
  options.max_iterations = cfg.refine_iterations;
  options.relative_function_tolerance = 1e-9;
  options.projected_gradient_tolerance = 1e-9;

  int failures = 0;
  const int restarts = std::min<int>(cfg.restarts, static_cast<int>(order.size()));
  for (int r = 0; r < restarts; ++r) {
    const auto result = minimize_box(negated, raw.col(order[static_cast<std::size_t>(r)]), bounds.lower,
                                     bounds.upper, options);
    best.evaluations += result.evaluations * (2 * bounds.dim() + 1);
    if (result.line_search_failed && result.iterations <= 1) ++failures;
    if (-result.value > best.value) {
      best.value = -result.value;
      best.x = result.x;
    }
  }
  best.refinement_failed = restarts > 0 && failures == restarts;
  return best;
}

AcquisitionOptimum optimize_qneiuu(const GpSurrogate& gp, const UtilitySamples& utility, const ObservationSet& data,
                                   const Box& bounds, const AcquisitionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const QneiuuEvaluator evaluator(gp, utility, data, cfg.posterior_samples, derive_seed(seed, "qneiuu-base"));
  return maximize_acquisition([&](const DesignPoint& x) { return evaluator(x); }, bounds, cfg,
                              derive_seed(seed, "qneiuu-raw"));
}

double expected_max_gaussian(double m1, double s1, double m2, double s2) {
  const double s3 = std::hypot(s1, s2);
  if (!(s3 > 0.0)) return std::max(m1, m2);
  const double a = (m1 - m2) / s3;
  return m1 * normal_cdf(a) + m2 * normal_cdf(-a) + s3 * normal_pdf(a);
}

double ieubo(const OutputVector& y1, const OutputVector& y2, const MonotonicEnsemble& utility) {
  const auto b1 = utility.predict_belief(y1);
  const auto b2 = utility.predict_belief(y2);
  return expected_max_gaussian(b1.mean, std::sqrt(b1.variance), b2.mean, std::sqrt(b2.variance));
}

double eubo_observed(const OutputVector& y1, const OutputVector& y2, const MonotonicEnsemble& utility) {
  double total = 0.0;
  for (int j = 0; j < utility.size(); ++j)
    total += std::max(utility.normalized_score(j, y1), utility.normalized_score(j, y2));
  return total / utility.size();
}

double pair_criterion_value(PairCriterion criterion, int i, int j, const std::vector<GaussianBelief>& beliefs,
                            const Eigen::MatrixXd& member_scores) {
  if (criterion == PairCriterion::IEUBO) {
    const auto& a = beliefs[static_cast<std::size_t>(i)];
    const auto& b = beliefs[static_cast<std::size_t>(j)];
    return expected_max_gaussian(a.mean, std::sqrt(a.variance), b.mean, std::sqrt(b.variance));
  }
  return member_scores.col(i).cwiseMax(member_scores.col(j)).mean();
}

namespace {

std::vector<int> matching_columns(const Eigen::MatrixXd& outputs, const Eigen::VectorXd& y) {
  std::vector<int> found;
  for (Eigen::Index c = 0; c < outputs.cols(); ++c)
    if (outputs.col(c) == y) found.push_back(static_cast<int>(c));
  return found;
}

}  // namespace

PairSelection select_pair(const Eigen::MatrixXd& outputs, const MonotonicEnsemble& utility,
                          const ComparisonSet& history, const AcquisitionConfig& cfg) {
  const int n = static_cast<int>(outputs.cols());
  if (n < 2) throw StateError("pair selection needs at least two observed outputs");

  std::vector<std::vector<bool>> asked(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
  if (cfg.exclude_asked_pairs) {
    for (int c = 0; c < history.size(); ++c) {
      const auto firsts = matching_columns(outputs, history.first().col(c));
      const auto seconds = matching_columns(outputs, history.second().col(c));
      for (int a : firsts)
        for (int b : seconds) {
          asked[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
          asked[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
        }
    }
  }

  const auto beliefs = utility.predict_beliefs(outputs);
  Eigen::MatrixXd scores(utility.size(), n);
  if (cfg.pair_selection == PairCriterion::EUBO)
    for (int j = 0; j < utility.size(); ++j) scores.row(j) = utility.normalized_scores(j, outputs);

  auto sweep = [&](bool respect_history) {
    PairSelection best;
    best.value = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (respect_history && asked[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
        if (outputs.col(i) == outputs.col(j)) continue;
        const double v = pair_criterion_value(cfg.pair_selection, i, j, beliefs, scores);
        // Values within rounding of the best count as ties, which keeps the
        // lexicographically first pair.
        if (best.first < 0 || v > best.value + kPairTieTolerance * std::max(1.0, std::abs(best.value)))
          best = {i, j, v, false};
      }
    }
    return best;
  };

  PairSelection best = sweep(cfg.exclude_asked_pairs);
  if (best.first < 0) {
    best = sweep(false);
    best.fallback = true;
  }
  if (best.first < 0) throw StateError("pair selection needs two distinct observed outputs");
  return best;
}

}  // namespace bope
