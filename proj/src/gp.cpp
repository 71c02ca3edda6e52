#include "bope/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bope/errors.hpp"
#include "bope/optim.hpp"
#include "bope/random.hpp"

namespace bope {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873;

struct MaternTerms {
  double value;  // kernel value
  double shape;  // s² (5/3)(1 + √5 r) exp(−√5 r), the common factor of ∂k/∂log ℓ_i
};

MaternTerms matern_terms(double r2, double signal_variance) {
  const double r = std::sqrt(r2);
  const double e = std::exp(-kSqrt5 * r);
  return {signal_variance * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * e,
          signal_variance * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * e};
}

double scaled_sq_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j,
                          const Eigen::VectorXd& inv_ell) {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    const double t = (a(k, i) - b(k, j)) * inv_ell(k);
    r2 += t * t;
  }
  return r2;
}

bool lexicographic_less(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    if (m(k, a) < m(k, b)) return true;
    if (m(k, a) > m(k, b)) return false;
  }
  return a < b;
}

}  // namespace

ObservationSet::ObservationSet(int dim, int num_outputs)
    : dim_(dim), num_outputs_(num_outputs), designs_(dim, 0), outputs_(num_outputs, 0) {
  if (dim < 1 || num_outputs < 1) throw InputError("ObservationSet needs positive dimensions");
}

bool ObservationSet::contains(const DesignPoint& x) const {
  for (Eigen::Index j = 0; j < designs_.cols(); ++j)
    if ((designs_.col(j) - x).lpNorm<Eigen::Infinity>() <= kDuplicateTolerance) return true;
  return false;
}

void ObservationSet::add(const DesignPoint& x, const OutputVector& y) {
  if (x.size() != dim_) throw InputError("observation design has wrong dimension");
  if (y.size() != num_outputs_) throw InputError("observation output has wrong dimension");
  if (!y.allFinite()) throw InputError("observation output is not finite");
  if (contains(x)) throw InputError("duplicate design point in observation set");
  const Eigen::Index n = designs_.cols();
  designs_.conservativeResize(Eigen::NoChange, n + 1);
  outputs_.conservativeResize(Eigen::NoChange, n + 1);
  designs_.col(n) = x;
  outputs_.col(n) = y;
}

Eigen::VectorXd GpHyperparams::to_log() const {
  Eigen::VectorXd p(lengthscales.size() + 2);
  p.head(lengthscales.size()) = lengthscales.array().log();
  p(lengthscales.size()) = std::log(signal_variance);
  p(lengthscales.size() + 1) = std::log(noise_variance);
  return p;
}

GpHyperparams GpHyperparams::from_log(const Eigen::VectorXd& log_params) {
  const Eigen::Index d = log_params.size() - 2;
  GpHyperparams h;
  h.lengthscales = log_params.head(d).array().exp();
  h.signal_variance = std::exp(log_params(d));
  h.noise_variance = std::exp(log_params(d + 1));
  return h;
}

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyperparams& h) {
  const double r2 = ((a - b).array() / h.lengthscales.array()).square().sum();
  return matern_terms(r2, h.signal_variance).value;
}

Eigen::MatrixXd matern52_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const GpHyperparams& h) {
  const Eigen::VectorXd inv_ell = h.lengthscales.cwiseInverse();
  Eigen::MatrixXd k(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i)
      k(i, j) = matern_terms(scaled_sq_distance(a, i, b, j, inv_ell), h.signal_variance).value;
  return k;
}

LmlValue log_marginal_likelihood(const GpHyperparams& h, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets) {
  const Eigen::Index n = inputs.cols();
  const Eigen::Index d = inputs.rows();
  if (targets.size() != n) throw InputError("targets and inputs disagree in length");
  if (h.lengthscales.size() != d) throw InputError("lengthscale count does not match input dimension");

  const Eigen::VectorXd inv_ell = h.lengthscales.cwiseInverse();
  Eigen::MatrixXd kernel(n, n), shape(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const auto t = matern_terms(scaled_sq_distance(inputs, i, inputs, j, inv_ell), h.signal_variance);
      kernel(i, j) = kernel(j, i) = t.value;
      shape(i, j) = shape(j, i) = t.shape;
    }
  }
  Eigen::MatrixXd gram = kernel;
  gram.diagonal().array() += h.noise_variance;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
    throw NumericalError("log_marginal_likelihood: Gram matrix not positive definite");

  const Eigen::VectorXd alpha = llt.solve(targets);
  const Eigen::MatrixXd chol = llt.matrixL();
  LmlValue out;
  out.value = -0.5 * targets.dot(alpha) - chol.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);

  const Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
  out.gradient.resize(d + 2);
  for (Eigen::Index k = 0; k < d; ++k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = (inputs(k, i) - inputs(k, j)) * inv_ell(k);
        acc += w(i, j) * shape(i, j) * t * t;
      }
    }
    out.gradient(k) = 0.5 * acc;
  }
  out.gradient(d) = 0.5 * (w.array() * kernel.array()).sum();
  out.gradient(d + 1) = 0.5 * h.noise_variance * w.trace();
  return out;
}

std::pair<Eigen::MatrixXd, double> jittered_cholesky(const Eigen::MatrixXd& matrix, const char* what) {
  const double diag_mean = std::max(matrix.diagonal().mean(), std::numeric_limits<double>::min());
  double rung = 0.0;
  for (;;) {
    Eigen::MatrixXd m = matrix;
    const double jitter = rung * diag_mean;
    m.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      if ((l.diagonal().array() > 0.0).all() && l.allFinite()) return {std::move(l), jitter};
    }
    rung = rung == 0.0 ? GpSurrogate::kJitterStart : rung * 10.0;
    if (rung > GpSurrogate::kJitterMax * 1.0000001) break;
  }
  std::ostringstream msg;
  msg << what << ": matrix of size " << matrix.rows() << " not positive definite after jitter up to "
      << GpSurrogate::kJitterMax << " (diag mean " << diag_mean << ", min diag " << matrix.diagonal().minCoeff()
      << ")";
  throw NumericalError(msg.str());
}

GpSurrogate::OutputModel GpSurrogate::condition(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& raw_targets,
                                                GpHyperparams hyper) {
  OutputModel model;
  const double n = static_cast<double>(raw_targets.size());
  model.mean = raw_targets.mean();
  const double var = n > 1 ? (raw_targets.array() - model.mean).square().sum() / (n - 1.0) : 0.0;
  model.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  const Eigen::VectorXd targets = (raw_targets.array() - model.mean) / model.scale;

  Eigen::MatrixXd gram = matern52_matrix(inputs, inputs, hyper);
  gram.diagonal().array() += hyper.noise_variance;
  auto [chol, jitter] = jittered_cholesky(gram, "GP fit");
  model.alpha = chol.transpose().triangularView<Eigen::Upper>().solve(
      chol.triangularView<Eigen::Lower>().solve(targets));
  model.chol = std::move(chol);
  model.hyper = std::move(hyper);
  model.diagnostics.jitter = jitter;
  return model;
}

Eigen::MatrixXd GpSurrogate::normalize(const Eigen::MatrixXd& designs) const {
  const Eigen::VectorXd width = upper_ - lower_;
  return (designs.colwise() - lower_).array().colwise() / width.array();
}

GpSurrogate GpSurrogate::with_hyperparams(const ObservationSet& data, const Box& bounds,
                                          std::vector<GpHyperparams> hyperparams) {
  if (static_cast<int>(hyperparams.size()) != data.num_outputs())
    throw InputError("one hyperparameter set per output required");
  if (data.size() < 1) throw InputError("GP needs at least one observation");
  GpSurrogate gp(bounds.lower, bounds.upper, Eigen::MatrixXd());
  gp.train_inputs_ = gp.normalize(data.designs());
  for (int o = 0; o < data.num_outputs(); ++o)
    gp.outputs_.push_back(condition(gp.train_inputs_, data.outputs().row(o).transpose(),
                                    std::move(hyperparams[static_cast<std::size_t>(o)])));
  return gp;
}

GpSurrogate GpSurrogate::fit(const ObservationSet& data, const Box& bounds, std::uint64_t seed,
                             const GpFitOptions& options) {
  if (data.size() < 2) throw InputError("GP fit needs at least two observations");
  if (bounds.dim() != data.dim()) throw InputError("GP bounds do not match design dimension");
  GpSurrogate gp(bounds.lower, bounds.upper, Eigen::MatrixXd());
  gp.train_inputs_ = gp.normalize(data.designs());
  const int d = data.dim();
  const auto& b = options.bounds;

  Eigen::VectorXd lo(d + 2), hi(d + 2);
  lo.head(d).setConstant(std::log(b.lengthscale_min));
  hi.head(d).setConstant(std::log(b.lengthscale_max));
  lo(d) = std::log(b.signal_min);
  hi(d) = std::log(b.signal_max);
  lo(d + 1) = std::log(b.noise_min);
  hi(d + 1) = std::log(b.noise_max);

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BoxMinimizeOptions minimize;
  minimize.max_iterations = options.max_iterations;
  minimize.relative_function_tolerance = 1e-10;
  minimize.projected_gradient_tolerance = 1e-6;

  for (int o = 0; o < data.num_outputs(); ++o) {
    const Eigen::VectorXd raw = data.outputs().row(o).transpose();
    const double n = static_cast<double>(raw.size());
    const double mean = raw.mean();
    const double var = (raw.array() - mean).square().sum() / (n - 1.0);
    const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    const Eigen::VectorXd targets = (raw.array() - mean) / scale;

    const Objective negative_lml = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
      try {
        const auto lml = log_marginal_likelihood(GpHyperparams::from_log(p), gp.train_inputs_, targets);
        if (grad) *grad = -lml.gradient;
        return -lml.value;
      } catch (const NumericalError&) {
        if (grad) grad->setZero(p.size());
        return std::numeric_limits<double>::infinity();
      }
    };

    GpFitDiagnostics diagnostics;
    Eigen::VectorXd best_params;
    double best_value = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
      Eigen::VectorXd start(d + 2);
      if (r == 0) {
        start.head(d).setConstant(std::log(0.5));
        start(d) = 0.0;
        start(d + 1) = std::log(1e-4);
      } else {
        for (int i = 0; i < d; ++i) start(i) = std::log(0.05) + unit(rng) * (std::log(2.0) - std::log(0.05));
        start(d) = std::log(0.2) + unit(rng) * (std::log(5.0) - std::log(0.2));
        start(d + 1) = std::log(1e-6) + unit(rng) * (std::log(1e-2) - std::log(1e-6));
      }
      start = start.cwiseMax(lo).cwiseMin(hi);
      diagnostics.initial_lml.push_back(-negative_lml(start, nullptr));
      const auto result = minimize_box(negative_lml, start, lo, hi, minimize);
      diagnostics.final_lml.push_back(-result.value);
      if (result.value < best_value) {
        best_value = result.value;
        best_params = result.x;
      }
    }
    if (!std::isfinite(best_value)) {
      std::ostringstream msg;
      msg << "GP fit: no finite log marginal likelihood for output " << o << " over " << options.restarts
          << " restarts (n = " << data.size() << ")";
      throw NumericalError(msg.str());
    }
    auto model = condition(gp.train_inputs_, raw, GpHyperparams::from_log(best_params));
    diagnostics.best_lml = -best_value;
    diagnostics.jitter = model.diagnostics.jitter;
    model.diagnostics = std::move(diagnostics);
    gp.outputs_.push_back(std::move(model));
  }
  return gp;
}

Eigen::MatrixXd GpSurrogate::standardized_mean(int output, const Eigen::MatrixXd& unit_designs) const {
  const auto& m = outputs_[static_cast<std::size_t>(output)];
  return matern52_matrix(unit_designs, train_inputs_, m.hyper) * m.alpha;
}

Eigen::MatrixXd GpSurrogate::standardized_covariance(int output, const Eigen::MatrixXd& unit_a,
                                                     const Eigen::MatrixXd& unit_b) const {
  const auto& m = outputs_[static_cast<std::size_t>(output)];
  const auto lower = m.chol.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd va = lower.solve(matern52_matrix(train_inputs_, unit_a, m.hyper));
  const Eigen::MatrixXd vb = lower.solve(matern52_matrix(train_inputs_, unit_b, m.hyper));
  return matern52_matrix(unit_a, unit_b, m.hyper) - va.transpose() * vb;
}

std::vector<GaussianBelief> GpSurrogate::predict(const DesignPoint& x) const {
  if (x.size() != dim()) throw InputError("predict: design has wrong dimension");
  const Eigen::MatrixXd u = normalize(x);
  std::vector<GaussianBelief> beliefs;
  for (const auto& m : outputs_) {
    const Eigen::VectorXd kx = matern52_matrix(train_inputs_, u, m.hyper).col(0);
    const Eigen::VectorXd v = m.chol.triangularView<Eigen::Lower>().solve(kx);
    const double mean = kx.dot(m.alpha);
    const double var = std::max(m.hyper.signal_variance - v.squaredNorm(), 0.0);
    beliefs.push_back({mean * m.scale + m.mean, var * m.scale * m.scale});
  }
  return beliefs;
}

Eigen::MatrixXd GpSurrogate::posterior_mean(const Eigen::MatrixXd& designs) const {
  const Eigen::MatrixXd u = normalize(designs);
  Eigen::MatrixXd mean(num_outputs(), designs.cols());
  for (int o = 0; o < num_outputs(); ++o) {
    const auto& m = outputs_[static_cast<std::size_t>(o)];
    mean.row(o) = (standardized_mean(o, u).array() * m.scale + m.mean).transpose();
  }
  return mean;
}

Eigen::MatrixXd GpSurrogate::posterior_covariance(int output, const Eigen::MatrixXd& a,
                                                  const Eigen::MatrixXd& b) const {
  const auto& m = outputs_[static_cast<std::size_t>(output)];
  return standardized_covariance(output, normalize(a), normalize(b)) * (m.scale * m.scale);
}

std::vector<Eigen::MatrixXd> GpSurrogate::sample_posterior(const Eigen::MatrixXd& designs, int count,
                                                           std::uint64_t seed) const {
  if (designs.cols() < 1) throw InputError("sample_posterior needs at least one design");
  if (designs.rows() != dim()) throw InputError("sample_posterior: designs have wrong dimension");
  const Eigen::Index m = designs.cols();
  std::vector<Eigen::MatrixXd> draws(static_cast<std::size_t>(count), Eigen::MatrixXd(m, num_outputs()));
  const Eigen::MatrixXd mean = posterior_mean(designs);
  Rng rng(seed);
  for (int o = 0; o < num_outputs(); ++o) {
    const Eigen::MatrixXd cov = posterior_covariance(o, designs, designs);
    const auto [chol, jitter] = jittered_cholesky(cov, "sample_posterior");
    const Eigen::MatrixXd z = standard_normal_matrix(m, count, rng);
    const Eigen::MatrixXd f = (chol * z).colwise() + mean.row(o).transpose();
    for (int s = 0; s < count; ++s) draws[static_cast<std::size_t>(s)].col(o) = f.col(s);
  }
  return draws;
}

AnchoredPosteriorSampler::AnchoredPosteriorSampler(const GpSurrogate& gp, const Eigen::MatrixXd& anchors,
                                                   int num_samples, std::uint64_t seed)
    : gp_(&gp), num_samples_(num_samples) {
  if (num_samples < 1) throw InputError("posterior sample count must be positive");
  if (anchors.cols() < 1) throw InputError("anchored sampler needs at least one anchor");
  const Eigen::MatrixXd unit = gp.normalize(anchors);
  order_.resize(static_cast<std::size_t>(unit.cols()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  std::sort(order_.begin(), order_.end(),
            [&](Eigen::Index a, Eigen::Index b) { return lexicographic_less(unit, a, b); });
  anchors_unit_.resize(unit.rows(), unit.cols());
  for (std::size_t i = 0; i < order_.size(); ++i) anchors_unit_.col(static_cast<Eigen::Index>(i)) = unit.col(order_[i]);

  const Eigen::Index n = anchors_unit_.cols();
  Rng rng(seed);
  for (int o = 0; o < gp.num_outputs(); ++o) {
    const Eigen::MatrixXd cov = gp.standardized_covariance(o, anchors_unit_, anchors_unit_);
    auto [chol, jitter] = jittered_cholesky(cov, "qNEIUU anchor posterior");
    const auto& h = gp.hyperparams(o);
    train_solve_.push_back(
        gp.cholesky(o).triangularView<Eigen::Lower>().solve(matern52_matrix(gp.train_inputs(), anchors_unit_, h)));
    Eigen::MatrixXd z = standard_normal_matrix(n, num_samples, rng);
    Eigen::VectorXd zc = standard_normal_matrix(num_samples, 1, rng).col(0);
    const Eigen::VectorXd mean = gp.standardized_mean(o, anchors_unit_);
    anchor_draws_.push_back((chol * z).colwise() + mean);
    chol_anchor_.push_back(std::move(chol));
    base_anchor_.push_back(std::move(z));
    base_candidate_.push_back(std::move(zc));
    jitter_.push_back(jitter);
  }
}

Eigen::MatrixXd AnchoredPosteriorSampler::anchor_draw(int s) const {
  const int k = gp_->num_outputs();
  Eigen::MatrixXd out(k, num_anchors());
  for (int o = 0; o < k; ++o) {
    const double scale = gp_->output_scale(o), shift = gp_->output_mean(o);
    const auto& draws = anchor_draws_[static_cast<std::size_t>(o)];
    for (std::size_t i = 0; i < order_.size(); ++i)
      out(o, order_[i]) = draws(static_cast<Eigen::Index>(i), s) * scale + shift;
  }
  return out;
}

Eigen::MatrixXd AnchoredPosteriorSampler::candidate_draws(const DesignPoint& x) const {
  const int k = gp_->num_outputs();
  const Eigen::MatrixXd u = gp_->normalize(x);
  Eigen::MatrixXd out(k, num_samples_);
  for (int o = 0; o < k; ++o) {
    const auto& h = gp_->hyperparams(o);
    const std::size_t so = static_cast<std::size_t>(o);
    const Eigen::VectorXd kx = matern52_matrix(gp_->train_inputs(), u, h).col(0);
    const Eigen::VectorXd v = gp_->cholesky(o).triangularView<Eigen::Lower>().solve(kx);
    const double mean = kx.dot(gp_->alpha(o));
    const Eigen::VectorXd cross =
        matern52_matrix(anchors_unit_, u, h).col(0) - train_solve_[so].transpose() * v;
    const double prior_var = h.signal_variance - v.squaredNorm();
    const Eigen::VectorXd w = chol_anchor_[so].triangularView<Eigen::Lower>().solve(cross);
    const double cond_var = std::max(prior_var + jitter_[so] - w.squaredNorm(), 0.0);
    Eigen::VectorXd draws = (base_anchor_[so].transpose() * w).array() + mean;
    draws += std::sqrt(cond_var) * base_candidate_[so];
    out.row(o) = (draws.array() * gp_->output_scale(o) + gp_->output_mean(o)).transpose();
  }
  return out;
}

}  // namespace bope
