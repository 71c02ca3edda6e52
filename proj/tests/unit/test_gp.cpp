#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bope/errors.hpp"
#include "bope/gp.hpp"
#include "bope/loop.hpp"
#include "bope/random.hpp"

using namespace bope;

namespace {

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

Eigen::VectorXd central_lml_gradient(const GpHyperparams& h, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd p = h.to_log();
  Eigen::VectorXd g(p.size());
  const double step = 1e-5;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Eigen::VectorXd up = p, down = p;
    up(i) += step;
    down(i) -= step;
    g(i) = (log_marginal_likelihood(GpHyperparams::from_log(up), x, y).value -
            log_marginal_likelihood(GpHyperparams::from_log(down), x, y).value) /
           (2 * step);
  }
  return g;
}

ObservationSet dtlz2_data(int n, std::uint64_t seed) {
  return initial_observations(make_problem("DTLZ2"), n, seed);
}

}  // namespace

TEST_CASE("observation set rejects duplicates and bad shapes") {
  ObservationSet data(2, 1);
  data.add(Eigen::Vector2d(0.1, 0.2), Eigen::VectorXd::Constant(1, 1.0));
  CHECK_THROWS_AS(data.add(Eigen::Vector2d(0.1, 0.2 + 1e-13), Eigen::VectorXd::Constant(1, 2.0)), InputError);
  CHECK_THROWS_AS(data.add(Eigen::Vector3d::Zero(), Eigen::VectorXd::Constant(1, 2.0)), InputError);
  CHECK_THROWS_AS(data.add(Eigen::Vector2d(0.5, 0.5), Eigen::VectorXd::Constant(1, NAN)), InputError);
  CHECK(data.size() == 1);
  CHECK(data.contains(Eigen::Vector2d(0.1, 0.2)));
}

TEST_CASE("Matérn kernel closed form") {
  GpHyperparams h;
  h.lengthscales = Eigen::Vector2d(0.5, 2.0);
  h.signal_variance = 1.7;
  const Eigen::Vector2d a(0.1, 0.3), b(0.4, -0.2);
  const double r = std::sqrt(std::pow(0.3 / 0.5, 2) + std::pow(0.5 / 2.0, 2));
  const double s5 = std::sqrt(5.0);
  CHECK(matern52(a, b, h) == doctest::Approx(1.7 * (1 + s5 * r + 5 * r * r / 3) * std::exp(-s5 * r)));
  CHECK(matern52(a, a, h) == doctest::Approx(1.7));
}

TEST_CASE("single point likelihood is a univariate normal density") {
  GpHyperparams h;
  h.lengthscales = Eigen::VectorXd::Constant(1, 0.3);
  h.signal_variance = 0.8;
  h.noise_variance = 0.05;
  const double y = 0.7, v = 0.85;
  const auto lml = log_marginal_likelihood(h, Eigen::MatrixXd::Constant(1, 1, 0.2), Eigen::VectorXd::Constant(1, y));
  CHECK(lml.value == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * v) - y * y / (2 * v)));
}

TEST_CASE("likelihood gradient matches central differences") {
  Rng rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < 20; ++c) {
    const int d = 1 + c % 3, n = 2 + (c * 7) % 40;
    GpHyperparams h;
    h.lengthscales.resize(d);
    for (int i = 0; i < d; ++i) h.lengthscales(i) = 0.1 + unit(rng);
    h.signal_variance = 0.3 + 2 * unit(rng);
    h.noise_variance = 1e-3 + 0.1 * unit(rng);
    Eigen::MatrixXd x(d, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unit(rng);
    Eigen::VectorXd y = standard_normal_matrix(n, 1, rng).col(0);
    const auto lml = log_marginal_likelihood(h, x, y);
    CAPTURE(c);
    CHECK(relative_error(lml.gradient, central_lml_gradient(h, x, y)) < 1e-4);
  }
}

TEST_CASE("more noise helps pure-noise data when the signal sits at its floor") {
  Rng rng(8);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 20).cwiseAbs();
  const Eigen::VectorXd y = standard_normal_matrix(20, 1, rng).col(0);
  GpHyperparams h;
  h.lengthscales = Eigen::Vector2d(0.2, 0.2);
  h.signal_variance = 1e-3;
  h.noise_variance = 0.1;
  const double base = log_marginal_likelihood(h, x, y).value;
  h.noise_variance = 0.2;
  CHECK(log_marginal_likelihood(h, x, y).value > base);
}

TEST_CASE("fit reaches at least every restart's starting likelihood") {
  const auto data = dtlz2_data(16, 1);
  const auto gp = GpSurrogate::fit(data, make_problem("DTLZ2").bounds(), 5);
  for (int o = 0; o < gp.num_outputs(); ++o) {
    const auto& diag = gp.diagnostics(o);
    CHECK(diag.initial_lml.size() >= 5);
    for (double v : diag.initial_lml) CHECK(diag.best_lml >= v - 1e-9);
  }
}

TEST_CASE("two points interpolate and a constant column predicts the constant") {
  const auto problem = make_problem("DTLZ2");
  ObservationSet data(3, 2);
  data.add(Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector2d(1.0, 5.0));
  data.add(Eigen::Vector3d(0.8, 0.6, 0.4), Eigen::Vector2d(2.0, 5.0));
  const auto gp = GpSurrogate::fit(data, problem.bounds(), 1);
  const auto p0 = gp.predict(data.design(0));
  const double noise_sd = std::sqrt(gp.hyperparams(0).noise_variance) * gp.output_scale(0);
  CHECK(std::abs(p0[0].mean - 1.0) <= 3 * noise_sd + 1e-3);
  CHECK(p0[1].mean == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(gp.predict(Eigen::Vector3d(0.5, 0.5, 0.5))[1].mean == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("prediction at a training input with tiny noise recovers the observation") {
  const auto data = dtlz2_data(12, 2);
  GpHyperparams h;
  h.lengthscales = Eigen::Vector3d::Constant(0.4);
  h.signal_variance = 1.0;
  h.noise_variance = 1e-8;
  const auto gp = GpSurrogate::with_hyperparams(data, make_problem("DTLZ2").bounds(), {h, h});
  for (int i = 0; i < data.size(); ++i) {
    const auto p = gp.predict(data.design(i));
    for (int o = 0; o < 2; ++o)
      CHECK(p[static_cast<std::size_t>(o)].mean == doctest::Approx(data.outputs()(o, i)).epsilon(1e-4));
  }
}

TEST_CASE("far from data the posterior reverts to the prior") {
  ObservationSet data(1, 1);
  data.add(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0));
  data.add(Eigen::VectorXd::Constant(1, 0.01), Eigen::VectorXd::Constant(1, 3.0));
  GpHyperparams h;
  h.lengthscales = Eigen::VectorXd::Constant(1, 1e-3);
  h.signal_variance = 1.5;
  h.noise_variance = 1e-6;
  const Box box{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  const auto gp = GpSurrogate::with_hyperparams(data, box, {h});
  const auto p = gp.predict(Eigen::VectorXd::Constant(1, 0.9))[0];
  // column mean 2, sample variance 2 so the standardization scale is √2
  CHECK(p.mean == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(p.variance == doctest::Approx(1.5 * 2.0).epsilon(1e-9));
}

TEST_CASE("variance between two close points is below the variance far away") {
  ObservationSet data(1, 1);
  data.add(Eigen::VectorXd::Constant(1, 0.2), Eigen::VectorXd::Constant(1, 1.0));
  data.add(Eigen::VectorXd::Constant(1, 0.25), Eigen::VectorXd::Constant(1, 2.0));
  GpHyperparams h;
  h.lengthscales = Eigen::VectorXd::Constant(1, 0.2);
  h.noise_variance = 1e-6;
  const Box box{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  const auto gp = GpSurrogate::with_hyperparams(data, box, {h});
  CHECK(gp.predict(Eigen::VectorXd::Constant(1, 0.225))[0].variance <
        gp.predict(Eigen::VectorXd::Constant(1, 0.9))[0].variance);
}

TEST_CASE("predictive variance is non-negative everywhere") {
  const auto data = dtlz2_data(16, 4);
  const auto gp = GpSurrogate::fit(data, make_problem("DTLZ2").bounds(), 2);
  SobolSampler s(3, 9);
  for (int i = 0; i < 10000; ++i) {
    const auto p = gp.predict(s.next());
    CHECK(p[0].variance >= 0.0);
    CHECK(p[1].variance >= 0.0);
  }
}

TEST_CASE("posterior samples agree with the predictive moments") {
  const auto data = dtlz2_data(10, 5);
  const auto gp = GpSurrogate::fit(data, make_problem("DTLZ2").bounds(), 3);
  Eigen::MatrixXd x(3, 3);
  x << 0.1, 0.5, 0.9, 0.7, 0.2, 0.4, 0.3, 0.3, 0.8;
  const int n = 20000;
  const auto draws = gp.sample_posterior(x, n, 11);
  for (int j = 0; j < 3; ++j) {
    const auto p = gp.predict(x.col(j));
    for (int o = 0; o < 2; ++o) {
      double mean = 0.0;
      for (const auto& d : draws) mean += d(j, o);
      mean /= n;
      const double se = std::sqrt(p[static_cast<std::size_t>(o)].variance / n);
      CHECK(std::abs(mean - p[static_cast<std::size_t>(o)].mean) < 3 * se + 1e-9);
    }
  }

  // Frobenius error of the empirical covariance shrinks with more draws.
  const Eigen::MatrixXd exact = gp.posterior_covariance(0, x, x);
  auto cov_error = [&](int count) {
    const auto s = gp.sample_posterior(x, count, 21);
    Eigen::MatrixXd f(3, count);
    for (int i = 0; i < count; ++i) f.col(i) = s[static_cast<std::size_t>(i)].col(0);
    const Eigen::MatrixXd c = f.colwise() - f.rowwise().mean();
    return ((c * c.transpose()) / (count - 1) - exact).norm();
  };
  CHECK(cov_error(40000) < cov_error(200));
}

TEST_CASE("sampling is repeatable and collapses at noiseless training points") {
  const auto data = dtlz2_data(8, 6);
  GpHyperparams h;
  h.lengthscales = Eigen::Vector3d::Constant(0.5);
  h.noise_variance = 1e-8;
  const auto gp = GpSurrogate::with_hyperparams(data, make_problem("DTLZ2").bounds(), {h, h});
  const Eigen::MatrixXd x = data.design(3);
  CHECK(gp.sample_posterior(x, 1, 4)[0] == gp.sample_posterior(x, 1, 4)[0]);
  for (const auto& d : gp.sample_posterior(x, 50, 5))
    for (int o = 0; o < 2; ++o) CHECK(d(0, o) == doctest::Approx(data.outputs()(o, 3)).epsilon(1e-4));
}

TEST_CASE("anchored sampler equals a joint Cholesky draw with anchors first") {
  const auto problem = make_problem("DTLZ2");
  const auto data = dtlz2_data(12, 7);
  const auto gp = GpSurrogate::fit(data, problem.bounds(), 4);
  const AnchoredPosteriorSampler sampler(gp, data.designs(), 16, 99);
  const Eigen::Vector3d x(0.33, 0.61, 0.12);
  const Eigen::MatrixXd cand = sampler.candidate_draws(x);
  const int n = data.size();

  for (int o = 0; o < gp.num_outputs(); ++o) {
    Eigen::MatrixXd joint(3, n + 1);
    for (int i = 0; i < n; ++i) joint.col(i) = data.design(static_cast<int>(sampler.anchor_order()[i]));
    joint.col(n) = x;
    const Eigen::MatrixXd unit = gp.normalize(joint);
    Eigen::MatrixXd cov = gp.standardized_covariance(o, unit, unit);
    cov.diagonal().array() += sampler.jitter(o);
    const Eigen::MatrixXd l = cov.llt().matrixL();
    const Eigen::VectorXd mean = gp.standardized_mean(o, unit);
    for (int s = 0; s < sampler.num_samples(); ++s) {
      Eigen::VectorXd z(n + 1);
      z.head(n) = sampler.anchor_base_samples(o).col(s);
      z(n) = sampler.candidate_base_samples(o)(s);
      const Eigen::VectorXd f = (l * z + mean) * gp.output_scale(o) + Eigen::VectorXd::Constant(n + 1, gp.output_mean(o));
      CHECK(cand(o, s) == doctest::Approx(f(n)).epsilon(1e-7));
      const Eigen::MatrixXd anchors = sampler.anchor_draw(s);
      for (int i = 0; i < n; ++i)
        CHECK(anchors(o, sampler.anchor_order()[i]) == doctest::Approx(f(i)).epsilon(1e-7));
    }
  }
}

TEST_CASE("anchored draws follow design points, not storage order") {
  const auto problem = make_problem("DTLZ2");
  const auto data = dtlz2_data(10, 8);
  const auto gp = GpSurrogate::fit(data, problem.bounds(), 4);
  Eigen::MatrixXd reversed = data.designs().rowwise().reverse();
  const AnchoredPosteriorSampler a(gp, data.designs(), 8, 3), b(gp, reversed, 8, 3);
  const Eigen::Vector3d x(0.5, 0.1, 0.9);
  CHECK((a.candidate_draws(x) - b.candidate_draws(x)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.anchor_draw(2) - b.anchor_draw(2).rowwise().reverse()).cwiseAbs().maxCoeff() < 1e-12);
}
