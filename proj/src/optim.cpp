#include "bope/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace bope {

namespace {

struct CurvaturePair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

Eigen::VectorXd two_loop(const std::deque<CurvaturePair>& memory, const Eigen::VectorXd& grad) {
  Eigen::VectorXd q = grad;
  std::vector<double> alpha(memory.size());
  for (std::size_t i = memory.size(); i-- > 0;) {
    alpha[i] = memory[i].rho * memory[i].s.dot(q);
    q -= alpha[i] * memory[i].y;
  }
  double gamma = 1.0;
  if (!memory.empty()) {
    const auto& newest = memory.back();
    gamma = newest.s.dot(newest.y) / newest.y.squaredNorm();
  } else {
    const double scale = grad.lpNorm<Eigen::Infinity>();
    if (scale > 1.0) gamma = 1.0 / scale;
  }
  Eigen::VectorXd r = gamma * q;
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const double beta = memory[i].rho * memory[i].y.dot(r);
    r += memory[i].s * (alpha[i] - beta);
  }
  return r;
}

}  // namespace

BoxMinimizeResult minimize_box(const Objective& objective, Eigen::VectorXd x0,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                               const BoxMinimizeOptions& options) {
  auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v.cwiseMax(lower).cwiseMin(upper);
  };

  BoxMinimizeResult result;
  Eigen::VectorXd x = project(x0);
  Eigen::VectorXd g(x.size());
  double f = objective(x, &g);
  result.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite()) {
    result.x = x;
    result.value = f;
    result.line_search_failed = true;
    return result;
  }

  std::deque<CurvaturePair> memory;
  bool retried = false;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const Eigen::VectorXd projected_step = project(x - g) - x;
    if (projected_step.lpNorm<Eigen::Infinity>() < options.projected_gradient_tolerance) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd free_grad = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const bool pinned_low = x(i) <= lower(i) && g(i) > 0.0;
      const bool pinned_high = x(i) >= upper(i) && g(i) < 0.0;
      if (pinned_low || pinned_high) free_grad(i) = 0.0;
    }

    Eigen::VectorXd direction = -two_loop(memory, free_grad);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (free_grad(i) == 0.0) direction(i) = 0.0;
    if (direction.dot(g) >= 0.0 || !direction.allFinite()) {
      memory.clear();
      direction = -two_loop(memory, free_grad);
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, g_new(x.size());
    double f_new = f;
    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      x_new = project(x + step * direction);
      if ((x_new - x).lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = objective(x_new, &g_new);
      ++result.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }

    if (!accepted) {
      if (!memory.empty() && !retried) {
        memory.clear();
        retried = true;
        continue;
      }
      result.line_search_failed = true;
      break;
    }
    retried = false;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      memory.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
    }

    const bool stalled = std::abs(f - f_new) <= options.relative_function_tolerance * std::max(1.0, std::abs(f));
    x = std::move(x_new);
    f = f_new;
    g = g_new;
    if (stalled) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.value = f;
  return result;
}

Objective with_numeric_gradient(std::function<double(const Eigen::VectorXd&)> f, Eigen::VectorXd lower,
                                Eigen::VectorXd upper, double relative_step) {
  return [f = std::move(f), lower = std::move(lower), upper = std::move(upper), relative_step](
             const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double fx = f(x);
    if (grad == nullptr) return fx;
    grad->resize(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = relative_step * std::max(upper(i) - lower(i), 1e-12);
      const double xi = x(i);
      if (xi + h > upper(i)) {
        probe(i) = xi - h;
        (*grad)(i) = (fx - f(probe)) / h;
      } else if (xi - h < lower(i)) {
        probe(i) = xi + h;
        (*grad)(i) = (f(probe) - fx) / h;
      } else {
        probe(i) = xi + h;
        const double up = f(probe);
        probe(i) = xi - h;
        const double down = f(probe);
        (*grad)(i) = (up - down) / (2.0 * h);
      }
      probe(i) = xi;
    }
    return fx;
  };
}

}  // namespace bope
