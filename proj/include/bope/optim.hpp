#ifndef BOPE_OPTIM_HPP
#define BOPE_OPTIM_HPP

#include <functional>

#include <Eigen/Dense>

namespace bope {

/// Objective for minimization. Writes the gradient when `grad` is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoxMinimizeOptions {
  int max_iterations = 100;
  int history = 10;
  double projected_gradient_tolerance = 1e-8;
  double relative_function_tolerance = 1e-12;
  int max_line_search_steps = 30;
};

struct BoxMinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Projected limited-memory BFGS on the box [lower, upper]. Variables sitting on
/// a bound with the gradient pointing outward are held fixed for the step;
/// the line search backtracks along the projected path with an Armijo test.
/// The returned value never exceeds the value at the (projected) start point.
BoxMinimizeResult minimize_box(const Objective& objective, Eigen::VectorXd x0,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                               const BoxMinimizeOptions& options = {});

/// Wraps a value-only function with a finite-difference gradient. Central
/// differences in the interior, one-sided next to a bound. `relative_step`
/// scales with the box width per coordinate.
Objective with_numeric_gradient(std::function<double(const Eigen::VectorXd&)> f,
                                Eigen::VectorXd lower, Eigen::VectorXd upper,
                                double relative_step = 1e-6);

}  // namespace bope

#endif  // BOPE_OPTIM_HPP
