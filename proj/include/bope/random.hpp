#ifndef BOPE_RANDOM_HPP
#define BOPE_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>
#include <boost/random/sobol.hpp>

namespace bope {

using Rng = std::mt19937_64;

/// Derives the seed of a named sub-stream from a master seed. The mapping is
/// a fixed hash, so any component can be replayed from the master seed alone.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

/// Standard normal density and distribution function.
double normal_pdf(double x);
double normal_cdf(double x);

/// Fills a matrix with iid N(0, 1) draws, column by column.
Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Sobol low-discrepancy points in [0,1)^dim with a random digital shift.
/// The shift keeps the net structure while moving the first point off the
/// origin corner.
class SobolSampler {
 public:
  SobolSampler(unsigned dim, std::uint64_t seed);

  unsigned dim() const { return dim_; }

  // Next point as a column vector.
  Eigen::VectorXd next();

  // `count` points, one per column.
  Eigen::MatrixXd draw(Eigen::Index count);

 private:
  unsigned dim_;
  boost::random::sobol engine_;
  std::vector<std::uint64_t> shift_;
  bool origin_pending_ = true;  // the engine skips the all-zero point; emit it first
};

/// Maps unit-cube columns onto the box [lower, upper].
Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& unit, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper);

}  // namespace bope

#endif  // BOPE_RANDOM_HPP
