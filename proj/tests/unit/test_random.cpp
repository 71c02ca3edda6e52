#include <doctest.h>

#include <cmath>
#include <set>

#include "bope/random.hpp"

using namespace bope;

namespace {

// Composite Simpson integration of the standard normal density from −12.
double cdf_oracle(double x) {
  const int n = 20000;
  const double a = -12.0, h = (x - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = a + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * std::exp(-0.5 * t * t);
  }
  return s * h / 3.0 / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_CASE("derived seeds are stable and separate streams") {
  CHECK(derive_seed(1, "gp", 3) == derive_seed(1, "gp", 3));
  CHECK(derive_seed(1, "gp", 3) != derive_seed(1, "gp", 4));
  CHECK(derive_seed(1, "gp", 3) != derive_seed(2, "gp", 3));
  CHECK(derive_seed(1, "gp", 3) != derive_seed(1, "dm", 3));
}

TEST_CASE("normal density and distribution match quadrature") {
  CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-15));
  for (double x : {-6.0, -2.5, -1.0, -0.1, 0.0, 0.3, 1.0, 2.0, 4.0}) {
    CHECK(normal_cdf(x) == doctest::Approx(cdf_oracle(x)).epsilon(1e-9));
    CHECK(normal_cdf(x) + normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("standard normal matrix has unit moments") {
  Rng rng(5);
  const Eigen::MatrixXd z = standard_normal_matrix(200, 500, rng);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("shifted Sobol points stratify every coordinate") {
  SobolSampler sobol(3, 11);
  const Eigen::MatrixXd pts = sobol.draw(256);
  CHECK(pts.minCoeff() >= 0.0);
  CHECK(pts.maxCoeff() < 1.0);
  for (int d = 0; d < 3; ++d) {
    std::set<int> cells;
    for (int i = 0; i < 256; ++i) cells.insert(static_cast<int>(std::floor(pts(d, i) * 256)));
    CHECK(cells.size() == 256);
  }
}

TEST_CASE("Sobol draws are reproducible per seed") {
  SobolSampler a(4, 3), b(4, 3), c(4, 4);
  const Eigen::MatrixXd pa = a.draw(32), pb = b.draw(32), pc = c.draw(32);
  CHECK(pa == pb);
  CHECK(pa != pc);
  SobolSampler d(4, 3);
  CHECK(d.next() == pa.col(0));
}

TEST_CASE("unit points map onto the box") {
  Eigen::MatrixXd unit(2, 3);
  unit << 0.0, 0.5, 1.0, 0.25, 0.5, 0.75;
  Eigen::VectorXd lo(2), hi(2);
  lo << -3, 1;
  hi << 3, 5;
  const Eigen::MatrixXd x = scale_to_box(unit, lo, hi);
  CHECK(x(0, 0) == -3.0);
  CHECK(x(0, 2) == 3.0);
  CHECK(x(1, 1) == 3.0);
}
