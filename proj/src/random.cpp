#include "bope/random.hpp"

#include <utility>

#include <cmath>
#include <numbers>

namespace bope {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
  // FNV-1a over the stream label.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) {
  // erfc keeps full relative precision in both tails.
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = normal(rng);
  return z;
}

SobolSampler::SobolSampler(unsigned dim, std::uint64_t seed) : dim_(dim), engine_(dim), shift_(dim) {
  Rng rng(seed);
  for (auto& s : shift_) s = rng();
}

Eigen::VectorXd SobolSampler::next() {
  constexpr double kScale = 1.0 / 18446744073709551616.0;  // 2^-64
  Eigen::VectorXd point(dim_);
  const bool origin = std::exchange(origin_pending_, false);
  for (unsigned i = 0; i < dim_; ++i) {
    const std::uint64_t raw = origin ? 0 : static_cast<std::uint64_t>(engine_());
    const std::uint64_t bits = raw ^ shift_[i];
    // Keep 53 significant bits so the result is strictly below 1.
    point(i) = static_cast<double>(bits >> 11) * (kScale * 2048.0);
  }
  return point;
}

Eigen::MatrixXd SobolSampler::draw(Eigen::Index count) {
  Eigen::MatrixXd points(dim_, count);
  for (Eigen::Index j = 0; j < count; ++j) points.col(j) = next();
  return points;
}

Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& unit, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper) {
  const Eigen::VectorXd width = upper - lower;
  return (unit.array().colwise() * width.array()).colwise() + lower.array();
}

}  // namespace bope
