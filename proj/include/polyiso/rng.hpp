#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace polyiso {

/// Seeded RNG wrapper. All randomness in the library flows through this so
/// that runs are reproducible from a single seed. Draws are built from the
/// raw mt19937_64 output stream only (no distribution objects), which keeps
/// the stream identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Derive an independent stream, e.g. one per stage or per round.
  Rng fork(std::uint64_t salt) const {
    return Rng(seed_ ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
  }

  std::uint64_t bits() { return eng_(); }

  /// Uniform in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(bits() % n); }

  /// Uniform in [0, 1).
  double real() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  /// Uniform in [-1, 1].
  double sym() { return 2.0 * real() - 1.0; }

  double gauss() {
    double u1 = 1.0 - real();
    double u2 = real();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Uniform unit vector in R^n.
  Eigen::VectorXd unit(int n) {
    Eigen::VectorXd v(n);
    do {
      for (int i = 0; i < n; ++i) v[i] = gauss();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

  /// Uniform barycentric weights (flat Dirichlet) of length n.
  Eigen::VectorXd barycentric(int n) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = -std::log(1.0 - real());
    return w / w.sum();
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace polyiso
