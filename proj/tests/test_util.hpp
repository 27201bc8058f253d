#pragma once

#include "spdfuse/spdrep.hpp"
#include "spdfuse/symmat.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace spdfuse::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  std::mt19937_64& engine() { return gen_; }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

  SymMatrix symmetric(std::size_t n, double lo = -10.0, double hi = 10.0) {
    const auto k = static_cast<Eigen::Index>(n);
    return SymMatrix(matrix(k, k, lo, hi));
  }

  /// Random SPD with eigenvalues in [lo, hi] and a random orthogonal basis.
  SpdMatrix spd(std::size_t n, double lo = 0.2, double hi = 5.0) {
    const auto k = static_cast<Eigen::Index>(n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(matrix(k, k));
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd ev(k);
    for (Eigen::Index i = 0; i < k; ++i) ev(i) = uniform(lo, hi);
    return SpdMatrix(SymMatrix(q * ev.asDiagonal() * q.transpose()));
  }

  /// Well-conditioned invertible matrix.
  Eigen::MatrixXd invertible(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd a = matrix(k, k);
    a.diagonal().array() += 3.0;
    return a;
  }

 private:
  std::mt19937_64 gen_;
};

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace spdfuse::testing
