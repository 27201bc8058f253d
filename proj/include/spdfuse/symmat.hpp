#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace spdfuse {

/// Dense real symmetric matrix. Every construction path symmetrizes the
/// input as (A + A^T) / 2 and rejects non-finite entries, so
/// `(*this)(i, j) == (*this)(j, i)` holds bit-exactly.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& entries);

  static SymMatrix zero(std::size_t n);
  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(const Eigen::VectorXd& values);

  std::size_t n() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  double trace() const { return m_.trace(); }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.m_ == b.m_; }

 private:
  Eigen::MatrixXd m_;
};

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator*(double s, const SymMatrix& a);

/// B * A * B^T, re-symmetrized.
SymMatrix congruence(const SymMatrix& a, const Eigen::MatrixXd& b);

struct EigenPair {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns are eigenvectors
};

/// Cyclic Jacobi eigensolver with a fixed row-major sweep order. Throws
/// NoConvergence after 100 sweeps.
EigenPair eig_sym(const SymMatrix& a);

/// Scalar function applied through the spectrum.
struct MatFn {
  enum class Kind { Log, Exp, Sqrt, InvSqrt, Power };
  Kind kind = Kind::Log;
  double exponent = 1.0;

  static MatFn log() { return {Kind::Log, 1.0}; }
  static MatFn exp() { return {Kind::Exp, 1.0}; }
  static MatFn sqrt() { return {Kind::Sqrt, 0.5}; }
  static MatFn inv_sqrt() { return {Kind::InvSqrt, -0.5}; }
  static MatFn power(double p) { return {Kind::Power, p}; }

  bool needs_positive() const noexcept { return kind != Kind::Exp; }
  double operator()(double x) const;
};

/// V * diag(f(lambda)) * V^T. Throws NotPositiveDefinite when f needs a
/// positive spectrum and the smallest eigenvalue is <= 0.
SymMatrix mat_fn(const SymMatrix& a, MatFn f);
SymMatrix mat_fn(const EigenPair& eig, MatFn f);

double frobenius(const SymMatrix& a);

}  // namespace spdfuse
