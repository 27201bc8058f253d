#pragma once

#include "spdfuse/error.hpp"
#include "spdfuse/spdrep.hpp"
#include "spdfuse/symmat.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>

namespace spdfuse {

/// Affine-invariant: ||log(P^{-1/2} Q P^{-1/2})||_F.
/// Log-Euclidean: ||log P - log Q||_F.
enum class Metric { AffineInvariant, LogEuclidean };

Metric parse_metric(const std::string& name);
std::string to_string(Metric m);

/// Upper-triangle vectorization of a symmetric matrix at some reference point.
/// Values are laid out row-major over the upper triangle, off-diagonal
/// entries weighted by sqrt(2), so the Euclidean norm matches the Frobenius
/// norm of the encoded matrix.
struct TangentVector {
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.size()); }

  Eigen::VectorXd values;
  std::string reference;
};

struct MeanConfig {
  int max_iters = 50;
  double tol = 1e-8;
  double step = 1.0;

  void validate() const;
};

/// Karcher iteration did not reach the tolerance. Carries the last iterate.
class MeanNoConvergence : public Error {
 public:
  MeanNoConvergence(SpdMatrix last, double residual, int iterations);
  const SpdMatrix& last_iterate() const noexcept { return last_; }
  double residual() const noexcept { return residual_; }

 private:
  SpdMatrix last_;
  double residual_;
};

std::size_t tangent_dim(std::size_t n);
/// Inverse of tangent_dim; throws DimensionMismatch if `dim` is not triangular.
std::size_t matrix_dim(std::size_t dim);

Eigen::VectorXd vec(const SymMatrix& a);
SymMatrix unvec(const Eigen::VectorXd& v);

double geodesic_distance(const SpdMatrix& pi, const SpdMatrix& pj,
                         Metric metric = Metric::AffineInvariant);

/// Geometric mean minimizing the sum of squared distances. For the
/// affine-invariant metric this runs the Karcher flow starting at the
/// arithmetic mean, halving the step whenever the residual grows; for
/// log-Euclidean it is the closed form exp(mean log).
SpdMatrix geometric_mean(std::span<const SpdMatrix> set, const MeanConfig& cfg = {},
                         Metric metric = Metric::AffineInvariant);

/// Norm of the mean whitened log at `p`: the first-order optimality residual.
double karcher_residual(std::span<const SpdMatrix> set, const SpdMatrix& p);

/// vec(log(Pref^{-1/2} Pi Pref^{-1/2})) under the affine-invariant metric,
/// vec(log Pi - log Pref) under log-Euclidean.
TangentVector tangent_map(const SpdMatrix& pi, const SpdMatrix& pref,
                          Metric metric = Metric::AffineInvariant);

/// Inverse of tangent_map.
SpdMatrix tangent_unmap(const TangentVector& s, const SpdMatrix& pref,
                        Metric metric = Metric::AffineInvariant);

/// Precomputed whitening for mapping many matrices at one reference point.
class TangentSpace {
 public:
  TangentSpace(const SpdMatrix& reference, Metric metric = Metric::AffineInvariant,
               std::string reference_id = {});

  TangentVector map(const SpdMatrix& p) const;
  SpdMatrix unmap(const TangentVector& s) const;
  std::size_t n() const noexcept { return n_; }

 private:
  std::size_t n_;
  Metric metric_;
  std::string id_;
  Eigen::MatrixXd sqrt_;
  Eigen::MatrixXd inv_sqrt_;
  SymMatrix log_ref_;
};

}  // namespace spdfuse
