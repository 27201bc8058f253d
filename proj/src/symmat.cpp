#include "spdfuse/symmat.hpp"

#include "spdfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace spdfuse {

namespace {

constexpr int kMaxSweeps = 100;

void require_finite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, "matrix has NaN or infinite entries");
}

inline void rotate(Eigen::MatrixXd& a, Eigen::Index i, Eigen::Index j, Eigen::Index k,
                   Eigen::Index l, double s, double tau) {
  const double g = a(i, j);
  const double h = a(k, l);
  a(i, j) = g - s * (h + g * tau);
  a(k, l) = h + s * (g - h * tau);
}

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& entries) {
  if (entries.rows() != entries.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square");
  }
  require_finite(entries);
  m_ = 0.5 * (entries + entries.transpose());
}

SymMatrix SymMatrix::zero(std::size_t n) {
  const auto k = static_cast<Eigen::Index>(n);
  return SymMatrix(Eigen::MatrixXd::Zero(k, k));
}

SymMatrix SymMatrix::identity(std::size_t n) {
  const auto k = static_cast<Eigen::Index>(n);
  return SymMatrix(Eigen::MatrixXd::Identity(k, k));
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& values) {
  return SymMatrix(Eigen::MatrixXd(values.asDiagonal()));
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  if (a.n() != b.n()) throw Error(ErrorCode::DimensionMismatch, "sum of differently sized matrices");
  return SymMatrix(a.matrix() + b.matrix());
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  if (a.n() != b.n()) {
    throw Error(ErrorCode::DimensionMismatch, "difference of differently sized matrices");
  }
  return SymMatrix(a.matrix() - b.matrix());
}

SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.matrix()); }

SymMatrix congruence(const SymMatrix& a, const Eigen::MatrixXd& b) {
  if (b.cols() != static_cast<Eigen::Index>(a.n())) {
    throw Error(ErrorCode::DimensionMismatch, "congruence factor has wrong column count");
  }
  return SymMatrix(b * a.matrix() * b.transpose());
}

EigenPair eig_sym(const SymMatrix& input) {
  const Eigen::Index n = static_cast<Eigen::Index>(input.n());
  Eigen::MatrixXd a = input.matrix();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d = a.diagonal();
  Eigen::VectorXd b = d;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);

  bool converged = n <= 1;
  for (int sweep = 1; sweep <= kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n - 1; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    if (off == 0.0) {
      converged = true;
      break;
    }
    const double threshold = sweep < 4 ? 0.2 * off / static_cast<double>(n * n) : 0.0;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double g = 100.0 * std::abs(a(p, q));
        if (sweep > 4 && std::abs(d(p)) + g == std::abs(d(p)) &&
            std::abs(d(q)) + g == std::abs(d(q))) {
          a(p, q) = 0.0;
          continue;
        }
        if (std::abs(a(p, q)) <= threshold) continue;

        double h = d(q) - d(p);
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = a(p, q) / h;
        } else {
          const double theta = 0.5 * h / a(p, q);
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        h = t * a(p, q);
        z(p) -= h;
        z(q) += h;
        d(p) -= h;
        d(q) += h;
        a(p, q) = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) rotate(a, j, p, j, q, s, tau);
        for (Eigen::Index j = p + 1; j < q; ++j) rotate(a, p, j, j, q, s, tau);
        for (Eigen::Index j = q + 1; j < n; ++j) rotate(a, p, j, q, j, s, tau);
        for (Eigen::Index j = 0; j < n; ++j) rotate(v, j, p, j, q, s, tau);
      }
    }
    b += z;
    d = b;
    z.setZero();
  }
  if (!converged) {
    throw Error(ErrorCode::NoConvergence, "Jacobi eigensolver exceeded 100 sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return d(i) < d(j); });

  EigenPair out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = d(order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

double MatFn::operator()(double x) const {
  switch (kind) {
    case Kind::Log: return std::log(x);
    case Kind::Exp: return std::exp(x);
    case Kind::Sqrt: return std::sqrt(x);
    case Kind::InvSqrt: return 1.0 / std::sqrt(x);
    case Kind::Power: return std::pow(x, exponent);
  }
  return x;
}

SymMatrix mat_fn(const EigenPair& eig, MatFn f) {
  if (f.needs_positive() && eig.values.size() > 0 && eig.values(0) <= 0.0) {
    throw NotPositiveDefinite(eig.values(0), "matrix function requires a positive spectrum");
  }
  const Eigen::VectorXd mapped = eig.values.unaryExpr([&](double x) { return f(x); });
  return SymMatrix(eig.vectors * mapped.asDiagonal() * eig.vectors.transpose());
}

SymMatrix mat_fn(const SymMatrix& a, MatFn f) { return mat_fn(eig_sym(a), f); }

double frobenius(const SymMatrix& a) {
  require_finite(a.matrix());
  return a.matrix().norm();
}

}  // namespace spdfuse
