#include "spdfuse/manifold.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace spdfuse {

namespace {

const double kSqrt2 = std::sqrt(2.0);

void check_same_dim(const SpdMatrix& a, const SpdMatrix& b) {
  if (a.n() != b.n()) {
    std::ostringstream os;
    os << "SPD matrices of dimension " << a.n() << " and " << b.n();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

// P^{1/2} and P^{-1/2} from one eigendecomposition.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sqrt_pair(const SpdMatrix& p) {
  const EigenPair eig = eig_sym(p.sym());
  return {mat_fn(eig, MatFn::sqrt()).matrix(), mat_fn(eig, MatFn::inv_sqrt()).matrix()};
}

SymMatrix whitened_log(const SpdMatrix& p, const Eigen::MatrixXd& inv_sqrt) {
  return mat_fn(congruence(p.sym(), inv_sqrt), MatFn::log());
}

Eigen::MatrixXd mean_whitened_log(std::span<const SpdMatrix> set, const Eigen::MatrixXd& inv_sqrt) {
  const auto n = static_cast<Eigen::Index>(set.front().n());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  for (const SpdMatrix& p : set) acc += whitened_log(p, inv_sqrt).matrix();
  return acc / static_cast<double>(set.size());
}

SpdMatrix arithmetic_mean(std::span<const SpdMatrix> set) {
  Eigen::MatrixXd acc = set.front().matrix();
  for (std::size_t i = 1; i < set.size(); ++i) acc += set[i].matrix();
  return SpdMatrix(SymMatrix(acc / static_cast<double>(set.size())));
}

void check_set(std::span<const SpdMatrix> set) {
  if (set.empty()) throw Error(ErrorCode::EmptySet, "geometric mean of an empty set");
  for (const SpdMatrix& p : set) check_same_dim(set.front(), p);
}

}  // namespace

Metric parse_metric(const std::string& name) {
  if (name == "affine" || name == "affine-invariant") return Metric::AffineInvariant;
  if (name == "log-euclidean") return Metric::LogEuclidean;
  throw Error(ErrorCode::InvalidConfig, "unknown metric '" + name + "'");
}

std::string to_string(Metric m) {
  return m == Metric::AffineInvariant ? "affine" : "log-euclidean";
}

void MeanConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "MeanConfig: max_iters must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "MeanConfig: tol must be > 0");
  if (!(step > 0.0 && step <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "MeanConfig: step must lie in (0, 1]");
  }
}

static std::string no_convergence_message(double residual, int iterations) {
  std::ostringstream os;
  os.precision(6);
  os << "Karcher mean residual " << residual << " after " << iterations << " iterations";
  return os.str();
}

MeanNoConvergence::MeanNoConvergence(SpdMatrix last, double residual, int iterations)
    : Error(ErrorCode::NoConvergence, no_convergence_message(residual, iterations)),
      last_(std::move(last)),
      residual_(residual) {}

std::size_t tangent_dim(std::size_t n) { return n * (n + 1) / 2; }

std::size_t matrix_dim(std::size_t dim) {
  std::size_t n = 0;
  while (tangent_dim(n) < dim) ++n;
  if (tangent_dim(n) != dim) {
    throw Error(ErrorCode::DimensionMismatch, "length is not n(n+1)/2 for any n");
  }
  return n;
}

Eigen::VectorXd vec(const SymMatrix& a) {
  const std::size_t n = a.n();
  Eigen::VectorXd out(static_cast<Eigen::Index>(tangent_dim(n)));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out(k++) = a(i, i);
    for (std::size_t j = i + 1; j < n; ++j) out(k++) = kSqrt2 * a(i, j);
  }
  return out;
}

SymMatrix unvec(const Eigen::VectorXd& v) {
  const auto n = static_cast<Eigen::Index>(matrix_dim(static_cast<std::size_t>(v.size())));
  Eigen::MatrixXd m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = v(k++);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = v(k++) / kSqrt2;
      m(j, i) = m(i, j);
    }
  }
  return SymMatrix(m);
}

double geodesic_distance(const SpdMatrix& pi, const SpdMatrix& pj, Metric metric) {
  check_same_dim(pi, pj);
  if (metric == Metric::LogEuclidean) {
    return (mat_fn(pi.sym(), MatFn::log()).matrix() - mat_fn(pj.sym(), MatFn::log()).matrix())
        .norm();
  }
  const Eigen::MatrixXd w = mat_fn(pi.sym(), MatFn::inv_sqrt()).matrix();
  const EigenPair eig = eig_sym(congruence(pj.sym(), w));
  if (eig.values(0) <= 0.0) throw NotPositiveDefinite(eig.values(0), "whitened matrix");
  return eig.values.array().log().matrix().norm();
}

double karcher_residual(std::span<const SpdMatrix> set, const SpdMatrix& p) {
  check_set(set);
  check_same_dim(set.front(), p);
  return mean_whitened_log(set, sqrt_pair(p).second).norm();
}

SpdMatrix geometric_mean(std::span<const SpdMatrix> set, const MeanConfig& cfg, Metric metric) {
  cfg.validate();
  check_set(set);
  if (set.size() == 1) return set.front();

  if (metric == Metric::LogEuclidean) {
    const auto n = static_cast<Eigen::Index>(set.front().n());
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (const SpdMatrix& p : set) acc += mat_fn(p.sym(), MatFn::log()).matrix();
    return SpdMatrix(mat_fn(SymMatrix(acc / static_cast<double>(set.size())), MatFn::exp()));
  }

  SpdMatrix current = arithmetic_mean(set);
  auto [root, inv_root] = sqrt_pair(current);
  Eigen::MatrixXd direction = mean_whitened_log(set, inv_root);
  double residual = direction.norm();
  double step = cfg.step;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (residual <= cfg.tol) return current;
    const SymMatrix moved =
        congruence(mat_fn(SymMatrix(step * direction), MatFn::exp()), root);
    SpdMatrix candidate(moved);
    auto [c_root, c_inv_root] = sqrt_pair(candidate);
    Eigen::MatrixXd c_direction = mean_whitened_log(set, c_inv_root);
    const double c_residual = c_direction.norm();
    if (c_residual > residual) {
      step *= 0.5;
      continue;
    }
    current = std::move(candidate);
    root = std::move(c_root);
    inv_root = std::move(c_inv_root);
    direction = std::move(c_direction);
    residual = c_residual;
    step = std::min(cfg.step, 2.0 * step);
  }
  if (residual <= cfg.tol) return current;
  throw MeanNoConvergence(current, residual, cfg.max_iters);
}

TangentSpace::TangentSpace(const SpdMatrix& reference, Metric metric, std::string reference_id)
    : n_(reference.n()), metric_(metric), id_(std::move(reference_id)) {
  const EigenPair eig = eig_sym(reference.sym());
  if (metric_ == Metric::AffineInvariant) {
    sqrt_ = mat_fn(eig, MatFn::sqrt()).matrix();
    inv_sqrt_ = mat_fn(eig, MatFn::inv_sqrt()).matrix();
  } else {
    log_ref_ = mat_fn(eig, MatFn::log());
  }
}

TangentVector TangentSpace::map(const SpdMatrix& p) const {
  if (p.n() != n_) throw Error(ErrorCode::DimensionMismatch, "tangent map dimension mismatch");
  if (metric_ == Metric::LogEuclidean) {
    return {vec(mat_fn(p.sym(), MatFn::log()) - log_ref_), id_};
  }
  return {vec(mat_fn(congruence(p.sym(), inv_sqrt_), MatFn::log())), id_};
}

SpdMatrix TangentSpace::unmap(const TangentVector& s) const {
  if (s.dim() != tangent_dim(n_)) {
    throw Error(ErrorCode::DimensionMismatch, "tangent vector length does not match reference");
  }
  if (metric_ == Metric::LogEuclidean) {
    return SpdMatrix(mat_fn(unvec(s.values) + log_ref_, MatFn::exp()));
  }
  return SpdMatrix(congruence(mat_fn(unvec(s.values), MatFn::exp()), sqrt_));
}

TangentVector tangent_map(const SpdMatrix& pi, const SpdMatrix& pref, Metric metric) {
  check_same_dim(pi, pref);
  return TangentSpace(pref, metric).map(pi);
}

SpdMatrix tangent_unmap(const TangentVector& s, const SpdMatrix& pref, Metric metric) {
  return TangentSpace(pref, metric).unmap(s);
}

}  // namespace spdfuse
