#include "spdfuse/spdrep.hpp"

#include "spdfuse/error.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace spdfuse {

Segment::Segment(Eigen::MatrixXd data_in, std::string subject, std::string trial,
                 std::size_t start, std::optional<int> lab)
    : data(std::move(data_in)),
      subject_id(std::move(subject)),
      trial_id(std::move(trial)),
      start_index(start),
      label(lab) {
  if (data.rows() < 2) throw Error(ErrorCode::DegenerateSegment, "segment needs at least 2 channels");
  if (data.cols() < 2) throw Error(ErrorCode::DegenerateSegment, "segment needs at least 2 samples");
  if (!data.allFinite()) throw Error(ErrorCode::NonFinite, "segment has non-finite samples");
}

SpdMatrix::SpdMatrix(SymMatrix entries) : s_(std::move(entries)) {
  const EigenPair eig = eig_sym(s_);
  min_eig_ = eig.values.size() > 0 ? eig.values(0) : 0.0;
  if (!(min_eig_ > 0.0)) throw NotPositiveDefinite(min_eig_, "matrix is not positive definite");
}

SpdMatrix::SpdMatrix(SymMatrix entries, double known_min_eig)
    : s_(std::move(entries)), min_eig_(known_min_eig) {
  if (!(min_eig_ > 0.0)) throw NotPositiveDefinite(min_eig_, "matrix is not positive definite");
}

Centering parse_centering(const std::string& name) {
  if (name == "per-trial") return Centering::PerTrial;
  if (name == "per-segment") return Centering::PerSegment;
  if (name == "none") return Centering::None;
  throw Error(ErrorCode::InvalidConfig, "unknown centering mode '" + name + "'");
}

std::string to_string(Centering c) {
  switch (c) {
    case Centering::PerTrial: return "per-trial";
    case Centering::PerSegment: return "per-segment";
    case Centering::None: return "none";
  }
  return "none";
}

void SpdConfig::validate(std::size_t channels) const {
  if (m < 1) throw Error(ErrorCode::InvalidConfig, "SpdConfig: m must be >= 1");
  if (!(shrinkage >= 0.0)) throw Error(ErrorCode::InvalidConfig, "SpdConfig: shrinkage must be >= 0");
  if (static_cast<std::size_t>(m) * channels > kMaxBlockDimension) {
    std::ostringstream os;
    os << "SpdConfig: m*D = " << m << "*" << channels << " = "
       << static_cast<std::size_t>(m) * channels << " exceeds cap " << kMaxBlockDimension;
    throw Error(ErrorCode::InvalidConfig, os.str());
  }
}

SymMatrix covariance(const Segment& seg) {
  const auto n = seg.data.cols();
  if (n < 2) throw Error(ErrorCode::DegenerateSegment, "covariance needs N >= 2");
  return SymMatrix(seg.data * seg.data.transpose() / static_cast<double>(n - 1));
}

SymMatrix cross_covariance(const Segment& seg) {
  const auto n = seg.data.cols();
  if (n < 2) throw Error(ErrorCode::DegenerateSegment, "cross-covariance needs N >= 2");
  const Eigen::VectorXd sum = seg.data.rowwise().sum();
  const Eigen::MatrixXd outer = seg.data * seg.data.transpose();
  const double nn = static_cast<double>(n);
  return SymMatrix((sum * sum.transpose() - outer) / (nn * nn - nn));
}

SymMatrix shrink(const SymMatrix& s, double shrinkage) {
  if (shrinkage == 0.0) return s;
  const double ridge = shrinkage * s.trace() / static_cast<double>(s.n());
  Eigen::MatrixXd out = s.matrix();
  out.diagonal().array() += ridge;
  return SymMatrix(out);
}

SpdMatrix block_p(const SymMatrix& s_raw, const SymMatrix& c, const SpdConfig& cfg) {
  if (s_raw.n() != c.n()) {
    throw Error(ErrorCode::BlockMismatch, "S and C must have the same dimension");
  }
  cfg.validate(s_raw.n());
  const SymMatrix s = shrink(s_raw, cfg.shrinkage);
  if (cfg.m == 1) return SpdMatrix(s);

  const double m1 = static_cast<double>(cfg.m - 1);
  const double lo_sum = eig_sym(SymMatrix(s.matrix() + m1 * c.matrix())).values(0);
  const double lo_diff = eig_sym(s - c).values(0);
  const double min_eig = std::min(lo_sum, lo_diff);
  if (!(min_eig > 0.0)) {
    throw NotPositiveDefinite(min_eig, "block matrix P is not positive definite; raise shrinkage");
  }

  const Eigen::Index d = static_cast<Eigen::Index>(s.n());
  const Eigen::Index size = d * cfg.m;
  Eigen::MatrixXd p(size, size);
  for (int bi = 0; bi < cfg.m; ++bi)
    for (int bj = 0; bj < cfg.m; ++bj)
      p.block(bi * d, bj * d, d, d) = bi == bj ? s.matrix() : c.matrix();
  return SpdMatrix(SymMatrix(p), min_eig);
}

SpdMatrix segment_to_spd(const Segment& seg, const SpdConfig& cfg) {
  cfg.validate(seg.channels());
  if (cfg.centering == Centering::PerSegment) {
    Segment centered = seg;
    centered.data.colwise() -= centered.data.rowwise().mean();
    return block_p(covariance(centered), cross_covariance(centered), cfg);
  }
  return block_p(covariance(seg), cross_covariance(seg), cfg);
}

SpdMatrix spectral_floor(const SymMatrix& a, double floor) {
  if (!(floor > 0.0)) throw Error(ErrorCode::InvalidConfig, "spectral floor must be positive");
  EigenPair eig = eig_sym(a);
  eig.values = eig.values.cwiseMax(floor);
  const SymMatrix out(eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose());
  return SpdMatrix(out, eig.values(0));
}

}  // namespace spdfuse
