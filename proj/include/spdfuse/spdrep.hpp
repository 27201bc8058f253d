#pragma once

#include "spdfuse/symmat.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>

namespace spdfuse {

/// D channels by N time instants cut from one trial.
struct Segment {
  Segment() = default;
  Segment(Eigen::MatrixXd data, std::string subject_id, std::string trial_id,
          std::size_t start_index = 0, std::optional<int> label = std::nullopt);

  std::size_t channels() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t samples() const noexcept { return static_cast<std::size_t>(data.cols()); }

  Eigen::MatrixXd data;
  std::string subject_id;
  std::string trial_id;
  std::size_t start_index = 0;
  std::optional<int> label;
};

/// Symmetric matrix with a validated, strictly positive smallest eigenvalue.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  /// Validates positive definiteness with a full eigendecomposition.
  explicit SpdMatrix(SymMatrix entries);
  /// Trusts a smallest eigenvalue computed by the caller; still rejects <= 0.
  SpdMatrix(SymMatrix entries, double known_min_eig);

  std::size_t n() const noexcept { return s_.n(); }
  const SymMatrix& sym() const noexcept { return s_; }
  const Eigen::MatrixXd& matrix() const noexcept { return s_.matrix(); }
  double min_eig() const noexcept { return min_eig_; }

 private:
  SymMatrix s_;
  double min_eig_ = 0.0;
};

enum class Centering { PerTrial, PerSegment, None };

Centering parse_centering(const std::string& name);
std::string to_string(Centering c);

inline constexpr std::size_t kMaxBlockDimension = 128;

struct SpdConfig {
  int m = 2;
  double shrinkage = 1e-6;
  Centering centering = Centering::PerTrial;

  /// Throws InvalidConfig when m < 1, shrinkage < 0, or m * channels > 128.
  void validate(std::size_t channels) const;
};

/// S = (1/(N-1)) sum_i x_i x_i^T over the columns of the segment.
SymMatrix covariance(const Segment& seg);

/// C = (1/(N^2-N)) sum_{i!=j} x_i x_j^T, evaluated as (s s^T - (N-1) S) / (N^2-N).
SymMatrix cross_covariance(const Segment& seg);

/// S + shrinkage * trace(S) / D * I.
SymMatrix shrink(const SymMatrix& s, double shrinkage);

/// (mD)x(mD) block matrix with S on the diagonal blocks and C elsewhere.
/// Shrinkage is applied to S first. Positive definiteness is checked on the
/// two D x D blocks S + (m-1)C and S - C, whose spectra make up the spectrum
/// of the assembled matrix.
SpdMatrix block_p(const SymMatrix& s, const SymMatrix& c, const SpdConfig& cfg);

/// Applies per-segment centering when configured, then S, C and block_p.
SpdMatrix segment_to_spd(const Segment& seg, const SpdConfig& cfg);

/// Clamps the spectrum of `a` from below at `floor` (> 0). Used to make the
/// cross-covariance usable on its own.
SpdMatrix spectral_floor(const SymMatrix& a, double floor);

}  // namespace spdfuse
