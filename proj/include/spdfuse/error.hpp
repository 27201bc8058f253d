#pragma once

#include <stdexcept>
#include <string>

namespace spdfuse {

enum class ErrorCode {
  NonFinite,
  NoConvergence,
  NotPositiveDefinite,
  DimensionMismatch,
  BlockMismatch,
  DegenerateSegment,
  InvalidConfig,
  EmptySet,
  EmptyChannel,
  InconsistentLandmarkCount,
  SingleClass,
  TooShort,
  TooFewSubjects,
  MissingChannel,
  UnknownChannel,
  BadHeader,
  LabelMissing,
  BadArtifact,
  Io,
};

// Numerical errors map to CLI exit code 3, everything else to 2.
bool is_numerical(ErrorCode code);
const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(double min_eigenvalue, const std::string& context);
  double min_eigenvalue() const noexcept { return min_eig_; }

 private:
  double min_eig_;
};

}  // namespace spdfuse
