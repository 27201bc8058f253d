#include "spdfuse/error.hpp"

#include <sstream>

namespace spdfuse {

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite:
    case ErrorCode::NoConvergence:
    case ErrorCode::NotPositiveDefinite:
      return true;
    default:
      return false;
  }
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BlockMismatch: return "BlockMismatch";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::EmptyChannel: return "EmptyChannel";
    case ErrorCode::InconsistentLandmarkCount: return "InconsistentLandmarkCount";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::LabelMissing: return "LabelMissing";
    case ErrorCode::BadArtifact: return "BadArtifact";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

static std::string npd_message(double min_eig, const std::string& context) {
  std::ostringstream os;
  os.precision(17);
  os << context << " (smallest eigenvalue " << min_eig << ")";
  return os.str();
}

NotPositiveDefinite::NotPositiveDefinite(double min_eigenvalue, const std::string& context)
    : Error(ErrorCode::NotPositiveDefinite, npd_message(min_eigenvalue, context)),
      min_eig_(min_eigenvalue) {}

}  // namespace spdfuse
