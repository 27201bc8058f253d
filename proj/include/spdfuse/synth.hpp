#pragma once

#include "spdfuse/signals.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace spdfuse {

/// Desk-scale stand-in for a labelled multi-subject recording corpus.
///
/// Each trial is subject-specific correlated noise plus a component along a
/// shared unit direction. That component is slow_amplitude[c] * env(t) for
/// the slow part and fast_c * |env(t)| * z_t for the fast part, where env is
/// a sinusoid with a random phase per trial and z_t is white. fast_c is
/// chosen so slow_c^2 + fast_c^2 is the same for both classes, which keeps
/// the expected second moment of every segment class-independent while the
/// slow mean drift differs.
struct SyntheticSpec {
  int subjects = 8;
  int trials_per_subject = 8;
  double duration = 80.0;  // seconds per trial
  double rate = 4.0;       // Hz, every channel
  int channels = 3;
  std::array<double, 2> slow_amplitude{0.0, 1.5};
  double envelope_period = 40.0;  // seconds
  double noise = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
  /// Both classes share the same slow amplitude.
  static SyntheticSpec null_effect();
};

/// Labels alternate with trial index so every subject holds both classes.
std::vector<Recording> synthesize(const SyntheticSpec& spec);

}  // namespace spdfuse
