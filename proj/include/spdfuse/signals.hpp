#pragma once

#include "spdfuse/spdrep.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spdfuse {

struct Channel {
  std::string name;
  double rate = 1.0;  // samples per second
  std::vector<double> samples;

  double duration() const { return static_cast<double>(samples.size()) / rate; }
};

struct Recording {
  std::string subject_id;
  std::string trial_id;
  int label = 0;
  std::vector<Channel> channels;

  /// Throws on empty channels, non-positive rates or duplicate names.
  void validate() const;
  const Channel* find(const std::string& name) const;
};

/// Landmark coordinates per video frame. Each point is (x, y, z); 2-D
/// tracks carry z = 0.
struct LandmarkTrack {
  double frame_rate = 1.0;
  std::vector<std::vector<std::array<double, 3>>> frames;
};

struct SelectionModel {
  std::vector<std::size_t> selected_indices;  // descending F, ties by index
  std::vector<double> f_scores;               // one per feature
  std::vector<bool> zero_within;              // F set to +inf for these
  std::string fitted_on;
};

/// Moving-average low-pass over floor(rate / target) samples, then linear
/// interpolation onto the target grid. Output length is
/// floor(duration * target_rate). Upsampling skips the filter.
Channel resample(const Channel& channel, double target_rate);

/// One channel per landmark pair (i < j), named "dist_<i>_<j>", holding the
/// Euclidean distance in each frame.
std::vector<Channel> pairwise_distances(const LandmarkTrack& track);

/// One-way ANOVA F = MS_between / MS_within per column with binary labels.
/// Columns with zero within-class variance get F = +inf (or 0 when the
/// between-class sum of squares is also zero).
SelectionModel anova_select(const Eigen::MatrixXd& features, std::span<const int> labels,
                            std::size_t k, std::string fitted_on = {});

/// Stacks the recording's channels (plus `extra`) into D x N segments of
/// segment_seconds each. All channels must already be at common_rate;
/// channels are trimmed to the shortest one and the trailing partial
/// segment is dropped. Per-trial centering subtracts each channel's mean
/// over the aligned recording before slicing.
std::vector<Segment> assemble_segments(const Recording& rec, std::span<const Channel> extra,
                                       double segment_seconds, double common_rate,
                                       Centering centering);

/// Per-channel z-scoring with statistics pooled over a set of recordings.
class ChannelScaler {
 public:
  static ChannelScaler fit(std::span<const Recording> recordings);
  Recording apply(const Recording& rec) const;

  struct Stats {
    double mean = 0.0;
    double stddev = 1.0;
  };
  const std::map<std::string, Stats>& stats() const noexcept { return stats_; }

 private:
  std::map<std::string, Stats> stats_;
};

}  // namespace spdfuse
