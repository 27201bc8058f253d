#include "spdfuse/signals.hpp"

#include "spdfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace spdfuse {

void Recording::validate() const {
  std::set<std::string> names;
  for (const Channel& ch : channels) {
    if (ch.samples.empty()) {
      throw Error(ErrorCode::EmptyChannel, subject_id + "/" + trial_id + "/" + ch.name + " has no samples");
    }
    if (!(ch.rate > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, subject_id + "/" + trial_id + "/" + ch.name + " has a non-positive rate");
    }
    if (!names.insert(ch.name).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate channel '" + ch.name + "' in " + subject_id + "/" + trial_id);
    }
  }
}

const Channel* Recording::find(const std::string& name) const {
  for (const Channel& ch : channels)
    if (ch.name == name) return &ch;
  return nullptr;
}

Channel resample(const Channel& channel, double target_rate) {
  if (channel.samples.empty()) throw Error(ErrorCode::EmptyChannel, "cannot resample empty channel " + channel.name);
  if (!(target_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "target rate must be positive");

  const std::vector<double>& x = channel.samples;
  const std::size_t len = x.size();
  const double ratio = channel.rate / target_rate;
  const std::size_t window = ratio > 1.0 ? static_cast<std::size_t>(std::floor(ratio)) : 1;

  std::vector<double> smooth(len);
  if (window == 1) {
    smooth = x;
  } else {
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t end = std::min(len, i + window);
      double acc = 0.0;
      for (std::size_t j = i; j < end; ++j) acc += x[j];
      smooth[i] = acc / static_cast<double>(end - i);
    }
  }

  const auto out_len = static_cast<std::size_t>(
      std::floor(static_cast<double>(len) * target_rate / channel.rate + 1e-9));
  Channel out{channel.name, target_rate, std::vector<double>(out_len)};
  for (std::size_t k = 0; k < out_len; ++k) {
    const double pos = static_cast<double>(k) * ratio;
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(pos)), len - 1);
    const double frac = pos - static_cast<double>(i0);
    if (frac == 0.0 || i0 + 1 >= len) {
      out.samples[k] = smooth[i0];
    } else {
      out.samples[k] = (1.0 - frac) * smooth[i0] + frac * smooth[i0 + 1];
    }
  }
  return out;
}

std::vector<Channel> pairwise_distances(const LandmarkTrack& track) {
  if (track.frames.empty()) throw Error(ErrorCode::EmptyChannel, "landmark track has no frames");
  const std::size_t count = track.frames.front().size();
  if (count < 2) throw Error(ErrorCode::InconsistentLandmarkCount, "need at least 2 landmarks");
  for (std::size_t f = 0; f < track.frames.size(); ++f) {
    if (track.frames[f].size() != count) {
      std::ostringstream os;
      os << "frame " << f << " has " << track.frames[f].size() << " landmarks, expected " << count;
      throw Error(ErrorCode::InconsistentLandmarkCount, os.str());
    }
  }

  std::vector<Channel> out;
  out.reserve(count * (count - 1) / 2);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      Channel ch{"dist_" + std::to_string(i) + "_" + std::to_string(j), track.frame_rate, {}};
      ch.samples.reserve(track.frames.size());
      for (const auto& frame : track.frames) {
        const double dx = frame[i][0] - frame[j][0];
        const double dy = frame[i][1] - frame[j][1];
        const double dz = frame[i][2] - frame[j][2];
        ch.samples.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
      }
      out.push_back(std::move(ch));
    }
  }
  return out;
}

SelectionModel anova_select(const Eigen::MatrixXd& features, std::span<const int> labels,
                            std::size_t k, std::string fitted_on) {
  const auto rows = features.rows();
  const auto cols = static_cast<std::size_t>(features.cols());
  if (static_cast<std::size_t>(rows) != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one label per feature row required");
  }
  if (k > cols) throw Error(ErrorCode::InvalidConfig, "k exceeds the number of features");

  std::array<double, 2> count{0.0, 0.0};
  for (int y : labels) count[y != 0 ? 1 : 0] += 1.0;
  if (count[0] == 0.0 || count[1] == 0.0) {
    throw Error(ErrorCode::SingleClass, "ANOVA selection needs both classes");
  }
  const double n = count[0] + count[1];
  const double df_within = n - 2.0;

  SelectionModel model;
  model.fitted_on = std::move(fitted_on);
  model.f_scores.resize(cols);
  model.zero_within.assign(cols, false);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto col = features.col(static_cast<Eigen::Index>(c));
    std::array<double, 2> sum{0.0, 0.0};
    for (Eigen::Index r = 0; r < rows; ++r) sum[labels[static_cast<std::size_t>(r)] != 0 ? 1 : 0] += col(r);
    const std::array<double, 2> mean{sum[0] / count[0], sum[1] / count[1]};
    const double grand = (sum[0] + sum[1]) / n;
    double ssw = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double d = col(r) - mean[labels[static_cast<std::size_t>(r)] != 0 ? 1 : 0];
      ssw += d * d;
    }
    const double ssb = count[0] * (mean[0] - grand) * (mean[0] - grand) +
                       count[1] * (mean[1] - grand) * (mean[1] - grand);
    double f;
    if (ssb == 0.0 && ssw == 0.0) {
      f = 0.0;
    } else if (ssw <= 1e-14 * ssb || df_within <= 0.0) {
      f = std::numeric_limits<double>::infinity();
      model.zero_within[c] = true;
    } else {
      f = ssb / (ssw / df_within);
    }
    model.f_scores[c] = f;
  }

  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model.f_scores[a] > model.f_scores[b];
  });
  model.selected_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  return model;
}

std::vector<Segment> assemble_segments(const Recording& rec, std::span<const Channel> extra,
                                       double segment_seconds, double common_rate,
                                       Centering centering) {
  std::vector<const Channel*> channels;
  for (const Channel& ch : rec.channels) channels.push_back(&ch);
  for (const Channel& ch : extra) channels.push_back(&ch);
  if (channels.empty()) throw Error(ErrorCode::MissingChannel, "recording has no channels");

  for (const Channel* ch : channels) {
    if (ch->samples.empty()) throw Error(ErrorCode::EmptyChannel, ch->name + " is empty");
    if (std::abs(ch->rate - common_rate) > 1e-9 * common_rate) {
      throw Error(ErrorCode::InvalidConfig, "channel " + ch->name + " is not at the common rate");
    }
  }
  const auto seg_len = static_cast<std::size_t>(std::llround(segment_seconds * common_rate));
  if (seg_len < 2) throw Error(ErrorCode::InvalidConfig, "segments must span at least 2 samples");

  std::size_t aligned = channels.front()->samples.size();
  for (const Channel* ch : channels) aligned = std::min(aligned, ch->samples.size());
  const std::size_t count = aligned / seg_len;
  if (count == 0) {
    throw Error(ErrorCode::TooShort, rec.subject_id + "/" + rec.trial_id + " is shorter than one segment");
  }

  const auto d = static_cast<Eigen::Index>(channels.size());
  Eigen::MatrixXd data(d, static_cast<Eigen::Index>(aligned));
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& s = channels[static_cast<std::size_t>(i)]->samples;
    for (std::size_t t = 0; t < aligned; ++t) data(i, static_cast<Eigen::Index>(t)) = s[t];
  }
  if (centering == Centering::PerTrial) data.colwise() -= data.rowwise().mean();

  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const auto start = static_cast<Eigen::Index>(s * seg_len);
    out.emplace_back(data.middleCols(start, static_cast<Eigen::Index>(seg_len)), rec.subject_id,
                     rec.trial_id, s * seg_len, rec.label);
  }
  return out;
}

ChannelScaler ChannelScaler::fit(std::span<const Recording> recordings) {
  struct Acc {
    double sum = 0.0;
    double sq = 0.0;
    double n = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const Recording& rec : recordings) {
    for (const Channel& ch : rec.channels) {
      Acc& a = acc[ch.name];
      for (double v : ch.samples) {
        a.sum += v;
        a.n += 1.0;
      }
    }
  }
  ChannelScaler scaler;
  for (auto& [name, a] : acc) scaler.stats_[name].mean = a.n > 0 ? a.sum / a.n : 0.0;
  for (const Recording& rec : recordings) {
    for (const Channel& ch : rec.channels) {
      const double mean = scaler.stats_[ch.name].mean;
      for (double v : ch.samples) acc[ch.name].sq += (v - mean) * (v - mean);
    }
  }
  for (auto& [name, a] : acc) {
    const double sd = a.n > 0 ? std::sqrt(a.sq / a.n) : 0.0;
    scaler.stats_[name].stddev = sd > 0.0 ? sd : 1.0;
  }
  return scaler;
}

Recording ChannelScaler::apply(const Recording& rec) const {
  Recording out = rec;
  for (Channel& ch : out.channels) {
    const auto it = stats_.find(ch.name);
    if (it == stats_.end()) continue;
    for (double& v : ch.samples) v = (v - it->second.mean) / it->second.stddev;
  }
  return out;
}

}  // namespace spdfuse
