#pragma once

#include "spdfuse/signals.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spdfuse {

// On-disk layout:
//   root/<subject>/<trial>/<channel>.csv   header "t,value"
//   root/<subject>/<trial>/meta.json       {"label": 0|1, "rates": {"<channel>": Hz, ...}}
//   root/<subject>/<trial>/landmarks.csv   optional, header "t,x0,y0,x1,y1,..." or
//                                          "t,x0,y0,z0,..."; its rate is rates["landmarks"]
// Landmark tracks become pairwise distance channels "dist_<i>_<j>".

struct IngestResult {
  std::vector<Recording> recordings;  // sorted by subject then trial
  std::vector<std::string> warnings;  // one per channel whose duration differs from its trial's longest
};

/// Reads every trial under root. A non-empty roster lists the allowed
/// channels (entries ending in '*' match by prefix); files outside it raise
/// UnknownChannel and exact roster names missing from a trial raise
/// MissingChannel.
IngestResult ingest(const std::filesystem::path& root, const std::vector<std::string>& roster = {});

Channel read_channel_csv(const std::filesystem::path& path, const std::string& name, double rate);
LandmarkTrack read_landmarks_csv(const std::filesystem::path& path, double frame_rate);

/// Writes recordings in the layout above. Values use %.17g so a round trip
/// through ingest is exact.
void write_dataset(const std::filesystem::path& root, std::span<const Recording> recordings);

}  // namespace spdfuse
