#pragma once

#include "spdfuse/harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace spdfuse {

/// Every knob of a pipeline run. The config file is plain "key = value"
/// lines ('#' starts a comment); each key doubles as a --key command line
/// flag. config_keys() lists them.
struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path out;
  PipelineConfig pipeline;
  Protocol protocol = Protocol::Loso;
  int k = 10;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0 = hardware concurrency; never changes results

  void validate() const;
  /// Canonical form of every setting that can change an output (paths and
  /// thread count excluded).
  nlohmann::ordered_json to_json() const;
};

const std::vector<std::string>& config_keys();
/// Throws InvalidConfig for unknown keys or malformed values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Resolves a relative output path against $SPDFUSE_OUTPUT_ROOT when set.
std::filesystem::path resolve_output(const std::filesystem::path& out);

}  // namespace spdfuse
