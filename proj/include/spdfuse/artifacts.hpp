#pragma once

#include "spdfuse/spdrep.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spdfuse {

// Binary layouts, all little-endian:
//   SPD set:     "SPDSEQ01" u32 version=1, u64 count, u32 n, then count*n*n f64 row-major
//   tangent set: "TANVEC01" u32 version=1, u64 count, u32 dim, then count*dim f64
// The order of entries matches the JSON index written next to the binary.

struct ArtifactEntry {
  std::string subject_id;
  std::string trial_id;
  int label = 0;
  std::size_t segment = 0;
  std::string reference;  // tangent artifacts only

  bool operator==(const ArtifactEntry&) const = default;
};

void write_spd_set(const std::filesystem::path& path, std::span<const SpdMatrix> set);
std::vector<SpdMatrix> read_spd_set(const std::filesystem::path& path);

void write_tangent_set(const std::filesystem::path& path, std::span<const Eigen::VectorXd> set);
std::vector<Eigen::VectorXd> read_tangent_set(const std::filesystem::path& path);

nlohmann::ordered_json index_to_json(std::span<const ArtifactEntry> entries);
std::vector<ArtifactEntry> index_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a, used for manifest config hashes.
std::uint64_t fnv1a(const std::string& bytes);
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace spdfuse
