#include "spdfuse/artifacts.hpp"

#include "binio.hpp"
#include "spdfuse/error.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace fs = std::filesystem;

namespace spdfuse {

namespace {

constexpr char kSpdMagic[9] = "SPDSEQ01";
constexpr char kTangentMagic[9] = "TANVEC01";
constexpr std::uint32_t kVersion = 1;

std::ofstream open_binary(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return os;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return is;
}

void expect_end(std::istream& is, const std::string& what) {
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::BadArtifact, "trailing bytes in " + what);
}

}  // namespace

void write_spd_set(const fs::path& path, std::span<const SpdMatrix> set) {
  const std::uint32_t n = set.empty() ? 0 : static_cast<std::uint32_t>(set.front().n());
  std::ofstream os = open_binary(path);
  os.write(kSpdMagic, 8);
  binio::put_u32(os, kVersion);
  binio::put_u64(os, set.size());
  binio::put_u32(os, n);
  for (const SpdMatrix& p : set) {
    if (p.n() != n) throw Error(ErrorCode::DimensionMismatch, "SPD set mixes matrix sizes");
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = 0; j < n; ++j) binio::put_f64(os, p.matrix()(i, j));
  }
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<SpdMatrix> read_spd_set(const fs::path& path) {
  std::ifstream is = open_input(path);
  const std::string what = path.string();
  binio::expect_magic(is, kSpdMagic, what);
  if (binio::get_u32(is, what) != kVersion) throw Error(ErrorCode::BadArtifact, "unsupported version in " + what);
  const std::uint64_t count = binio::get_u64(is, what);
  const std::uint32_t n = binio::get_u32(is, what);
  std::vector<SpdMatrix> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    Eigen::MatrixXd m(n, n);
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = 0; j < n; ++j) m(i, j) = binio::get_f64(is, what);
    if (!m.isApprox(m.transpose(), 0.0)) throw Error(ErrorCode::BadArtifact, "asymmetric matrix in " + what);
    out.emplace_back(SymMatrix(m));
  }
  expect_end(is, what);
  return out;
}

void write_tangent_set(const fs::path& path, std::span<const Eigen::VectorXd> set) {
  const std::uint32_t dim = set.empty() ? 0 : static_cast<std::uint32_t>(set.front().size());
  std::ofstream os = open_binary(path);
  os.write(kTangentMagic, 8);
  binio::put_u32(os, kVersion);
  binio::put_u64(os, set.size());
  binio::put_u32(os, dim);
  for (const Eigen::VectorXd& v : set) {
    if (v.size() != static_cast<Eigen::Index>(dim)) throw Error(ErrorCode::DimensionMismatch, "tangent set mixes sizes");
    for (Eigen::Index i = 0; i < v.size(); ++i) binio::put_f64(os, v(i));
  }
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<Eigen::VectorXd> read_tangent_set(const fs::path& path) {
  std::ifstream is = open_input(path);
  const std::string what = path.string();
  binio::expect_magic(is, kTangentMagic, what);
  if (binio::get_u32(is, what) != kVersion) throw Error(ErrorCode::BadArtifact, "unsupported version in " + what);
  const std::uint64_t count = binio::get_u64(is, what);
  const std::uint32_t dim = binio::get_u32(is, what);
  std::vector<Eigen::VectorXd> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    Eigen::VectorXd v(dim);
    for (std::uint32_t i = 0; i < dim; ++i) v(i) = binio::get_f64(is, what);
    out.push_back(std::move(v));
  }
  expect_end(is, what);
  return out;
}

nlohmann::ordered_json index_to_json(std::span<const ArtifactEntry> entries) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ArtifactEntry& e : entries) {
    nlohmann::ordered_json j;
    j["subject"] = e.subject_id;
    j["trial"] = e.trial_id;
    j["label"] = e.label;
    j["segment"] = e.segment;
    if (!e.reference.empty()) j["reference"] = e.reference;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<ArtifactEntry> index_from_json(const nlohmann::json& j) {
  std::vector<ArtifactEntry> out;
  try {
    for (const auto& e : j) {
      out.push_back({e.at("subject").get<std::string>(), e.at("trial").get<std::string>(), e.at("label").get<int>(),
                     e.at("segment").get<std::size_t>(), e.value("reference", std::string())});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BadArtifact, std::string("artifact index: ") + ex.what());
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream is = open_input(path);
  return fnv1a(std::string(std::istreambuf_iterator<char>(is), {}));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is = open_input(path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadArtifact, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace spdfuse
