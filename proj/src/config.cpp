#include "spdfuse/config.hpp"

#include "spdfuse/error.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace spdfuse {

namespace {

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, "bad value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "bad boolean '" + v + "' for " + key);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

Representation parse_representation(const std::string& v) {
  if (v == "S") return Representation::S;
  if (v == "C") return Representation::C;
  if (v == "P") return Representation::P;
  throw Error(ErrorCode::InvalidConfig, "representation must be S, C or P");
}

const char* to_string(Representation r) {
  return r == Representation::S ? "S" : r == Representation::C ? "C" : "P";
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"data", [](RunConfig& c, const auto&, const auto& v) { c.data = v; }},
      {"out", [](RunConfig& c, const auto&, const auto& v) { c.out = v; }},
      {"channels", [](RunConfig& c, const auto&, const auto& v) { c.pipeline.channels = split_list(v); }},
      {"common_rate", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.common_rate = parse_num<double>(k, v); }},
      {"segment_seconds",
       [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.segment_seconds = parse_num<double>(k, v); }},
      {"centering", [](RunConfig& c, const auto&, const auto& v) { c.pipeline.spd.centering = parse_centering(v); }},
      {"representation",
       [](RunConfig& c, const auto&, const auto& v) { c.pipeline.representation = parse_representation(v); }},
      {"m", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.spd.m = parse_num<std::size_t>(k, v); }},
      {"shrinkage", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.spd.shrinkage = parse_num<double>(k, v); }},
      {"metric", [](RunConfig& c, const auto&, const auto& v) { c.pipeline.metric = parse_metric(v); }},
      {"reference", [](RunConfig& c, const auto&, const auto& v) { c.pipeline.reference = parse_reference_mode(v); }},
      {"mean_max_iters", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.mean.max_iters = parse_num<int>(k, v); }},
      {"mean_tol", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.mean.tol = parse_num<double>(k, v); }},
      {"accept_unconverged_mean",
       [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.accept_unconverged_mean = parse_bool(k, v); }},
      {"seq_len", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.seq_len = parse_num<std::size_t>(k, v); }},
      {"seq_stride", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.seq_stride = parse_num<std::size_t>(k, v); }},
      {"standardize", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.standardize = parse_bool(k, v); }},
      {"select_prefix", [](RunConfig& c, const auto&, const auto& v) { c.pipeline.select_prefix = v; }},
      {"select_k", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.select_k = parse_num<std::size_t>(k, v); }},
      {"select_global", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.select_global = parse_bool(k, v); }},
      {"lr", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.lr = parse_num<double>(k, v); }},
      {"beta1", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.beta1 = parse_num<double>(k, v); }},
      {"beta2", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.beta2 = parse_num<double>(k, v); }},
      {"epochs", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.epochs = parse_num<int>(k, v); }},
      {"dropout", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.dropout = parse_num<double>(k, v); }},
      {"batch_size",
       [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.batch_size = parse_num<std::size_t>(k, v); }},
      {"hidden", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.hidden = parse_num<std::size_t>(k, v); }},
      {"layers", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.layers = parse_num<std::size_t>(k, v); }},
      {"grad_clip", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.grad_clip = parse_num<double>(k, v); }},
      {"pos_weight", [](RunConfig& c, const auto& k, const auto& v) { c.pipeline.train.pos_weight = parse_num<double>(k, v); }},
      {"pooling", [](RunConfig& c, const auto&, const auto& v) { c.pipeline.train.pooling = parse_pooling(v); }},
      {"protocol", [](RunConfig& c, const auto&, const auto& v) { c.protocol = parse_protocol(v); }},
      {"k", [](RunConfig& c, const auto& k, const auto& v) { c.k = parse_num<int>(k, v); }},
      {"seed",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.seed = parse_num<std::uint64_t>(k, v);
         c.pipeline.train.seed = c.seed;
       }},
      {"threads", [](RunConfig& c, const auto& k, const auto& v) { c.threads = parse_num<unsigned>(k, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  const PipelineConfig& p = pipeline;
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(p.common_rate > 0.0)) fail("common_rate must be positive");
  if (!(p.segment_seconds > 0.0)) fail("segment_seconds must be positive");
  if (p.segment_seconds * p.common_rate < 2.0) fail("a segment must hold at least 2 samples");
  if (p.spd.m < 1 || p.spd.m > 4) fail("m must lie in 1..4");
  if (!(p.spd.shrinkage >= 0.0)) fail("shrinkage must be non-negative");
  if (p.seq_len < 1 || p.seq_stride < 1) fail("seq_len and seq_stride must be >= 1");
  if (p.select_k < 1) fail("select_k must be >= 1");
  if (protocol == Protocol::KFold && k < 2) fail("k must be >= 2");
  p.mean.validate();
  p.train.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
  const PipelineConfig& p = pipeline;
  nlohmann::ordered_json j;
  j["channels"] = p.channels;
  j["common_rate"] = p.common_rate;
  j["segment_seconds"] = p.segment_seconds;
  j["centering"] = to_string(p.spd.centering);
  j["representation"] = to_string(p.representation);
  j["m"] = p.spd.m;
  j["shrinkage"] = p.spd.shrinkage;
  j["metric"] = to_string(p.metric);
  j["reference"] = to_string(p.reference);
  j["mean_max_iters"] = p.mean.max_iters;
  j["mean_tol"] = p.mean.tol;
  j["accept_unconverged_mean"] = p.accept_unconverged_mean;
  j["seq_len"] = p.seq_len;
  j["seq_stride"] = p.seq_stride;
  j["standardize"] = p.standardize;
  j["select_prefix"] = p.select_prefix;
  j["select_k"] = p.select_k;
  j["select_global"] = p.select_global;
  j["lr"] = p.train.lr;
  j["beta1"] = p.train.beta1;
  j["beta2"] = p.train.beta2;
  j["epochs"] = p.train.epochs;
  j["dropout"] = p.train.dropout;
  j["batch_size"] = p.train.batch_size;
  j["hidden"] = p.train.hidden;
  j["layers"] = p.train.layers;
  j["grad_clip"] = p.train.grad_clip;
  j["pos_weight"] = p.train.pos_weight;
  j["pooling"] = to_string(p.train.pooling);
  j["protocol"] = to_string(protocol);
  j["k"] = k;
  j["seed"] = seed;
  return j;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [k, set] : setters()) {
    if (k == key) {
      set(cfg, key, value);
      return;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

std::filesystem::path resolve_output(const std::filesystem::path& out) {
  const char* root = std::getenv("SPDFUSE_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || out.is_absolute()) return out;
  return std::filesystem::path(root) / out;
}

}  // namespace spdfuse
