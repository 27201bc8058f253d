#include "spdfuse/cli.hpp"

#include "spdfuse/artifacts.hpp"
#include "spdfuse/config.hpp"
#include "spdfuse/dataset.hpp"
#include "spdfuse/error.hpp"
#include "spdfuse/harness.hpp"
#include "spdfuse/synth.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace spdfuse {

namespace {

constexpr const char* kVersion = "0.1.0";

using ojson = nlohmann::ordered_json;

struct RunOptions {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* sub, bool with_data) {
    sub->add_option("--config", config_path, "key = value config file; flags override it");
    for (const std::string& key : config_keys()) {
      if (key == "data" && !with_data) continue;
      options[key] = sub->add_option("--" + key, values[key]);
    }
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const std::string& key : config_keys()) {
      const auto it = options.find(key);
      if (it != options.end() && it->second->count() > 0) set_config_value(cfg, key, values.at(key));
    }
    cfg.validate();
    if (!cfg.out.empty()) cfg.out = resolve_output(cfg.out);
    return cfg;
  }
};

std::uint64_t dir_fingerprint(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const fs::path& f : files) {
    acc += fs::relative(f, dir).generic_string();
    acc += '\0';
    acc += hex64(fnv1a_file(f));
  }
  return fnv1a(acc);
}

std::string stage_hash(const std::string& stage, const ojson& config, const std::string& inputs) {
  return hex64(fnv1a(stage + "\n" + config.dump() + "\n" + inputs));
}

bool up_to_date(const fs::path& out, const std::string& hash, const std::vector<std::string>& outputs) {
  const fs::path manifest = out / "manifest.json";
  if (!fs::exists(manifest)) return false;
  try {
    if (read_json(manifest).value("config_hash", std::string()) != hash) return false;
  } catch (const Error&) {
    return false;
  }
  for (const std::string& o : outputs)
    if (!fs::exists(out / o)) return false;
  return true;
}

void write_manifest(const fs::path& out, const std::string& stage, const ojson& config, const std::string& hash,
                    const ojson& inputs, const std::vector<std::string>& outputs, const ojson& extra = ojson::object()) {
  ojson m;
  m["stage"] = stage;
  m["config_hash"] = hash;
  m["versions"] = {{"spdfuse", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  m["config"] = config;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(out / "manifest.json", m);
}

std::vector<std::string> channel_names(const Recording& rec) {
  std::vector<std::string> out;
  for (const Channel& ch : rec.channels) out.push_back(ch.name);
  return out;
}

std::vector<std::string> block_labels(const std::vector<std::string>& channels, std::size_t m) {
  if (m <= 1) return channels;
  std::vector<std::string> out;
  for (std::size_t b = 0; b < m; ++b)
    for (const std::string& c : channels) out.push_back(c + "[" + std::to_string(b) + "]");
  return out;
}

std::vector<std::string> subject_list(const std::vector<Recording>& recs) {
  std::vector<std::string> out;
  for (const Recording& r : recs) out.push_back(r.subject_id);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- stages ----

int cmd_synth(const SyntheticSpec& spec, const fs::path& out_arg, std::ostream& out) {
  const fs::path dir = resolve_output(out_arg);
  ojson cfg;
  cfg["subjects"] = spec.subjects;
  cfg["trials_per_subject"] = spec.trials_per_subject;
  cfg["duration"] = spec.duration;
  cfg["rate"] = spec.rate;
  cfg["channels"] = spec.channels;
  cfg["slow_amplitude"] = spec.slow_amplitude;
  cfg["envelope_period"] = spec.envelope_period;
  cfg["noise"] = spec.noise;
  cfg["seed"] = spec.seed;
  const std::string hash = stage_hash("synth", cfg, "");
  if (up_to_date(dir, hash, {})) {
    out << "up to date: " << dir.string() << "\n";
    return 0;
  }
  const auto recs = synthesize(spec);
  fs::create_directories(dir);
  write_dataset(dir, recs);
  write_manifest(dir, "synth", cfg, hash, ojson::object(), {});
  out << "wrote " << recs.size() << " trials to " << dir.string() << "\n";
  return 0;
}

int cmd_ingest_check(const fs::path& data, const std::vector<std::string>& roster, std::ostream& out) {
  const IngestResult r = ingest(data, roster);
  std::map<std::string, int> per_subject;
  for (const Recording& rec : r.recordings) ++per_subject[rec.subject_id];
  out << r.recordings.size() << " trials, " << per_subject.size() << " subjects\n";
  for (const Recording& rec : r.recordings) {
    out << rec.subject_id << "/" << rec.trial_id << " label=" << rec.label;
    for (const Channel& ch : rec.channels) out << " " << ch.name << "@" << ch.rate << "Hz:" << ch.samples.size();
    out << "\n";
  }
  for (const std::string& w : r.warnings) out << "warning: " << w << "\n";
  return 0;
}

int cmd_build_spd(const RunConfig& cfg, std::ostream& out) {
  const ojson config = cfg.to_json();
  const std::string hash = stage_hash("build-spd", config, hex64(dir_fingerprint(cfg.data)));
  const std::vector<std::string> outputs{"spd.bin", "index.json"};
  if (up_to_date(cfg.out, hash, outputs)) {
    out << "up to date: " << cfg.out.string() << "\n";
    return 0;
  }
  const PipelineConfig& p = cfg.pipeline;
  std::vector<Recording> recs = preprocess(ingest(cfg.data).recordings, p);
  const std::size_t d = recs.front().channels.size();
  SpdConfig spd = p.spd;
  if (p.representation != Representation::P) spd.m = 1;
  spd.validate(d);
  if (p.standardize) {
    const ChannelScaler scaler = ChannelScaler::fit(recs);
    for (Recording& r : recs) r = scaler.apply(r);
  }
  std::vector<SpdMatrix> set;
  std::vector<ArtifactEntry> index;
  for (const Recording& r : recs) {
    const auto segs = assemble_segments(r, {}, p.segment_seconds, p.common_rate, p.spd.centering);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      set.push_back(represent(segs[i], p.representation, p.spd));
      index.push_back({r.subject_id, r.trial_id, r.label, i, {}});
    }
  }
  fs::create_directories(cfg.out);
  write_spd_set(cfg.out / "spd.bin", set);
  write_json(cfg.out / "index.json", index_to_json(index));
  const std::vector<std::string> channels = channel_names(recs.front());
  write_manifest(cfg.out, "build-spd", config, hash, {{"data", cfg.data.string()}}, outputs,
                 {{"channels", channels}, {"matrix_labels", block_labels(channels, spd.m)}});
  out << "wrote " << set.size() << " SPD matrices of size " << set.front().n() << "\n";
  return 0;
}

int cmd_map_tangent(const RunConfig& cfg, const fs::path& spd_dir, std::ostream& out) {
  const ojson config = cfg.to_json();
  const std::string hash = stage_hash("map-tangent", config, hex64(dir_fingerprint(spd_dir)));
  const std::vector<std::string> outputs{"tangent.bin", "index.json", "references.bin", "references.json"};
  if (up_to_date(cfg.out, hash, outputs)) {
    out << "up to date: " << cfg.out.string() << "\n";
    return 0;
  }
  const auto set = read_spd_set(spd_dir / "spd.bin");
  auto index = index_from_json(read_json(spd_dir / "index.json"));
  if (set.size() != index.size()) throw Error(ErrorCode::BadArtifact, "SPD set and index disagree in length");
  if (set.empty()) throw Error(ErrorCode::EmptySet, "no SPD matrices in " + spd_dir.string());

  std::map<std::string, std::vector<SpdMatrix>> groups;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string key = cfg.pipeline.reference == ReferenceMode::PerSubject ? index[i].subject_id : "global";
    groups[key].push_back(set[i]);
  }
  std::map<std::string, TangentSpace> spaces;
  std::vector<SpdMatrix> refs;
  ojson ref_index = ojson::array();
  for (const auto& [key, group] : groups) {
    SpdMatrix ref;
    double residual = 0.0;
    try {
      ref = geometric_mean(group, cfg.pipeline.mean, cfg.pipeline.metric);
    } catch (const MeanNoConvergence& e) {
      if (!cfg.pipeline.accept_unconverged_mean) throw;
      ref = e.last_iterate();
      residual = e.residual();
    }
    spaces.emplace(key, TangentSpace(ref, cfg.pipeline.metric, key));
    refs.push_back(ref);
    ojson r;
    r["reference"] = key;
    r["count"] = group.size();
    r["unconverged_residual"] = residual;
    ref_index.push_back(r);
  }
  std::vector<Eigen::VectorXd> vectors;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string key = cfg.pipeline.reference == ReferenceMode::PerSubject ? index[i].subject_id : "global";
    vectors.push_back(spaces.at(key).map(set[i]).values);
    index[i].reference = key;
  }
  fs::create_directories(cfg.out);
  write_tangent_set(cfg.out / "tangent.bin", vectors);
  write_json(cfg.out / "index.json", index_to_json(index));
  write_spd_set(cfg.out / "references.bin", refs);
  write_json(cfg.out / "references.json", ref_index);
  write_manifest(cfg.out, "map-tangent", config, hash, {{"spd", spd_dir.string()}}, outputs);
  out << "mapped " << vectors.size() << " matrices to " << vectors.front().size() << "-d tangent vectors\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& tangent_dir, std::ostream& out) {
  const ojson config = cfg.to_json();
  const std::string hash = stage_hash("train", config, hex64(dir_fingerprint(tangent_dir)));
  const std::vector<std::string> outputs{"model.bin", "loss.csv"};
  if (up_to_date(cfg.out, hash, outputs)) {
    out << "up to date: " << cfg.out.string() << "\n";
    return 0;
  }
  const auto vectors = read_tangent_set(tangent_dir / "tangent.bin");
  const auto index = index_from_json(read_json(tangent_dir / "index.json"));
  if (vectors.size() != index.size()) throw Error(ErrorCode::BadArtifact, "tangent set and index disagree in length");

  std::vector<VectorSequence> seqs;
  for (std::size_t i = 0; i < index.size();) {
    std::size_t j = i;
    while (j < index.size() && index[j].subject_id == index[i].subject_id && index[j].trial_id == index[i].trial_id) ++j;
    std::vector<Eigen::VectorXd> trial(vectors.begin() + static_cast<std::ptrdiff_t>(i),
                                       vectors.begin() + static_cast<std::ptrdiff_t>(j));
    auto w = window_sequences(trial, index[i].subject_id, index[i].trial_id, index[i].label, cfg.pipeline.seq_len,
                              cfg.pipeline.seq_stride);
    seqs.insert(seqs.end(), w.begin(), w.end());
    i = j;
  }
  if (seqs.empty()) throw Error(ErrorCode::TooShort, "no trial holds seq_len segments");
  const TrainResult result = train(seqs, cfg.pipeline.train);
  fs::create_directories(cfg.out);
  save_checkpoint(cfg.out / "model.bin", result.params, cfg.pipeline.train.pooling);
  write_loss_curve(cfg.out / "loss.csv", result.loss_curve);
  write_manifest(cfg.out, "train", config, hash, {{"tangent", tangent_dir.string()}}, outputs,
                 {{"sequences", seqs.size()}, {"final_loss", result.loss_curve.back()}});
  out << "trained on " << seqs.size() << " sequences, final loss " << result.loss_curve.back() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const ojson config = cfg.to_json();
  const std::string hash = stage_hash("evaluate", config, hex64(dir_fingerprint(cfg.data)));
  const std::vector<std::string> outputs{"report.json", "folds.csv", "predictions.csv"};
  if (up_to_date(cfg.out, hash, outputs)) {
    out << "up to date: " << cfg.out.string() << "\n";
    return 0;
  }
  const auto recs = ingest(cfg.data).recordings;
  const FoldPlan plan = plan_folds(subject_list(recs), cfg.protocol, cfg.k, cfg.seed);
  const EvaluationReport report = evaluate(recs, plan, cfg.pipeline, lstm_factory(), cfg.threads);
  fs::create_directories(cfg.out);
  ojson j;
  j["config"] = config;
  j["plan"] = to_json(plan);
  j["report"] = to_json(report);
  write_json(cfg.out / "report.json", j);
  write_folds_csv(cfg.out / "folds.csv", report);
  write_predictions_csv(cfg.out / "predictions.csv", report);
  write_manifest(cfg.out, "evaluate", config, hash, {{"data", cfg.data.string()}}, outputs);
  for (const FoldReport& f : report.folds)
    if (!f.note.empty()) out << "fold " << f.fold << ": " << f.note << "\n";
  out << "pooled accuracy " << report.pooled_accuracy << " f1 " << report.pooled_f1 << " (fold mean "
      << report.mean_accuracy << " / " << report.mean_f1 << ")\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& grid_tokens,
               const std::vector<std::string>& modality_args, const std::vector<std::string>& metric_names,
               std::ostream& out) {
  std::map<std::string, std::vector<std::string>> modalities;
  std::vector<std::string> modality_order;
  for (const std::string& arg : modality_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidConfig, "--modality wants NAME=ch1,ch2");
    std::vector<std::string> chans;
    std::stringstream ss(arg.substr(eq + 1));
    for (std::string c; std::getline(ss, c, ',');)
      if (!c.empty()) chans.push_back(c);
    modalities[arg.substr(0, eq)] = chans;
    modality_order.push_back(arg.substr(0, eq));
  }
  if (modalities.empty()) {
    modalities["all"] = cfg.pipeline.channels;
    modality_order.push_back("all");
  }
  std::vector<AblationSpec> grid;
  for (const std::string& metric : metric_names) {
    for (const std::string& tok : grid_tokens) {
      for (const std::string& mod : modality_order) {
        AblationSpec s = parse_ablation_cell(tok);
        s.metric = parse_metric(metric);
        s.modality = mod;
        grid.push_back(s);
      }
    }
  }
  ojson config = cfg.to_json();
  config["grid"] = grid_tokens;
  config["modalities"] = modalities;
  config["metrics"] = metric_names;
  const std::string hash = stage_hash("ablate", config, hex64(dir_fingerprint(cfg.data)));
  const std::vector<std::string> outputs{"ablation.csv", "ablation.json"};
  if (up_to_date(cfg.out, hash, outputs)) {
    out << "up to date: " << cfg.out.string() << "\n";
    return 0;
  }
  const auto recs = ingest(cfg.data).recordings;
  const FoldPlan plan = plan_folds(subject_list(recs), cfg.protocol, cfg.k, cfg.seed);
  const AblationTable table = run_ablation(grid, modalities, recs, plan, cfg.pipeline, lstm_factory(), cfg.threads);
  fs::create_directories(cfg.out);
  write_ablation_csv(cfg.out / "ablation.csv", table);
  ojson cells = ojson::array();
  for (const AblationCell& c : table.cells) {
    ojson cell;
    cell["row"] = c.spec.row_label();
    cell["modality"] = c.spec.modality;
    cell["report"] = to_json(c.report);
    cells.push_back(cell);
  }
  write_json(cfg.out / "ablation.json", {{"config", config}, {"plan", to_json(plan)}, {"cells", cells}});
  write_manifest(cfg.out, "ablate", config, hash, {{"data", cfg.data.string()}}, outputs);
  for (const AblationCell& c : table.cells) {
    out << c.spec.row_label() << " / " << c.spec.modality << ": accuracy " << c.report.pooled_accuracy << " f1 "
        << c.report.pooled_f1 << "\n";
  }
  return 0;
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(is, line);) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadHeader, path.string() + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n)
      throw Error(ErrorCode::DimensionMismatch, path.string() + " is not square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

int cmd_heatmap(const fs::path& spd_dir, std::size_t entry, const fs::path& matrix_path,
                std::vector<std::string> labels, int cell, const fs::path& out_arg, std::ostream& out) {
  const fs::path dir = resolve_output(out_arg);
  SpdMatrix p;
  if (!matrix_path.empty()) {
    p = SpdMatrix(SymMatrix(read_matrix_csv(matrix_path)));
  } else {
    const auto set = read_spd_set(spd_dir / "spd.bin");
    if (entry >= set.size()) throw Error(ErrorCode::InvalidConfig, "entry out of range");
    p = set[entry];
    if (labels.empty() && fs::exists(spd_dir / "manifest.json")) {
      labels = read_json(spd_dir / "manifest.json").value("matrix_labels", std::vector<std::string>{});
    }
  }
  const auto n = static_cast<Eigen::Index>(p.n());
  if (labels.empty())
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back("c" + std::to_string(i));
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "label count does not match the matrix size");
  if (cell < 1) throw Error(ErrorCode::InvalidConfig, "cell size must be >= 1");

  const Eigen::VectorXd inv = p.matrix().diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd r = inv.asDiagonal() * p.matrix() * inv.asDiagonal();
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "heatmap.csv", std::ios::binary | std::ios::trunc);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) os << (j ? "," : "") << fmt(r(i, j));
      os << "\n";
    }
  }
  {
    std::ofstream os(dir / "heatmap.pgm", std::ios::binary | std::ios::trunc);
    const Eigen::Index side = n * cell;
    os << "P5\n" << side << " " << side << "\n255\n";
    for (Eigen::Index y = 0; y < side; ++y) {
      for (Eigen::Index x = 0; x < side; ++x) {
        const double v = std::min(1.0, std::abs(r(y / cell, x / cell)));
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
      }
    }
  }
  {
    std::ofstream os(dir / "heatmap_labels.txt", std::ios::binary | std::ios::trunc);
    for (const std::string& l : labels) os << l << "\n";
  }
  out << "wrote " << n << "x" << n << " heatmap to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SPD-matrix fusion of multichannel signals with LSTM classification", "spdfuse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SyntheticSpec spec;
  std::string synth_out;
  bool null_effect = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset in ingest layout");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--subjects", spec.subjects);
  synth->add_option("--trials", spec.trials_per_subject, "trials per subject");
  synth->add_option("--duration", spec.duration, "seconds per trial");
  synth->add_option("--rate", spec.rate, "sampling rate in Hz");
  synth->add_option("--channels", spec.channels);
  synth->add_option("--slow0", spec.slow_amplitude[0], "slow envelope amplitude, class 0");
  synth->add_option("--slow1", spec.slow_amplitude[1], "slow envelope amplitude, class 1");
  synth->add_option("--period", spec.envelope_period, "envelope period in seconds");
  synth->add_option("--noise", spec.noise);
  synth->add_option("--seed", spec.seed);
  synth->add_flag("--null", null_effect, "equal slow amplitudes for both classes");

  std::string check_data, check_channels;
  auto* check = app.add_subcommand("ingest-check", "validate a dataset directory");
  check->add_option("--data", check_data)->required();
  check->add_option("--channels", check_channels, "comma-separated roster; '*' suffix matches a prefix");

  RunOptions build_opts, map_opts, train_opts, eval_opts, ablate_opts;
  auto* build = app.add_subcommand("build-spd", "segment recordings into SPD matrices");
  build_opts.attach(build, true);

  std::string spd_dir;
  auto* map = app.add_subcommand("map-tangent", "map SPD matrices to tangent vectors at per-subject references");
  map->add_option("--spd", spd_dir, "build-spd output directory")->required();
  map_opts.attach(map, false);

  std::string tangent_dir;
  auto* trainc = app.add_subcommand("train", "train the sequence classifier on tangent vectors");
  trainc->add_option("--tangent", tangent_dir, "map-tangent output directory")->required();
  train_opts.attach(trainc, false);

  auto* evalc = app.add_subcommand("evaluate", "cross-validate the full pipeline");
  eval_opts.attach(evalc, true);

  std::string grid = "S,C,P2,P3,P4", metrics = "affine";
  std::vector<std::string> modality_args;
  auto* ablate = app.add_subcommand("ablate", "run the representation ablation grid");
  ablate_opts.attach(ablate, true);
  ablate->add_option("--grid", grid, "cells among S, C, P1..P4");
  ablate->add_option("--modality", modality_args, "NAME=ch1,ch2 (repeatable)");
  ablate->add_option("--metrics", metrics, "affine and/or log-euclidean");

  std::string heat_spd, heat_matrix, heat_labels, heat_out;
  std::size_t heat_entry = 0;
  int heat_cell = 8;
  auto* heat = app.add_subcommand("heatmap", "correlation-scaled heatmap of one SPD matrix");
  heat->add_option("--spd", heat_spd, "build-spd output directory");
  heat->add_option("--entry", heat_entry, "matrix index within the SPD set");
  heat->add_option("--matrix", heat_matrix, "square CSV matrix instead of an SPD set");
  heat->add_option("--labels", heat_labels, "comma-separated axis labels");
  heat->add_option("--cell", heat_cell, "pixels per matrix entry");
  heat->add_option("--out", heat_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  auto split = [](const std::string& s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    for (std::string c; std::getline(ss, c, ',');)
      if (!c.empty()) v.push_back(c);
    return v;
  };
  auto need = [](const RunConfig& c, bool data, bool output) {
    if (data && c.data.empty()) throw Error(ErrorCode::InvalidConfig, "--data is required");
    if (output && c.out.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
  };

  try {
    if (*synth) {
      if (null_effect) spec.slow_amplitude = SyntheticSpec::null_effect().slow_amplitude;
      return cmd_synth(spec, synth_out, out);
    }
    if (*check) return cmd_ingest_check(check_data, split(check_channels), out);
    if (*build) {
      const RunConfig c = build_opts.build();
      need(c, true, true);
      return cmd_build_spd(c, out);
    }
    if (*map) {
      const RunConfig c = map_opts.build();
      need(c, false, true);
      return cmd_map_tangent(c, spd_dir, out);
    }
    if (*trainc) {
      const RunConfig c = train_opts.build();
      need(c, false, true);
      return cmd_train(c, tangent_dir, out);
    }
    if (*evalc) {
      const RunConfig c = eval_opts.build();
      need(c, true, true);
      return cmd_evaluate(c, out);
    }
    if (*ablate) {
      const RunConfig c = ablate_opts.build();
      need(c, true, true);
      return cmd_ablate(c, split(grid), modality_args, split(metrics), out);
    }
    if (*heat) {
      if (heat_spd.empty() == heat_matrix.empty()) {
        err << "heatmap: give exactly one of --spd or --matrix\n";
        return 1;
      }
      return cmd_heatmap(heat_spd, heat_entry, heat_matrix, split(heat_labels), heat_cell, heat_out, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace spdfuse
