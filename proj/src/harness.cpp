#include "spdfuse/harness.hpp"

#include "spdfuse/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace spdfuse {

namespace {

bool channel_matches(const std::string& name, const std::vector<std::string>& filter) {
  if (filter.empty()) return true;
  for (const std::string& f : filter) {
    if (!f.empty() && f.back() == '*') {
      if (name.compare(0, f.size() - 1, f, 0, f.size() - 1) == 0) return true;
    } else if (name == f) {
      return true;
    }
  }
  return false;
}

bool is_candidate(const std::string& name, const std::string& prefix) {
  return !prefix.empty() && name.compare(0, prefix.size(), prefix) == 0;
}

SelectionModel fit_selection(std::span<const Recording> recs, const std::vector<std::size_t>& fit_on,
                             const std::vector<std::size_t>& candidates, std::size_t k,
                             const std::string& fitted_on) {
  std::size_t rows = 0;
  for (std::size_t r : fit_on) {
    std::size_t len = SIZE_MAX;
    for (std::size_t c : candidates) len = std::min(len, recs[r].channels[c].samples.size());
    rows += len;
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(candidates.size()));
  std::vector<int> labels;
  labels.reserve(rows);
  Eigen::Index row = 0;
  for (std::size_t r : fit_on) {
    std::size_t len = SIZE_MAX;
    for (std::size_t c : candidates) len = std::min(len, recs[r].channels[c].samples.size());
    for (std::size_t t = 0; t < len; ++t, ++row) {
      for (std::size_t j = 0; j < candidates.size(); ++j)
        x(row, static_cast<Eigen::Index>(j)) = recs[r].channels[candidates[j]].samples[t];
      labels.push_back(recs[r].label);
    }
  }
  return anova_select(x, labels, std::min(k, candidates.size()), fitted_on);
}

SpdMatrix reference_mean(std::span<const SpdMatrix> set, const PipelineConfig& cfg, const std::string& who,
                         std::vector<std::string>& warnings) {
  try {
    return geometric_mean(set, cfg.mean, cfg.metric);
  } catch (const MeanNoConvergence& e) {
    if (!cfg.accept_unconverged_mean) throw;
    std::ostringstream os;
    os << "reference " << who << " unconverged (residual " << e.residual() << ")";
    warnings.push_back(os.str());
    return e.last_iterate();
  }
}

std::uint64_t fold_seed(std::uint64_t seed, int fold) { return seed + static_cast<std::uint64_t>(fold); }

}  // namespace

std::vector<Recording> preprocess(std::span<const Recording> recordings, const PipelineConfig& cfg) {
  std::vector<Recording> out;
  out.reserve(recordings.size());
  std::vector<std::string> order;
  for (const Recording& rec : recordings) {
    rec.validate();
    Recording r{rec.subject_id, rec.trial_id, rec.label, {}};
    for (const Channel& ch : rec.channels) {
      if (!channel_matches(ch.name, cfg.channels)) continue;
      r.channels.push_back(ch.rate == cfg.common_rate ? ch : resample(ch, cfg.common_rate));
    }
    if (out.empty()) {
      for (const Channel& ch : r.channels) order.push_back(ch.name);
      if (order.empty()) throw Error(ErrorCode::MissingChannel, "channel filter leaves no channels");
    } else {
      if (r.channels.size() != order.size()) {
        throw Error(ErrorCode::MissingChannel, rec.subject_id + "/" + rec.trial_id +
                                                   " does not carry the same channels as the first recording");
      }
      std::vector<Channel> sorted;
      for (const std::string& name : order) {
        const Channel* ch = r.find(name);
        if (ch == nullptr) {
          throw Error(ErrorCode::MissingChannel, rec.subject_id + "/" + rec.trial_id + " lacks channel " + name);
        }
        sorted.push_back(*ch);
      }
      r.channels = std::move(sorted);
    }
    out.push_back(std::move(r));
  }
  return out;
}

Protocol parse_protocol(const std::string& name) {
  if (name == "loso") return Protocol::Loso;
  if (name == "kfold") return Protocol::KFold;
  throw Error(ErrorCode::InvalidConfig, "unknown protocol '" + name + "'");
}

std::string to_string(Protocol p) { return p == Protocol::Loso ? "loso" : "kfold"; }

ReferenceMode parse_reference_mode(const std::string& name) {
  if (name == "subject") return ReferenceMode::PerSubject;
  if (name == "train-global") return ReferenceMode::TrainGlobal;
  throw Error(ErrorCode::InvalidConfig, "unknown reference mode '" + name + "'");
}

std::string to_string(ReferenceMode r) { return r == ReferenceMode::PerSubject ? "subject" : "train-global"; }

std::vector<std::string> FoldPlan::subjects_in(int fold) const {
  std::vector<std::string> out;
  for (const auto& [subject, f] : assignments)
    if (f == fold) out.push_back(subject);
  return out;
}

FoldPlan plan_folds(std::vector<std::string> subjects, Protocol protocol, int k, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2) throw Error(ErrorCode::TooFewSubjects, "cross-validation needs at least 2 subjects");

  FoldPlan plan;
  plan.protocol = protocol;
  plan.seed = seed;
  if (protocol == Protocol::Loso) {
    plan.k = static_cast<int>(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) plan.assignments[subjects[i]] = static_cast<int>(i);
  } else {
    if (k < 2 || static_cast<std::size_t>(k) > subjects.size()) {
      std::ostringstream os;
      os << k << "-fold plan over " << subjects.size() << " subjects";
      throw Error(ErrorCode::TooFewSubjects, os.str());
    }
    plan.k = k;
    std::mt19937_64 gen(seed);
    for (std::size_t i = subjects.size(); i-- > 1;) std::swap(subjects[i], subjects[gen() % (i + 1)]);
    for (std::size_t i = 0; i < subjects.size(); ++i)
      plan.assignments[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  plan.fold_count = plan.k;
  return plan;
}

double Confusion::accuracy() const noexcept {
  return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
}

double Confusion::f1() const noexcept {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

void Confusion::add(int label, int predicted) {
  if (label != 0) {
    (predicted != 0 ? tp : fn) += 1;
  } else {
    (predicted != 0 ? fp : tn) += 1;
  }
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

FoldReport make_fold_report(int fold, std::vector<SamplePrediction> predictions) {
  FoldReport r;
  r.fold = fold;
  for (const SamplePrediction& p : predictions) r.counts.add(p.label, p.predicted);
  r.accuracy = r.counts.accuracy();
  r.f1 = r.counts.f1();
  r.predictions = std::move(predictions);
  return r;
}

void AblationSpec::validate() const {
  if ((representation == Representation::P) != m.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "ablation cell: m is required for P and only for P");
  }
  if (m && (*m < 1 || *m > 4)) throw Error(ErrorCode::InvalidConfig, "ablation cell: m must lie in 1..4");
}

std::string AblationSpec::row_label() const {
  std::string label = representation == Representation::S   ? "S"
                      : representation == Representation::C ? "C"
                                                            : "P(m=" + std::to_string(m.value_or(0)) + ")";
  if (metric == Metric::LogEuclidean) label += " [log-euclidean]";
  return label;
}

AblationSpec parse_ablation_cell(const std::string& token) {
  AblationSpec spec;
  if (token == "S") {
    spec.representation = Representation::S;
  } else if (token == "C") {
    spec.representation = Representation::C;
  } else if (token.size() == 2 && token[0] == 'P' && token[1] >= '1' && token[1] <= '4') {
    spec.representation = Representation::P;
    spec.m = token[1] - '0';
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown ablation cell '" + token + "' (use S, C, P1..P4)");
  }
  return spec;
}

SpdMatrix represent(const Segment& seg, Representation rep, const SpdConfig& cfg) {
  if (rep == Representation::P) return segment_to_spd(seg, cfg);
  SpdConfig single = cfg;
  single.m = 1;
  single.validate(seg.channels());
  Segment work = seg;
  if (cfg.centering == Centering::PerSegment) work.data.colwise() -= work.data.rowwise().mean();
  const SymMatrix s = covariance(work);
  if (rep == Representation::S) return block_p(s, cross_covariance(work), single);
  const double floor = std::max(cfg.shrinkage, 1e-6) * s.trace() / static_cast<double>(s.n());
  if (!(floor > 0.0)) throw NotPositiveDefinite(0.0, "cross-covariance floor needs a nonzero covariance trace");
  return spectral_floor(cross_covariance(work), floor);
}

SpdMatrix subject_reference(std::span<const SpdMatrix> spds, const MeanConfig& cfg, Metric metric) {
  return geometric_mean(spds, cfg, metric);
}

std::vector<VectorSequence> window_sequences(std::span<const Eigen::VectorXd> vectors,
                                             const std::string& subject_id,
                                             const std::string& trial_id, int label,
                                             std::size_t length, std::size_t stride) {
  if (length < 1 || stride < 1) throw Error(ErrorCode::InvalidConfig, "sequence length and stride must be >= 1");
  std::vector<VectorSequence> out;
  for (std::size_t start = 0; start + length <= vectors.size(); start += stride) {
    VectorSequence s;
    s.steps.assign(vectors.begin() + static_cast<std::ptrdiff_t>(start),
                   vectors.begin() + static_cast<std::ptrdiff_t>(start + length));
    s.label = label;
    s.subject_id = subject_id;
    s.trial_id = trial_id;
    s.start_segment = start;
    out.push_back(std::move(s));
  }
  return out;
}

void LstmClassifier::fit(std::span<const VectorSequence> train_set, const TrainConfig& cfg) {
  result_ = spdfuse::train(train_set, cfg);
  pooling_ = cfg.pooling;
}

std::vector<double> LstmClassifier::predict_proba(std::span<const VectorSequence> seqs) const {
  return predict(result_.params, seqs, pooling_).probabilities;
}

ClassifierFactory lstm_factory() {
  return [] { return std::make_unique<LstmClassifier>(); };
}

FoldData prepare_fold(std::span<const Recording> recordings, const FoldPlan& plan, int fold,
                      const PipelineConfig& cfg) {
  std::vector<Recording> recs = preprocess(recordings, cfg);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto it = plan.assignments.find(recs[i].subject_id);
    if (it == plan.assignments.end()) {
      throw Error(ErrorCode::InvalidConfig, "subject " + recs[i].subject_id + " is not in the fold plan");
    }
    (it->second == fold ? test_idx : train_idx).push_back(i);
  }

  FoldData data;
  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < recs.front().channels.size(); ++c)
    if (is_candidate(recs.front().channels[c].name, cfg.select_prefix)) candidates.push_back(c);
  if (!candidates.empty() && !train_idx.empty()) {
    std::vector<std::size_t> fit_on = train_idx;
    if (cfg.select_global) {
      fit_on.resize(recs.size());
      std::iota(fit_on.begin(), fit_on.end(), std::size_t{0});
    }
    data.selection = fit_selection(recs, fit_on, candidates, cfg.select_k,
                                   cfg.select_global ? "global" : "fold-" + std::to_string(fold));
    std::set<std::size_t> keep_candidates;
    for (std::size_t idx : data.selection->selected_indices) keep_candidates.insert(candidates[idx]);
    for (std::size_t idx : data.selection->selected_indices)
      data.selected_channels.push_back(recs.front().channels[candidates[idx]].name);
    for (Recording& r : recs) {
      std::vector<Channel> kept;
      for (std::size_t c = 0; c < r.channels.size(); ++c)
        if (!is_candidate(r.channels[c].name, cfg.select_prefix) || keep_candidates.count(c) > 0)
          kept.push_back(std::move(r.channels[c]));
      r.channels = std::move(kept);
    }
  }

  if (cfg.standardize && !train_idx.empty()) {
    std::vector<Recording> train_recs;
    for (std::size_t i : train_idx) train_recs.push_back(recs[i]);
    const ChannelScaler scaler = ChannelScaler::fit(train_recs);
    for (Recording& r : recs) r = scaler.apply(r);
  }

  std::vector<std::vector<SpdMatrix>> spds(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (const Segment& seg :
         assemble_segments(recs[i], {}, cfg.segment_seconds, cfg.common_rate, cfg.spd.centering)) {
      spds[i].push_back(represent(seg, cfg.representation, cfg.spd));
    }
  }

  std::map<std::string, TangentSpace> spaces;
  if (cfg.reference == ReferenceMode::PerSubject) {
    std::map<std::string, std::vector<SpdMatrix>> by_subject;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      auto& bucket = by_subject[recs[i].subject_id];
      bucket.insert(bucket.end(), spds[i].begin(), spds[i].end());
    }
    for (const auto& [subject, set] : by_subject)
      spaces.emplace(subject, TangentSpace(reference_mean(set, cfg, subject, data.warnings), cfg.metric, subject));
  } else {
    std::vector<SpdMatrix> pool;
    for (std::size_t i : train_idx) pool.insert(pool.end(), spds[i].begin(), spds[i].end());
    if (pool.empty()) throw Error(ErrorCode::EmptySet, "no training matrices for a global reference");
    const TangentSpace global(reference_mean(pool, cfg, "train-global", data.warnings), cfg.metric, "train-global");
    for (const Recording& r : recs) spaces.emplace(r.subject_id, global);
  }

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const TangentSpace& space = spaces.at(recs[i].subject_id);
    std::vector<Eigen::VectorXd> vectors;
    vectors.reserve(spds[i].size());
    for (const SpdMatrix& p : spds[i]) vectors.push_back(space.map(p).values);
    auto windows = window_sequences(vectors, recs[i].subject_id, recs[i].trial_id, recs[i].label,
                                    cfg.seq_len, cfg.seq_stride);
    auto& target = plan.assignments.at(recs[i].subject_id) == fold ? data.test : data.train;
    target.insert(target.end(), std::make_move_iterator(windows.begin()), std::make_move_iterator(windows.end()));
  }
  return data;
}

FoldReport run_fold(std::span<const Recording> recordings, const FoldPlan& plan, int fold,
                    const PipelineConfig& cfg, const ClassifierFactory& factory) {
  const FoldData data = prepare_fold(recordings, plan, fold, cfg);
  const std::vector<std::string> test_subjects = plan.subjects_in(fold);

  auto skipped = [&](const std::string& note) {
    FoldReport r;
    r.fold = fold;
    r.test_subjects = test_subjects;
    r.skipped = true;
    r.note = note;
    return r;
  };
  const bool has_pos = std::any_of(data.train.begin(), data.train.end(), [](const auto& s) { return s.label != 0; });
  const bool has_neg = std::any_of(data.train.begin(), data.train.end(), [](const auto& s) { return s.label == 0; });
  if (!has_pos || !has_neg) return skipped("SingleClassFold: training subjects hold a single class");
  if (data.test.empty()) return skipped("no test sequences");

  TrainConfig tc = cfg.train;
  tc.seed = fold_seed(cfg.train.seed, fold);
  std::unique_ptr<SequenceClassifier> model = factory();
  model->fit(data.train, tc);
  const std::vector<double> probs = model->predict_proba(data.test);

  std::vector<SamplePrediction> preds;
  preds.reserve(data.test.size());
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const VectorSequence& s = data.test[i];
    preds.push_back({s.subject_id, s.trial_id, s.start_segment, s.label, probs[i], probs[i] >= 0.5 ? 1 : 0});
  }
  FoldReport r = make_fold_report(fold, std::move(preds));
  r.test_subjects = test_subjects;
  for (const std::string& w : data.warnings) r.note += (r.note.empty() ? "" : "; ") + w;
  return r;
}

EvaluationReport aggregate(std::vector<FoldReport> folds) {
  EvaluationReport out;
  double acc = 0.0, f1 = 0.0;
  int used = 0;
  for (const FoldReport& f : folds) {
    if (f.skipped) continue;
    out.pooled += f.counts;
    acc += f.accuracy;
    f1 += f.f1;
    ++used;
  }
  out.pooled_accuracy = out.pooled.accuracy();
  out.pooled_f1 = out.pooled.f1();
  out.mean_accuracy = used > 0 ? acc / used : 0.0;
  out.mean_f1 = used > 0 ? f1 / used : 0.0;
  out.folds = std::move(folds);
  return out;
}

EvaluationReport evaluate(std::span<const Recording> recordings, const FoldPlan& plan,
                          const PipelineConfig& cfg, const ClassifierFactory& factory, unsigned threads) {
  const auto count = static_cast<std::size_t>(plan.fold_count);
  std::vector<FoldReport> reports(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < count; f = next++) {
      try {
        reports[f] = run_fold(recordings, plan, static_cast<int>(f), cfg, factory);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate(std::move(reports));
}

const AblationCell* AblationTable::find(const std::string& row, const std::string& modality) const {
  for (const AblationCell& c : cells)
    if (c.spec.row_label() == row && c.spec.modality == modality) return &c;
  return nullptr;
}

AblationTable run_ablation(std::span<const AblationSpec> grid,
                           const std::map<std::string, std::vector<std::string>>& modalities,
                           std::span<const Recording> recordings, const FoldPlan& plan,
                           const PipelineConfig& base, const ClassifierFactory& factory, unsigned threads) {
  AblationTable table;
  for (const AblationSpec& spec : grid) {
    spec.validate();
    const auto mod = modalities.find(spec.modality);
    if (mod == modalities.end()) throw Error(ErrorCode::InvalidConfig, "unknown modality '" + spec.modality + "'");
    PipelineConfig cfg = base;
    cfg.representation = spec.representation;
    cfg.spd.m = spec.m.value_or(1);
    cfg.metric = spec.metric;
    cfg.channels = mod->second;
    table.cells.push_back({spec, evaluate(recordings, plan, cfg, factory, threads)});
    const std::string row = spec.row_label();
    if (std::find(table.rows.begin(), table.rows.end(), row) == table.rows.end()) table.rows.push_back(row);
    if (std::find(table.modalities.begin(), table.modalities.end(), spec.modality) == table.modalities.end())
      table.modalities.push_back(spec.modality);
  }
  return table;
}

nlohmann::json to_json(const FoldReport& r) {
  nlohmann::json preds = nlohmann::json::array();
  for (const SamplePrediction& p : r.predictions) {
    preds.push_back({{"subject", p.subject_id}, {"trial", p.trial_id}, {"start_segment", p.start_segment},
                     {"label", p.label}, {"probability", p.probability}, {"predicted", p.predicted}});
  }
  return {{"fold", r.fold},
          {"test_subjects", r.test_subjects},
          {"tp", r.counts.tp},
          {"fp", r.counts.fp},
          {"tn", r.counts.tn},
          {"fn", r.counts.fn},
          {"accuracy", r.accuracy},
          {"f1", r.f1},
          {"skipped", r.skipped},
          {"note", r.note},
          {"predictions", preds}};
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldReport& f : r.folds) folds.push_back(to_json(f));
  return {{"pooled",
           {{"tp", r.pooled.tp},
            {"fp", r.pooled.fp},
            {"tn", r.pooled.tn},
            {"fn", r.pooled.fn},
            {"accuracy", r.pooled_accuracy},
            {"f1", r.pooled_f1}}},
          {"fold_mean", {{"accuracy", r.mean_accuracy}, {"f1", r.mean_f1}}},
          {"folds", folds}};
}

nlohmann::json to_json(const FoldPlan& p) {
  return {{"protocol", to_string(p.protocol)}, {"k", p.k}, {"seed", p.seed}, {"assignments", p.assignments}};
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os.precision(17);
  return os;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

void write_predictions_csv(const std::filesystem::path& path, const EvaluationReport& r) {
  std::ofstream os = open_out(path);
  os << "subject,trial,start_segment,label,probability,predicted,fold\n";
  for (const FoldReport& f : r.folds)
    for (const SamplePrediction& p : f.predictions)
      os << p.subject_id << ',' << p.trial_id << ',' << p.start_segment << ',' << p.label << ','
         << p.probability << ',' << p.predicted << ',' << f.fold << '\n';
}

void write_folds_csv(const std::filesystem::path& path, const EvaluationReport& r) {
  std::ofstream os = open_out(path);
  os << "fold,test_subjects,tp,fp,tn,fn,accuracy,f1,skipped\n";
  for (const FoldReport& f : r.folds) {
    os << f.fold << ',' << join(f.test_subjects, ';') << ',' << f.counts.tp << ',' << f.counts.fp << ','
       << f.counts.tn << ',' << f.counts.fn << ',' << f.accuracy << ',' << f.f1 << ',' << (f.skipped ? 1 : 0)
       << '\n';
  }
  os << "pooled,," << r.pooled.tp << ',' << r.pooled.fp << ',' << r.pooled.tn << ',' << r.pooled.fn << ','
     << r.pooled_accuracy << ',' << r.pooled_f1 << ",0\n";
  os << "mean,,,,,," << r.mean_accuracy << ',' << r.mean_f1 << ",0\n";
}

void write_ablation_csv(const std::filesystem::path& path, const AblationTable& t) {
  std::ofstream os = open_out(path);
  os << "representation";
  for (const std::string& m : t.modalities) os << ',' << m << ":accuracy," << m << ":f1";
  for (const std::string& m : t.modalities) os << ',' << m << ":accuracy:mean," << m << ":f1:mean";
  os << '\n';
  for (const std::string& row : t.rows) {
    os << row;
    for (const std::string& m : t.modalities) {
      const AblationCell* c = t.find(row, m);
      if (c == nullptr) {
        os << ",,";
      } else {
        os << ',' << c->report.pooled_accuracy << ',' << c->report.pooled_f1;
      }
    }
    for (const std::string& m : t.modalities) {
      const AblationCell* c = t.find(row, m);
      if (c == nullptr) {
        os << ",,";
      } else {
        os << ',' << c->report.mean_accuracy << ',' << c->report.mean_f1;
      }
    }
    os << '\n';
  }
}

}  // namespace spdfuse
