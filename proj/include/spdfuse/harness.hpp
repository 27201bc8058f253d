#pragma once

#include "spdfuse/manifold.hpp"
#include "spdfuse/seqnet.hpp"
#include "spdfuse/signals.hpp"
#include "spdfuse/spdrep.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spdfuse {

enum class Protocol { Loso, KFold };

Protocol parse_protocol(const std::string& name);
std::string to_string(Protocol p);

/// Subject-level fold assignment. Samples never cross folds.
struct FoldPlan {
  Protocol protocol = Protocol::Loso;
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;
  int fold_count = 0;

  std::vector<std::string> subjects_in(int fold) const;
};

/// LOSO gives one fold per subject in sorted order. k-fold shuffles the
/// sorted subjects with the seed and deals them round-robin.
FoldPlan plan_folds(std::vector<std::string> subjects, Protocol protocol, int k, std::uint64_t seed);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  /// (tp + tn) / total; 0 for an empty set.
  double accuracy() const noexcept;
  /// 2tp / (2tp + fp + fn); 0 when the denominator is 0.
  double f1() const noexcept;
  void add(int label, int predicted);
  Confusion& operator+=(const Confusion& o);
};

struct SamplePrediction {
  std::string subject_id;
  std::string trial_id;
  std::size_t start_segment = 0;
  int label = 0;
  double probability = 0.0;
  int predicted = 0;
};

struct FoldReport {
  int fold = 0;
  std::vector<std::string> test_subjects;
  Confusion counts;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::vector<SamplePrediction> predictions;
  bool skipped = false;
  std::string note;
};

/// Confusion counts and metrics recomputed from raw predictions.
FoldReport make_fold_report(int fold, std::vector<SamplePrediction> predictions);

enum class Representation { S, C, P };

struct AblationSpec {
  Representation representation = Representation::P;
  std::optional<int> m;  // present iff representation == P
  std::string modality = "all";
  Metric metric = Metric::AffineInvariant;

  void validate() const;
  /// Row label: "S", "C" or "P(m=2)", with " [log-euclidean]" appended for
  /// that metric.
  std::string row_label() const;
};

/// Parses "S", "C", "P2" ... into a spec (modality and metric left default).
AblationSpec parse_ablation_cell(const std::string& token);

enum class ReferenceMode { PerSubject, TrainGlobal };

ReferenceMode parse_reference_mode(const std::string& name);
std::string to_string(ReferenceMode r);

struct PipelineConfig {
  double common_rate = 4.0;
  double segment_seconds = 10.0;
  SpdConfig spd;
  Representation representation = Representation::P;
  Metric metric = Metric::AffineInvariant;
  ReferenceMode reference = ReferenceMode::PerSubject;
  MeanConfig mean;
  /// Use the last Karcher iterate when the mean stops short of tol; the
  /// fold note records the residual. When false the error propagates.
  bool accept_unconverged_mean = true;
  std::size_t seq_len = 5;
  std::size_t seq_stride = 1;
  TrainConfig train;
  /// Channel filter; empty keeps everything. Entries ending in '*' match by prefix.
  std::vector<std::string> channels;
  bool standardize = true;
  /// Channels whose names start with this prefix compete in ANOVA selection.
  std::string select_prefix;
  std::size_t select_k = 10;
  bool select_global = false;
};

/// Channel filter, resampling to common_rate and a shared channel order
/// (the first recording's). Throws MissingChannel when recordings disagree.
std::vector<Recording> preprocess(std::span<const Recording> recordings, const PipelineConfig& cfg);

/// SPD matrix for one segment under the configured representation. The C
/// representation clamps the cross-covariance spectrum at
/// max(shrinkage, 1e-6) * trace(S) / D.
SpdMatrix represent(const Segment& seg, Representation rep, const SpdConfig& cfg);

/// Karcher mean of one subject's matrices; labels are never consulted.
SpdMatrix subject_reference(std::span<const SpdMatrix> spds, const MeanConfig& cfg = {},
                            Metric metric = Metric::AffineInvariant);

/// Sliding windows of `length` consecutive segment vectors within one trial.
std::vector<VectorSequence> window_sequences(std::span<const Eigen::VectorXd> vectors,
                                             const std::string& subject_id,
                                             const std::string& trial_id, int label,
                                             std::size_t length, std::size_t stride);

class SequenceClassifier {
 public:
  virtual ~SequenceClassifier() = default;
  virtual void fit(std::span<const VectorSequence> train, const TrainConfig& cfg) = 0;
  virtual std::vector<double> predict_proba(std::span<const VectorSequence> seqs) const = 0;
};

class LstmClassifier : public SequenceClassifier {
 public:
  void fit(std::span<const VectorSequence> train, const TrainConfig& cfg) override;
  std::vector<double> predict_proba(std::span<const VectorSequence> seqs) const override;
  const TrainResult& result() const { return result_; }

 private:
  TrainResult result_;
  Pooling pooling_ = Pooling::Last;
};

using ClassifierFactory = std::function<std::unique_ptr<SequenceClassifier>()>;
ClassifierFactory lstm_factory();

struct FoldData {
  std::vector<VectorSequence> train;
  std::vector<VectorSequence> test;
  std::optional<SelectionModel> selection;
  std::vector<std::string> selected_channels;  // empty when no selection ran
  std::vector<std::string> warnings;
};

/// Everything fitted here (selection, standardization, tangent references
/// under TrainGlobal) uses training subjects only, unless select_global.
FoldData prepare_fold(std::span<const Recording> recordings, const FoldPlan& plan, int fold,
                      const PipelineConfig& cfg);

FoldReport run_fold(std::span<const Recording> recordings, const FoldPlan& plan, int fold,
                    const PipelineConfig& cfg, const ClassifierFactory& factory = lstm_factory());

struct EvaluationReport {
  std::vector<FoldReport> folds;
  Confusion pooled;
  double pooled_accuracy = 0.0;
  double pooled_f1 = 0.0;
  double mean_accuracy = 0.0;  // over folds that were not skipped
  double mean_f1 = 0.0;
};

EvaluationReport aggregate(std::vector<FoldReport> folds);

/// Runs every fold, `threads` at a time (0 = hardware concurrency), merging
/// by fold index.
EvaluationReport evaluate(std::span<const Recording> recordings, const FoldPlan& plan,
                          const PipelineConfig& cfg,
                          const ClassifierFactory& factory = lstm_factory(), unsigned threads = 1);

struct AblationCell {
  AblationSpec spec;
  EvaluationReport report;
};

struct AblationTable {
  std::vector<std::string> rows;        // representation labels, grid order
  std::vector<std::string> modalities;  // column groups, grid order
  std::vector<AblationCell> cells;

  const AblationCell* find(const std::string& row, const std::string& modality) const;
};

/// Evaluates each grid cell under `base`, with the cell's representation,
/// m, metric and modality channel list substituted.
AblationTable run_ablation(std::span<const AblationSpec> grid,
                           const std::map<std::string, std::vector<std::string>>& modalities,
                           std::span<const Recording> recordings, const FoldPlan& plan,
                           const PipelineConfig& base,
                           const ClassifierFactory& factory = lstm_factory(), unsigned threads = 1);

nlohmann::json to_json(const FoldReport& r);
nlohmann::json to_json(const EvaluationReport& r);
nlohmann::json to_json(const FoldPlan& p);

/// subject,trial,start_segment,label,probability,predicted,fold
void write_predictions_csv(const std::filesystem::path& path, const EvaluationReport& r);
/// fold,test_subjects,tp,fp,tn,fn,accuracy,f1,skipped plus pooled and mean rows.
void write_folds_csv(const std::filesystem::path& path, const EvaluationReport& r);
/// representation,<modality>:accuracy,<modality>:f1,... using pooled metrics,
/// then the fold-averaged metrics with a ":mean" suffix.
void write_ablation_csv(const std::filesystem::path& path, const AblationTable& t);

}  // namespace spdfuse
