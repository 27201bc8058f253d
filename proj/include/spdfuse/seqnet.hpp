#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace spdfuse {

/// T tangent vectors of one trial window, sharing a label.
struct VectorSequence {
  std::vector<Eigen::VectorXd> steps;
  int label = 0;
  std::string subject_id;
  std::string trial_id;
  std::size_t start_segment = 0;

  std::size_t length() const noexcept { return steps.size(); }
  std::size_t dim() const noexcept { return steps.empty() ? 0 : static_cast<std::size_t>(steps.front().size()); }
  /// Throws on T == 0, ragged steps or non-finite values.
  void validate() const;
};

/// Gate blocks are stacked in the order input, forget, cell, output.
struct LstmLayer {
  Eigen::MatrixXd w_in;   // 4H x input
  Eigen::MatrixXd w_rec;  // 4H x H
  Eigen::VectorXd bias;   // 4H
};

struct NetParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::vector<LstmLayer> layers;
  Eigen::VectorXd head_w;  // H
  double head_b = 0.0;

  static NetParams zeros(std::size_t input_dim, std::size_t hidden, std::size_t layers = 2);
  /// Uniform in +-1/sqrt(fan_in) per weight matrix, zero biases except the
  /// forget gate at 1.0.
  static NetParams init(std::size_t input_dim, std::size_t hidden, std::size_t layers,
                        std::uint64_t seed);

  std::size_t size() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  bool all_finite() const;
  friend bool operator==(const NetParams& a, const NetParams& b);
};

enum class Pooling { Last, Mean };
enum class Mode { Train, Eval };

Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling p);

struct ForwardOptions {
  double dropout = 0.0;     // between LSTM layers, train mode only
  Pooling pooling = Pooling::Last;
  double pos_weight = 1.0;  // loss weight of positive samples
};

struct TrainConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 50;
  double dropout = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  double grad_clip = 5.0;  // global norm; <= 0 disables
  double pos_weight = 1.0;
  Pooling pooling = Pooling::Last;
  std::size_t hidden = 128;
  std::size_t layers = 2;

  void validate() const;
  ForwardOptions forward_options() const { return {dropout, pooling, pos_weight}; }
};

/// Probability of the positive class for one sequence. Train mode draws
/// dropout masks from `rng`; eval mode is deterministic and ignores it.
double forward(const NetParams& params, const VectorSequence& seq, Mode mode, std::mt19937_64& rng,
               const ForwardOptions& opts = {});
double forward(const NetParams& params, const VectorSequence& seq, const ForwardOptions& opts = {});

/// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
double loss(double prob, int label);

struct Gradients {
  NetParams grad;
  double loss = 0.0;  // mean (weighted) batch loss in train mode
};

/// Analytic gradient of the mean batch loss by backpropagation through time.
/// Dropout masks are drawn from `rng` in a fixed order, so batch_loss with an
/// rng in the same state sees the same masks.
Gradients backward(const NetParams& params, std::span<const VectorSequence> batch,
                   const ForwardOptions& opts, std::mt19937_64& rng);
double batch_loss(const NetParams& params, std::span<const VectorSequence> batch,
                  const ForwardOptions& opts, std::mt19937_64& rng);

struct TrainResult {
  NetParams params;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

/// Adam with bias correction, per-epoch shuffling and global-norm clipping.
/// Bit-reproducible for a fixed seed.
TrainResult train(std::span<const VectorSequence> data, const TrainConfig& cfg);

struct Prediction {
  std::vector<int> labels;  // probability >= 0.5 maps to 1
  std::vector<double> probabilities;
};

Prediction predict(const NetParams& params, std::span<const VectorSequence> seqs,
                   Pooling pooling = Pooling::Last);

/// Checkpoint layout (all little-endian):
///   8 bytes  magic "SPDLSTM1"
///   u32      format version (1)
///   u32      input_dim, hidden, layers, pooling (0 = last, 1 = mean)
///   f64[]    per layer: w_in (4H x input, row-major), w_rec (4H x H,
///            row-major), bias (4H); then head_w (H), head_b
void save_checkpoint(const std::filesystem::path& path, const NetParams& params, Pooling pooling);
NetParams load_checkpoint(const std::filesystem::path& path, Pooling* pooling = nullptr);

/// "epoch,loss" CSV, one row per epoch starting at 1.
void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve);

}  // namespace spdfuse
