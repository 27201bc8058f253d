#include "spdfuse/error.hpp"
#include "spdfuse/seqnet.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

using namespace spdfuse;
using spdfuse::testing::Rng;

namespace {

VectorSequence random_sequence(Rng& rng, std::size_t dim, std::size_t len, int label) {
  VectorSequence s;
  s.label = label;
  for (std::size_t t = 0; t < len; ++t) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-1.5, 1.5);
    s.steps.push_back(v);
  }
  return s;
}

// Sequences whose label is the sign of the mean first coordinate.
std::vector<VectorSequence> separable_toy(Rng& rng, std::size_t count) {
  std::vector<VectorSequence> out;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    VectorSequence s;
    s.label = label;
    const double centre = label == 1 ? 1.0 : -1.0;
    for (int t = 0; t < 3; ++t) s.steps.push_back(Eigen::Vector2d(centre + 0.3 * rng.normal(), rng.normal()));
    out.push_back(s);
  }
  return out;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Single time step of the full network written out with scalar loops.
double single_step_oracle(const NetParams& p, const Eigen::VectorXd& x) {
  std::vector<double> input(x.data(), x.data() + x.size());
  const std::size_t h = p.hidden;
  for (const LstmLayer& layer : p.layers) {
    std::vector<double> out(h);
    for (std::size_t u = 0; u < h; ++u) {
      double z[4];
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const auto row = static_cast<Eigen::Index>(gate * h + u);
        z[gate] = layer.bias(row);
        for (std::size_t k = 0; k < input.size(); ++k) z[gate] += layer.w_in(row, static_cast<Eigen::Index>(k)) * input[k];
      }
      const double c = sigm(z[0]) * std::tanh(z[2]);
      out[u] = sigm(z[3]) * std::tanh(c);
    }
    input = out;
  }
  double logit = p.head_b;
  for (std::size_t u = 0; u < h; ++u) logit += p.head_w(static_cast<Eigen::Index>(u)) * input[u];
  return sigm(logit);
}

}  // namespace

TEST(Forward, ZeroNetworkGivesHalf) {
  Rng rng(51);
  const NetParams p = NetParams::zeros(5, 8);
  EXPECT_EQ(forward(p, random_sequence(rng, 5, 4, 0)), 0.5);
}

TEST(Forward, EvalModeIsBitIdentical) {
  Rng rng(52);
  const NetParams p = NetParams::init(6, 16, 2, 3);
  const VectorSequence s = random_sequence(rng, 6, 5, 1);
  std::mt19937_64 a(1), b(999);
  ForwardOptions opts;
  opts.dropout = 0.5;
  EXPECT_EQ(forward(p, s, Mode::Eval, a, opts), forward(p, s, Mode::Eval, b, opts));
}

TEST(Forward, SingleStepMatchesHandOracleAndIgnoresZeroPadding) {
  Rng rng(53);
  NetParams p = NetParams::init(3, 5, 2, 11);
  for (LstmLayer& l : p.layers) {
    l.w_rec.setZero();
    l.bias.segment(10, 5).setZero();  // cell-candidate bias: zero input keeps the state at zero
  }
  const VectorSequence one = random_sequence(rng, 3, 1, 0);
  EXPECT_NEAR(forward(p, one), single_step_oracle(p, one.steps[0]), 1e-14);

  VectorSequence padded = one;
  padded.steps.insert(padded.steps.begin(), 2, Eigen::VectorXd::Zero(3));
  EXPECT_NEAR(forward(p, padded), forward(p, one), 1e-14);
}

TEST(Forward, DimensionMismatch) {
  Rng rng(54);
  const NetParams p = NetParams::zeros(4, 3);
  try {
    (void)forward(p, random_sequence(rng, 5, 2, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Forward, DropoutExpectationMatchesEval) {
  Rng rng(55);
  NetParams p = NetParams::init(3, 6, 2, 21);
  Eigen::VectorXd flat = p.flatten() * 0.3;
  p.assign(flat);
  const VectorSequence s = random_sequence(rng, 3, 4, 0);
  ForwardOptions opts;
  opts.dropout = 0.2;
  std::mt19937_64 gen(5);
  const int draws = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = forward(p, s, Mode::Train, gen, opts);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sq / draws - mean * mean) / draws);
  EXPECT_LE(std::abs(mean - forward(p, s, opts)), 3.0 * se);
}

TEST(Loss, Values) {
  EXPECT_NEAR(loss(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(0.5, 1), 0.6931, 1e-4);
  EXPECT_NEAR(loss(0.9, 1), 0.10536, 1e-5);
  EXPECT_LT(loss(1.0, 1), 1e-6);
  EXPECT_LT(loss(0.0, 0), 1e-6);
  EXPECT_TRUE(std::isfinite(loss(0.0, 1)));
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(56);
  for (int config = 0; config < 20; ++config) {
    const std::size_t dim = static_cast<std::size_t>(rng.integer(1, 4));
    NetParams p = NetParams::init(dim, 4, 2, static_cast<std::uint64_t>(config));
    std::vector<VectorSequence> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_sequence(rng, dim, static_cast<std::size_t>(rng.integer(1, 3)), i % 2));
    batch.push_back(random_sequence(rng, dim, 3, 1));
    ForwardOptions opts;
    opts.dropout = config % 2 == 0 ? 0.0 : 0.3;
    opts.pooling = config % 3 == 0 ? Pooling::Mean : Pooling::Last;
    opts.pos_weight = config % 4 == 0 ? 2.5 : 1.0;

    const std::uint64_t mask_seed = 77 + static_cast<std::uint64_t>(config);
    std::mt19937_64 g(mask_seed);
    const Eigen::VectorXd analytic = backward(p, batch, opts, g).grad.flatten();

    const Eigen::VectorXd theta = p.flatten();
    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      p.assign(tp);
      std::mt19937_64 gp(mask_seed);
      const double lp = batch_loss(p, batch, opts, gp);
      p.assign(tm);
      std::mt19937_64 gm(mask_seed);
      const double lm = batch_loss(p, batch, opts, gm);
      const double numeric = (lp - lm) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic(k)), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic(k)) / denom);
    }
    p.assign(theta);
    EXPECT_LE(worst, 1e-4) << "config " << config;
  }
}

TEST(Backward, DuplicatedBatchKeepsMeanGradient) {
  Rng rng(57);
  const NetParams p = NetParams::init(3, 5, 2, 4);
  std::vector<VectorSequence> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_sequence(rng, 3, 3, i % 2));
  std::vector<VectorSequence> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  std::mt19937_64 g1(0), g2(0);
  const Eigen::VectorXd a = backward(p, batch, {}, g1).grad.flatten();
  const Eigen::VectorXd b = backward(p, doubled, {}, g2).grad.flatten();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backward, ZeroGradientAtSeparableMinimum) {
  // Zero network, balanced labels: every weight sees zero features or
  // cancelling labels; the head bias gradient is p - mean(y) = 0.
  Rng rng(58);
  const NetParams p = NetParams::zeros(2, 3);
  std::vector<VectorSequence> batch{random_sequence(rng, 2, 2, 0), random_sequence(rng, 2, 2, 1)};
  batch[1].steps = batch[0].steps;
  std::mt19937_64 g(0);
  EXPECT_LT(backward(p, batch, {}, g).grad.flatten().cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Train, SeparableToyReachesHighAccuracy) {
  Rng rng(59);
  const auto data = separable_toy(rng, 200);
  TrainConfig cfg;
  cfg.seed = 3;
  const TrainResult r = train(data, cfg);
  const Prediction pred = predict(r.params, data);
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += pred.labels[i] == data[i].label;
  EXPECT_GE(correct, 198);
  EXPECT_EQ(r.loss_curve.size(), 50u);
}

TEST(Train, ZeroLearningRateFreezesParameters) {
  Rng rng(60);
  const auto data = separable_toy(rng, 20);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 3;
  cfg.hidden = 8;
  const TrainResult r = train(data, cfg);
  EXPECT_EQ(r.params, NetParams::init(2, 8, 2, cfg.seed));
}

TEST(Train, DeterministicUnderSeed) {
  Rng rng(61);
  const auto data = separable_toy(rng, 40);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.hidden = 16;
  const TrainResult a = train(data, cfg), b = train(data, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  cfg.seed = 43;
  EXPECT_FALSE(train(data, cfg).params == a.params);
}

TEST(Train, SingleClassRejected) {
  Rng rng(62);
  std::vector<VectorSequence> data{random_sequence(rng, 2, 2, 1), random_sequence(rng, 2, 2, 1)};
  try {
    (void)train(data, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClass);
  }
}

TEST(Train, LossCurveMostlyNonIncreasingAfterWarmup) {
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const auto data = separable_toy(rng, 64);
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.hidden = 16;
    cfg.epochs = 30;
    cfg.dropout = 0.0;
    cfg.batch_size = data.size();
    const TrainResult r = train(data, cfg);
    bool ok = true;
    for (std::size_t e = 5; e < r.loss_curve.size(); ++e) ok = ok && r.loss_curve[e] <= r.loss_curve[e - 1];
    monotone += ok;
  }
  EXPECT_GE(monotone, 9);
}

TEST(Predict, TieBreakAndRange) {
  Rng rng(63);
  const NetParams zero = NetParams::zeros(2, 4);
  const std::vector<VectorSequence> seqs{random_sequence(rng, 2, 3, 0)};
  const Prediction p = predict(zero, seqs);
  EXPECT_EQ(p.probabilities[0], 0.5);
  EXPECT_EQ(p.labels[0], 1);

  const NetParams net = NetParams::init(2, 8, 2, 9);
  std::vector<VectorSequence> many;
  for (int i = 0; i < 50; ++i) many.push_back(random_sequence(rng, 2, static_cast<std::size_t>(1 + i % 4), 0));
  for (double prob : predict(net, many).probabilities) {
    EXPECT_GT(prob, 0.0);
    EXPECT_LT(prob, 1.0);
  }
}

TEST(Predict, HeadBiasMonotone) {
  Rng rng(64);
  NetParams net = NetParams::init(3, 8, 2, 10);
  std::vector<VectorSequence> seqs;
  for (int i = 0; i < 20; ++i) seqs.push_back(random_sequence(rng, 3, 3, 0));
  std::vector<double> prev = predict(net, seqs).probabilities;
  for (int step = 0; step < 10; ++step) {
    net.head_b += 0.25;
    const std::vector<double> cur = predict(net, seqs).probabilities;
    for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_GE(cur[i], prev[i]);
    prev = cur;
  }
}

TEST(Predict, MatchesSingleForward) {
  Rng rng(65);
  const NetParams net = NetParams::init(3, 8, 2, 12);
  std::vector<VectorSequence> seqs;
  for (int i = 0; i < 7; ++i) seqs.push_back(random_sequence(rng, 3, static_cast<std::size_t>(1 + i % 3), 0));
  const Prediction p = predict(net, seqs, Pooling::Mean);
  ForwardOptions opts;
  opts.pooling = Pooling::Mean;
  for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_NEAR(p.probabilities[i], forward(net, seqs[i], opts), 1e-15);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto dir = std::filesystem::temp_directory_path() / "spdfuse_ckpt_test";
  std::filesystem::create_directories(dir);
  const NetParams net = NetParams::init(5, 7, 2, 13);
  save_checkpoint(dir / "m.bin", net, Pooling::Mean);
  EXPECT_EQ(std::filesystem::file_size(dir / "m.bin"), 8 + 5 * 4 + 8 * net.size());
  Pooling pool = Pooling::Last;
  EXPECT_EQ(load_checkpoint(dir / "m.bin", &pool), net);
  EXPECT_EQ(pool, Pooling::Mean);

  std::filesystem::resize_file(dir / "m.bin", 100);
  EXPECT_THROW((void)load_checkpoint(dir / "m.bin"), Error);
  std::filesystem::remove_all(dir);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), Error);
}
