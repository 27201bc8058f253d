#include "spdfuse/seqnet.hpp"

#include "binio.hpp"
#include "spdfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace spdfuse {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr char kCheckpointMagic[9] = "SPDLSTM1";
constexpr std::uint32_t kCheckpointVersion = 1;

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LayerCache {
  std::vector<MatrixXd> input;  // what the layer consumed at each step
  std::vector<MatrixXd> gates;  // activated i, f, g, o stacked (4H x B)
  std::vector<MatrixXd> c;
  std::vector<MatrixXd> tanh_c;
  std::vector<MatrixXd> h;
};

struct ForwardPass {
  std::vector<LayerCache> layers;
  std::vector<std::vector<MatrixXd>> masks;  // masks[l][t] on the output of layer l
  MatrixXd pooled;                           // H x B
  Eigen::RowVectorXd prob;
};

struct Group {
  std::size_t length = 0;
  std::vector<std::size_t> members;
};

std::vector<Group> group_by_length(std::span<const VectorSequence> seqs) {
  std::vector<Group> groups;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.length == seqs[i].length(); });
    if (it == groups.end()) {
      groups.push_back({seqs[i].length(), {i}});
    } else {
      it->members.push_back(i);
    }
  }
  return groups;
}

void check_input(const NetParams& params, const VectorSequence& seq) {
  if (seq.length() == 0) throw Error(ErrorCode::DimensionMismatch, "empty sequence");
  for (const auto& step : seq.steps) {
    if (static_cast<std::size_t>(step.size()) != params.input_dim) {
      std::ostringstream os;
      os << "sequence step has dimension " << step.size() << ", network expects " << params.input_dim;
      throw Error(ErrorCode::DimensionMismatch, os.str());
    }
  }
}

ForwardPass run_forward(const NetParams& params, std::span<const VectorSequence> seqs,
                        const Group& group, double dropout, std::mt19937_64* rng,
                        Pooling pooling) {
  const auto hidden = static_cast<Index>(params.hidden);
  const auto batch = static_cast<Index>(group.members.size());
  const std::size_t steps = group.length;
  const std::size_t depth = params.layers.size();
  const bool drop = dropout > 0.0 && rng != nullptr;
  const double keep_scale = drop ? 1.0 / (1.0 - dropout) : 1.0;

  ForwardPass pass;
  pass.layers.resize(depth);
  if (drop) pass.masks.resize(depth - 1);

  std::vector<MatrixXd> inputs(steps, MatrixXd(static_cast<Index>(params.input_dim), batch));
  for (std::size_t t = 0; t < steps; ++t)
    for (Index b = 0; b < batch; ++b) inputs[t].col(b) = seqs[group.members[static_cast<std::size_t>(b)]].steps[t];

  for (std::size_t l = 0; l < depth; ++l) {
    const LstmLayer& layer = params.layers[l];
    LayerCache& cache = pass.layers[l];
    cache.input = std::move(inputs);
    MatrixXd h = MatrixXd::Zero(hidden, batch);
    MatrixXd c = MatrixXd::Zero(hidden, batch);
    for (std::size_t t = 0; t < steps; ++t) {
      MatrixXd z = layer.w_in * cache.input[t];
      z.noalias() += layer.w_rec * h;
      z.colwise() += layer.bias;
      MatrixXd gates(4 * hidden, batch);
      gates.topRows(2 * hidden) = z.topRows(2 * hidden).unaryExpr(&sigmoid);
      gates.middleRows(2 * hidden, hidden) = z.middleRows(2 * hidden, hidden).array().tanh().matrix();
      gates.bottomRows(hidden) = z.bottomRows(hidden).unaryExpr(&sigmoid);
      c = (gates.middleRows(hidden, hidden).array() * c.array() +
           gates.topRows(hidden).array() * gates.middleRows(2 * hidden, hidden).array())
              .matrix();
      MatrixXd tc = c.array().tanh().matrix();
      h = (gates.bottomRows(hidden).array() * tc.array()).matrix();
      cache.gates.push_back(std::move(gates));
      cache.c.push_back(c);
      cache.tanh_c.push_back(std::move(tc));
      cache.h.push_back(h);
    }
    if (l + 1 < depth) {
      inputs.assign(cache.h.begin(), cache.h.end());
      if (drop) {
        auto& masks = pass.masks[l];
        masks.resize(steps);
        for (std::size_t t = 0; t < steps; ++t) {
          MatrixXd mask(hidden, batch);
          for (Index b = 0; b < batch; ++b)
            for (Index u = 0; u < hidden; ++u) mask(u, b) = uniform01(*rng) < dropout ? 0.0 : keep_scale;
          inputs[t] = (inputs[t].array() * mask.array()).matrix();
          masks[t] = std::move(mask);
        }
      }
    }
  }

  const LayerCache& top = pass.layers.back();
  if (pooling == Pooling::Last) {
    pass.pooled = top.h.back();
  } else {
    pass.pooled = MatrixXd::Zero(hidden, batch);
    for (const MatrixXd& h : top.h) pass.pooled += h;
    pass.pooled /= static_cast<double>(steps);
  }
  Eigen::RowVectorXd logits = params.head_w.transpose() * pass.pooled;
  logits.array() += params.head_b;
  pass.prob = logits.unaryExpr(&sigmoid);
  return pass;
}

double sample_weight(int label, const ForwardOptions& opts) { return label != 0 ? opts.pos_weight : 1.0; }

void accumulate_group(const NetParams& params, std::span<const VectorSequence> seqs,
                      const Group& group, const ForwardPass& pass, const ForwardOptions& opts,
                      double batch_size, NetParams& grad) {
  const auto hidden = static_cast<Index>(params.hidden);
  const auto batch = static_cast<Index>(group.members.size());
  const std::size_t steps = group.length;
  const std::size_t depth = params.layers.size();

  Eigen::RowVectorXd dlogit(batch);
  for (Index b = 0; b < batch; ++b) {
    const int y = seqs[group.members[static_cast<std::size_t>(b)]].label;
    dlogit(b) = sample_weight(y, opts) * (pass.prob(b) - (y != 0 ? 1.0 : 0.0)) / batch_size;
  }
  grad.head_w.noalias() += pass.pooled * dlogit.transpose();
  grad.head_b += dlogit.sum();
  const MatrixXd dpooled = params.head_w * dlogit;

  std::vector<MatrixXd> dh_ext(steps, MatrixXd::Zero(hidden, batch));
  if (opts.pooling == Pooling::Last) {
    dh_ext.back() = dpooled;
  } else {
    for (auto& d : dh_ext) d = dpooled / static_cast<double>(steps);
  }

  for (std::size_t l = depth; l-- > 0;) {
    const LstmLayer& layer = params.layers[l];
    const LayerCache& cache = pass.layers[l];
    LstmLayer& g = grad.layers[l];
    MatrixXd dh_next = MatrixXd::Zero(hidden, batch);
    MatrixXd dc_next = MatrixXd::Zero(hidden, batch);
    std::vector<MatrixXd> dh_below;
    if (l > 0) dh_below.resize(steps);

    for (std::size_t t = steps; t-- > 0;) {
      const MatrixXd& gates = cache.gates[t];
      const auto gi = gates.topRows(hidden).array();
      const auto gf = gates.middleRows(hidden, hidden).array();
      const auto gg = gates.middleRows(2 * hidden, hidden).array();
      const auto go = gates.bottomRows(hidden).array();
      const auto tc = cache.tanh_c[t].array();

      const Eigen::ArrayXXd dh = (dh_ext[t] + dh_next).array();
      const Eigen::ArrayXXd dc = dc_next.array() + dh * go * (1.0 - tc * tc);
      MatrixXd dz(4 * hidden, batch);
      dz.topRows(hidden) = (dc * gg * gi * (1.0 - gi)).matrix();
      if (t > 0) {
        dz.middleRows(hidden, hidden) = (dc * cache.c[t - 1].array() * gf * (1.0 - gf)).matrix();
      } else {
        dz.middleRows(hidden, hidden).setZero();
      }
      dz.middleRows(2 * hidden, hidden) = (dc * gi * (1.0 - gg * gg)).matrix();
      dz.bottomRows(hidden) = (dh * tc * go * (1.0 - go)).matrix();
      dc_next = (dc * gf).matrix();

      g.w_in.noalias() += dz * cache.input[t].transpose();
      if (t > 0) g.w_rec.noalias() += dz * cache.h[t - 1].transpose();
      g.bias += dz.rowwise().sum();
      dh_next.noalias() = layer.w_rec.transpose() * dz;
      if (l > 0) {
        MatrixXd dinput = layer.w_in.transpose() * dz;
        if (!pass.masks.empty()) dinput = (dinput.array() * pass.masks[l - 1][t].array()).matrix();
        dh_below[t] = std::move(dinput);
      }
    }
    if (l > 0) dh_ext = std::move(dh_below);
  }
}

void check_batch(const NetParams& params, std::span<const VectorSequence> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptySet, "empty batch");
  for (const VectorSequence& s : batch) check_input(params, s);
}

}  // namespace

void VectorSequence::validate() const {
  if (steps.empty()) throw Error(ErrorCode::DimensionMismatch, "sequence has no steps");
  for (const auto& s : steps) {
    if (s.size() != steps.front().size()) throw Error(ErrorCode::DimensionMismatch, "ragged sequence");
    if (!s.allFinite()) throw Error(ErrorCode::NonFinite, "sequence has non-finite values");
  }
}

NetParams NetParams::zeros(std::size_t input_dim, std::size_t hidden, std::size_t layers) {
  NetParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  const auto h = static_cast<Index>(hidden);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<Index>(l == 0 ? input_dim : hidden);
    p.layers.push_back({MatrixXd::Zero(4 * h, in), MatrixXd::Zero(4 * h, h), Eigen::VectorXd::Zero(4 * h)});
  }
  p.head_w = Eigen::VectorXd::Zero(h);
  return p;
}

NetParams NetParams::init(std::size_t input_dim, std::size_t hidden, std::size_t layers,
                          std::uint64_t seed) {
  NetParams p = zeros(input_dim, hidden, layers);
  std::mt19937_64 gen(seed);
  auto fill = [&](auto& m, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * uniform01(gen) - 1.0) * bound;
  };
  const auto h = static_cast<Index>(hidden);
  for (LstmLayer& layer : p.layers) {
    fill(layer.w_in, static_cast<double>(layer.w_in.cols()));
    fill(layer.w_rec, static_cast<double>(hidden));
    layer.bias.segment(h, h).setOnes();
  }
  fill(p.head_w, static_cast<double>(hidden));
  return p;
}

std::size_t NetParams::size() const {
  std::size_t n = static_cast<std::size_t>(head_w.size()) + 1;
  for (const LstmLayer& l : layers)
    n += static_cast<std::size_t>(l.w_in.size() + l.w_rec.size() + l.bias.size());
  return n;
}

Eigen::VectorXd NetParams::flatten() const {
  Eigen::VectorXd out(static_cast<Index>(size()));
  Index k = 0;
  auto put = [&](const auto& m) {
    out.segment(k, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    k += m.size();
  };
  for (const LstmLayer& l : layers) {
    put(l.w_in);
    put(l.w_rec);
    put(l.bias);
  }
  put(head_w);
  out(k) = head_b;
  return out;
}

void NetParams::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) {
    throw Error(ErrorCode::DimensionMismatch, "flat parameter vector has the wrong length");
  }
  Index k = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(k, m.size());
    k += m.size();
  };
  for (LstmLayer& l : layers) {
    take(l.w_in);
    take(l.w_rec);
    take(l.bias);
  }
  take(head_w);
  head_b = flat(k);
}

bool NetParams::all_finite() const { return flatten().allFinite(); }

bool operator==(const NetParams& a, const NetParams& b) {
  return a.input_dim == b.input_dim && a.hidden == b.hidden && a.layers.size() == b.layers.size() &&
         a.flatten() == b.flatten();
}

Pooling parse_pooling(const std::string& name) {
  if (name == "last") return Pooling::Last;
  if (name == "mean") return Pooling::Mean;
  throw Error(ErrorCode::InvalidConfig, "unknown pooling '" + name + "'");
}

std::string to_string(Pooling p) { return p == Pooling::Last ? "last" : "mean"; }

void TrainConfig::validate() const {
  // lr = 0 is accepted: it freezes the parameters, which tests rely on.
  if (!(lr >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must lie in [0, 1)");
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "Adam eps must be > 0");
  if (hidden < 1 || layers < 1) throw Error(ErrorCode::InvalidConfig, "network needs hidden >= 1 and layers >= 1");
  if (!(pos_weight > 0.0)) throw Error(ErrorCode::InvalidConfig, "pos_weight must be > 0");
}

double forward(const NetParams& params, const VectorSequence& seq, Mode mode, std::mt19937_64& rng,
               const ForwardOptions& opts) {
  check_input(params, seq);
  const Group group{seq.length(), {0}};
  const bool train_mode = mode == Mode::Train;
  return run_forward(params, std::span<const VectorSequence>(&seq, 1), group,
                     train_mode ? opts.dropout : 0.0, train_mode ? &rng : nullptr, opts.pooling)
      .prob(0);
}

double forward(const NetParams& params, const VectorSequence& seq, const ForwardOptions& opts) {
  std::mt19937_64 unused(0);
  return forward(params, seq, Mode::Eval, unused, opts);
}

double loss(double prob, int label) {
  const double p = std::clamp(prob, 1e-7, 1.0 - 1e-7);
  return label != 0 ? -std::log(p) : -std::log(1.0 - p);
}

Gradients backward(const NetParams& params, std::span<const VectorSequence> batch,
                   const ForwardOptions& opts, std::mt19937_64& rng) {
  check_batch(params, batch);
  Gradients out{NetParams::zeros(params.input_dim, params.hidden, params.layers.size()), 0.0};
  const double n = static_cast<double>(batch.size());
  for (const Group& group : group_by_length(batch)) {
    const ForwardPass pass = run_forward(params, batch, group, opts.dropout, &rng, opts.pooling);
    for (std::size_t b = 0; b < group.members.size(); ++b) {
      const int y = batch[group.members[b]].label;
      out.loss += sample_weight(y, opts) * loss(pass.prob(static_cast<Index>(b)), y) / n;
    }
    accumulate_group(params, batch, group, pass, opts, n, out.grad);
  }
  return out;
}

double batch_loss(const NetParams& params, std::span<const VectorSequence> batch,
                  const ForwardOptions& opts, std::mt19937_64& rng) {
  check_batch(params, batch);
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  for (const Group& group : group_by_length(batch)) {
    const ForwardPass pass = run_forward(params, batch, group, opts.dropout, &rng, opts.pooling);
    for (std::size_t b = 0; b < group.members.size(); ++b) {
      const int y = batch[group.members[b]].label;
      total += sample_weight(y, opts) * loss(pass.prob(static_cast<Index>(b)), y) / n;
    }
  }
  return total;
}

TrainResult train(std::span<const VectorSequence> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::EmptySet, "no training sequences");
  bool has_pos = false, has_neg = false;
  for (const VectorSequence& s : data) {
    s.validate();
    (s.label != 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw Error(ErrorCode::SingleClass, "training data holds a single class");

  TrainResult result{NetParams::init(data.front().dim(), cfg.hidden, cfg.layers, cfg.seed), {}};
  NetParams& params = result.params;
  check_batch(params, data);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Eigen::VectorXd theta = params.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  double beta1_t = 1.0, beta2_t = 1.0;
  const ForwardOptions opts = cfg.forward_options();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<VectorSequence> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);

      Gradients g = backward(params, batch, opts, rng);
      Eigen::VectorXd grad = g.grad.flatten();
      if (!grad.allFinite() || !std::isfinite(g.loss)) {
        std::ostringstream os;
        os << "non-finite gradient at epoch " << epoch + 1 << ", batch starting at " << start
           << " (batch loss " << g.loss << ")";
        throw Error(ErrorCode::NonFinite, os.str());
      }
      const double norm = grad.norm();
      if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) grad *= cfg.grad_clip / norm;

      beta1_t *= cfg.beta1;
      beta2_t *= cfg.beta2;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const Eigen::ArrayXd m_hat = m.array() / (1.0 - beta1_t);
      const Eigen::ArrayXd v_hat = v.array() / (1.0 - beta2_t);
      theta.array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
      params.assign(theta);
      epoch_loss += g.loss * static_cast<double>(end - start);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

Prediction predict(const NetParams& params, std::span<const VectorSequence> seqs, Pooling pooling) {
  Prediction out;
  out.labels.resize(seqs.size());
  out.probabilities.resize(seqs.size());
  if (seqs.empty()) return out;
  for (const VectorSequence& s : seqs) check_input(params, s);
  for (const Group& group : group_by_length(seqs)) {
    const ForwardPass pass = run_forward(params, seqs, group, 0.0, nullptr, pooling);
    for (std::size_t b = 0; b < group.members.size(); ++b) {
      const double p = pass.prob(static_cast<Index>(b));
      out.probabilities[group.members[b]] = p;
      out.labels[group.members[b]] = p >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& params, Pooling pooling) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os.write(kCheckpointMagic, 8);
  binio::put_u32(os, kCheckpointVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(params.input_dim));
  binio::put_u32(os, static_cast<std::uint32_t>(params.hidden));
  binio::put_u32(os, static_cast<std::uint32_t>(params.layers.size()));
  binio::put_u32(os, pooling == Pooling::Mean ? 1u : 0u);
  auto put_rows = [&](const MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) binio::put_f64(os, m(i, j));
  };
  for (const LstmLayer& l : params.layers) {
    put_rows(l.w_in);
    put_rows(l.w_rec);
    for (Index i = 0; i < l.bias.size(); ++i) binio::put_f64(os, l.bias(i));
  }
  for (Index i = 0; i < params.head_w.size(); ++i) binio::put_f64(os, params.head_w(i));
  binio::put_f64(os, params.head_b);
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

NetParams load_checkpoint(const std::filesystem::path& path, Pooling* pooling) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const std::string what = "checkpoint " + path.string();
  binio::expect_magic(is, kCheckpointMagic, what);
  if (binio::get_u32(is, what) != kCheckpointVersion) throw Error(ErrorCode::BadArtifact, "unsupported version in " + what);
  const std::uint32_t input = binio::get_u32(is, what);
  const std::uint32_t hidden = binio::get_u32(is, what);
  const std::uint32_t layers = binio::get_u32(is, what);
  const std::uint32_t pool = binio::get_u32(is, what);
  if (pool > 1 || hidden == 0 || layers == 0) throw Error(ErrorCode::BadArtifact, "bad header in " + what);
  if (pooling != nullptr) *pooling = pool == 1 ? Pooling::Mean : Pooling::Last;

  NetParams p = NetParams::zeros(input, hidden, layers);
  auto get_rows = [&](MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = binio::get_f64(is, what);
  };
  for (LstmLayer& l : p.layers) {
    get_rows(l.w_in);
    get_rows(l.w_rec);
    for (Index i = 0; i < l.bias.size(); ++i) l.bias(i) = binio::get_f64(is, what);
  }
  for (Index i = 0; i < p.head_w.size(); ++i) p.head_w(i) = binio::get_f64(is, what);
  p.head_b = binio::get_f64(is, what);
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::BadArtifact, "trailing bytes in " + what);
  return p;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) os << i + 1 << ',' << curve[i] << '\n';
}

}  // namespace spdfuse
