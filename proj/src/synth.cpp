#include "spdfuse/synth.hpp"

#include "spdfuse/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace spdfuse {

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "synthetic spec: " + what); };
  if (subjects < 2) fail("needs at least 2 subjects");
  if (trials_per_subject < 2) fail("needs at least 2 trials per subject so both classes appear");
  if (!(duration > 0.0) || !(rate > 0.0)) fail("duration and rate must be positive");
  if (channels < 2) fail("needs at least 2 channels");
  if (!(envelope_period > 0.0)) fail("envelope period must be positive");
  if (!(noise >= 0.0)) fail("noise must be non-negative");
  for (double a : slow_amplitude)
    if (!std::isfinite(a) || a < 0.0) fail("slow amplitudes must be finite and non-negative");
}

SyntheticSpec SyntheticSpec::null_effect() {
  SyntheticSpec s;
  s.slow_amplitude = {0.75, 0.75};
  return s;
}

std::vector<Recording> synthesize(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  const auto d = static_cast<Eigen::Index>(spec.channels);
  const auto n = static_cast<std::size_t>(std::floor(spec.duration * spec.rate + 1e-9));

  Eigen::VectorXd u(d);
  for (Eigen::Index i = 0; i < d; ++i) u(i) = normal(gen);
  u.normalize();

  const double energy = std::max(spec.slow_amplitude[0] * spec.slow_amplitude[0],
                                 spec.slow_amplitude[1] * spec.slow_amplitude[1]);
  std::array<double, 2> fast{};
  for (int c = 0; c < 2; ++c)
    fast[c] = std::sqrt(std::max(0.0, energy - spec.slow_amplitude[c] * spec.slow_amplitude[c]));

  std::vector<Recording> out;
  for (int s = 0; s < spec.subjects; ++s) {
    Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) mix(i, j) += 0.3 * normal(gen);
    char sid[16];
    std::snprintf(sid, sizeof sid, "S%02d", s + 1);

    for (int t = 0; t < spec.trials_per_subject; ++t) {
      const int label = t % 2;
      const double phase = phase_dist(gen);
      Eigen::MatrixXd x(d, static_cast<Eigen::Index>(n));
      Eigen::VectorXd z(d);
      for (std::size_t k = 0; k < n; ++k) {
        for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(gen);
        const double time = static_cast<double>(k) / spec.rate;
        const double env = std::sin(2.0 * std::numbers::pi * time / spec.envelope_period + phase);
        const double drive = spec.slow_amplitude[label] * env + fast[label] * std::abs(env) * normal(gen);
        x.col(static_cast<Eigen::Index>(k)) = spec.noise * (mix * z) + drive * u;
      }
      char tid[16];
      std::snprintf(tid, sizeof tid, "T%02d", t + 1);
      Recording rec{sid, tid, label, {}};
      for (Eigen::Index i = 0; i < d; ++i) {
        Channel ch{"ch" + std::to_string(i), spec.rate, std::vector<double>(n)};
        for (std::size_t k = 0; k < n; ++k) ch.samples[k] = x(i, static_cast<Eigen::Index>(k));
        rec.channels.push_back(std::move(ch));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace spdfuse
