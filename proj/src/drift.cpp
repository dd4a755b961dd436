#include "spaq/drift.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

namespace spaq {

double logistic_rate(double tau, const LogisticDrift& cfg) {
  return cfg.r_max / (1.0 + std::exp(-(tau - cfg.tau_mid) / cfg.tau_scale));
}

DriftState logistic_drift_step(const DriftState& state, double normal, const LogisticDrift& cfg) {
  DriftState next = state;
  if (cfg.sigma != 0.0) {
    next.current_value += normal * cfg.sigma * logistic_rate(static_cast<double>(state.cycles_since_cal), cfg);
  }
  next.cycles_since_cal = state.cycles_since_cal + 1;
  return next;
}

double exponential_decay_value(double tau, const ExpCurve& cfg) {
  // v0 + (limit - v0)(1 - e^{-lambda tau}) == limit + (v0 - limit) e^{-lambda tau}
  double w = std::exp(-cfg.lambda * tau);
  if (cfg.rising) return cfg.v0 + (cfg.limit - cfg.v0) * (1.0 - w);
  return cfg.limit + (cfg.v0 - cfg.limit) * w;
}

double rabi_transition_probability(const RabiConfig& cfg) {
  double om2 = cfg.rabi_frequency * cfg.rabi_frequency;
  double gen2 = om2 + cfg.detuning * cfg.detuning;
  double s = std::sin(std::sqrt(gen2) * cfg.pulse_time / 2.0);
  return std::clamp(om2 / gen2 * s * s, 0.0, 1.0);
}

double x_gate_fidelity(double phase_err, double detuning, double time_err, const XGateConfig& cfg) {
  double p = rabi_transition_probability({cfg.rabi_frequency, detuning, cfg.pulse_time + time_err});
  double c = std::cos(phase_err / 2.0);
  return std::clamp(p * c * c, 0.0, 1.0);
}

double init_fidelity(double angle_err) {
  double c = std::cos(angle_err / 2.0);
  return c * c;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view key) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed ^ fnv1a(key);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return std::mt19937_64(z);
}

}  // namespace spaq
