#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spaq {

/// Logistic drift: the per-cycle noise amplitude ramps from ~0 right after
/// calibration up to r_max, crossing r_max/2 at tau_mid.
struct LogisticDrift {
  double r_max = 1.0;
  double tau_mid = 0.0;
  double tau_scale = 1.0;
  double sigma = 0.0;

  bool operator==(const LogisticDrift&) const = default;
};

struct DriftState {
  double current_value = 0.0;
  std::int64_t cycles_since_cal = 0;
};

/// Exponential approach from v0 toward `limit`. With `rising` set the curve
/// models a degrading quantity (v0 below the cap); otherwise a recovering one
/// (v0 above the floor). The closed form is the same either way.
struct ExpCurve {
  double v0 = 0.0;
  double limit = 0.0;
  double lambda = 1.0;
  bool rising = true;

  bool operator==(const ExpCurve&) const = default;
};

struct RabiConfig {
  double rabi_frequency = 1.0;  // rad/cycle
  double detuning = 0.0;        // rad/cycle
  double pulse_time = 0.0;      // cycles
};

/// Nominal drive settings used by the X-gate surrogate.
struct XGateConfig {
  double rabi_frequency = 1.0;
  double pulse_time = 3.14159265358979323846;
};

double logistic_rate(double tau, const LogisticDrift& cfg);

/// One drift cycle. `normal` is a standard normal draw supplied by the caller
/// so that matched-seed scenarios can share noise streams.
DriftState logistic_drift_step(const DriftState& state, double normal, const LogisticDrift& cfg);

template <class Rng>
DriftState logistic_drift_step(const DriftState& state, Rng& rng, const LogisticDrift& cfg) {
  std::normal_distribution<double> unit(0.0, 1.0);
  return logistic_drift_step(state, unit(rng), cfg);
}

double exponential_decay_value(double tau, const ExpCurve& cfg);

double rabi_transition_probability(const RabiConfig& cfg);

double x_gate_fidelity(double phase_err, double detuning, double time_err, const XGateConfig& cfg);

/// Dark-state fidelity of qubit initialization for a pulse-angle error.
double init_fidelity(double angle_err);

/// 64-bit FNV-1a; stable across platforms, used for stream keys and graph hashes.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Seeds an independent generator for (run seed, stream key).
std::mt19937_64 make_stream(std::uint64_t seed, std::string_view key);

}  // namespace spaq
