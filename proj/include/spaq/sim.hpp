#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spaq/graph.hpp"
#include "spaq/trace.hpp"

namespace spaq {

enum class SimMode { Baseline, HighFrequency, Adaptive };

const char* to_string(SimMode mode);
std::optional<SimMode> sim_mode_from_string(std::string_view s);

struct SimConfig {
  Cycles total_cycles = 100000;
  std::uint64_t seed = 0;
  /// baseline: configured timeouts, no post-calibration delays.
  /// high_frequency: every timeout replaced by high_frequency_timeout.
  /// adaptive: configured timeouts plus post-calibration delays.
  SimMode mode = SimMode::Baseline;
  Cycles high_frequency_timeout = 5;
  /// Also log ground-truth out-of-spec onsets and recoveries.
  bool oracle_ttf = false;
  /// Downsampling period for drift_sample events; 0 disables them.
  Cycles drift_sample_every = 1000;
  int max_retries = 3;
  /// check_state also fails when a dependency was calibrated after the
  /// node's last verification.
  bool recheck_after_dependency_calibration = true;
  /// Adaptive-mode delays, overriding NodeSpec::post_cal_delay.
  std::map<std::string, Cycles> delay_overrides;
  /// Defaults to "<mode>-<seed>".
  std::string run_id;
};

struct NodeCost {
  Cycles check_cycles = 0;
  Cycles calibrate_cycles = 0;
  std::int64_t checks = 0;
  std::int64_t failed_checks = 0;
  std::int64_t calibrations = 0;

  bool operator==(const NodeCost&) const = default;
};

struct SimResult {
  Run run;
  /// Maintenance episode of each event (parallel to run.events); 0 outside
  /// episodes (initial calibration, drift samples, oracle events).
  std::vector<std::uint32_t> episodes;
  Cycles available_cycles = 0;
  double availability = 0.0;
  std::map<std::string, NodeCost> costs;
};

enum class MaintainOutcome { Skipped, Verified, Recalibrated };

/// Discrete-time Optimus maintenance over one validated graph. A run is
/// strictly sequential: check and calibrate costs advance a single clock while
/// every parameter keeps drifting.
class Simulator {
 public:
  /// Keeps its own copy of the graph.
  Simulator(const Graph& graph, SimConfig cfg);
  ~Simulator();
  Simulator(Simulator&&) noexcept;

  /// Calibrates every node once in topological order.
  void initialize();
  /// One maintenance pass over the sink nodes, or one idle cycle when nothing
  /// was due. Returns the events it emitted.
  std::vector<TraceEvent> step();
  bool finished() const;
  Cycles now() const;

  /// Runs a single maintenance episode rooted at `node`.
  MaintainOutcome maintain(const std::string& node);
  /// Runs the diagnosis of `node` in a fresh episode; returns the dependency
  /// ids calibrated, in calibration order.
  std::vector<std::string> diagnose(const std::string& node);

  /// Advances the clock without any maintenance.
  void advance_idle(Cycles cycles);
  void set_param(const std::string& node, const std::string& param, double value);
  double param(const std::string& node, const std::string& param) const;
  bool in_spec(const std::string& node) const;

  const std::vector<TraceEvent>& events() const;
  SimResult finish() &&;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SimResult run_simulation(const Graph& graph, const SimConfig& cfg);

struct AvailabilityReport {
  double availability = 0.0;
  Cycles available_cycles = 0;
  std::map<std::string, NodeCost> per_node_cost;
};

/// Availability of a recorded run: cycles where every node is in spec and no
/// operation is executing, over total cycles. In-spec status comes from
/// oracle events when the run logged them, otherwise a node is taken as out
/// of spec from a failed check until its next pass or successful calibration.
AvailabilityReport availability(const Run& run, const Graph& graph);

}  // namespace spaq
