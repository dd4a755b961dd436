#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spaq/graph.hpp"
#include "spaq/property.hpp"
#include "spaq/sim.hpp"
#include "spaq/smc.hpp"
#include "spaq/trace.hpp"

namespace spaq {

struct BatchConfig {
  int runs = 20;
  Cycles cycles = 10000;
  std::uint64_t seed = 1;
  int jobs = 1;
  Cycles drift_sample_every = 1000;
  bool oracle = false;
};

/// Runs `runs` simulations with seeds first_seed, first_seed+1, ... in up to
/// `jobs` threads. Results are ordered by seed.
std::vector<SimResult> run_batch(const Graph& graph, const SimConfig& base, int runs, std::uint64_t first_seed,
                                 int jobs);
Dataset pool(const std::vector<SimResult>& results);

struct ScenarioResult {
  std::string label;
  SimMode mode = SimMode::Baseline;
  std::string graph_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<double> availability;
  double mean_availability = 0.0;
  /// Per-node cost summed over runs.
  std::map<std::string, NodeCost> cost;
  std::vector<SimResult> runs;
};

ScenarioResult run_scenario(const std::string& label, const Graph& graph, const SimConfig& base,
                            const BatchConfig& batch, std::uint64_t first_seed);

struct Recommendation {
  std::string kind;  // delay | merge | add_edge
  std::string subject;
  std::string value;
  std::string property;
  SmcResult smc;
  std::string note;
};

struct VerdictCell {
  Verdict verdict = Verdict::InsufficientData;
  std::size_t n = 0;
  std::size_t successes = 0;
  double p_value = 1.0;
  std::string property;
};

/// Ordered pairs (trigger, response): "does response fail within the window
/// after trigger fails".
struct VerdictMatrix {
  std::vector<std::string> nodes;
  std::map<std::pair<std::string, std::string>, VerdictCell> cells;

  const VerdictCell& at(const std::string& trigger, const std::string& response) const;
};

struct Comparison {
  std::string before;
  std::string after;
  int paired_wins = 0;  // runs where after > before
  int runs = 0;
  double mean_delta = 0.0;
};

struct ExperimentReport {
  std::string experiment;
  std::string label;
  std::vector<ScenarioResult> scenarios;
  std::vector<Recommendation> recommendations;
  std::optional<VerdictMatrix> matrix;
  std::optional<Comparison> comparison;
  std::string graph_before;
  std::string graph_after;
  std::vector<std::string> notes;
};

// ---- analyses -------------------------------------------------------------

struct DelayRecommendation {
  std::string node;
  Cycles delay = 0;
  std::string property;
  SmcResult bound;
  std::size_t samples = 0;
  std::size_t censored = 0;
};

/// Per node: lower confidence bound on the F-quantile of calibration-anchored
/// TTF; nodes without enough data get delay 0.
std::vector<DelayRecommendation> recommend_delays(const Dataset& ds, double C, double F = 0.05);

VerdictMatrix pairwise_cofailure_scan(const Dataset& ds, const std::vector<std::string>& nodes, Cycles window,
                                      double p0, double C);

struct ShiftTestResult {
  std::string property;
  SmcResult main;
  std::string control_property;
  /// Same response conditioned on shifts of at most rel_shift; absent when
  /// there were no such calibrations.
  std::optional<SmcResult> control;
};

ShiftTestResult param_shift_failure_test(const Dataset& ds, const std::string& node_a, const std::string& param,
                                         double rel_shift, const std::string& node_b, double p0, double C);

// ---- experiments ----------------------------------------------------------

struct Exp1Config {
  BatchConfig batch;
  Cycles hf_timeout = 5;
  /// High-frequency runs use seeds batch.seed + hf_seed_offset + i.
  std::uint64_t hf_seed_offset = 1000;
  double F = 0.05;
  double C = 0.95;
  bool force_zero_delays = false;
};

struct Exp2Config {
  BatchConfig batch;
  std::string node_a = "A";
  std::string param = "param_A";
  std::string node_b = "B";
  double rel_shift = 0.1;
  double p0 = 0.33;
  double C = 0.95;
  std::string merged_id = "AB";
};

struct Exp3Config {
  BatchConfig batch;
  Cycles window = 25;
  double p0 = 0.33;
  double C = 0.9;
};

ExperimentReport run_delayed_checks_experiment(const Graph& graph, const Exp1Config& cfg);
ExperimentReport run_internode_experiment(const Graph& graph, const Exp2Config& cfg);
ExperimentReport run_hidden_dependency_experiment(const Graph& graph, const Exp3Config& cfg);

/// Copy of `spec` with every parameter coupling strength set to zero.
GraphSpec without_param_couplings(GraphSpec spec);

Comparison compare(const ScenarioResult& before, const ScenarioResult& after);

std::string smc_to_json(const SmcResult& r, int indent = -1);
std::string report_to_json(const ExperimentReport& report, int indent = 2);
/// report.json, costs.csv, availability.csv, plus heatmap.csv / delays.csv /
/// recommendations.csv when relevant, and traces/ when requested.
void write_report(const ExperimentReport& report, const std::string& outdir, bool write_traces);

}  // namespace spaq
