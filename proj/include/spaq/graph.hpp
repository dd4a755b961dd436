#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spaq/drift.hpp"
#include "spaq/error.hpp"

namespace spaq {

using Cycles = std::int64_t;

struct ParamSpec {
  std::string name;
  double optimal = 0.0;
  double tolerance = 1.0;
  /// Standard deviation of the post-calibration reset; defaults to 10% of tolerance.
  std::optional<double> cal_noise;
  std::optional<LogisticDrift> drift;

  double effective_cal_noise() const { return cal_noise.value_or(0.1 * tolerance); }
  bool operator==(const ParamSpec&) const = default;
};

/// Observable model of one check_data rule.
enum class PartKind {
  Deviation,       // rise(tau) + max_i |err_i| / tol_i
  Bernoulli,       // fixed per-cycle chance of falling out of spec
  StateInit,       // cos^2(err/2) of the init pulse
  DriveFrequency,  // Rabi transfer at the drifted detuning, times init fidelity
  PulseTime,       // Rabi transfer at the drifted pulse time, times init fidelity
  XGate,           // X-gate fidelity from phase, detuning and pulse-time errors
};

const char* to_string(PartKind kind);
std::optional<PartKind> part_kind_from_string(std::string_view name);

struct SpecRule {
  enum class Op { AtMost, AtLeast };
  Op op = Op::AtMost;
  double bound = 1.0;

  bool passes(double observable) const {
    return op == Op::AtMost ? observable <= bound : observable >= bound;
  }
  bool operator==(const SpecRule&) const = default;
};

/// One check_data rule with the parameters it controls. Ordinary nodes have a
/// single part; merged nodes carry the parts of every constituent.
struct PartSpec {
  PartKind kind = PartKind::Deviation;
  /// Origin key for random substreams. Merges preserve it so matched-seed
  /// comparisons draw the same noise for the same physical parameter.
  std::string stream;
  SpecRule rule;
  std::vector<ParamSpec> params;

  double fail_probability = 0.0;  // Bernoulli
  std::optional<ExpCurve> rise;   // Deviation
  double rabi_frequency = 1.0;    // physics surrogates
  double pulse_time = 3.14159265358979323846;
  std::string init_node;
  std::string drive_node;
  std::string pulse_node;

  bool operator==(const PartSpec&) const = default;
};

struct NodeSpec {
  std::string id;
  std::vector<std::string> dependencies;
  Cycles timeout = 1;
  Cycles check_cost = 0;
  Cycles calibrate_cost = 1;
  Cycles post_cal_delay = 0;
  std::vector<PartSpec> parts;

  bool operator==(const NodeSpec&) const = default;
};

/// Names a part inside a node; an empty part means the node's first part.
struct PartRef {
  std::string node;
  std::string part;

  bool operator==(const PartRef&) const = default;
};

/// A latent disturbance shared by several nodes. It shifts the first parameter
/// of each target part and is never visible to the scheduler.
struct HiddenCoupling {
  std::string tag;
  std::vector<PartRef> targets;
  double strength = 1.0;
  LogisticDrift drift;
  /// The disturbance's own drift clock restarts every `period` cycles (0: never).
  Cycles period = 0;

  bool operator==(const HiddenCoupling&) const = default;
};

/// The target's first parameter is offset by strength * relative change of
/// the source parameter since the target was last calibrated.
struct ParamCoupling {
  std::string source_node;
  std::string source_param;
  PartRef target;
  double strength = 1.0;

  bool operator==(const ParamCoupling&) const = default;
};

struct GraphSpec {
  std::vector<NodeSpec> nodes;
  std::vector<HiddenCoupling> hidden_couplings;
  std::vector<ParamCoupling> param_couplings;

  bool operator==(const GraphSpec&) const = default;
};

/// A validated, immutable calibration DAG with canonical (id-sorted) node order.
class Graph {
 public:
  Graph() = default;

  const GraphSpec& spec() const { return spec_; }
  const std::vector<NodeSpec>& nodes() const { return spec_.nodes; }
  std::size_t size() const { return spec_.nodes.size(); }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws UnknownNode
  const NodeSpec& node(std::size_t i) const { return spec_.nodes[i]; }
  const NodeSpec& node(std::string_view id) const { return spec_.nodes[index_of(id)]; }

  /// Dependency indices, sorted by id.
  const std::vector<std::size_t>& dependencies(std::size_t i) const { return deps_[i]; }
  const std::vector<std::size_t>& dependents(std::size_t i) const { return dependents_[i]; }
  /// Nodes no other node depends on, sorted by id.
  const std::vector<std::size_t>& sinks() const { return sinks_; }
  const std::vector<std::size_t>& topo() const { return topo_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// True when `ancestor` is reachable from `node` along dependency edges.
  bool depends_on(std::size_t node, std::size_t ancestor) const;

  /// FNV-1a over the canonical serialized form, as 16 hex digits.
  std::string content_hash() const;

 private:
  friend Graph validate_graph(GraphSpec spec);

  GraphSpec spec_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::vector<std::size_t>> deps_;
  std::vector<std::vector<std::size_t>> dependents_;
  std::vector<std::size_t> sinks_;
  std::vector<std::size_t> topo_;
  std::vector<std::string> warnings_;
};

/// Throws GraphError listing every violation (cycle, dangling dependency,
/// duplicate id, invalid timeout, invalid parameter or coupling).
Graph validate_graph(GraphSpec spec);

/// Node ids with every node after all of its dependencies; ties broken
/// lexicographically.
std::vector<std::string> topological_order(const Graph& graph);

/// Default union semantics for a merge: parts concatenated, shortest timeout,
/// costs summed minus one shared setup cycle.
NodeSpec default_merged_spec(const Graph& graph, std::string_view id_a, std::string_view id_b,
                             std::string merged_id);

Graph merge_nodes(const Graph& graph, std::string_view id_a, std::string_view id_b, NodeSpec merged);

/// Makes `dependent` depend on `dependency`.
Graph add_edge(const Graph& graph, std::string_view dependency, std::string_view dependent);

GraphSpec parse_graph_json(std::string_view text);
GraphSpec load_graph_file(const std::string& path);
std::string to_json(const GraphSpec& spec, int indent = 2);

}  // namespace spaq
