#include "spaq/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace spaq {

namespace {

using Violations = std::vector<GraphError::Violation>;

bool finite(double x) { return std::isfinite(x); }

bool is_physics(PartKind k) {
  return k == PartKind::StateInit || k == PartKind::DriveFrequency || k == PartKind::PulseTime ||
         k == PartKind::XGate;
}

const PartSpec* find_part(const NodeSpec& node, std::string_view part) {
  if (node.parts.empty()) return nullptr;
  if (part.empty()) return &node.parts.front();
  for (const auto& p : node.parts)
    if (p.stream == part) return &p;
  return nullptr;
}

void check_drift(const LogisticDrift& d, const std::string& where, Violations& out) {
  if (!finite(d.r_max) || !finite(d.tau_mid) || !finite(d.tau_scale) || !finite(d.sigma) ||
      d.tau_scale <= 0.0 || d.sigma < 0.0) {
    out.push_back({ErrorCode::InvalidSpec,
                   where + ": logistic drift needs finite values, tau_scale > 0 and sigma >= 0"});
  }
}

void check_node(const NodeSpec& n, Violations& out, std::vector<std::string>& warnings) {
  if (n.id.empty()) out.push_back({ErrorCode::InvalidSpec, "node with empty id"});
  if (n.timeout < 1)
    out.push_back({ErrorCode::InvalidTimeout,
                   "node '" + n.id + "': timeout must be >= 1, got " + std::to_string(n.timeout)});
  if (n.check_cost < 0 || n.calibrate_cost < 0 || n.post_cal_delay < 0)
    out.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "': costs and delays must be >= 0"});
  if (n.calibrate_cost < 1) warnings.push_back("node '" + n.id + "': calibrate_cost < 1");
  if (n.parts.empty()) out.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "': no check rule"});

  std::set<std::string> names;
  for (const auto& part : n.parts) {
    if (!finite(part.rule.bound))
      out.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "': non-finite rule bound"});
    if (part.kind == PartKind::Bernoulli &&
        !(part.fail_probability >= 0.0 && part.fail_probability <= 1.0))
      out.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "': fail_probability outside [0,1]"});
    if (part.kind != PartKind::Bernoulli && part.params.empty())
      out.push_back({ErrorCode::InvalidSpec,
                     "node '" + n.id + "': model '" + to_string(part.kind) + "' needs a parameter"});
    if (part.rise && (!finite(part.rise->v0) || !finite(part.rise->limit) || !(part.rise->lambda > 0.0)))
      out.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "': rise needs lambda > 0"});
    if (is_physics(part.kind) && !(part.rabi_frequency > 0.0 && part.pulse_time >= 0.0))
      out.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "': need rabi_frequency > 0, pulse_time >= 0"});
    for (const auto& p : part.params) {
      std::string where = "node '" + n.id + "' param '" + p.name + "'";
      if (!names.insert(p.name).second)
        out.push_back({ErrorCode::InvalidSpec, where + ": duplicate parameter name"});
      if (!finite(p.optimal))
        out.push_back({ErrorCode::InvalidSpec, where + ": optimal value must be finite"});
      if (!finite(p.tolerance) || p.tolerance <= 0.0)
        out.push_back({ErrorCode::InvalidSpec, where + ": tolerance must be > 0"});
      if (p.cal_noise && !(*p.cal_noise >= 0.0 && finite(*p.cal_noise)))
        out.push_back({ErrorCode::InvalidSpec, where + ": cal_noise must be >= 0"});
      if (p.drift) check_drift(*p.drift, where, out);
    }
  }
}

// Returns one cycle as a list of ids (first == last), or empty.
std::vector<std::string> find_cycle(const GraphSpec& spec,
                                    const std::map<std::string, std::size_t, std::less<>>& index) {
  std::size_t n = spec.nodes.size();
  std::vector<int> color(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::string> cycle;

  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    color[u] = 1;
    stack.push_back(u);
    auto deps = spec.nodes[u].dependencies;
    std::sort(deps.begin(), deps.end());
    for (const auto& d : deps) {
      auto it = index.find(d);
      if (it == index.end()) continue;
      std::size_t v = it->second;
      if (color[v] == 1) {
        auto pos = std::find(stack.begin(), stack.end(), v);
        for (auto p = pos; p != stack.end(); ++p) cycle.push_back(spec.nodes[*p].id);
        cycle.push_back(spec.nodes[v].id);
        return true;
      }
      if (color[v] == 0 && dfs(v)) return true;
    }
    stack.pop_back();
    color[u] = 2;
    return false;
  };
  for (std::size_t u = 0; u < n; ++u)
    if (color[u] == 0 && dfs(u)) break;
  return cycle;
}

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

void rename_ref(PartRef& ref, std::string_view from, const std::string& to) {
  if (ref.node != from) return;
  if (ref.part.empty()) ref.part = std::string(from);
  ref.node = to;
}

}  // namespace

const char* to_string(PartKind kind) {
  switch (kind) {
    case PartKind::Deviation: return "deviation";
    case PartKind::Bernoulli: return "bernoulli";
    case PartKind::StateInit: return "state_init";
    case PartKind::DriveFrequency: return "drive_frequency";
    case PartKind::PulseTime: return "pulse_time";
    case PartKind::XGate: return "x_gate";
  }
  return "?";
}

std::optional<PartKind> part_kind_from_string(std::string_view name) {
  for (auto k : {PartKind::Deviation, PartKind::Bernoulli, PartKind::StateInit, PartKind::DriveFrequency,
                 PartKind::PulseTime, PartKind::XGate})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::optional<std::size_t> Graph::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Graph::index_of(std::string_view id) const {
  auto i = find(id);
  if (!i) throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(id) + "'");
  return *i;
}

bool Graph::depends_on(std::size_t node, std::size_t ancestor) const {
  std::vector<std::size_t> todo = deps_[node];
  std::vector<bool> seen(size(), false);
  while (!todo.empty()) {
    std::size_t u = todo.back();
    todo.pop_back();
    if (u == ancestor) return true;
    if (seen[u]) continue;
    seen[u] = true;
    for (auto d : deps_[u]) todo.push_back(d);
  }
  return false;
}

std::string Graph::content_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(spec_, -1))));
  return buf;
}

Graph validate_graph(GraphSpec spec) {
  Violations violations;
  std::vector<std::string> warnings;

  std::sort(spec.nodes.begin(), spec.nodes.end(),
            [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });

  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    if (!index.emplace(spec.nodes[i].id, i).second)
      violations.push_back({ErrorCode::DuplicateId, "duplicate node id '" + spec.nodes[i].id + "'"});
  }

  std::set<std::string> streams;
  for (auto& n : spec.nodes) {
    check_node(n, violations, warnings);
    for (const auto& part : n.parts)
      if (!streams.insert(part.stream).second)
        violations.push_back({ErrorCode::InvalidSpec, "stream key '" + part.stream + "' used by two parts"});
    std::sort(n.dependencies.begin(), n.dependencies.end());
    for (std::size_t k = 0; k < n.dependencies.size(); ++k) {
      const auto& d = n.dependencies[k];
      if (k > 0 && n.dependencies[k - 1] == d)
        violations.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "' lists dependency '" + d + "' twice"});
      if (!index.count(d))
        violations.push_back(
            {ErrorCode::DanglingDependency, "node '" + n.id + "' depends on unknown node '" + d + "'"});
    }
    for (const auto& part : n.parts) {
      for (const std::string* ref : {&part.init_node, &part.drive_node, &part.pulse_node}) {
        if (!ref->empty() && !index.count(*ref))
          violations.push_back(
              {ErrorCode::DanglingDependency, "node '" + n.id + "' references unknown node '" + *ref + "'"});
      }
      if (part.kind == PartKind::DriveFrequency || part.kind == PartKind::PulseTime) {
        if (part.init_node.empty())
          violations.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "' needs init_node"});
      }
      if ((part.kind == PartKind::PulseTime || part.kind == PartKind::XGate) && part.drive_node.empty())
        violations.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "' needs drive_node"});
      if (part.kind == PartKind::XGate && part.pulse_node.empty())
        violations.push_back({ErrorCode::InvalidSpec, "node '" + n.id + "' needs pulse_node"});
    }
  }

  auto check_target = [&](const PartRef& ref, const std::string& what) {
    auto it = index.find(ref.node);
    if (it == index.end()) {
      violations.push_back({ErrorCode::DanglingDependency, what + " targets unknown node '" + ref.node + "'"});
      return;
    }
    const PartSpec* part = find_part(spec.nodes[it->second], ref.part);
    if (!part)
      violations.push_back({ErrorCode::InvalidSpec, what + " targets unknown part '" + ref.part + "'"});
    else if (part->params.empty())
      violations.push_back({ErrorCode::InvalidSpec, what + " targets node '" + ref.node + "' without parameters"});
  };
  for (const auto& h : spec.hidden_couplings) {
    std::string what = "hidden coupling '" + h.tag + "'";
    if (h.targets.empty()) violations.push_back({ErrorCode::InvalidSpec, what + " has no targets"});
    if (h.period < 0 || !finite(h.strength))
      violations.push_back({ErrorCode::InvalidSpec, what + ": period >= 0 and finite strength required"});
    check_drift(h.drift, what, violations);
    for (const auto& t : h.targets) check_target(t, what);
  }
  for (const auto& c : spec.param_couplings) {
    std::string what = "param coupling " + c.source_node + "." + c.source_param;
    auto it = index.find(c.source_node);
    if (it == index.end()) {
      violations.push_back({ErrorCode::DanglingDependency, what + ": unknown source node"});
    } else {
      bool found = false;
      for (const auto& part : spec.nodes[it->second].parts)
        for (const auto& p : part.params) found = found || p.name == c.source_param;
      if (!found) violations.push_back({ErrorCode::InvalidSpec, what + ": unknown source parameter"});
    }
    if (!finite(c.strength)) violations.push_back({ErrorCode::InvalidSpec, what + ": non-finite strength"});
    check_target(c.target, what);
  }

  auto cycle = find_cycle(spec, index);
  if (!cycle.empty())
    violations.push_back({ErrorCode::CycleDetected, "dependency cycle: " + join(cycle, " -> ")});

  if (!violations.empty()) throw GraphError(std::move(violations));

  Graph g;
  std::size_t n = spec.nodes.size();
  g.index_ = std::move(index);
  g.deps_.assign(n, {});
  g.dependents_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& d : spec.nodes[i].dependencies) {
      std::size_t j = g.index_.at(d);
      g.deps_[i].push_back(j);
      g.dependents_[j].push_back(i);
    }
  for (std::size_t i = 0; i < n; ++i)
    if (g.dependents_[i].empty()) g.sinks_.push_back(i);

  // Kahn's algorithm; indices are id-sorted so a min-heap gives lexicographic ties.
  std::vector<std::size_t> pending(n);
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = g.deps_[i].size();
    if (pending[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    std::size_t u = ready.top();
    ready.pop();
    g.topo_.push_back(u);
    for (auto v : g.dependents_[u])
      if (--pending[v] == 0) ready.push(v);
  }

  g.spec_ = std::move(spec);
  g.warnings_ = std::move(warnings);
  return g;
}

std::vector<std::string> topological_order(const Graph& graph) {
  std::vector<std::string> out;
  out.reserve(graph.size());
  for (auto i : graph.topo()) out.push_back(graph.node(i).id);
  return out;
}

NodeSpec default_merged_spec(const Graph& graph, std::string_view id_a, std::string_view id_b,
                             std::string merged_id) {
  const NodeSpec& a = graph.node(id_a);
  const NodeSpec& b = graph.node(id_b);
  NodeSpec m;
  m.id = std::move(merged_id);
  m.timeout = std::min(a.timeout, b.timeout);
  m.check_cost = std::max<Cycles>(0, a.check_cost + b.check_cost - 1);
  m.calibrate_cost = std::max<Cycles>(1, a.calibrate_cost + b.calibrate_cost - 1);
  m.post_cal_delay = std::min(a.post_cal_delay, b.post_cal_delay);
  m.parts = a.parts;
  std::set<std::string> taken;
  for (const auto& part : a.parts)
    for (const auto& p : part.params) taken.insert(p.name);
  // Parameter names are node-scoped; qualify b's names that clash with a's.
  for (auto part : b.parts) {
    for (auto& p : part.params)
      if (taken.count(p.name)) p.name = b.id + "_" + p.name;
    m.parts.push_back(std::move(part));
  }
  return m;
}

Graph merge_nodes(const Graph& graph, std::string_view id_a, std::string_view id_b, NodeSpec merged) {
  if (id_a == id_b)
    throw Error(ErrorCode::UnknownNode, "merge needs two distinct nodes, got '" + std::string(id_a) + "' twice");
  graph.index_of(id_a);
  graph.index_of(id_b);
  if (merged.id != id_a && merged.id != id_b && graph.find(merged.id))
    throw Error(ErrorCode::DuplicateId, "merged id '" + merged.id + "' already in use");

  GraphSpec spec;
  std::set<std::string> merged_deps;
  for (const auto& n : graph.nodes()) {
    if (n.id == id_a || n.id == id_b) {
      for (const auto& d : n.dependencies)
        if (d != id_a && d != id_b) merged_deps.insert(d);
      continue;
    }
    NodeSpec copy = n;
    std::set<std::string> deps;
    for (const auto& d : n.dependencies) deps.insert(d == id_a || d == id_b ? merged.id : d);
    copy.dependencies.assign(deps.begin(), deps.end());
    for (auto& part : copy.parts)
      for (std::string* ref : {&part.init_node, &part.drive_node, &part.pulse_node})
        if (*ref == id_a || *ref == id_b) *ref = merged.id;
    spec.nodes.push_back(std::move(copy));
  }
  merged.dependencies.assign(merged_deps.begin(), merged_deps.end());
  spec.nodes.push_back(std::move(merged));
  const std::string& mid = spec.nodes.back().id;

  spec.hidden_couplings = graph.spec().hidden_couplings;
  for (auto& h : spec.hidden_couplings)
    for (auto& t : h.targets) {
      rename_ref(t, id_a, mid);
      rename_ref(t, id_b, mid);
    }
  spec.param_couplings = graph.spec().param_couplings;
  auto has_param = [&](const std::string& name) {
    for (const auto& part : spec.nodes.back().parts)
      for (const auto& p : part.params)
        if (p.name == name) return true;
    return false;
  };
  for (auto& c : spec.param_couplings) {
    if (c.source_node == id_b && has_param(std::string(id_b) + "_" + c.source_param))
      c.source_param = std::string(id_b) + "_" + c.source_param;
    if (c.source_node == id_a || c.source_node == id_b) c.source_node = mid;
    rename_ref(c.target, id_a, mid);
    rename_ref(c.target, id_b, mid);
  }

  try {
    return validate_graph(std::move(spec));
  } catch (const GraphError& e) {
    for (const auto& v : e.violations())
      if (v.code == ErrorCode::CycleDetected) throw Error(ErrorCode::MergeCreatesCycle, v.message);
    throw;
  }
}

Graph add_edge(const Graph& graph, std::string_view dependency, std::string_view dependent) {
  graph.index_of(dependency);
  std::size_t to = graph.index_of(dependent);
  const auto& deps = graph.node(to).dependencies;
  if (std::find(deps.begin(), deps.end(), dependency) != deps.end())
    throw Error(ErrorCode::DuplicateEdge, "edge '" + std::string(dependency) + "' -> '" +
                                              std::string(dependent) + "' already exists");
  if (dependency == dependent || graph.depends_on(graph.index_of(dependency), to))
    throw Error(ErrorCode::EdgeCreatesCycle, "edge '" + std::string(dependency) + "' -> '" +
                                                 std::string(dependent) + "' would close a cycle");
  GraphSpec spec = graph.spec();
  spec.nodes[to].dependencies.emplace_back(dependency);
  return validate_graph(std::move(spec));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::ParseError, "graph config: " + msg); }

void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) bad(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + ": bad value for '" + key + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

LogisticDrift parse_drift(const json& j, const std::string& where) {
  require_keys(j, {"model", "r_max", "tau_mid", "tau_scale", "sigma"}, where);
  auto model = get<std::string>(j, "model", where);
  if (model != "logistic") bad(where + ": unknown drift model '" + model + "'");
  LogisticDrift d;
  d.r_max = get_or(j, "r_max", 1.0, where);
  d.tau_mid = get_or(j, "tau_mid", 0.0, where);
  d.tau_scale = get_or(j, "tau_scale", 1.0, where);
  d.sigma = get<double>(j, "sigma", where);
  return d;
}

ojson drift_json(const LogisticDrift& d) {
  return ojson{{"model", "logistic"}, {"r_max", d.r_max}, {"tau_mid", d.tau_mid}, {"tau_scale", d.tau_scale},
               {"sigma", d.sigma}};
}

PartRef parse_ref(const json& j, const std::string& where) {
  if (j.is_string()) return {j.get<std::string>(), ""};
  require_keys(j, {"node", "part"}, where);
  return {get<std::string>(j, "node", where), get_or<std::string>(j, "part", "", where)};
}

ojson ref_json(const PartRef& r) {
  if (r.part.empty()) return r.node;
  return ojson{{"node", r.node}, {"part", r.part}};
}

constexpr std::initializer_list<const char*> kPartKeys = {
    "model", "stream", "rule", "params", "fail_probability", "rise", "rabi_frequency",
    "pulse_time", "init_node", "drive_node", "pulse_node"};

PartSpec parse_part(const json& j, const std::string& default_stream, const std::string& where) {
  PartSpec p;
  auto model = get<std::string>(j, "model", where);
  auto kind = part_kind_from_string(model);
  if (!kind) bad(where + ": unknown model '" + model + "'");
  p.kind = *kind;
  p.stream = get_or<std::string>(j, "stream", default_stream, where);

  if (p.kind == PartKind::Deviation) p.rule = {SpecRule::Op::AtMost, 1.0};
  if (p.kind == PartKind::Bernoulli) p.rule = {SpecRule::Op::AtMost, 0.5};
  if (j.contains("rule")) {
    const auto& r = j.at("rule");
    require_keys(r, {"op", "bound"}, where + ".rule");
    auto op = get<std::string>(r, "op", where + ".rule");
    if (op == "<=") p.rule.op = SpecRule::Op::AtMost;
    else if (op == ">=") p.rule.op = SpecRule::Op::AtLeast;
    else bad(where + ".rule: op must be '<=' or '>='");
    p.rule.bound = get<double>(r, "bound", where + ".rule");
  } else if (is_physics(p.kind)) {
    bad(where + ": model '" + model + "' needs an explicit rule");
  }

  if (j.contains("params")) {
    if (!j.at("params").is_array()) bad(where + ".params must be a list");
    for (const auto& pj : j.at("params")) {
      std::string pw = where + ".params";
      require_keys(pj, {"name", "optimal", "tolerance", "cal_noise", "drift"}, pw);
      ParamSpec ps;
      ps.name = get<std::string>(pj, "name", pw);
      ps.optimal = get<double>(pj, "optimal", pw);
      ps.tolerance = get<double>(pj, "tolerance", pw);
      if (pj.contains("cal_noise")) ps.cal_noise = get<double>(pj, "cal_noise", pw);
      if (pj.contains("drift")) ps.drift = parse_drift(pj.at("drift"), pw + "." + ps.name + ".drift");
      p.params.push_back(std::move(ps));
    }
  }
  p.fail_probability = get_or(j, "fail_probability", 0.0, where);
  if (j.contains("rise")) {
    const auto& r = j.at("rise");
    require_keys(r, {"v0", "limit", "lambda", "mode"}, where + ".rise");
    ExpCurve c;
    c.v0 = get<double>(r, "v0", where + ".rise");
    c.limit = get<double>(r, "limit", where + ".rise");
    c.lambda = get<double>(r, "lambda", where + ".rise");
    auto mode = get_or<std::string>(r, "mode", "rising", where + ".rise");
    if (mode != "rising" && mode != "decaying") bad(where + ".rise: mode must be 'rising' or 'decaying'");
    c.rising = mode == "rising";
    p.rise = c;
  }
  p.rabi_frequency = get_or(j, "rabi_frequency", p.rabi_frequency, where);
  p.pulse_time = get_or(j, "pulse_time", p.pulse_time, where);
  p.init_node = get_or<std::string>(j, "init_node", "", where);
  p.drive_node = get_or<std::string>(j, "drive_node", "", where);
  p.pulse_node = get_or<std::string>(j, "pulse_node", "", where);
  return p;
}

void write_part(ojson& out, const PartSpec& p, const std::string& node_id) {
  out["model"] = to_string(p.kind);
  if (p.stream != node_id) out["stream"] = p.stream;
  out["rule"] = ojson{{"op", p.rule.op == SpecRule::Op::AtMost ? "<=" : ">="}, {"bound", p.rule.bound}};
  ojson params = ojson::array();
  for (const auto& ps : p.params) {
    ojson pj{{"name", ps.name}, {"optimal", ps.optimal}, {"tolerance", ps.tolerance}};
    if (ps.cal_noise) pj["cal_noise"] = *ps.cal_noise;
    if (ps.drift) pj["drift"] = drift_json(*ps.drift);
    params.push_back(std::move(pj));
  }
  out["params"] = std::move(params);
  if (p.kind == PartKind::Bernoulli) out["fail_probability"] = p.fail_probability;
  if (p.rise)
    out["rise"] = ojson{{"v0", p.rise->v0}, {"limit", p.rise->limit}, {"lambda", p.rise->lambda},
                        {"mode", p.rise->rising ? "rising" : "decaying"}};
  if (is_physics(p.kind)) {
    out["rabi_frequency"] = p.rabi_frequency;
    out["pulse_time"] = p.pulse_time;
  }
  if (!p.init_node.empty()) out["init_node"] = p.init_node;
  if (!p.drive_node.empty()) out["drive_node"] = p.drive_node;
  if (!p.pulse_node.empty()) out["pulse_node"] = p.pulse_node;
}

}  // namespace

GraphSpec parse_graph_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(e.what());
  }
  require_keys(root, {"nodes", "hidden_couplings", "param_couplings", "description"}, "document");
  GraphSpec spec;
  if (!root.contains("nodes") || !root.at("nodes").is_array()) bad("'nodes' must be a list");
  for (const auto& nj : root.at("nodes")) {
    std::string where = "node";
    if (nj.is_object() && nj.contains("id") && nj.at("id").is_string())
      where = "node '" + nj.at("id").get<std::string>() + "'";
    std::vector<const char*> keys = {"id", "dependencies", "timeout", "check_cost", "calibrate_cost",
                                     "post_cal_delay", "parts"};
    for (const char* k : kPartKeys) keys.push_back(k);
    if (!nj.is_object()) bad(where + " must be an object");
    for (auto it = nj.begin(); it != nj.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
        bad(where + ": unknown key '" + it.key() + "'");
    }
    NodeSpec n;
    n.id = get<std::string>(nj, "id", where);
    n.dependencies = get_or(nj, "dependencies", std::vector<std::string>{}, where);
    n.timeout = get<Cycles>(nj, "timeout", where);
    n.check_cost = get<Cycles>(nj, "check_cost", where);
    n.calibrate_cost = get<Cycles>(nj, "calibrate_cost", where);
    n.post_cal_delay = get_or<Cycles>(nj, "post_cal_delay", 0, where);
    if (nj.contains("parts")) {
      if (nj.contains("model")) bad(where + ": give either 'parts' or a single 'model', not both");
      if (!nj.at("parts").is_array()) bad(where + ".parts must be a list");
      for (const auto& pj : nj.at("parts")) {
        require_keys(pj, kPartKeys, where + ".parts");
        n.parts.push_back(parse_part(pj, n.id, where + ".parts"));
      }
    } else {
      n.parts.push_back(parse_part(nj, n.id, where));
    }
    spec.nodes.push_back(std::move(n));
  }
  if (root.contains("hidden_couplings")) {
    for (const auto& hj : root.at("hidden_couplings")) {
      require_keys(hj, {"tag", "nodes", "strength", "drift", "period"}, "hidden_couplings");
      HiddenCoupling h;
      h.tag = get<std::string>(hj, "tag", "hidden coupling");
      std::string where = "hidden coupling '" + h.tag + "'";
      if (!hj.contains("nodes") || !hj.at("nodes").is_array()) bad(where + ": 'nodes' must be a list");
      for (const auto& t : hj.at("nodes")) h.targets.push_back(parse_ref(t, where));
      h.strength = get_or(hj, "strength", 1.0, where);
      h.period = get_or<Cycles>(hj, "period", 0, where);
      h.drift = parse_drift(hj.contains("drift") ? hj.at("drift") : json::object(), where + ".drift");
      spec.hidden_couplings.push_back(std::move(h));
    }
  }
  if (root.contains("param_couplings")) {
    for (const auto& cj : root.at("param_couplings")) {
      require_keys(cj, {"source", "param", "target", "strength"}, "param_couplings");
      ParamCoupling c;
      c.source_node = get<std::string>(cj, "source", "param coupling");
      c.source_param = get<std::string>(cj, "param", "param coupling");
      if (!cj.contains("target")) bad("param coupling: missing 'target'");
      c.target = parse_ref(cj.at("target"), "param coupling");
      c.strength = get_or(cj, "strength", 1.0, "param coupling");
      spec.param_couplings.push_back(std::move(c));
    }
  }
  return spec;
}

GraphSpec load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open graph config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph_json(ss.str());
}

std::string to_json(const GraphSpec& spec, int indent) {
  ojson root;
  ojson nodes = ojson::array();
  for (const auto& n : spec.nodes) {
    ojson nj;
    nj["id"] = n.id;
    nj["dependencies"] = n.dependencies;
    nj["timeout"] = n.timeout;
    nj["check_cost"] = n.check_cost;
    nj["calibrate_cost"] = n.calibrate_cost;
    if (n.post_cal_delay != 0) nj["post_cal_delay"] = n.post_cal_delay;
    if (n.parts.size() == 1) {
      write_part(nj, n.parts.front(), n.id);
    } else {
      ojson parts = ojson::array();
      for (const auto& p : n.parts) {
        ojson pj;
        write_part(pj, p, n.id);
        parts.push_back(std::move(pj));
      }
      nj["parts"] = std::move(parts);
    }
    nodes.push_back(std::move(nj));
  }
  root["nodes"] = std::move(nodes);
  if (!spec.hidden_couplings.empty()) {
    ojson hs = ojson::array();
    for (const auto& h : spec.hidden_couplings) {
      ojson targets = ojson::array();
      for (const auto& t : h.targets) targets.push_back(ref_json(t));
      ojson hj{{"tag", h.tag}, {"nodes", std::move(targets)}, {"strength", h.strength}};
      if (h.period != 0) hj["period"] = h.period;
      hj["drift"] = drift_json(h.drift);
      hs.push_back(std::move(hj));
    }
    root["hidden_couplings"] = std::move(hs);
  }
  if (!spec.param_couplings.empty()) {
    ojson cs = ojson::array();
    for (const auto& c : spec.param_couplings)
      cs.push_back(ojson{{"source", c.source_node}, {"param", c.source_param}, {"target", ref_json(c.target)},
                         {"strength", c.strength}});
    root["param_couplings"] = std::move(cs);
  }
  return root.dump(indent);
}

}  // namespace spaq
