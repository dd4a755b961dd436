#include "spaq/sim.hpp"

#include <algorithm>
#include <cmath>

namespace spaq {

const char* to_string(SimMode mode) {
  switch (mode) {
    case SimMode::Baseline: return "baseline";
    case SimMode::HighFrequency: return "high_frequency";
    case SimMode::Adaptive: return "adaptive";
  }
  return "?";
}

std::optional<SimMode> sim_mode_from_string(std::string_view s) {
  for (auto m : {SimMode::Baseline, SimMode::HighFrequency, SimMode::Adaptive})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

namespace {

constexpr double kRelEps = 1e-9;

struct HorizonReached {};

struct ParamRuntime {
  DriftState drift;
  std::mt19937_64 drift_rng;
  std::mt19937_64 cal_rng;
  std::normal_distribution<double> drift_normal{0.0, 1.0};
  std::normal_distribution<double> cal_normal{0.0, 1.0};
};

struct PartRuntime {
  std::vector<ParamRuntime> params;
  bool bernoulli_failed = false;
  std::mt19937_64 bernoulli_rng;
  std::vector<std::size_t> hidden;  // hidden coupling targets (coupling, target) flattened below
  std::vector<std::size_t> param_couplings;
};

struct NodeRuntime {
  std::vector<PartRuntime> parts;
  Cycles since_cal = 0;
  Cycles last_verified = 0;
  Cycles timer_anchor = 0;
  std::optional<Cycles> last_calibrated;
  bool in_spec = true;
  Cycles timeout = 1;
  Cycles delay = 0;
};

struct HiddenRuntime {
  DriftState state;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  // (node, part, reference value) per target
  struct Target {
    std::size_t node;
    std::size_t part;
    double ref = 0.0;
  };
  std::vector<Target> targets;
};

struct ParamCouplingRuntime {
  std::size_t src_node, src_part, src_param;
  std::size_t dst_node, dst_part;
  double strength;
  double ref;
};

struct Episode {
  std::uint32_t id = 0;
  std::vector<char> maintained;
  std::vector<char> checked;
  std::vector<std::string>* calibrated_log = nullptr;
};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

struct Simulator::Impl {
  const Graph graph;
  SimConfig cfg;
  Cycles clock = 0;
  bool done = false;
  bool initialized = false;
  std::uint32_t episode_counter = 0;
  std::uint32_t current_episode = 0;
  Cycles available = 0;

  std::vector<NodeRuntime> nodes;
  std::vector<HiddenRuntime> hidden;
  std::vector<ParamCouplingRuntime> pcouplings;
  std::vector<TraceEvent> events;
  std::vector<std::uint32_t> episodes;
  std::map<std::string, NodeCost> costs;

  Impl(const Graph& g, SimConfig c) : graph(g), cfg(std::move(c)) {
    if (cfg.total_cycles < 1) throw Error(ErrorCode::InvalidArgument, "total_cycles must be >= 1");
    if (cfg.max_retries < 1) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 1");
    if (cfg.mode == SimMode::HighFrequency && cfg.high_frequency_timeout < 1)
      throw Error(ErrorCode::InvalidArgument, "high-frequency timeout must be >= 1");
    if (cfg.run_id.empty()) cfg.run_id = std::string(to_string(cfg.mode)) + "-" + std::to_string(cfg.seed);
    for (const auto& [id, d] : cfg.delay_overrides) {
      graph.index_of(id);
      if (d < 0) throw Error(ErrorCode::InvalidArgument, "negative delay for '" + id + "'");
    }

    nodes.resize(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) {
      const NodeSpec& spec = graph.node(i);
      NodeRuntime& rt = nodes[i];
      rt.timeout = cfg.mode == SimMode::HighFrequency ? cfg.high_frequency_timeout : spec.timeout;
      if (cfg.mode == SimMode::Adaptive) {
        auto it = cfg.delay_overrides.find(spec.id);
        rt.delay = it != cfg.delay_overrides.end() ? it->second : spec.post_cal_delay;
      }
      costs[spec.id];
      for (const auto& part : spec.parts) {
        PartRuntime pr;
        pr.bernoulli_rng = make_stream(cfg.seed, part.stream + "/bernoulli");
        for (const auto& ps : part.params) {
          ParamRuntime p;
          p.drift.current_value = ps.optimal;
          p.drift_rng = make_stream(cfg.seed, part.stream + "/" + ps.name + "/drift");
          p.cal_rng = make_stream(cfg.seed, part.stream + "/" + ps.name + "/cal");
          pr.params.push_back(std::move(p));
        }
        rt.parts.push_back(std::move(pr));
      }
    }

    for (const auto& h : graph.spec().hidden_couplings) {
      HiddenRuntime hr;
      hr.rng = make_stream(cfg.seed, "hidden/" + h.tag);
      for (const auto& t : h.targets) {
        auto [n, p] = resolve(t);
        hr.targets.push_back({n, p, 0.0});
        nodes[n].parts[p].hidden.push_back(hidden.size());
      }
      hidden.push_back(std::move(hr));
    }
    for (const auto& c : graph.spec().param_couplings) {
      ParamCouplingRuntime pc{};
      pc.src_node = graph.index_of(c.source_node);
      const auto& src = graph.node(pc.src_node);
      for (std::size_t p = 0; p < src.parts.size(); ++p)
        for (std::size_t k = 0; k < src.parts[p].params.size(); ++k)
          if (src.parts[p].params[k].name == c.source_param) {
            pc.src_part = p;
            pc.src_param = k;
          }
      auto [n, p] = resolve(c.target);
      pc.dst_node = n;
      pc.dst_part = p;
      pc.strength = c.strength;
      pc.ref = src.parts[pc.src_part].params[pc.src_param].optimal;
      nodes[n].parts[p].param_couplings.push_back(pcouplings.size());
      pcouplings.push_back(pc);
    }
  }

  std::pair<std::size_t, std::size_t> resolve(const PartRef& ref) const {
    std::size_t n = graph.index_of(ref.node);
    const auto& parts = graph.node(n).parts;
    for (std::size_t p = 0; p < parts.size(); ++p)
      if (ref.part.empty() || parts[p].stream == ref.part) return {n, p};
    throw Error(ErrorCode::InvalidSpec, "unknown part '" + ref.part + "'");
  }

  // ---- observables -------------------------------------------------------

  double offset(std::size_t n, std::size_t p) const {
    const PartRuntime& pr = nodes[n].parts[p];
    double off = 0.0;
    for (auto h : pr.hidden) {
      const auto& hr = hidden[h];
      double strength = graph.spec().hidden_couplings[h].strength;
      for (const auto& t : hr.targets)
        if (t.node == n && t.part == p) off += strength * (hr.state.current_value - t.ref);
    }
    for (auto c : pr.param_couplings) {
      const auto& pc = pcouplings[c];
      double src = nodes[pc.src_node].parts[pc.src_part].params[pc.src_param].drift.current_value;
      off += pc.strength * (src - pc.ref) / std::max(std::abs(pc.ref), kRelEps);
    }
    return off;
  }

  double error(std::size_t n, std::size_t p, std::size_t k) const {
    const auto& ps = graph.node(n).parts[p].params[k];
    double e = nodes[n].parts[p].params[k].drift.current_value - ps.optimal;
    if (k == 0) e += offset(n, p);
    return e;
  }

  double primary_error(const std::string& node) const { return error(graph.index_of(node), 0, 0); }

  double observable(std::size_t n, std::size_t p) const {
    const PartSpec& part = graph.node(n).parts[p];
    switch (part.kind) {
      case PartKind::Deviation: {
        double v = part.rise ? exponential_decay_value(static_cast<double>(nodes[n].since_cal), *part.rise) : 0.0;
        double worst = 0.0;
        for (std::size_t k = 0; k < part.params.size(); ++k)
          worst = std::max(worst, std::abs(error(n, p, k)) / part.params[k].tolerance);
        return v + worst;
      }
      case PartKind::Bernoulli:
        return nodes[n].parts[p].bernoulli_failed ? 1.0 : 0.0;
      case PartKind::StateInit:
        return init_fidelity(error(n, p, 0));
      case PartKind::DriveFrequency:
        return rabi_transition_probability({part.rabi_frequency, error(n, p, 0), part.pulse_time}) *
               init_fidelity(primary_error(part.init_node));
      case PartKind::PulseTime:
        return rabi_transition_probability(
                   {part.rabi_frequency, primary_error(part.drive_node), part.pulse_time + error(n, p, 0)}) *
               init_fidelity(primary_error(part.init_node));
      case PartKind::XGate:
        return x_gate_fidelity(error(n, p, 0), primary_error(part.drive_node), primary_error(part.pulse_node),
                               {part.rabi_frequency, part.pulse_time});
    }
    return 0.0;
  }

  bool evaluate(std::size_t n) const {
    const auto& parts = graph.node(n).parts;
    for (std::size_t p = 0; p < parts.size(); ++p)
      if (!parts[p].rule.passes(observable(n, p))) return false;
    return true;
  }

  // ---- clock -------------------------------------------------------------

  void emit(TraceEvent e) {
    events.push_back(std::move(e));
    episodes.push_back(current_episode);
  }

  void tick(bool busy) {
    bool all_in = true;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      bool ok = evaluate(n);
      if (ok != nodes[n].in_spec && cfg.oracle_ttf) {
        TraceEvent e;
        e.time = clock;
        e.node = graph.node(n).id;
        e.op = Op::OracleOutOfSpec;
        e.outcome = ok ? Outcome::Pass : Outcome::Fail;
        auto saved = current_episode;
        current_episode = 0;
        emit(std::move(e));
        current_episode = saved;
      }
      nodes[n].in_spec = ok;
      all_in = all_in && ok;
    }
    if (!busy && all_in) ++available;

    if (cfg.drift_sample_every > 0 && clock % cfg.drift_sample_every == 0) {
      auto saved = current_episode;
      current_episode = 0;
      for (std::size_t n = 0; n < nodes.size(); ++n) {
        TraceEvent e;
        e.time = clock;
        e.node = graph.node(n).id;
        e.op = Op::DriftSample;
        e.outcome = nodes[n].in_spec ? Outcome::Pass : Outcome::Fail;
        e.params_after = snapshot(n);
        emit(std::move(e));
      }
      current_episode = saved;
    }

    // Every stream advances once per cycle regardless of what the scheduler
    // does, so matched-seed scenarios see identical noise.
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const NodeSpec& spec = graph.node(n);
      NodeRuntime& rt = nodes[n];
      for (std::size_t p = 0; p < spec.parts.size(); ++p) {
        const PartSpec& part = spec.parts[p];
        PartRuntime& pr = rt.parts[p];
        double u = uniform01(pr.bernoulli_rng);
        if (part.kind == PartKind::Bernoulli && !pr.bernoulli_failed && u < part.fail_probability)
          pr.bernoulli_failed = true;
        for (std::size_t k = 0; k < part.params.size(); ++k) {
          ParamRuntime& prm = pr.params[k];
          double z = prm.drift_normal(prm.drift_rng);
          if (part.params[k].drift) prm.drift = logistic_drift_step(prm.drift, z, *part.params[k].drift);
          else ++prm.drift.cycles_since_cal;
        }
      }
      ++rt.since_cal;
    }
    for (std::size_t h = 0; h < hidden.size(); ++h) {
      const auto& spec = graph.spec().hidden_couplings[h];
      auto& hr = hidden[h];
      hr.state = logistic_drift_step(hr.state, hr.normal(hr.rng), spec.drift);
      if (spec.period > 0 && hr.state.cycles_since_cal >= spec.period) hr.state.cycles_since_cal = 0;
    }
    ++clock;
  }

  void advance(Cycles d, bool busy) {
    for (Cycles i = 0; i < d && clock < cfg.total_cycles; ++i) tick(busy);
    if (clock >= cfg.total_cycles) done = true;
  }

  void require_time() {
    if (clock >= cfg.total_cycles) {
      done = true;
      throw HorizonReached{};
    }
  }

  ParamMap snapshot(std::size_t n) const {
    ParamMap m;
    const auto& parts = graph.node(n).parts;
    for (std::size_t p = 0; p < parts.size(); ++p)
      for (std::size_t k = 0; k < parts[p].params.size(); ++k)
        m[parts[p].params[k].name] = nodes[n].parts[p].params[k].drift.current_value;
    return m;
  }

  // ---- node operations ---------------------------------------------------

  bool check_data(std::size_t n) {
    require_time();
    const NodeSpec& spec = graph.node(n);
    bool ok = evaluate(n);
    TraceEvent e;
    e.time = clock;
    e.node = spec.id;
    e.op = Op::CheckData;
    e.outcome = ok ? Outcome::Pass : Outcome::Fail;
    e.duration = spec.check_cost;
    emit(std::move(e));
    auto& c = costs[spec.id];
    c.check_cycles += spec.check_cost;
    ++c.checks;
    if (!ok) ++c.failed_checks;
    advance(spec.check_cost, true);
    return ok;
  }

  // One calibration attempt; returns whether the node's own parameters
  // landed within tolerance.
  bool calibrate_once(std::size_t n) {
    require_time();
    const NodeSpec& spec = graph.node(n);
    NodeRuntime& rt = nodes[n];
    TraceEvent e;
    e.time = clock;
    e.node = spec.id;
    e.op = Op::Calibrate;
    e.duration = spec.calibrate_cost;
    e.params_before = snapshot(n);

    bool ok = true;
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
      PartRuntime& pr = rt.parts[p];
      pr.bernoulli_failed = false;
      for (std::size_t k = 0; k < spec.parts[p].params.size(); ++k) {
        const ParamSpec& ps = spec.parts[p].params[k];
        ParamRuntime& prm = pr.params[k];
        prm.drift.current_value = ps.optimal + prm.cal_normal(prm.cal_rng) * ps.effective_cal_noise();
        prm.drift.cycles_since_cal = 0;
        ok = ok && std::abs(prm.drift.current_value - ps.optimal) <= ps.tolerance;
      }
    }
    // Calibration measures the real response, so it absorbs whatever the
    // couplings currently contribute (including sources reset just above).
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
      PartRuntime& pr = rt.parts[p];
      for (auto h : pr.hidden)
        for (auto& t : hidden[h].targets)
          if (t.node == n && t.part == p) t.ref = hidden[h].state.current_value;
      for (auto c : pr.param_couplings) {
        auto& pc = pcouplings[c];
        pc.ref = nodes[pc.src_node].parts[pc.src_part].params[pc.src_param].drift.current_value;
      }
    }
    rt.since_cal = 0;
    e.outcome = ok ? Outcome::Success : Outcome::Failed;
    e.params_after = snapshot(n);
    emit(std::move(e));
    auto& c = costs[spec.id];
    c.calibrate_cycles += spec.calibrate_cost;
    ++c.calibrations;
    advance(spec.calibrate_cost, true);
    return ok;
  }

  // Returns the start time of the successful attempt.
  std::optional<Cycles> calibrate(std::size_t n) {
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
      Cycles start = clock;
      if (calibrate_once(n)) return start;
    }
    return std::nullopt;
  }

  bool in_delay(std::size_t n) const {
    const NodeRuntime& rt = nodes[n];
    return rt.delay > 0 && rt.last_calibrated && clock < *rt.last_calibrated + rt.delay;
  }

  bool check_state_passes(std::size_t n) const {
    const NodeRuntime& rt = nodes[n];
    if (in_delay(n)) return true;
    if (clock - rt.timer_anchor >= rt.timeout) return false;
    if (cfg.recheck_after_dependency_calibration) {
      for (auto d : graph.dependencies(n)) {
        const auto& dep = nodes[d];
        if (dep.last_calibrated && *dep.last_calibrated > rt.timer_anchor) return false;
      }
    }
    return true;
  }

  void mark_verified(std::size_t n, Cycles t) {
    nodes[n].last_verified = t;
    nodes[n].timer_anchor = t;
  }

  void calibrate_and_verify(std::size_t n, Episode& ep) {
    Cycles attempt_start = clock;
    auto cal_time = calibrate(n);
    if (!cal_time) {
      nodes[n].timer_anchor = attempt_start;
      return;
    }
    if (ep.calibrated_log) ep.calibrated_log->push_back(graph.node(n).id);
    nodes[n].last_calibrated = *cal_time;
    if (nodes[n].delay > 0) {
      mark_verified(n, *cal_time);
      return;
    }
    Cycles t = clock;
    if (check_data(n)) mark_verified(n, t);
    else nodes[n].timer_anchor = t;
  }

  void diagnose(std::size_t n, Episode& ep) {
    for (auto d : graph.dependencies(n)) {
      if (ep.checked[d]) continue;
      ep.checked[d] = 1;
      if (in_delay(d)) continue;
      Cycles t = clock;
      bool ok = check_data(d);
      if (ok) mark_verified(d, t);
      diagnose(d, ep);
      if (!ok) calibrate_and_verify(d, ep);
    }
  }

  MaintainOutcome maintain(std::size_t n, Episode& ep) {
    if (ep.maintained[n]) return MaintainOutcome::Skipped;
    for (auto d : graph.dependencies(n)) maintain(d, ep);
    ep.maintained[n] = 1;
    if (ep.checked[n] || check_state_passes(n)) return MaintainOutcome::Skipped;
    ep.checked[n] = 1;
    Cycles t = clock;
    if (check_data(n)) {
      mark_verified(n, t);
      return MaintainOutcome::Verified;
    }
    diagnose(n, ep);
    calibrate_and_verify(n, ep);
    return MaintainOutcome::Recalibrated;
  }

  Episode new_episode() {
    Episode ep;
    ep.id = ++episode_counter;
    ep.maintained.assign(nodes.size(), 0);
    ep.checked.assign(nodes.size(), 0);
    current_episode = ep.id;
    return ep;
  }

  void initialize() {
    if (initialized) return;
    initialized = true;
    try {
      for (auto n : graph.topo()) {
        Cycles start = clock;
        auto t = calibrate(n);
        nodes[n].last_calibrated = t;
        if (t) mark_verified(n, *t);
        else nodes[n].timer_anchor = start;
      }
    } catch (const HorizonReached&) {
    }
    if (clock >= cfg.total_cycles) done = true;
  }

  std::size_t step() {
    if (!initialized) initialize();
    std::size_t before = events.size();
    if (done) return before;
    Cycles start = clock;
    Episode ep = new_episode();
    try {
      for (auto s : graph.sinks()) maintain(s, ep);
    } catch (const HorizonReached&) {
    }
    current_episode = 0;
    if (!done && clock == start) advance(1, false);
    if (clock >= cfg.total_cycles) done = true;
    return before;
  }
};

Simulator::Simulator(const Graph& graph, SimConfig cfg) : impl_(std::make_unique<Impl>(graph, std::move(cfg))) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;

void Simulator::initialize() { impl_->initialize(); }

std::vector<TraceEvent> Simulator::step() {
  std::size_t before = impl_->step();
  return {impl_->events.begin() + static_cast<std::ptrdiff_t>(before), impl_->events.end()};
}

bool Simulator::finished() const { return impl_->done; }
Cycles Simulator::now() const { return impl_->clock; }

MaintainOutcome Simulator::maintain(const std::string& node) {
  std::size_t n = impl_->graph.index_of(node);
  Episode ep = impl_->new_episode();
  MaintainOutcome out = MaintainOutcome::Skipped;
  try {
    out = impl_->maintain(n, ep);
  } catch (const HorizonReached&) {
  }
  impl_->current_episode = 0;
  return out;
}

std::vector<std::string> Simulator::diagnose(const std::string& node) {
  std::size_t n = impl_->graph.index_of(node);
  std::vector<std::string> calibrated;
  Episode ep = impl_->new_episode();
  ep.calibrated_log = &calibrated;
  ep.checked[n] = 1;
  try {
    impl_->diagnose(n, ep);
  } catch (const HorizonReached&) {
  }
  impl_->current_episode = 0;
  return calibrated;
}

void Simulator::advance_idle(Cycles cycles) { impl_->advance(cycles, false); }

void Simulator::set_param(const std::string& node, const std::string& param, double value) {
  std::size_t n = impl_->graph.index_of(node);
  const auto& parts = impl_->graph.node(n).parts;
  for (std::size_t p = 0; p < parts.size(); ++p)
    for (std::size_t k = 0; k < parts[p].params.size(); ++k)
      if (parts[p].params[k].name == param) {
        impl_->nodes[n].parts[p].params[k].drift.current_value = value;
        return;
      }
  throw Error(ErrorCode::UnknownParam, "node '" + node + "' has no parameter '" + param + "'");
}

double Simulator::param(const std::string& node, const std::string& param) const {
  auto m = impl_->snapshot(impl_->graph.index_of(node));
  auto it = m.find(param);
  if (it == m.end()) throw Error(ErrorCode::UnknownParam, "node '" + node + "' has no parameter '" + param + "'");
  return it->second;
}

bool Simulator::in_spec(const std::string& node) const { return impl_->evaluate(impl_->graph.index_of(node)); }

const std::vector<TraceEvent>& Simulator::events() const { return impl_->events; }

SimResult Simulator::finish() && {
  auto& im = *impl_;
  SimResult r;
  r.run.meta.run_id = im.cfg.run_id;
  r.run.meta.seed = im.cfg.seed;
  r.run.meta.graph_hash = im.graph.content_hash();
  r.run.meta.mode = to_string(im.cfg.mode);
  r.run.meta.total_cycles = im.cfg.total_cycles;
  r.run.meta.oracle = im.cfg.oracle_ttf;
  r.run.events = std::move(im.events);
  r.episodes = std::move(im.episodes);
  r.available_cycles = im.available;
  r.availability = static_cast<double>(im.available) / static_cast<double>(im.cfg.total_cycles);
  r.costs = std::move(im.costs);
  return r;
}

SimResult run_simulation(const Graph& graph, const SimConfig& cfg) {
  Simulator sim(graph, cfg);
  sim.initialize();
  while (!sim.finished()) sim.step();
  return std::move(sim).finish();
}

AvailabilityReport availability(const Run& run, const Graph& graph) {
  const Cycles total = run.meta.total_cycles;
  if (total < 1) throw Error(ErrorCode::MalformedTrace, "run '" + run.meta.run_id + "' has no cycles");
  AvailabilityReport rep;
  for (const auto& n : graph.nodes()) rep.per_node_cost[n.id];

  // +1/-1 difference arrays for "busy" and "nodes out of spec".
  std::vector<std::int64_t> busy(static_cast<std::size_t>(total) + 1, 0);
  std::vector<std::int64_t> bad(static_cast<std::size_t>(total) + 1, 0);
  auto add = [total](std::vector<std::int64_t>& d, Cycles a, Cycles b) {
    a = std::clamp<Cycles>(a, 0, total);
    b = std::clamp<Cycles>(b, 0, total);
    if (a >= b) return;
    ++d[static_cast<std::size_t>(a)];
    --d[static_cast<std::size_t>(b)];
  };

  bool oracle = run.meta.oracle;
  std::map<std::string, std::optional<Cycles>> out_since;
  for (const auto& e : run.events) {
    if (!graph.find(e.node))
      throw Error(ErrorCode::MalformedTrace, "run '" + run.meta.run_id + "' references unknown node '" + e.node + "'");
    auto& cost = rep.per_node_cost[e.node];
    auto& since = out_since[e.node];
    switch (e.op) {
      case Op::CheckData:
        add(busy, e.time, e.time + e.duration);
        cost.check_cycles += e.duration;
        ++cost.checks;
        if (e.failed()) ++cost.failed_checks;
        if (!oracle) {
          if (e.failed() && !since) since = e.time;
          else if (!e.failed() && since) {
            add(bad, *since, e.time);
            since.reset();
          }
        }
        break;
      case Op::Calibrate:
        add(busy, e.time, e.time + e.duration);
        cost.calibrate_cycles += e.duration;
        ++cost.calibrations;
        if (!oracle && !e.failed() && since) {
          add(bad, *since, e.time);
          since.reset();
        }
        break;
      case Op::OracleOutOfSpec:
        if (!oracle) break;
        if (e.failed()) {
          if (since) throw Error(ErrorCode::MalformedTrace, "repeated out-of-spec onset for '" + e.node + "'");
          since = e.time;
        } else {
          if (!since) throw Error(ErrorCode::MalformedTrace, "recovery without onset for '" + e.node + "'");
          add(bad, *since, e.time);
          since.reset();
        }
        break;
      case Op::DriftSample:
        break;
    }
  }
  for (auto& [node, since] : out_since)
    if (since) add(bad, *since, total);

  std::int64_t b = 0, o = 0;
  for (Cycles t = 0; t < total; ++t) {
    b += busy[static_cast<std::size_t>(t)];
    o += bad[static_cast<std::size_t>(t)];
    if (b == 0 && o == 0) ++rep.available_cycles;
  }
  rep.availability = static_cast<double>(rep.available_cycles) / static_cast<double>(total);
  return rep;
}

}  // namespace spaq
