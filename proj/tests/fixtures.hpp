#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spaq/error.hpp"
#include "spaq/graph.hpp"
#include "spaq/property.hpp"
#include "spaq/sim.hpp"
#include "spaq/trace.hpp"

namespace fx {

using namespace spaq;

// ---- graph builders ---------------------------------------------------------

inline NodeSpec deviation_node(std::string id, std::vector<std::string> deps, Cycles timeout,
                               Cycles check_cost = 1, Cycles calibrate_cost = 5) {
  NodeSpec n;
  n.id = std::move(id);
  n.dependencies = std::move(deps);
  n.timeout = timeout;
  n.check_cost = check_cost;
  n.calibrate_cost = calibrate_cost;
  PartSpec p;
  p.kind = PartKind::Deviation;
  p.stream = n.id;
  p.rule = {SpecRule::Op::AtMost, 1.0};
  ParamSpec x;
  x.name = "x";
  x.optimal = 1.0;
  x.tolerance = 0.1;
  x.cal_noise = 0.0;
  p.params.push_back(x);
  n.parts.push_back(p);
  return n;
}

inline NodeSpec bernoulli_node(std::string id, std::vector<std::string> deps, Cycles timeout, double p_fail,
                               Cycles check_cost = 1, Cycles calibrate_cost = 5) {
  NodeSpec n;
  n.id = std::move(id);
  n.dependencies = std::move(deps);
  n.timeout = timeout;
  n.check_cost = check_cost;
  n.calibrate_cost = calibrate_cost;
  PartSpec p;
  p.kind = PartKind::Bernoulli;
  p.stream = n.id;
  p.rule = {SpecRule::Op::AtMost, 0.5};
  p.fail_probability = p_fail;
  n.parts.push_back(p);
  return n;
}

inline ParamCoupling coupling(std::string src, std::string dst, double strength = 1.0) {
  ParamCoupling c;
  c.source_node = std::move(src);
  c.source_param = "x";
  c.target.node = std::move(dst);
  c.strength = strength;
  return c;
}

/// Random DAG of up to `max_nodes` nodes with a mix of drifting deviation
/// nodes and Bernoulli nodes; dependencies point at lower indices only.
inline GraphSpec random_dag(std::mt19937_64& rng, int max_nodes) {
  std::uniform_int_distribution<int> count(1, max_nodes);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int n = count(rng);
  GraphSpec g;
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> deps;
    for (int j = 0; j < i; ++j)
      if (u(rng) < 0.35) deps.push_back("n" + std::to_string(j));
    Cycles timeout = 1 + static_cast<Cycles>(u(rng) * 40);
    Cycles check = static_cast<Cycles>(u(rng) * 4);
    Cycles cal = 1 + static_cast<Cycles>(u(rng) * 9);
    std::string id = "n" + std::to_string(i);
    if (u(rng) < 0.5) {
      g.nodes.push_back(bernoulli_node(id, deps, timeout, 0.002 + 0.05 * u(rng), check, cal));
    } else {
      NodeSpec node = deviation_node(id, deps, timeout, check, cal);
      auto& prm = node.parts[0].params[0];
      prm.cal_noise = 0.02 * u(rng);
      prm.drift = LogisticDrift{1.0, 20.0 + 200.0 * u(rng), 5.0 + 20.0 * u(rng), 0.005 + 0.03 * u(rng)};
      g.nodes.push_back(node);
    }
  }
  // Couple some deviation nodes to their dependencies so failures propagate.
  for (const auto& node : g.nodes) {
    if (node.parts[0].kind != PartKind::Deviation) continue;
    for (const auto& d : node.dependencies) {
      auto it = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const NodeSpec& s) { return s.id == d; });
      if (it->parts[0].kind == PartKind::Deviation && u(rng) < 0.5)
        g.param_couplings.push_back(coupling(d, node.id, 0.5 + u(rng)));
    }
  }
  return g;
}

// ---- random mini-datasets ---------------------------------------------------

inline Dataset random_dataset(std::mt19937_64& rng, int max_nodes = 5, Cycles horizon = 200) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> nnodes(1, max_nodes), nruns(1, 3), nevents(0, 60);
  int nodes = nnodes(rng);
  Dataset ds;
  int runs = nruns(rng);
  for (int r = 0; r < runs; ++r) {
    Run run;
    run.meta.run_id = "run-" + std::to_string(r);
    run.meta.seed = static_cast<std::uint64_t>(r);
    run.meta.mode = "baseline";
    run.meta.total_cycles = horizon;
    run.meta.oracle = true;
    int events = nevents(rng);
    Cycles t = 0;
    for (int i = 0; i < events; ++i) {
      t += static_cast<Cycles>(u(rng) * 9.0);
      if (t >= horizon) break;
      TraceEvent e;
      e.time = t;
      e.node = "n" + std::to_string(static_cast<int>(u(rng) * nodes));
      double k = u(rng);
      if (k < 0.45) {
        e.op = Op::CheckData;
        e.outcome = u(rng) < 0.4 ? Outcome::Fail : Outcome::Pass;
        e.duration = static_cast<Cycles>(u(rng) * 3);
      } else if (k < 0.75) {
        e.op = Op::Calibrate;
        e.outcome = u(rng) < 0.85 ? Outcome::Success : Outcome::Failed;
        e.duration = 1 + static_cast<Cycles>(u(rng) * 6);
        double before = 0.5 + u(rng);
        e.params_before["x"] = before;
        e.params_after["x"] = before * (0.7 + 0.6 * u(rng));
        if (u(rng) < 0.5) {
          e.params_before["y"] = u(rng) - 0.5;
          e.params_after["y"] = u(rng) - 0.5;
        }
      } else if (k < 0.9) {
        e.op = Op::OracleOutOfSpec;
        e.outcome = u(rng) < 0.5 ? Outcome::Fail : Outcome::Pass;
      } else {
        e.op = Op::DriftSample;
        e.outcome = u(rng) < 0.5 ? Outcome::Fail : Outcome::Pass;
        e.params_after["x"] = u(rng);
      }
      run.events.push_back(e);
    }
    ds.runs.push_back(std::move(run));
  }
  return ds;
}

// ---- brute-force oracles ------------------------------------------------------
// Each oracle re-derives an extractor from its definition by naive scanning.

struct Expect {
  std::optional<ErrorCode> error;
  std::vector<double> values;
  std::size_t censored = 0;
};

inline bool node_present(const Dataset& ds, const std::string& node) {
  for (const auto& r : ds.runs)
    for (const auto& e : r.events)
      if (e.node == node) return true;
  return false;
}

inline Expect finish(Expect x) {
  if (!x.error && x.values.empty()) x.error = ErrorCode::NoSamples;
  return x;
}

inline bool is_verification(const TraceEvent& e, bool cal_only) {
  if (e.op == Op::Calibrate && e.outcome == Outcome::Success) return true;
  return !cal_only && e.op == Op::CheckData && e.outcome == Outcome::Pass;
}

inline bool is_failure(const TraceEvent& e, bool oracle) {
  if (oracle) return e.op == Op::OracleOutOfSpec && e.outcome == Outcome::Fail;
  return e.op == Op::CheckData && e.outcome == Outcome::Fail;
}

/// For every failure, walk back to the nearest verification or failure of the
/// same node; a verification strictly earlier in time yields one sample.
inline Expect oracle_ttf(const Dataset& ds, const std::string& node, bool cal_only, bool oracle) {
  Expect x;
  if (!node_present(ds, node)) {
    x.error = ErrorCode::UnknownNode;
    return x;
  }
  for (const auto& r : ds.runs) {
    const auto& ev = r.events;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      if (ev[i].node != node || !is_failure(ev[i], oracle)) continue;
      for (std::size_t j = i; j-- > 0;) {
        if (ev[j].node != node) continue;
        if (is_failure(ev[j], oracle)) break;
        if (is_verification(ev[j], cal_only)) {
          if (ev[j].time < ev[i].time) x.values.push_back(static_cast<double>(ev[i].time - ev[j].time));
          break;
        }
      }
    }
    for (std::size_t j = ev.size(); j-- > 0;) {
      if (ev[j].node != node) continue;
      if (is_failure(ev[j], oracle)) break;
      if (is_verification(ev[j], cal_only)) {
        ++x.censored;
        break;
      }
    }
  }
  return finish(x);
}

inline Expect oracle_failures(const Dataset& ds, const std::string& node, Cycles window) {
  Expect x;
  if (!node_present(ds, node)) {
    x.error = ErrorCode::UnknownNode;
    return x;
  }
  for (const auto& r : ds.runs)
    for (Cycles start = 0; start + window <= r.meta.total_cycles; start += window) {
      double count = 0;
      for (const auto& e : r.events)
        if (e.node == node && is_failure(e, false) && e.time >= start && e.time < start + window) count += 1;
      x.values.push_back(count);
    }
  return finish(x);
}

inline Expect oracle_param(const Dataset& ds, const std::string& node, const std::string& param, bool before) {
  Expect x;
  if (!node_present(ds, node)) {
    x.error = ErrorCode::UnknownNode;
    return x;
  }
  for (const auto& r : ds.runs)
    for (const auto& e : r.events) {
      if (e.node != node || e.op != Op::Calibrate) continue;
      const auto& m = before ? e.params_before : e.params_after;
      if (!m.count(param)) {
        x.error = ErrorCode::UnknownParam;
        return x;
      }
      x.values.push_back(m.at(param));
    }
  return finish(x);
}

inline bool kind_matches(EventKind k, const TraceEvent& e) {
  switch (k) {
    case EventKind::Fail: return e.op == Op::CheckData && e.outcome == Outcome::Fail;
    case EventKind::Check: return e.op == Op::CheckData;
    case EventKind::Calibrate: return e.op == Op::Calibrate;
    case EventKind::Shift: return e.op == Op::Calibrate;
  }
  return false;
}

inline Expect oracle_time_between(const Dataset& ds, const std::string& node, EventKind k) {
  Expect x;
  if (!node_present(ds, node)) {
    x.error = ErrorCode::UnknownNode;
    return x;
  }
  for (const auto& r : ds.runs) {
    std::vector<Cycles> ts;
    for (const auto& e : r.events)
      if (e.node == node && kind_matches(k, e)) ts.push_back(e.time);
    for (std::size_t i = 1; i < ts.size(); ++i) x.values.push_back(static_cast<double>(ts[i] - ts[i - 1]));
  }
  return finish(x);
}

inline Expect oracle_pct_time(const Dataset& ds, const std::string& node, Op op) {
  Expect x;
  if (!node_present(ds, node)) {
    x.error = ErrorCode::UnknownNode;
    return x;
  }
  for (const auto& r : ds.runs) {
    if (r.meta.total_cycles < 1) continue;
    Cycles busy = 0;
    for (const auto& e : r.events) {
      if (e.node != node || e.op != op) continue;
      for (Cycles c = e.time; c < e.time + e.duration && c < r.meta.total_cycles; ++c) ++busy;
    }
    x.values.push_back(static_cast<double>(busy) / static_cast<double>(r.meta.total_cycles));
  }
  return finish(x);
}

inline bool pattern_matches(const EventPattern& p, const TraceEvent& e) {
  if (e.node != p.node || !kind_matches(p.kind, e)) return false;
  if (p.kind != EventKind::Shift) return true;
  bool any = false;
  double worst = 0.0;
  for (const auto& [name, b] : e.params_before) {
    if (!p.param.empty() && name != p.param) continue;
    if (!e.params_after.count(name)) continue;
    double base = std::abs(b) > 1e-9 ? std::abs(b) : 1e-9;
    double s = std::abs(e.params_after.at(name) - b) / base;
    worst = any ? std::max(worst, s) : s;
    any = true;
  }
  if (!any) return false;
  if (p.rel && !(worst > *p.rel)) return false;
  if (p.max && !(worst <= *p.max)) return false;
  return true;
}

/// One sample per trigger: any response in (t, t + w], or up to and including
/// the response node's first check after t.
inline std::optional<std::vector<bool>> oracle_cond(const Dataset& ds, const CondQuery& q,
                                                    std::optional<ErrorCode>& error) {
  if (!node_present(ds, q.trigger.node) || !node_present(ds, q.response.node)) {
    error = ErrorCode::UnknownNode;
    return std::nullopt;
  }
  std::vector<bool> out;
  for (const auto& r : ds.runs)
    for (const auto& trig : r.events) {
      if (!pattern_matches(q.trigger, trig)) continue;
      Cycles t = trig.time;
      std::optional<Cycles> end;
      if (q.window.next_check) {
        for (const auto& e : r.events)
          if (e.node == q.response.node && e.op == Op::CheckData && e.time > t && (!end || e.time < *end))
            end = e.time;
      } else {
        end = t + q.window.cycles;
      }
      bool hit = false;
      if (end)
        for (const auto& e : r.events)
          if (pattern_matches(q.response, e) && e.time > t && e.time <= *end) hit = true;
      out.push_back(hit);
    }
  if (out.empty()) {
    error = ErrorCode::NoSamples;
    return std::nullopt;
  }
  return out;
}

}  // namespace fx
