#include "spaq/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace spaq {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::vector<SimResult> run_batch(const Graph& graph, const SimConfig& base, int runs, std::uint64_t first_seed,
                                 int jobs) {
  if (runs < 0) throw Error(ErrorCode::InvalidArgument, "runs must be >= 0");
  std::vector<SimResult> out(static_cast<std::size_t>(runs));
  auto one = [&](std::size_t i) {
    SimConfig c = base;
    c.seed = first_seed + i;
    c.run_id = std::string(to_string(c.mode)) + "-" + std::to_string(c.seed);
    out[i] = run_simulation(graph, c);
  };
  int threads = std::clamp(jobs, 1, std::max(runs, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < out.size(); ++i) one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < out.size(); i = next++) {
        try {
          one(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

Dataset pool(const std::vector<SimResult>& results) {
  Dataset ds;
  for (const auto& r : results) ds.runs.push_back(r.run);
  return ds;
}

ScenarioResult run_scenario(const std::string& label, const Graph& graph, const SimConfig& base,
                            const BatchConfig& batch, std::uint64_t first_seed) {
  SimConfig cfg = base;
  cfg.total_cycles = batch.cycles;
  cfg.drift_sample_every = batch.drift_sample_every;
  cfg.oracle_ttf = batch.oracle;
  ScenarioResult s;
  s.label = label;
  s.mode = cfg.mode;
  s.graph_hash = graph.content_hash();
  s.runs = run_batch(graph, cfg, batch.runs, first_seed, batch.jobs);
  for (const auto& r : s.runs) {
    s.seeds.push_back(r.run.meta.seed);
    s.availability.push_back(r.availability);
    for (const auto& [node, c] : r.costs) {
      auto& t = s.cost[node];
      t.check_cycles += c.check_cycles;
      t.calibrate_cycles += c.calibrate_cycles;
      t.checks += c.checks;
      t.failed_checks += c.failed_checks;
      t.calibrations += c.calibrations;
    }
  }
  if (!s.availability.empty())
    s.mean_availability = std::accumulate(s.availability.begin(), s.availability.end(), 0.0) /
                          static_cast<double>(s.availability.size());
  return s;
}

const VerdictCell& VerdictMatrix::at(const std::string& trigger, const std::string& response) const {
  auto it = cells.find({trigger, response});
  if (it == cells.end()) throw Error(ErrorCode::UnknownNode, "no cell for (" + trigger + ", " + response + ")");
  return it->second;
}

Comparison compare(const ScenarioResult& before, const ScenarioResult& after) {
  Comparison c;
  c.before = before.label;
  c.after = after.label;
  std::size_t n = std::min(before.availability.size(), after.availability.size());
  c.runs = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i)
    if (after.availability[i] > before.availability[i]) ++c.paired_wins;
  c.mean_delta = after.mean_availability - before.mean_availability;
  return c;
}

// ---- analyses -------------------------------------------------------------

std::vector<DelayRecommendation> recommend_delays(const Dataset& ds, double C, double F) {
  std::vector<DelayRecommendation> out;
  for (const auto& node : ds.nodes()) {
    DelayRecommendation rec;
    rec.node = node;
    PropertyAst ast;
    ast.mode = QueryMode::Ci;
    ast.body = MetricQuery{MetricCall{"ttf", node, {{"anchor", "calibration"}}}, {}, {}, {}};
    ast.F = F;
    ast.C = C;
    ast.side = Side::Lower;
    rec.property = to_string(ast);
    try {
      auto samples = metric_ttf(ds, node, {.calibration_anchor = true, .oracle = false});
      rec.samples = samples.values.size();
      rec.censored = samples.censored;
      rec.bound = quantile_confidence_bound(samples.values, F, C, Side::Lower);
      if (rec.bound.verdict == Verdict::Holds) rec.delay = static_cast<Cycles>(std::floor(rec.bound.lo));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSamples) throw;
      rec.bound.kind = SmcResult::Kind::Bound;
      rec.bound.verdict = Verdict::InsufficientData;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

VerdictMatrix pairwise_cofailure_scan(const Dataset& ds, const std::vector<std::string>& nodes, Cycles window,
                                      double p0, double C) {
  if (window < 1) throw Error(ErrorCode::RangeError, "window must be >= 1");
  VerdictMatrix m;
  m.nodes = nodes;
  for (const auto& trigger : nodes)
    for (const auto& response : nodes) {
      if (trigger == response) continue;
      PropertyAst ast;
      ast.mode = QueryMode::Test;
      CondQuery q;
      q.trigger = {EventKind::Fail, trigger, {}, {}, {}};
      q.response = {EventKind::Fail, response, {}, {}, {}};
      q.window.cycles = window;
      q.cmp = Cmp::Gt;
      q.probability = p0;
      ast.body = q;
      ast.C = C;
      VerdictCell cell;
      cell.property = to_string(ast);
      try {
        auto r = evaluate_property(ast, ds);
        cell.verdict = r.smc.verdict;
        cell.n = r.smc.n_used;
        cell.successes = r.smc.successes;
        cell.p_value = r.smc.p_value;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoSamples && e.code() != ErrorCode::UnknownNode) throw;
        cell.verdict = Verdict::InsufficientData;
      }
      m.cells[{trigger, response}] = cell;
    }
  return m;
}

ShiftTestResult param_shift_failure_test(const Dataset& ds, const std::string& node_a, const std::string& param,
                                         double rel_shift, const std::string& node_b, double p0, double C) {
  if (!(rel_shift > 0.0)) throw Error(ErrorCode::RangeError, "rel_shift must be > 0");
  auto make = [&](bool control) {
    PropertyAst ast;
    CondQuery q;
    q.trigger = {EventKind::Shift, node_a, param, {}, {}};
    if (control) q.trigger.max = rel_shift;
    else q.trigger.rel = rel_shift;
    q.response = {EventKind::Fail, node_b, {}, {}, {}};
    q.window.next_check = true;
    q.cmp = Cmp::Gt;
    q.probability = p0;
    ast.body = q;
    ast.C = C;
    return ast;
  };
  ShiftTestResult out;
  PropertyAst main = make(false), control = make(true);
  out.property = to_string(main);
  out.control_property = to_string(control);
  out.main = evaluate_property(main, ds).smc;
  try {
    out.control = evaluate_property(control, ds).smc;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoSamples) throw;
  }
  return out;
}

GraphSpec without_param_couplings(GraphSpec spec) {
  for (auto& c : spec.param_couplings) c.strength = 0.0;
  return spec;
}

// ---- experiments ------------------------------------------------------------

ExperimentReport run_delayed_checks_experiment(const Graph& graph, const Exp1Config& cfg) {
  ExperimentReport rep;
  rep.experiment = "exp1";
  rep.label = "delayed post-calibration checks";
  rep.graph_before = rep.graph_after = to_json(graph.spec());

  SimConfig base;
  base.mode = SimMode::Baseline;
  rep.scenarios.push_back(run_scenario("baseline", graph, base, cfg.batch, cfg.batch.seed));

  SimConfig hf;
  hf.mode = SimMode::HighFrequency;
  hf.high_frequency_timeout = cfg.hf_timeout;
  rep.scenarios.push_back(
      run_scenario("high_frequency", graph, hf, cfg.batch, cfg.batch.seed + cfg.hf_seed_offset));

  SimConfig adaptive;
  adaptive.mode = SimMode::Adaptive;
  Dataset hf_data = pool(rep.scenarios.back().runs);
  for (auto& d : recommend_delays(hf_data, cfg.C, cfg.F)) {
    Cycles delay = cfg.force_zero_delays ? 0 : d.delay;
    adaptive.delay_overrides[d.node] = delay;
    Recommendation r;
    r.kind = "delay";
    r.subject = d.node;
    r.value = std::to_string(delay);
    r.property = d.property;
    r.smc = d.bound;
    r.note = std::to_string(d.samples) + " samples, " + std::to_string(d.censored) + " censored";
    if (d.bound.verdict == Verdict::InsufficientData) r.note += "; insufficient data, delay 0";
    if (cfg.force_zero_delays) r.note += "; forced to 0";
    rep.recommendations.push_back(std::move(r));
  }
  // Nodes absent from the high-frequency data keep no delay.
  for (const auto& n : graph.nodes()) adaptive.delay_overrides.try_emplace(n.id, 0);
  rep.scenarios.push_back(run_scenario("spaq_informed", graph, adaptive, cfg.batch, cfg.batch.seed));
  rep.comparison = compare(rep.scenarios[0], rep.scenarios[2]);
  return rep;
}

ExperimentReport run_internode_experiment(const Graph& graph, const Exp2Config& cfg) {
  ExperimentReport rep;
  rep.experiment = "exp2";
  rep.label = "internode parameter dependency";
  rep.graph_before = rep.graph_after = to_json(graph.spec());

  SimConfig base;
  rep.scenarios.push_back(run_scenario("unmerged", graph, base, cfg.batch, cfg.batch.seed));
  Dataset ds = pool(rep.scenarios.back().runs);
  auto test = param_shift_failure_test(ds, cfg.node_a, cfg.param, cfg.rel_shift, cfg.node_b, cfg.p0, cfg.C);

  Recommendation r;
  r.kind = "merge";
  r.subject = cfg.node_a + "+" + cfg.node_b;
  r.value = cfg.merged_id;
  r.property = test.property;
  r.smc = test.main;
  if (test.control) {
    r.note = std::string("control (") + test.control_property + "): " + to_string(test.control->verdict) + ", " +
             std::to_string(test.control->successes) + "/" + std::to_string(test.control->n_used);
  } else {
    r.note = "control: no small-shift calibrations";
  }
  bool merge = test.main.verdict == Verdict::Holds;
  if (!merge) {
    r.value.clear();
    r.note += "; merge withheld";
    rep.notes.push_back("shift test verdict " + std::string(to_string(test.main.verdict)) + "; graph unchanged");
  }
  rep.recommendations.push_back(r);
  if (merge) {
    Graph merged = merge_nodes(graph, cfg.node_a, cfg.node_b,
                               default_merged_spec(graph, cfg.node_a, cfg.node_b, cfg.merged_id));
    rep.graph_after = to_json(merged.spec());
    rep.scenarios.push_back(run_scenario("merged", merged, base, cfg.batch, cfg.batch.seed));
    rep.comparison = compare(rep.scenarios[0], rep.scenarios[1]);
  }
  return rep;
}

ExperimentReport run_hidden_dependency_experiment(const Graph& graph, const Exp3Config& cfg) {
  ExperimentReport rep;
  rep.experiment = "exp3";
  rep.label = "hidden dependency";
  rep.graph_before = rep.graph_after = to_json(graph.spec());

  SimConfig base;
  rep.scenarios.push_back(run_scenario("before", graph, base, cfg.batch, cfg.batch.seed));
  Dataset ds = pool(rep.scenarios.back().runs);
  std::vector<std::string> ids;
  for (const auto& n : graph.nodes()) ids.push_back(n.id);
  rep.matrix = pairwise_cofailure_scan(ds, ids, cfg.window, cfg.p0, cfg.C);

  Graph current = graph;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const auto& y = ids[i];
      const auto& z = ids[j];
      const auto& yz = rep.matrix->at(y, z);
      const auto& zy = rep.matrix->at(z, y);
      if (yz.verdict != Verdict::Holds || zy.verdict != Verdict::Holds) continue;
      std::size_t iy = current.index_of(y), iz = current.index_of(z);
      if (current.depends_on(iy, iz) || current.depends_on(iz, iy)) continue;
      // The node with the shorter timeout becomes the dependency.
      bool y_first = current.node(iy).timeout <= current.node(iz).timeout;
      const std::string& dep = y_first ? y : z;
      const std::string& dependent = y_first ? z : y;
      Recommendation r;
      r.kind = "add_edge";
      r.subject = dependent;
      r.value = dep;
      r.property = yz.property;
      r.smc.kind = SmcResult::Kind::Test;
      r.smc.verdict = Verdict::Holds;
      r.smc.n_used = yz.n;
      r.smc.successes = yz.successes;
      r.smc.p_value = yz.p_value;
      r.note = "reverse: " + zy.property + " holds (" + std::to_string(zy.successes) + "/" + std::to_string(zy.n) + ")";
      try {
        current = add_edge(current, dep, dependent);
      } catch (const Error& e) {
        r.note += std::string("; not applied: ") + e.what();
      }
      rep.recommendations.push_back(std::move(r));
    }
  rep.graph_after = to_json(current.spec());
  if (current.content_hash() != graph.content_hash()) {
    rep.scenarios.push_back(run_scenario("after", current, base, cfg.batch, cfg.batch.seed));
    rep.comparison = compare(rep.scenarios[0], rep.scenarios[1]);
  } else {
    rep.notes.push_back("no co-failing pair qualified for a new edge");
  }
  return rep;
}

// ---- serialization ------------------------------------------------------------

namespace {

ojson smc_json(const SmcResult& r) {
  ojson j;
  const char* kind = r.kind == SmcResult::Kind::Test ? "test" : r.kind == SmcResult::Kind::Bound ? "bound" : "interval";
  j["kind"] = kind;
  j["verdict"] = to_string(r.verdict);
  j["n_used"] = r.n_used;
  if (r.kind == SmcResult::Kind::Test) {
    j["successes"] = r.successes;
    j["p_value"] = r.p_value;
  } else if (r.verdict != Verdict::InsufficientData) {
    if (r.rank_lo) {
      j["lo"] = r.lo;
      j["rank_lo"] = r.rank_lo;
    }
    if (r.rank_hi) {
      j["hi"] = r.hi;
      j["rank_hi"] = r.rank_hi;
    }
    if (!r.rank_lo && !r.rank_hi) {
      j["lo"] = r.lo;
      j["hi"] = r.hi;
      j["successes"] = r.successes;
    }
    j["coverage"] = r.coverage;
  }
  return j;
}

ojson cost_json(const NodeCost& c, double runs) {
  return ojson{{"check_cycles", static_cast<double>(c.check_cycles) / runs},
               {"calibrate_cycles", static_cast<double>(c.calibrate_cycles) / runs},
               {"checks", static_cast<double>(c.checks) / runs},
               {"failed_checks", static_cast<double>(c.failed_checks) / runs},
               {"calibrations", static_cast<double>(c.calibrations) / runs}};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + p.string() + "'");
}

}  // namespace

std::string smc_to_json(const SmcResult& r, int indent) { return smc_json(r).dump(indent); }

std::string report_to_json(const ExperimentReport& rep, int indent) {
  ojson j;
  j["experiment"] = rep.experiment;
  j["label"] = rep.label;
  ojson scen = ojson::array();
  for (const auto& s : rep.scenarios) {
    ojson sj;
    sj["label"] = s.label;
    sj["mode"] = to_string(s.mode);
    sj["graph_hash"] = s.graph_hash;
    sj["seeds"] = s.seeds;
    sj["availability"] = s.availability;
    sj["mean_availability"] = s.mean_availability;
    ojson cost = ojson::object();
    double runs = std::max<double>(1.0, static_cast<double>(s.runs.size()));
    for (const auto& [node, c] : s.cost) cost[node] = cost_json(c, runs);
    sj["mean_cost_per_run"] = cost;
    scen.push_back(std::move(sj));
  }
  j["scenarios"] = scen;
  if (rep.comparison) {
    const auto& c = *rep.comparison;
    j["comparison"] = ojson{{"before", c.before},         {"after", c.after},       {"paired_wins", c.paired_wins},
                            {"runs", c.runs},             {"mean_delta", c.mean_delta}};
  }
  ojson recs = ojson::array();
  for (const auto& r : rep.recommendations)
    recs.push_back(ojson{{"kind", r.kind},
                         {"subject", r.subject},
                         {"value", r.value},
                         {"property", r.property},
                         {"smc", smc_json(r.smc)},
                         {"note", r.note}});
  j["recommendations"] = recs;
  if (rep.matrix) {
    ojson cells = ojson::array();
    for (const auto& [key, cell] : rep.matrix->cells)
      cells.push_back(ojson{{"trigger", key.first},
                            {"response", key.second},
                            {"verdict", to_string(cell.verdict)},
                            {"n", cell.n},
                            {"successes", cell.successes},
                            {"p_value", cell.p_value},
                            {"property", cell.property}});
    j["verdict_matrix"] = ojson{{"nodes", rep.matrix->nodes}, {"cells", cells}};
  }
  j["graph_before"] = ojson::parse(rep.graph_before);
  j["graph_after"] = ojson::parse(rep.graph_after);
  j["notes"] = rep.notes;
  return j.dump(indent);
}

void write_report(const ExperimentReport& rep, const std::string& outdir, bool write_traces) {
  fs::path dir(outdir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + outdir + "': " + ec.message());
  write_file(dir / "report.json", report_to_json(rep) + "\n");

  std::string costs = "scenario,node,check_cycles,calibrate_cycles,checks,failed_checks,calibrations\n";
  std::string avail = "scenario,run,seed,availability\n";
  for (const auto& s : rep.scenarios) {
    double runs = std::max<double>(1.0, static_cast<double>(s.runs.size()));
    for (const auto& [node, c] : s.cost)
      costs += s.label + "," + node + "," + format_double(static_cast<double>(c.check_cycles) / runs) + "," +
               format_double(static_cast<double>(c.calibrate_cycles) / runs) + "," +
               format_double(static_cast<double>(c.checks) / runs) + "," +
               format_double(static_cast<double>(c.failed_checks) / runs) + "," +
               format_double(static_cast<double>(c.calibrations) / runs) + "\n";
    for (std::size_t i = 0; i < s.availability.size(); ++i)
      avail += s.label + "," + std::to_string(i) + "," + std::to_string(s.seeds[i]) + "," +
               format_double(s.availability[i]) + "\n";
  }
  write_file(dir / "costs.csv", costs);
  write_file(dir / "availability.csv", avail);

  if (rep.matrix) {
    std::string heat = "trigger,response,verdict,successes,n,p_value\n";
    for (const auto& [key, cell] : rep.matrix->cells)
      heat += key.first + "," + key.second + "," + to_string(cell.verdict) + "," + std::to_string(cell.successes) +
              "," + std::to_string(cell.n) + "," + format_double(cell.p_value) + "\n";
    write_file(dir / "heatmap.csv", heat);
  }
  if (!rep.recommendations.empty()) {
    std::string recs = "kind,subject,value,verdict\n";
    for (const auto& r : rep.recommendations)
      recs += r.kind + "," + r.subject + "," + r.value + "," + to_string(r.smc.verdict) + "\n";
    write_file(dir / (rep.experiment == "exp1" ? "delays.csv" : "recommendations.csv"), recs);
  }
  if (write_traces) {
    for (const auto& s : rep.scenarios) {
      fs::path tdir = dir / "traces" / s.label;
      fs::create_directories(tdir, ec);
      if (ec) throw Error(ErrorCode::Io, "cannot create '" + tdir.string() + "'");
      for (const auto& r : s.runs) write_trace((tdir / (r.run.meta.run_id + ".trace")).string(), r.run);
    }
  }
}

}  // namespace spaq
