#include "spaq/spaq.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "spaq/experiments.hpp"
#include "spaq/graph.hpp"
#include "spaq/property.hpp"
#include "spaq/sim.hpp"
#include "spaq/smc.hpp"
#include "spaq/trace.hpp"

struct spaq_graph {
  spaq::Graph graph;
};

struct spaq_dataset {
  spaq::Dataset data;
};

namespace {

using ojson = nlohmann::ordered_json;

thread_local std::string g_last_error;

spaq_status map_code(spaq::ErrorCode c) {
  using spaq::ErrorCode;
  switch (c) {
    case ErrorCode::InvalidArgument: return SPAQ_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return SPAQ_ERR_IO;
    case ErrorCode::CycleDetected: return SPAQ_ERR_CYCLE_DETECTED;
    case ErrorCode::DanglingDependency: return SPAQ_ERR_DANGLING_DEPENDENCY;
    case ErrorCode::DuplicateId: return SPAQ_ERR_DUPLICATE_ID;
    case ErrorCode::InvalidTimeout: return SPAQ_ERR_INVALID_TIMEOUT;
    case ErrorCode::InvalidSpec: return SPAQ_ERR_INVALID_SPEC;
    case ErrorCode::UnknownNode: return SPAQ_ERR_UNKNOWN_NODE;
    case ErrorCode::MergeCreatesCycle: return SPAQ_ERR_MERGE_CREATES_CYCLE;
    case ErrorCode::EdgeCreatesCycle: return SPAQ_ERR_EDGE_CREATES_CYCLE;
    case ErrorCode::DuplicateEdge: return SPAQ_ERR_DUPLICATE_EDGE;
    case ErrorCode::ParseError: return SPAQ_ERR_PARSE;
    case ErrorCode::NonMonotoneTime: return SPAQ_ERR_NON_MONOTONE_TIME;
    case ErrorCode::DuplicateRunId: return SPAQ_ERR_DUPLICATE_RUN_ID;
    case ErrorCode::EmptySeries: return SPAQ_ERR_EMPTY_SERIES;
    case ErrorCode::MalformedTrace: return SPAQ_ERR_MALFORMED_TRACE;
    case ErrorCode::SyntaxError: return SPAQ_ERR_SYNTAX;
    case ErrorCode::RangeError: return SPAQ_ERR_RANGE;
    case ErrorCode::UnknownParam: return SPAQ_ERR_UNKNOWN_PARAM;
    case ErrorCode::NoSamples: return SPAQ_ERR_NO_SAMPLES;
    case ErrorCode::Unimplemented: return SPAQ_ERR_UNIMPLEMENTED;
    case ErrorCode::EmptySamples: return SPAQ_ERR_EMPTY_SAMPLES;
    case ErrorCode::InsufficientData: return SPAQ_ERR_INSUFFICIENT_DATA;
  }
  return SPAQ_ERR_INTERNAL;
}

template <class F>
spaq_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return SPAQ_OK;
  } catch (const spaq::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPAQ_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SPAQ_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw spaq::Error(spaq::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

spaq::Side to_side(spaq_side s) {
  switch (s) {
    case SPAQ_LOWER: return spaq::Side::Lower;
    case SPAQ_UPPER: return spaq::Side::Upper;
    case SPAQ_TWO_SIDED: return spaq::Side::TwoSided;
  }
  throw spaq::Error(spaq::ErrorCode::InvalidArgument, "invalid side");
}

spaq_verdict to_verdict(spaq::Verdict v) {
  switch (v) {
    case spaq::Verdict::Holds: return SPAQ_HOLDS;
    case spaq::Verdict::DoesNotHold: return SPAQ_DOES_NOT_HOLD;
    case spaq::Verdict::InsufficientData: return SPAQ_INSUFFICIENT_DATA;
  }
  return SPAQ_INSUFFICIENT_DATA;
}

spaq::SimConfig to_config(const spaq_sim_options* opt) {
  spaq::SimConfig c;
  if (!opt) return c;
  c.total_cycles = opt->total_cycles;
  c.seed = opt->seed;
  switch (opt->mode) {
    case SPAQ_BASELINE: c.mode = spaq::SimMode::Baseline; break;
    case SPAQ_HIGH_FREQUENCY: c.mode = spaq::SimMode::HighFrequency; break;
    case SPAQ_ADAPTIVE: c.mode = spaq::SimMode::Adaptive; break;
    default: throw spaq::Error(spaq::ErrorCode::InvalidArgument, "invalid mode");
  }
  c.high_frequency_timeout = opt->high_frequency_timeout;
  c.oracle_ttf = opt->oracle_ttf != 0;
  c.drift_sample_every = opt->drift_sample_every;
  c.max_retries = opt->max_retries;
  if (opt->delays && *opt->delays) {
    std::stringstream ss(opt->delays);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0)
        throw spaq::Error(spaq::ErrorCode::InvalidArgument, "delay entry '" + item + "' is not node=cycles");
      std::string value = item.substr(eq + 1);
      char* end = nullptr;
      long long d = std::strtoll(value.c_str(), &end, 10);
      if (value.empty() || *end != '\0')
        throw spaq::Error(spaq::ErrorCode::InvalidArgument, "delay entry '" + item + "' is not node=cycles");
      c.delay_overrides[item.substr(0, eq)] = d;
    }
  }
  return c;
}

ojson cost_json(const spaq::NodeCost& c) {
  return ojson{{"check_cycles", c.check_cycles},
               {"calibrate_cycles", c.calibrate_cycles},
               {"checks", c.checks},
               {"failed_checks", c.failed_checks},
               {"calibrations", c.calibrations}};
}

ojson run_summary(const spaq::SimResult& r, const std::string& trace) {
  ojson costs = ojson::object();
  for (const auto& [node, c] : r.costs) costs[node] = cost_json(c);
  ojson j{{"run_id", r.run.meta.run_id},
          {"seed", r.run.meta.seed},
          {"mode", r.run.meta.mode},
          {"graph_hash", r.run.meta.graph_hash},
          {"cycles", r.run.meta.total_cycles},
          {"events", r.run.events.size()},
          {"availability", r.availability},
          {"available_cycles", r.available_cycles},
          {"costs", costs}};
  if (!trace.empty()) j["trace"] = trace;
  return j;
}

}  // namespace

extern "C" {

const char* spaq_version(void) { return "1.0.0"; }

const char* spaq_last_error(void) { return g_last_error.c_str(); }

const char* spaq_status_name(spaq_status s) {
  switch (s) {
    case SPAQ_OK: return "ok";
    case SPAQ_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (s >= SPAQ_ERR_INVALID_ARGUMENT && s <= SPAQ_ERR_INSUFFICIENT_DATA)
    return spaq::to_string(static_cast<spaq::ErrorCode>(static_cast<int>(s) - 1));
  return "unknown";
}

void spaq_string_free(char* s) { std::free(s); }

spaq_status spaq_graph_load(const char* path, spaq_graph** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new spaq_graph{spaq::validate_graph(spaq::load_graph_file(path))};
  });
}

spaq_status spaq_graph_parse(const char* json, spaq_graph** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new spaq_graph{spaq::validate_graph(spaq::parse_graph_json(json))};
  });
}

void spaq_graph_free(spaq_graph* g) { delete g; }

spaq_status spaq_graph_to_json(const spaq_graph* g, char** out) {
  return guarded([&] {
    need(g, "graph");
    need(out, "out");
    *out = dup(spaq::to_json(g->graph.spec()));
  });
}

size_t spaq_graph_node_count(const spaq_graph* g) { return g ? g->graph.size() : 0; }

spaq_status spaq_graph_hash(const spaq_graph* g, char** out) {
  return guarded([&] {
    need(g, "graph");
    need(out, "out");
    *out = dup(g->graph.content_hash());
  });
}

spaq_status spaq_graph_add_edge(const spaq_graph* g, const char* dependency, const char* dependent,
                                spaq_graph** out) {
  return guarded([&] {
    need(g, "graph");
    need(dependency, "dependency");
    need(dependent, "dependent");
    need(out, "out");
    *out = new spaq_graph{spaq::add_edge(g->graph, dependency, dependent)};
  });
}

spaq_status spaq_graph_merge(const spaq_graph* g, const char* a, const char* b, const char* merged_id,
                             spaq_graph** out) {
  return guarded([&] {
    need(g, "graph");
    need(a, "a");
    need(b, "b");
    need(merged_id, "merged_id");
    need(out, "out");
    auto spec = spaq::default_merged_spec(g->graph, a, b, merged_id);
    *out = new spaq_graph{spaq::merge_nodes(g->graph, a, b, std::move(spec))};
  });
}

void spaq_sim_options_init(spaq_sim_options* opt) {
  if (!opt) return;
  spaq::SimConfig d;
  opt->total_cycles = d.total_cycles;
  opt->seed = d.seed;
  opt->mode = SPAQ_BASELINE;
  opt->high_frequency_timeout = d.high_frequency_timeout;
  opt->oracle_ttf = 0;
  opt->drift_sample_every = d.drift_sample_every;
  opt->max_retries = d.max_retries;
  opt->delays = nullptr;
}

spaq_status spaq_simulate(const spaq_graph* g, const spaq_sim_options* opt, const char* trace_path,
                          char** summary_json) {
  return guarded([&] {
    need(g, "graph");
    auto r = spaq::run_simulation(g->graph, to_config(opt));
    std::string path = trace_path ? trace_path : "";
    if (!path.empty()) spaq::write_trace(path, r.run);
    if (summary_json) *summary_json = dup(run_summary(r, path).dump());
  });
}

spaq_status spaq_simulate_batch(const spaq_graph* g, const spaq_sim_options* opt, int runs, int jobs,
                                const char* trace_dir, char** summary_json) {
  return guarded([&] {
    need(g, "graph");
    if (runs < 1) throw spaq::Error(spaq::ErrorCode::InvalidArgument, "runs must be >= 1");
    auto cfg = to_config(opt);
    auto results = spaq::run_batch(g->graph, cfg, runs, cfg.seed, jobs);
    std::string dir = trace_dir ? trace_dir : "";
    if (!dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw spaq::Error(spaq::ErrorCode::Io, "cannot create '" + dir + "': " + ec.message());
    }
    ojson arr = ojson::array();
    for (const auto& r : results) {
      std::string path;
      if (!dir.empty()) {
        path = (std::filesystem::path(dir) / (r.run.meta.run_id + ".trace")).string();
        spaq::write_trace(path, r.run);
      }
      arr.push_back(run_summary(r, path));
    }
    if (summary_json) *summary_json = dup(arr.dump());
  });
}

spaq_status spaq_dataset_load(const char* const* paths, size_t count, spaq_dataset** out) {
  return guarded([&] {
    need(out, "out");
    if (count > 0) need(paths, "paths");
    std::vector<std::string> v;
    for (size_t i = 0; i < count; ++i) {
      need(paths[i], "path");
      v.emplace_back(paths[i]);
    }
    *out = new spaq_dataset{spaq::merge_runs(v)};
  });
}

void spaq_dataset_free(spaq_dataset* ds) { delete ds; }

size_t spaq_dataset_event_count(const spaq_dataset* ds) { return ds ? ds->data.event_count() : 0; }

size_t spaq_dataset_run_count(const spaq_dataset* ds) { return ds ? ds->data.runs.size() : 0; }

spaq_status spaq_check(const spaq_dataset* ds, const char* property, spaq_verdict* verdict, char** result_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(property, "property");
    auto res = spaq::evaluate_property(std::string_view(property), ds->data);
    if (verdict) *verdict = to_verdict(res.smc.verdict);
    if (result_json) {
      ojson j;
      j["property"] = res.property;
      j["verdict"] = spaq::to_string(res.smc.verdict);
      j["samples"] = res.samples;
      j["censored"] = res.censored;
      j["smc"] = ojson::parse(spaq::smc_to_json(res.smc));
      if (res.proportion_interval)
        j["proportion_interval"] = {res.proportion_interval->first, res.proportion_interval->second};
      *result_json = dup(j.dump());
    }
  });
}

spaq_status spaq_property_diagnose(const char* property, char** diagnostic) {
  return guarded([&] {
    need(property, "property");
    need(diagnostic, "diagnostic");
    try {
      spaq::parse_property(property);
      *diagnostic = dup("");
    } catch (const spaq::PropertySyntaxError& e) {
      *diagnostic = dup(std::string(e.what()) + "\n" + spaq::caret_diagnostic(property, e.position()));
    } catch (const spaq::Error& e) {
      *diagnostic = dup(e.what());
    }
  });
}

spaq_status spaq_scan(const spaq_dataset* ds, const spaq_graph* g, int64_t window, double p0, double C,
                      char** matrix_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(matrix_json, "out");
    std::vector<std::string> nodes;
    if (g) {
      for (const auto& n : g->graph.nodes()) nodes.push_back(n.id);
    } else {
      nodes = ds->data.nodes();
    }
    auto m = spaq::pairwise_cofailure_scan(ds->data, nodes, window, p0, C);
    ojson cells = ojson::array();
    for (const auto& [key, cell] : m.cells)
      cells.push_back(ojson{{"trigger", key.first},
                            {"response", key.second},
                            {"verdict", spaq::to_string(cell.verdict)},
                            {"n", cell.n},
                            {"successes", cell.successes},
                            {"p_value", cell.p_value},
                            {"property", cell.property}});
    *matrix_json = dup(ojson{{"nodes", m.nodes}, {"cells", cells}}.dump());
  });
}

spaq_status spaq_report(const spaq_dataset* ds, const spaq_graph* g, char** report_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(g, "graph");
    need(report_json, "out");
    ojson runs = ojson::array();
    double sum = 0.0;
    for (const auto& run : ds->data.runs) {
      auto rep = spaq::availability(run, g->graph);
      ojson costs = ojson::object();
      for (const auto& [node, c] : rep.per_node_cost) costs[node] = cost_json(c);
      runs.push_back(ojson{{"run_id", run.meta.run_id},
                           {"mode", run.meta.mode},
                           {"oracle", run.meta.oracle},
                           {"availability", rep.availability},
                           {"available_cycles", rep.available_cycles},
                           {"costs", costs}});
      sum += rep.availability;
    }
    double mean = ds->data.runs.empty() ? 0.0 : sum / static_cast<double>(ds->data.runs.size());
    *report_json = dup(ojson{{"runs", runs}, {"mean_availability", mean}}.dump());
  });
}

void spaq_experiment_options_init(spaq_experiment_options* opt) {
  if (!opt) return;
  spaq::BatchConfig b;
  opt->runs = b.runs;
  opt->cycles = b.cycles;
  opt->seed = b.seed;
  opt->jobs = b.jobs;
  opt->write_traces = 1;
  opt->hf_timeout = spaq::Exp1Config{}.hf_timeout;
  opt->force_zero_delays = 0;
  opt->rel_shift = 0.0;
  opt->p0 = 0.0;
  opt->confidence = 0.0;
  opt->window = 0;
}

spaq_status spaq_experiment_run(int which, const spaq_graph* g, const spaq_experiment_options* opt,
                                const char* outdir, char** report_json) {
  return guarded([&] {
    need(g, "graph");
    spaq_experiment_options o;
    spaq_experiment_options_init(&o);
    if (opt) o = *opt;
    spaq::BatchConfig batch;
    batch.runs = o.runs;
    batch.cycles = o.cycles;
    batch.seed = o.seed;
    batch.jobs = o.jobs;
    spaq::ExperimentReport rep;
    switch (which) {
      case 1: {
        spaq::Exp1Config c;
        c.batch = batch;
        if (o.hf_timeout > 0) c.hf_timeout = o.hf_timeout;
        if (o.confidence > 0) c.C = o.confidence;
        c.force_zero_delays = o.force_zero_delays != 0;
        rep = spaq::run_delayed_checks_experiment(g->graph, c);
        break;
      }
      case 2: {
        spaq::Exp2Config c;
        c.batch = batch;
        if (o.rel_shift > 0) c.rel_shift = o.rel_shift;
        if (o.p0 > 0) c.p0 = o.p0;
        if (o.confidence > 0) c.C = o.confidence;
        rep = spaq::run_internode_experiment(g->graph, c);
        break;
      }
      case 3: {
        spaq::Exp3Config c;
        c.batch = batch;
        if (o.window > 0) c.window = o.window;
        if (o.p0 > 0) c.p0 = o.p0;
        if (o.confidence > 0) c.C = o.confidence;
        rep = spaq::run_hidden_dependency_experiment(g->graph, c);
        break;
      }
      default:
        throw spaq::Error(spaq::ErrorCode::InvalidArgument, "experiment must be 1, 2 or 3");
    }
    if (outdir && *outdir) spaq::write_report(rep, outdir, o.write_traces != 0);
    if (report_json) *report_json = dup(spaq::report_to_json(rep));
  });
}

spaq_status spaq_extract_failures_csv(const char* path, double threshold, char** result_json) {
  return guarded([&] {
    need(path, "path");
    need(result_json, "out");
    auto r = spaq::extract_failures_from_timeseries(spaq::read_series_csv(path), threshold);
    *result_json = dup(ojson{{"failure_times", r.failure_times},
                             {"failure_values", r.failure_values},
                             {"ttf", r.ttf}}
                           .dump());
  });
}

spaq_status spaq_min_samples(double F, double C, spaq_side side, size_t* out) {
  return guarded([&] {
    need(out, "out");
    *out = spaq::min_samples(F, C, to_side(side));
  });
}

spaq_status spaq_quantile_bound(const double* samples, size_t n, double F, double C, spaq_side side,
                                char** result_json) {
  return guarded([&] {
    need(result_json, "out");
    if (n > 0) need(samples, "samples");
    std::vector<double> v(samples, samples + n);
    *result_json = dup(spaq::smc_to_json(spaq::quantile_confidence_bound(std::move(v), F, C, to_side(side))));
  });
}

}  // extern "C"
