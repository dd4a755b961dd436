// Command-line front end. Talks to the library only through spaq.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spaq/spaq.h"

#ifndef SPAQ_CONFIG_DIR
#define SPAQ_CONFIG_DIR "configs"
#endif

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitHolds = 0;
constexpr int kExitDoesNotHold = 1;
constexpr int kExitError = 2;
constexpr int kExitInsufficient = 3;

struct Failure {
  int code;
};

void check(spaq_status s, const std::string& context = "") {
  if (s == SPAQ_OK) return;
  std::cerr << "error";
  if (!context.empty()) std::cerr << " (" << context << ")";
  std::cerr << " [" << spaq_status_name(s) << "]: " << spaq_last_error() << "\n";
  throw Failure{kExitError};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  spaq_string_free(s);
  return out;
}

struct Graph {
  spaq_graph* g = nullptr;
  explicit Graph(const std::string& path) { check(spaq_graph_load(path.c_str(), &g), path); }
  ~Graph() { spaq_graph_free(g); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
};

struct Data {
  spaq_dataset* d = nullptr;
  explicit Data(const std::vector<std::string>& paths) {
    std::vector<const char*> ptrs;
    for (const auto& p : paths) ptrs.push_back(p.c_str());
    check(spaq_dataset_load(ptrs.data(), ptrs.size(), &d), "loading traces");
  }
  ~Data() { spaq_dataset_free(d); }
  Data(const Data&) = delete;
  Data& operator=(const Data&) = delete;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("SPAQ_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (*s && *end == '\0') return v;
    std::cerr << "warning: ignoring non-numeric SPAQ_SEED='" << s << "'\n";
  }
  return 1;
}

std::string default_config(const char* name) { return std::string(SPAQ_CONFIG_DIR) + "/" + name; }

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
  return buf;
}

int verdict_exit(const std::string& v) {
  if (v == "holds") return kExitHolds;
  if (v == "does_not_hold") return kExitDoesNotHold;
  return kExitInsufficient;
}

void print_report_summary(const json& rep) {
  std::cout << rep["experiment"].get<std::string>() << ": " << rep["label"].get<std::string>() << "\n";
  for (const auto& s : rep["scenarios"])
    std::cout << "  " << s["label"].get<std::string>() << " (" << s["mode"].get<std::string>()
              << "): mean availability " << pct(s["mean_availability"].get<double>()) << " over "
              << s["availability"].size() << " runs\n";
  for (const auto& r : rep["recommendations"]) {
    std::cout << "  " << r["kind"].get<std::string>() << " " << r["subject"].get<std::string>();
    if (!r["value"].get<std::string>().empty()) std::cout << " -> " << r["value"].get<std::string>();
    std::cout << " [" << r["smc"]["verdict"].get<std::string>() << "]\n";
  }
  if (rep.contains("comparison")) {
    const auto& c = rep["comparison"];
    std::cout << "  " << c["after"].get<std::string>() << " vs " << c["before"].get<std::string>() << ": "
              << c["paired_wins"].get<int>() << "/" << c["runs"].get<int>() << " paired wins, mean delta "
              << pct(c["mean_delta"].get<double>()) << "\n";
  }
  for (const auto& n : rep["notes"]) std::cout << "  note: " << n.get<std::string>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spaq: calibration simulation and statistical property analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(spaq_version()));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run calibration simulations and write traces");
  std::string sim_config = default_config("fig5.json"), sim_out = "traces", sim_mode = "baseline", sim_delays;
  long long sim_cycles = 100000, sim_hf = 5, sim_drift = 1000;
  int sim_runs = 1, sim_jobs = 1;
  std::uint64_t sim_seed = 0;
  bool sim_oracle = false;
  sim->add_option("-c,--config", sim_config, "Graph config (JSON)")->capture_default_str();
  sim->add_option("--cycles", sim_cycles, "Cycles per run")->capture_default_str();
  sim->add_option("--runs", sim_runs, "Number of runs (seeds seed..seed+runs-1)")->capture_default_str();
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "First seed (default: $SPAQ_SEED or 1)");
  sim->add_option("--mode", sim_mode, "baseline | high_frequency | adaptive")
      ->check(CLI::IsMember({"baseline", "high_frequency", "adaptive"}))
      ->capture_default_str();
  sim->add_option("--hf-timeout", sim_hf, "Timeout used in high_frequency mode")->capture_default_str();
  sim->add_option("--delays", sim_delays, "Adaptive delays, node=cycles[,node=cycles...]");
  sim->add_option("--drift-every", sim_drift, "drift_sample period (0 disables)")->capture_default_str();
  sim->add_flag("--oracle", sim_oracle, "Also log ground-truth out-of-spec transitions");
  sim->add_option("-o,--out", sim_out, "Trace output directory")->capture_default_str();
  sim->add_option("-j,--jobs", sim_jobs, "Parallel runs")->capture_default_str();

  // check
  auto* chk = app.add_subcommand("check", "Evaluate a property over traces");
  std::vector<std::string> chk_traces;
  std::string chk_property, chk_property_file;
  bool chk_json = false;
  chk->add_option("traces", chk_traces, "Trace files")->required()->check(CLI::ExistingFile);
  auto* prop_opt = chk->add_option("-p,--property", chk_property, "Property text");
  chk->add_option("-f,--property-file", chk_property_file, "File holding the property")
      ->check(CLI::ExistingFile)
      ->excludes(prop_opt);
  chk->add_flag("--json", chk_json, "Print only the machine-readable record");

  // scan
  auto* scan = app.add_subcommand("scan", "Pairwise co-failure scan over traces");
  std::vector<std::string> scan_traces;
  std::string scan_config, scan_out;
  long long scan_window = 25;
  double scan_p0 = 0.33, scan_c = 0.9;
  scan->add_option("traces", scan_traces, "Trace files")->required()->check(CLI::ExistingFile);
  scan->add_option("-c,--config", scan_config, "Graph config fixing the node set (default: nodes in traces)");
  scan->add_option("--window", scan_window, "Window in cycles")->capture_default_str();
  scan->add_option("--p0", scan_p0, "Probability threshold")->capture_default_str();
  scan->add_option("-C,--confidence", scan_c, "Confidence")->capture_default_str();
  scan->add_option("-o,--out", scan_out, "Directory for heatmap.csv and matrix.json");

  // experiments
  struct ExpArgs {
    std::string config, out;
    int runs = 20, jobs = 1;
    long long cycles = 10000;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    bool no_traces = false;
    spaq_experiment_options extra{};
  };
  ExpArgs ex[3];
  const char* exp_defaults[3] = {"fig5.json", "exp2.json", "exp3.json"};
  const char* exp_help[3] = {"Experiment 1: delayed post-calibration checks",
                             "Experiment 2: internode parameter dependency and node merge",
                             "Experiment 3: hidden dependency scan and edge addition"};
  CLI::App* exp_cmd[3];
  for (int i = 0; i < 3; ++i) {
    auto& a = ex[i];
    spaq_experiment_options_init(&a.extra);
    a.config = default_config(exp_defaults[i]);
    a.out = "out/exp" + std::to_string(i + 1);
    auto* c = app.add_subcommand("exp" + std::to_string(i + 1), exp_help[i]);
    exp_cmd[i] = c;
    c->add_option("-c,--config", a.config, "Graph config")->capture_default_str();
    c->add_option("-o,--out", a.out, "Output directory (created if missing)")->capture_default_str();
    c->add_option("--runs", a.runs, "Runs per scenario")->capture_default_str();
    c->add_option("--cycles", a.cycles, "Cycles per run")->capture_default_str();
    a.seed_opt = c->add_option("--seed", a.seed, "First seed (default: $SPAQ_SEED or 1)");
    c->add_option("-j,--jobs", a.jobs, "Parallel runs")->capture_default_str();
    c->add_flag("--no-traces", a.no_traces, "Skip writing per-run traces");
    c->add_option("-C,--confidence", a.extra.confidence, "Confidence level (default per experiment)");
  }
  exp_cmd[0]->add_option("--hf-timeout", ex[0].extra.hf_timeout, "High-frequency timeout")->capture_default_str();
  bool zero_delays = false;
  exp_cmd[0]->add_flag("--zero-delays", zero_delays, "Force every recommended delay to 0");
  exp_cmd[1]->add_option("--rel-shift", ex[1].extra.rel_shift, "Relative shift threshold (default 0.1)");
  exp_cmd[1]->add_option("--p0", ex[1].extra.p0, "Failure probability threshold (default 0.33)");
  exp_cmd[2]->add_option("--window", ex[2].extra.window, "Co-failure window (default 25)");
  exp_cmd[2]->add_option("--p0", ex[2].extra.p0, "Probability threshold (default 0.33)");

  // report
  auto* rep = app.add_subcommand("report", "Availability and per-node cost of recorded traces");
  std::vector<std::string> rep_traces;
  std::string rep_config = default_config("fig5.json");
  rep->add_option("traces", rep_traces, "Trace files")->required()->check(CLI::ExistingFile);
  rep->add_option("-c,--config", rep_config, "Graph config the traces were produced with")->capture_default_str();

  // failures
  auto* fail = app.add_subcommand("failures", "Extract failure events from a time,value CSV series");
  std::string fail_csv;
  double fail_threshold = 1.0;
  fail->add_option("csv", fail_csv, "CSV file with time,value columns")->required()->check(CLI::ExistingFile);
  fail->add_option("-t,--threshold", fail_threshold, "Deviation threshold")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*sim) {
      spaq_sim_options opt;
      spaq_sim_options_init(&opt);
      opt.total_cycles = sim_cycles;
      opt.seed = *sim_seed_opt ? sim_seed : default_seed();
      opt.mode = sim_mode == "high_frequency" ? SPAQ_HIGH_FREQUENCY
                 : sim_mode == "adaptive"     ? SPAQ_ADAPTIVE
                                              : SPAQ_BASELINE;
      opt.high_frequency_timeout = sim_hf;
      opt.oracle_ttf = sim_oracle ? 1 : 0;
      opt.drift_sample_every = sim_drift;
      opt.delays = sim_delays.empty() ? nullptr : sim_delays.c_str();
      Graph g(sim_config);
      char* out = nullptr;
      check(spaq_simulate_batch(g.g, &opt, sim_runs, sim_jobs, sim_out.c_str(), &out), "simulate");
      json runs = json::parse(take(out));
      double sum = 0.0;
      for (const auto& r : runs) {
        std::cout << r["run_id"].get<std::string>() << ": availability " << pct(r["availability"].get<double>())
                  << ", " << r["events"].get<std::size_t>() << " events -> " << r["trace"].get<std::string>()
                  << "\n";
        sum += r["availability"].get<double>();
      }
      std::cout << "mean availability " << pct(sum / static_cast<double>(runs.size())) << " over " << runs.size()
                << " runs\n";
      return 0;
    }

    if (*chk) {
      std::string property = chk_property;
      if (!chk_property_file.empty()) {
        std::ifstream in(chk_property_file);
        std::stringstream ss;
        ss << in.rdbuf();
        property = ss.str();
        while (!property.empty() && (property.back() == '\n' || property.back() == '\r')) property.pop_back();
      }
      if (property.empty()) {
        std::cerr << "error: give a property with --property or --property-file\n";
        return kExitError;
      }
      char* diag = nullptr;
      check(spaq_property_diagnose(property.c_str(), &diag));
      std::string d = take(diag);
      if (!d.empty()) {
        std::cerr << "error: " << d << "\n";
        return kExitError;
      }
      Data data(chk_traces);
      spaq_verdict verdict;
      char* out = nullptr;
      check(spaq_check(data.d, property.c_str(), &verdict, &out), "check");
      json res = json::parse(take(out));
      if (!chk_json) {
        const auto& smc = res["smc"];
        std::cout << res["property"].get<std::string>() << "\n";
        std::string kind = smc["kind"].get<std::string>();
        if (kind == "test") {
          std::cout << "verdict: " << res["verdict"].get<std::string>() << " (" << smc["successes"] << "/"
                    << smc["n_used"] << " true, p-value " << smc["p_value"] << ")\n";
        } else if (res["verdict"] == "insufficient_data") {
          std::cout << "verdict: insufficient_data (" << smc["n_used"] << " samples)\n";
        } else {
          std::cout << kind << ":";
          if (smc.contains("lo")) std::cout << " lo=" << smc["lo"];
          if (smc.contains("rank_lo")) std::cout << " (rank " << smc["rank_lo"] << ")";
          if (smc.contains("hi")) std::cout << " hi=" << smc["hi"];
          if (smc.contains("rank_hi")) std::cout << " (rank " << smc["rank_hi"] << ")";
          std::cout << " n=" << smc["n_used"] << " coverage=" << smc["coverage"] << "\n";
        }
      }
      std::cout << res.dump() << "\n";
      if (res["smc"]["kind"] != "test" && verdict == SPAQ_HOLDS) return kExitHolds;
      return verdict_exit(res["verdict"].get<std::string>());
    }

    if (*scan) {
      Data data(scan_traces);
      std::unique_ptr<Graph> g;
      if (!scan_config.empty()) g = std::make_unique<Graph>(scan_config);
      char* out = nullptr;
      check(spaq_scan(data.d, g ? g->g : nullptr, scan_window, scan_p0, scan_c, &out), "scan");
      json m = json::parse(take(out));
      for (const auto& c : m["cells"])
        std::cout << c["trigger"].get<std::string>() << " -> " << c["response"].get<std::string>() << ": "
                  << c["verdict"].get<std::string>() << " (" << c["successes"] << "/" << c["n"] << ")\n";
      if (!scan_out.empty()) {
        std::filesystem::create_directories(scan_out);
        std::ofstream(std::filesystem::path(scan_out) / "matrix.json") << m.dump(2) << "\n";
        std::ofstream heat(std::filesystem::path(scan_out) / "heatmap.csv");
        heat << "trigger,response,verdict,successes,n,p_value\n";
        for (const auto& c : m["cells"])
          heat << c["trigger"].get<std::string>() << "," << c["response"].get<std::string>() << ","
               << c["verdict"].get<std::string>() << "," << c["successes"] << "," << c["n"] << "," << c["p_value"]
               << "\n";
      }
      return 0;
    }

    for (int i = 0; i < 3; ++i) {
      if (!*exp_cmd[i]) continue;
      auto& a = ex[i];
      spaq_experiment_options opt = a.extra;
      opt.runs = a.runs;
      opt.cycles = a.cycles;
      opt.seed = *a.seed_opt ? a.seed : default_seed();
      opt.jobs = a.jobs;
      opt.write_traces = a.no_traces ? 0 : 1;
      if (i == 0) opt.force_zero_delays = zero_delays ? 1 : 0;
      Graph g(a.config);
      char* out = nullptr;
      check(spaq_experiment_run(i + 1, g.g, &opt, a.out.c_str(), &out), "exp" + std::to_string(i + 1));
      print_report_summary(json::parse(take(out)));
      std::cout << "report written to " << a.out << "\n";
      return 0;
    }

    if (*rep) {
      Graph g(rep_config);
      Data data(rep_traces);
      char* out = nullptr;
      check(spaq_report(data.d, g.g, &out), "report");
      json r = json::parse(take(out));
      for (const auto& run : r["runs"]) {
        std::cout << run["run_id"].get<std::string>() << ": availability "
                  << pct(run["availability"].get<double>()) << "\n";
        for (const auto& [node, c] : run["costs"].items())
          std::cout << "  " << node << ": check " << c["check_cycles"] << " cycles, calibrate "
                    << c["calibrate_cycles"] << " cycles\n";
      }
      std::cout << "mean availability " << pct(r["mean_availability"].get<double>()) << "\n";
      std::cout << r.dump() << "\n";
      return 0;
    }

    if (*fail) {
      char* out = nullptr;
      check(spaq_extract_failures_csv(fail_csv.c_str(), fail_threshold, &out), "failures");
      std::cout << take(out) << "\n";
      return 0;
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
