#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "spaq/experiments.hpp"

using namespace spaq;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Graph load(const char* name) { return validate_graph(load_graph_file(std::string(SPAQ_CONFIG_DIR) + "/" + name)); }

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("zero delays reproduce the baseline trace") {
    Graph g = load("fig5.json");
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      SimConfig base;
      base.total_cycles = 20000;
      base.seed = seed;
      SimConfig adaptive = base;
      adaptive.mode = SimMode::Adaptive;
      for (const auto& n : g.nodes()) adaptive.delay_overrides[n.id] = 0;
      auto a = run_simulation(g, base);
      auto b = run_simulation(g, adaptive);
      CHECK(a.run.events == b.run.events);
      CHECK(a.available_cycles == b.available_cycles);
    }
  }

  TEST_CASE("delay recommendations") {
    Dataset ds;
    Run r;
    r.meta.run_id = "r";
    r.meta.total_cycles = 100000;
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<Cycles> ttf(20, 400);
    std::vector<double> expected;
    Cycles t = 0;
    r.events.push_back({t, "quiet", Op::Calibrate, Outcome::Success, 1, {}, {}});
    for (int i = 0; i < 100; ++i) {
      r.events.push_back({t, "busy", Op::Calibrate, Outcome::Success, 1, {}, {}});
      Cycles d = ttf(rng);
      t += d;
      expected.push_back(static_cast<double>(d));
      r.events.push_back({t, "busy", Op::CheckData, Outcome::Fail, 0, {}, {}});
      t += 1;
    }
    ds.runs.push_back(r);
    auto recs = recommend_delays(ds, 0.95, 0.05);
    REQUIRE(recs.size() == 2);
    for (const auto& rec : recs) {
      if (rec.node == "quiet") {
        CHECK(rec.delay == 0);
        CHECK(rec.bound.verdict == Verdict::InsufficientData);
      } else {
        CHECK(rec.samples == 100);
        std::sort(expected.begin(), expected.end());
        // largest rank r with P(Bin(100, 0.05) >= r) >= 0.95
        std::size_t best = 0;
        for (std::size_t k = 1; k <= 100; ++k)
          if (binomial_upper_tail(100, k, 0.05) >= 0.95) best = k;
        REQUIRE(best > 0);
        CHECK(rec.delay == static_cast<Cycles>(expected[best - 1]));
      }
    }
  }

  TEST_CASE("independent nodes are not flagged by the scan") {
    GraphSpec spec;
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
      ids.push_back("b" + std::to_string(i));
      spec.nodes.push_back(fx::bernoulli_node(ids.back(), {}, 15 + 3 * i, 0.004, 1, 4));
    }
    Graph g = validate_graph(spec);
    SimConfig cfg;
    cfg.total_cycles = 30000;
    Dataset ds = pool(run_batch(g, cfg, 6, 1, 1));
    auto m = pairwise_cofailure_scan(ds, ids, 25, 0.33, 0.9);
    int pairs = 0, not_holds = 0;
    for (const auto& [key, cell] : m.cells) {
      ++pairs;
      if (cell.verdict == Verdict::DoesNotHold) ++not_holds;
    }
    CHECK(pairs == 12);
    CHECK(not_holds >= static_cast<int>(0.9 * pairs));
    CHECK(code_of([&] { pairwise_cofailure_scan(ds, ids, 0, 0.33, 0.9); }) == ErrorCode::RangeError);
  }

  TEST_CASE("shift test without calibrations of the source") {
    Dataset ds;
    Run r;
    r.meta.run_id = "r";
    r.meta.total_cycles = 100;
    r.events = {{5, "A", Op::CheckData, Outcome::Pass, 1, {}, {}}, {9, "B", Op::CheckData, Outcome::Fail, 1, {}, {}}};
    ds.runs.push_back(r);
    CHECK(code_of([&] { param_shift_failure_test(ds, "A", "param_A", 0.1, "B", 0.33, 0.95); }) ==
          ErrorCode::NoSamples);
  }

  TEST_CASE("coupling removal zeroes every strength") {
    GraphSpec spec = load_graph_file(SPAQ_CONFIG_DIR "/exp2.json");
    REQUIRE(!spec.param_couplings.empty());
    for (const auto& c : without_param_couplings(spec).param_couplings) CHECK(c.strength == 0.0);
  }

  TEST_CASE("internode experiment merges one pair and writes its report") {
    Graph g = load("exp2.json");
    Exp2Config cfg;
    cfg.batch.runs = 4;
    cfg.batch.cycles = 20000;
    auto rep = run_internode_experiment(g, cfg);
    REQUIRE(rep.scenarios.size() >= 2);
    Graph after = validate_graph(parse_graph_json(rep.graph_after));
    CHECK(after.size() == g.size() - 1);
    CHECK_NOTHROW(after.index_of("AB"));

    auto dir = fs::temp_directory_path() / "spaq_exp_tests" / "exp2";
    fs::remove_all(dir);
    write_report(rep, dir.string(), false);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "costs.csv"));
    CHECK(fs::exists(dir / "availability.csv"));
    CHECK(fs::exists(dir / "recommendations.csv"));
    CHECK(!fs::exists(dir / "traces"));
    CHECK(slurp(dir / "report.json") == report_to_json(rep) + "\n");
  }

  TEST_CASE("experiments are deterministic") {
    Graph g = load("fig5.json");
    Exp1Config cfg;
    cfg.batch.runs = 3;
    cfg.batch.cycles = 5000;
    auto a = report_to_json(run_delayed_checks_experiment(g, cfg));
    cfg.batch.jobs = 2;
    auto b = report_to_json(run_delayed_checks_experiment(g, cfg));
    CHECK(a == b);
  }

  TEST_CASE("compare counts paired wins") {
    ScenarioResult x, y;
    x.label = "x";
    y.label = "y";
    x.availability = {0.5, 0.6, 0.7};
    y.availability = {0.6, 0.6, 0.8};
    x.mean_availability = 0.6;
    y.mean_availability = 2.0 / 3;
    auto c = compare(x, y);
    CHECK(c.paired_wins == 2);
    CHECK(c.runs == 3);
    CHECK(c.mean_delta == doctest::Approx(0.2 / 3));
  }
}
