#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"

using namespace spaq;

namespace {

struct Step {
  std::string node;
  Op op;
  Outcome outcome;
  bool operator==(const Step&) const = default;
};

std::vector<Step> ops_since(const std::vector<TraceEvent>& events, std::size_t from) {
  std::vector<Step> out;
  for (std::size_t i = from; i < events.size(); ++i)
    if (events[i].op == Op::CheckData || events[i].op == Op::Calibrate)
      out.push_back({events[i].node, events[i].op, events[i].outcome});
  return out;
}

SimConfig quiet(Cycles cycles, std::uint64_t seed = 1) {
  SimConfig c;
  c.total_cycles = cycles;
  c.seed = seed;
  c.drift_sample_every = 0;
  return c;
}

Graph chain_with_coupling() {
  GraphSpec g;
  g.nodes = {fx::deviation_node("a", {}, 1000), fx::deviation_node("b", {"a"}, 1000),
             fx::deviation_node("c", {"b"}, 1)};
  g.param_couplings = {fx::coupling("a", "c")};
  return validate_graph(g);
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("fresh node within its timeout is skipped") {
    GraphSpec g;
    g.nodes = {fx::deviation_node("a", {}, 1000)};
    Simulator sim(validate_graph(g), quiet(5000));
    sim.initialize();
    std::size_t before = sim.events().size();
    CHECK(sim.maintain("a") == MaintainOutcome::Skipped);
    CHECK(sim.events().size() == before);
  }

  TEST_CASE("chain failure rooted at the bottom is diagnosed depth first") {
    Simulator sim(chain_with_coupling(), quiet(5000));
    sim.initialize();
    sim.advance_idle(2);
    sim.set_param("a", "x", 2.0);
    CHECK_FALSE(sim.in_spec("c"));
    std::size_t from = sim.events().size();
    CHECK(sim.maintain("c") == MaintainOutcome::Recalibrated);
    std::vector<Step> expected = {
        {"c", Op::CheckData, Outcome::Fail},   {"b", Op::CheckData, Outcome::Pass},
        {"a", Op::CheckData, Outcome::Fail},   {"a", Op::Calibrate, Outcome::Success},
        {"a", Op::CheckData, Outcome::Pass},   {"c", Op::Calibrate, Outcome::Success},
        {"c", Op::CheckData, Outcome::Pass},
    };
    CHECK(ops_since(sim.events(), from) == expected);
    CHECK(sim.in_spec("a"));
    CHECK(sim.in_spec("c"));
  }

  TEST_CASE("diamond calibrates the shared root once, before both parents") {
    GraphSpec g;
    g.nodes = {fx::deviation_node("a", {}, 1000), fx::deviation_node("b", {"a"}, 1000),
               fx::deviation_node("c", {"a"}, 1000), fx::deviation_node("d", {"b", "c"}, 1)};
    g.param_couplings = {fx::coupling("a", "b"), fx::coupling("a", "d")};
    Simulator sim(validate_graph(g), quiet(5000));
    sim.initialize();
    sim.advance_idle(2);
    sim.set_param("a", "x", 2.0);
    sim.set_param("c", "x", 1.5);
    std::size_t from = sim.events().size();
    sim.maintain("d");
    auto steps = ops_since(sim.events(), from);
    std::vector<std::string> cals;
    std::map<std::string, int> checks;
    for (const auto& s : steps) {
      if (s.op == Op::Calibrate) cals.push_back(s.node);
      else ++checks[s.node];
    }
    CHECK(cals == std::vector<std::string>{"a", "b", "c", "d"});
    for (const auto& [node, n] : checks) CHECK(n <= 2);
  }

  TEST_CASE("public diagnose lists calibrated dependencies in order") {
    Simulator sim(chain_with_coupling(), quiet(5000));
    sim.initialize();
    CHECK(sim.diagnose("a").empty());
    sim.set_param("a", "x", 2.0);
    sim.set_param("b", "x", 1.5);
    CHECK(sim.diagnose("c") == std::vector<std::string>{"a", "b"});
  }

  TEST_CASE("fig5 x_gate failure rooted in state_init") {
    Graph g = validate_graph(load_graph_file(SPAQ_CONFIG_DIR "/fig5.json"));
    Simulator sim(g, quiet(5000, 3));
    sim.initialize();
    sim.set_param("state_init", "angle", 2.5);
    auto cal = sim.diagnose("x_gate");
    REQUIRE(!cal.empty());
    CHECK(cal.front() == "state_init");
    CHECK(std::count(cal.begin(), cal.end(), "state_init") == 1);
  }

  TEST_CASE("all timeouts elapsed and all in spec gives one check per node") {
    GraphSpec g;
    g.nodes = {fx::deviation_node("a", {}, 1), fx::deviation_node("b", {"a"}, 1), fx::deviation_node("c", {"a"}, 1),
               fx::deviation_node("d", {"b", "c"}, 1)};
    Simulator sim(validate_graph(g), quiet(5000));
    sim.initialize();
    sim.advance_idle(3);
    std::size_t from = sim.events().size();
    sim.step();
    auto steps = ops_since(sim.events(), from);
    CHECK(steps.size() == 4);
    std::set<std::string> seen;
    for (const auto& s : steps) {
      CHECK(s.op == Op::CheckData);
      CHECK(s.outcome == Outcome::Pass);
      seen.insert(s.node);
    }
    CHECK(seen.size() == 4);
  }

  TEST_CASE("delays beyond the horizon leave only the initial calibration") {
    Graph g = validate_graph(load_graph_file(SPAQ_CONFIG_DIR "/fig5.json"));
    SimConfig c = quiet(3000);
    c.drift_sample_every = 100;
    c.mode = SimMode::Adaptive;
    for (const auto& n : g.nodes()) c.delay_overrides[n.id] = 1000000;
    auto r = run_simulation(g, c);
    Cycles init_end = 0;
    for (const auto& e : r.run.events)
      if (e.op == Op::Calibrate) init_end = std::max(init_end, e.time + e.duration);
    std::size_t cals = 0;
    for (const auto& e : r.run.events) {
      if (e.op == Op::Calibrate) ++cals;
      if (e.op == Op::CheckData) CHECK(e.time < init_end);
    }
    CHECK(cals == g.size());
  }

  TEST_CASE("same seed gives identical bytes, different seeds differ") {
    Graph g = validate_graph(load_graph_file(SPAQ_CONFIG_DIR "/fig5.json"));
    auto a = run_simulation(g, quiet(5000, 8));
    auto b = run_simulation(g, quiet(5000, 8));
    auto c = run_simulation(g, quiet(5000, 9));
    CHECK(serialize_run(a.run) == serialize_run(b.run));
    CHECK(serialize_run(a.run) != serialize_run(c.run));
    CHECK(a.availability == b.availability);
  }

  TEST_CASE("no check within the post-calibration delay") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      Graph g = validate_graph(fx::random_dag(rng, 6));
      SimConfig c = quiet(3000, 100 + trial);
      c.mode = SimMode::Adaptive;
      std::map<std::string, Cycles> delay;
      for (const auto& n : g.nodes()) c.delay_overrides[n.id] = delay[n.id] = 5 + 7 * (trial % 4);
      auto r = run_simulation(g, c);
      std::map<std::string, Cycles> last_cal;
      for (const auto& e : r.run.events) {
        if (e.op == Op::Calibrate && e.outcome == Outcome::Success) last_cal[e.node] = e.time;
        if (e.op == Op::CheckData && last_cal.count(e.node)) {
          bool inside = e.time < last_cal[e.node] + delay[e.node];
          CHECK_FALSE(inside);
        }
      }
    }
  }

  TEST_CASE("high frequency mode checks on the short timeout") {
    GraphSpec g;
    g.nodes = {fx::deviation_node("a", {}, 500, 1, 5)};
    SimConfig c = quiet(1000);
    c.mode = SimMode::HighFrequency;
    c.high_frequency_timeout = 10;
    auto hf = run_simulation(validate_graph(g), c);
    auto base = run_simulation(validate_graph(g), quiet(1000));
    auto checks = [](const SimResult& r) {
      return std::count_if(r.run.events.begin(), r.run.events.end(),
                           [](const TraceEvent& e) { return e.op == Op::CheckData; });
    };
    CHECK(checks(hf) > 5 * checks(base));
    CHECK(hf.run.meta.mode == "high_frequency");
  }

  TEST_CASE("calibration that never succeeds is bounded by max_retries") {
    GraphSpec g;
    g.nodes = {fx::deviation_node("a", {}, 20)};
    g.nodes[0].parts[0].params[0].cal_noise = 100.0;
    SimConfig c = quiet(2000);
    c.max_retries = 3;
    auto r = run_simulation(validate_graph(g), c);
    std::map<std::uint32_t, int> per_episode;
    int failed = 0;
    for (std::size_t i = 0; i < r.run.events.size(); ++i) {
      const auto& e = r.run.events[i];
      if (e.op != Op::Calibrate) continue;
      if (e.outcome == Outcome::Failed) ++failed;
      if (r.episodes[i]) ++per_episode[r.episodes[i]];
    }
    CHECK(failed > 0);
    for (const auto& [ep, n] : per_episode) CHECK(n <= 3);
  }

  TEST_CASE("availability arithmetic") {
    GraphSpec gs;
    gs.nodes = {fx::deviation_node("n0", {}, 10)};
    Graph g = validate_graph(gs);

    Run clean;
    clean.meta = {"r", 1, g.content_hash(), "baseline", 50, false};
    clean.events = {{10, "n0", Op::CheckData, Outcome::Pass, 0, {}, {}}};
    CHECK(availability(clean, g).availability == doctest::Approx(1.0));

    Run ops;
    ops.meta = {"r", 1, g.content_hash(), "baseline", 100, false};
    ops.events = {{10, "n0", Op::CheckData, Outcome::Pass, 4, {}, {}},
                  {40, "n0", Op::Calibrate, Outcome::Success, 6, {{"x", 1.0}}, {{"x", 1.0}}}};
    auto rep = availability(ops, g);
    CHECK(rep.availability == doctest::Approx(0.90));
    CHECK(rep.per_node_cost.at("n0").check_cycles == 4);
    CHECK(rep.per_node_cost.at("n0").calibrate_cycles == 6);

    Run hand;
    hand.meta = {"r", 1, g.content_hash(), "baseline", 30, true};
    hand.events = {{2, "n0", Op::CheckData, Outcome::Pass, 3, {}, {}},
                   {10, "n0", Op::OracleOutOfSpec, Outcome::Fail, 0, {}, {}},
                   {15, "n0", Op::OracleOutOfSpec, Outcome::Pass, 0, {}, {}}};
    CHECK(availability(hand, g).available_cycles == 22);
    CHECK(availability(hand, g).availability == doctest::Approx(22.0 / 30.0));

    Run inferred;
    inferred.meta = {"r", 1, g.content_hash(), "baseline", 30, false};
    inferred.events = {{5, "n0", Op::CheckData, Outcome::Fail, 1, {}, {}},
                       {12, "n0", Op::Calibrate, Outcome::Success, 2, {{"x", 1.0}}, {{"x", 1.0}}}};
    CHECK(availability(inferred, g).available_cycles == 30 - 9);

    Run bad = clean;
    bad.events[0].node = "ghost";
    CHECK_THROWS_AS(availability(bad, g), Error);
  }

  TEST_CASE("trace availability with oracle events matches the live count") {
    Graph g = validate_graph(load_graph_file(SPAQ_CONFIG_DIR "/fig5.json"));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SimConfig c = quiet(5000, seed);
      c.oracle_ttf = true;
      auto r = run_simulation(g, c);
      auto rep = availability(r.run, g);
      CHECK(rep.available_cycles == r.available_cycles);
      CHECK(rep.per_node_cost == r.costs);
      CHECK((r.availability >= 0.0 && r.availability <= 1.0));
    }
  }

  TEST_CASE("timestamps never decrease and durations are nonnegative") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      Graph g = validate_graph(fx::random_dag(rng, 8));
      auto r = run_simulation(g, quiet(2000, trial));
      for (std::size_t i = 1; i < r.run.events.size(); ++i) CHECK(r.run.events[i].time >= r.run.events[i - 1].time);
      for (const auto& e : r.run.events) CHECK(e.duration >= 0);
      CHECK(r.episodes.size() == r.run.events.size());
    }
  }

  TEST_CASE("empty graph run carries metadata only") {
    auto r = run_simulation(validate_graph(GraphSpec{}), quiet(100, 4));
    CHECK(r.run.events.empty());
    CHECK(r.run.meta.seed == 4);
    CHECK(r.run.meta.total_cycles == 100);
  }
}
