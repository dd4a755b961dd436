#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spaq/error.hpp"
#include "spaq/graph.hpp"

namespace spaq {

inline constexpr std::string_view kTraceSchema = "spaq-trace-1";

enum class Op { CheckData, Calibrate, DriftSample, OracleOutOfSpec };
enum class Outcome { Pass, Fail, Success, Failed };

const char* to_string(Op op);
const char* to_string(Outcome outcome);
std::optional<Op> op_from_string(std::string_view s);
std::optional<Outcome> outcome_from_string(std::string_view s);

using ParamMap = std::map<std::string, double>;

/// One logged simulator action. The run it belongs to is carried by the
/// enclosing Run.
///
/// check_data: pass | fail. calibrate: success | failed, with parameter
/// snapshots before and after. drift_sample: pass | fail (ground truth at the
/// sample), current values in params_after. oracle_out_of_spec: fail at the
/// onset of a ground-truth out-of-spec interval, pass when it ends.
struct TraceEvent {
  Cycles time = 0;
  std::string node;
  Op op = Op::CheckData;
  Outcome outcome = Outcome::Pass;
  Cycles duration = 0;
  ParamMap params_before;
  ParamMap params_after;

  bool failed() const { return outcome == Outcome::Fail || outcome == Outcome::Failed; }
  bool operator==(const TraceEvent&) const = default;
};

/// Empty string when valid, otherwise the reason.
std::string validate_event(const TraceEvent& e);

struct RunMeta {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string graph_hash;
  std::string mode;
  Cycles total_cycles = 0;
  bool oracle = false;

  bool operator==(const RunMeta&) const = default;
};

struct Run {
  RunMeta meta;
  std::vector<TraceEvent> events;

  bool operator==(const Run&) const = default;
};

struct Dataset {
  std::vector<Run> runs;
  std::vector<std::string> warnings;

  std::size_t event_count() const;
  bool has_node(std::string_view node) const;
  /// Sorted distinct node ids appearing in any event.
  std::vector<std::string> nodes() const;
};

std::string format_header(const RunMeta& meta);
std::string format_event(const TraceEvent& e);
/// Header plus one line per event.
std::string serialize_run(const Run& run);

/// Line writer for one run file. The header is written on open.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, const RunMeta& meta);
  ~TraceWriter();
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  /// Rejects invalid events and time regressions before writing.
  void append_event(const TraceEvent& e);
  void close();

 private:
  std::string path_;
  std::ofstream out_;
  Cycles last_time_ = 0;
  std::size_t count_ = 0;
};

void write_trace(const std::string& path, const Run& run);

/// Parses one run. Errors carry "path:line:" prefixes.
Dataset parse_trace(std::string_view text, const std::string& origin = "<memory>");
Dataset read_trace(const std::string& path);
Dataset merge_runs(const std::vector<std::string>& paths);
/// Concatenates datasets; duplicate run ids are an error.
Dataset merge_datasets(std::vector<Dataset> parts);

struct FailureExtraction {
  std::vector<double> failure_times;
  std::vector<double> failure_values;
  /// Time from series start (or the previous failure) to each failure.
  std::vector<double> ttf;
};

/// A failure fires when |value - reference| > threshold; the reference is the
/// value at the previous failure, or the first sample.
FailureExtraction extract_failures_from_timeseries(const std::vector<std::pair<double, double>>& series,
                                                   double threshold);

/// CSV with columns time,value; a header row is optional.
std::vector<std::pair<double, double>> read_series_csv(const std::string& path);

std::string format_double(double x);

}  // namespace spaq
