#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spaq/error.hpp"
#include "spaq/smc.hpp"
#include "spaq/trace.hpp"

namespace spaq {

enum class QueryMode { Test, Ci };
enum class Cmp { Gt, Lt };

using Args = std::map<std::string, std::string>;

/// metric(node, key=value, ...). Known metrics and their arguments:
///   ttf(node, anchor=verification|calibration, source=check|oracle)
///   failures(node, window=N)
///   param(node, name=P, at=before|after)
///   time_between(node, event=calibrate|fail|check)
///   pct_time(node, op=check_data|calibrate)
struct MetricCall {
  std::string metric;
  std::string node;
  Args args;
  bool operator==(const MetricCall&) const = default;
};

/// `metric cmp threshold`, or `hi > metric > lo` when `range` is set.
struct MetricQuery {
  MetricCall call;
  std::optional<Cmp> cmp;
  std::optional<double> threshold;
  /// Lower/upper limits of a range body; samples satisfy lo < x < hi.
  std::optional<std::pair<double, double>> range;
  bool operator==(const MetricQuery&) const = default;
};

enum class EventKind { Fail, Calibrate, Shift, Check };

struct EventPattern {
  EventKind kind = EventKind::Fail;
  std::string node;
  /// shift only: parameter name (empty: any parameter), relative change
  /// strictly above rel and, when set, at most max.
  std::string param;
  std::optional<double> rel;
  std::optional<double> max;
  bool operator==(const EventPattern&) const = default;
};

struct Window {
  bool next_check = false;
  Cycles cycles = 0;
  bool operator==(const Window&) const = default;
};

struct CondQuery {
  EventPattern trigger;
  EventPattern response;
  Window window;
  std::optional<Cmp> cmp;
  std::optional<double> probability;
  bool operator==(const CondQuery&) const = default;
};

/// `metric1 cmp a -> metric2 cmp b`; parsed, not evaluated.
struct ImplicationQuery {
  MetricQuery lhs;
  MetricQuery rhs;
  bool operator==(const ImplicationQuery&) const = default;
};

struct PropertyAst {
  QueryMode mode = QueryMode::Test;
  std::variant<MetricQuery, CondQuery, ImplicationQuery> body;
  std::optional<double> F;
  double C = 0.95;
  /// Optional extras after '@': side, method, delta.
  std::optional<Side> side;
  std::optional<Method> method;
  std::optional<double> delta;
  bool operator==(const PropertyAst&) const = default;
};

class PropertySyntaxError : public Error {
 public:
  PropertySyntaxError(std::size_t position, std::vector<std::string> expected, std::string detail);
  std::size_t position() const { return position_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::vector<std::string> expected_;
};

PropertyAst parse_property(std::string_view text);
std::string to_string(const PropertyAst& ast);
std::string to_string(const EventPattern& e);
std::string to_string(const MetricCall& m);

/// Two-line diagnostic: the text and a caret under `position`.
std::string caret_diagnostic(std::string_view text, std::size_t position);

// ---- extractors -----------------------------------------------------------

struct NumericSamples {
  std::vector<double> values;
  std::size_t censored = 0;
};

struct TtfOptions {
  bool calibration_anchor = false;
  /// End intervals at ground-truth out-of-spec onsets instead of failed checks.
  bool oracle = false;
};

NumericSamples metric_ttf(const Dataset& ds, const std::string& node, TtfOptions opt = {});
NumericSamples metric_failures_per_window(const Dataset& ds, const std::string& node, Cycles window);
NumericSamples metric_param_at_event(const Dataset& ds, const std::string& node, const std::string& param,
                                     bool before);
NumericSamples metric_time_between(const Dataset& ds, const std::string& node, EventKind kind);
NumericSamples metric_pct_time_in_state(const Dataset& ds, const std::string& node, Op op);

bool matches(const EventPattern& p, const TraceEvent& e);
double relative_shift(double before, double after);

/// One sample per trigger occurrence, in run then time order.
std::vector<bool> cond_samples(const Dataset& ds, const CondQuery& q);

NumericSamples extract_metric(const Dataset& ds, const MetricCall& call);

struct PropertyResult {
  std::string property;
  SmcResult smc;
  /// Confidence interval on the probability in `ci prob[...]` mode.
  std::optional<std::pair<double, double>> proportion_interval;
  std::size_t samples = 0;
  std::size_t censored = 0;
};

/// Parses nothing; evaluates a parsed property over a dataset.
PropertyResult evaluate_property(const PropertyAst& ast, const Dataset& ds);
PropertyResult evaluate_property(std::string_view text, const Dataset& ds);

}  // namespace spaq
