#include "spaq/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace spaq {

const char* to_string(Op op) {
  switch (op) {
    case Op::CheckData: return "check_data";
    case Op::Calibrate: return "calibrate";
    case Op::DriftSample: return "drift_sample";
    case Op::OracleOutOfSpec: return "oracle_out_of_spec";
  }
  return "?";
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Pass: return "pass";
    case Outcome::Fail: return "fail";
    case Outcome::Success: return "success";
    case Outcome::Failed: return "failed";
  }
  return "?";
}

std::optional<Op> op_from_string(std::string_view s) {
  for (auto op : {Op::CheckData, Op::Calibrate, Op::DriftSample, Op::OracleOutOfSpec})
    if (s == to_string(op)) return op;
  return std::nullopt;
}

std::optional<Outcome> outcome_from_string(std::string_view s) {
  for (auto o : {Outcome::Pass, Outcome::Fail, Outcome::Success, Outcome::Failed})
    if (s == to_string(o)) return o;
  return std::nullopt;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

bool clean_token(std::string_view s) {
  return !s.empty() && s.find_first_of("\t\n\r;= ") == std::string_view::npos && s != "-";
}

}  // namespace

std::string validate_event(const TraceEvent& e) {
  if (e.duration < 0) return "negative duration";
  if (e.time < 0) return "negative time";
  if (!clean_token(e.node)) return "node id must be non-empty without whitespace, ';' or '='";
  bool checklike = e.outcome == Outcome::Pass || e.outcome == Outcome::Fail;
  if (e.op == Op::Calibrate) {
    if (checklike) return "calibrate outcome must be success or failed";
  } else if (!checklike) {
    return std::string(to_string(e.op)) + " outcome must be pass or fail";
  }
  if (e.op != Op::Calibrate && !e.params_before.empty()) return "params_before only allowed on calibrate";
  if (e.op != Op::Calibrate && e.op != Op::DriftSample && !e.params_after.empty())
    return "params_after only allowed on calibrate or drift_sample";
  for (const auto* m : {&e.params_before, &e.params_after})
    for (const auto& [k, v] : *m) {
      if (!clean_token(k)) return "bad parameter name '" + k + "'";
      if (!std::isfinite(v)) return "non-finite parameter value for '" + k + "'";
    }
  return {};
}

std::size_t Dataset::event_count() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.events.size();
  return n;
}

bool Dataset::has_node(std::string_view node) const {
  for (const auto& r : runs)
    for (const auto& e : r.events)
      if (e.node == node) return true;
  return false;
}

std::vector<std::string> Dataset::nodes() const {
  std::set<std::string> ids;
  for (const auto& r : runs)
    for (const auto& e : r.events) ids.insert(e.node);
  return {ids.begin(), ids.end()};
}

std::string format_header(const RunMeta& m) {
  std::string s = "#";
  s += kTraceSchema;
  s += "\trun_id=" + m.run_id;
  s += "\tseed=" + std::to_string(m.seed);
  s += "\tgraph_hash=" + m.graph_hash;
  s += "\tmode=" + m.mode;
  s += "\tcycles=" + std::to_string(m.total_cycles);
  s += "\toracle=";
  s += m.oracle ? "1" : "0";
  return s;
}

namespace {

void append_params(std::string& s, const ParamMap& m) {
  if (m.empty()) {
    s += '-';
    return;
  }
  bool first = true;
  for (const auto& [k, v] : m) {
    if (!first) s += ';';
    first = false;
    s += k;
    s += '=';
    s += format_double(v);
  }
}

}  // namespace

std::string format_event(const TraceEvent& e) {
  std::string s;
  s.reserve(64);
  s += std::to_string(e.time);
  s += '\t';
  s += e.node;
  s += '\t';
  s += to_string(e.op);
  s += '\t';
  s += to_string(e.outcome);
  s += '\t';
  s += std::to_string(e.duration);
  s += '\t';
  append_params(s, e.params_before);
  s += '\t';
  append_params(s, e.params_after);
  return s;
}

std::string serialize_run(const Run& run) {
  std::string s = format_header(run.meta);
  s += '\n';
  for (const auto& e : run.events) {
    s += format_event(e);
    s += '\n';
  }
  return s;
}

TraceWriter::TraceWriter(const std::string& path, const RunMeta& meta) : path_(path), out_(path) {
  if (!out_) throw Error(ErrorCode::Io, "cannot open trace '" + path + "' for writing");
  if (!clean_token(meta.run_id) || meta.mode.find_first_of("\t\n ") != std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "run_id and mode must be single tokens");
  out_ << format_header(meta) << '\n';
}

TraceWriter::~TraceWriter() {
  if (out_.is_open()) out_.close();
}

void TraceWriter::append_event(const TraceEvent& e) {
  if (auto why = validate_event(e); !why.empty())
    throw Error(ErrorCode::InvalidArgument, "rejected trace event: " + why);
  if (count_ > 0 && e.time < last_time_)
    throw Error(ErrorCode::NonMonotoneTime, "rejected trace event: time regresses");
  out_ << format_event(e) << '\n';
  if (!out_) throw Error(ErrorCode::Io, "write failed on '" + path_ + "'");
  last_time_ = e.time;
  ++count_;
}

void TraceWriter::close() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "flush failed on '" + path_ + "'");
  out_.close();
}

void write_trace(const std::string& path, const Run& run) {
  TraceWriter w(path, run.meta);
  for (const auto& e : run.events) w.append_event(e);
  w.close();
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_params(std::string_view s, ParamMap& out) {
  if (s == "-") return true;
  for (auto item : split(s, ';')) {
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) return false;
    double v;
    if (!parse_number(item.substr(eq + 1), v)) return false;
    if (!out.emplace(std::string(item.substr(0, eq)), v).second) return false;
  }
  return true;
}

}  // namespace

Dataset parse_trace(std::string_view text, const std::string& origin) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  Run run;
  bool have_header = false;
  auto fail = [&](ErrorCode code, const std::string& msg) {
    throw Error(code, origin + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (!have_header) {
      auto fields = split(line, '\t');
      if (fields[0] != std::string("#") + std::string(kTraceSchema))
        fail(ErrorCode::ParseError, "expected header '#" + std::string(kTraceSchema) + "'");
      std::set<std::string> seen;
      for (std::size_t i = 1; i < fields.size(); ++i) {
        auto eq = fields[i].find('=');
        if (eq == std::string_view::npos) fail(ErrorCode::ParseError, "bad header field");
        std::string key(fields[i].substr(0, eq));
        std::string_view val = fields[i].substr(eq + 1);
        seen.insert(key);
        if (key == "run_id") run.meta.run_id = val;
        else if (key == "seed") { if (!parse_number(val, run.meta.seed)) fail(ErrorCode::ParseError, "bad seed"); }
        else if (key == "graph_hash") run.meta.graph_hash = val;
        else if (key == "mode") run.meta.mode = val;
        else if (key == "cycles") { if (!parse_number(val, run.meta.total_cycles)) fail(ErrorCode::ParseError, "bad cycles"); }
        else if (key == "oracle") run.meta.oracle = val == "1";
        else fail(ErrorCode::ParseError, "unknown header field '" + key + "'");
      }
      for (const char* k : {"run_id", "seed", "graph_hash", "mode", "cycles", "oracle"})
        if (!seen.count(k)) fail(ErrorCode::ParseError, std::string("header missing '") + k + "'");
      if (run.meta.run_id.empty()) fail(ErrorCode::ParseError, "empty run_id");
      have_header = true;
      continue;
    }

    auto f = split(line, '\t');
    if (f.size() != 7) fail(ErrorCode::ParseError, "expected 7 tab-separated fields, got " + std::to_string(f.size()));
    TraceEvent e;
    if (!parse_number(f[0], e.time)) fail(ErrorCode::ParseError, "bad time");
    e.node = f[1];
    auto op = op_from_string(f[2]);
    if (!op) fail(ErrorCode::ParseError, "unknown op '" + std::string(f[2]) + "'");
    e.op = *op;
    auto outcome = outcome_from_string(f[3]);
    if (!outcome) fail(ErrorCode::ParseError, "unknown outcome '" + std::string(f[3]) + "'");
    e.outcome = *outcome;
    if (!parse_number(f[4], e.duration)) fail(ErrorCode::ParseError, "bad duration");
    if (!parse_params(f[5], e.params_before) || !parse_params(f[6], e.params_after))
      fail(ErrorCode::ParseError, "bad parameter map");
    if (auto why = validate_event(e); !why.empty()) fail(ErrorCode::ParseError, why);
    if (!run.events.empty() && e.time < run.events.back().time)
      fail(ErrorCode::NonMonotoneTime, "time " + std::to_string(e.time) + " precedes " +
                                           std::to_string(run.events.back().time));
    run.events.push_back(std::move(e));
  }

  if (!have_header) {
    ds.warnings.push_back(origin + ": empty trace");
    return ds;
  }
  ds.runs.push_back(std::move(run));
  return ds;
}

Dataset read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open trace '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str(), path);
}

Dataset merge_datasets(std::vector<Dataset> parts) {
  Dataset out;
  std::set<std::string> ids;
  for (auto& p : parts) {
    for (auto& w : p.warnings) out.warnings.push_back(std::move(w));
    for (auto& r : p.runs) {
      if (!ids.insert(r.meta.run_id).second)
        throw Error(ErrorCode::DuplicateRunId, "duplicate run_id '" + r.meta.run_id + "'");
      out.runs.push_back(std::move(r));
    }
  }
  return out;
}

Dataset merge_runs(const std::vector<std::string>& paths) {
  std::vector<Dataset> parts;
  parts.reserve(paths.size());
  for (const auto& p : paths) parts.push_back(read_trace(p));
  return merge_datasets(std::move(parts));
}

FailureExtraction extract_failures_from_timeseries(const std::vector<std::pair<double, double>>& series,
                                                   double threshold) {
  if (series.empty()) throw Error(ErrorCode::EmptySeries, "empty time series");
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be > 0");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (!(series[i].first > series[i - 1].first))
      throw Error(ErrorCode::InvalidArgument, "series times must be strictly increasing");

  FailureExtraction out;
  double reference = series.front().second;
  double anchor = series.front().first;
  for (const auto& [t, v] : series) {
    if (std::abs(v - reference) > threshold) {
      out.failure_times.push_back(t);
      out.failure_values.push_back(v);
      out.ttf.push_back(t - anchor);
      reference = v;
      anchor = t;
    }
  }
  return out;
}

std::vector<std::pair<double, double>> read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open series '" + path + "'");
  std::vector<std::pair<double, double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": expected time,value");
    auto trim = [](std::string_view s) {
      while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
      while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
      return s;
    };
    std::string_view ts = trim(std::string_view(line).substr(0, comma));
    std::string_view vs = trim(std::string_view(line).substr(comma + 1));
    double t, v;
    if (!parse_number(ts, t) || !parse_number(vs, v)) {
      if (line_no == 1 && out.empty()) continue;  // header
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": bad number");
    }
    out.emplace_back(t, v);
  }
  return out;
}

}  // namespace spaq
