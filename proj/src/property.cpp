#include "spaq/property.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace spaq {

namespace {

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    s += xs[i];
  }
  return s;
}

std::string describe(std::size_t pos, const std::vector<std::string>& expected, const std::string& detail) {
  std::string msg = "syntax error at position " + std::to_string(pos);
  if (!detail.empty()) msg += ": " + detail;
  if (!expected.empty()) msg += " (expected " + join(expected, ", ") + ")";
  return msg;
}

}  // namespace

PropertySyntaxError::PropertySyntaxError(std::size_t position, std::vector<std::string> expected, std::string detail)
    : Error(ErrorCode::SyntaxError, describe(position, expected, detail)),
      position_(position),
      expected_(std::move(expected)) {}

std::string caret_diagnostic(std::string_view text, std::size_t position) {
  std::string s(text);
  s += '\n';
  s += std::string(std::min(position, text.size()), ' ');
  s += '^';
  return s;
}

// ---- lexer ----------------------------------------------------------------

namespace {

enum class Tok { Ident, Number, LParen, RParen, LBracket, RBracket, Comma, Eq, Gt, Lt, At, Arrow, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Eq: return "'='";
    case Tok::Gt: return "'>'";
    case Tok::Lt: return "'<'";
    case Tok::At: return "'@'";
    case Tok::Arrow: return "'->'";
    case Tok::End: return "end of input";
  }
  return "?";
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    auto single = [&](Tok t) {
      out.push_back({t, std::string(1, c), start});
      ++i;
    };
    switch (c) {
      case '(': single(Tok::LParen); continue;
      case ')': single(Tok::RParen); continue;
      case '[': single(Tok::LBracket); continue;
      case ']': single(Tok::RBracket); continue;
      case ',': single(Tok::Comma); continue;
      case '=': single(Tok::Eq); continue;
      case '>': single(Tok::Gt); continue;
      case '<': single(Tok::Lt); continue;
      case '@': single(Tok::At); continue;
      default: break;
    }
    if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
      out.push_back({Tok::Arrow, "->", start});
      i += 2;
      continue;
    }
    if (c == '"') {
      std::size_t j = s.find('"', i + 1);
      if (j == std::string_view::npos) throw PropertySyntaxError(start, {"closing '\"'"}, "unterminated string");
      out.push_back({Tok::Ident, std::string(s.substr(i + 1, j - i - 1)), start});
      i = j + 1;
      continue;
    }
    if (ident_start(c)) {
      while (i < s.size() && ident_char(s[i])) ++i;
      out.push_back({Tok::Ident, std::string(s.substr(start, i - start)), start});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
      if (c == '-' || c == '+') ++i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
        if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
          i = j;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
      }
      out.push_back({Tok::Number, std::string(s.substr(start, i - start)), start});
      continue;
    }
    throw PropertySyntaxError(start, {}, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

std::optional<double> to_number(const std::string& s) {
  std::string_view v = s;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) return std::nullopt;
  return x;
}

struct MetricInfo {
  const char* name;
  std::vector<std::pair<std::string, std::vector<std::string>>> keys;  // key -> allowed values (empty: free)
};

const std::vector<MetricInfo>& metric_table() {
  static const std::vector<MetricInfo> table = {
      {"ttf", {{"anchor", {"verification", "calibration"}}, {"source", {"check", "oracle"}}}},
      {"failures", {{"window", {}}}},
      {"param", {{"name", {}}, {"at", {"before", "after"}}}},
      {"time_between", {{"event", {"calibrate", "fail", "check"}}}},
      {"pct_time", {{"op", {"check_data", "calibrate"}}}},
  };
  return table;
}

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::Fail: return "fail";
    case EventKind::Calibrate: return "calibrate";
    case EventKind::Shift: return "shift";
    case EventKind::Check: return "check";
  }
  return "?";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  PropertyAst parse() {
    PropertyAst ast;
    const Token& m = peek();
    if (m.kind == Tok::Ident && m.text == "test") ast.mode = QueryMode::Test;
    else if (m.kind == Tok::Ident && m.text == "ci") ast.mode = QueryMode::Ci;
    else fail({"'test'", "'ci'"});
    ++i_;
    ast.body = parse_body(ast.mode);
    expect(Tok::At);
    parse_params(ast);
    expect(Tok::End);
    check_semantics(ast);
    return ast;
  }

 private:
  std::vector<Token> toks_;
  std::size_t i_ = 0;

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }

  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& detail = "") const {
    const Token& t = peek();
    std::string d = detail;
    if (d.empty()) d = t.kind == Tok::End ? "unexpected end of input" : "unexpected '" + t.text + "'";
    throw PropertySyntaxError(t.pos, std::move(expected), d);
  }

  const Token& expect(Tok kind) {
    if (peek().kind != kind) fail({tok_name(kind)});
    return toks_[i_++];
  }

  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    ++i_;
    return true;
  }

  double number() {
    const Token& t = peek();
    if (t.kind != Tok::Number) fail({"number"});
    auto v = to_number(t.text);
    if (!v) fail({"number"}, "malformed number '" + t.text + "'");
    ++i_;
    return *v;
  }

  std::optional<Cmp> cmp_opt() {
    if (accept(Tok::Gt)) return Cmp::Gt;
    if (accept(Tok::Lt)) return Cmp::Lt;
    return std::nullopt;
  }

  Cmp cmp() {
    auto c = cmp_opt();
    if (!c) fail({"'>'", "'<'"});
    return *c;
  }

  // ident or number as raw text
  std::string value() {
    const Token& t = peek();
    if (t.kind != Tok::Ident && t.kind != Tok::Number) fail({"value"});
    ++i_;
    return t.text;
  }

  std::variant<MetricQuery, CondQuery, ImplicationQuery> parse_body(QueryMode mode) {
    const Token& t = peek();
    if (t.kind == Tok::Ident && t.text == "prob" && peek(1).kind == Tok::LBracket) return parse_cond(mode);
    if (t.kind == Tok::Number) {
      if (mode == QueryMode::Ci) fail({"metric", "'prob'"}, "ci mode takes no threshold");
      // hi > metric > lo  (or lo < metric < hi)
      double a = number();
      Cmp c1 = cmp();
      MetricQuery q;
      q.call = parse_metric();
      std::size_t pos = peek().pos;
      Cmp c2 = cmp();
      if (c1 != c2) throw PropertySyntaxError(pos, {c1 == Cmp::Gt ? "'>'" : "'<'"}, "range comparators must agree");
      double b = number();
      double lo = c1 == Cmp::Gt ? b : a, hi = c1 == Cmp::Gt ? a : b;
      if (!(lo < hi)) throw Error(ErrorCode::RangeError, "empty range");
      q.range = std::make_pair(lo, hi);
      return q;
    }
    MetricQuery q;
    q.call = parse_metric();
    if (mode == QueryMode::Ci) {
      if (peek().kind == Tok::Gt || peek().kind == Tok::Lt) fail({"'@'"}, "ci mode takes no threshold");
      return q;
    }
    q.cmp = cmp();
    q.threshold = number();
    if (peek().kind == Tok::Arrow) {
      ++i_;
      ImplicationQuery imp;
      imp.lhs = std::move(q);
      imp.rhs.call = parse_metric();
      imp.rhs.cmp = cmp();
      imp.rhs.threshold = number();
      return imp;
    }
    return q;
  }

  MetricCall parse_metric() {
    const Token& t = peek();
    std::vector<std::string> names;
    for (const auto& m : metric_table()) names.push_back(m.name);
    if (t.kind != Tok::Ident) fail(names);
    auto it = std::find_if(metric_table().begin(), metric_table().end(),
                           [&](const MetricInfo& m) { return t.text == m.name; });
    if (it == metric_table().end()) fail(names, "unknown metric '" + t.text + "'");
    ++i_;
    MetricCall call;
    call.metric = it->name;
    expect(Tok::LParen);
    call.node = expect(Tok::Ident).text;
    while (accept(Tok::Comma)) {
      const Token& key = peek();
      std::vector<std::string> keys;
      for (const auto& [k, _] : it->keys) keys.push_back(k);
      if (key.kind != Tok::Ident) fail(keys);
      auto kit = std::find_if(it->keys.begin(), it->keys.end(), [&](const auto& kv) { return kv.first == key.text; });
      if (kit == it->keys.end()) fail(keys, "unknown argument '" + key.text + "' for " + call.metric);
      if (call.args.count(key.text)) fail({}, "duplicate argument '" + key.text + "'");
      ++i_;
      expect(Tok::Eq);
      std::size_t vpos = peek().pos;
      std::string v = value();
      if (!kit->second.empty() && std::find(kit->second.begin(), kit->second.end(), v) == kit->second.end())
        throw PropertySyntaxError(vpos, kit->second, "invalid value '" + v + "' for " + key.text);
      call.args[key.text] = v;
    }
    expect(Tok::RParen);
    if (call.metric == "failures") {
      auto w = call.args.find("window");
      if (w == call.args.end()) throw Error(ErrorCode::RangeError, "failures() needs window=N");
      auto n = to_number(w->second);
      if (!n || *n < 1 || std::floor(*n) != *n) throw Error(ErrorCode::RangeError, "window must be an integer >= 1");
    }
    if (call.metric == "param" && !call.args.count("name"))
      throw Error(ErrorCode::RangeError, "param() needs name=<parameter>");
    return call;
  }

  EventPattern parse_event() {
    static const std::vector<std::string> kinds = {"fail", "calibrate", "shift", "check"};
    const Token& t = peek();
    if (t.kind != Tok::Ident) fail(kinds);
    EventPattern e;
    if (t.text == "fail") e.kind = EventKind::Fail;
    else if (t.text == "calibrate") e.kind = EventKind::Calibrate;
    else if (t.text == "shift") e.kind = EventKind::Shift;
    else if (t.text == "check") e.kind = EventKind::Check;
    else fail(kinds, "unknown event '" + t.text + "'");
    ++i_;
    expect(Tok::LParen);
    e.node = expect(Tok::Ident).text;
    while (accept(Tok::Comma)) {
      std::vector<std::string> keys;
      if (e.kind == EventKind::Shift) keys = {"param", "rel", "max"};
      const Token& key = peek();
      if (key.kind != Tok::Ident || std::find(keys.begin(), keys.end(), key.text) == keys.end())
        fail(keys, key.kind == Tok::Ident ? "unknown argument '" + key.text + "'" : "");
      std::string k = key.text;
      ++i_;
      expect(Tok::Eq);
      if (k == "param") {
        e.param = expect(Tok::Ident).text;
      } else {
        double v = number();
        if (!(v > 0.0)) throw Error(ErrorCode::RangeError, k + " must be > 0");
        (k == "rel" ? e.rel : e.max) = v;
      }
    }
    expect(Tok::RParen);
    if (e.kind == EventKind::Shift) {
      if (!e.rel && !e.max) throw Error(ErrorCode::RangeError, "shift() needs rel=<fraction> or max=<fraction>");
      if (e.rel && e.max && !(*e.rel < *e.max)) throw Error(ErrorCode::RangeError, "shift() needs rel < max");
    }
    return e;
  }

  CondQuery parse_cond(QueryMode mode) {
    i_ += 2;  // prob [
    CondQuery q;
    q.trigger = parse_event();
    expect(Tok::Arrow);
    q.response = parse_event();
    const Token& w = peek();
    if (w.kind != Tok::Ident || w.text != "within") fail({"'within'"});
    ++i_;
    const Token& win = peek();
    if (win.kind == Tok::Ident && win.text == "next_check") {
      q.window.next_check = true;
      ++i_;
    } else if (win.kind == Tok::Number) {
      double v = number();
      if (v < 1 || std::floor(v) != v) throw Error(ErrorCode::RangeError, "window must be an integer >= 1");
      q.window.cycles = static_cast<Cycles>(v);
    } else {
      fail({"integer", "'next_check'"});
    }
    expect(Tok::RBracket);
    if (mode == QueryMode::Test) {
      q.cmp = cmp();
      q.probability = number();
    } else if (peek().kind == Tok::Gt || peek().kind == Tok::Lt) {
      fail({"'@'"}, "ci mode takes no threshold");
    }
    return q;
  }

  void parse_params(PropertyAst& ast) {
    std::set<std::string> seen;
    bool have_c = false;
    static const std::vector<std::string> keys = {"F", "C", "side", "method", "delta"};
    while (peek().kind != Tok::End) {
      const Token& key = peek();
      if (key.kind != Tok::Ident || std::find(keys.begin(), keys.end(), key.text) == keys.end())
        fail(have_c ? std::vector<std::string>{"end of input", "side", "method", "delta"} : keys);
      if (!seen.insert(key.text).second) fail({}, "duplicate parameter '" + key.text + "'");
      std::string k = key.text;
      ++i_;
      expect(Tok::Eq);
      if (k == "side") {
        std::size_t pos = peek().pos;
        auto s = side_from_string(expect(Tok::Ident).text);
        if (!s) throw PropertySyntaxError(pos, {"lower", "upper", "two_sided"}, "invalid side");
        ast.side = s;
      } else if (k == "method") {
        std::size_t pos = peek().pos;
        auto m = method_from_string(expect(Tok::Ident).text);
        if (!m) throw PropertySyntaxError(pos, {"exact_binomial", "sprt"}, "invalid method");
        ast.method = m;
      } else {
        double v = number();
        if (k == "F") ast.F = v;
        else if (k == "C") {
          ast.C = v;
          have_c = true;
        } else ast.delta = v;
      }
      accept(Tok::Comma);
    }
    if (!have_c) fail({"C="}, "missing confidence C");
  }

  static void check_semantics(const PropertyAst& ast) {
    if (ast.F && !(*ast.F > 0.0 && *ast.F < 1.0)) throw Error(ErrorCode::RangeError, "F must be in (0,1)");
    if (!(ast.C > 0.0 && ast.C < 1.0)) throw Error(ErrorCode::RangeError, "C must be in (0,1)");
    if (ast.delta && !(*ast.delta > 0.0 && *ast.delta < 0.5)) throw Error(ErrorCode::RangeError, "delta must be in (0,0.5)");
    if (const auto* c = std::get_if<CondQuery>(&ast.body)) {
      if (ast.F) throw Error(ErrorCode::RangeError, "prob[...] queries take their proportion from the threshold, not F");
      if (c->probability && !(*c->probability > 0.0 && *c->probability < 1.0))
        throw Error(ErrorCode::RangeError, "probability threshold must be in (0,1)");
    } else if (ast.mode == QueryMode::Ci && !ast.F) {
      throw Error(ErrorCode::RangeError, "ci mode on a metric needs F");
    }
  }
};

std::string cmp_str(Cmp c) { return c == Cmp::Gt ? ">" : "<"; }

std::string quote_ident(const std::string& s) {
  bool plain = !s.empty() && ident_start(s[0]) && std::all_of(s.begin(), s.end(), ident_char);
  return plain ? s : "\"" + s + "\"";
}

std::string metric_query_str(const MetricQuery& q) {
  if (q.range) return format_double(q.range->second) + " > " + to_string(q.call) + " > " + format_double(q.range->first);
  std::string s = to_string(q.call);
  if (q.cmp) s += " " + cmp_str(*q.cmp) + " " + format_double(*q.threshold);
  return s;
}

}  // namespace

PropertyAst parse_property(std::string_view text) { return Parser(text).parse(); }

std::string to_string(const MetricCall& m) {
  std::string s = m.metric + "(" + quote_ident(m.node);
  for (const auto& [k, v] : m.args) s += ", " + k + "=" + (to_number(v) ? v : quote_ident(v));
  return s + ")";
}

std::string to_string(const EventPattern& e) {
  std::string s = std::string(event_name(e.kind)) + "(" + quote_ident(e.node);
  if (!e.param.empty()) s += ", param=" + quote_ident(e.param);
  if (e.rel) s += ", rel=" + format_double(*e.rel);
  if (e.max) s += ", max=" + format_double(*e.max);
  return s + ")";
}

std::string to_string(const PropertyAst& ast) {
  std::string s = ast.mode == QueryMode::Test ? "test " : "ci ";
  if (const auto* m = std::get_if<MetricQuery>(&ast.body)) {
    s += metric_query_str(*m);
  } else if (const auto* c = std::get_if<CondQuery>(&ast.body)) {
    s += "prob[" + to_string(c->trigger) + " -> " + to_string(c->response) + " within " +
         (c->window.next_check ? std::string("next_check") : std::to_string(c->window.cycles)) + "]";
    if (c->cmp) s += " " + cmp_str(*c->cmp) + " " + format_double(*c->probability);
  } else {
    const auto& imp = std::get<ImplicationQuery>(ast.body);
    s += metric_query_str(imp.lhs) + " -> " + metric_query_str(imp.rhs);
  }
  s += " @";
  if (ast.F) s += " F=" + format_double(*ast.F);
  s += " C=" + format_double(ast.C);
  if (ast.side) s += std::string(" side=") + to_string(*ast.side);
  if (ast.method) s += std::string(" method=") + to_string(*ast.method);
  if (ast.delta) s += " delta=" + format_double(*ast.delta);
  return s;
}

// ---- extractors -------------------------------------------------------------

namespace {

void require_node(const Dataset& ds, const std::string& node) {
  if (!ds.has_node(node)) throw Error(ErrorCode::UnknownNode, "node '" + node + "' does not appear in the dataset");
}

void require_samples(const NumericSamples& s, const std::string& what) {
  if (s.values.empty())
    throw Error(ErrorCode::NoSamples, "no " + what + " samples" +
                                          (s.censored ? " (" + std::to_string(s.censored) + " censored)" : ""));
}

bool is_fail_check(const TraceEvent& e) { return e.op == Op::CheckData && e.outcome == Outcome::Fail; }

}  // namespace

double relative_shift(double before, double after) {
  return std::abs(after - before) / std::max(std::abs(before), 1e-9);
}

bool matches(const EventPattern& p, const TraceEvent& e) {
  if (e.node != p.node) return false;
  switch (p.kind) {
    case EventKind::Fail: return is_fail_check(e);
    case EventKind::Check: return e.op == Op::CheckData;
    case EventKind::Calibrate: return e.op == Op::Calibrate;
    case EventKind::Shift: {
      if (e.op != Op::Calibrate) return false;
      double shift = -1.0;
      for (const auto& [name, before] : e.params_before) {
        if (!p.param.empty() && name != p.param) continue;
        auto it = e.params_after.find(name);
        if (it != e.params_after.end()) shift = std::max(shift, relative_shift(before, it->second));
      }
      if (shift < 0.0) return false;
      if (p.rel && !(shift > *p.rel)) return false;
      if (p.max && !(shift <= *p.max)) return false;
      return true;
    }
  }
  return false;
}

NumericSamples metric_ttf(const Dataset& ds, const std::string& node, TtfOptions opt) {
  require_node(ds, node);
  NumericSamples out;
  for (const auto& run : ds.runs) {
    std::optional<Cycles> anchor;
    for (const auto& e : run.events) {
      if (e.node != node) continue;
      bool verification = (e.op == Op::Calibrate && e.outcome == Outcome::Success) ||
                          (!opt.calibration_anchor && e.op == Op::CheckData && e.outcome == Outcome::Pass);
      bool failure = opt.oracle ? (e.op == Op::OracleOutOfSpec && e.outcome == Outcome::Fail) : is_fail_check(e);
      if (failure) {
        if (anchor && e.time > *anchor) out.values.push_back(static_cast<double>(e.time - *anchor));
        anchor.reset();
      } else if (verification) {
        anchor = e.time;
      }
    }
    if (anchor) ++out.censored;
  }
  require_samples(out, "time-to-failure for '" + node + "'");
  return out;
}

NumericSamples metric_failures_per_window(const Dataset& ds, const std::string& node, Cycles window) {
  if (window < 1) throw Error(ErrorCode::RangeError, "window must be >= 1");
  require_node(ds, node);
  NumericSamples out;
  for (const auto& run : ds.runs) {
    Cycles windows = run.meta.total_cycles / window;
    std::vector<double> counts(static_cast<std::size_t>(windows), 0.0);
    for (const auto& e : run.events) {
      if (e.node != node || !is_fail_check(e)) continue;
      Cycles w = e.time / window;
      if (w < windows) counts[static_cast<std::size_t>(w)] += 1.0;
    }
    out.values.insert(out.values.end(), counts.begin(), counts.end());
  }
  require_samples(out, "failure-count");
  return out;
}

NumericSamples metric_param_at_event(const Dataset& ds, const std::string& node, const std::string& param,
                                     bool before) {
  require_node(ds, node);
  NumericSamples out;
  for (const auto& run : ds.runs)
    for (const auto& e : run.events) {
      if (e.node != node || e.op != Op::Calibrate) continue;
      const ParamMap& m = before ? e.params_before : e.params_after;
      auto it = m.find(param);
      if (it == m.end())
        throw Error(ErrorCode::UnknownParam, "calibrate events of '" + node + "' carry no parameter '" + param + "'");
      out.values.push_back(it->second);
    }
  require_samples(out, "parameter");
  return out;
}

NumericSamples metric_time_between(const Dataset& ds, const std::string& node, EventKind kind) {
  require_node(ds, node);
  EventPattern p{kind, node, {}, {}, {}};
  NumericSamples out;
  for (const auto& run : ds.runs) {
    std::optional<Cycles> last;
    for (const auto& e : run.events) {
      if (!matches(p, e)) continue;
      if (last) out.values.push_back(static_cast<double>(e.time - *last));
      last = e.time;
    }
  }
  require_samples(out, "inter-event");
  return out;
}

NumericSamples metric_pct_time_in_state(const Dataset& ds, const std::string& node, Op op) {
  require_node(ds, node);
  NumericSamples out;
  for (const auto& run : ds.runs) {
    Cycles total = run.meta.total_cycles;
    if (total < 1) continue;
    Cycles busy = 0;
    for (const auto& e : run.events)
      if (e.node == node && e.op == op) busy += std::max<Cycles>(0, std::min(e.time + e.duration, total) - e.time);
    out.values.push_back(static_cast<double>(busy) / static_cast<double>(total));
  }
  require_samples(out, "time-fraction");
  return out;
}

std::vector<bool> cond_samples(const Dataset& ds, const CondQuery& q) {
  require_node(ds, q.trigger.node);
  require_node(ds, q.response.node);
  std::vector<bool> out;
  for (const auto& run : ds.runs) {
    std::vector<Cycles> responses, checks;
    for (const auto& e : run.events) {
      if (matches(q.response, e)) responses.push_back(e.time);
      if (e.node == q.response.node && e.op == Op::CheckData) checks.push_back(e.time);
    }
    for (const auto& e : run.events) {
      if (!matches(q.trigger, e)) continue;
      Cycles t = e.time;
      Cycles end;
      if (q.window.next_check) {
        auto nc = std::upper_bound(checks.begin(), checks.end(), t);
        if (nc == checks.end()) {
          out.push_back(false);
          continue;
        }
        end = *nc;
      } else {
        end = t + q.window.cycles;
      }
      auto r = std::upper_bound(responses.begin(), responses.end(), t);
      out.push_back(r != responses.end() && *r <= end);
    }
  }
  if (out.empty())
    throw Error(ErrorCode::NoSamples, "no occurrences of trigger " + to_string(q.trigger));
  return out;
}

NumericSamples extract_metric(const Dataset& ds, const MetricCall& call) {
  auto arg = [&](const char* key, const char* dflt) {
    auto it = call.args.find(key);
    return it == call.args.end() ? std::string(dflt) : it->second;
  };
  if (call.metric == "ttf") {
    TtfOptions opt;
    opt.calibration_anchor = arg("anchor", "verification") == "calibration";
    opt.oracle = arg("source", "check") == "oracle";
    return metric_ttf(ds, call.node, opt);
  }
  if (call.metric == "failures")
    return metric_failures_per_window(ds, call.node, static_cast<Cycles>(std::stod(arg("window", "1"))));
  if (call.metric == "param") return metric_param_at_event(ds, call.node, arg("name", ""), arg("at", "after") == "before");
  if (call.metric == "time_between") {
    std::string ev = arg("event", "calibrate");
    EventKind k = ev == "fail" ? EventKind::Fail : ev == "check" ? EventKind::Check : EventKind::Calibrate;
    return metric_time_between(ds, call.node, k);
  }
  if (call.metric == "pct_time")
    return metric_pct_time_in_state(ds, call.node, arg("op", "check_data") == "calibrate" ? Op::Calibrate : Op::CheckData);
  throw Error(ErrorCode::SyntaxError, "unknown metric '" + call.metric + "'");
}

PropertyResult evaluate_property(const PropertyAst& ast, const Dataset& ds) {
  PropertyResult res;
  res.property = to_string(ast);
  SmcConfig cfg;
  cfg.C = ast.C;
  if (ast.method) cfg.method = *ast.method;
  if (ast.delta) cfg.delta = *ast.delta;

  if (std::holds_alternative<ImplicationQuery>(ast.body))
    throw Error(ErrorCode::Unimplemented, "metric implications are parsed but not evaluated");

  if (const auto* c = std::get_if<CondQuery>(&ast.body)) {
    auto samples = cond_samples(ds, *c);
    res.samples = samples.size();
    if (ast.mode == QueryMode::Ci) {
      auto k = static_cast<std::size_t>(std::count(samples.begin(), samples.end(), true));
      auto [lo, hi] = clopper_pearson(samples.size(), k, ast.C);
      res.proportion_interval = std::make_pair(lo, hi);
      res.smc.kind = SmcResult::Kind::Interval;
      res.smc.verdict = Verdict::Holds;
      res.smc.n_used = samples.size();
      res.smc.successes = k;
      res.smc.lo = lo;
      res.smc.hi = hi;
      res.smc.coverage = ast.C;
      return res;
    }
    cfg.F = *c->probability;
    cfg.side = ast.side.value_or(*c->cmp == Cmp::Gt ? Side::Upper : Side::Lower);
    res.smc = hypothesis_test(samples, cfg);
    return res;
  }

  const auto& m = std::get<MetricQuery>(ast.body);
  NumericSamples xs = extract_metric(ds, m.call);
  res.samples = xs.values.size();
  res.censored = xs.censored;
  if (ast.mode == QueryMode::Ci) {
    Side side = ast.side.value_or(Side::TwoSided);
    try {
      res.smc = quantile_confidence_bound(std::move(xs.values), *ast.F, ast.C, side);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData) throw;
      res.smc.kind = SmcResult::Kind::Interval;
      res.smc.verdict = Verdict::InsufficientData;
      res.smc.n_used = res.samples;
    }
    return res;
  }
  std::vector<bool> flags;
  flags.reserve(xs.values.size());
  for (double x : xs.values) {
    if (m.range) flags.push_back(x > m.range->first && x < m.range->second);
    else flags.push_back(*m.cmp == Cmp::Gt ? x > *m.threshold : x < *m.threshold);
  }
  cfg.F = ast.F.value_or(0.5);
  cfg.side = ast.side.value_or(Side::Upper);
  res.smc = hypothesis_test(flags, cfg);
  return res;
}

PropertyResult evaluate_property(std::string_view text, const Dataset& ds) {
  return evaluate_property(parse_property(text), ds);
}

}  // namespace spaq
