#include "spaq/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spaq {

const char* to_string(Side s) {
  switch (s) {
    case Side::Lower: return "lower";
    case Side::Upper: return "upper";
    case Side::TwoSided: return "two_sided";
  }
  return "?";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::DoesNotHold: return "does_not_hold";
    case Verdict::InsufficientData: return "insufficient_data";
  }
  return "?";
}

const char* to_string(Method m) { return m == Method::Sprt ? "sprt" : "exact_binomial"; }

std::optional<Side> side_from_string(std::string_view s) {
  for (auto v : {Side::Lower, Side::Upper, Side::TwoSided})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

std::optional<Method> method_from_string(std::string_view s) {
  for (auto v : {Method::ExactBinomial, Method::Sprt})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

namespace {

void check_fc(double F, double C) {
  if (!(F > 0.0 && F < 1.0)) throw Error(ErrorCode::RangeError, "F must be in (0,1)");
  if (!(C > 0.0 && C < 1.0)) throw Error(ErrorCode::RangeError, "C must be in (0,1)");
}

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// pmf[k] for k = 0..n
std::vector<double> binomial_pmf(std::size_t n, double p) {
  std::vector<double> pmf(n + 1);
  for (std::size_t k = 0; k <= n; ++k) pmf[k] = std::exp(log_binomial_pmf(n, k, p));
  return pmf;
}

}  // namespace

void validate(const SmcConfig& cfg) {
  if (!(cfg.F > 0.0 && cfg.F < 1.0)) throw Error(ErrorCode::RangeError, "F must be in (0,1)");
  if (!(cfg.C > 0.5 && cfg.C < 1.0)) throw Error(ErrorCode::RangeError, "C must be in (0.5,1)");
  if (cfg.method == Method::Sprt && !(cfg.delta > 0.0 && cfg.delta < std::min(cfg.F, 1.0 - cfg.F)))
    throw Error(ErrorCode::RangeError, "delta must be in (0, min(F, 1-F))");
}

double log_binomial_pmf(std::size_t n, std::size_t k, double p) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (k > n) return ninf;
  if (p <= 0.0) return k == 0 ? 0.0 : ninf;
  if (p >= 1.0) return k == n ? 0.0 : ninf;
  double dn = static_cast<double>(n), dk = static_cast<double>(k);
  return std::lgamma(dn + 1) - std::lgamma(dk + 1) - std::lgamma(dn - dk + 1) + dk * std::log(p) +
         (dn - dk) * std::log1p(-p);
}

double binomial_upper_tail(std::size_t n, std::size_t k, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = k; i <= n; ++i) acc = log_sum_exp(acc, log_binomial_pmf(n, i, p));
  return std::min(1.0, std::exp(acc));
}

double binomial_lower_tail(std::size_t n, std::size_t k, double p) {
  if (k >= n) return 1.0;
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= k; ++i) acc = log_sum_exp(acc, log_binomial_pmf(n, i, p));
  return std::min(1.0, std::exp(acc));
}

SmcResult exact_binomial_test(std::size_t n, std::size_t k, const SmcConfig& cfg) {
  validate(cfg);
  if (n == 0) throw Error(ErrorCode::EmptySamples, "no samples to test");
  if (k > n) throw Error(ErrorCode::InvalidArgument, "successes exceed sample count");
  SmcResult r;
  r.kind = SmcResult::Kind::Test;
  r.n_used = n;
  r.successes = k;
  const double alpha = 1.0 - cfg.C;
  const double dn = static_cast<double>(n);
  double best;  // smallest attainable p-value
  switch (cfg.side) {
    case Side::Upper:
      r.p_value = binomial_upper_tail(n, k, cfg.F);
      best = std::pow(cfg.F, dn);
      break;
    case Side::Lower:
      r.p_value = binomial_lower_tail(n, k, cfg.F);
      best = std::pow(1.0 - cfg.F, dn);
      break;
    case Side::TwoSided:
    default:
      r.p_value = std::min(1.0, 2.0 * std::min(binomial_upper_tail(n, k, cfg.F), binomial_lower_tail(n, k, cfg.F)));
      best = std::min(1.0, 2.0 * std::min(std::pow(cfg.F, dn), std::pow(1.0 - cfg.F, dn)));
      break;
  }
  if (best > alpha) r.verdict = Verdict::InsufficientData;
  else r.verdict = r.p_value <= alpha ? Verdict::Holds : Verdict::DoesNotHold;
  return r;
}

SmcResult exact_binomial_test(const std::vector<bool>& samples, const SmcConfig& cfg) {
  auto k = static_cast<std::size_t>(std::count(samples.begin(), samples.end(), true));
  return exact_binomial_test(samples.size(), k, cfg);
}

SmcResult sprt_test(const std::vector<bool>& stream, const SmcConfig& cfg) {
  SmcConfig c = cfg;
  c.method = Method::Sprt;
  validate(c);
  if (c.side == Side::TwoSided) throw Error(ErrorCode::InvalidArgument, "sprt needs a one-sided hypothesis");
  // H1 is the hypothesis whose acceptance means "holds".
  double p_h1 = c.side == Side::Upper ? c.F + c.delta : c.F - c.delta;
  double p_h0 = c.side == Side::Upper ? c.F - c.delta : c.F + c.delta;
  const double err = 1.0 - c.C;
  const double upper = std::log((1.0 - err) / err);
  const double lower = std::log(err / (1.0 - err));
  const double step_true = std::log(p_h1 / p_h0);
  const double step_false = std::log((1.0 - p_h1) / (1.0 - p_h0));

  SmcResult r;
  r.kind = SmcResult::Kind::Test;
  r.verdict = Verdict::InsufficientData;
  double llr = 0.0;
  for (bool x : stream) {
    llr += x ? step_true : step_false;
    ++r.n_used;
    if (x) ++r.successes;
    r.llr.push_back(llr);
    if (llr >= upper) {
      r.verdict = Verdict::Holds;
      break;
    }
    if (llr <= lower) {
      r.verdict = Verdict::DoesNotHold;
      break;
    }
  }
  r.p_value = std::exp(-std::abs(llr));
  return r;
}

SmcResult hypothesis_test(const std::vector<bool>& samples, const SmcConfig& cfg) {
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "no samples to test");
  return cfg.method == Method::Sprt ? sprt_test(samples, cfg) : exact_binomial_test(samples, cfg);
}

SmcResult quantile_confidence_bound(std::vector<double> samples, double F, double C, Side side) {
  check_fc(F, C);
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "no samples for quantile bound");
  if (side == Side::TwoSided) return quantile_confidence_interval(std::move(samples), F, C);
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  auto pmf = binomial_pmf(n, F);
  SmcResult r;
  r.kind = SmcResult::Kind::Bound;
  r.n_used = n;
  r.verdict = Verdict::InsufficientData;
  if (side == Side::Lower) {
    // coverage(r) = P(Bin >= r) shrinks with r; take the tightest qualifying rank.
    double tail = 0.0;
    for (std::size_t rank = n; rank >= 1; --rank) {
      tail += pmf[rank];
      if (tail >= C) {
        r.verdict = Verdict::Holds;
        r.rank_lo = rank;
        r.lo = samples[rank - 1];
        r.coverage = std::min(1.0, tail);
        break;
      }
    }
  } else {
    double cdf = 0.0;  // P(Bin <= s-1)
    for (std::size_t s = 1; s <= n; ++s) {
      cdf += pmf[s - 1];
      if (cdf >= C) {
        r.verdict = Verdict::Holds;
        r.rank_hi = s;
        r.hi = samples[s - 1];
        r.coverage = std::min(1.0, cdf);
        break;
      }
    }
  }
  return r;
}

SmcResult quantile_confidence_interval(std::vector<double> samples, double F, double C) {
  check_fc(F, C);
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "no samples for quantile interval");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  auto pmf = binomial_pmf(n, F);
  // prefix[k] = P(Bin < k)
  std::vector<double> prefix(n + 2, 0.0);
  for (std::size_t k = 0; k <= n; ++k) prefix[k + 1] = prefix[k] + pmf[k];

  std::size_t best_r = 0, best_s = 0;
  double best_cov = 0.0, best_imbalance = 0.0;
  std::size_t s = 2;
  for (std::size_t r = 1; r < n; ++r) {
    s = std::max(s, r + 1);
    while (s <= n && prefix[s] - prefix[r] < C) ++s;
    if (s > n) break;
    double cov = prefix[s] - prefix[r];
    double imbalance = std::abs(prefix[r] - (1.0 - prefix[s]));
    bool better = best_r == 0 || s - r < best_s - best_r ||
                  (s - r == best_s - best_r && imbalance < best_imbalance - 1e-15);
    if (better) {
      best_r = r;
      best_s = s;
      best_cov = cov;
      best_imbalance = imbalance;
    }
  }
  if (best_r == 0)
    throw Error(ErrorCode::InsufficientData, std::to_string(n) + " samples cannot reach confidence " +
                                                 std::to_string(C) + " for a two-sided interval");
  SmcResult r;
  r.kind = SmcResult::Kind::Interval;
  r.verdict = Verdict::Holds;
  r.n_used = n;
  r.rank_lo = best_r;
  r.rank_hi = best_s;
  r.lo = samples[best_r - 1];
  r.hi = samples[best_s - 1];
  r.coverage = std::min(1.0, best_cov);
  return r;
}

std::size_t min_samples(double F, double C, Side side) {
  check_fc(F, C);
  for (std::size_t n = 1;; ++n) {
    double dn = static_cast<double>(n);
    double cov;
    switch (side) {
      case Side::Lower: cov = 1.0 - std::pow(1.0 - F, dn); break;
      case Side::Upper: cov = 1.0 - std::pow(F, dn); break;
      case Side::TwoSided:
      default: cov = 1.0 - std::pow(F, dn) - std::pow(1.0 - F, dn); break;
    }
    if (cov >= C) return n;
    if (n > 100000000) throw Error(ErrorCode::RangeError, "sample requirement out of range");
  }
}

std::pair<double, double> clopper_pearson(std::size_t n, std::size_t k, double C) {
  if (n == 0) throw Error(ErrorCode::EmptySamples, "no samples for interval");
  if (!(C > 0.0 && C < 1.0)) throw Error(ErrorCode::RangeError, "C must be in (0,1)");
  const double a = (1.0 - C) / 2.0;
  auto solve = [](auto f) {
    // f increasing in p; find root of f(p) = 0 on [0,1]
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double lower = k == 0 ? 0.0 : solve([&](double p) { return binomial_upper_tail(n, k, p) - a; });
  double upper = k == n ? 1.0 : solve([&](double p) { return a - binomial_lower_tail(n, k, p); });
  return {lower, upper};
}

}  // namespace spaq
