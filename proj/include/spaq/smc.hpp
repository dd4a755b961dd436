#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spaq/error.hpp"

namespace spaq {

enum class Side { Lower, Upper, TwoSided };
enum class Verdict { Holds, DoesNotHold, InsufficientData };
enum class Method { ExactBinomial, Sprt };

const char* to_string(Side s);
const char* to_string(Verdict v);
const char* to_string(Method m);
std::optional<Side> side_from_string(std::string_view s);
std::optional<Method> method_from_string(std::string_view s);

struct SmcConfig {
  double F = 0.5;
  double C = 0.95;
  Method method = Method::ExactBinomial;
  double delta = 0.05;
  /// Upper tests H1: p > F, lower tests H1: p < F.
  Side side = Side::Upper;
};

/// Throws RangeError unless 0 < F < 1 and 0.5 < C < 1 (and delta valid for sprt).
void validate(const SmcConfig& cfg);

struct SmcResult {
  enum class Kind { Test, Bound, Interval };
  Kind kind = Kind::Test;
  Verdict verdict = Verdict::InsufficientData;
  std::size_t n_used = 0;
  std::size_t successes = 0;
  double p_value = 1.0;
  /// Bound: lo for lower side, hi for upper side. Interval: both.
  double lo = 0.0;
  double hi = 0.0;
  std::size_t rank_lo = 0;  // 1-based, 0 when absent
  std::size_t rank_hi = 0;
  double coverage = 0.0;
  std::vector<double> llr;  // sprt log-likelihood ratio after each sample
};

// Binomial helpers, summed in log space.
double log_binomial_pmf(std::size_t n, std::size_t k, double p);
/// P(Bin(n,p) >= k)
double binomial_upper_tail(std::size_t n, std::size_t k, double p);
/// P(Bin(n,p) <= k)
double binomial_lower_tail(std::size_t n, std::size_t k, double p);

SmcResult exact_binomial_test(const std::vector<bool>& samples, const SmcConfig& cfg);
SmcResult exact_binomial_test(std::size_t n, std::size_t k, const SmcConfig& cfg);
SmcResult sprt_test(const std::vector<bool>& stream, const SmcConfig& cfg);
/// Dispatches on cfg.method.
SmcResult hypothesis_test(const std::vector<bool>& samples, const SmcConfig& cfg);

/// Order-statistic confidence bound on the F-quantile. Verdict is Holds when
/// a rank qualifies, InsufficientData otherwise.
SmcResult quantile_confidence_bound(std::vector<double> samples, double F, double C, Side side);
/// Two-sided interval (x_(r), x_(s)) with P(r <= Bin(n,F) < s) >= C.
/// Throws InsufficientData when no pair qualifies.
SmcResult quantile_confidence_interval(std::vector<double> samples, double F, double C);

std::size_t min_samples(double F, double C, Side side);

/// Clopper-Pearson interval for a proportion.
std::pair<double, double> clopper_pearson(std::size_t n, std::size_t k, double C);

}  // namespace spaq
