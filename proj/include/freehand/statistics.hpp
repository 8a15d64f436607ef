#pragma once

// Statistical analyses around the leaderboard: sampling distribution of the
// mean final score, Pearson correlation, and the sample-size calculation for
// a paired t-test based on the noncentral t distribution.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "freehand/error.hpp"

namespace freehand {

struct CltStats {
  double mean = 0.0;
  double stderr_mean = 0.0;  // sample standard deviation / sqrt(n)
  std::size_t count = 0;
};

/// Mean and standard error of the mean (n - 1 denominator), via Welford.
inline CltStats clt_distribution(std::span<const double> values) {
  if (values.size() < 2)
    throw Error(ErrorCode::insufficient_data, "standard error needs at least 2 values, got " +
                                                  std::to_string(values.size()));
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : values) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  CltStats s;
  s.count = n;
  s.mean = mean;
  const double variance = std::max(0.0, m2 / static_cast<double>(n - 1));
  s.stderr_mean = std::sqrt(variance) / std::sqrt(static_cast<double>(n));
  return s;
}

struct CltReport {
  std::vector<std::string> teams;
  std::vector<CltStats> stats;
};

inline CltReport clt_report(const std::vector<std::string>& teams, const std::vector<std::vector<double>>& scores) {
  if (teams.size() != scores.size()) throw Error(ErrorCode::invalid_input, "one score row per team is required");
  CltReport r;
  r.teams = teams;
  for (const auto& row : scores) r.stats.push_back(clt_distribution(row));
  return r;
}

/// Sample Pearson correlation (two-pass).
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::invalid_input, "pearson_r inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::insufficient_data, "pearson_r needs at least 2 pairs");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*xmin == *xmax || *ymin == *ymax) throw Error(ErrorCode::degenerate_signal, "pearson_r input is constant");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Noncentral t

/// P(T <= t) for T ~ noncentral t(df, delta). Twin Poisson-weighted
/// incomplete-beta series (Lenth's AS 243) with absolute error bound 1e-13.
inline double noncentral_t_cdf(double t, double df, double delta) {
  if (!(df > 0.0) || !std::isfinite(t) || !std::isfinite(delta))
    throw Error(ErrorCode::invalid_input, "noncentral t requires df > 0 and finite arguments");
  bool negate = false;
  double tt = t, del = delta;
  if (t < 0.0) {
    negate = true;
    tt = -t;
    del = -delta;
  }
  double result = 0.0;
  const double x = tt * tt / (tt * tt + df);
  if (x > 0.0) {
    const double lambda = del * del;
    double p = 0.5 * std::exp(-0.5 * lambda);
    double q = std::sqrt(2.0 / std::numbers::pi) * p * del;
    double s = 0.5 - p;
    double a = 0.5;
    const double b = 0.5 * df;
    const double rxb = std::pow(1.0 - x, b);
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double xodd = boost::math::ibeta(a, b, x);
    double godd = 2.0 * rxb * std::exp(a * std::log(x) - log_beta);
    double xeven = 1.0 - rxb;
    double geven = b * x * rxb;
    result = p * xodd + q * xeven;
    const double max_terms = std::max(1000.0, lambda + 200.0);
    for (double en = 1.0; en <= max_terms; en += 1.0) {
      a += 1.0;
      xodd -= godd;
      xeven -= geven;
      godd *= x * (a + b - 1.0) / a;
      geven *= x * (a + b - 0.5) / (a + 0.5);
      p *= lambda / (2.0 * en);
      q *= lambda / (2.0 * en + 1.0);
      s -= p;
      result += p * xodd + q * xeven;
      // Past the Poisson mode the remaining mass bounds the truncation error.
      if (2.0 * en > lambda && 2.0 * s * (xodd - godd) <= 1e-13) break;
    }
  }
  result += 0.5 * std::erfc(del / std::numbers::sqrt2);  // P(Z > del)
  result = std::clamp(result, 0.0, 1.0);
  return negate ? 1.0 - result : result;
}

enum class Tail { one, two };

inline Tail tail_from_string(const std::string& s) {
  if (s == "one") return Tail::one;
  if (s == "two") return Tail::two;
  throw Error(ErrorCode::invalid_input, "tail must be 'one' or 'two', got '" + s + "'");
}

/// Power of a paired t-test with n pairs at standardised effect d.
inline double paired_t_power(double effect_size, int n, double alpha, Tail tail) {
  if (n < 2) throw Error(ErrorCode::invalid_input, "paired t-test needs n >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_input, "alpha must lie in (0, 1)");
  const double df = n - 1;
  const double nc = effect_size * std::sqrt(static_cast<double>(n));
  const boost::math::students_t central(df);
  if (tail == Tail::one) {
    const double crit = boost::math::quantile(boost::math::complement(central, alpha));
    return 1.0 - noncentral_t_cdf(crit, df, nc);
  }
  const double crit = boost::math::quantile(boost::math::complement(central, alpha / 2.0));
  return (1.0 - noncentral_t_cdf(crit, df, nc)) + noncentral_t_cdf(-crit, df, nc);
}

/// Smallest n >= 2 whose paired t-test power reaches `power`.
inline int paired_t_sample_size(double effect_size, double alpha, double power, Tail tail = Tail::one,
                                int max_n = 10'000'000) {
  if (!(effect_size > 0.0) || !std::isfinite(effect_size))
    throw Error(ErrorCode::invalid_input, "effect size must be positive and finite");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_input, "alpha must lie in (0, 1)");
  if (!(power > 0.0 && power < 1.0)) throw Error(ErrorCode::invalid_input, "power must lie in (0, 1)");
  for (int n = 2; n <= max_n; ++n)
    if (paired_t_power(effect_size, n, alpha, tail) >= power) return n;
  throw Error(ErrorCode::insufficient_data, "required sample size exceeds " + std::to_string(max_n));
}

}  // namespace freehand
