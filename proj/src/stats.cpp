#include "pamlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pamlab/error.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

namespace {

void require_nonempty(std::span<const double> x) { require(!x.empty(), ErrorCode::input, "empty series"); }

std::vector<double> sorted_copy(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  for (double v : s) require(!std::isnan(v), ErrorCode::input, "NaN in series");
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

Ecdf empirical_cdf(std::span<const double> sample) {
  require_nonempty(sample);
  return Ecdf(sorted_copy(sample));
}

double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  require_nonempty(sample);
  const auto s = sorted_copy(sample);
  const double n = static_cast<double>(s.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = std::isinf(s[i]) ? (s[i] > 0 ? 1.0 : 0.0) : cdf(s[i]);
    worst = std::max({worst, (i + 1) / n - F, F - i / n});
  }
  return worst;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a);
  require_nonempty(b);
  const Ecdf fa = empirical_cdf(a), fb = empirical_cdf(b);
  double worst = 0.0;
  for (const auto* s : {&fa.sorted(), &fb.sorted()})
    for (double x : *s) worst = std::max(worst, std::abs(fa(x) - fb(x)));
  return worst;
}

double mean(std::span<const double> x) {
  require_nonempty(x);
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  require(x.size() >= 2, ErrorCode::input, "need at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double quantile(std::span<const double> x, double p) {
  require_nonempty(x);
  require(p >= 0.0 && p <= 1.0, ErrorCode::parameter, "quantile level outside [0,1]");
  const auto s = sorted_copy(x);
  const double h = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  if (lo == hi || s[lo] == s[hi]) return s[lo];
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::input, "series lengths differ or too short");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::input, "constant series");
  return sxy / std::sqrt(sxx * syy);
}

ConfidenceInterval bootstrap_ci(std::span<const double> series, std::uint64_t seed, std::size_t resamples, double level,
                                const std::function<double(std::span<const double>)>& statistic) {
  require_nonempty(series);
  require(resamples >= 2 && level > 0.0 && level < 1.0, ErrorCode::parameter, "bad bootstrap settings");
  const auto stat = statistic ? statistic : [](std::span<const double> x) { return mean(x); };
  SplitMix64 rng(seed);
  std::vector<double> draw(series.size()), values(resamples);
  for (auto& v : values) {
    for (auto& x : draw) x = series[rng.below(series.size())];
    v = stat(draw);
  }
  ConfidenceInterval ci;
  ci.estimate = stat(series);
  ci.lo = quantile(values, 0.5 * (1.0 - level));
  ci.hi = quantile(values, 0.5 * (1.0 + level));
  ci.std_error = sample_sd(values);
  return ci;
}

double laplace_cdf(double x) { return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x); }

double exponential_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

}  // namespace pamlab
