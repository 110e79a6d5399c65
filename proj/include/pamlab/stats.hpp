#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pamlab {

// Right-continuous step function over a sorted copy of the sample. +inf entries allowed.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> sorted) : sorted_(std::move(sorted)) {}
  double operator()(double x) const;
  const std::vector<double>& sorted() const noexcept { return sorted_; }
  std::size_t size() const noexcept { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

Ecdf empirical_cdf(std::span<const double> sample);
double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf);
double ks_two_sample(std::span<const double> a, std::span<const double> b);

struct ConfidenceInterval {
  double estimate = 0.0, lo = 0.0, hi = 0.0;
  double std_error = 0.0;  // bootstrap standard deviation of the statistic
};

// Percentile bootstrap, seeded; statistic defaults to the mean.
ConfidenceInterval bootstrap_ci(std::span<const double> series, std::uint64_t seed, std::size_t resamples = 1000,
                                double level = 0.95,
                                const std::function<double(std::span<const double>)>& statistic = {});

double mean(std::span<const double> x);
double sample_sd(std::span<const double> x);
// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::span<const double> x, double p);
double median(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);

double laplace_cdf(double x);
double exponential_cdf(double x);

}  // namespace pamlab
