#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "pamlab/geometry.hpp"

namespace pamlab {

class PotentialField {
 public:
  PotentialField(TorusGeometry geometry, std::vector<double> values, double gamma, std::uint64_t seed);

  const TorusGeometry& geometry() const noexcept { return geometry_; }
  double gamma() const noexcept { return gamma_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](SiteIndex i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  // Lowest index among maximisers.
  SiteIndex argmax() const;

 private:
  TorusGeometry geometry_;
  std::vector<double> values_;
  double gamma_;
  std::uint64_t seed_;
};

// Value at a site depends only on (seed, gamma, coordinates), never on the side.
double keyed_weibull(std::uint64_t seed, double gamma, const Site& z);

PotentialField sample_field(const TorusGeometry& g, double gamma, std::uint64_t seed);
PotentialField constant_field(const TorusGeometry& g, double value);

struct LevelSet {
  double level = 0.0;
  std::vector<SiteIndex> sites;  // ascending

  bool contains(SiteIndex z) const;
};

LevelSet level_set(const PotentialField& f, double level);
PotentialField puncture(const PotentialField& f, const LevelSet& pi, std::optional<SiteIndex> keep = std::nullopt);

// nullopt encodes +infinity (fewer than two sites).
std::optional<int> separation(const LevelSet& pi, const TorusGeometry& g);

void write_field_csv(std::ostream& os, const PotentialField& f);
PotentialField read_field_csv(std::istream& is, double gamma, std::uint64_t seed);

}  // namespace pamlab
