#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pamlab/geometry.hpp"
#include "pamlab/potential.hpp"

namespace pamlab {

// Closed nearest-neighbour walks of length k from base inside B(base, radius)
// whose interior avoids base.
struct PathFamily {
  SiteIndex base = 0;
  int radius = 0;
  int length = 0;
  std::vector<std::vector<SiteIndex>> paths;
};

PathFamily enumerate_paths(SiteIndex z, int n, int k, const TorusGeometry& g);

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  std::optional<int> max_length;  // nullopt sums every length through a resolvent
};

struct FixedPointResult {
  double lambda = 0.0;
  int iterations = 0;
  bool damped = false;
};

FixedPointResult lambda_fixed_point(const PotentialField& field, SiteIndex z, int n, double level,
                                    const FixedPointOptions& opts = {});

// Right-hand side of the fixed-point equation minus the peak value.
double path_sum(const PotentialField& field, SiteIndex z, int n, double level, double lambda,
                std::optional<int> max_length);

// Sum over walks x -> y of length <= max_len of prod 1/(lambda - zeta) over visited sites.
double greens_path_partial_sum(const TorusGeometry& g, std::span<const double> zeta, double lambda, SiteIndex x,
                               SiteIndex y, int max_len);

}  // namespace pamlab
