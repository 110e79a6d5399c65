#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "pamlab/operators.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/scales.hpp"

namespace pamlab {

// Memoised local principal eigenvalues at a fixed radius and puncturing level.
class LocalEigenvalues {
 public:
  LocalEigenvalues(const PotentialField& field, int n, double level);

  double value(SiteIndex z);
  // Gershgorin bound: largest punctured value in the ball plus 2d.
  double upper(SiteIndex z) const;
  const PotentialField& field() const noexcept { return field_; }
  int radius() const noexcept { return n_; }
  double level() const noexcept { return level_; }

 private:
  const PotentialField& field_;
  int n_;
  double level_;
  std::unordered_map<SiteIndex, double> cache_;
};

double psi(const PotentialField& field, SiteIndex z, int n, double c, const ScaleSet& scales);

struct TopTwo {
  SiteIndex Z1 = 0, Z2 = 0;
  double psi1 = 0.0, psi2 = 0.0, gap = 0.0;
  std::size_t evaluated = 0;
};

TopTwo top_two(const PotentialField& field, int n, double c, const ScaleSet& scales, bool prune = true);
TopTwo top_two(LocalEigenvalues& local, double c, const ScaleSet& scales, bool prune = true,
               const std::vector<SiteIndex>* candidates = nullptr);

struct PenalisedSpectrum {
  std::vector<double> values;
  std::size_t i1 = 0, i2 = 0;
};

PenalisedSpectrum penalised_spectrum(const SpectralData& sd, double t, SiteIndex origin);

struct AgeingResult {
  double value = 0.0;  // s at which the change is detected, or the horizon
  bool censored = false;
};

// Argmax of the penalisation functional tracked over (t, t + horizon]. With a side
// override the box is fixed; otherwise each time uses its own centred sub-window.
AgeingResult ageing_time(const PotentialField& field_on_horizon_box, int n, double t, double horizon,
                         const ScaleSet& scales_at_t, double c = 0.0);

// First s with sup-norm distance between the normalised profiles at t and t+s above eps.
AgeingResult solution_ageing_time(const PotentialField& field, double eps, double t, double horizon);

struct EventFlags {
  bool S_j = false, S_rho = false, G_0 = false, G_c = false, H = false, I = false;
  bool all() const { return S_j && S_rho && G_0 && G_c && H && I; }
};

bool profile_event(const PotentialField& field, int n, SiteIndex z, const ScaleSet& scales);
EventFlags event_flags(const PotentialField& field, double c, const ScaleSet& scales);

struct LocalisationReport {
  SiteIndex Z1 = 0, Z2 = 0;
  double psi1 = 0.0, psi2 = 0.0, gap = 0.0;
  int n_used = 0;
  double c_used = 0.0;
  double mass_at_Z1 = 0.0;
  double lambda_local_at_Z1 = 0.0;
  EventFlags flags;
};

}  // namespace pamlab
