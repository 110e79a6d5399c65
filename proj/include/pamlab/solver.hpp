#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pamlab/geometry.hpp"
#include "pamlab/operators.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/scales.hpp"

namespace pamlab {

enum class SolveMethod { spectral, ode, feynman_kac, propagator };

const char* method_name(SolveMethod m);
std::optional<SolveMethod> parse_method(const std::string& name);

// u(t,z) = exp(log_scale) * u[z]; log_scale is 0 whenever the values are representable.
struct SolutionSnapshot {
  double t = 0.0;
  SolveMethod method = SolveMethod::spectral;
  std::vector<double> u;
  double log_scale = 0.0;
  double total_mass = 0.0;  // sum of u, same scale
  std::optional<std::vector<double>> mc_stderr;
  double mass_stderr = 0.0;
  std::uint64_t seed = 0;
  double remainder_proxy = 0.0;

  double log_total_mass() const;
  double fraction(SiteIndex z) const { return u[z] / total_mass; }
};

SolutionSnapshot solve_spectral(const PotentialField& field, double t, std::size_t k, double tol = 1e-10);
SolutionSnapshot solve_ode(const PotentialField& field, double t, double rel_tol);
SolutionSnapshot feynman_kac_mc(const PotentialField& field, double t, std::size_t walkers, std::uint64_t seed,
                                int workers = 1);
SolutionSnapshot solve_propagator(const PotentialField& field, double t);

// exp(dt H) with nonnegative arithmetic only, so every entry keeps relative accuracy.
class Propagator {
 public:
  explicit Propagator(Operator op);

  const Operator& op() const noexcept { return op_; }
  // v <- exp(dt H) v, rescaled so that max v = 1; the log of the factor is added to log_scale.
  void advance(std::vector<double>& v, double& log_scale, double dt) const;
  // exp(t H) applied to the indicator of `source`.
  std::vector<double> evolve_indicator(SiteIndex source, double t, double& log_scale) const;

 private:
  Operator op_;
  double radius_;  // bound on the spectral radius of the shifted operator
  double shift_ = 0.0;

  void taylor_step(std::vector<double>& v, double h) const;
  std::vector<double> dense_power(SiteIndex source, double t, double& log_scale) const;
};

struct TruncationReport {
  double max_abs_deviation = 0.0;
  double mass_deviation = 0.0;
  double U_large = 0.0;
  double U_window = 0.0;
};

TruncationReport macrobox_truncation_check(const PotentialField& large, const PotentialField& window, double t);

struct ProfileRecord {
  SiteIndex site = 0;
  int distance = 0;
  double log_mass_ratio = 0.0;
  std::optional<double> normalized_ratio;
};

std::vector<ProfileRecord> profile_extract(const SolutionSnapshot& s, SiteIndex Z, const ScaleSet& scales,
                                           const TorusGeometry& g);

void write_snapshot(const std::filesystem::path& csv_path, const SolutionSnapshot& s, const TorusGeometry& g);

}  // namespace pamlab
