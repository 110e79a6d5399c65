#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/scales.hpp"

namespace pamlab {

struct GateBounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool open = false;  // strict inequalities
  bool enabled = true;
};

struct Gate {
  std::string name;
  double value = 0.0;
  GateBounds bounds;
  std::size_t sample_size = 0;
  bool passed = false;
};

struct SolverTolerances {
  double eigen = 1e-10;
  double ode_rel = 1e-10;
  std::size_t fk_walkers = 100000;
  std::size_t spectral_k = 50;
  double quadrature = 1e-3;
};

struct ExperimentParams {
  std::optional<int> n;  // local radius; defaults per experiment
  double c = 1.0;
  double horizon_factor = 8.0;
  double eps = 0.1;
  double tau = 0.0;
  double alpha = 1.0;
  std::vector<double> omega{0.25, 1.0, 4.0};
  std::vector<double> x_grid{-1.0, 0.0, 1.0, 2.0, 3.0};
};

// JSON schema 1. Every output row carries (base_seed, realization).
struct ExperimentConfig {
  int schema = 1;
  std::string experiment;
  double gamma = 2.0;
  int d = 1;
  double theta = 0.25;
  std::vector<double> t_grid;
  std::optional<int> side;
  std::size_t realizations = 100;
  std::uint64_t base_seed = 1;
  SolverTolerances tolerances;
  ScaleOverrides overrides;  // side lives in `side`
  ExperimentParams params;
  std::map<std::string, GateBounds> gates;  // overrides of default gate bounds
  std::string output_dir = "out";

  ScaleSet scales_at(double t) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

const std::vector<std::string>& experiment_registry();

struct ExperimentRow {
  std::size_t realization = 0;
  double t = 0.0;
  std::vector<double> values;  // NaN marks not applicable
};

struct ExperimentResult {
  std::string experiment;
  std::vector<std::string> columns;
  std::vector<ExperimentRow> rows;  // ordered by (t, realization)
  nlohmann::json aggregates;
  std::vector<Gate> gates;

  bool passed() const;
  std::vector<std::string> failures() const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, int workers = 1);
// Recomputes aggregates and gates from rows alone.
void aggregate_experiment(const ExperimentConfig& cfg, ExperimentResult& result);

// Columns kind,base_seed,realization,t,<values>; one aggregate row (column medians) per t.
std::string experiment_csv(const ExperimentConfig& cfg, const ExperimentResult& result);
ExperimentResult parse_experiment_csv(const ExperimentConfig& cfg, const std::string& text);

nlohmann::json experiment_summary(const ExperimentConfig& cfg, const ExperimentResult& result);

struct ExperimentOutputs {
  std::filesystem::path csv, summary;
};

ExperimentOutputs write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

// Limit of P(Theta > omega) as the integral of exp(-nu(D_omega)) against nu; d = 1 only.
double theta_tail_numeric(double omega, int d, double tol = 1e-3);
// Integral of the top-two density over its support.
double point_process_density_integral(int d, double tol = 1e-10);
// nu-mass of the window {y >= alpha |x| + tau}.
double window_expected_count(double tau, double alpha, int d);

struct ExtremalTailN0 {
  double x = 0.0;
  double value = 0.0;            // t^d P(xi > a_t + x d_t)
  double limit = 0.0;            // e^{-x}
  double finite_t_factor = 0.0;  // value / limit
};

ExtremalTailN0 extremal_tail_n0(double t, int d, double gamma, double x);

class DecayEnvelope {
 public:
  DecayEnvelope(const PotentialField& field, const ScaleSet& scales);

  double A(double lambda) const;
  double b(double lambda) const;
  // +inf when 1/xi(u) equals the punctured Green's function on the diagonal.
  double B(double lambda, SiteIndex u) const;
  double delta_t() const noexcept { return delta_t_; }

 private:
  const PotentialField& field_;
  double level_;
  int d_;
  double delta_t_;
};

}  // namespace pamlab
