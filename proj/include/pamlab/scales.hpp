#pragma once

#include <optional>

#include "json.hpp"

namespace pamlab {

struct ScaleOverrides {
  std::optional<int> side;
  std::optional<double> kappa, f, h, e, g;
  std::optional<double> eps, eps_prime, eps_dprime, theta_prime;
  std::optional<double> eta;
};

struct ScaleSet {
  double t = 0.0;
  int d = 1;
  double gamma = 1.0;
  double theta = 0.25;

  double R_t = 0.0;
  double side_formula = 0.0;  // 2 floor(R_t) + 1, possibly beyond int range
  int side = 3;
  bool side_overridden = false;
  double V_size = 0.0;

  double L_t = 0.0;
  double a_t = 0.0;
  double d_t = 0.0;
  double r_t = 0.0;
  int rho = 0;
  int j = 0;

  double kappa_t = 0.0, f_t = 0.0, h_t = 0.0, e_t = 0.0, g_t = 0.0;
  double eps = 0.15, eps_prime = 0.20, eps_dprime = 0.10, theta_prime = 0.30;
  double eta = 0.0;
  double delta_t = 0.0;

  ScaleOverrides overrides;

  double loglog_t() const;
  double level(double a) const;  // L_{t,a} on this box
  double penalty_rate() const;   // log log t / (gamma t)
};

ScaleSet compute_scales(double t, int d, double gamma, double theta, const ScaleOverrides& overrides = {});

double q_exponent(int x, double gamma);
double macrobox_level(double V_size, double a, double gamma);
int radius_of_influence(double gamma);
int path_order(double gamma);

// Zero when the separation is infinite (nullopt).
double delta_scale(const ScaleSet& s, std::optional<int> separation);

nlohmann::json to_json(const ScaleSet& s);
ScaleOverrides overrides_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScaleOverrides& o);

}  // namespace pamlab
