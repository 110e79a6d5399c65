#include "pamlab/scales.hpp"

#include <cmath>

#include "pamlab/error.hpp"

namespace pamlab {

double ScaleSet::loglog_t() const { return std::log(std::log(t)); }

double ScaleSet::level(double a) const { return macrobox_level(V_size, a, gamma); }

double ScaleSet::penalty_rate() const { return loglog_t() / (gamma * t); }

double q_exponent(int x, double gamma) {
  require(gamma > 0.0, ErrorCode::parameter, "gamma must be positive");
  if (x == 0) return 1.0;
  if (gamma <= 1.0) return 0.0;
  return std::max(0.0, 1.0 - 2.0 * x / (gamma - 1.0));
}

double macrobox_level(double V_size, double a, double gamma) {
  require(V_size >= 2.0 && a <= 1.0, ErrorCode::parameter, "macrobox level needs V_size >= 2 and a <= 1");
  const double base = (1.0 - a) * std::log(V_size);
  return base <= 0.0 ? 0.0 : std::pow(base, 1.0 / gamma);
}

int radius_of_influence(double gamma) {
  require(gamma > 0.0, ErrorCode::parameter, "gamma must be positive");
  return std::max(0, static_cast<int>(std::floor((gamma - 1.0) / 2.0)));
}

int path_order(double gamma) {
  require(gamma > 0.0, ErrorCode::parameter, "gamma must be positive");
  // Smallest j >= 0 with 2j + 1 > gamma - 1.
  int j = std::max(0, static_cast<int>(std::floor(gamma / 2.0)) - 1);
  while (2.0 * j + 1.0 <= gamma - 1.0) ++j;
  return j;
}

ScaleSet compute_scales(double t, int d, double gamma, double theta, const ScaleOverrides& ov) {
  require(std::isfinite(t) && t > std::exp(1.0), ErrorCode::parameter, "t must exceed e");
  require(d >= 1, ErrorCode::parameter, "dimension must be positive");
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::parameter, "gamma must be positive");
  require(theta > 0.0 && theta < 0.5, ErrorCode::parameter, "theta must lie in (0, 1/2)");

  ScaleSet s;
  s.t = t;
  s.d = d;
  s.gamma = gamma;
  s.theta = theta;
  s.overrides = ov;

  const double logt = std::log(t);
  const double ll = std::log(logt);
  const double dlogt = d * logt;

  s.R_t = t * std::pow(logt, 1.0 / gamma);
  s.side_formula = 2.0 * std::floor(s.R_t) + 1.0;
  if (ov.side) {
    require(*ov.side >= 3 && *ov.side % 2 == 1, ErrorCode::parameter, "side override must be odd and >= 3");
    s.side = *ov.side;
    s.side_overridden = true;
  } else {
    require(s.side_formula < 2147483647.0, ErrorCode::parameter, "formula side too large; set a side override");
    s.side = static_cast<int>(s.side_formula);
  }
  s.V_size = std::pow(static_cast<double>(s.side), d);

  s.a_t = std::pow(dlogt, 1.0 / gamma);
  s.d_t = std::pow(dlogt, 1.0 / gamma - 1.0) / gamma;
  s.r_t = t * std::pow(dlogt, 1.0 / gamma - 1.0) / ll;
  s.rho = radius_of_influence(gamma);
  s.j = path_order(gamma);

  s.kappa_t = ov.kappa.value_or(1.0 / ll);
  s.f_t = ov.f.value_or(std::pow(ll, -0.5));
  s.h_t = ov.h.value_or(std::pow(ll, -0.25));
  s.e_t = ov.e.value_or(std::pow(ll, -0.125));
  s.g_t = ov.g.value_or(std::pow(ll, 0.1));

  s.eps_dprime = ov.eps_dprime.value_or(0.10);
  s.eps = ov.eps.value_or(0.15);
  s.eps_prime = ov.eps_prime.value_or(0.20);
  s.theta_prime = ov.theta_prime.value_or(0.30);
  require(0.0 < s.eps_dprime && s.eps_dprime < s.eps && s.eps < s.eps_prime && s.eps_prime < s.theta &&
              s.theta < s.theta_prime && s.theta_prime < 0.5,
          ErrorCode::parameter, "diagnostic constants must be strictly increasing below 1/2 around theta");

  s.eta = ov.eta.value_or(0.5 * (2.0 * s.rho - gamma + 3.0));
  if (!(s.eta > 0.0)) s.eta = 0.1;

  s.L_t = macrobox_level(s.V_size, theta, gamma);
  return s;
}

double delta_scale(const ScaleSet& s, std::optional<int> sep) {
  if (!sep) return 0.0;
  const double gap = s.level(s.eps_prime) - s.L_t;
  const double denom = std::log(1.0 + gap / (2.0 * s.d)) * static_cast<double>(*sep);
  return std::pow(s.V_size, (1.0 - 2.0 * s.theta_prime) / s.d) / denom;
}

namespace {

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> read_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const ScaleSet& s) {
  nlohmann::json j;
  j["t"] = s.t;
  j["d"] = s.d;
  j["gamma"] = s.gamma;
  j["theta"] = s.theta;
  j["R_t"] = s.R_t;
  j["side_formula"] = s.side_formula;
  j["side"] = s.side;
  j["side_overridden"] = s.side_overridden;
  j["V_size"] = s.V_size;
  j["L_t"] = s.L_t;
  j["a_t"] = s.a_t;
  j["d_t"] = s.d_t;
  j["r_t"] = s.r_t;
  j["rho"] = s.rho;
  j["j"] = s.j;
  j["kappa_t"] = s.kappa_t;
  j["f_t"] = s.f_t;
  j["h_t"] = s.h_t;
  j["e_t"] = s.e_t;
  j["g_t"] = s.g_t;
  j["eps"] = s.eps;
  j["eps_prime"] = s.eps_prime;
  j["eps_dprime"] = s.eps_dprime;
  j["theta_prime"] = s.theta_prime;
  j["eta"] = s.eta;
  j["delta_t"] = s.delta_t;
  const auto& o = s.overrides;
  j["overrides"] = {{"side", opt(o.side)},   {"kappa", opt(o.kappa)},
                    {"f", opt(o.f)},         {"h", opt(o.h)},
                    {"e", opt(o.e)},         {"g", opt(o.g)},
                    {"eps", opt(o.eps)},     {"eps_prime", opt(o.eps_prime)},
                    {"eps_dprime", opt(o.eps_dprime)}, {"theta_prime", opt(o.theta_prime)},
                    {"eta", opt(o.eta)}};
  return j;
}

ScaleOverrides overrides_from_json(const nlohmann::json& j) {
  ScaleOverrides o;
  if (j.is_null()) return o;
  require(j.is_object(), ErrorCode::input, "overrides must be an object");
  o.side = read_opt<int>(j, "side");
  o.kappa = read_opt<double>(j, "kappa");
  o.f = read_opt<double>(j, "f");
  o.h = read_opt<double>(j, "h");
  o.e = read_opt<double>(j, "e");
  o.g = read_opt<double>(j, "g");
  o.eps = read_opt<double>(j, "eps");
  o.eps_prime = read_opt<double>(j, "eps_prime");
  o.eps_dprime = read_opt<double>(j, "eps_dprime");
  o.theta_prime = read_opt<double>(j, "theta_prime");
  o.eta = read_opt<double>(j, "eta");
  return o;
}

nlohmann::json to_json(const ScaleOverrides& o) {
  nlohmann::json j = nlohmann::json::object();
  auto put = [&j](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("side", o.side);
  put("kappa", o.kappa);
  put("f", o.f);
  put("h", o.h);
  put("e", o.e);
  put("g", o.g);
  put("eps", o.eps);
  put("eps_prime", o.eps_prime);
  put("eps_dprime", o.eps_dprime);
  put("theta_prime", o.theta_prime);
  put("eta", o.eta);
  return j;
}

}  // namespace pamlab
