#include "pamlab/experiments.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <sstream>

#include "pamlab/error.hpp"
#include "pamlab/io.hpp"
#include "pamlab/localisation.hpp"
#include "pamlab/operators.hpp"
#include "pamlab/parallel.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/solver.hpp"
#include "pamlab/stats.hpp"

namespace pamlab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxSites = std::size_t{1} << 26;
constexpr std::uint64_t kBootstrapStream = 0xb0075a11ULL;

double flag(bool b) { return b ? 1.0 : 0.0; }

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  require(j.is_object(), ErrorCode::input, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&k](const char* s) { return k == s; });
    require(known, ErrorCode::input, "unknown key '" + k + "' in " + where);
  }
}

json bound_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------- rows helpers

std::vector<double> column(const ExperimentResult& res, const std::string& name, double t, bool keep_nan = false) {
  const auto it = std::find(res.columns.begin(), res.columns.end(), name);
  require(it != res.columns.end(), ErrorCode::input, "missing column " + name);
  const auto c = static_cast<std::size_t>(it - res.columns.begin());
  std::vector<double> out;
  for (const auto& row : res.rows)
    if (row.t == t && (keep_nan || !std::isnan(row.values[c]))) out.push_back(row.values[c]);
  return out;
}

double median_or_nan(const std::vector<double>& x) { return x.empty() ? kNaN : median(x); }

void add_gate(const ExperimentConfig& cfg, ExperimentResult& res, const std::string& name, double value,
              GateBounds defaults, std::size_t n) {
  Gate g;
  g.name = name;
  g.value = value;
  const auto it = cfg.gates.find(name);
  g.bounds = it != cfg.gates.end() ? it->second : defaults;
  g.sample_size = n;
  const auto& b = g.bounds;
  const bool inside = !std::isnan(value) && (b.open ? (value > b.lo && value < b.hi) : (value >= b.lo && value <= b.hi));
  g.passed = !b.enabled || inside;
  res.gates.push_back(g);
}

GateBounds between(double lo, double hi, bool open = false) { return {lo, hi, open, true}; }
GateBounds at_most(double hi) { return {-kInf, hi, false, true}; }
GateBounds at_least(double lo) { return {lo, kInf, false, true}; }

// Worst pairwise step m_{k+1} - m_k plus 2 sigma; nonnegative means no significant decrease.
double trend_margin(const std::vector<double>& m, const std::vector<double>& se) {
  double worst = kInf;
  for (std::size_t k = 0; k + 1 < m.size(); ++k)
    worst = std::min(worst, m[k + 1] - m[k] + 2.0 * std::hypot(se[k], se[k + 1]));
  return worst;
}

// ---------------------------------------------------------------- realization helpers

TorusGeometry box_geometry(int d, int side) {
  const double sites = std::pow(static_cast<double>(side), d);
  require(sites <= static_cast<double>(kMaxSites), ErrorCode::parameter,
          "box of side " + std::to_string(side) + " too large; set a side override");
  return TorusGeometry(d, side);
}

PotentialField realization_field(const ExperimentConfig& cfg, const TorusGeometry& g, std::size_t r) {
  return sample_field(g, cfg.gamma, derive_seed(cfg.base_seed, r));
}

std::vector<std::string> coord_columns(const std::string& stem, int d) {
  std::vector<std::string> out;
  for (int a = 1; a <= d; ++a) out.push_back(stem + "_" + std::to_string(a));
  return out;
}

void append_coords(std::vector<double>& row, const TorusGeometry& g, SiteIndex z, double scale) {
  for (int c : g.site(z)) row.push_back(c / scale);
}

int radius_or_default(const ExperimentConfig& cfg, int fallback) { return cfg.params.n.value_or(fallback); }

// ---------------------------------------------------------------- localisation

std::vector<std::string> localisation_columns(const ExperimentConfig& cfg) {
  std::vector<std::string> c = coord_columns("Z1", cfg.d);
  for (auto& s : coord_columns("Z2", cfg.d)) c.push_back(s);
  for (const char* s : {"psi1", "psi2", "gap", "mass_at_Z1", "lambda_local_at_Z1", "median_profile_ratio",
                        "log_tail_stat", "S_j", "S_rho", "G_0", "G_c", "H", "I", "E", "n_used", "c_used"})
    c.emplace_back(s);
  return c;
}

std::vector<double> localisation_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  const TorusGeometry g = box_geometry(s.d, s.side);
  const PotentialField f = realization_field(cfg, g, r);
  const int n = radius_or_default(cfg, s.rho);
  const TopTwo tt = top_two(f, n, 0.0, s);
  const SolutionSnapshot sol = solve_propagator(f, t);
  const EventFlags ev = event_flags(f, cfg.params.c, s);

  const double radius = s.r_t * s.kappa_t;
  std::vector<double> ratios;
  double outside = 0.0;
  for (const auto& rec : profile_extract(sol, tt.Z1, s, g)) {
    if (rec.distance < radius) {
      if (rec.normalized_ratio) ratios.push_back(*rec.normalized_ratio);
    } else {
      outside += sol.u[rec.site] / sol.total_mass;
    }
  }
  std::vector<double> row;
  append_coords(row, g, tt.Z1, 1.0);
  append_coords(row, g, tt.Z2, 1.0);
  row.insert(row.end(), {tt.psi1, tt.psi2, tt.gap, sol.fraction(tt.Z1),
                         local_principal_eigenvalue(f, tt.Z1, n, s.L_t), median_or_nan(ratios),
                         t * s.d_t * s.kappa_t + std::log(outside), flag(ev.S_j), flag(ev.S_rho), flag(ev.G_0),
                         flag(ev.G_c), flag(ev.H), flag(ev.I), flag(ev.all()), static_cast<double>(n), cfg.params.c});
  return row;
}

void localisation_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  std::vector<double> med, med_se, freq, freq_se;
  json per_t = json::array();
  for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
    const double t = cfg.t_grid[k];
    const auto mass = column(res, "mass_at_Z1", t);
    const auto event = column(res, "E", t);
    const auto ratio = column(res, "median_profile_ratio", t);
    const auto tail = column(res, "log_tail_stat", t);
    const double nm = static_cast<double>(mass.size());
    const auto ci = bootstrap_ci(mass, derive_seed(cfg.base_seed ^ kBootstrapStream, k), 1000, 0.95,
                                 [](std::span<const double> x) { return median(x); });
    const double p = mean(event);
    med.push_back(ci.estimate);
    med_se.push_back(ci.std_error);
    freq.push_back(p);
    freq_se.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(event.size())));
    per_t.push_back({{"t", t},
                     {"realizations", mass.size()},
                     {"median_mass", ci.estimate},
                     {"median_mass_se", ci.std_error},
                     {"median_mass_ci", {ci.lo, ci.hi}},
                     {"q1_mass", quantile(mass, 0.25)},
                     {"q3_mass", quantile(mass, 0.75)},
                     {"frac_mass_gt_099", std::count_if(mass.begin(), mass.end(), [](double m) { return m > 0.99; }) / nm},
                     {"median_profile_ratio", median_or_nan(ratio)},
                     {"profile_ratio_count", ratio.size()},
                     {"median_log_tail_stat", median_or_nan(tail)},
                     {"event_frequency", p},
                     {"event_frequency_se", freq_se.back()}});
  }
  res.aggregates = {{"per_t", per_t}};
  const auto& last = per_t.back();
  const std::size_t n = last["realizations"].get<std::size_t>();
  if (cfg.t_grid.size() >= 2) {
    add_gate(cfg, res, "mass_trend", trend_margin(med, med_se), at_least(0.0), n);
    add_gate(cfg, res, "event_trend", trend_margin(freq, freq_se), at_least(0.0), n);
  }
  add_gate(cfg, res, "mass_fraction_099", last["frac_mass_gt_099"].get<double>(), at_least(0.9), n);
  const double pr = last["median_profile_ratio"].is_number() ? last["median_profile_ratio"].get<double>() : kNaN;
  add_gate(cfg, res, "profile_ratio", pr, between(-1.3, -0.7), last["profile_ratio_count"].get<std::size_t>());
}

// ---------------------------------------------------------------- distance law

std::vector<std::string> distance_columns(const ExperimentConfig& cfg) {
  auto c = coord_columns("x", cfg.d);
  c.emplace_back("psi1");
  c.emplace_back("gap");
  return c;
}

std::vector<double> distance_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  const TorusGeometry g = box_geometry(s.d, s.side);
  const PotentialField f = realization_field(cfg, g, r);
  const TopTwo tt = top_two(f, radius_or_default(cfg, s.rho), 0.0, s);
  std::vector<double> row;
  append_coords(row, g, tt.Z1, s.r_t);
  row.push_back(tt.psi1);
  row.push_back(tt.gap);
  return row;
}

void distance_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  json per_t = json::array();
  for (double t : cfg.t_grid) {
    json a = {{"t", t}};
    std::vector<std::vector<double>> xs;
    for (int k = 1; k <= cfg.d; ++k) {
      xs.push_back(column(res, "x_" + std::to_string(k), t));
      std::vector<double> absx;
      for (double v : xs.back()) absx.push_back(std::abs(v));
      a["abs_moment"].push_back(mean(absx));
      a["ks_laplace"].push_back(ks_distance(xs.back(), laplace_cdf));
    }
    a["realizations"] = xs.front().size();
    if (cfg.d >= 2) {
      double worst = 0.0;
      for (int p = 0; p < cfg.d; ++p)
        for (int q = p + 1; q < cfg.d; ++q) worst = std::max(worst, std::abs(pearson(xs[p], xs[q])));
      a["max_abs_correlation"] = worst;
    }
    per_t.push_back(a);
  }
  res.aggregates = {{"per_t", per_t}};
  const auto& last = per_t.back();
  const std::size_t n = last["realizations"].get<std::size_t>();
  for (int k = 0; k < cfg.d; ++k) {
    add_gate(cfg, res, "abs_moment_" + std::to_string(k + 1), last["abs_moment"][k].get<double>(), between(0.85, 1.15), n);
    add_gate(cfg, res, "ks_laplace_" + std::to_string(k + 1), last["ks_laplace"][k].get<double>(), at_most(0.08), n);
  }
  if (cfg.d >= 2) add_gate(cfg, res, "correlation", last["max_abs_correlation"].get<double>(), at_most(0.1), n);
}

// ---------------------------------------------------------------- field profile

std::vector<std::string> profile_columns(const ExperimentConfig& cfg) {
  const int rho = radius_of_influence(cfg.gamma);
  std::vector<std::string> c;
  for (int k = 0; k <= rho; ++k) c.push_back("ratio_" + std::to_string(k));
  return c;
}

std::vector<double> profile_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  const TorusGeometry g = box_geometry(s.d, s.side);
  const PotentialField f = realization_field(cfg, g, r);
  const TopTwo tt = top_two(f, radius_or_default(cfg, s.rho), 0.0, s);
  std::vector<std::vector<double>> classes(s.rho + 1);
  for (SiteIndex z : g.ball(tt.Z1, s.rho)) {
    const int k = g.distance(z, tt.Z1);
    classes[k].push_back(f[z] / std::pow(s.a_t, q_exponent(k, s.gamma)));
  }
  std::vector<double> row;
  for (const auto& c : classes) row.push_back(median_or_nan(c));
  return row;
}

void profile_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  json per_t = json::array();
  const auto cols = profile_columns(cfg);
  for (double t : cfg.t_grid) {
    json a = {{"t", t}};
    for (const auto& name : cols) {
      const auto x = column(res, name, t);
      a["median"].push_back(median(x));
      a["iqr"].push_back(quantile(x, 0.75) - quantile(x, 0.25));
      a["realizations"] = x.size();
    }
    per_t.push_back(a);
  }
  res.aggregates = {{"per_t", per_t}};
  const auto& last = per_t.back();
  const std::size_t n = last["realizations"].get<std::size_t>();
  add_gate(cfg, res, "ratio_0", last["median"][0].get<double>(), between(0.9, 1.1), n);
  if (cols.size() >= 2) add_gate(cfg, res, "ratio_1", last["median"][1].get<double>(), between(0.8, 1.2), n);
}

// ---------------------------------------------------------------- ageing

std::vector<std::string> ageing_columns(const ExperimentConfig&) {
  return {"T_rho", "censored_rho", "T_eps", "censored_eps"};
}

std::vector<double> ageing_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  const double horizon = cfg.params.horizon_factor * t;
  const int side = cfg.side ? s.side : cfg.scales_at(t + horizon).side;
  const TorusGeometry g = box_geometry(s.d, side);
  const PotentialField f = realization_field(cfg, g, r);
  const AgeingResult a = ageing_time(f, radius_or_default(cfg, s.rho), t, horizon, s, 0.0);
  const AgeingResult b = solution_ageing_time(f, cfg.params.eps, t, horizon);
  return {a.value / t, flag(a.censored), b.value / t, flag(b.censored)};
}

void ageing_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  json per_t = json::array();
  for (double t : cfg.t_grid) {
    const auto tr = column(res, "T_rho", t), te = column(res, "T_eps", t);
    const auto cr = column(res, "censored_rho", t), ce = column(res, "censored_eps", t);
    const Ecdf Fr = empirical_cdf(tr), Fe = empirical_cdf(te);
    json a = {{"t", t},
              {"realizations", tr.size()},
              {"min_T", std::min(*std::min_element(tr.begin(), tr.end()), *std::min_element(te.begin(), te.end()))},
              {"censored_fraction_rho", mean(cr)},
              {"censored_fraction_eps", mean(ce)},
              {"ks_two_sample", ks_two_sample(tr, te)},
              {"ecdf_rho_at_1", Fr(1.0)},
              {"omega", cfg.params.omega}};
    for (double w : cfg.params.omega) {
      a["ecdf_rho"].push_back(Fr(w));
      a["ecdf_eps"].push_back(Fe(w));
      if (cfg.d == 1) a["theta_tail"].push_back(theta_tail_numeric(w, 1, cfg.tolerances.quadrature));
    }
    if (cfg.d == 1) a["theta_gap_at_1"] = std::abs((1.0 - Fr(1.0)) - theta_tail_numeric(1.0, 1, cfg.tolerances.quadrature));
    per_t.push_back(a);
  }
  res.aggregates = {{"per_t", per_t}};
  const auto& last = per_t.back();
  const std::size_t n = last["realizations"].get<std::size_t>();
  add_gate(cfg, res, "positivity", last["min_T"].get<double>(), between(0.0, kInf, true), n);
  add_gate(cfg, res, "ecdf_at_1", last["ecdf_rho_at_1"].get<double>(), between(0.05, 0.95, true), n);
  add_gate(cfg, res, "ks_two_sample", last["ks_two_sample"].get<double>(), at_most(0.15), n);
  if (cfg.d == 1) add_gate(cfg, res, "theta_tail_at_1", last["theta_gap_at_1"].get<double>(), at_most(0.1), n);
}

// ---------------------------------------------------------------- extremal tail

std::vector<std::string> extremal_columns(const ExperimentConfig&) { return {"lambda"}; }

std::vector<double> extremal_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  const int n = radius_or_default(cfg, 0);
  const TorusGeometry g(cfg.d, 2 * n + 3);
  const PotentialField f = realization_field(cfg, g, r);
  return {local_principal_eigenvalue(f, g.origin(), n, s.L_t)};
}

void extremal_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  const int n = radius_or_default(cfg, 0);
  json per_t = json::array();
  for (double t : cfg.t_grid) {
    const ScaleSet s = cfg.scales_at(t);
    const auto lam = column(res, "lambda", t);
    const double N = static_cast<double>(lam.size());
    const double td = std::pow(t, cfg.d);
    json a = {{"t", t}, {"n", n}, {"realizations", lam.size()}, {"a_t", s.a_t}, {"d_t", s.d_t}};
    double A = s.a_t;
    if (n >= 1) {
      require(N / td >= 10.0, ErrorCode::sample_size, "fewer than 10 expected exceedances for the quantile");
      A = quantile(lam, 1.0 - 1.0 / td);
      std::vector<double> shifted;
      for (double v : lam)
        if ((v - A) / s.d_t > -1.0) shifted.push_back((v - A) / s.d_t + 1.0);
      a["A_calibrated"] = A;
      a["A_minus_a_t"] = A - s.a_t;
      a["exceedances"] = shifted.size();
      a["tail_shape_ks"] = shifted.empty() ? kNaN : ks_distance(shifted, exponential_cdf);
    } else {
      json table = json::array();
      for (double x : cfg.params.x_grid) {
        const auto e = extremal_tail_n0(t, cfg.d, cfg.gamma, x);
        table.push_back({{"x", x}, {"value", e.value}, {"limit", e.limit}, {"finite_t_factor", e.finite_t_factor}});
      }
      a["analytic"] = table;
      a["x0_deviation"] = std::abs(extremal_tail_n0(t, cfg.d, cfg.gamma, 0.0).value - 1.0);
      if (cfg.gamma == 2.0) {
        const double closed = std::exp(-s.d_t * s.d_t);
        a["finite_t_factor_1"] = extremal_tail_n0(t, cfg.d, cfg.gamma, 1.0).finite_t_factor;
        a["closed_form_factor_1"] = closed;
        a["factor_deviation"] = std::abs(a["finite_t_factor_1"].get<double>() - closed) / closed;
      }
    }
    for (double x : cfg.params.x_grid) {
      const double thr = A + x * s.d_t;
      a["empirical_tail"].push_back(td * std::count_if(lam.begin(), lam.end(), [thr](double v) { return v > thr; }) / N);
    }
    per_t.push_back(a);
  }
  res.aggregates = {{"per_t", per_t}};
  const auto& last = per_t.back();
  const std::size_t N = last["realizations"].get<std::size_t>();
  if (n == 0) {
    add_gate(cfg, res, "x0_identity", last["x0_deviation"].get<double>(), at_most(0.0), N);
    if (cfg.gamma == 2.0) add_gate(cfg, res, "finite_t_factor", last["factor_deviation"].get<double>(), at_most(1e-12), N);
  } else {
    const double ks = last["tail_shape_ks"].is_number() ? last["tail_shape_ks"].get<double>() : kNaN;
    add_gate(cfg, res, "tail_shape_ks", ks, at_most(0.1), last["exceedances"].get<std::size_t>());
  }
}

// ---------------------------------------------------------------- point process

std::vector<std::string> point_process_columns(const ExperimentConfig& cfg) {
  std::vector<std::string> c{"count"};
  for (auto& s : coord_columns("x1", cfg.d)) c.push_back(s);
  for (auto& s : coord_columns("x2", cfg.d)) c.push_back(s);
  c.emplace_back("y1");
  c.emplace_back("y2");
  return c;
}

std::vector<double> point_process_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  require(s.r_t > std::exp(1.0), ErrorCode::parameter, "r_t must exceed e for the rescaling");
  const ScaleSet sr = compute_scales(s.r_t, cfg.d, cfg.gamma, cfg.theta);
  const TorusGeometry g = box_geometry(s.d, s.side);
  const PotentialField f = realization_field(cfg, g, r);
  const int n = radius_or_default(cfg, s.rho);
  LocalEigenvalues local(f, n, s.L_t);
  const TopTwo tt = top_two(local, 0.0, s);
  const double A = sr.a_t, scale = sr.d_t, rate = s.penalty_rate();
  double count = 0.0;
  for (SiteIndex z = 0; z < g.size(); ++z) {
    const double dist = g.origin_distance(z);
    const double need = A + scale * (cfg.params.alpha * dist / s.r_t + cfg.params.tau) + dist * rate;
    if (local.upper(z) < need) continue;
    if (local.value(z) >= need) count += 1.0;
  }
  std::vector<double> row{count};
  append_coords(row, g, tt.Z1, s.r_t);
  append_coords(row, g, tt.Z2, s.r_t);
  row.push_back((tt.psi1 - A) / scale);
  row.push_back((tt.psi2 - A) / scale);
  return row;
}

void point_process_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  const double integral = point_process_density_integral(cfg.d);
  const double expected = window_expected_count(cfg.params.tau, cfg.params.alpha, cfg.d);
  const double two_d = std::pow(2.0, cfg.d);
  json per_t = json::array();
  for (double t : cfg.t_grid) {
    const auto count = column(res, "count", t);
    const auto y1 = column(res, "y1", t), y2 = column(res, "y2", t);
    std::size_t ordered = 0;
    for (std::size_t i = 0; i < y1.size(); ++i) ordered += y1[i] > y2[i];
    per_t.push_back({{"t", t},
                     {"realizations", count.size()},
                     {"mean_count", mean(count)},
                     {"count_se", sample_sd(count) / std::sqrt(static_cast<double>(count.size()))},
                     {"expected_count", expected},
                     {"ordering_fraction", static_cast<double>(ordered) / static_cast<double>(y1.size())},
                     {"ks_y1_gumbel", ks_distance(y1, [two_d](double y) { return std::exp(-two_d * std::exp(-y)); })},
                     {"ks_x1_laplace", ks_distance(column(res, "x1_1", t), laplace_cdf)}});
  }
  res.aggregates = {{"per_t", per_t}, {"density_integral", integral}};
  const auto& last = per_t.back();
  const std::size_t n = last["realizations"].get<std::size_t>();
  add_gate(cfg, res, "mean_count", last["mean_count"].get<double>(), between(0.8, 1.2), n);
  add_gate(cfg, res, "density_normalization", std::abs(integral - 1.0), at_most(1e-3), 0);
  add_gate(cfg, res, "ordering", last["ordering_fraction"].get<double>(), at_least(1.0), n);
}

// ---------------------------------------------------------------- eigen correspondence

std::vector<std::string> correspondence_columns(const ExperimentConfig&) {
  return {"k",           "separation",    "well_separated",  "lambda_1",       "lambda_tilde_z1",
          "abs_diff_1",  "max_abs_diff",  "z1_dist",         "decay_slope",    "slope_ratio",
          "envelope_rate", "assumption_A", "log_phi0",       "log_phi0_upper", "log_phi0_lower"};
}

std::vector<double> correspondence_row(const ExperimentConfig& cfg, double t, std::size_t r) {
  const ScaleSet s = cfg.scales_at(t);
  const TorusGeometry g = box_geometry(s.d, s.side);
  const PotentialField f = realization_field(cfg, g, r);
  const double L = s.L_t;
  const auto k = static_cast<std::size_t>(
      std::min<double>({50.0, static_cast<double>(g.size()), std::max(2.0, std::ceil(std::pow(g.size(), s.eps)))}));

  const LevelSet pi = level_set(f, L);
  const auto sep = separation(pi, g);
  const double sep_value = sep ? static_cast<double>(*sep) : kInf;

  const EigenPair top = principal_eigenpair(build_hamiltonian(f, Full{}), cfg.tolerances.eigen);
  const Operator full = build_hamiltonian(f, Full{});
  const std::vector<double> phi = full.embed(top.vector);
  const SpectralData sd = top_k_eigenpairs(full, k, cfg.tolerances.eigen);
  const double lambda_punct = principal_eigenpair(build_hamiltonian(f, Punctured{L}), cfg.tolerances.eigen).value;
  auto lambda_tilde = [&](SiteIndex x) {
    if (!pi.contains(x)) return lambda_punct;
    return principal_eigenpair(build_hamiltonian(f, SinglePeak{L, x}), cfg.tolerances.eigen).value;
  };

  const SiteIndex z1 = static_cast<SiteIndex>(std::max_element(phi.begin(), phi.end()) - phi.begin());
  const double lt1 = lambda_tilde(z1);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < sd.eigenvalues.size(); ++i)
    max_diff = std::max(max_diff, std::abs(sd.eigenvalues[i] - lambda_tilde(sd.argmax_sites[i])));

  // Least squares of log phi against distance from z1.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (SiteIndex z = 0; z < g.size(); ++z) {
    if (!(phi[z] > 0.0)) continue;
    const double x = g.distance(z, z1), y = std::log(phi[z]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    m += 1.0;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double rate = s.loglog_t() / s.gamma;

  // Assumption A with H(lambda_1) taken over x != z1.
  const int z1_dist = g.origin_distance(z1);
  double nearest = kInf;
  for (SiteIndex x = 0; x < g.size(); ++x) {
    if (x == z1) continue;
    if ((pi.contains(x) ? lambda_tilde(x) : lambda_punct) >= top.value)
      nearest = std::min(nearest, static_cast<double>(g.origin_distance(x)));
  }
  const bool assumption = nearest > z1_dist * (1.0 + s.h_t);

  const double envelope = top.value > L + 2.0 * s.d ? std::log((top.value - L) / (2.0 * s.d)) : kNaN;
  const double log_phi0 = std::log(phi[g.origin()]);
  return {static_cast<double>(k),
          sep_value,
          flag(sep_value > 2.0 * s.j),
          top.value,
          lt1,
          std::abs(top.value - lt1),
          max_diff,
          static_cast<double>(z1_dist),
          slope,
          -slope / rate,
          envelope,
          flag(assumption),
          log_phi0,
          -z1_dist * rate + cfg.params.c * z1_dist,
          -z1_dist * rate};
}

void correspondence_aggregate(const ExperimentConfig& cfg, ExperimentResult& res) {
  json per_t = json::array();
  for (double t : cfg.t_grid) {
    const auto diff = column(res, "abs_diff_1", t, true);
    const auto sep = column(res, "well_separated", t, true);
    std::vector<double> separated;
    for (std::size_t i = 0; i < diff.size(); ++i)
      if (sep[i] == 1.0) separated.push_back(diff[i]);
    const auto ratio = column(res, "slope_ratio", t);
    const auto assume = column(res, "assumption_A", t);
    const auto up = column(res, "log_phi0_upper", t, true), lo = column(res, "log_phi0_lower", t, true),
               phi0 = column(res, "log_phi0", t, true);
    std::vector<double> slack_up, slack_lo;
    for (std::size_t i = 0; i < phi0.size(); ++i) {
      slack_up.push_back(up[i] - phi0[i]);
      slack_lo.push_back(phi0[i] - lo[i]);
    }
    per_t.push_back({{"t", t},
                     {"realizations", diff.size()},
                     {"well_separated", separated.size()},
                     {"median_abs_diff_separated", median_or_nan(separated)},
                     {"median_max_abs_diff", median(column(res, "max_abs_diff", t))},
                     {"median_slope_ratio", median(ratio)},
                     {"median_envelope_rate", median_or_nan(column(res, "envelope_rate", t))},
                     {"assumption_A_frequency", mean(assume)},
                     {"median_slack_upper", median(slack_up)},
                     {"median_slack_lower", median(slack_lo)}});
  }
  res.aggregates = {{"per_t", per_t}};
  const auto& last = per_t.back();
  const std::size_t n = last["realizations"].get<std::size_t>();
  const auto& md = last["median_abs_diff_separated"];
  add_gate(cfg, res, "correspondence", md.is_number() ? md.get<double>() : kNaN, at_most(1e-6),
           last["well_separated"].get<std::size_t>());
  add_gate(cfg, res, "decay_slope", last["median_slope_ratio"].get<double>(), between(0.5, 1.5), n);
  add_gate(cfg, res, "assumption_A", last["assumption_A_frequency"].get<double>(), at_least(0.9), n);
}

// ---------------------------------------------------------------- registry

struct ExperimentDef {
  const char* name;
  std::vector<std::string> (*columns)(const ExperimentConfig&);
  std::vector<double> (*row)(const ExperimentConfig&, double, std::size_t);
  void (*aggregate)(const ExperimentConfig&, ExperimentResult&);
};

const std::vector<ExperimentDef>& definitions() {
  static const std::vector<ExperimentDef> defs{
      {"localisation", localisation_columns, localisation_row, localisation_aggregate},
      {"distance_law", distance_columns, distance_row, distance_aggregate},
      {"field_profile", profile_columns, profile_row, profile_aggregate},
      {"ageing", ageing_columns, ageing_row, ageing_aggregate},
      {"extremal_tail", extremal_columns, extremal_row, extremal_aggregate},
      {"point_process", point_process_columns, point_process_row, point_process_aggregate},
      {"eigen_correspondence", correspondence_columns, correspondence_row, correspondence_aggregate},
  };
  return defs;
}

const ExperimentDef& definition(const std::string& name) {
  for (const auto& d : definitions())
    if (name == d.name) return d;
  fail(ErrorCode::input, "unknown experiment '" + name + "'");
}

}  // namespace

// ---------------------------------------------------------------- config

ScaleSet ExperimentConfig::scales_at(double t) const {
  ScaleOverrides o = overrides;
  o.side = side;
  return compute_scales(t, d, gamma, theta, o);
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"schema", "experiment", "gamma", "d", "theta", "t_grid", "side", "realizations", "base_seed",
                  "tolerances", "overrides", "params", "gates", "output_dir"},
                 "config");
  ExperimentConfig c;
  require(j.contains("schema") && j.at("schema") == 1, ErrorCode::input, "config schema must be 1");
  require(j.contains("experiment"), ErrorCode::input, "config lacks 'experiment'");
  require(j.contains("t_grid"), ErrorCode::input, "config lacks 't_grid'");
  read(j, "experiment", c.experiment);
  read(j, "gamma", c.gamma);
  read(j, "d", c.d);
  read(j, "theta", c.theta);
  read(j, "t_grid", c.t_grid);
  if (j.contains("side") && !j.at("side").is_null()) c.side = j.at("side").get<int>();
  read(j, "realizations", c.realizations);
  read(j, "base_seed", c.base_seed);
  read(j, "output_dir", c.output_dir);
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    reject_unknown(t, {"eigen", "ode_rel", "fk_walkers", "spectral_k", "quadrature"}, "tolerances");
    read(t, "eigen", c.tolerances.eigen);
    read(t, "ode_rel", c.tolerances.ode_rel);
    read(t, "fk_walkers", c.tolerances.fk_walkers);
    read(t, "spectral_k", c.tolerances.spectral_k);
    read(t, "quadrature", c.tolerances.quadrature);
  }
  if (j.contains("overrides")) {
    reject_unknown(j.at("overrides"),
                   {"kappa", "f", "h", "e", "g", "eps", "eps_prime", "eps_dprime", "theta_prime", "eta"}, "overrides");
    c.overrides = overrides_from_json(j.at("overrides"));
  }
  if (j.contains("params")) {
    const auto& p = j.at("params");
    reject_unknown(p, {"n", "c", "horizon_factor", "eps", "tau", "alpha", "omega", "x_grid"}, "params");
    if (p.contains("n") && !p.at("n").is_null()) c.params.n = p.at("n").get<int>();
    read(p, "c", c.params.c);
    read(p, "horizon_factor", c.params.horizon_factor);
    read(p, "eps", c.params.eps);
    read(p, "tau", c.params.tau);
    read(p, "alpha", c.params.alpha);
    read(p, "omega", c.params.omega);
    read(p, "x_grid", c.params.x_grid);
  }
  if (j.contains("gates")) {
    require(j.at("gates").is_object(), ErrorCode::input, "gates must be an object");
    for (const auto& [name, g] : j.at("gates").items()) {
      reject_unknown(g, {"lo", "hi", "open", "enabled"}, "gate " + name);
      GateBounds b;
      read(g, "lo", b.lo);
      read(g, "hi", b.hi);
      read(g, "open", b.open);
      read(g, "enabled", b.enabled);
      c.gates[name] = b;
    }
  }
  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json gates = json::object();
  for (const auto& [name, b] : c.gates)
    gates[name] = {{"lo", bound_json(b.lo)}, {"hi", bound_json(b.hi)}, {"open", b.open}, {"enabled", b.enabled}};
  return {{"schema", c.schema},
          {"experiment", c.experiment},
          {"gamma", c.gamma},
          {"d", c.d},
          {"theta", c.theta},
          {"t_grid", c.t_grid},
          {"side", c.side ? json(*c.side) : json(nullptr)},
          {"realizations", c.realizations},
          {"base_seed", c.base_seed},
          {"tolerances",
           {{"eigen", c.tolerances.eigen},
            {"ode_rel", c.tolerances.ode_rel},
            {"fk_walkers", c.tolerances.fk_walkers},
            {"spectral_k", c.tolerances.spectral_k},
            {"quadrature", c.tolerances.quadrature}}},
          {"overrides", to_json(c.overrides)},
          {"params",
           {{"n", c.params.n ? json(*c.params.n) : json(nullptr)},
            {"c", c.params.c},
            {"horizon_factor", c.params.horizon_factor},
            {"eps", c.params.eps},
            {"tau", c.params.tau},
            {"alpha", c.params.alpha},
            {"omega", c.params.omega},
            {"x_grid", c.params.x_grid}}},
          {"gates", gates},
          {"output_dir", c.output_dir}};
}

void validate(const ExperimentConfig& c) {
  require(c.schema == 1, ErrorCode::input, "config schema must be 1");
  definition(c.experiment);
  require(c.gamma > 0.0, ErrorCode::parameter, "gamma must be positive");
  require(c.d >= 1, ErrorCode::parameter, "d must be at least 1");
  require(c.realizations >= 1, ErrorCode::parameter, "realizations must be at least 1");
  require(!c.t_grid.empty(), ErrorCode::parameter, "t_grid must not be empty");
  for (double t : c.t_grid) require(t > std::exp(1.0), ErrorCode::parameter, "every t must exceed e");
  require(std::is_sorted(c.t_grid.begin(), c.t_grid.end()) &&
              std::adjacent_find(c.t_grid.begin(), c.t_grid.end()) == c.t_grid.end(),
          ErrorCode::parameter, "t_grid must be strictly increasing");
  if (c.side) require(*c.side >= 3 && *c.side % 2 == 1, ErrorCode::parameter, "side must be odd and at least 3");
  require(c.params.eps > 0.0 && c.params.eps < 0.5, ErrorCode::parameter, "eps must lie in (0, 1/2)");
  require(c.params.alpha > -1.0, ErrorCode::parameter, "alpha must exceed -1");
  require(c.tolerances.fk_walkers >= 1000, ErrorCode::parameter, "at least 1000 walkers");
  if (c.params.n) require(*c.params.n >= 0, ErrorCode::parameter, "n must be nonnegative");
  if (c.experiment == "ageing")
    require(c.params.horizon_factor >= 4.0, ErrorCode::parameter, "ageing horizon must be at least 4t");
  if (c.experiment == "extremal_tail" || c.experiment == "point_process") {
    const int j = path_order(c.gamma);
    const int n = c.params.n.value_or(c.experiment == "extremal_tail" ? 0 : radius_of_influence(c.gamma));
    require(n <= j, ErrorCode::parameter, "n must not exceed j");
  }
  if (c.experiment == "extremal_tail" && c.params.n.value_or(0) >= 1)
    for (double t : c.t_grid)
      require(static_cast<double>(c.realizations) / std::pow(t, c.d) >= 10.0, ErrorCode::sample_size,
              "fewer than 10 expected exceedances for the quantile calibration");
  if (c.experiment == "ageing" && c.d == 1)
    require(c.tolerances.quadrature > 0.0, ErrorCode::parameter, "quadrature tolerance must be positive");
}

const std::vector<std::string>& experiment_registry() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& d : definitions()) v.emplace_back(d.name);
    return v;
  }();
  return names;
}

// ---------------------------------------------------------------- running and output

bool ExperimentResult::passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

std::vector<std::string> ExperimentResult::failures() const {
  std::vector<std::string> out;
  for (const auto& g : gates)
    if (!g.passed) out.push_back(g.name);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int workers) {
  validate(cfg);
  const auto& def = definition(cfg.experiment);
  ExperimentResult res;
  res.experiment = cfg.experiment;
  res.columns = def.columns(cfg);
  const std::size_t R = cfg.realizations;
  res.rows.resize(cfg.t_grid.size() * R);
  parallel_for(res.rows.size(), workers, [&](std::size_t i) {
    auto& row = res.rows[i];
    row.t = cfg.t_grid[i / R];
    row.realization = i % R;
    row.values = def.row(cfg, row.t, row.realization);
  });
  aggregate_experiment(cfg, res);
  return res;
}

void aggregate_experiment(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.gates.clear();
  definition(cfg.experiment).aggregate(cfg, res);
}

std::string experiment_csv(const ExperimentConfig& cfg, const ExperimentResult& res) {
  const std::string seed = std::to_string(cfg.base_seed);
  std::string out = "kind,base_seed,realization,t";
  for (const auto& c : res.columns) out += "," + c;
  out += "\n";
  for (double t : cfg.t_grid) {
    for (const auto& row : res.rows) {
      if (row.t != t) continue;
      out += "realization," + seed + "," + std::to_string(row.realization) + "," + format_double(t);
      for (double v : row.values) out += "," + format_double(v);
      out += "\n";
    }
    out += "aggregate," + seed + ",," + format_double(t);
    for (const auto& c : res.columns) out += "," + format_double(median_or_nan(column(res, c, t)));
    out += "\n";
  }
  return out;
}

ExperimentResult parse_experiment_csv(const ExperimentConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::input, "empty experiment CSV");
  const auto header = split_csv_line(line);
  require(header.size() >= 4 && header[0] == "kind", ErrorCode::input, "bad experiment CSV header");
  ExperimentResult res;
  res.experiment = cfg.experiment;
  res.columns.assign(header.begin() + 4, header.end());
  require(res.columns == definition(cfg.experiment).columns(cfg), ErrorCode::input, "columns do not match experiment");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    require(f.size() == header.size(), ErrorCode::input, "ragged experiment CSV row");
    if (f[0] != "realization") continue;
    ExperimentRow row;
    row.realization = std::stoull(f[2]);
    row.t = parse_double(f[3]);
    for (std::size_t i = 4; i < f.size(); ++i) row.values.push_back(parse_double(f[i]));
    res.rows.push_back(std::move(row));
  }
  aggregate_experiment(cfg, res);
  return res;
}

json experiment_summary(const ExperimentConfig& cfg, const ExperimentResult& res) {
  const json config = to_json(cfg);
  json gates = json::array();
  for (const auto& g : res.gates)
    gates.push_back({{"name", g.name},
                     {"value", g.value},
                     {"lo", bound_json(g.bounds.lo)},
                     {"hi", bound_json(g.bounds.hi)},
                     {"open", g.bounds.open},
                     {"enabled", g.bounds.enabled},
                     {"sample_size", g.sample_size},
                     {"passed", g.passed}});
  return {{"schema", 1},
          {"experiment", res.experiment},
          {"config", config},
          {"input_hash", git_blob_hash(config.dump())},
          {"aggregates", res.aggregates},
          {"gates", gates},
          {"failures", res.failures()},
          {"passed", res.passed()}};
}

ExperimentOutputs write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& res) {
  const std::filesystem::path dir(cfg.output_dir);
  ExperimentOutputs out{dir / (cfg.experiment + ".csv"), dir / (cfg.experiment + "_summary.json")};
  write_text_file(out.csv, experiment_csv(cfg, res));
  write_text_file(out.summary, experiment_summary(cfg, res).dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- analytic oracles

double theta_tail_numeric(double omega, int d, double tol) {
  require(d == 1, ErrorCode::parameter, "theta tail quadrature supports d = 1 only");
  require(omega > 0.0 && tol > 0.0, ErrorCode::parameter, "omega and tol must be positive");
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::sinh_sinh;
  using boost::math::quadrature::tanh_sinh;
  const double beta = omega / (1.0 + omega);
  const double inner_tol = 1e-10;
  exp_sinh<double> half_line;
  tanh_sinh<double> segment;
  sinh_sinh<double> line;
  double worst = 0.0;
  auto note = [&worst](double err, double scale) { worst = std::max(worst, err / std::max(scale, 1e-300)); };

  // nu(D_omega(x, y)) = e^{-y} m(|x|), m(x) = integral of e^{-|s| + beta (|s| - x)^+} ds.
  auto m = [&](double x) {
    double e1 = 0.0, e2 = 0.0;
    const double near = x > 0.0 ? segment.integrate([](double s) { return std::exp(-s); }, 0.0, x, inner_tol, &e1) : 0.0;
    // Beyond |x|, with s = |x| + v: e^{-|x|} e^{-(1 - beta) v}.
    const double far = half_line.integrate([&](double v) { return std::exp(-x - (1.0 - beta) * v); }, 0.0,
                                           std::numeric_limits<double>::infinity(), inner_tol, &e2);
    note(e1 + e2, near + far);
    return 2.0 * (near + far);
  };
  auto over_y = [&](double x) {
    const double mx = m(x);
    double err = 0.0;
    const double v = line.integrate(
        [mx](double y) {
          const double ey = std::exp(-y);
          return std::isinf(ey) ? 0.0 : std::exp(-y - ey * mx);
        },
        inner_tol, &err);
    note(err, v);
    return v;
  };
  double err = 0.0;
  const double value = 2.0 * half_line.integrate([&](double x) { return std::exp(-x) * over_y(x); }, 0.0,
                                                 std::numeric_limits<double>::infinity(), tol * 1e-3, &err);
  require(2.0 * err <= tol && worst <= 1e-6, ErrorCode::tolerance, "theta tail quadrature did not converge");
  return value;
}

double point_process_density_integral(int d, double tol) {
  require(d >= 1, ErrorCode::parameter, "d must be at least 1");
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::sinh_sinh;
  exp_sinh<double> half_line;
  sinh_sinh<double> line;
  double ex = 0.0, ey = 0.0;
  const double axis = 2.0 * half_line.integrate([](double s) { return std::exp(-s); }, 0.0,
                                                std::numeric_limits<double>::infinity(), tol, &ex);
  const double two_d = std::pow(2.0, d);
  // Inner y1 > y2 integral in closed form: e^{-y2}.
  const double y = line.integrate(
      [two_d](double y2) {
        const double e = std::exp(-y2);
        return std::isinf(e) ? 0.0 : std::exp(-2.0 * y2 - two_d * e);
      },
      tol, &ey);
  require(ex <= 1e3 * tol && ey <= 1e3 * tol, ErrorCode::tolerance, "density quadrature did not converge");
  return std::pow(axis, 2 * d) * y;
}

double window_expected_count(double tau, double alpha, int d) {
  require(alpha > -1.0 && d >= 1, ErrorCode::parameter, "alpha must exceed -1");
  return std::exp(-tau) * std::pow(2.0 / (1.0 + alpha), d);
}

ExtremalTailN0 extremal_tail_n0(double t, int d, double gamma, double x) {
  require(t > 1.0 && gamma > 0.0 && d >= 1, ErrorCode::parameter, "bad extremal tail arguments");
  const double L = d * std::log(t);
  const double a = std::pow(L, 1.0 / gamma), dt = std::pow(L, 1.0 / gamma - 1.0) / gamma;
  ExtremalTailN0 e;
  e.x = x;
  e.limit = std::exp(-x);
  const double u = x * dt / a;
  // t^d exp(-(a + x d_t)^gamma) = exp(-L ((1 + u)^gamma - 1)); threshold <= 0 has probability one.
  const double expo = u > -1.0 ? -L * std::expm1(gamma * std::log1p(u)) : L;
  e.value = std::exp(expo);
  e.finite_t_factor = std::exp(expo + x);
  return e;
}

DecayEnvelope::DecayEnvelope(const PotentialField& field, const ScaleSet& s)
    : field_(field), level_(s.L_t), d_(s.d),
      delta_t_(delta_scale(s, separation(level_set(field, s.L_t), field.geometry()))) {}

double DecayEnvelope::A(double lambda) const {
  require(lambda > level_ + 2.0 * d_, ErrorCode::parameter, "envelope needs lambda > L_t + 2d");
  return std::log((lambda - level_) / (2.0 * d_));
}

double DecayEnvelope::b(double lambda) const {
  require(lambda > level_ + 2.0 * d_, ErrorCode::parameter, "envelope needs lambda > L_t + 2d");
  const double g = lambda - level_;
  return g * g / (g - 2.0 * d_);
}

double DecayEnvelope::B(double lambda, SiteIndex u) const {
  const double bl = b(lambda);
  const Operator op = build_hamiltonian(field_, Punctured{level_});
  const double G = greens_function(op, lambda, u)[*op.local(u)];
  const double gap = std::abs(1.0 / field_[u] - G);
  return gap == 0.0 ? kInf : bl / (lambda * lambda) / gap;
}

}  // namespace pamlab
