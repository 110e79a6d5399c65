// One PASS/FAIL line per acceptance criterion. Exit status is nonzero only on
// an evaluation error, or on any FAIL under --strict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pamlab/error.hpp"
#include "pamlab/experiments.hpp"
#include "pamlab/operators.hpp"
#include "pamlab/parallel.hpp"
#include "pamlab/paths.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/scales.hpp"
#include "pamlab/solver.hpp"

using namespace pamlab;
using nlohmann::json;

namespace {

// Frozen tolerances and sizes.
namespace tol {
constexpr double solver_sup_relative = 1e-7;
constexpr double fk_sigma = 3.0;
constexpr int fk_min_agreeing = 95;
constexpr int solver_seeds = 100;
constexpr int solver_side = 101;
constexpr double solver_t = 3.0;
constexpr std::size_t fk_walkers = 100000;
constexpr double closed_form = 1e-10;
constexpr int sandwich_instances = 1000;
// Roundoff allowance of the dense eigensolver on the sandwich comparison.
constexpr double sandwich_roundoff = 1e-9;
constexpr int resolvent_instances = 100;
constexpr double resolvent_relative = 1e-8;
constexpr double finite_t_factor = 1e-12;
constexpr int localisation_seeds = 500;
constexpr int distance_seeds = 1000;
constexpr int point_process_seeds = 1000;
constexpr int ageing_seeds = 500;
constexpr int correspondence_seeds = 100;
constexpr double mass_fraction_min = 0.9;
constexpr double profile_lo = -1.3, profile_hi = -0.7;
constexpr double abs_moment_lo = 0.85, abs_moment_hi = 1.15;
constexpr double ks_laplace = 0.08;
constexpr double mean_count_lo = 0.8, mean_count_hi = 1.2;
constexpr double density_normalization = 1e-3;
constexpr double ecdf_lo = 0.05, ecdf_hi = 0.95;
constexpr double ks_two_sample = 0.15;
constexpr double theta_gap = 0.1;
constexpr double correspondence = 1e-6;
constexpr double slope_lo = 0.5, slope_hi = 1.5;
}  // namespace tol

// Wall-clock budgets in seconds.
const std::map<std::string, double> kBudget = {{"C1", 300}, {"C2", 1},    {"C3", 120}, {"C4", 60},
                                               {"C5", 1},   {"C6", 1800}, {"C7", 1800}, {"C8", 1800},
                                               {"C9", 600}, {"C10", 3600}, {"C11", 900}};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

struct Settings {
  int workers = 1;
  std::filesystem::path out_dir = "acceptance_out";
};

json gate_bounds(std::optional<double> lo, std::optional<double> hi, bool open = false) {
  return {{"lo", lo ? json(*lo) : json(nullptr)}, {"hi", hi ? json(*hi) : json(nullptr)}, {"open", open}};
}

const Gate& gate(const ExperimentResult& r, const std::string& name) {
  for (const auto& g : r.gates)
    if (g.name == name) return g;
  fail(ErrorCode::input, "missing gate " + name);
}

std::string gate_text(const Gate& g) { return g.name + "=" + num(g.value) + (g.passed ? "" : "(fail)"); }

ExperimentResult run_and_write(const json& j, const Settings& s) {
  const ExperimentConfig cfg = config_from_json(j);
  ExperimentResult res = run_experiment(cfg, s.workers);
  write_experiment_outputs(cfg, res);
  return res;
}

// ---------------------------------------------------------------- C1

Outcome c1_solvers(const Settings& s) {
  struct Row {
    double sup_rel = 0.0;
    double sigma = 0.0;
  };
  std::vector<Row> rows(tol::solver_seeds);
  const TorusGeometry g(1, tol::solver_side);
  parallel_for(rows.size(), s.workers, [&](std::size_t i) {
    const auto seed = derive_seed(0xacce55ULL, i);
    const PotentialField f = sample_field(g, 2.0, seed);
    const auto sp = solve_spectral(f, tol::solver_t, f.size());
    const auto od = solve_ode(f, tol::solver_t, 1e-10);
    const auto fk = feynman_kac_mc(f, tol::solver_t, tol::fk_walkers, derive_seed(seed, 1));
    const double ks = std::exp(sp.log_scale), ko = std::exp(od.log_scale), kf = std::exp(fk.log_scale);
    double top = 0.0, dev = 0.0;
    for (std::size_t z = 0; z < f.size(); ++z) {
      top = std::max(top, sp.u[z] * ks);
      dev = std::max(dev, std::abs(sp.u[z] * ks - od.u[z] * ko));
    }
    rows[i].sup_rel = dev / top;
    rows[i].sigma = std::abs(fk.total_mass * kf - sp.total_mass * ks) / (fk.mass_stderr * kf);
  });
  double worst = 0.0;
  int agreeing = 0;
  for (const auto& r : rows) {
    worst = std::max(worst, r.sup_rel);
    if (r.sigma <= tol::fk_sigma) ++agreeing;
  }
  return {worst <= tol::solver_sup_relative && agreeing >= tol::fk_min_agreeing,
          "spectral/ode sup-relative " + num(worst) + " (<= " + num(tol::solver_sup_relative) + "); fk within " +
              num(tol::fk_sigma) + " sigma on " + std::to_string(agreeing) + "/" + std::to_string(rows.size()) +
              " (>= " + std::to_string(tol::fk_min_agreeing) + ")"};
}

// ---------------------------------------------------------------- C2

Outcome c2_closed_form(const Settings&) {
  const TorusGeometry g(1, 5);
  std::vector<double> v(g.size(), 0.0);
  const SiteIndex z = g.origin();
  v[z] = 10.0;
  const PotentialField f(g, v, 2.0, 0);
  const double exact = 5.0 + 3.0 * std::sqrt(3.0);
  const double eig = local_principal_eigenvalue(f, z, 1, 5.0);
  const double fp = lambda_fixed_point(f, z, 1, 5.0).lambda;
  const double err = std::max(std::abs(eig - exact), std::abs(fp - exact));
  return {err <= tol::closed_form, "eigensolver " + num(eig - exact) + ", path expansion " + num(fp - exact) +
                                       " off 5+3sqrt3 (<= " + num(tol::closed_form) + ")"};
}

// ---------------------------------------------------------------- C3

Outcome c3_sandwich(const Settings& s) {
  std::vector<int> violation(tol::sandwich_instances, 0);
  parallel_for(violation.size(), s.workers, [&](std::size_t i) {
    SplitMix64 rng(derive_seed(0x5a4d1c4ULL, i));
    const int d = 1 + static_cast<int>(rng.below(2));
    const int side = d == 1 ? 31 : 11;
    const double gamma = 1.0 + 3.0 * rng.uniform();
    const double t = std::exp(1.0 + 9.0 * rng.uniform());
    const int n = static_cast<int>(rng.below(3));
    const PotentialField f = sample_field(TorusGeometry(d, side), gamma, rng());
    ScaleOverrides o;
    o.side = side;
    const double L = compute_scales(t, d, gamma, 0.25, o).L_t;
    const SiteIndex z = rng.below(f.size());
    const double lam = local_principal_eigenvalue(f, z, n, L);
    const double slack = tol::sandwich_roundoff * std::max(1.0, std::abs(lam));
    violation[i] = (lam < f[z] - slack || lam > std::max(L, f[z]) + 2 * d + slack) ? 1 : 0;
  });
  const int bad = std::accumulate(violation.begin(), violation.end(), 0);
  return {bad == 0, std::to_string(bad) + " violations on " + std::to_string(violation.size()) + " instances"};
}

// ---------------------------------------------------------------- C4

Outcome c4_resolvent(const Settings& s) {
  std::vector<double> err(tol::resolvent_instances, 0.0);
  parallel_for(err.size(), s.workers, [&](std::size_t i) {
    SplitMix64 rng(derive_seed(0x2e501ULL, i));
    const int d = 1 + static_cast<int>(rng.below(2));
    const TorusGeometry g(d, d == 1 ? 41 : 9);
    const PotentialField f = sample_field(g, 2.0, rng());
    // Level at the 0.9 quantile so the punctured set is nonempty.
    std::vector<double> sorted(f.values().begin(), f.values().end());
    std::sort(sorted.begin(), sorted.end());
    const double level = sorted[sorted.size() * 9 / 10];
    const LevelSet pi = level_set(f, level);
    const SiteIndex u = pi.sites[rng.below(pi.sites.size())];
    const Operator base = build_hamiltonian(f, Punctured{level});
    const Operator with_u = build_hamiltonian(f, SinglePeak{level, u});
    const double lambda = std::max(base.max_diagonal(), with_u.max_diagonal()) + 2 * d + 0.5 + rng.uniform();
    const auto G = greens_function(base, lambda, u);
    const auto Gu = greens_function(with_u, lambda, u);
    const double denom = 1.0 - f[u] * G[u];
    double worst = 0.0;
    for (SiteIndex x = 0; x < f.size(); ++x) {
      const double rhs = G[x] / denom;
      worst = std::max(worst, std::abs(Gu[x] - rhs) / std::abs(Gu[x]));
    }
    err[i] = worst;
  });
  const double worst = *std::max_element(err.begin(), err.end());
  return {worst <= tol::resolvent_relative,
          "max relative error " + num(worst) + " on " + std::to_string(err.size()) + " instances (<= " +
              num(tol::resolvent_relative) + ")"};
}

// ---------------------------------------------------------------- C5

Outcome c5_extremal(const Settings&) {
  bool ok = true;
  double worst_factor = 0.0, worst_x0 = 0.0;
  for (double t : {1e3, 1e5, 1e8}) {
    const auto x0 = extremal_tail_n0(t, 1, 2.0, 0.0);
    worst_x0 = std::max(worst_x0, std::abs(x0.value - 1.0));
    if (x0.value != 1.0) ok = false;
    const auto x1 = extremal_tail_n0(t, 1, 2.0, 1.0);
    const double dt = compute_scales(t, 1, 2.0, 0.25).d_t;
    const double dev = std::abs(x1.finite_t_factor - std::exp(-dt * dt));
    worst_factor = std::max(worst_factor, dev);
    if (dev > tol::finite_t_factor) ok = false;
  }
  return {ok, "x=0 deviation " + num(worst_x0) + " (exact); x=1 factor vs exp(-d_t^2) " + num(worst_factor) +
                  " (<= " + num(tol::finite_t_factor) + ")"};
}

// ---------------------------------------------------------------- C6, C7

json localisation_config(const Settings& s) {
  return {{"schema", 1},
          {"experiment", "localisation"},
          {"gamma", 2},
          {"d", 1},
          {"t_grid", {1e3, 1e5, 1e8}},
          {"side", 201},
          {"realizations", tol::localisation_seeds},
          {"base_seed", 20240601},
          {"params", {{"c", 1}}},
          {"gates",
           {{"mass_trend", gate_bounds(0.0, std::nullopt)},
            {"mass_fraction_099", gate_bounds(tol::mass_fraction_min, std::nullopt)},
            {"profile_ratio", gate_bounds(tol::profile_lo, tol::profile_hi)}}},
          {"output_dir", (s.out_dir / "localisation").string()}};
}

// ---------------------------------------------------------------- C8

json distance_config(const Settings& s) {
  return {{"schema", 1},
          {"experiment", "distance_law"},
          {"gamma", 2},
          {"d", 1},
          {"t_grid", {1e8}},
          {"side", 201},
          {"realizations", tol::distance_seeds},
          {"base_seed", 20240601},
          {"gates",
           {{"abs_moment_1", gate_bounds(tol::abs_moment_lo, tol::abs_moment_hi)},
            {"ks_laplace_1", gate_bounds(std::nullopt, tol::ks_laplace)}}},
          {"output_dir", (s.out_dir / "distance_law").string()}};
}

// Same law where r_t fits in the box; informational, not a criterion.
json distance_diagnostic_config(const Settings& s) {
  json j = distance_config(s);
  j["t_grid"] = {100};
  j["side"] = 2001;
  j["output_dir"] = (s.out_dir / "distance_law_t100").string();
  return j;
}

// ---------------------------------------------------------------- C9

json point_process_config(const Settings& s) {
  return {{"schema", 1},
          {"experiment", "point_process"},
          {"gamma", 2},
          {"d", 1},
          {"t_grid", {100}},
          {"side", 2001},
          {"realizations", tol::point_process_seeds},
          {"base_seed", 20240606},
          {"params", {{"n", 0}, {"tau", 0}, {"alpha", 1}}},
          {"gates",
           {{"mean_count", gate_bounds(tol::mean_count_lo, tol::mean_count_hi)},
            {"density_normalization", gate_bounds(std::nullopt, tol::density_normalization)}}},
          {"output_dir", (s.out_dir / "point_process").string()}};
}

// ---------------------------------------------------------------- C10

json ageing_config(const Settings& s) {
  return {{"schema", 1},
          {"experiment", "ageing"},
          {"gamma", 2},
          {"d", 1},
          {"t_grid", {100}},
          {"side", 1801},
          {"realizations", tol::ageing_seeds},
          {"base_seed", 20240604},
          {"params", {{"eps", 0.1}, {"horizon_factor", 8}, {"omega", {0.25, 1, 4}}}},
          {"gates",
           {{"positivity", gate_bounds(0.0, std::nullopt, true)},
            {"ecdf_at_1", gate_bounds(tol::ecdf_lo, tol::ecdf_hi, true)},
            {"ks_two_sample", gate_bounds(std::nullopt, tol::ks_two_sample)},
            {"theta_tail_at_1", gate_bounds(std::nullopt, tol::theta_gap)}}},
          {"output_dir", (s.out_dir / "ageing").string()}};
}

// ---------------------------------------------------------------- C11

json correspondence_config(const Settings& s) {
  return {{"schema", 1},
          {"experiment", "eigen_correspondence"},
          {"gamma", 2},
          {"d", 1},
          {"t_grid", {1e3}},
          {"side", 201},
          {"realizations", tol::correspondence_seeds},
          {"base_seed", 20240607},
          {"gates",
           {{"correspondence", gate_bounds(std::nullopt, tol::correspondence)},
            {"decay_slope", gate_bounds(tol::slope_lo, tol::slope_hi)}}},
          {"output_dir", (s.out_dir / "eigen_correspondence").string()}};
}

Outcome from_gates(const ExperimentResult& r, const std::vector<std::string>& names) {
  Outcome o{true, ""};
  for (const auto& n : names) {
    const Gate& g = gate(r, n);
    o.pass = o.pass && g.passed;
    o.detail += (o.detail.empty() ? "" : ", ") + gate_text(g);
  }
  return o;
}

// ---------------------------------------------------------------- C12

// Every registered experiment on a reduced config, at one and three workers.
Outcome c12_reproducibility(const Settings& s) {
  const std::vector<json> configs = {
      {{"experiment", "localisation"}, {"t_grid", {1e3, 1e5}}, {"side", 101}, {"realizations", 6}},
      {{"experiment", "distance_law"}, {"t_grid", {1e3}}, {"side", 101}, {"realizations", 6}},
      {{"experiment", "field_profile"}, {"t_grid", {1e3}}, {"side", 101}, {"realizations", 6}, {"params", {{"n", 1}}}},
      {{"experiment", "ageing"}, {"t_grid", {20}}, {"side", 301}, {"realizations", 6}},
      {{"experiment", "extremal_tail"}, {"t_grid", {1e3}}, {"realizations", 1}, {"params", {{"n", 0}}}},
      {{"experiment", "point_process"}, {"t_grid", {100}}, {"side", 401}, {"realizations", 6}, {"params", {{"n", 0}}}},
      {{"experiment", "eigen_correspondence"}, {"t_grid", {1e3}}, {"side", 101}, {"realizations", 6}},
  };
  int identical = 0;
  std::string mismatched;
  for (json j : configs) {
    j["schema"] = 1;
    j["gamma"] = 2;
    j["d"] = 1;
    j["base_seed"] = 777;
    j["output_dir"] = (s.out_dir / "reproducibility").string();
    const ExperimentConfig cfg = config_from_json(j);
    const std::string one = experiment_csv(cfg, run_experiment(cfg, 1));
    const std::string three = experiment_csv(cfg, run_experiment(cfg, 3));
    if (one == three)
      ++identical;
    else
      mismatched += " " + cfg.experiment;
  }
  return {identical == static_cast<int>(configs.size()),
          std::to_string(identical) + "/" + std::to_string(configs.size()) +
              " experiments bitwise-identical at 1 and 3 workers" + (mismatched.empty() ? "" : ";" + mismatched)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Settings s;
  bool strict = false;
  std::string only;
  std::string out_dir = s.out_dir.string();
  app.add_option("--workers", s.workers)->check(CLI::PositiveNumber);
  app.add_option("--output-dir", out_dir);
  app.add_option("--only", only, "Comma-separated criterion ids");
  app.add_flag("--strict", strict, "Exit nonzero when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  s.out_dir = out_dir;

  std::set<std::string> selected;
  for (std::size_t p = 0; !only.empty() && p != std::string::npos;) {
    const auto q = only.find(',', p);
    selected.insert(only.substr(p, q == std::string::npos ? q : q - p));
    p = q == std::string::npos ? q : q + 1;
  }
  auto wanted = [&](const std::string& id) { return selected.empty() || selected.count(id) > 0; };

  std::filesystem::create_directories(s.out_dir);
  std::ofstream log(s.out_dir / "acceptance_report.txt");
  auto emit = [&log](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    log << line << std::flush;
  };

  int failures = 0;
  auto report = [&](const std::string& id, const std::string& title, const Outcome& o, double seconds) {
    const auto b = kBudget.find(id);
    const bool in_time = b == kBudget.end() || seconds <= b->second;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    char head[16], time[32];
    std::snprintf(head, sizeof head, "%-3s %s ", id.c_str(), pass ? "PASS" : "FAIL");
    std::snprintf(time, sizeof time, "%.1f s", seconds);
    const std::string budget =
        b == kBudget.end() ? "" : (in_time ? " <= " : " > ") + num(b->second);
    emit(head + title + ": " + o.detail + " [" + time + budget + "]\n");
  };
  auto timed = [&](const std::function<Outcome()>& fn, double& seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = fn();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
  };
  auto single = [&](const std::string& id, const std::string& title, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    double sec = 0.0;
    const Outcome o = timed(fn, sec);
    report(id, title, o, sec);
  };

  try {
    single("C1", "solver oracle equivalence", [&] { return c1_solvers(s); });
    single("C2", "closed-form local eigenvalue", [&] { return c2_closed_form(s); });
    single("C3", "eigenvalue sandwich", [&] { return c3_sandwich(s); });
    single("C4", "resolvent identity", [&] { return c4_resolvent(s); });
    single("C5", "extremal tail n=0", [&] { return c5_extremal(s); });
    if (wanted("C6") || wanted("C7")) {
      double sec = 0.0;
      ExperimentResult r;
      timed([&] { r = run_and_write(localisation_config(s), s); return Outcome{}; }, sec);
      if (wanted("C6")) report("C6", "localisation trend", from_gates(r, {"mass_trend", "mass_fraction_099"}), sec);
      if (wanted("C7")) report("C7", "profile ratio", from_gates(r, {"profile_ratio"}), sec);
    }
    single("C8", "distance law", [&] { return from_gates(run_and_write(distance_config(s), s), {"abs_moment_1", "ks_laplace_1"}); });
    if (wanted("C8")) {
      const Outcome o = from_gates(run_and_write(distance_diagnostic_config(s), s), {"abs_moment_1", "ks_laplace_1"});
      emit("    info distance law at t=100, side 2001 (not gating): " + o.detail + "\n");
    }
    single("C9", "point-process window count",
           [&] { return from_gates(run_and_write(point_process_config(s), s), {"mean_count", "density_normalization"}); });
    single("C10", "ageing", [&] {
      return from_gates(run_and_write(ageing_config(s), s),
                        {"positivity", "ecdf_at_1", "ks_two_sample", "theta_tail_at_1"});
    });
    single("C11", "eigen correspondence",
           [&] { return from_gates(run_and_write(correspondence_config(s), s), {"correspondence", "decay_slope"}); });
    single("C12", "reproducibility", [&] { return c12_reproducibility(s); });
  } catch (const std::exception& e) {
    emit(std::string("ERROR evaluation aborted: ") + e.what() + "\n");
    return 2;
  }
  emit(std::to_string(failures) + " criteria failed\n");
  return strict && failures > 0 ? 1 : 0;
}
