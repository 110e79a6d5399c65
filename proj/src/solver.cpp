#include "pamlab/solver.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "json.hpp"
#include "pamlab/error.hpp"
#include "pamlab/io.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

const char* method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::spectral: return "spectral";
    case SolveMethod::ode: return "ode";
    case SolveMethod::feynman_kac: return "fk";
    case SolveMethod::propagator: return "propagator";
  }
  return "unknown";
}

std::optional<SolveMethod> parse_method(const std::string& name) {
  if (name == "spectral") return SolveMethod::spectral;
  if (name == "ode") return SolveMethod::ode;
  if (name == "fk" || name == "feynman_kac") return SolveMethod::feynman_kac;
  if (name == "propagator") return SolveMethod::propagator;
  return std::nullopt;
}

double SolutionSnapshot::log_total_mass() const { return log_scale + std::log(total_mass); }

namespace {

void finish(SolutionSnapshot& s) {
  double top = 0.0;
  for (double v : s.u) top = std::max(top, std::abs(v));
  if (top > 0.0) {
    const double lg = s.log_scale + std::log(top);
    if (s.log_scale != 0.0 && lg < 700.0 && lg > -700.0) {
      const double f = std::exp(s.log_scale);
      for (double& v : s.u) v *= f;
      if (s.mc_stderr)
        for (double& v : *s.mc_stderr) v *= f;
      s.mass_stderr *= f;
      s.log_scale = 0.0;
    }
  }
  s.total_mass = std::accumulate(s.u.begin(), s.u.end(), 0.0);
}

SolutionSnapshot indicator(const PotentialField& f, SolveMethod m) {
  SolutionSnapshot s;
  s.method = m;
  s.u.assign(f.size(), 0.0);
  s.u[f.geometry().origin()] = 1.0;
  s.total_mass = 1.0;
  if (m == SolveMethod::feynman_kac) s.mc_stderr = std::vector<double>(f.size(), 0.0);
  return s;
}

void check_time(double t) { require(std::isfinite(t) && t >= 0.0, ErrorCode::parameter, "time must be finite and >= 0"); }

}  // namespace

SolutionSnapshot solve_spectral(const PotentialField& f, double t, std::size_t k, double tol) {
  check_time(t);
  require(k >= 1, ErrorCode::parameter, "k must be positive");
  if (t == 0.0) return indicator(f, SolveMethod::spectral);
  const Operator op = build_hamiltonian(f, Full{});
  k = std::min(k, op.dim());
  const SpectralData sd = top_k_eigenpairs(op, k, tol);
  const SiteIndex o = f.geometry().origin();
  SolutionSnapshot s;
  s.t = t;
  s.method = SolveMethod::spectral;
  s.u.assign(f.size(), 0.0);
  s.log_scale = t * sd.eigenvalues.front();
  for (std::size_t i = 0; i < k; ++i) {
    const double c = std::exp(t * (sd.eigenvalues[i] - sd.eigenvalues.front())) * sd.eigenvectors[i][o];
    const auto& phi = sd.eigenvectors[i];
    for (std::size_t z = 0; z < f.size(); ++z) s.u[z] += c * phi[z];
  }
  s.remainder_proxy = std::exp(t * (sd.eigenvalues.back() - sd.eigenvalues.front()));
  finish(s);
  return s;
}

namespace {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

// Error measured against the sup norm of the current state.
class SupNormChecker {
 public:
  using value_type = double;
  using algebra_type = odeint::range_algebra;
  using operations_type = odeint::default_operations;

  explicit SupNormChecker(double rel = 1e-6) : rel_(rel) {}

  template <class S, class D, class E, class T>
  value_type error(const S& x_old, const D& dxdt_old, E& x_err, T dt) const {
    algebra_type a;
    return error(a, x_old, dxdt_old, x_err, dt);
  }

  template <class S, class D, class E, class T>
  value_type error(algebra_type&, const S& x_old, const D&, E& x_err, T) const {
    double scale = 0.0, err = 0.0;
    for (double v : x_old) scale = std::max(scale, std::abs(v));
    for (double v : x_err) err = std::max(err, std::abs(v));
    return err / (rel_ * scale);
  }

 private:
  double rel_;
};

using Dopri = odeint::runge_kutta_dopri5<State>;
using Controlled = odeint::controlled_runge_kutta<Dopri, SupNormChecker, odeint::default_step_adjuster<double, double>,
                                                  odeint::initially_resizer, odeint::explicit_error_stepper_fsal_tag>;

}  // namespace

SolutionSnapshot solve_ode(const PotentialField& f, double t, double rel_tol) {
  check_time(t);
  require(rel_tol >= 1e-12, ErrorCode::parameter, "rel_tol must be at least 1e-12");
  require(f.size() <= 10000, ErrorCode::parameter, "ODE oracle limited to 1e4 sites");
  if (t == 0.0) return indicator(f, SolveMethod::ode);
  const Operator op = build_hamiltonian(f, Full{});
  auto rhs = [&op](const State& x, State& dxdt, double) { op.apply(x.data(), dxdt.data()); };

  SolutionSnapshot s;
  s.t = t;
  s.method = SolveMethod::ode;
  State x(f.size(), 0.0);
  x[f.geometry().origin()] = 1.0;
  Controlled stepper{SupNormChecker(rel_tol)};
  double now = 0.0;
  double dt = std::min(t, 0.01);
  const double floor_dt = 1e-13 * std::max(1.0, t);
  while (now < t) {
    if (now + dt > t) dt = t - now;
    const double before = now;
    if (stepper.try_step(rhs, x, now, dt) == odeint::fail) {
      if (dt < floor_dt) fail(ErrorCode::stiffness, "ODE step size underflow; use the spectral method");
      continue;
    }
    if (now == before) fail(ErrorCode::stiffness, "ODE made no progress; use the spectral method");
    const double top = *std::max_element(x.begin(), x.end());
    if (top > 1e100) {
      for (double& v : x) v /= top;
      s.log_scale += std::log(top);
      stepper.reset();
    }
  }
  s.u = std::move(x);
  finish(s);
  return s;
}

SolutionSnapshot feynman_kac_mc(const PotentialField& f, double t, std::size_t walkers, std::uint64_t seed,
                                int workers) {
  check_time(t);
  require(walkers >= 1000, ErrorCode::parameter, "at least 1e3 walkers required");
  SolutionSnapshot s;
  s.t = t;
  s.method = SolveMethod::feynman_kac;
  s.seed = seed;
  const auto& g = f.geometry();
  const double rate = 2.0 * g.dim();
  std::vector<SiteIndex> end(walkers);
  std::vector<double> logw(walkers);

  auto run = [&](std::size_t lo, std::size_t hi) {
    std::vector<SiteIndex> nb;
    for (std::size_t i = lo; i < hi; ++i) {
      SplitMix64 rng(derive_seed(seed, i));
      SiteIndex x = g.origin();
      double left = t, acc = 0.0;
      for (;;) {
        const double hold = rng.exponential(rate);
        if (hold >= left) {
          acc += f[x] * left;
          break;
        }
        acc += f[x] * hold;
        left -= hold;
        g.neighbors(x, nb);
        x = nb[rng.below(nb.size())];
      }
      end[i] = x;
      logw[i] = acc + rate * t;
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min<std::size_t>(workers, walkers / 1000));
  if (nthreads == 1) {
    run(0, walkers);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (walkers + nthreads - 1) / nthreads;
    for (std::size_t w = 0; w < nthreads; ++w)
      pool.emplace_back(run, std::min(walkers, w * chunk), std::min(walkers, (w + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  const double top = *std::max_element(logw.begin(), logw.end());
  // Fixed blocks, then a pairwise tree over blocks: independent of thread count.
  constexpr std::size_t block = 4096;
  const std::size_t nblocks = (walkers + block - 1) / block;
  const std::size_t n = f.size();
  std::vector<std::vector<double>> s1(nblocks, std::vector<double>(n, 0.0)), s2 = s1;
  for (std::size_t b = 0; b < nblocks; ++b)
    for (std::size_t i = b * block; i < std::min(walkers, (b + 1) * block); ++i) {
      const double w = std::exp(logw[i] - top);
      s1[b][end[i]] += w;
      s2[b][end[i]] += w * w;
    }
  for (std::size_t width = 1; width < nblocks; width *= 2)
    for (std::size_t b = 0; b + width < nblocks; b += 2 * width)
      for (std::size_t z = 0; z < n; ++z) {
        s1[b][z] += s1[b + width][z];
        s2[b][z] += s2[b + width][z];
      }

  const double N = static_cast<double>(walkers);
  s.u.assign(n, 0.0);
  s.mc_stderr = std::vector<double>(n, 0.0);
  double tot1 = 0.0;
  for (std::size_t z = 0; z < n; ++z) {
    s.u[z] = s1[0][z] / N;
    const double var = std::max(0.0, (s2[0][z] - s1[0][z] * s1[0][z] / N) / (N - 1.0));
    (*s.mc_stderr)[z] = std::sqrt(var / N);
    tot1 += s1[0][z];
  }
  // The total weight is the sum over walkers of w; its square sum needs per-walker values.
  std::vector<double> tot2(nblocks, 0.0);
  for (std::size_t b = 0; b < nblocks; ++b)
    for (std::size_t i = b * block; i < std::min(walkers, (b + 1) * block); ++i) {
      const double w = std::exp(logw[i] - top);
      tot2[b] += w * w;
    }
  for (std::size_t width = 1; width < nblocks; width *= 2)
    for (std::size_t b = 0; b + width < nblocks; b += 2 * width) tot2[b] += tot2[b + width];
  const double var_tot = std::max(0.0, (tot2[0] - tot1 * tot1 / N) / (N - 1.0));
  s.mass_stderr = std::sqrt(var_tot / N);
  s.log_scale = top;
  finish(s);
  return s;
}

Propagator::Propagator(Operator op) : op_(std::move(op)) {
  const auto d = op_.diagonal();
  const double lo = *std::min_element(d.begin(), d.end());
  const double hi = *std::max_element(d.begin(), d.end());
  radius_ = hi - lo + op_.max_degree();
  if (lo != 0.0) {
    // Shift so that the diagonal is nonnegative; the shift returns through log_scale.
    std::vector<double> shifted(d.begin(), d.end());
    for (double& v : shifted) v -= lo;
    shift_ = lo;
    op_ = op_.with_diagonal(std::move(shifted));
  }
}

void Propagator::taylor_step(std::vector<double>& v, double h) const {
  const std::size_t n = v.size();
  std::vector<double> term = v, next(n);
  double sum_max = *std::max_element(v.begin(), v.end());
  for (int k = 1; k < 400; ++k) {
    op_.apply(term.data(), next.data());
    const double c = h / k;
    double term_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] *= c;
      v[i] += next[i];
      term_max = std::max(term_max, next[i]);
    }
    term.swap(next);
    sum_max = std::max(sum_max, term_max);
    if (k > h * radius_ && term_max <= 1e-18 * sum_max) return;
  }
  fail(ErrorCode::convergence, "Taylor series did not settle");
}

void Propagator::advance(std::vector<double>& v, double& log_scale, double dt) const {
  require(v.size() == op_.dim(), ErrorCode::input, "state does not match operator");
  require(dt >= 0.0, ErrorCode::parameter, "negative time step");
  if (dt == 0.0) return;
  const auto steps = static_cast<long>(std::ceil(dt * radius_ / 8.0));
  const double h = dt / static_cast<double>(std::max(1L, steps));
  for (long s = 0; s < std::max(1L, steps); ++s) {
    taylor_step(v, h);
    const double top = *std::max_element(v.begin(), v.end());
    require(top > 0.0 && std::isfinite(top), ErrorCode::convergence, "propagated state lost positivity");
    for (double& x : v) x /= top;
    log_scale += std::log(top);
  }
  log_scale += shift_ * dt;
}

std::vector<double> Propagator::dense_power(SiteIndex source, double t, double& log_scale) const {
  const auto n = static_cast<Eigen::Index>(op_.dim());
  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(std::max(1.0, t * radius_)))));
  const double h = std::ldexp(t, -squarings);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = m, next(n, n);
  for (int k = 1; k < 400; ++k) {
    for (Eigen::Index c = 0; c < n; ++c) op_.apply(term.col(c).data(), next.col(c).data());
    next *= h / k;
    m += next;
    term.swap(next);
    if (k > h * radius_ && term.maxCoeff() <= 1e-18 * m.maxCoeff()) break;
  }
  double scale = 0.0;
  for (int s = 0; s < squarings; ++s) {
    const double top = m.maxCoeff();
    m /= top;
    scale = 2.0 * (scale + std::log(top));
    if (s + 1 < squarings) {
      m = (m * m).eval();
    } else {
      Eigen::VectorXd col = m * m.col(static_cast<Eigen::Index>(source));
      log_scale = scale + shift_ * t;
      return std::vector<double>(col.data(), col.data() + n);
    }
  }
  log_scale = scale + shift_ * t;
  Eigen::VectorXd col = m.col(static_cast<Eigen::Index>(source));
  return std::vector<double>(col.data(), col.data() + n);
}

std::vector<double> Propagator::evolve_indicator(SiteIndex source, double t, double& log_scale) const {
  require(source < op_.dim(), ErrorCode::invalid_site, "source outside operator domain");
  const double n = static_cast<double>(op_.dim());
  const double nnz = n * (op_.max_degree() + 1);
  const double sparse_cost = std::ceil(t * radius_ / 8.0) * 40.0 * nnz;
  const double dense_cost = n * nnz * 30.0 + n * n * n * std::ceil(std::log2(std::max(2.0, t * radius_)));
  if (dense_cost < sparse_cost) return dense_power(source, t, log_scale);
  std::vector<double> v(op_.dim(), 0.0);
  v[source] = 1.0;
  log_scale = 0.0;
  advance(v, log_scale, t);
  return v;
}

SolutionSnapshot solve_propagator(const PotentialField& f, double t) {
  check_time(t);
  if (t == 0.0) return indicator(f, SolveMethod::propagator);
  const Propagator prop(build_hamiltonian(f, Full{}));
  SolutionSnapshot s;
  s.t = t;
  s.method = SolveMethod::propagator;
  s.u = prop.evolve_indicator(f.geometry().origin(), t, s.log_scale);
  finish(s);
  return s;
}

TruncationReport macrobox_truncation_check(const PotentialField& large, const PotentialField& window, double t) {
  const auto& gl = large.geometry();
  const auto& gw = window.geometry();
  require(gl.dim() == gw.dim() && gw.side() < gl.side(), ErrorCode::input, "window must lie strictly inside");
  std::vector<SiteIndex> embed(gw.size());
  for (SiteIndex i = 0; i < gw.size(); ++i) {
    embed[i] = gl.index(gw.site(i));
    require(large[embed[i]] == window[i], ErrorCode::input, "fields disagree on the window");
  }
  const double top = std::max(*std::max_element(large.values().begin(), large.values().end()), 0.0);
  require(t * (top + 2.0 * gl.dim()) < 650.0, ErrorCode::parameter, "t too large for an unscaled comparison");
  const SolutionSnapshot ul = solve_propagator(large, t);
  const SolutionSnapshot uw = solve_propagator(window, t);
  const double fl = std::exp(ul.log_scale), fw = std::exp(uw.log_scale);
  TruncationReport r;
  r.U_large = ul.total_mass * fl;
  r.U_window = uw.total_mass * fw;
  for (SiteIndex i = 0; i < gw.size(); ++i)
    r.max_abs_deviation = std::max(r.max_abs_deviation, std::abs(ul.u[embed[i]] * fl - uw.u[i] * fw));
  r.mass_deviation = std::abs(r.U_large - r.U_window);
  return r;
}

std::vector<ProfileRecord> profile_extract(const SolutionSnapshot& s, SiteIndex Z, const ScaleSet& scales,
                                           const TorusGeometry& g) {
  require(s.total_mass > 0.0, ErrorCode::input, "snapshot has no mass");
  require(s.u.size() == g.size() && Z < g.size(), ErrorCode::input, "snapshot does not match geometry");
  std::vector<ProfileRecord> out;
  const double rate = scales.loglog_t() / scales.gamma;
  for (SiteIndex z = 0; z < g.size(); ++z) {
    if (!(s.u[z] > 0.0)) continue;
    ProfileRecord r;
    r.site = z;
    r.distance = g.distance(z, Z);
    r.log_mass_ratio = std::log(s.u[z] / s.total_mass);
    if (r.distance > 0) r.normalized_ratio = r.log_mass_ratio / (rate * r.distance);
    out.push_back(r);
  }
  return out;
}

void write_snapshot(const std::filesystem::path& csv_path, const SolutionSnapshot& s, const TorusGeometry& g) {
  require(s.u.size() == g.size(), ErrorCode::input, "snapshot does not match geometry");
  std::string text;
  for (int a = 1; a <= g.dim(); ++a) text += "coord_" + std::to_string(a) + ",";
  text += s.mc_stderr ? "u,stderr\n" : "u\n";
  for (SiteIndex z = 0; z < g.size(); ++z) {
    for (int c : g.site(z)) text += std::to_string(c) + ",";
    text += format_double(s.u[z]);
    if (s.mc_stderr) text += "," + format_double((*s.mc_stderr)[z]);
    text += "\n";
  }
  write_text_file(csv_path, text);
  nlohmann::json side;
  side["t"] = s.t;
  side["method"] = method_name(s.method);
  side["U"] = s.log_scale == 0.0 ? nlohmann::json(s.total_mass) : nlohmann::json(nullptr);
  side["log_U"] = s.log_total_mass();
  side["log_scale"] = s.log_scale;
  side["seed"] = s.seed;
  if (s.method == SolveMethod::feynman_kac) side["U_stderr"] = s.mass_stderr;
  if (s.method == SolveMethod::spectral) side["remainder_proxy"] = s.remainder_proxy;
  auto json_path = csv_path;
  json_path.replace_extension(".json");
  write_text_file(json_path, side.dump(2) + "\n");
}

}  // namespace pamlab
