#include "pamlab/localisation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pamlab/error.hpp"
#include "pamlab/solver.hpp"

namespace pamlab {

LocalEigenvalues::LocalEigenvalues(const PotentialField& field, int n, double level)
    : field_(field), n_(n), level_(level) {
  require(n >= 0, ErrorCode::parameter, "negative radius");
}

double LocalEigenvalues::value(SiteIndex z) {
  if (n_ == 0) return field_[z];
  if (auto it = cache_.find(z); it != cache_.end()) return it->second;
  const double v = local_principal_eigenvalue(field_, z, n_, level_);
  cache_.emplace(z, v);
  return v;
}

double LocalEigenvalues::upper(SiteIndex z) const {
  if (n_ == 0) return field_[z];
  double top = field_[z];
  for (SiteIndex y : field_.geometry().ball(z, n_))
    if (field_[y] <= level_) top = std::max(top, field_[y]);
  return top + 2.0 * field_.geometry().dim();
}

double psi(const PotentialField& field, SiteIndex z, int n, double c, const ScaleSet& scales) {
  require(z < field.size(), ErrorCode::invalid_site, "site outside torus");
  const double dist = field.geometry().origin_distance(z);
  return local_principal_eigenvalue(field, z, n, scales.L_t) - dist * scales.penalty_rate() + c * dist / scales.t;
}

namespace {

bool better(double pa, SiteIndex a, double pb, SiteIndex b) { return pa > pb || (pa == pb && a < b); }

struct Leader {
  TopTwo tt;
  bool have1 = false, have2 = false;

  void offer(SiteIndex z, double p) {
    if (!have1 || better(p, z, tt.psi1, tt.Z1)) {
      if (have1) {
        tt.Z2 = tt.Z1;
        tt.psi2 = tt.psi1;
        have2 = true;
      }
      tt.Z1 = z;
      tt.psi1 = p;
      have1 = true;
    } else if (!have2 || better(p, z, tt.psi2, tt.Z2)) {
      tt.Z2 = z;
      tt.psi2 = p;
      have2 = true;
    }
  }
};

}  // namespace

TopTwo top_two(LocalEigenvalues& local, double c, const ScaleSet& scales, bool prune,
               const std::vector<SiteIndex>* candidates) {
  const auto& f = local.field();
  const auto& g = f.geometry();
  std::vector<SiteIndex> all;
  if (!candidates) {
    all.resize(g.size());
    std::iota(all.begin(), all.end(), SiteIndex{0});
    candidates = &all;
  }
  require(candidates->size() >= 2, ErrorCode::parameter, "need at least two sites");
  const double rate = scales.penalty_rate();
  auto shift = [&](SiteIndex z) {
    const double dist = g.origin_distance(z);
    return -dist * rate + c * dist / scales.t;
  };
  Leader lead;
  if (!prune || local.radius() == 0) {
    for (SiteIndex z : *candidates) {
      lead.offer(z, local.value(z) + shift(z));
      ++lead.tt.evaluated;
    }
  } else {
    std::vector<std::pair<double, SiteIndex>> order;
    order.reserve(candidates->size());
    for (SiteIndex z : *candidates) order.emplace_back(local.upper(z) + shift(z), z);
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (const auto& [ub, z] : order) {
      if (lead.have2 && ub < lead.tt.psi2) break;
      lead.offer(z, local.value(z) + shift(z));
      ++lead.tt.evaluated;
    }
  }
  lead.tt.gap = lead.tt.psi1 - lead.tt.psi2;
  return lead.tt;
}

TopTwo top_two(const PotentialField& field, int n, double c, const ScaleSet& scales, bool prune) {
  LocalEigenvalues local(field, n, scales.L_t);
  return top_two(local, c, scales, prune);
}

PenalisedSpectrum penalised_spectrum(const SpectralData& sd, double t, SiteIndex origin) {
  require(t > 0.0, ErrorCode::parameter, "t must be positive");
  PenalisedSpectrum ps;
  const double ninf = -std::numeric_limits<double>::infinity();
  std::size_t finite = 0;
  for (std::size_t i = 0; i < sd.eigenvalues.size(); ++i) {
    require(origin < sd.eigenvectors[i].size(), ErrorCode::input, "eigenvector lacks the origin");
    const double a = std::abs(sd.eigenvectors[i][origin]);
    ps.values.push_back(a > 0.0 ? sd.eigenvalues[i] + std::log(a) / t : ninf);
    if (a > 0.0) ++finite;
  }
  require(finite >= 2, ErrorCode::degenerate_spectrum, "fewer than two finite penalised values");
  bool have1 = false;
  for (std::size_t i = 0; i < ps.values.size(); ++i) {
    if (ps.values[i] == ninf) continue;
    if (!have1 || ps.values[i] > ps.values[ps.i1]) {
      ps.i1 = i;
      have1 = true;
    }
  }
  bool have2 = false;
  for (std::size_t i = 0; i < ps.values.size(); ++i) {
    if (i == ps.i1 || ps.values[i] == ninf) continue;
    if (!have2 || ps.values[i] > ps.values[ps.i2]) {
      ps.i2 = i;
      have2 = true;
    }
  }
  return ps;
}

namespace {

std::vector<SiteIndex> centred_window(const TorusGeometry& g, int half) {
  std::vector<SiteIndex> out;
  for (SiteIndex z = 0; z < g.size(); ++z) {
    const Site c = g.site(z);
    if (std::all_of(c.begin(), c.end(), [half](int x) { return std::abs(x) <= half; })) out.push_back(z);
  }
  return out;
}

}  // namespace

AgeingResult ageing_time(const PotentialField& field, int n, double t, double horizon, const ScaleSet& base,
                         double c) {
  require(horizon > 0.0, ErrorCode::parameter, "horizon must be positive");
  const auto& g = field.geometry();
  const bool fixed = base.side_overridden;
  require(!fixed || g.side() == base.side, ErrorCode::input, "field box does not match the overridden side");

  std::unordered_map<double, LocalEigenvalues> by_level;
  auto argmax_at = [&](double s) {
    ScaleSet sc = compute_scales(t + s, base.d, base.gamma, base.theta, base.overrides);
    std::vector<SiteIndex> window;
    const std::vector<SiteIndex>* cand = nullptr;
    if (!fixed) {
      const int half = (sc.side - 1) / 2;
      require(half <= g.half(), ErrorCode::input, "field box smaller than the window at t + horizon");
      window = centred_window(g, half);
      cand = &window;
    }
    auto it = by_level.find(sc.L_t);
    if (it == by_level.end()) it = by_level.emplace(sc.L_t, LocalEigenvalues(field, n, sc.L_t)).first;
    return top_two(it->second, c, sc, true, cand).Z1;
  };

  const SiteIndex z0 = argmax_at(0.0);
  const double step = t / 200.0;
  const double resolution = t / 1e5;
  double lo = 0.0;
  const auto steps = static_cast<long>(std::ceil(horizon / step - 1e-9));
  for (long k = 1; k <= steps; ++k) {
    const double s = std::min(horizon, k * step);
    if (argmax_at(s) != z0) {
      double hi = s;
      while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        if (argmax_at(mid) != z0)
          hi = mid;
        else
          lo = mid;
      }
      return {hi, false};
    }
    lo = s;
  }
  return {horizon, true};
}

namespace {

double sup_distance(const std::vector<double>& p0, const std::vector<double>& v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(p0[i] - v[i] / total));
  return worst;
}

}  // namespace

AgeingResult solution_ageing_time(const PotentialField& field, double eps, double t, double horizon) {
  require(eps > 0.0 && eps < 0.5, ErrorCode::parameter, "eps must lie in (0, 1/2)");
  require(t > 0.0 && horizon > 0.0, ErrorCode::parameter, "t and horizon must be positive");
  const Propagator prop(build_hamiltonian(field, Full{}));
  double scale = 0.0;
  std::vector<double> v = prop.evolve_indicator(field.geometry().origin(), t, scale);
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  std::vector<double> p0(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p0[i] = v[i] / total;

  const double step = t / 200.0;
  const double resolution = t / 1e5;
  const auto steps = static_cast<long>(std::ceil(horizon / step - 1e-9));
  double lo = 0.0;
  for (long k = 1; k <= steps; ++k) {
    const double s = std::min(horizon, k * step);
    std::vector<double> prev = v;
    prop.advance(v, scale, s - lo);
    if (sup_distance(p0, v) > eps) {
      double hi = s;
      while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        std::vector<double> probe = prev;
        double sc = 0.0;
        prop.advance(probe, sc, mid - lo);
        if (sup_distance(p0, probe) > eps) {
          hi = mid;
        } else {
          lo = mid;
          prev.swap(probe);
        }
      }
      return {hi, false};
    }
    lo = s;
  }
  return {horizon, true};
}

bool profile_event(const PotentialField& f, int n, SiteIndex z, const ScaleSet& s) {
  const auto& g = f.geometry();
  const double lo = 1.0 - s.f_t, hi = 1.0 + s.f_t;
  const double centre = f[z] / s.a_t;
  if (!(centre > lo && centre < hi)) return false;
  const int inner = std::min(n, s.rho);
  const double cap = std::pow(s.a_t, s.eta);
  for (SiteIndex y : g.ball(z, s.j)) {
    const int dist = g.distance(y, z);
    if (dist == 0) continue;
    if (dist <= inner) {
      const double r = f[y] / std::pow(s.a_t, q_exponent(dist, s.gamma));
      if (!(r > lo && r < hi)) return false;
    } else if (!(f[y] > 0.0 && f[y] < cap)) {
      return false;
    }
  }
  return true;
}

EventFlags event_flags(const PotentialField& f, double c, const ScaleSet& s) {
  EventFlags ev;
  LocalEigenvalues lj(f, s.j, s.L_t);
  const TopTwo t0 = top_two(lj, 0.0, s);
  const TopTwo tc = top_two(lj, c, s);
  const TopTwo tr = s.rho == s.j ? t0 : top_two(f, s.rho, 0.0, s);
  ev.S_j = profile_event(f, s.j, t0.Z1, s);
  ev.S_rho = profile_event(f, s.rho, tr.Z1, s);
  const double threshold = s.d_t * s.e_t;
  ev.G_0 = t0.gap > threshold;
  ev.G_c = tc.gap > threshold;
  const double dist = f.geometry().origin_distance(t0.Z1);
  ev.H = s.r_t * s.f_t < dist && dist < s.r_t * s.g_t;
  ev.I = t0.psi1 > s.a_t * (1.0 - s.f_t);
  return ev;
}

}  // namespace pamlab
