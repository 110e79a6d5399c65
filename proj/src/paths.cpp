#include "pamlab/paths.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>

#include "pamlab/error.hpp"
#include "pamlab/operators.hpp"

namespace pamlab {

namespace {

using Offsets = std::vector<std::vector<Site>>;

void walk(const TorusGeometry& g, SiteIndex z, const std::vector<SiteIndex>& inside, int k,
          std::vector<SiteIndex>& path, std::vector<std::vector<SiteIndex>>& out) {
  const SiteIndex cur = path.back();
  const int steps = static_cast<int>(path.size()) - 1;
  const int left = k - steps;
  for (SiteIndex y : g.neighbors(cur)) {
    if (!std::binary_search(inside.begin(), inside.end(), y)) continue;
    if (left == 1) {
      if (y == z) {
        path.push_back(y);
        out.push_back(path);
        path.pop_back();
      }
      continue;
    }
    if (y == z || g.distance(y, z) > left - 1) continue;
    path.push_back(y);
    walk(g, z, inside, k, path, out);
    path.pop_back();
  }
}

std::vector<std::vector<SiteIndex>> enumerate_on_torus(SiteIndex z, int n, int k, const TorusGeometry& g) {
  std::vector<std::vector<SiteIndex>> out;
  if (n == 0 || k < 2) return out;
  const auto inside = g.ball(z, n);
  std::vector<SiteIndex> path{z};
  walk(g, z, inside, k, path, out);
  return out;
}

std::shared_mutex memo_mutex;
std::map<std::tuple<int, int, int>, Offsets> memo;

const Offsets& offset_family(int d, int n, int k) {
  const auto key = std::make_tuple(d, n, k);
  {
    std::shared_lock lock(memo_mutex);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  // Reference torus large enough that the ball carries no wraparound edges.
  const TorusGeometry ref(d, 2 * n + 3);
  Offsets fam;
  const Site centre = ref.site(ref.origin());
  for (const auto& p : enumerate_on_torus(ref.origin(), n, k, ref)) {
    std::vector<Site> rel;
    for (SiteIndex s : p) {
      Site c = ref.site(s);
      for (std::size_t a = 0; a < c.size(); ++a) c[a] -= centre[a];
      rel.push_back(std::move(c));
    }
    fam.push_back(std::move(rel));
  }
  std::unique_lock lock(memo_mutex);
  return memo.emplace(key, std::move(fam)).first->second;
}

}  // namespace

PathFamily enumerate_paths(SiteIndex z, int n, int k, const TorusGeometry& g) {
  require(k >= 2, ErrorCode::parameter, "path length must be at least 2");
  require(n >= 0, ErrorCode::parameter, "negative radius");
  require(z < g.size(), ErrorCode::invalid_site, "site outside torus");
  PathFamily fam{z, n, k, {}};
  if (g.side() >= 2 * n + 3) {
    for (const auto& rel : offset_family(g.dim(), n, k)) {
      std::vector<SiteIndex> p;
      p.reserve(rel.size());
      for (const auto& off : rel) p.push_back(g.translate(z, off));
      fam.paths.push_back(std::move(p));
    }
  } else {
    fam.paths = enumerate_on_torus(z, n, k, g);
  }
  return fam;
}

namespace {

struct PuncturedBall {
  std::vector<SiteIndex> sites;  // B(z,n) without z, ascending
  std::vector<double> values;    // punctured potential
  std::vector<std::vector<std::size_t>> adj;
  std::vector<std::size_t> entry;  // neighbours of z inside the ball
};

PuncturedBall punctured_ball(const PotentialField& f, SiteIndex z, int n, double level) {
  const auto& g = f.geometry();
  PuncturedBall b;
  for (SiteIndex s : g.ball(z, n))
    if (s != z) b.sites.push_back(s);
  b.values.resize(b.sites.size());
  b.adj.resize(b.sites.size());
  for (std::size_t i = 0; i < b.sites.size(); ++i) {
    const double v = f[b.sites[i]];
    b.values[i] = v > level ? 0.0 : v;
    for (SiteIndex y : g.neighbors(b.sites[i])) {
      auto it = std::lower_bound(b.sites.begin(), b.sites.end(), y);
      if (it != b.sites.end() && *it == y) b.adj[i].push_back(static_cast<std::size_t>(it - b.sites.begin()));
    }
  }
  for (SiteIndex y : g.neighbors(z)) {
    auto it = std::lower_bound(b.sites.begin(), b.sites.end(), y);
    if (it != b.sites.end() && *it == y) b.entry.push_back(static_cast<std::size_t>(it - b.sites.begin()));
  }
  return b;
}

double truncated_sum(const PuncturedBall& b, double lambda, int max_length) {
  const std::size_t m = b.sites.size();
  std::vector<double> inv(m), a(m, 0.0), next(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double d = lambda - b.values[i];
    require(d > 0.0, ErrorCode::regime, "path expansion outside its contraction regime");
    inv[i] = 1.0 / d;
  }
  for (std::size_t e : b.entry) a[e] += inv[e];
  double total = 0.0;
  for (int len = 2; len <= max_length; ++len) {
    for (std::size_t e : b.entry) total += a[e];
    if (len == max_length) break;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t c : b.adj[i]) acc += a[c];
      next[i] = acc * inv[i];
    }
    a.swap(next);
  }
  return total;
}

double resolvent_sum(const PuncturedBall& b, double lambda) {
  const auto m = static_cast<Eigen::Index>(b.sites.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = lambda - b.values[static_cast<std::size_t>(i)];
    require(d > 0.0, ErrorCode::regime, "path expansion outside its contraction regime");
    a(i, i) = d;
    for (std::size_t c : b.adj[static_cast<std::size_t>(i)]) a(i, static_cast<Eigen::Index>(c)) -= 1.0;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  require(llt.info() == Eigen::Success, ErrorCode::regime, "path expansion outside its contraction regime");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (std::size_t e : b.entry) rhs(static_cast<Eigen::Index>(e)) += 1.0;
  const Eigen::VectorXd sol = llt.solve(rhs);
  require(sol.minCoeff() >= 0.0, ErrorCode::regime, "path expansion outside its contraction regime");
  return rhs.dot(sol);
}

}  // namespace

double path_sum(const PotentialField& f, SiteIndex z, int n, double level, double lambda,
                std::optional<int> max_length) {
  if (n == 0) return 0.0;
  const PuncturedBall b = punctured_ball(f, z, n, level);
  return max_length ? truncated_sum(b, lambda, *max_length) : resolvent_sum(b, lambda);
}

FixedPointResult lambda_fixed_point(const PotentialField& f, SiteIndex z, int n, double level,
                                    const FixedPointOptions& opts) {
  require(z < f.size(), ErrorCode::invalid_site, "site outside torus");
  require(n >= 0, ErrorCode::parameter, "negative radius");
  FixedPointResult res;
  const double peak = f[z];
  res.lambda = peak;
  if (n == 0 || (opts.max_length && *opts.max_length < 2)) return res;

  const PuncturedBall b = punctured_ball(f, z, n, level);
  const double ceiling = peak + 2.0 * f.geometry().dim();
  auto map = [&](double lam) {
    return peak + (opts.max_length ? truncated_sum(b, lam, *opts.max_length) : resolvent_sum(b, lam));
  };
  double lam = peak;
  double prev_step = 0.0;
  int growth = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double target = map(lam);
    double next = res.damped ? lam + 0.5 * (target - lam) : target;
    const double step = next - lam;
    if (!res.damped && it > 1 && step * prev_step < 0.0 && std::abs(step) >= std::abs(prev_step)) {
      res.damped = true;
      next = lam + 0.5 * (target - lam);
    }
    if (res.damped && it > 1 && std::abs(next - lam) >= std::abs(prev_step)) ++growth;
    if (growth > 50) fail(ErrorCode::regime, "fixed-point iteration does not contract");
    if (!(next > peak) || next > ceiling || !std::isfinite(next))
      fail(ErrorCode::regime, "fixed-point iterate left (xi(z), xi(z) + 2d]");
    res.iterations = it;
    if (std::abs(next - lam) <= opts.tol) {
      res.lambda = next;
      return res;
    }
    prev_step = next - lam;
    lam = next;
  }
  fail(ErrorCode::regime, "fixed-point iteration exhausted its budget");
}

double greens_path_partial_sum(const TorusGeometry& g, std::span<const double> zeta, double lambda, SiteIndex x,
                               SiteIndex y, int max_len) {
  require(zeta.size() == g.size(), ErrorCode::input, "potential does not match geometry");
  require(x < g.size() && y < g.size(), ErrorCode::invalid_site, "site outside torus");
  require(max_len >= 0, ErrorCode::parameter, "negative path length");
  const double top = *std::max_element(zeta.begin(), zeta.end());
  require(lambda > top + 2.0 * g.dim(), ErrorCode::regime, "lambda inside the divergence region");
  const std::size_t n = g.size();
  std::vector<double> inv(n), w(n, 0.0), next(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / (lambda - zeta[i]);
  w[x] = inv[x];
  double total = w[y];
  std::vector<SiteIndex> nb;
  for (int len = 1; len <= max_len; ++len) {
    for (std::size_t i = 0; i < n; ++i) {
      g.neighbors(i, nb);
      double acc = 0.0;
      for (SiteIndex c : nb) acc += w[c];
      next[i] = acc * inv[i];
    }
    w.swap(next);
    total += w[y];
  }
  return total;
}

}  // namespace pamlab
