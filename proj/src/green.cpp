#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <string>

#include "pamlab/error.hpp"
#include "pamlab/operators.hpp"

namespace pamlab {

namespace {

double relative_residual(const Operator& op, double lambda, std::size_t y, const std::vector<double>& g) {
  std::vector<double> hg(op.dim());
  op.apply(g.data(), hg.data());
  double r = 0.0, gn = 0.0;
  for (std::size_t i = 0; i < op.dim(); ++i) {
    const double ri = lambda * g[i] - hg[i] - (i == y ? 1.0 : 0.0);
    r = std::max(r, std::abs(ri));
    gn = std::max(gn, std::abs(g[i]));
  }
  return r / std::max(1.0, (std::abs(lambda) + op.max_degree() + std::abs(op.max_diagonal())) * gn);
}

}  // namespace

std::vector<double> greens_function(const Operator& op, double lambda, SiteIndex ysite) {
  const auto yl = op.local(ysite);
  require(yl.has_value(), ErrorCode::invalid_site, "source site outside operator domain");
  const std::size_t n = op.dim();
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  rhs(static_cast<Eigen::Index>(*yl)) = 1.0;
  Eigen::VectorXd g;
  if (n <= 2000) {
    Eigen::MatrixXd a = -op.dense();
    a.diagonal().array() += lambda;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    require(lu.rcond() > 1e-14, ErrorCode::spectrum_collision, "lambda lies on the spectrum");
    g = lu.solve(rhs);
    g += lu.solve(rhs - a * g);
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < n; ++i) {
      const auto I = static_cast<Eigen::Index>(i);
      trip.emplace_back(I, I, lambda - op.diagonal()[i]);
      for (std::size_t c : op.row(i)) trip.emplace_back(I, static_cast<Eigen::Index>(c), -1.0);
    }
    Eigen::SparseMatrix<double> a(N, N);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    require(lu.info() == Eigen::Success, ErrorCode::spectrum_collision, "lambda lies on the spectrum");
    g = lu.solve(rhs);
    g += lu.solve(rhs - a * g);
  }
  std::vector<double> out(g.data(), g.data() + n);
  for (double v : out) require(std::isfinite(v), ErrorCode::spectrum_collision, "lambda lies on the spectrum");
  const double rel = relative_residual(op, lambda, *yl, out);
  require(rel <= 1e-10, ErrorCode::spectrum_collision,
          "Green's function solve residual " + std::to_string(rel) + "; lambda too close to the spectrum");
  return out;
}

std::vector<double> positive_greens_column(const Operator& op, double lambda, std::size_t y,
                                           std::span<const double> guess, int max_sweeps) {
  const std::size_t n = op.dim();
  require(y < n, ErrorCode::invalid_site, "source outside operator domain");
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = lambda - (i == y ? 0.0 : op.diagonal()[i]);
    require(d > 0.0, ErrorCode::regime, "lambda must exceed every diagonal entry off the source");
    inv[i] = 1.0 / d;
  }
  std::vector<double> g(n, 0.0);
  if (guess.size() == n) {
    double scale = guess[y] > 0.0 ? inv[y] / guess[y] : 0.0;
    for (std::size_t i = 0; i < n; ++i) g[i] = guess[i] > 0.0 ? guess[i] * scale : 0.0;
  }
  auto relax = [&](std::size_t i) {
    double acc = i == y ? 1.0 : 0.0;
    for (std::size_t c : op.row(i)) acc += g[c];
    const double next = acc * inv[i];
    const double change = next > 0.0 ? std::abs(next - g[i]) / next : (g[i] != 0.0 ? 1.0 : 0.0);
    g[i] = next;
    return change;
  };
  int quiet = 0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, relax(i));
    for (std::size_t i = n; i-- > 0;) worst = std::max(worst, relax(i));
    for (double v : g) require(std::isfinite(v), ErrorCode::regime, "positive iteration diverged");
    quiet = worst <= 1e-14 ? quiet + 1 : 0;
    if (quiet >= 2) return g;
  }
  fail(ErrorCode::convergence, "positive Green's iteration did not settle");
}

std::optional<std::vector<double>> refine_principal_vector(const Operator& op, double lambda, std::size_t peak,
                                                           std::span<const double> guess) {
  if (peak >= op.dim() || !(op.diagonal()[peak] > 0.0)) return std::nullopt;
  try {
    std::vector<double> g = positive_greens_column(op, lambda, peak, guess, 20000);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) return std::nullopt;
    for (double& v : g) v /= norm;
    return g;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace pamlab
