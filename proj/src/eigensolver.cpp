#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pamlab/error.hpp"
#include "pamlab/operators.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RawPairs {
  std::vector<double> values;  // descending
  MatrixXd vectors;            // columns, domain coordinates
};

RawPairs dense_top(const Operator& op, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(op.dense());
  require(es.info() == Eigen::Success, ErrorCode::convergence, "dense eigensolver failed");
  const Index n = es.eigenvalues().size();
  RawPairs out;
  out.vectors.resize(n, static_cast<Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const Index src = n - 1 - static_cast<Index>(i);
    out.values.push_back(es.eigenvalues()(src));
    out.vectors.col(static_cast<Index>(i)) = es.eigenvectors().col(src);
  }
  return out;
}

VectorXd random_start(Index n, std::uint64_t salt) {
  SplitMix64 rng(derive_seed(0x1a2b3c4d5e6f7081ULL, salt));
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = 0.5 + rng.uniform();
  return v.normalized();
}

// Orthogonalises w against the first `cols` columns of V twice; returns the coefficients.
VectorXd orthogonalise(const MatrixXd& V, Index cols, VectorXd& w) {
  VectorXd h = V.leftCols(cols).transpose() * w;
  w.noalias() -= V.leftCols(cols) * h;
  VectorXd h2 = V.leftCols(cols).transpose() * w;
  w.noalias() -= V.leftCols(cols) * h2;
  return h + h2;
}

// Thick-restart Lanczos with full reorthogonalisation.
RawPairs lanczos_top(const Operator& op, std::size_t k, const EigenOptions& opts) {
  const Index n = static_cast<Index>(op.dim());
  const Index kk = static_cast<Index>(k);
  const Index m = std::min<Index>(n, std::max<Index>(2 * kk + 20, kk + 40));
  MatrixXd V(n, m + 1);
  MatrixXd T = MatrixXd::Zero(m, m);
  V.col(0) = random_start(n, 0);
  Index kept = 0;
  std::uint64_t salt = 1;
  double last_residual = INFINITY;
  VectorXd w(n);

  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    double beta_m = 0.0;
    for (Index j = kept; j < m; ++j) {
      op.apply(V.col(j).data(), w.data());
      VectorXd h = orthogonalise(V, j + 1, w);
      for (Index i = 0; i <= j; ++i) T(i, j) = T(j, i) = h(i);
      double beta = w.norm();
      const double scale = std::max(1.0, T.topLeftCorner(j + 1, j + 1).cwiseAbs().maxCoeff());
      if (beta <= 1e-13 * scale) {
        // Invariant subspace; continue with a fresh direction.
        w = random_start(n, salt++);
        orthogonalise(V, j + 1, w);
        w.normalize();
        beta = 0.0;
      } else {
        w /= beta;
      }
      if (j + 1 < m) {
        V.col(j + 1) = w;
      } else {
        V.col(m) = w;
        beta_m = beta;
      }
    }
    if (m == n) beta_m = 0.0;

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (T + T.transpose()));
    require(es.info() == Eigen::Success, ErrorCode::convergence, "projected eigensolver failed");
    const VectorXd& theta = es.eigenvalues();
    const MatrixXd& S = es.eigenvectors();

    bool done = true;
    last_residual = 0.0;
    for (Index i = 0; i < kk; ++i) {
      const Index c = m - 1 - i;
      const double r = std::abs(beta_m * S(m - 1, c));
      last_residual = std::max(last_residual, r);
      if (r > 0.1 * opts.tol * std::max(1.0, std::abs(theta(c)))) done = false;
    }
    if (done) {
      RawPairs out;
      out.vectors.resize(n, kk);
      for (Index i = 0; i < kk; ++i) {
        const Index c = m - 1 - i;
        out.values.push_back(theta(c));
        out.vectors.col(i) = (V.leftCols(m) * S.col(c)).normalized();
      }
      return out;
    }

    const Index p = std::min<Index>(m - 1, kk + (m - kk) / 2);
    MatrixXd keep = V.leftCols(m) * S.rightCols(p);
    V.leftCols(p) = keep;
    V.col(p) = V.col(m);
    if (beta_m == 0.0) {
      VectorXd fresh = random_start(n, salt++);
      orthogonalise(V, p, fresh);
      V.col(p) = fresh.normalized();
    }
    T.setZero();
    for (Index i = 0; i < p; ++i) T(i, i) = theta(m - p + i);
    kept = p;
  }
  fail(ErrorCode::convergence, "Lanczos did not converge; last residual " + std::to_string(last_residual));
}

std::size_t argmax_abs(const VectorXd& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  return static_cast<std::size_t>(best);
}

double explicit_residual(const Operator& op, double lambda, const double* v) {
  std::vector<double> hv(op.dim());
  op.apply(v, hv.data());
  double s = 0.0;
  for (std::size_t i = 0; i < op.dim(); ++i) s += (hv[i] - lambda * v[i]) * (hv[i] - lambda * v[i]);
  return std::sqrt(s);
}

}  // namespace

SpectralData top_k_eigenpairs(const Operator& op, std::size_t k, const EigenOptions& opts) {
  require(k >= 1 && k <= op.dim(), ErrorCode::parameter, "k must lie in [1, dimension]");
  RawPairs raw = op.dim() < opts.dense_threshold ? dense_top(op, k) : lanczos_top(op, k, opts);
  SpectralData sd;
  const double scale = std::max(1.0, std::abs(raw.values.front()));
  for (std::size_t i = 0; i < k; ++i) {
    VectorXd v = raw.vectors.col(static_cast<Index>(i));
    const std::size_t am = argmax_abs(v);
    if (v(static_cast<Index>(am)) < 0) v = -v;
    const double res = explicit_residual(op, raw.values[i], v.data());
    require(res <= opts.tol * std::max(1.0, std::abs(raw.values[i])), ErrorCode::convergence,
            "eigenpair residual " + std::to_string(res) + " above tolerance");
    sd.eigenvalues.push_back(raw.values[i]);
    sd.eigenvectors.push_back(op.embed(std::span<const double>(v.data(), op.dim())));
    sd.residuals.push_back(res);
    sd.argmax_sites.push_back(op.site(am));
  }
  sd.near_degenerate.assign(k, false);
  for (std::size_t i = 0; i + 1 < k; ++i)
    if (sd.eigenvalues[i] - sd.eigenvalues[i + 1] < 1e-9 * scale) sd.near_degenerate[i] = sd.near_degenerate[i + 1] = true;
  return sd;
}

SpectralData top_k_eigenpairs(const Operator& op, std::size_t k, double tol) {
  EigenOptions o;
  o.tol = tol;
  return top_k_eigenpairs(op, k, o);
}

EigenPair principal_eigenpair(const Operator& op, const EigenOptions& opts) {
  RawPairs raw = op.dim() < opts.dense_threshold ? dense_top(op, 1) : lanczos_top(op, 1, opts);
  VectorXd v = raw.vectors.col(0);
  const std::size_t peak = argmax_abs(v);
  if (v(static_cast<Index>(peak)) < 0) v = -v;
  EigenPair out;
  out.value = raw.values[0];
  out.vector.assign(v.data(), v.data() + v.size());
  if (op.dim() > 1 && op.diagonal()[peak] > 0.0) {
    if (auto refined = refine_principal_vector(op, out.value, peak, out.vector)) {
      const double res = explicit_residual(op, out.value, refined->data());
      if (res <= opts.tol * std::max(1.0, std::abs(out.value))) out.vector = std::move(*refined);
    }
  }
  out.residual = explicit_residual(op, out.value, out.vector.data());
  require(out.residual <= opts.tol * std::max(1.0, std::abs(out.value)), ErrorCode::convergence,
          "principal residual " + std::to_string(out.residual) + " above tolerance");
  return out;
}

EigenPair principal_eigenpair(const Operator& op, double tol) {
  EigenOptions o;
  o.tol = tol;
  return principal_eigenpair(op, o);
}

}  // namespace pamlab
