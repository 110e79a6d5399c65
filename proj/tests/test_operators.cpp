#include "doctest.h"
#include "pamlab/error.hpp"
#include "pamlab/operators.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/scales.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

using namespace pamlab;

namespace {

PotentialField spike(const TorusGeometry& g, SiteIndex z, double value) {
  std::vector<double> v(g.size(), 0.0);
  v[z] = value;
  return PotentialField(g, v, 2.0, 0);
}

}  // namespace

TEST_CASE("operator applies adjacency plus diagonal") {
  const PotentialField f = sample_field(TorusGeometry(2, 5), 2.0, 3);
  const Operator op = build_hamiltonian(f, Full{});
  const Eigen::MatrixXd m = op.dense();
  CHECK(m.isApprox(m.transpose()));
  std::vector<double> x(op.dim()), y(op.dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(1.0 + i);
  op.apply(x.data(), y.data());
  const Eigen::VectorXd ref = m * Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref(i)).epsilon(1e-14));
  for (std::size_t i = 0; i < op.dim(); ++i) CHECK(m.row(i).sum() - m(i, i) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("zero potential: principal eigenvalue 2d with a flat vector") {
  for (int d : {1, 2}) {
    const TorusGeometry g(d, 7);
    const Operator op = build_hamiltonian(constant_field(g, 0.0), Full{});
    const EigenPair p = principal_eigenpair(op);
    CHECK(p.value == doctest::Approx(2.0 * d).epsilon(1e-12));
    for (double v : p.vector) CHECK(std::abs(v) == doctest::Approx(1.0 / std::sqrt(g.size())).epsilon(1e-8));
  }
}

TEST_CASE("iterative top-k matches the dense solver") {
  const PotentialField f = sample_field(TorusGeometry(2, 25), 2.0, 41);
  const Operator op = build_hamiltonian(f, Full{});
  EigenOptions iterative;
  iterative.dense_threshold = 10;
  const SpectralData a = top_k_eigenpairs(op, 6, iterative);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
  const auto n = es.eigenvalues().size();
  for (int i = 0; i < 6; ++i) CHECK(a.eigenvalues[i] == doctest::Approx(es.eigenvalues()(n - 1 - i)).epsilon(1e-10));
  CHECK(std::is_sorted(a.eigenvalues.rbegin(), a.eigenvalues.rend()));
  for (double r : a.residuals) CHECK(r <= 1e-8);
}

TEST_CASE("translating the field shifts argmax sites and keeps eigenvalues") {
  const TorusGeometry g(1, 41);
  const PotentialField f = sample_field(g, 2.0, 8);
  const Site shift{7};
  std::vector<double> moved(g.size());
  for (SiteIndex z = 0; z < g.size(); ++z) moved[g.translate(z, shift)] = f[z];
  const PotentialField h(g, moved, 2.0, 0);
  const SpectralData a = top_k_eigenpairs(build_hamiltonian(f, Full{}), 5);
  const SpectralData b = top_k_eigenpairs(build_hamiltonian(h, Full{}), 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(a.eigenvalues[i] - b.eigenvalues[i]) <= 1e-9);
    CHECK(g.translate(a.argmax_sites[i], shift) == b.argmax_sites[i]);
  }
}

TEST_CASE("three-site closed form for the local eigenvalue") {
  const TorusGeometry g(1, 5);
  const SiteIndex z = g.origin();
  const PotentialField f = spike(g, z, 10.0);
  const double lambda = local_principal_eigenvalue(f, z, 1, 5.0);
  CHECK(std::abs(lambda - (5.0 + 3.0 * std::sqrt(3.0))) <= 1e-10);
  CHECK(lambda * lambda - 10.0 * lambda - 2.0 == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("local eigenvalue of radius zero is the potential") {
  const PotentialField f = sample_field(TorusGeometry(2, 9), 2.0, 2);
  for (SiteIndex z = 0; z < f.size(); z += 5) CHECK(local_principal_eigenvalue(f, z, 0, 1.0) == f[z]);
}

TEST_CASE("local eigenvalue is monotone in the radius") {
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    SplitMix64 rng(derive_seed(0x3000, i));
    const int d = 1 + static_cast<int>(rng.below(2));
    const PotentialField f = sample_field(TorusGeometry(d, d == 1 ? 31 : 11), 1.0 + 3.0 * rng.uniform(), rng());
    const double L = 0.5 + 2.0 * rng.uniform();
    const SiteIndex z = rng.below(f.size());
    const int n = static_cast<int>(rng.below(3));
    const double a = local_principal_eigenvalue(f, z, n, L);
    const double b = local_principal_eigenvalue(f, z, n + 1, L);
    if (a > b + 1e-12 * std::max(1.0, std::abs(b))) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("punctured variants treat exceedances as zero") {
  const TorusGeometry g(1, 9);
  const PotentialField f(g, {0.1, 3.0, 0.2, 0.3, 4.0, 0.1, 0.2, 5.0, 0.3}, 2.0, 0);
  const Operator p = build_hamiltonian(f, Punctured{1.0});
  const Operator s = build_hamiltonian(f, SinglePeak{1.0, 4});
  const Operator u = build_hamiltonian(f, SinglePunctured{4});
  CHECK(p.diagonal()[1] == 0.0);
  CHECK(p.diagonal()[4] == 0.0);
  CHECK(s.diagonal()[4] == 4.0);
  CHECK(s.diagonal()[7] == 0.0);
  CHECK(u.diagonal()[4] == 0.0);
  CHECK(u.diagonal()[7] == 5.0);
  const Operator r = build_hamiltonian(f, RestrictedPuncturedPeak{1.0, 4, 2});
  CHECK(r.dim() == 5);
  CHECK_FALSE(r.full_domain());
  CHECK_FALSE(r.local(0).has_value());
}

TEST_CASE("Green's function solves the resolvent equation and is positive above the spectrum") {
  const PotentialField f = sample_field(TorusGeometry(2, 9), 2.0, 15);
  const Operator op = build_hamiltonian(f, Punctured{1.5});
  const double lambda = op.max_diagonal() + 4.5;
  const SiteIndex y = 17;
  const auto G = greens_function(op, lambda, y);
  std::vector<double> HG(G.size());
  op.apply(G.data(), HG.data());
  for (SiteIndex x = 0; x < G.size(); ++x) {
    CHECK(lambda * G[x] - HG[x] == doctest::Approx(x == y ? 1.0 : 0.0).epsilon(1e-12));
    CHECK(G[x] > 0.0);
  }
}

TEST_CASE("resolvent identity restores one punctured site") {
  for (int i = 0; i < 20; ++i) {
    const PotentialField f = sample_field(TorusGeometry(1, 41), 2.0, derive_seed(0x4e5, i));
    const double level = 1.3;
    const LevelSet pi = level_set(f, level);
    if (pi.sites.empty()) continue;
    const SiteIndex u = pi.sites.front();
    const Operator base = build_hamiltonian(f, Punctured{level});
    const Operator with_u = build_hamiltonian(f, SinglePeak{level, u});
    const double lambda = with_u.max_diagonal() + 3.0;
    const auto G = greens_function(base, lambda, u);
    const auto Gu = greens_function(with_u, lambda, u);
    for (SiteIndex x = 0; x < f.size(); ++x)
      CHECK(std::abs(Gu[x] - G[x] / (1.0 - f[u] * G[u])) <= 1e-8 * Gu[x]);
  }
}

TEST_CASE("shortest path bounds the Green's function from below") {
  for (int i = 0; i < 50; ++i) {
    const TorusGeometry g(2, 7);
    const PotentialField f = sample_field(g, 2.0, derive_seed(0x5b, i));
    const Operator op = build_hamiltonian(f, Punctured{1.2});
    const double lambda = op.max_diagonal() + 4.0 + 0.5;
    const SiteIndex z = static_cast<SiteIndex>(i) % g.size();
    const auto G = greens_function(op, lambda, z);
    for (SiteIndex x = 0; x < g.size(); ++x) CHECK(G[x] >= std::pow(lambda, -(g.distance(x, z) + 1)));
  }
}

TEST_CASE("a source outside the operator domain is an invalid site") {
  const PotentialField f = sample_field(TorusGeometry(1, 9), 2.0, 1);
  const Operator r = build_hamiltonian(f, RestrictedPuncturedPeak{10.0, 4, 1});
  try {
    greens_function(r, 20.0, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_site);
  }
}
