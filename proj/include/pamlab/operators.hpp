#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "pamlab/geometry.hpp"
#include "pamlab/potential.hpp"

namespace pamlab {

struct Full {};
struct Punctured {
  double level;
};
struct SinglePeak {
  double level;
  SiteIndex peak;
};
struct SinglePunctured {
  SiteIndex site;
};
struct RestrictedPuncturedPeak {
  double level;
  SiteIndex peak;
  int radius;
};

using HamiltonianVariant = std::variant<Full, Punctured, SinglePeak, SinglePunctured, RestrictedPuncturedPeak>;

struct HamiltonianSpec {
  const PotentialField* field = nullptr;
  HamiltonianVariant variant = Full{};
};

// Symmetric operator on an active domain of torus sites: potential on the
// diagonal, unit couplings between torus neighbours inside the domain.
class Operator {
 public:
  Operator(const TorusGeometry& geometry, std::vector<SiteIndex> domain, std::vector<double> diagonal);

  const TorusGeometry& geometry() const noexcept { return geometry_; }
  std::size_t dim() const noexcept { return domain_.size(); }
  bool full_domain() const noexcept { return full_; }
  std::span<const SiteIndex> domain() const noexcept { return domain_; }
  std::span<const double> diagonal() const noexcept { return diagonal_; }
  std::span<const std::size_t> row(std::size_t i) const noexcept {
    return {cols_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  std::optional<std::size_t> local(SiteIndex z) const;
  SiteIndex site(std::size_t i) const noexcept { return domain_[i]; }

  void apply(const double* x, double* y) const;
  Eigen::MatrixXd dense() const;
  double max_diagonal() const;
  int max_degree() const;

  // Extends a domain vector by zero to the whole torus.
  std::vector<double> embed(std::span<const double> local_values) const;

  Operator with_diagonal(std::vector<double> diagonal) const;

 private:
  TorusGeometry geometry_;
  std::vector<SiteIndex> domain_;
  std::vector<double> diagonal_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> cols_;
  bool full_ = false;
};

Operator build_hamiltonian(const HamiltonianSpec& spec);
Operator build_hamiltonian(const PotentialField& field, const HamiltonianVariant& variant);

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;  // on the operator domain
  double residual = 0.0;
};

struct SpectralData {
  std::vector<double> eigenvalues;                // descending
  std::vector<std::vector<double>> eigenvectors;  // over the torus, zero off-domain
  std::vector<double> residuals;
  std::vector<SiteIndex> argmax_sites;
  std::vector<bool> near_degenerate;  // closer than 1e-9 max(1,|lambda_1|) to a neighbour value
};

struct EigenOptions {
  double tol = 1e-10;
  std::size_t dense_threshold = 400;
  int max_restarts = 500;
};

SpectralData top_k_eigenpairs(const Operator& op, std::size_t k, const EigenOptions& opts = {});
SpectralData top_k_eigenpairs(const Operator& op, std::size_t k, double tol);

// Perron pair; the vector is refined componentwise when a positive peak exists.
EigenPair principal_eigenpair(const Operator& op, const EigenOptions& opts = {});
EigenPair principal_eigenpair(const Operator& op, double tol);

double local_principal_eigenvalue(const PotentialField& field, SiteIndex z, int n, double level);

// Solves (lambda - H) g = delta_y on the operator domain.
std::vector<double> greens_function(const Operator& op, double lambda, SiteIndex y);

// Same system for lambda above the top of the spectrum of the operator with its
// diagonal at y removed; positive iteration keeps every entry relatively accurate.
// Starts from `guess` when given (domain vector).
std::vector<double> positive_greens_column(const Operator& op, double lambda, std::size_t y_local,
                                           std::span<const double> guess = {}, int max_sweeps = 200000);

// Eigenvector positive on the domain with relative accuracy in every entry,
// built from the Green's column at `peak_local` with that site's potential removed.
std::optional<std::vector<double>> refine_principal_vector(const Operator& op, double lambda, std::size_t peak_local,
                                                           std::span<const double> guess = {});

}  // namespace pamlab
