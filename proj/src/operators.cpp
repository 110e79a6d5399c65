#include "pamlab/operators.hpp"

#include <algorithm>

#include "pamlab/error.hpp"

namespace pamlab {

Operator::Operator(const TorusGeometry& geometry, std::vector<SiteIndex> domain, std::vector<double> diagonal)
    : geometry_(geometry), domain_(std::move(domain)), diagonal_(std::move(diagonal)) {
  require(!domain_.empty(), ErrorCode::parameter, "empty operator domain");
  require(domain_.size() == diagonal_.size(), ErrorCode::input, "diagonal size mismatch");
  require(std::is_sorted(domain_.begin(), domain_.end()), ErrorCode::input, "domain must be ascending");
  full_ = domain_.size() == geometry_.size();
  offsets_.reserve(domain_.size() + 1);
  offsets_.push_back(0);
  std::vector<SiteIndex> nb;
  for (SiteIndex z : domain_) {
    geometry_.neighbors(z, nb);
    for (SiteIndex y : nb)
      if (auto l = local(y)) cols_.push_back(*l);
    offsets_.push_back(cols_.size());
  }
}

std::optional<std::size_t> Operator::local(SiteIndex z) const {
  if (full_) return z < domain_.size() ? std::optional<std::size_t>(z) : std::nullopt;
  auto it = std::lower_bound(domain_.begin(), domain_.end(), z);
  if (it == domain_.end() || *it != z) return std::nullopt;
  return static_cast<std::size_t>(it - domain_.begin());
}

void Operator::apply(const double* x, double* y) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = diagonal_[i] * x[i];
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) acc += x[cols_[p]];
    y[i] = acc;
  }
}

Eigen::MatrixXd Operator::dense() const {
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = diagonal_[static_cast<std::size_t>(i)];
    for (std::size_t c : row(static_cast<std::size_t>(i))) m(i, static_cast<Eigen::Index>(c)) += 1.0;
  }
  return m;
}

double Operator::max_diagonal() const { return *std::max_element(diagonal_.begin(), diagonal_.end()); }

int Operator::max_degree() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i < dim(); ++i) best = std::max(best, offsets_[i + 1] - offsets_[i]);
  return static_cast<int>(best);
}

std::vector<double> Operator::embed(std::span<const double> v) const {
  require(v.size() == dim(), ErrorCode::input, "vector does not match operator domain");
  std::vector<double> out(geometry_.size(), 0.0);
  for (std::size_t i = 0; i < dim(); ++i) out[domain_[i]] = v[i];
  return out;
}

Operator Operator::with_diagonal(std::vector<double> diagonal) const {
  require(diagonal.size() == dim(), ErrorCode::input, "diagonal size mismatch");
  Operator out = *this;
  out.diagonal_ = std::move(diagonal);
  return out;
}

namespace {

std::vector<SiteIndex> all_sites(std::size_t n) {
  std::vector<SiteIndex> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = i;
  return d;
}

// Potential after removing exceedances of `level`, except at `keep`.
double punctured_value(const PotentialField& f, SiteIndex x, double level, std::optional<SiteIndex> keep) {
  const double v = f[x];
  if (v > level && (!keep || *keep != x)) return 0.0;
  return v;
}

}  // namespace

Operator build_hamiltonian(const PotentialField& f, const HamiltonianVariant& variant) {
  const auto& g = f.geometry();
  auto check = [&](SiteIndex z) { require(z < g.size(), ErrorCode::invalid_site, "site outside torus"); };
  return std::visit(
      [&](const auto& v) -> Operator {
        using V = std::decay_t<decltype(v)>;
        std::vector<double> diag(f.values().begin(), f.values().end());
        if constexpr (std::is_same_v<V, Full>) {
          return Operator(g, all_sites(g.size()), std::move(diag));
        } else if constexpr (std::is_same_v<V, Punctured>) {
          for (SiteIndex x = 0; x < g.size(); ++x) diag[x] = punctured_value(f, x, v.level, std::nullopt);
          return Operator(g, all_sites(g.size()), std::move(diag));
        } else if constexpr (std::is_same_v<V, SinglePeak>) {
          check(v.peak);
          for (SiteIndex x = 0; x < g.size(); ++x) diag[x] = punctured_value(f, x, v.level, v.peak);
          return Operator(g, all_sites(g.size()), std::move(diag));
        } else if constexpr (std::is_same_v<V, SinglePunctured>) {
          check(v.site);
          diag[v.site] = 0.0;
          return Operator(g, all_sites(g.size()), std::move(diag));
        } else {
          check(v.peak);
          require(v.radius >= 0, ErrorCode::parameter, "negative radius");
          auto dom = g.ball(v.peak, v.radius);
          std::vector<double> d(dom.size());
          for (std::size_t i = 0; i < dom.size(); ++i) d[i] = punctured_value(f, dom[i], v.level, v.peak);
          return Operator(g, std::move(dom), std::move(d));
        }
      },
      variant);
}

Operator build_hamiltonian(const HamiltonianSpec& spec) {
  require(spec.field != nullptr, ErrorCode::input, "hamiltonian spec without field");
  return build_hamiltonian(*spec.field, spec.variant);
}

double local_principal_eigenvalue(const PotentialField& field, SiteIndex z, int n, double level) {
  require(z < field.size(), ErrorCode::invalid_site, "site outside torus");
  if (n == 0) return field[z];
  const Operator op = build_hamiltonian(field, RestrictedPuncturedPeak{level, z, n});
  if (op.dim() <= 64) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense(), Eigen::EigenvaluesOnly);
    require(es.info() == Eigen::Success, ErrorCode::convergence, "dense eigensolver failed");
    return es.eigenvalues()(es.eigenvalues().size() - 1);
  }
  return top_k_eigenpairs(op, 1).eigenvalues.front();
}

}  // namespace pamlab
