#include "pamlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "pamlab/error.hpp"
#include "pamlab/io.hpp"
#include "pamlab/rng.hpp"

namespace pamlab {

PotentialField::PotentialField(TorusGeometry geometry, std::vector<double> values, double gamma, std::uint64_t seed)
    : geometry_(std::move(geometry)), values_(std::move(values)), gamma_(gamma), seed_(seed) {
  require(values_.size() == geometry_.size(), ErrorCode::input, "field size does not match geometry");
  require(gamma_ > 0.0, ErrorCode::parameter, "gamma must be positive");
}

SiteIndex PotentialField::argmax() const {
  return static_cast<SiteIndex>(std::max_element(values_.begin(), values_.end()) - values_.begin());
}

double keyed_weibull(std::uint64_t seed, double gamma, const Site& z) {
  std::uint64_t h = mix64(seed ^ (0x5851f42d4c957f2dULL * (z.size() + 1)));
  for (int c : z) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
  const double e = -std::log(unit_open(h));
  return gamma == 1.0 ? e : std::pow(e, 1.0 / gamma);
}

PotentialField sample_field(const TorusGeometry& g, double gamma, std::uint64_t seed) {
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::parameter, "gamma must be positive");
  std::vector<double> v(g.size());
  for (SiteIndex i = 0; i < g.size(); ++i) v[i] = keyed_weibull(seed, gamma, g.site(i));
  return PotentialField(g, std::move(v), gamma, seed);
}

PotentialField constant_field(const TorusGeometry& g, double value) {
  return PotentialField(g, std::vector<double>(g.size(), value), 1.0, 0);
}

bool LevelSet::contains(SiteIndex z) const { return std::binary_search(sites.begin(), sites.end(), z); }

LevelSet level_set(const PotentialField& f, double level) {
  LevelSet out{level, {}};
  for (SiteIndex i = 0; i < f.size(); ++i)
    if (f[i] > level) out.sites.push_back(i);
  return out;
}

PotentialField puncture(const PotentialField& f, const LevelSet& pi, std::optional<SiteIndex> keep) {
  if (keep) require(*keep < f.size(), ErrorCode::invalid_site, "keep site outside torus");
  std::vector<double> v(f.values().begin(), f.values().end());
  for (SiteIndex z : pi.sites)
    if (!keep || z != *keep) v[z] = 0.0;
  return PotentialField(f.geometry(), std::move(v), f.gamma(), f.seed());
}

std::optional<int> separation(const LevelSet& pi, const TorusGeometry& g) {
  if (pi.sites.size() < 2) return std::nullopt;
  int best = g.diameter() + 1;
  for (std::size_t a = 0; a < pi.sites.size(); ++a)
    for (std::size_t b = a + 1; b < pi.sites.size(); ++b) best = std::min(best, g.distance(pi.sites[a], pi.sites[b]));
  return best;
}

void write_field_csv(std::ostream& os, const PotentialField& f) {
  const auto& g = f.geometry();
  for (int a = 1; a <= g.dim(); ++a) os << "coord_" << a << ',';
  os << "xi\n";
  for (SiteIndex i = 0; i < f.size(); ++i) {
    for (int c : g.site(i)) os << c << ',';
    os << format_double(f[i]) << '\n';
  }
}

PotentialField read_field_csv(std::istream& is, double gamma, std::uint64_t seed) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::input, "empty field file");
  const auto header = split_csv_line(line);
  require(header.size() >= 2 && header.back() == "xi", ErrorCode::input, "field header must end with xi");
  const int d = static_cast<int>(header.size()) - 1;
  std::map<Site, double> entries;
  int max_abs = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(static_cast<int>(cells.size()) == d + 1, ErrorCode::input, "ragged field row");
    Site z(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
      z[static_cast<std::size_t>(a)] = std::stoi(cells[static_cast<std::size_t>(a)]);
      max_abs = std::max(max_abs, std::abs(z[static_cast<std::size_t>(a)]));
    }
    entries[z] = parse_double(cells.back());
  }
  const TorusGeometry g(d, 2 * max_abs + 1);
  require(entries.size() == g.size(), ErrorCode::input, "field file does not cover a full torus");
  std::vector<double> v(g.size());
  for (const auto& [z, x] : entries) v[g.index(z)] = x;
  return PotentialField(g, std::move(v), gamma, seed);
}

}  // namespace pamlab
