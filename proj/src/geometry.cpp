#include "pamlab/geometry.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "pamlab/error.hpp"

namespace pamlab {

TorusGeometry::TorusGeometry(int dim, int side) : dim_(dim), side_(side) {
  require(dim >= 1, ErrorCode::parameter, "dimension must be positive");
  require(side >= 3 && side % 2 == 1, ErrorCode::parameter, "side must be odd and at least 3");
  stride_.assign(static_cast<std::size_t>(dim), 1);
  size_ = 1;
  for (int a = dim - 1; a >= 0; --a) {
    stride_[static_cast<std::size_t>(a)] = size_;
    const std::size_t next = size_ * static_cast<std::size_t>(side);
    require(next / static_cast<std::size_t>(side) == size_, ErrorCode::parameter, "torus too large");
    size_ = next;
  }
  origin_ = 0;
  for (int a = 0; a < dim; ++a) origin_ += static_cast<std::size_t>(half()) * stride_[static_cast<std::size_t>(a)];
}

bool TorusGeometry::contains(const Site& z) const noexcept {
  if (static_cast<int>(z.size()) != dim_) return false;
  return std::all_of(z.begin(), z.end(), [h = half()](int c) { return c >= -h && c <= h; });
}

SiteIndex TorusGeometry::index(const Site& z) const {
  if (!contains(z)) fail(ErrorCode::invalid_site, "site outside torus");
  SiteIndex i = 0;
  for (int a = 0; a < dim_; ++a)
    i += static_cast<std::size_t>(z[static_cast<std::size_t>(a)] + half()) * stride_[static_cast<std::size_t>(a)];
  return i;
}

Site TorusGeometry::site(SiteIndex i) const {
  require(i < size_, ErrorCode::invalid_site, "site index out of range");
  Site z(static_cast<std::size_t>(dim_));
  for (int a = 0; a < dim_; ++a) z[static_cast<std::size_t>(a)] = digit(i, a) - half();
  return z;
}

int TorusGeometry::distance(SiteIndex a, SiteIndex b) const noexcept {
  int total = 0;
  for (int ax = 0; ax < dim_; ++ax) {
    int diff = std::abs(digit(a, ax) - digit(b, ax));
    total += std::min(diff, side_ - diff);
  }
  return total;
}

int TorusGeometry::distance(const Site& a, const Site& b) const { return distance(index(a), index(b)); }

void TorusGeometry::neighbors(SiteIndex z, std::vector<SiteIndex>& out) const {
  out.clear();
  for (int ax = 0; ax < dim_; ++ax) {
    const std::size_t s = stride_[static_cast<std::size_t>(ax)];
    const int c = digit(z, ax);
    const SiteIndex base = z - static_cast<std::size_t>(c) * s;
    out.push_back(base + static_cast<std::size_t>((c + side_ - 1) % side_) * s);
    out.push_back(base + static_cast<std::size_t>((c + 1) % side_) * s);
  }
}

std::vector<SiteIndex> TorusGeometry::neighbors(SiteIndex z) const {
  std::vector<SiteIndex> out;
  out.reserve(static_cast<std::size_t>(2 * dim_));
  neighbors(z, out);
  return out;
}

SiteIndex TorusGeometry::translate(SiteIndex z, const Site& shift) const {
  require(static_cast<int>(shift.size()) == dim_, ErrorCode::invalid_site, "shift has wrong dimension");
  SiteIndex out = 0;
  for (int ax = 0; ax < dim_; ++ax) {
    int c = (digit(z, ax) + shift[static_cast<std::size_t>(ax)]) % side_;
    if (c < 0) c += side_;
    out += static_cast<std::size_t>(c) * stride_[static_cast<std::size_t>(ax)];
  }
  return out;
}

std::vector<SiteIndex> TorusGeometry::ball(SiteIndex z, int n) const {
  require(n >= 0, ErrorCode::parameter, "negative radius");
  std::vector<SiteIndex> out;
  if (n >= diameter()) {
    out.resize(size_);
    for (SiteIndex i = 0; i < size_; ++i) out[i] = i;
    return out;
  }
  // Offsets per axis are clipped to the half-width so that no site is reached twice.
  const int reach = std::min(n, half());
  Site offset(static_cast<std::size_t>(dim_), -reach);
  for (;;) {
    int norm = 0;
    for (int c : offset) norm += std::abs(c);
    if (norm <= n) out.push_back(translate(z, offset));
    int ax = dim_ - 1;
    while (ax >= 0 && offset[static_cast<std::size_t>(ax)] == reach) {
      offset[static_cast<std::size_t>(ax)] = -reach;
      --ax;
    }
    if (ax < 0) break;
    ++offset[static_cast<std::size_t>(ax)];
  }
  std::sort(out.begin(), out.end());
  return out;
}

int torus_distance(const Site& a, const Site& b, const TorusGeometry& g) { return g.distance(a, b); }

std::vector<Site> ball(const Site& z, int n, const TorusGeometry& g) {
  std::vector<Site> out;
  for (SiteIndex i : g.ball(g.index(z), n)) out.push_back(g.site(i));
  return out;
}

int origin_distance(const Site& z, const TorusGeometry& g) { return g.origin_distance(g.index(z)); }

}  // namespace pamlab
