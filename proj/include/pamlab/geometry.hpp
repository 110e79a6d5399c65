#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pamlab {

using SiteIndex = std::size_t;
using Site = std::vector<int>;

// Odd side, coordinates in [-(side-1)/2, (side-1)/2] per axis.
// Linear index is mixed radix with the first axis most significant,
// so index order equals lexicographic order on coordinates.
class TorusGeometry {
 public:
  TorusGeometry(int dim, int side);

  int dim() const noexcept { return dim_; }
  int side() const noexcept { return side_; }
  int half() const noexcept { return (side_ - 1) / 2; }
  std::size_t size() const noexcept { return size_; }
  int diameter() const noexcept { return dim_ * half(); }

  bool contains(const Site& z) const noexcept;
  SiteIndex index(const Site& z) const;
  Site site(SiteIndex i) const;
  SiteIndex origin() const noexcept { return origin_; }

  int distance(SiteIndex a, SiteIndex b) const noexcept;
  int distance(const Site& a, const Site& b) const;
  int origin_distance(SiteIndex z) const noexcept { return distance(z, origin_); }

  // Exactly 2d entries, axis-major, minus step before plus step.
  void neighbors(SiteIndex z, std::vector<SiteIndex>& out) const;
  std::vector<SiteIndex> neighbors(SiteIndex z) const;

  // Sorted ascending by index.
  std::vector<SiteIndex> ball(SiteIndex z, int n) const;

  SiteIndex translate(SiteIndex z, const Site& shift) const;

  bool operator==(const TorusGeometry& o) const noexcept { return dim_ == o.dim_ && side_ == o.side_; }

 private:
  int dim_;
  int side_;
  std::size_t size_;
  SiteIndex origin_;
  std::vector<std::size_t> stride_;

  int digit(SiteIndex i, int axis) const noexcept {
    return static_cast<int>((i / stride_[axis]) % static_cast<std::size_t>(side_));
  }
};

int torus_distance(const Site& a, const Site& b, const TorusGeometry& g);
std::vector<Site> ball(const Site& z, int n, const TorusGeometry& g);
int origin_distance(const Site& z, const TorusGeometry& g);

}  // namespace pamlab
