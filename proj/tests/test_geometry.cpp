#include "doctest.h"
#include "pamlab/error.hpp"
#include "pamlab/geometry.hpp"

#include <algorithm>
#include <set>

using namespace pamlab;

TEST_CASE("index and site are inverse on a 2-d torus") {
  const TorusGeometry g(2, 7);
  CHECK(g.size() == 49);
  for (SiteIndex i = 0; i < g.size(); ++i) CHECK(g.index(g.site(i)) == i);
  CHECK(g.site(g.origin()) == Site{0, 0});
  CHECK(g.half() == 3);
  CHECK(g.diameter() == 6);
}

TEST_CASE("coordinates are centred in [-half, half]") {
  const TorusGeometry g(1, 5);
  std::set<int> seen;
  for (SiteIndex i = 0; i < g.size(); ++i) seen.insert(g.site(i)[0]);
  CHECK(seen == std::set<int>{-2, -1, 0, 1, 2});
  CHECK_FALSE(g.contains(Site{3}));
  CHECK_THROWS_AS(g.index(Site{3}), Error);
}

TEST_CASE("torus distance wraps and is a metric") {
  const TorusGeometry g(2, 9);
  CHECK(g.distance(Site{-4, 0}, Site{4, 0}) == 1);
  CHECK(g.distance(Site{-4, -4}, Site{4, 4}) == 2);
  for (SiteIndex a = 0; a < g.size(); a += 7)
    for (SiteIndex b = 0; b < g.size(); b += 5) {
      CHECK(g.distance(a, b) == g.distance(b, a));
      CHECK(g.distance(a, b) <= g.diameter());
      for (SiteIndex c = 0; c < g.size(); c += 11) CHECK(g.distance(a, c) <= g.distance(a, b) + g.distance(b, c));
    }
}

TEST_CASE("each site has 2d distinct neighbours at distance 1") {
  const TorusGeometry g(3, 5);
  for (SiteIndex z = 0; z < g.size(); ++z) {
    const auto nb = g.neighbors(z);
    CHECK(nb.size() == 6);
    CHECK(std::set<SiteIndex>(nb.begin(), nb.end()).size() == 6);
    for (SiteIndex y : nb) CHECK(g.distance(z, y) == 1);
  }
}

TEST_CASE("ball radius beyond the diameter covers the torus") {
  const TorusGeometry g(1, 3);
  CHECK(g.ball(g.origin(), 5).size() == 3);
  CHECK(ball(Site{0}, 5, g).size() == 3);
}

TEST_CASE("ball sizes match the l1 lattice count away from wrap-around") {
  const TorusGeometry g(2, 11);
  for (int n = 0; n <= 4; ++n) CHECK(g.ball(g.origin(), n).size() == static_cast<std::size_t>(2 * n * (n + 1) + 1));
  const auto b = g.ball(g.index(Site{5, 5}), 1);
  CHECK(b.size() == 5);
  CHECK(std::is_sorted(b.begin(), b.end()));
}

TEST_CASE("translation is a distance-preserving bijection") {
  const TorusGeometry g(2, 7);
  const Site shift{3, -2};
  std::set<SiteIndex> image;
  for (SiteIndex z = 0; z < g.size(); ++z) image.insert(g.translate(z, shift));
  CHECK(image.size() == g.size());
  CHECK(g.distance(g.translate(4, shift), g.translate(30, shift)) == g.distance(SiteIndex{4}, SiteIndex{30}));
}

TEST_CASE("invalid geometries are rejected") {
  CHECK_THROWS_AS(TorusGeometry(1, 4), Error);
  CHECK_THROWS_AS(TorusGeometry(1, 1), Error);
  CHECK_THROWS_AS(TorusGeometry(0, 5), Error);
}
