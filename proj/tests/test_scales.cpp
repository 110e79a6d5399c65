#include "doctest.h"
#include "pamlab/error.hpp"
#include "pamlab/scales.hpp"

#include <cmath>

using namespace pamlab;

TEST_CASE("radius of influence") {
  CHECK(radius_of_influence(2.0) == 0);
  CHECK(radius_of_influence(3.0) == 1);
  CHECK(radius_of_influence(7.0) == 3);
  CHECK(radius_of_influence(0.5) == 0);
}

TEST_CASE("path order is the smallest j with 2j+1 > gamma-1") {
  CHECK(path_order(2.0) == 1);
  CHECK(path_order(4.0) == 2);
  CHECK(path_order(5.0) == 2);
  CHECK(path_order(1.0) == 0);
  for (double g = 0.25; g < 12.0; g += 0.25) {
    const int j = path_order(g);
    CHECK(2.0 * j + 1.0 > g - 1.0);
    if (j > 0) CHECK_FALSE(2.0 * (j - 1) + 1.0 > g - 1.0);
  }
}

TEST_CASE("exponent q") {
  CHECK(q_exponent(0, 5.0) == 1.0);
  CHECK(q_exponent(1, 5.0) == doctest::Approx(0.5));
  CHECK(q_exponent(2, 5.0) == 0.0);
  CHECK(q_exponent(1, 1.0) == 0.0);
}

TEST_CASE("closed-form scales at t = e^e, gamma = 2, d = 1") {
  const double t = std::exp(std::exp(1.0));
  const ScaleSet s = compute_scales(t, 1, 2.0, 0.25);
  CHECK(s.a_t == doctest::Approx(std::sqrt(std::exp(1.0))).epsilon(1e-14));
  CHECK(s.d_t == doctest::Approx(0.5 / std::sqrt(std::exp(1.0))).epsilon(1e-14));
  CHECK(s.d_t * s.d_t == doctest::Approx(0.09197).epsilon(1e-4));
  CHECK(s.loglog_t() == doctest::Approx(1.0));
  CHECK(s.r_t == doctest::Approx(t / std::sqrt(std::exp(1.0))).epsilon(1e-14));
  CHECK(s.penalty_rate() == doctest::Approx(1.0 / (2.0 * t)));
  CHECK(s.g_t == doctest::Approx(1.0));
  CHECK(s.side == static_cast<int>(2 * std::floor(t * std::sqrt(std::exp(1.0))) + 1));
}

TEST_CASE("tail identity: t^d P(xi > a_t) = 1") {
  for (double gamma : {0.7, 1.0, 2.0, 3.5})
    for (int d : {1, 2, 3}) {
      const ScaleSet s = compute_scales(1e5, d, gamma, 0.25);
      CHECK(std::pow(1e5, d) * std::exp(-std::pow(s.a_t, gamma)) == doctest::Approx(1.0).epsilon(1e-10));
      // d_t is the derivative scale of the tail exponent at a_t.
      CHECK(gamma * std::pow(s.a_t, gamma - 1.0) * s.d_t == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("auxiliary scales are ordered for large t") {
  ScaleOverrides o;
  o.side = 201;
  const ScaleSet s = compute_scales(1e100, 1, 2.0, 0.25, o);
  CHECK(s.f_t < s.h_t);
  CHECK(s.h_t < s.e_t);
  CHECK(s.e_t < 1.0);
  CHECK(s.g_t > 1.0);
  CHECK(s.kappa_t < 1.0);
}

TEST_CASE("side override replaces the formula box and moves the level") {
  ScaleOverrides o;
  o.side = 201;
  const ScaleSet s = compute_scales(1e8, 1, 2.0, 0.25, o);
  CHECK(s.side == 201);
  CHECK(s.side_overridden);
  CHECK(s.V_size == 201.0);
  CHECK(s.L_t == doctest::Approx(std::sqrt(0.75 * std::log(201.0))));
  CHECK(s.level(0.25) == doctest::Approx(s.L_t));
}

TEST_CASE("formula box too large for int requires an override") {
  CHECK_THROWS_AS(compute_scales(1e12, 1, 2.0, 0.25), Error);
}

TEST_CASE("invalid parameters are rejected") {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ok;
  };
  CHECK(code([] { compute_scales(2.0, 1, 2.0, 0.25); }) == ErrorCode::parameter);
  CHECK(code([] { compute_scales(std::exp(1.0), 1, 2.0, 0.25); }) == ErrorCode::parameter);
  CHECK(code([] { compute_scales(100.0, 0, 2.0, 0.25); }) == ErrorCode::parameter);
  CHECK(code([] { compute_scales(100.0, 1, -1.0, 0.25); }) == ErrorCode::parameter);
  CHECK(code([] { compute_scales(100.0, 1, 2.0, 0.6); }) == ErrorCode::parameter);
  ScaleOverrides even;
  even.side = 200;
  CHECK(code([&] { compute_scales(100.0, 1, 2.0, 0.25, even); }) == ErrorCode::parameter);
  ScaleOverrides order;
  order.eps = 0.3;
  CHECK(code([&] { compute_scales(100.0, 1, 2.0, 0.25, order); }) == ErrorCode::parameter);
}

TEST_CASE("override JSON round trip keeps set fields only") {
  ScaleOverrides o;
  o.side = 51;
  o.kappa = 0.3;
  o.eta = 0.7;
  const auto j = to_json(o);
  CHECK(j.size() == 3);
  const ScaleOverrides back = overrides_from_json(j);
  CHECK(back.side == 51);
  CHECK(back.kappa == 0.3);
  CHECK(back.eta == 0.7);
  CHECK_FALSE(back.f.has_value());
}

TEST_CASE("scale JSON carries every scale") {
  const auto j = to_json(compute_scales(100.0, 2, 3.0, 0.25));
  for (const char* k : {"R_t", "a_t", "d_t", "r_t", "L_t", "rho", "j", "kappa_t", "f_t", "h_t", "e_t", "g_t", "eta"})
    CHECK(j.contains(k));
  CHECK(j["rho"] == 1);
  CHECK(j["j"] == 1);
}
