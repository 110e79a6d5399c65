#include "doctest.h"
#include "pamlab/error.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/rng.hpp"
#include "pamlab/scales.hpp"
#include "pamlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace pamlab;

namespace {

double mass(const SolutionSnapshot& s) { return s.total_mass * std::exp(s.log_scale); }

double sup_relative(const SolutionSnapshot& a, const SolutionSnapshot& b) {
  const double ka = std::exp(a.log_scale), kb = std::exp(b.log_scale);
  double top = 0.0, dev = 0.0;
  for (std::size_t z = 0; z < a.u.size(); ++z) {
    top = std::max(top, a.u[z] * ka);
    dev = std::max(dev, std::abs(a.u[z] * ka - b.u[z] * kb));
  }
  return dev / top;
}

}  // namespace

TEST_CASE("method names parse and print") {
  for (const char* m : {"spectral", "ode", "fk", "propagator"}) CHECK(std::string(method_name(*parse_method(m))) == m);
  CHECK_FALSE(parse_method("euler").has_value());
}

TEST_CASE("zero potential: total mass grows as exp(2dt)") {
  for (int d : {1, 2}) {
    const PotentialField f = constant_field(TorusGeometry(d, 7), 0.0);
    const double t = 1.5;
    const double exact = std::exp(2.0 * d * t);
    CHECK(mass(solve_spectral(f, t, f.size())) == doctest::Approx(exact).epsilon(1e-10));
    CHECK(mass(solve_propagator(f, t)) == doctest::Approx(exact).epsilon(1e-10));
    CHECK(mass(solve_ode(f, t, 1e-10)) == doctest::Approx(exact).epsilon(1e-8));
  }
}

TEST_CASE("ODE oracle: zero potential in d=1 at t=1 gives e^2") {
  const PotentialField f = constant_field(TorusGeometry(1, 15), 0.0);
  CHECK(std::abs(mass(solve_ode(f, 1.0, 1e-10)) - std::exp(2.0)) <= 1e-6);
}

TEST_CASE("ODE matches dense spectral on a 15-site field at t=2") {
  const PotentialField f = sample_field(TorusGeometry(1, 15), 2.0, 77);
  CHECK(sup_relative(solve_spectral(f, 2.0, f.size()), solve_ode(f, 2.0, 1e-10)) <= 1e-7);
}

TEST_CASE("propagator matches dense spectral at moderate and large t") {
  const PotentialField f = sample_field(TorusGeometry(1, 41), 2.0, 5);
  for (double t : {0.5, 5.0, 200.0}) {
    const auto a = solve_spectral(f, t, f.size());
    const auto b = solve_propagator(f, t);
    CHECK(sup_relative(a, b) <= 1e-8);
    CHECK(a.log_total_mass() == doctest::Approx(b.log_total_mass()).epsilon(1e-10));
  }
}

TEST_CASE("Feynman-Kac: zero potential within 3 sigma of e^2") {
  const PotentialField f = constant_field(TorusGeometry(1, 21), 0.0);
  const auto s = feynman_kac_mc(f, 1.0, 100000, 3);
  const double k = std::exp(s.log_scale);
  CHECK(std::abs(mass(s) - std::exp(2.0)) <= 3.0 * s.mass_stderr * k);
  REQUIRE(s.mc_stderr.has_value());
}

TEST_CASE("Feynman-Kac within 3 sigma of spectral on at least 95 of 100 seeds") {
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const PotentialField f = sample_field(TorusGeometry(1, 11), 2.0, derive_seed(0xfc, i));
    const auto sp = solve_spectral(f, 1.0, f.size());
    const auto fk = feynman_kac_mc(f, 1.0, 20000, derive_seed(0xfd, i));
    if (std::abs(mass(fk) - mass(sp)) <= 3.0 * fk.mass_stderr * std::exp(fk.log_scale)) ++agree;
  }
  CHECK(agree >= 95);
}

TEST_CASE("Feynman-Kac does not depend on the worker count") {
  const PotentialField f = sample_field(TorusGeometry(1, 21), 2.0, 4);
  const auto a = feynman_kac_mc(f, 1.0, 30000, 9, 1);
  const auto b = feynman_kac_mc(f, 1.0, 30000, 9, 3);
  CHECK(a.u == b.u);
  CHECK(a.total_mass == b.total_mass);
  CHECK(*a.mc_stderr == *b.mc_stderr);
}

TEST_CASE("mass growth bounds from the eigenvalue sandwich") {
  for (int i = 0; i < 30; ++i) {
    const int d = 1 + i % 2;
    const PotentialField f = sample_field(TorusGeometry(d, d == 1 ? 61 : 9), 2.0, derive_seed(0x9a, i));
    const double top = *std::max_element(f.values().begin(), f.values().end());
    for (double t : {0.3, 3.0, 50.0}) {
      const double logU = solve_propagator(f, t).log_total_mass();
      CHECK(logU >= t * top - 1e-9);
      CHECK(logU <= t * (top + 2.0 * d) + std::log(static_cast<double>(f.size())) + 1e-9);
    }
  }
}

TEST_CASE("zero potential: the profile flattens once mixing is exceeded") {
  const PotentialField f = constant_field(TorusGeometry(1, 5), 0.0);
  const auto s = solve_spectral(f, 30.0, f.size());
  const double ref = std::log(s.fraction(0));
  for (SiteIndex z = 0; z < f.size(); ++z) CHECK(std::abs(std::log(s.fraction(z)) - ref) <= 1e-9);
}

TEST_CASE("macrobox truncation: a larger box changes little at small t") {
  const PotentialField w41 = sample_field(TorusGeometry(1, 41), 2.0, 13);
  const PotentialField w61 = sample_field(TorusGeometry(1, 61), 2.0, 13);
  const PotentialField w81 = sample_field(TorusGeometry(1, 81), 2.0, 13);
  const auto r41 = macrobox_truncation_check(w81, w41, 1.0);
  CHECK(r41.max_abs_deviation <= 1e-6 * r41.U_large);
  CHECK(r41.mass_deviation <= 1e-6 * r41.U_large);
  const auto r21 = macrobox_truncation_check(w81, sample_field(TorusGeometry(1, 21), 2.0, 13), 1.0);
  const auto r61 = macrobox_truncation_check(w81, w61, 1.0);
  CHECK(r21.max_abs_deviation >= r41.max_abs_deviation);
  CHECK(r41.max_abs_deviation >= r61.max_abs_deviation);
}

TEST_CASE("profile records normalise by the distance and penalty rate") {
  const PotentialField f = sample_field(TorusGeometry(1, 101), 2.0, 3);
  ScaleOverrides o;
  o.side = 101;
  const ScaleSet sc = compute_scales(1e3, 1, 2.0, 0.25, o);
  const auto s = solve_propagator(f, 1e3);
  const SiteIndex Z = std::max_element(s.u.begin(), s.u.end()) - s.u.begin();
  const auto recs = profile_extract(s, Z, sc, f.geometry());
  for (const auto& r : recs) {
    CHECK(r.log_mass_ratio <= 0.0);
    CHECK(r.normalized_ratio.has_value() == (r.distance > 0));
    if (r.normalized_ratio) CHECK(*r.normalized_ratio * r.distance * sc.loglog_t() / 2.0 == doctest::Approx(r.log_mass_ratio));
  }
}

TEST_CASE("negative or non-finite time is a parameter error") {
  const PotentialField f = constant_field(TorusGeometry(1, 5), 0.0);
  CHECK_THROWS_AS(solve_ode(f, -1.0, 1e-10), Error);
  CHECK_THROWS_AS(solve_propagator(f, std::nan("")), Error);
}

TEST_CASE("snapshot CSV comes with a JSON sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "pamlab_snapshot_test";
  std::filesystem::create_directories(dir);
  const PotentialField f = sample_field(TorusGeometry(1, 7), 2.0, 1);
  write_snapshot(dir / "u.csv", solve_spectral(f, 1.0, 7), f.geometry());
  std::ifstream csv(dir / "u.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "coord_1,u");
  CHECK(std::filesystem::exists(dir / "u.json"));
  std::filesystem::remove_all(dir);
}
