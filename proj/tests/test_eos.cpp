#include "doctest.h"

#include <cmath>

#include "mhd/eos.hpp"
#include "mhd/errors.hpp"

using namespace mhd;
using eos::ThermoPoint;

TEST_CASE("ideal gas closed forms") {
  eos::IdealPolytropic gas(1.5);
  CHECK(gas.pressure({2.0, 3.0}) == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(gas.internal_energy({2.0, 3.0}) == doctest::Approx(4.5).epsilon(1e-14));
  // s = c_v log(theta) - log(rho)
  CHECK(gas.entropy({2.0, 3.0}) ==
        doctest::Approx(0.9547712524422193).epsilon(1e-14));
  CHECK(gas.gibbs_free_energy({1.0, 1.0}) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(gas.gibbs_free_energy({2.0, 3.0}) ==
        doctest::Approx(4.6356862426733425).epsilon(1e-14));
  CHECK(gas.sound_speed2({2.0, 3.0}) == doctest::Approx(3.0));

  const eos::Partials d = gas.partials({2.0, 3.0});
  CHECK(d.dp_drho == doctest::Approx(3.0));
  CHECK(d.dp_dtheta == doctest::Approx(2.0));
  CHECK(d.de_dtheta == doctest::Approx(1.5));
  CHECK(d.ds_drho == doctest::Approx(-0.5));
  CHECK(d.ds_dtheta == doctest::Approx(0.5));

  CHECK(gas.invert_temperature(2.0, gas.internal_energy({2.0, 3.0})) ==
        doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("ideal gas domain guards") {
  eos::IdealPolytropic gas(1.5);
  CHECK_THROWS_AS(gas.pressure({-1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(gas.pressure({1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(eos::IdealPolytropic(0.5), DomainError);
}

TEST_CASE("monatomic closure P and entropy profile") {
  eos::MonatomicRadiation mr(1.0, 0.1);
  // P(Z) = Z (1+Z)^(2/3)
  CHECK(mr.P(1.0) == doctest::Approx(1.5874010519681994).epsilon(1e-14));
  CHECK(mr.Pprime(1.0) == doctest::Approx(2.1165347359575994).epsilon(1e-13));
  CHECK(mr.P(0.0) == doctest::Approx(0.0));
  // S(Z) = int_Z^inf dt / (t (1+t)^(1/3)), independently integrated
  CHECK(mr.S(0.5) == doctest::Approx(3.3923766911598943).epsilon(1e-8));
  CHECK(mr.S(1.0) == doctest::Approx(2.8131209717260166).epsilon(1e-8));
  CHECK(mr.S(1e6) == doctest::Approx(0.029999997500000958).epsilon(1e-6));
}

TEST_CASE("monatomic + radiation state functions") {
  eos::MonatomicRadiation mr(1.0, 0.1);
  CHECK(mr.pressure({1.0, 1.0}) ==
        doctest::Approx(1.6874010519681995).epsilon(1e-13));
  CHECK(mr.internal_energy({1.0, 1.0}) ==
        doctest::Approx(2.481101577952299).epsilon(1e-13));
  CHECK(mr.entropy({1.0, 1.0}) == doctest::Approx(3.013120971726017).epsilon(1e-8));
  CHECK(mr.pressure({2.0, 3.0}) ==
        doctest::Approx(8.354701040449278).epsilon(1e-13));
  CHECK(mr.internal_energy({2.0, 3.0}) ==
        doctest::Approx(6.041025780336959).epsilon(1e-13));
  CHECK(mr.entropy({2.0, 3.0}) == doctest::Approx(3.924087958595761).epsilon(1e-8));

  CHECK(mr.invert_temperature(2.0, mr.internal_energy({2.0, 3.0})) ==
        doctest::Approx(3.0).epsilon(1e-12));
  CHECK(mr.invert_temperature(0.3, mr.internal_energy({0.3, 0.2})) ==
        doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("gibbs identity sweeps") {
  const eos::Rect box{0.1, 10.0, 0.1, 10.0};
  eos::IdealPolytropic gas(1.5);
  const eos::GibbsReport gi = eos::check_gibbs(gas, box, 2000);
  CHECK(gi.max_residual_theta < 1e-12);
  CHECK(gi.max_residual_rho < 1e-12);

  eos::MonatomicRadiation mr(1.0, 0.1);
  const eos::GibbsReport gm = eos::check_gibbs(mr, box, 500);
  CHECK(gm.max_residual_theta < 1e-5);
  CHECK(gm.max_residual_rho < 1e-5);
}

TEST_CASE("thermodynamic stability") {
  const eos::Rect box{0.1, 10.0, 0.1, 10.0};
  CHECK(eos::check_stability(eos::IdealPolytropic(1.5), box, 2000).pass);
  CHECK(eos::check_stability(eos::MonatomicRadiation(1.0, 0.1), box, 500).pass);
}

TEST_CASE("structural clauses of the default closure") {
  eos::MonatomicRadiation mr(1.0, 0.1);
  const eos::StructuralReport rep = eos::check_structural(mr, 1e6);
  for (const auto& c : rep.clauses) {
    INFO(c.name, " ", c.detail);
    CHECK(c.pass);
  }
  CHECK(std::isfinite(rep.pressure_growth_constant));
  CHECK(rep.pressure_growth_constant > 0.0);
}

TEST_CASE("tabulated P falls back to the asymptote") {
  std::vector<double> z, p;
  for (int i = 1; i <= 64; ++i) {
    const double zz = 0.01 * std::pow(1.2, i);
    z.push_back(zz);
    p.push_back(zz * std::cbrt((1.0 + zz) * (1.0 + zz)));
  }
  auto tab = eos::MonatomicP::from_table(z, p, 1.0);
  CHECK(tab.value(1.0) == doctest::Approx(1.5874010519681994).epsilon(1e-3));
  // beyond the table: p_infinity Z^{5/3}
  const double big = 2.0 * z.back();
  CHECK(tab.value(big) == doctest::Approx(std::pow(big, 5.0 / 3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(eos::MonatomicP::from_table({1.0}, {1.0}, 1.0), TabulationError);
}
