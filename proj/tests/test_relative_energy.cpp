#include "doctest.h"

#include <cmath>
#include <random>

#include "mhd/errors.hpp"
#include "mhd/relative_energy.hpp"

using namespace mhd;
using namespace mhd::relent;
using grid::for_interior;
using grid::Grid;

namespace {

Grid grid1d(int n) {
  Grid g;
  g.dim = 1;
  g.n = {n, 1, 1};
  return g;
}

}  // namespace

TEST_CASE("relative energy oracles for the ideal gas") {
  eos::IdealPolytropic gas(1.5);
  // rho e - Theta (rho s - r s(r,Theta)) - G(r,Theta)(rho - r) - r e(r,Theta),
  // evaluated independently from the closed forms
  StatePoint a{2.0, 1.0, {0, 0, 0}, {0, 0, 0}};
  RefStatePoint r0{1.0, 1.0, {0, 0, 0}, {0, 0, 0}};
  CHECK(rel_energy_density(a, r0, gas) ==
        doctest::Approx(0.3862943611198908).epsilon(1e-13));

  StatePoint b{1.0, 2.0, {0, 0, 0}, {0, 0, 0}};
  CHECK(rel_energy_density(b, r0, gas) ==
        doctest::Approx(0.4602792291600821).epsilon(1e-13));

  StatePoint c{1.3, 0.7, {0, 0, 0}, {0, 0, 0}};
  RefStatePoint r1{2.0, 1.1, {0, 0, 0}, {0, 0, 0}};
  CHECK(rel_energy_density(c, r1, gas) ==
        doctest::Approx(0.3434885204166478).epsilon(1e-13));

  // kinetic and magnetic parts are exactly quadratic
  StatePoint d = a;
  d.u = {1.0, 0.0, 0.0};
  d.B = {0.0, 2.0, 0.0};
  CHECK(rel_energy_density(d, r0, gas) ==
        doctest::Approx(0.3862943611198908 + 0.5 * 2.0 * 1.0 + 0.5 * 4.0)
            .epsilon(1e-13));
}

TEST_CASE("Bregman property: nonnegative, zero only at coincidence") {
  eos::IdealPolytropic gas(1.5);
  eos::MonatomicRadiation mr(1.0, 0.1);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> pos(0.2, 5.0), vel(-2.0, 2.0);
  for (const eos::Model* m : {static_cast<const eos::Model*>(&gas),
                              static_cast<const eos::Model*>(&mr)}) {
    for (int it = 0; it < 20000; ++it) {
      StatePoint a{pos(rng), pos(rng), {vel(rng), vel(rng), 0.0}, {vel(rng), 0.0, 0.0}};
      RefStatePoint r{pos(rng), pos(rng), {vel(rng), vel(rng), 0.0}, {vel(rng), 0.0, 0.0}};
      const double e = rel_energy_density(a, r, *m);
      const double scale = 1.0 + a.rho + r.r + a.theta + r.Theta;
      CHECK(e >= -1e-12 * scale);
      const double dist = std::abs(a.rho - r.r) + std::abs(a.theta - r.Theta) +
                          std::sqrt(norm2(a.u - r.U)) + std::sqrt(norm2(a.B - r.H));
      if (dist > 1e-6) CHECK(e > 0.0);
    }
    StatePoint same{1.3, 0.8, {0.2, 0, 0}, {0.1, 0, 0}};
    RefStatePoint rr{1.3, 0.8, {0.2, 0, 0}, {0.1, 0, 0}};
    CHECK(std::abs(rel_energy_density(same, rr, *m)) < 1e-13);
  }
}

TEST_CASE("cutoff weight ramp") {
  CutoffSpec spec;
  spec.delta = 0.1;
  CHECK(cutoff_weight(spec, {1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(cutoff_weight(spec, {0.1, 5.0}) == doctest::Approx(1.0));
  CHECK(cutoff_weight(spec, {0.04, 1.0}) == doctest::Approx(0.0));
  CHECK(cutoff_weight(spec, {1.0, 21.0}) == doctest::Approx(0.0));
  const double mid = cutoff_weight(spec, {0.075, 1.0});
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
}

TEST_CASE("equilibrium reference and matching state") {
  eos::IdealPolytropic gas(1.5);
  const Grid g = grid1d(16);
  const Vec3 Bb{0.0, 0.2, 0.0};
  const ReferenceSolution ref = ReferenceSolution::equilibrium(g, 1.0, 1.0, Bb);
  grid::BoundaryData bd;
  bd.B_B = [&](const Vec3&) { return Bb; };
  ref.check_admissible(bd);

  auto [s, bd2] = solver::make_equilibrium(g, gas, 1.0, 1.0, Bb);
  CHECK(rel_energy_total(s, gas, ref, 0) == doctest::Approx(0.0).epsilon(1e-14));

  // the reference derivatives all vanish
  const RefPoint p = ref.at(0, 3, 0, 0);
  CHECK(p.dTheta_dt == 0.0);
  CHECK(norm2(p.grad_Theta) == 0.0);
  CHECK(p.divU == 0.0);
  CHECK(norm2(p.curlH) == 0.0);
}

TEST_CASE("trajectory restriction reproduces constants and aligns times") {
  eos::IdealPolytropic gas(1.5);
  const Grid coarse = grid1d(16);
  Grid fine = coarse;
  fine.n[0] = 64;
  auto [sf, bd] = solver::make_equilibrium(fine, gas, 1.2, 0.9, {0.0, 0.1, 0.0});
  bd.theta_B = [](double, const Vec3&) { return 0.9; };
  solver::Trajectory traj;
  sf.t = 0.0;
  traj.snaps.push_back(sf);
  sf.t = 0.5;
  traj.snaps.push_back(sf);
  const ReferenceSolution ref =
      ReferenceSolution::restrict_trajectory(traj, coarse, bd, gas);
  CHECK(ref.times.size() == 2);
  CHECK(ref.slice_for(0.5) == 1);
  CHECK_THROWS_AS(ref.slice_for(0.3), AlignmentError);
  const RefPoint p = ref.at(0, 5, 0, 0);
  CHECK(p.v.r == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(p.v.Theta == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(p.v.H[1] == doctest::Approx(0.1).epsilon(1e-10));
}

TEST_CASE("gronwall fit recovers an exact exponential envelope") {
  std::vector<double> t, H;
  for (int i = 0; i <= 40; ++i) {
    t.push_back(0.025 * i);
    H.push_back(0.3 * std::exp(2.0 * t.back()));
  }
  const GronwallFit f = gronwall_fit(t, H);
  CHECK(f.c_fit == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(f.max_violation <= 1e-6);

  // decaying data needs no growth at all
  std::vector<double> Hd;
  for (double tt : t) Hd.push_back(0.3 * std::exp(-tt));
  CHECK(gronwall_fit(t, Hd).c_fit == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<double> bad = H;
  bad[5] = -1.0;
  CHECK_THROWS_AS(gronwall_fit(t, bad), DataError);
}

TEST_CASE("korn-poincare ratio on explicit fields") {
  const Grid g = grid1d(64);
  VecField u(g), zero(g);
  const double pi = M_PI;
  for_interior(g, [&](int i, int j, int k) {
    u.y.at(g, i, j, k) = std::sin(pi * g.center(i, j, k)[0]);
  });
  for (int layer = 1; layer <= Grid::ng; ++layer) {
    u.y.at(g, -layer, 0, 0) = -u.y.at(g, layer - 1, 0, 0);
    u.y.at(g, g.n[0] + layer - 1, 0, 0) = -u.y.at(g, g.n[0] - layer, 0, 0);
  }
  const KPResult r = relent::korn_poincare_ratio(u, zero, g);
  CHECK(!r.identical);
  // u = sin(pi x) e_y: |u|^2 integrates to 1/2; T[sym grad] has |.|^2 = cos^2/2,
  // so the ratio tends to 2/pi^2
  CHECK(r.ratio == doctest::Approx(2.0 / (pi * pi)).epsilon(2e-3));

  CHECK(relent::korn_poincare_ratio(zero, zero, g).identical);

  // nonzero boundary trace is a precondition violation
  VecField bad(g);
  for (int i = -Grid::ng; i < g.n[0] + Grid::ng; ++i) bad.x.at(g, i, 0, 0) = 1.0;
  CHECK_THROWS_AS(relent::korn_poincare_ratio(bad, zero, g), ConstraintError);
}

TEST_CASE("rei sides on a short dissipative run") {
  eos::IdealPolytropic gas(1.5);
  const Grid g = grid1d(48);
  auto [s, bd] = solver::make_equilibrium(g, gas, 1.0, 1.0, {0.0, 0.0, 0.0});
  for_interior(g, [&](int i, int j, int k) {
    const double x = g.center(i, j, k)[0];
    s.mx.at(g, i, j, k) = 0.02 * std::sin(2.0 * M_PI * x);
  });
  TransportModel tm;
  tm.mu0 = 0.05;
  tm.kappa0 = 0.05;
  tm.zeta0 = 0.05;
  solver::SolverConfig cfg;
  solver::apply_boundary(s, bd, gas);
  solver::Trajectory traj;
  traj.snaps.push_back(s);
  for (int it = 0; it < 30; ++it) {
    s = solver::step(s, bd, gas, tm, cfg);
    if ((it + 1) % 10 == 0) traj.snaps.push_back(s);
  }
  const ReferenceSolution ref = ReferenceSolution::equilibrium(g, 1.0, 1.0, {0, 0, 0});
  CutoffSpec spec;
  const auto rows = rei_sides(traj, ref, gas, tm, spec, 10.0);
  REQUIRE(rows.size() == traj.snaps.size());
  CHECK(rows[0].H == doctest::Approx(rows[0].lhs).epsilon(1e-12));
  for (const auto& row : rows) {
    CHECK(row.H >= 0.0);
    CHECK(row.margin == doctest::Approx(row.rhs - row.lhs).epsilon(1e-12));
    // perturbation decays: inequality holds with first-order slack
    CHECK(row.margin > -10.0 * g.h(0));
  }
}

TEST_CASE("lower bound check on a sample cloud") {
  eos::IdealPolytropic gas(1.5);
  CutoffSpec spec;
  std::vector<std::pair<StatePoint, RefStatePoint>> samples;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> pos(0.3, 3.0), vel(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    StatePoint a{pos(rng), pos(rng), {vel(rng), 0, 0}, {vel(rng), 0, 0}};
    RefStatePoint r{1.0, 1.0, {0, 0, 0}, {0, 0, 0}};
    samples.push_back({a, r});
  }
  const LowerBoundReport rep = lower_bound_check(samples, spec, gas);
  CHECK(!rep.vacuous);
  CHECK(rep.used > 0);
  CHECK(rep.c_delta > 0.0);
  CHECK(rep.max_ratio >= rep.c_delta);
}
