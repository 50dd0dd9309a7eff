#include "doctest.h"

#include <cmath>

#include "mhd/errors.hpp"
#include "mhd/harness.hpp"

using namespace mhd;
using namespace mhd::harness;
using grid::for_interior;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.dim = 1;
  cfg.n[0] = 32;
  cfg.transport.mu0 = 0.02;
  cfg.transport.eta0 = 0.0;
  cfg.transport.kappa0 = 0.02;
  cfg.transport.zeta0 = 0.05;
  cfg.solver.t_end = 0.02;
  cfg.n_out = 4;
  cfg.perturbation = "velocity-bump";
  cfg.amplitude = 0.05;
  return cfg;
}

}  // namespace

TEST_CASE("config json roundtrip and hashing") {
  const char* text = R"({
    "grid": {"dim": 1, "n": [48, 1, 1], "extent": [2.0, 1.0, 1.0]},
    "eos": {"kind": "ideal", "c_v": 1.5},
    "transport": {"mu0": 0.1, "zeta0": 0.2},
    "boundary": {"theta_B": 1.5, "B_B": [0.0, 0.25, 0.0]},
    "initial": {"rho_bar": 2.0, "theta_bar": 1.5, "perturbation": "solenoidal-B",
                "amplitude": 0.01},
    "solver": {"cfl": 0.3, "t_end": 0.05, "div_control": "projection", "n_out": 5},
    "seed": 42
  })";
  const RunConfig cfg = RunConfig::from_json_text(text);
  CHECK(cfg.n[0] == 48);
  CHECK(cfg.extent[0] == doctest::Approx(2.0));
  CHECK(cfg.theta_B == doctest::Approx(1.5));
  CHECK(cfg.B_B[1] == doctest::Approx(0.25));
  CHECK(cfg.transport.zeta0 == doctest::Approx(0.2));
  CHECK(cfg.solver.cfl == doctest::Approx(0.3));
  CHECK(cfg.seed == 42);

  // hash is stable and sensitive to physics fields only
  const RunConfig again = RunConfig::from_json_text(text);
  CHECK(cfg.config_hash() == again.config_hash());
  RunConfig other = cfg;
  other.amplitude = 0.02;
  CHECK(cfg.config_hash() != other.config_hash());
  RunConfig runtime_only = cfg;
  runtime_only.out_dir = "elsewhere";
  runtime_only.threads = 4;
  CHECK(cfg.config_hash() == runtime_only.config_hash());
}

TEST_CASE("config validation rejects malformed input") {
  CHECK_THROWS_AS(RunConfig::from_json_text("{not json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"eos": {"kind": "vdw"}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json_text(R"({"initial": {"perturbation": "explode"}})"),
      ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(
                      R"({"solver": {"div_control": "constrained-transport"}})"),
                  ConfigError);  // CT needs dim = 2
}

TEST_CASE("scenario presets constrain the coefficients") {
  RunConfig cfg = tiny_config();
  cfg.scenario = "constant-coefficients";
  cfg.transport.mu1 = 0.5;
  apply_scenario(cfg);
  CHECK(cfg.transport.mu1 == 0.0);
  CHECK(cfg.transport.kappa1 == 0.0);

  cfg = tiny_config();
  cfg.scenario = "perfect-gas";
  cfg.eos_kind = "monatomic_radiation";
  CHECK_THROWS_AS(apply_scenario(cfg), HypothesisViolation);

  cfg = tiny_config();
  cfg.scenario = "unconditional";
  cfg.eos_kind = "monatomic_radiation";
  apply_scenario(cfg);
  CHECK(cfg.transport.mu1 > 0.0);
}

TEST_CASE("monitor flags out-of-window states with context") {
  RunConfig cfg = tiny_config();
  cfg.scenario = "bounded-dmv";
  cfg.theta_hi = 1.01;
  auto eosm = cfg.make_eos();
  auto [s, bd] = build_initial_state(cfg, *eosm);
  monitor_scenario(cfg, s, *eosm);  // equilibrium + small bump is inside
  s.eps.at(s.g, 5, 0, 0) = 3.0;    // theta = 2
  try {
    monitor_scenario(cfg, s, *eosm);
    CHECK(false);
  } catch (const HypothesisViolation& e) {
    const std::string msg = e.what();
    CHECK(msg.find("ass_bmvs") != std::string::npos);
    CHECK(msg.find("(5,0,0)") != std::string::npos);
  }
}

TEST_CASE("initial perturbations respect the background and boundaries") {
  RunConfig cfg = tiny_config();
  auto eosm = cfg.make_eos();

  cfg.amplitude = 0.0;
  auto [s0, bd0] = build_initial_state(cfg, *eosm);
  for_interior(s0.g, [&](int i, int j, int k) {
    CHECK(s0.mx.at(s0.g, i, j, k) == 0.0);
    CHECK(s0.rho.at(s0.g, i, j, k) == doctest::Approx(1.0));
  });

  cfg.amplitude = 0.05;
  auto [s1, bd1] = build_initial_state(cfg, *eosm);
  // the bump direction is drawn from the seed, so look at all components
  double peak = 0.0;
  for_interior(s1.g, [&](int i, int j, int k) {
    peak = std::max({peak, std::abs(s1.mx.at(s1.g, i, j, k)),
                     std::abs(s1.my.at(s1.g, i, j, k)), std::abs(s1.mz.at(s1.g, i, j, k))});
  });
  CHECK(peak > 0.01);
  CHECK(std::abs(s1.mx.at(s1.g, 0, 0, 0)) < 1e-12);  // bump vanishes at the wall
  CHECK(std::abs(s1.my.at(s1.g, 0, 0, 0)) < 1e-12);
  CHECK(std::abs(s1.mz.at(s1.g, 0, 0, 0)) < 1e-12);

  cfg.perturbation = "solenoidal-B";
  cfg.dim = 2;
  cfg.n[1] = 32;
  auto [s2, bd2] = build_initial_state(cfg, *eosm);
  CHECK(grid::max_div_B(s2) < 0.05 * 32.0 * 1e-2);

  cfg.perturbation = "temperature-bump";
  cfg.amplitude = 1.5;
  CHECK_THROWS_AS(build_initial_state(cfg, *eosm), ConfigError);
}

TEST_CASE("run_simulation lands on the scheduled output times") {
  const RunConfig cfg = tiny_config();
  const SimResult res = run_simulation(cfg);
  REQUIRE(res.rows.size() == static_cast<std::size_t>(cfg.n_out + 1));
  REQUIRE(res.traj.snaps.size() == res.rows.size());
  for (int k = 0; k <= cfg.n_out; ++k) {
    const double expect = cfg.solver.t_end * k / cfg.n_out;
    CHECK(res.rows[k].t == doctest::Approx(expect).epsilon(1e-12));
  }
  // conservation and sanity of the diagnostics columns
  CHECK(res.rows.back().mass == doctest::Approx(res.rows.front().mass).epsilon(1e-12));
  CHECK(res.rows.back().E_total <= res.rows.front().E_total + 1e-10);
  for (const CsvRow& r : res.rows) {
    CHECK(r.prod_min >= 0.0);
    CHECK(r.divB_max < 1e-10);
    CHECK(r.H_rel >= 0.0);
  }
  CHECK(res.steps_taken > 0);
}

TEST_CASE("repeated runs are bit identical") {
  const RunConfig cfg = tiny_config();
  const SimResult a = run_simulation(cfg);
  const SimResult b = run_simulation(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(csv_line(a.rows[i], false) == csv_line(b.rows[i], false));
  }
  for (std::size_t n = 0; n < a.traj.snaps.size(); ++n)
    for_interior(a.traj.snaps[n].g, [&](int i, int j, int k) {
      CHECK(a.traj.snaps[n].rho.at(a.traj.snaps[n].g, i, j, k) ==
            b.traj.snaps[n].rho.at(b.traj.snaps[n].g, i, j, k));
    });
}

TEST_CASE("csv schema") {
  CHECK(csv_header(false) ==
        "t,mass,momx,momy,momz,E_total,S_total,E_ballistic,H_rel,prod_min,divB_max,"
        "entropy_residual");
  CHECK(csv_header(true) ==
        csv_header(false) + ",rei_lhs,rei_rhs,rei_margin,kp_ratio");
  CsvRow r;
  r.t = 0.5;
  r.mass = 2.0;
  const std::string line = csv_line(r, false);
  CHECK(line.substr(0, 6) == "0.5,2,");
}

TEST_CASE("eos check command logic") {
  RunConfig cfg = tiny_config();
  const EosCheckResult ideal = run_eos_check(cfg);
  CHECK(ideal.pass);
  CHECK(!ideal.structural_applicable);

  cfg.eos_kind = "monatomic_radiation";
  const EosCheckResult mr = run_eos_check(cfg);
  CHECK(mr.pass);
  CHECK(mr.structural_applicable);
}

TEST_CASE("kp check runs its sweep at two resolutions") {
  RunConfig cfg = tiny_config();
  const KpResult res = run_kp_check(cfg, 5);
  CHECK(res.sweep == 5);
  CHECK(res.max_ratio > 0.0);
  CHECK(std::isfinite(res.max_ratio));
  CHECK(res.max_ratio_refined > 0.0);
}
