"""Smoke tests for the _mhdcore extension module."""
import math
import sys

import _mhdcore as m


def approx(a, b, tol=1e-10):
    assert abs(a - b) <= tol * max(1.0, abs(a), abs(b)), (a, b)


def test_eos():
    gas = m.ideal_eos(1.5)
    approx(gas.pressure(m.ThermoPoint(2.0, 3.0)), 6.0)
    approx(gas.internal_energy(m.ThermoPoint(2.0, 3.0)), 4.5)
    approx(gas.gibbs_free_energy(m.ThermoPoint(1.0, 1.0)), 2.5)

    mr = m.monatomic_radiation_eos(1.0, 0.1)
    approx(mr.pressure(m.ThermoPoint(1.0, 1.0)), 1.6874010519681995, 1e-12)
    th = mr.invert_temperature(2.0, mr.internal_energy(m.ThermoPoint(2.0, 3.0)))
    approx(th, 3.0, 1e-10)


def test_relative_energy():
    gas = m.ideal_eos(1.5)
    e = m.rel_energy_density(
        m.StatePoint(2.0, 1.0), m.RefStatePoint(1.0, 1.0), gas)
    approx(e, 2.0 * math.log(2.0) - 1.0, 1e-12)
    zero = m.rel_energy_density(
        m.StatePoint(1.0, 1.0), m.RefStatePoint(1.0, 1.0), gas)
    assert abs(zero) < 1e-13


def test_cutoff_and_gronwall():
    assert m.cutoff_weight(0.1, 1.0, 1.0) == 1.0
    assert m.cutoff_weight(0.1, 0.01, 1.0) == 0.0
    times = [0.05 * i for i in range(21)]
    H = [0.2 * math.exp(1.5 * t) for t in times]
    c_fit, violation = m.gronwall_fit(times, H)
    approx(c_fit, 1.5, 1e-5)
    assert violation <= 1e-6


def test_config_and_simulation():
    cfg = m.RunConfig.from_json_text("""{
      "grid": {"dim": 1, "n": [24, 1, 1]},
      "transport": {"mu0": 0.02, "kappa0": 0.02, "zeta0": 0.05},
      "initial": {"perturbation": "velocity-bump", "amplitude": 0.05},
      "solver": {"t_end": 0.01, "n_out": 2},
      "seed": 3
    }""")
    assert len(cfg.config_hash()) == 40
    rows = m.run_simulation(cfg)
    assert len(rows) == 3
    approx(rows[0].mass, rows[-1].mass, 1e-12)
    assert all(r.prod_min >= 0.0 for r in rows)
    assert all(r.divB_max < 1e-10 for r in rows)
    # determinism
    rows2 = m.run_simulation(cfg)
    assert [r.E_total for r in rows] == [r.E_total for r in rows2]


def test_eos_check_and_kp():
    cfg = m.RunConfig()
    report = m.run_eos_check(cfg)
    assert report["pass"]
    ratio, refined = m.run_kp_check(cfg, 3)
    assert ratio > 0.0 and math.isfinite(ratio)
    assert refined > 0.0


def main():
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
