from ._mhdcore import (
    CsvRow,
    EosModel,
    RefStatePoint,
    RunConfig,
    StatePoint,
    ThermoPoint,
    cutoff_weight,
    gronwall_fit,
    ideal_eos,
    monatomic_radiation_eos,
    rel_energy_density,
    run_eos_check,
    run_kp_check,
    run_simulation,
    sha1_hex,
)

__all__ = [
    "CsvRow",
    "EosModel",
    "RefStatePoint",
    "RunConfig",
    "StatePoint",
    "ThermoPoint",
    "cutoff_weight",
    "gronwall_fit",
    "ideal_eos",
    "monatomic_radiation_eos",
    "rel_energy_density",
    "run_eos_check",
    "run_kp_check",
    "run_simulation",
    "sha1_hex",
]
