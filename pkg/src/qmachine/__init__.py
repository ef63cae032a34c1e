"""Spin-1/2 statistics from the elastic-strip quantum machine, the SR ensemble model and
the detection-sphere model, with closed-form oracles and seeded Monte Carlo."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, QuadratureError, SymmetryError
from .bloch import (
    BlochVector,
    DensityOperator2,
    SpinState,
    angle_between,
    bloch_map,
    density_from_mixture,
    qm_probabilities,
    spin_operator,
    spinor_from_angles,
)
from .aerts_machine import (
    ElasticExperiment,
    MachineState,
    Outcome,
    machine_probabilities,
    run_machine_trial,
)

__all__ = [
    "__version__",
    "BlochVector",
    "ConfigError",
    "DensityOperator2",
    "DomainError",
    "ElasticExperiment",
    "MachineState",
    "Outcome",
    "QuadratureError",
    "SpinState",
    "SymmetryError",
    "angle_between",
    "bloch_map",
    "density_from_mixture",
    "machine_probabilities",
    "qm_probabilities",
    "run_machine_trial",
    "spin_operator",
    "spinor_from_angles",
]
