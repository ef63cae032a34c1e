"""The elastic-strip quantum machine: a particle in the unit ball measured by an elastic.

The particle at ``w`` falls orthogonally onto the elastic stretched between
``u`` and ``-u``; its coordinate along the strip is ``c = w . u``.  The elastic
breaks at a uniform point ``b`` of ``[-1, 1]`` and the particle is pulled to
``u`` (outcome O1) when ``b <= c``, otherwise to ``-u`` (O2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bloch import NORM_TOL, BlochVector
from .errors import DomainError


class Outcome(enum.IntEnum):
    O1 = 0
    O2 = 1
    A0 = 2  # no registration; never produced by the bare machine


@dataclass(frozen=True)
class MachineState:
    position: BlochVector

    @classmethod
    def pure(cls, direction: BlochVector) -> "MachineState":
        return cls(direction.unit())

    @property
    def radius(self) -> float:
        return self.position.norm


@dataclass(frozen=True)
class ElasticExperiment:
    """Elastic between the anchor points ``direction`` and ``-direction``."""

    direction: BlochVector

    def __post_init__(self):
        if abs(self.direction.norm - 1.0) > NORM_TOL:
            raise DomainError(f"elastic direction must be a unit vector, norm={self.direction.norm!r}")


def strip_coordinate(state: MachineState, exp: ElasticExperiment) -> float:
    c = state.position.dot(exp.direction)
    return min(1.0, max(-1.0, c))


def machine_probabilities(state: MachineState, exp: ElasticExperiment) -> tuple[float, float]:
    """Elastic-length probabilities (L1/2, L2/2) = ((1 + |w| cos g)/2, (1 - |w| cos g)/2)."""
    c = strip_coordinate(state, exp)
    mu1 = 0.5 * (1.0 + c)
    return mu1, 1.0 - mu1


def machine_outcomes(coordinate: float, u_break: np.ndarray) -> np.ndarray:
    """Outcome codes for uniform draws ``u_break`` in [0, 1); ties go to O1."""
    b = 2.0 * np.asarray(u_break, dtype=float) - 1.0
    return np.where(b <= coordinate, Outcome.O1, Outcome.O2).astype(np.int8)


def run_machine_trial(state: MachineState, exp: ElasticExperiment, rng: np.random.Generator) -> Outcome:
    code = machine_outcomes(strip_coordinate(state, exp), np.array([rng.random()]))[0]
    return Outcome(int(code))
