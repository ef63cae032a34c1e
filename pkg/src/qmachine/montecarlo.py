"""Seeded batch simulation and goodness-of-fit reports.

Every trial owns a fixed block of four uniforms taken from a Philox4x64
counter-based stream: trial ``i`` reads the block at counter ``i`` under a key
derived from ``(master_seed, stream)``.  Tallies therefore depend only on the
configuration, never on how trials are split into chunks or spread over
workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import sr_ensemble
from .aerts_machine import ElasticExperiment, MachineState, Outcome, machine_outcomes, machine_probabilities, strip_coordinate
from .bloch import BlochVector, angle_between
from .errors import ConfigError, DomainError
from .unified_model import (
    CapDensity,
    DetectionProfile,
    mixed_outcomes,
    mixed_total_probabilities,
    total_probabilities,
    unified_outcomes,
)

SCENARIOS = ("machine", "unified", "mixed", "ensemble")
UNIFORMS_PER_TRIAL = 4
U_MIX, U_THETA, U_PHI, U_DETECT = range(UNIFORMS_PER_TRIAL)
DEFAULT_CHUNK = 1 << 16
WORKERS_ENV = "QMACHINE_WORKERS"

Z_THRESHOLD = 5.0
CHI2_ALPHA = 1e-3
ZERO_PROB = 1e-12
_Z_AXIS = BlochVector(0.0, 0.0, 1.0)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


# ---------------------------------------------------------------------------
# random streams


def stream_key(master_seed: int, stream: int = 0) -> np.ndarray:
    return np.random.SeedSequence([int(master_seed), int(stream)]).generate_state(2, dtype=np.uint64)


def trial_uniforms(key: np.ndarray, start: int, count: int) -> np.ndarray:
    """Uniforms in [0, 1) for trials ``start .. start+count-1``, shape (count, 4)."""
    bits = np.random.Philox(key=key, counter=int(start)).random_raw(UNIFORMS_PER_TRIAL * count)
    return ((bits >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(count, UNIFORMS_PER_TRIAL)


# ---------------------------------------------------------------------------
# configuration and tallies


@dataclass(frozen=True)
class SimulationConfig:
    """One simulation run.

    ``v`` is the state direction and ``u`` the measurement direction.  In the
    machine scenario the particle sits at ``radius * v``; in the mixed
    scenario the state is the mixture ``lambda1`` of ``v`` and ``1 - lambda1``
    of ``-v``.
    """

    scenario: str
    trials: int
    master_seed: int = 0
    workers: int = 1
    v: BlochVector = _Z_AXIS
    u: BlochVector = _Z_AXIS
    radius: float = 1.0
    lambda1: float = 1.0
    cap: Optional[CapDensity] = None
    profile: Optional[DetectionProfile] = None
    model: Optional[sr_ensemble.LimitModel] = None
    stream: int = 0
    chunk_size: int = DEFAULT_CHUNK

    @property
    def lambda2(self) -> float:
        return 1.0 - self.lambda1

    @property
    def gamma(self) -> float:
        return angle_between(self.u, self.v)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.workers < 1 or self.chunk_size < 1:
            raise ConfigError("workers and chunk_size must be positive")
        if self.scenario == "ensemble":
            if self.model is None:
                raise ConfigError("ensemble scenario needs a LimitModel")
            return
        if not self.v.is_pure or not self.u.is_pure:
            raise ConfigError("state and measurement directions must be unit vectors")
        if self.scenario == "machine":
            if not 0.0 <= self.radius <= 1.0:
                raise ConfigError(f"machine radius {self.radius!r} outside [0, 1]")
            return
        if self.cap is None or self.profile is None:
            raise ConfigError(f"{self.scenario} scenario needs a cap density and a detection profile")
        try:
            if self.scenario == "mixed":
                if not 0.0 <= self.lambda1 <= 1.0:
                    raise ConfigError(f"lambda1={self.lambda1!r} outside [0, 1]")
                mixed_total_probabilities(self.lambda1, self.lambda2, self.v, self.u, self.cap, self.profile)
            else:
                total_probabilities(self.v, self.u, self.cap, self.profile)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class TrialTally:
    count_o1: int = 0
    count_o2: int = 0
    count_a0: int = 0

    @classmethod
    def from_codes(cls, codes: np.ndarray) -> "TrialTally":
        c = np.bincount(np.asarray(codes, dtype=np.int64), minlength=3)
        return cls(int(c[Outcome.O1]), int(c[Outcome.O2]), int(c[Outcome.A0]))

    @classmethod
    def from_ensemble(cls, t: sr_ensemble.EnsembleTally) -> "TrialTally":
        """O1: detected with F, O2: detected without F, A0: undetected."""
        o1 = sum(m.n_detected for m in t.microstates if m.possesses_f)
        o2 = sum(m.n_detected for m in t.microstates if not m.possesses_f)
        return cls(o1, o2, t.n_undetected)

    @property
    def n(self) -> int:
        return self.count_o1 + self.count_o2 + self.count_a0

    @property
    def n_detected(self) -> int:
        return self.count_o1 + self.count_o2

    def as_tuple(self) -> tuple[int, int, int]:
        return self.count_o1, self.count_o2, self.count_a0

    def frequencies(self) -> tuple[Fraction, Fraction, Fraction]:
        n = self.n
        return tuple(Fraction(c, n) for c in self.as_tuple())

    def __add__(self, other: "TrialTally") -> "TrialTally":
        return TrialTally(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))


# ---------------------------------------------------------------------------
# analytic expectations


def expected_probabilities(cfg: SimulationConfig) -> tuple[float, float, float]:
    """Closed-form (P(o1), P(o2), P(a0)) for the configured scenario."""
    if cfg.scenario == "machine":
        mu1, mu2 = machine_probabilities(MachineState(cfg.v.scaled(cfg.radius)), ElasticExperiment(cfg.u))
        return mu1, mu2, 0.0
    if cfg.scenario == "unified":
        p1, p2, pd = total_probabilities(cfg.v, cfg.u, cfg.cap, cfg.profile)
        return p1, p2, 1.0 - pd
    if cfg.scenario == "mixed":
        p1, p2, pd = mixed_total_probabilities(cfg.lambda1, cfg.lambda2, cfg.v, cfg.u, cfg.cap, cfg.profile)
        return p1, p2, 1.0 - pd
    if cfg.scenario == "ensemble":
        pd, pt, _ = sr_ensemble.limit_probabilities(cfg.model)
        return pt, max(0.0, pd - pt), 1.0 - pd
    raise ConfigError(f"unknown scenario {cfg.scenario!r}")


# ---------------------------------------------------------------------------
# execution


def _chunk_codes(cfg: SimulationConfig, u: np.ndarray) -> np.ndarray:
    if cfg.scenario == "machine":
        c = strip_coordinate(MachineState(cfg.v.scaled(cfg.radius)), ElasticExperiment(cfg.u))
        return machine_outcomes(c, u[:, U_MIX])
    if cfg.scenario == "unified":
        return unified_outcomes(cfg.cap, cfg.profile, cfg.gamma, u[:, U_THETA], u[:, U_DETECT])
    if cfg.scenario == "mixed":
        return mixed_outcomes(cfg.lambda1, cfg.cap, cfg.profile, cfg.gamma, u[:, U_MIX], u[:, U_THETA], u[:, U_DETECT])
    raise ConfigError(f"scenario {cfg.scenario!r} has no outcome kernel")


def _chunks(cfg: SimulationConfig) -> list[tuple[int, int]]:
    step = cfg.chunk_size
    return [(start, min(step, cfg.trials - start)) for start in range(0, cfg.trials, step)]


def _map_chunks(cfg: SimulationConfig, job):
    chunks = _chunks(cfg)
    if cfg.workers == 1 or len(chunks) == 1:
        return [job(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(job, chunks))


def run_ensemble(cfg: SimulationConfig) -> sr_ensemble.EnsembleTally:
    """Per-microstate tally for the ensemble scenario."""
    cfg.validate()
    if cfg.scenario != "ensemble":
        raise ConfigError("run_ensemble needs the ensemble scenario")
    key = stream_key(cfg.master_seed, cfg.stream)

    def job(chunk):
        u = trial_uniforms(key, *chunk)
        return sr_ensemble.sample_ensemble(cfg.model, u[:, U_MIX], u[:, U_DETECT])

    parts = _map_chunks(cfg, job)
    total = parts[0]
    for part in parts[1:]:
        total = total.merged(part)
    return total


def run_simulation(cfg: SimulationConfig) -> TrialTally:
    """Run ``cfg.trials`` trials; the tally is a pure function of ``cfg``."""
    cfg.validate()
    if cfg.scenario == "ensemble":
        return TrialTally.from_ensemble(run_ensemble(cfg))
    key = stream_key(cfg.master_seed, cfg.stream)

    def job(chunk):
        return TrialTally.from_codes(_chunk_codes(cfg, trial_uniforms(key, *chunk)))

    total = TrialTally()
    for part in _map_chunks(cfg, job):
        total = total + part
    return total


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class OutcomeStat:
    outcome: str
    count: int
    frequency: float
    expected: float
    std_error: float
    z: float


@dataclass(frozen=True)
class StatReport:
    n: int
    outcomes: tuple[OutcomeStat, ...]
    chi2: float
    dof: int
    chi2_p: float
    impossible_observed: bool
    z_threshold: float = Z_THRESHOLD
    alpha: float = CHI2_ALPHA

    @property
    def max_abs_z(self) -> float:
        return max(abs(o.z) for o in self.outcomes)

    @property
    def z_pass(self) -> bool:
        return not self.impossible_observed and self.max_abs_z < self.z_threshold

    @property
    def chi2_pass(self) -> bool:
        return not self.impossible_observed and self.chi2_p > self.alpha

    @property
    def passed(self) -> bool:
        return self.z_pass and self.chi2_pass

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "outcomes": [vars(o).copy() for o in self.outcomes],
            "chi2": self.chi2,
            "dof": self.dof,
            "chi2_p": self.chi2_p,
            "impossible_observed": self.impossible_observed,
            "max_abs_z": self.max_abs_z,
            "z_threshold": self.z_threshold,
            "alpha": self.alpha,
            "passed": self.passed,
        }


OUTCOME_NAMES = ("o1", "o2", "a0")


def compare(tally, expected: Sequence[float]) -> StatReport:
    """Binomial z-scores per outcome and a Pearson chi-squared over all outcomes.

    Outcomes with zero expected probability must have zero counts; any count
    there marks the report as failed outright.
    """
    counts = tally.as_tuple() if isinstance(tally, TrialTally) else tuple(int(c) for c in tally)
    expected = tuple(float(p) for p in expected)
    if len(counts) != len(expected):
        raise DomainError(f"{len(counts)} counts against {len(expected)} probabilities")
    if any(p < -ZERO_PROB or p > 1.0 + ZERO_PROB for p in expected):
        raise DomainError("expected probabilities must lie in [0, 1]")
    if abs(math.fsum(expected) - 1.0) > 1e-9:
        raise DomainError(f"expected probabilities sum to {math.fsum(expected)!r}")
    n = sum(counts)
    if n <= 0:
        raise DomainError("empty tally")
    names = OUTCOME_NAMES[: len(counts)] if len(counts) <= 3 else tuple(f"k{i}" for i in range(len(counts)))
    rows = []
    impossible = False
    chi2 = 0.0
    live = 0
    for name, count, p in zip(names, counts, expected):
        p = min(1.0, max(0.0, p))
        mean = n * p
        if p <= ZERO_PROB or p >= 1.0 - ZERO_PROB:
            se = 0.0
            exact = round(mean)
            z = 0.0 if count == exact else math.inf
            impossible = impossible or count != exact
        else:
            se = math.sqrt(p * (1.0 - p) / n)
            z = (count - mean) / math.sqrt(n * p * (1.0 - p))
        if p > ZERO_PROB:
            live += 1
            chi2 += (count - mean) ** 2 / mean
        rows.append(OutcomeStat(name, count, count / n, p, se, z))
    dof = live - 1
    chi2_p = float(stats.chi2.sf(chi2, dof)) if dof > 0 else (1.0 if not impossible else 0.0)
    return StatReport(n, tuple(rows), chi2, dof, chi2_p, impossible)


def conditional_report(tally: TrialTally, p_o1_given_detected: float) -> StatReport:
    """Compare the detected-only split O1 : O2 against a conditional probability."""
    if tally.n_detected == 0:
        raise DomainError("no detected trials; conditional frequency undefined")
    p = float(p_o1_given_detected)
    return compare((tally.count_o1, tally.count_o2), (p, 1.0 - p))


def run_and_compare(cfg: SimulationConfig) -> tuple[TrialTally, StatReport]:
    tally = run_simulation(cfg)
    return tally, compare(tally, expected_probabilities(cfg))
