"""Finite-ensemble probability algebra of the microscopic SR model.

An ensemble prepared in one state is partitioned into microstates.  Every
object of microstate ``i`` either possesses the microscopic property ``f`` or
does not, so the number of detected objects showing ``F`` is either all the
detected ones or none.  Finite tallies are handled with exact rationals; the
large-number limit is plain floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

WEIGHT_TOL = 1e-12
SIGMA_BAND = 5.0


@dataclass(frozen=True)
class MicrostateTally:
    n_total: int
    n_undetected: int
    possesses_f: bool

    def __post_init__(self):
        if self.n_total < 0 or self.n_undetected < 0:
            raise DomainError("microstate counts must be nonnegative")
        if self.n_undetected > self.n_total:
            raise DomainError(
                f"undetected count {self.n_undetected} exceeds microstate size {self.n_total}"
            )

    @property
    def n_detected(self) -> int:
        return self.n_total - self.n_undetected

    @property
    def n_possessing(self) -> int:
        return self.n_detected if self.possesses_f else 0

    def fractions(self) -> tuple[Fraction, Fraction, Optional[Fraction]]:
        """(possessing, detected, possessing-given-detected) within this microstate.

        The last entry is None when no object of the microstate was detected.
        """
        if self.n_total == 0:
            raise DomainError("empty microstate has no fractions")
        detected = self.n_detected
        cond = Fraction(self.n_possessing, detected) if detected else None
        return (
            Fraction(self.n_possessing, self.n_total),
            Fraction(detected, self.n_total),
            cond,
        )


@dataclass(frozen=True)
class EnsembleTally:
    microstates: tuple[MicrostateTally, ...]

    def __post_init__(self):
        object.__setattr__(self, "microstates", tuple(self.microstates))
        if self.n_total <= 0:
            raise DomainError("ensemble must contain at least one object")

    @property
    def n_total(self) -> int:
        return sum(m.n_total for m in self.microstates)

    @property
    def n_undetected(self) -> int:
        return sum(m.n_undetected for m in self.microstates)

    @property
    def n_detected(self) -> int:
        return self.n_total - self.n_undetected

    @property
    def n_possessing(self) -> int:
        return sum(m.n_possessing for m in self.microstates)

    def merged(self, other: "EnsembleTally") -> "EnsembleTally":
        """Elementwise sum of two tallies over the same microstate partition."""
        if len(self.microstates) != len(other.microstates):
            raise DomainError("cannot merge tallies over different partitions")
        out = []
        for a, b in zip(self.microstates, other.microstates):
            if a.possesses_f != b.possesses_f:
                raise DomainError("cannot merge microstates with different properties")
            out.append(MicrostateTally(a.n_total + b.n_total, a.n_undetected + b.n_undetected, a.possesses_f))
        return EnsembleTally(tuple(out))


def fraction_decomposition(t: EnsembleTally) -> tuple[Fraction, Fraction, Optional[Fraction]]:
    """Exact (possessing, detected, possessing-given-detected) fractions of an ensemble.

    Microstates with no detected object contribute nothing to the possessing
    count, so the product law holds without special cases.
    """
    if not isinstance(t, EnsembleTally):
        t = EnsembleTally(tuple(t))
    n = t.n_total
    n_det = t.n_detected
    n_f = t.n_possessing
    cond = Fraction(n_f, n_det) if n_det else None
    return Fraction(n_f, n), Fraction(n_det, n), cond


@dataclass(frozen=True)
class LimitModel:
    """Microstate weights, per-microstate detection probabilities and possession bits."""

    weights: tuple[float, ...]
    detect_probs: tuple[float, ...]
    possession: tuple[int, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        d = tuple(float(x) for x in self.detect_probs)
        f = tuple(int(x) for x in self.possession)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "detect_probs", d)
        object.__setattr__(self, "possession", f)
        if not (len(w) == len(d) == len(f)) or not w:
            raise DomainError("weights, detect_probs and possession must be nonempty and of equal length")
        if any(not 0.0 <= x <= 1.0 for x in w + d):
            raise DomainError("weights and detection probabilities must lie in [0, 1]")
        if any(x not in (0, 1) for x in f):
            raise DomainError("possession entries must be 0 or 1")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {math.fsum(w)!r}, not 1")

    def __len__(self):
        return len(self.weights)

    @property
    def is_deterministic(self) -> bool:
        return all(d in (0.0, 1.0) for d in self.detect_probs)

    def conditional_factors(self) -> list[Optional[int]]:
        """Per-microstate probability of possessing F when detected; None if never detected."""
        return [f if d > 0.0 else None for d, f in zip(self.detect_probs, self.possession)]


def limit_probabilities(m: LimitModel) -> tuple[float, float, Optional[float]]:
    """(detection, total, conditional) probabilities in the large-number limit."""
    p_detect = math.fsum(w * d for w, d in zip(m.weights, m.detect_probs))
    p_total = math.fsum(w * d * f for w, d, f in zip(m.weights, m.detect_probs, m.possession))
    p_detect = min(1.0, p_detect)
    p_total = min(p_total, p_detect)
    p_cond = min(1.0, p_total / p_detect) if p_detect > 0.0 else None
    return p_detect, p_total, p_cond


def sample_ensemble(m: LimitModel, u_state: np.ndarray, u_detect: np.ndarray) -> EnsembleTally:
    """Tally objects given one uniform for the microstate and one for detection each."""
    u_state = np.asarray(u_state, dtype=float)
    u_detect = np.asarray(u_detect, dtype=float)
    cum = np.cumsum(m.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, u_state, side="right")
    idx = np.minimum(idx, len(m) - 1)
    d = np.asarray(m.detect_probs)
    undetected = u_detect >= d[idx]
    k = len(m)
    n_i = np.bincount(idx, minlength=k)
    n0_i = np.bincount(idx[undetected], minlength=k)
    return EnsembleTally(
        tuple(MicrostateTally(int(n_i[i]), int(n0_i[i]), bool(m.possession[i])) for i in range(k))
    )


@dataclass
class LimitCheckReport:
    n: int
    tally: EnsembleTally
    empirical: tuple[Fraction, Fraction, Optional[Fraction]]
    limits: tuple[float, float, Optional[float]]
    deviations: dict[str, Optional[float]] = field(default_factory=dict)
    bands: dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        for key, dev in self.deviations.items():
            if dev is None:
                continue
            band = self.bands[key]
            if band == 0.0:
                if dev != 0.0:
                    return False
            elif dev > band:
                return False
        return True


def _band(p: float, n: int) -> float:
    return SIGMA_BAND * math.sqrt(p * (1.0 - p) / n) if n else 0.0


def empirical_limit_check(m: LimitModel, n: int, rng: np.random.Generator) -> LimitCheckReport:
    """Sample ``n`` objects from ``m`` and compare the tally with the limit probabilities.

    Bands are 5 sigma binomial half-widths; the conditional band uses the
    detected count as sample size.  A zero band demands exact agreement.
    """
    if n < 1:
        raise DomainError("need at least one object")
    u = rng.random((n, 2))
    tally = sample_ensemble(m, u[:, 0], u[:, 1])
    frac_f, frac_d, frac_c = fraction_decomposition(tally)
    p_d, p_t, p_c = limit_probabilities(m)
    deviations = {
        "detected": abs(float(frac_d) - p_d),
        "possessing": abs(float(frac_f) - p_t),
        "conditional": None if (frac_c is None or p_c is None) else abs(float(frac_c) - p_c),
    }
    bands = {
        "detected": _band(p_d, n),
        "possessing": _band(p_t, n),
        "conditional": None if p_c is None else _band(p_c, tally.n_detected),
    }
    return LimitCheckReport(n, tally, (frac_f, frac_d, frac_c), (p_d, p_t, p_c), deviations, bands)


def load_limit_model(path) -> LimitModel:
    """Read a whitespace-separated ``weight detect_prob possession`` table.

    Numbers may be written as decimals or exact fractions such as ``5/6``;
    ``#`` starts a comment.
    """
    weights, detects, bits = [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DomainError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            try:
                w, d = (float(Fraction(p)) for p in parts[:2])
                f = int(parts[2])
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
            weights.append(w)
            detects.append(d)
            bits.append(f)
    return LimitModel(tuple(weights), tuple(detects), tuple(bits))
