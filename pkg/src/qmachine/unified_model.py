"""Detection-sphere model joining the quantum machine with the SR ensemble picture.

The particle representing a machine state ``v`` actually sits at a hidden
point ``(theta, phi)`` of a second sphere tangent to the machine sphere at the
state point P.  Coordinates put the polar axis along ``v`` with P at
``theta = pi``; hidden states are confined to the cap ``theta0 <= theta <= pi``
with a phi-independent density ``f(theta)`` normalized against the surface
element ``sin(theta) dtheta dphi``.

A hidden state is detected with probability ``p(gamma, theta)``.  Detected
particles in the inner sub-cap ``C+ = [theta_b, pi]`` give O1, those in the
crown ``C- = [theta0, theta_b)`` give O2, and undetected ones give A0.  The
boundary ``theta_b`` is fixed by requiring the f-measure of ``C+`` to equal
``cos^2(gamma/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .aerts_machine import ElasticExperiment, MachineState, Outcome, machine_probabilities
from .bloch import BlochVector, DensityOperator2, angle_between, qm_probabilities
from .errors import DomainError, SymmetryError
from .numerics import bisect_decreasing, bisect_increasing_vec, integrate_1d, merge_breakpoints

TWO_PI = 2.0 * math.pi
GRID_TOL = 1e-9
PROB_TOL = 1e-12
SYMMETRY_TOL = 1e-9


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma <= math.pi:
        raise DomainError(f"gamma={gamma!r} outside [0, pi]")
    return gamma


def _cos2_half(gamma: float) -> float:
    return math.cos(0.5 * gamma) ** 2


# ---------------------------------------------------------------------------
# cap densities


class CapDensity:
    """Hidden-state density on the cap ``[theta0, pi]`` of the detection sphere.

    Subclasses supply ``pdf``, ``cdf`` and ``upper_measure``; the last two are
    measures of ``[theta0, theta]`` and ``[theta, pi]`` including the
    ``2 pi sin(theta)`` area factor.
    """

    theta0: float
    kind: str = "abstract"

    def pdf(self, theta):
        raise NotImplementedError

    def cdf(self, theta):
        raise NotImplementedError

    def upper_measure(self, theta):
        raise NotImplementedError

    def sample_theta(self, u) -> np.ndarray:
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def marginal(self, theta):
        """Density of theta alone, ``2 pi f(theta) sin(theta)``."""
        theta = np.asarray(theta, dtype=float)
        return TWO_PI * self.pdf(theta) * np.sin(theta)

    def normalization(self) -> float:
        """Total f-measure of the cap by quadrature; 1 for a valid density."""
        return integrate_1d(lambda t: float(self.marginal(t)), self.theta0, math.pi, breakpoints=self.breakpoints)

    def describe(self) -> dict:
        return {"kind": self.kind, "theta0": self.theta0}


class UniformCap(CapDensity):
    """Constant density ``1 / (2 pi (1 + cos theta0))`` on the cap."""

    kind = "uniform"

    def __init__(self, theta0: float):
        theta0 = float(theta0)
        if not 0.0 <= theta0 < math.pi:
            raise DomainError(f"theta0={theta0!r} outside [0, pi)")
        self.theta0 = theta0
        # 1 + cos(theta0) without cancellation near pi
        self._c2 = math.cos(0.5 * theta0) ** 2
        self._height = 1.0 / (TWO_PI * 2.0 * self._c2)

    def __repr__(self):
        return f"UniformCap(theta0={self.theta0!r})"

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.where((theta >= self.theta0) & (theta <= math.pi), self._height, 0.0)

    def upper_measure(self, theta):
        theta = np.clip(np.asarray(theta, dtype=float), self.theta0, math.pi)
        return np.clip(np.cos(0.5 * theta) ** 2 / self._c2, 0.0, 1.0)

    def cdf(self, theta):
        theta = np.clip(np.asarray(theta, dtype=float), self.theta0, math.pi)
        # cos^2(t0/2) - cos^2(t/2) = sin((t - t0)/2) sin((t + t0)/2)
        num = np.sin(0.5 * (theta - self.theta0)) * np.sin(0.5 * (theta + self.theta0))
        return np.clip(num / self._c2, 0.0, 1.0)

    def sample_theta(self, u) -> np.ndarray:
        # upper measure V = 1 - u lies in (0, 1], so theta stays in [theta0, pi)
        v = 1.0 - np.asarray(u, dtype=float)
        return 2.0 * np.arccos(np.sqrt(v) * math.cos(0.5 * self.theta0))

    def boundary_angle_closed_form(self, gamma: float) -> float:
        """theta_b from cos(theta_b) = (1 + cos theta0) cos^2(gamma/2) - 1."""
        gamma = _check_gamma(gamma)
        c = 2.0 * self._c2 * _cos2_half(gamma) - 1.0
        return math.acos(min(1.0, max(-1.0, c)))


class TabulatedCap(CapDensity):
    """Piecewise-linear density through the nodes ``(thetas[k], values[k])``.

    The first node is the cap limit ``theta0`` and the last must be ``pi``.
    Values are rescaled so the cap has unit f-measure.  Measures of linear
    pieces against ``sin(theta)`` are integrated in closed form.
    """

    kind = "tabulated"

    def __init__(self, thetas: Sequence[float], values: Sequence[float], *, source: Optional[str] = None):
        t = np.asarray(thetas, dtype=float)
        f = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or t.size < 2:
            raise DomainError("tabulated density needs at least two (theta, f) nodes")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
            raise DomainError("tabulated density has non-finite entries")
        if np.any(np.diff(t) <= 0.0):
            raise DomainError("tabulated density abscissae must be strictly increasing")
        if t[0] < 0.0 or t[0] >= math.pi:
            raise DomainError(f"first abscissa {t[0]!r} must lie in [0, pi)")
        if abs(t[-1] - math.pi) > GRID_TOL:
            raise DomainError(f"last abscissa {t[-1]!r} must equal pi")
        if np.any(f < 0.0):
            raise DomainError("tabulated density has negative values")
        t = t.copy()
        t[-1] = math.pi
        self.theta0 = float(t[0])
        self.source = source
        self._t = t
        self._slope = np.diff(f) / np.diff(t)
        self._intercept = f[:-1] - self._slope * t[:-1]
        seg = self._segment_integral(np.arange(t.size - 1), t[:-1], t[1:]) * TWO_PI
        total = float(np.sum(seg))
        if not total > 0.0:
            raise DomainError("tabulated density integrates to zero")
        self._f = f / total
        self._slope = self._slope / total
        self._intercept = self._intercept / total
        seg = seg / total
        self._prefix = np.concatenate(([0.0], np.cumsum(seg)))
        self._suffix = np.concatenate((np.cumsum(seg[::-1])[::-1], [0.0]))

    def __repr__(self):
        return f"TabulatedCap(nodes={self._t.size}, theta0={self.theta0!r})"

    @property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self._t.copy(), self._f.copy()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self._t.tolist())

    def _antiderivative(self, k, theta):
        # d/dt [-A cos t + s (sin t - t cos t)] = (A + s t) sin t
        a = self._intercept[k]
        s = self._slope[k]
        return -a * np.cos(theta) + s * (np.sin(theta) - theta * np.cos(theta))

    def _segment_integral(self, k, lo, hi):
        return self._antiderivative(k, hi) - self._antiderivative(k, lo)

    def _segment(self, theta):
        return np.clip(np.searchsorted(self._t, theta, side="right") - 1, 0, self._t.size - 2)

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= self.theta0) & (theta <= math.pi)
        return np.where(inside, np.interp(theta, self._t, self._f), 0.0)

    def cdf(self, theta):
        theta = np.clip(np.asarray(theta, dtype=float), self.theta0, math.pi)
        k = self._segment(theta)
        part = TWO_PI * self._segment_integral(k, self._t[k], theta)
        return np.clip(self._prefix[k] + part, 0.0, 1.0)

    def upper_measure(self, theta):
        theta = np.clip(np.asarray(theta, dtype=float), self.theta0, math.pi)
        k = self._segment(theta)
        part = TWO_PI * self._segment_integral(k, theta, self._t[k + 1])
        return np.clip(self._suffix[k + 1] + part, 0.0, 1.0)

    def sample_theta(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self._prefix, u, side="right") - 1, 0, self._t.size - 2)
        return bisect_increasing_vec(self.cdf, u, self._t[k], self._t[k + 1], iterations=56)

    def describe(self) -> dict:
        out = super().describe()
        out["nodes"] = int(self._t.size)
        if self.source is not None:
            out["source"] = self.source
        return out


def _read_table(path, ncols: int) -> np.ndarray:
    try:
        data = np.loadtxt(path, dtype=float, comments="#", ndmin=2)
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None
    if data.shape[1] != ncols:
        raise DomainError(f"{path}: expected {ncols} whitespace-separated columns, got {data.shape[1]}")
    return data


def load_density_table(path) -> TabulatedCap:
    """Read a two-column ``theta f`` table (radians, strictly increasing theta)."""
    data = _read_table(path, 2)
    return TabulatedCap(data[:, 0], data[:, 1], source=str(path))


# ---------------------------------------------------------------------------
# detection profiles


class DetectionProfile:
    """Detection probability ``p(gamma, theta)`` of a hidden state at colatitude theta.

    ``gamma_func`` is set for profiles that do not depend on theta; only those
    make the factorized totals exact.
    """

    def __init__(
        self,
        func: Callable[[float, np.ndarray], np.ndarray],
        *,
        name: str,
        gamma_func: Optional[Callable[[float], float]] = None,
        theta_breakpoints: Sequence[float] = (),
        theta_min: float = 0.0,
    ):
        self._func = func
        self.name = name
        self.gamma_func = gamma_func
        self.theta_breakpoints = tuple(float(x) for x in theta_breakpoints)
        self.theta_min = float(theta_min)

    def __repr__(self):
        return f"DetectionProfile({self.name!r})"

    @property
    def theta_independent(self) -> bool:
        return self.gamma_func is not None

    def __call__(self, gamma: float, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        p = np.broadcast_to(np.asarray(self._func(gamma, theta), dtype=float), theta.shape)
        if p.size and (p.min() < -PROB_TOL or p.max() > 1.0 + PROB_TOL or not np.all(np.isfinite(p))):
            raise DomainError(f"detection profile {self.name!r} left [0, 1] at gamma={gamma!r}")
        return np.clip(p, 0.0, 1.0)

    @classmethod
    def constant(cls, value: float) -> "DetectionProfile":
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"constant detection probability {value!r} outside [0, 1]")
        return cls.from_gamma(lambda g: value, name=f"const:{value!r}")

    @classmethod
    def lossless(cls) -> "DetectionProfile":
        return cls.constant(1.0)

    @classmethod
    def cosine(cls) -> "DetectionProfile":
        """g(gamma) = (1 + cos gamma)/2; not symmetric under gamma -> pi - gamma."""
        return cls.from_gamma(lambda g: 0.5 * (1.0 + math.cos(g)), name="cosine")

    @classmethod
    def from_gamma(cls, g: Callable[[float], float], *, name: str) -> "DetectionProfile":
        return cls(lambda gamma, theta: np.full(np.shape(theta), float(g(gamma))), name=name, gamma_func=g)

    @classmethod
    def from_function(cls, p: Callable[[float, np.ndarray], np.ndarray], *, name: str) -> "DetectionProfile":
        return cls(p, name=name)

    @classmethod
    def tabulated(cls, gammas, thetas, table, *, source: Optional[str] = None) -> "DetectionProfile":
        """Bilinear interpolation on a rectilinear (gamma, theta) grid.

        The gamma grid must run from 0 to pi, the theta grid must end at pi,
        and the cap limit of any density used with it must not fall below the
        first theta node.
        """
        g = np.asarray(gammas, dtype=float)
        t = np.asarray(thetas, dtype=float)
        z = np.asarray(table, dtype=float)
        if g.size < 2 or t.size < 2 or z.shape != (g.size, t.size):
            raise DomainError("tabulated profile needs a full grid with at least two gamma and theta nodes")
        if np.any(np.diff(g) <= 0.0) or np.any(np.diff(t) <= 0.0):
            raise DomainError("tabulated profile abscissae must be strictly increasing")
        if abs(g[0]) > GRID_TOL or abs(g[-1] - math.pi) > GRID_TOL:
            raise DomainError("tabulated profile gamma grid must span [0, pi]")
        if t[0] < 0.0 or abs(t[-1] - math.pi) > GRID_TOL:
            raise DomainError("tabulated profile theta grid must lie in [0, pi] and end at pi")
        if not np.all(np.isfinite(z)) or z.min() < 0.0 or z.max() > 1.0:
            raise DomainError("tabulated detection probabilities must lie in [0, 1]")
        g = g.copy()
        t = t.copy()
        g[0], g[-1], t[-1] = 0.0, math.pi, math.pi

        def row(gamma: float) -> np.ndarray:
            j = int(np.clip(np.searchsorted(g, gamma, side="right") - 1, 0, g.size - 2))
            w = (gamma - g[j]) / (g[j + 1] - g[j])
            return (1.0 - w) * z[j] + w * z[j + 1]

        def func(gamma, theta):
            return np.interp(theta, t, row(gamma))

        gamma_func = None
        if np.all(z == z[:, :1]):
            gamma_func = lambda gamma: float(row(gamma)[0])
        name = f"file:{source}" if source else "tabulated"
        return cls(func, name=name, gamma_func=gamma_func, theta_breakpoints=t, theta_min=float(t[0]))

    def symmetric_at(self, cap: CapDensity, gamma: float) -> bool:
        return abs(detection_probability(cap, self, gamma) - detection_probability(cap, self, math.pi - gamma)) <= SYMMETRY_TOL


def load_profile_table(path) -> DetectionProfile:
    """Read a three-column ``gamma theta p`` table covering a full rectilinear grid.

    Rows are grouped by gamma (strictly increasing between groups) and list
    the same strictly increasing theta values within each group.
    """
    data = _read_table(path, 3)
    gammas = []
    for value in data[:, 0]:
        if not gammas or value != gammas[-1]:
            gammas.append(value)
    n_g = len(gammas)
    if n_g < 2 or data.shape[0] % n_g:
        raise DomainError(f"{path}: rows do not form a full (gamma, theta) grid")
    n_t = data.shape[0] // n_g
    block = data.reshape(n_g, n_t, 3)
    if np.any(block[:, :, 0] != block[:, :1, 0]):
        raise DomainError(f"{path}: rows must be grouped by gamma")
    thetas = block[0, :, 1]
    if np.any(block[:, :, 1] != thetas):
        raise DomainError(f"{path}: every gamma group must list the same theta values")
    return DetectionProfile.tabulated(block[:, 0, 0], thetas, block[:, :, 2], source=str(path))


# ---------------------------------------------------------------------------
# analytic quantities


@dataclass(frozen=True)
class HiddenState:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise DomainError(f"hidden theta={self.theta!r} outside [0, pi]")
        if not 0.0 <= self.phi < TWO_PI:
            raise DomainError(f"hidden phi={self.phi!r} outside [0, 2 pi)")


def _check_profile_covers(cap: CapDensity, det: DetectionProfile) -> None:
    if cap.theta0 < det.theta_min - GRID_TOL:
        raise DomainError(
            f"profile {det.name!r} starts at theta={det.theta_min!r}, above the cap limit {cap.theta0!r}"
        )


def cap_integral(cap: CapDensity, det: DetectionProfile, gamma: float, lo: float, hi: float) -> float:
    """f.p-measure of the band ``lo <= theta <= hi``: 2 pi * int f p sin(theta) dtheta."""
    lo = max(lo, cap.theta0)
    hi = min(hi, math.pi)
    if hi <= lo:
        return 0.0
    _check_profile_covers(cap, det)

    def integrand(t: float) -> float:
        return float(cap.marginal(t) * det(gamma, np.array(t)))

    bps = merge_breakpoints(cap.breakpoints, det.theta_breakpoints)
    return integrate_1d(integrand, lo, hi, breakpoints=bps)


def detection_probability(cap: CapDensity, det: DetectionProfile, gamma: float) -> float:
    gamma = _check_gamma(gamma)
    p = cap_integral(cap, det, gamma, cap.theta0, math.pi)
    return min(1.0, max(0.0, p))


def boundary_angle(cap: CapDensity, gamma: float) -> float:
    """Inner limit theta_b of C+ so that the f-measure of [theta_b, pi] is cos^2(gamma/2)."""
    gamma = _check_gamma(gamma)
    if gamma == 0.0:
        return cap.theta0
    if gamma == math.pi:
        return math.pi
    target = _cos2_half(gamma)
    return bisect_decreasing(lambda t: float(cap.upper_measure(t)), target, cap.theta0, math.pi)


def sample_hidden_states(cap: CapDensity, u_theta, u_phi) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF sample of theta and uniform phi from arrays of uniforms in [0, 1)."""
    return cap.sample_theta(u_theta), TWO_PI * np.asarray(u_phi, dtype=float)


def sample_hidden_state(cap: CapDensity, rng: np.random.Generator) -> HiddenState:
    theta, phi = sample_hidden_states(cap, np.array([rng.random()]), np.array([rng.random()]))
    return HiddenState(float(theta[0]), float(phi[0]))


def _gamma(v: BlochVector, u: BlochVector) -> float:
    if not v.is_pure or not u.is_pure:
        raise DomainError("state and measurement directions must be unit vectors")
    return angle_between(u, v)


def total_probabilities(v: BlochVector, u: BlochVector, cap: CapDensity, det: DetectionProfile) -> tuple[float, float, float]:
    """(P(o1), P(o2), P(detect)) with the conditional factor taken from the machine."""
    gamma = _gamma(v, u)
    p_detect = detection_probability(cap, det, gamma)
    mu1, mu2 = machine_probabilities(MachineState(v), ElasticExperiment(u))
    return p_detect * mu1, p_detect * mu2, p_detect


def microstate_probabilities(v: BlochVector, u: BlochVector, cap: CapDensity, det: DetectionProfile) -> tuple[float, float, float]:
    """(P(o1), P(o2), P(a0)) summed over hidden states in C+, C- and undetected.

    For theta-dependent profiles these are the probabilities the trial runner
    actually realizes; they agree with ``total_probabilities`` only when the
    profile is constant in theta.
    """
    gamma = _gamma(v, u)
    theta_b = boundary_angle(cap, gamma)
    p_plus = cap_integral(cap, det, gamma, theta_b, math.pi)
    p_minus = cap_integral(cap, det, gamma, cap.theta0, theta_b)
    p_detect = detection_probability(cap, det, gamma)
    return p_plus, p_minus, max(0.0, 1.0 - p_detect)


def consistency_check(cap: CapDensity, det: DetectionProfile, gamma: float) -> float:
    """|P(C+ | detected) - cos^2(gamma/2)| for the given profile.

    Zero (to quadrature accuracy) for theta-independent profiles; a nonzero
    value measures how far the profile breaks the factorized totals.
    """
    gamma = _check_gamma(gamma)
    theta_b = boundary_angle(cap, gamma)
    total = cap_integral(cap, det, gamma, cap.theta0, math.pi)
    if total <= 0.0:
        raise DomainError(f"nothing is detected at gamma={gamma!r}; conditional ratio undefined")
    inner = cap_integral(cap, det, gamma, theta_b, math.pi)
    return abs(inner / total - _cos2_half(gamma))


def identified_spin_probabilities(rho, u: BlochVector, p_detect: float) -> tuple[float, float, float]:
    """Detection probability times the Born-rule probabilities, plus P(a0)."""
    if not isinstance(rho, DensityOperator2):
        rho = DensityOperator2.pure(rho)
    p_plus, p_minus = qm_probabilities(rho, u)
    return p_detect * p_plus, p_detect * p_minus, 1.0 - p_detect


def _check_weights(lambda1: float, lambda2: float) -> None:
    for name, lam in (("lambda1", lambda1), ("lambda2", lambda2)):
        if not 0.0 <= lam <= 1.0:
            raise DomainError(f"{name}={lam!r} outside [0, 1]")
    if abs(lambda1 + lambda2 - 1.0) > PROB_TOL:
        raise DomainError(f"mixture weights sum to {lambda1 + lambda2!r}, not 1")


def mixed_total_probabilities(
    lambda1: float, lambda2: float, v: BlochVector, u: BlochVector, cap: CapDensity, det: DetectionProfile
) -> tuple[float, float, float]:
    """Totals for the mixture of the pure states along ``v`` and ``-v``.

    Both components must share one detection probability, which for a common
    cap and profile means p_detect(gamma) = p_detect(pi - gamma); otherwise
    SymmetryError is raised.
    """
    _check_weights(lambda1, lambda2)
    t1 = total_probabilities(v, u, cap, det)
    t2 = total_probabilities(-v, u, cap, det)
    if abs(t1[2] - t2[2]) > SYMMETRY_TOL:
        raise SymmetryError(
            f"profile {det.name!r} detects v and -v differently ({t1[2]!r} vs {t2[2]!r})"
        )
    return tuple(lambda1 * a + lambda2 * b for a, b in zip(t1, t2))


# ---------------------------------------------------------------------------
# trial runners


def unified_outcomes(cap: CapDensity, det: DetectionProfile, gamma: float, u_theta, u_detect) -> np.ndarray:
    """Outcome codes for a batch of trials given uniforms for theta and detection."""
    gamma = _check_gamma(gamma)
    theta = cap.sample_theta(u_theta)
    detected = np.asarray(u_detect, dtype=float) < det(gamma, theta)
    theta_b = boundary_angle(cap, gamma)
    codes = np.where(theta >= theta_b, Outcome.O1, Outcome.O2)
    return np.where(detected, codes, Outcome.A0).astype(np.int8)


def mixed_outcomes(
    lambda1: float, cap: CapDensity, det: DetectionProfile, gamma: float, u_mix, u_theta, u_detect
) -> np.ndarray:
    u_mix = np.asarray(u_mix, dtype=float)
    u_theta = np.asarray(u_theta, dtype=float)
    u_detect = np.asarray(u_detect, dtype=float)
    first = u_mix < lambda1
    out = np.empty(u_mix.shape, dtype=np.int8)
    for mask, g in ((first, gamma), (~first, math.pi - gamma)):
        if mask.any():
            out[mask] = unified_outcomes(cap, det, g, u_theta[mask], u_detect[mask])
    return out


def run_unified_trial(
    v: BlochVector, u: BlochVector, cap: CapDensity, det: DetectionProfile, rng: np.random.Generator
) -> Outcome:
    gamma = _gamma(v, u)
    u_theta, u_detect = rng.random(), rng.random()
    return Outcome(int(unified_outcomes(cap, det, gamma, np.array([u_theta]), np.array([u_detect]))[0]))


def run_mixed_trial(
    lambda1: float,
    lambda2: float,
    v: BlochVector,
    u: BlochVector,
    cap: CapDensity,
    det: DetectionProfile,
    rng: np.random.Generator,
) -> Outcome:
    _check_weights(lambda1, lambda2)
    direction = v if rng.random() < lambda1 else -v
    return run_unified_trial(direction, u, cap, det, rng)
