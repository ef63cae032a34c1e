"""Exact spin-1/2 algebra: spinors, density operators and the Bloch map.

Units have hbar = 1, so spin components take the values +1/2 and -1/2.
Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

NORM_TOL = 1e-12
ORTHO_TOL = 1e-10
POLE_TOL = 1e-15

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class BlochVector:
    """A point of the closed unit ball: pure states on the sphere, mixtures inside."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"Bloch component {name} is not finite")
            object.__setattr__(self, name, value)
        if self.norm > 1.0 + NORM_TOL:
            raise DomainError(f"Bloch vector norm {self.norm!r} exceeds 1")

    @classmethod
    def from_array(cls, values) -> "BlochVector":
        x, y, z = (float(v) for v in values)
        return cls(x, y, z)

    @classmethod
    def from_angles(cls, theta: float, phi: float, radius: float = 1.0) -> "BlochVector":
        s = math.sin(theta)
        return cls(radius * s * math.cos(phi), radius * s * math.sin(phi), radius * math.cos(theta))

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    @property
    def is_pure(self) -> bool:
        return abs(self.norm - 1.0) <= NORM_TOL

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: "BlochVector") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def scaled(self, factor: float) -> "BlochVector":
        return BlochVector(factor * self.x, factor * self.y, factor * self.z)

    def __neg__(self) -> "BlochVector":
        return BlochVector(-self.x, -self.y, -self.z)

    def unit(self) -> "BlochVector":
        n = self.norm
        if n == 0.0:
            raise DomainError("zero vector has no direction")
        return BlochVector(self.x / n, self.y / n, self.z / n)

    def angles(self) -> tuple[float, float]:
        """Polar and azimuthal angle of the direction; phi is 0 on the z axis."""
        n = self.norm
        if n == 0.0:
            raise DomainError("zero vector has no direction")
        rho = math.hypot(self.x, self.y)
        theta = math.atan2(rho, self.z)
        # transverse residue below POLE_TOL is rounding from cos(pi/2)
        phi = math.atan2(self.y, self.x) % (2.0 * math.pi) if rho > POLE_TOL * n else 0.0
        return theta, phi


@dataclass(frozen=True)
class SpinState:
    """Normalized amplitudes on the sigma_z eigenbasis |+>, |->."""

    amplitude_plus: complex
    amplitude_minus: complex

    def __post_init__(self):
        a = complex(self.amplitude_plus)
        b = complex(self.amplitude_minus)
        object.__setattr__(self, "amplitude_plus", a)
        object.__setattr__(self, "amplitude_minus", b)
        norm2 = abs(a) ** 2 + abs(b) ** 2
        if abs(norm2 - 1.0) > NORM_TOL:
            raise DomainError(f"spin state is not normalized (|a|^2+|b|^2 = {norm2!r})")

    @classmethod
    def normalized(cls, a: complex, b: complex) -> "SpinState":
        n = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if n == 0.0:
            raise DomainError("zero vector is not a state")
        return cls(a / n, b / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.amplitude_plus, self.amplitude_minus], dtype=complex)

    def inner(self, other: "SpinState") -> complex:
        """<self|other>."""
        return (
            self.amplitude_plus.conjugate() * other.amplitude_plus
            + self.amplitude_minus.conjugate() * other.amplitude_minus
        )

    def same_ray(self, other: "SpinState", tol: float = 1e-12) -> bool:
        return abs(abs(self.inner(other)) - 1.0) <= tol

    def orthogonal(self) -> "SpinState":
        """The state orthogonal to this one; its Bloch vector is the antipode."""
        return SpinState(-self.amplitude_minus.conjugate(), self.amplitude_plus.conjugate())

    def projector(self) -> np.ndarray:
        psi = self.as_array()
        return np.outer(psi, psi.conj())


class DensityOperator2:
    """Hermitian, unit-trace, positive 2x2 operator."""

    __slots__ = ("_matrix",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DomainError(f"density operator must be 2x2, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError("density operator has non-finite entries")
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise DomainError("density operator is not Hermitian")
        if abs(np.trace(m) - 1.0) > NORM_TOL:
            raise DomainError(f"density operator trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -NORM_TOL:
            raise DomainError("density operator has a negative eigenvalue")
        m.setflags(write=False)
        self._matrix = m

    @classmethod
    def pure(cls, state: SpinState) -> "DensityOperator2":
        return cls(state.projector())

    @classmethod
    def from_bloch(cls, w: BlochVector) -> "DensityOperator2":
        return cls(0.5 * (IDENTITY + w.x * SIGMA_X + w.y * SIGMA_Y + w.z * SIGMA_Z))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def bloch_vector(self) -> BlochVector:
        m = self._matrix
        # Tr(rho sigma_k) for each Pauli matrix
        x = 2.0 * m[0, 1].real
        y = -2.0 * m[0, 1].imag
        z = (m[0, 0] - m[1, 1]).real
        return _clip_to_ball(x, y, z)

    def __repr__(self):
        return f"DensityOperator2({self._matrix.tolist()!r})"


def _clip_to_ball(x: float, y: float, z: float) -> BlochVector:
    n = math.sqrt(x * x + y * y + z * z)
    if 1.0 < n <= 1.0 + NORM_TOL:
        x, y, z = x / n, y / n, z / n
    return BlochVector(x, y, z)


def spinor_from_angles(theta: float, phi: float) -> SpinState:
    """cos(theta/2) e^{-i phi/2} |+> + sin(theta/2) e^{i phi/2} |->."""
    if not 0.0 <= theta <= math.pi:
        raise DomainError(f"theta={theta!r} outside [0, pi]")
    half = 0.5 * phi
    a = math.cos(0.5 * theta) * complex(math.cos(half), -math.sin(half))
    b = math.sin(0.5 * theta) * complex(math.cos(half), math.sin(half))
    return SpinState(a, b)


def bloch_map(state: SpinState) -> BlochVector:
    """Unit vector (sin t cos p, sin t sin p, cos t) of a pure state."""
    a, b = state.amplitude_plus, state.amplitude_minus
    norm2 = abs(a) ** 2 + abs(b) ** 2
    if norm2 == 0.0:
        raise DomainError("zero vector has no Bloch image")
    ab = a.conjugate() * b
    return _clip_to_ball(
        2.0 * ab.real / norm2, 2.0 * ab.imag / norm2, (abs(a) ** 2 - abs(b) ** 2) / norm2
    )


def bloch_angles(state: SpinState) -> tuple[float, float]:
    return bloch_map(state).angles()


def spin_operator(u: BlochVector) -> np.ndarray:
    """Spin component along the unit vector ``u``, (sigma . u) / 2."""
    if not u.is_pure:
        raise DomainError(f"measurement direction must be a unit vector, norm={u.norm!r}")
    return 0.5 * (u.x * SIGMA_X + u.y * SIGMA_Y + u.z * SIGMA_Z)


def spin_projectors(u: BlochVector) -> tuple[np.ndarray, np.ndarray]:
    """Eigenprojectors of spin_operator(u) for the eigenvalues +1/2 and -1/2."""
    a = spin_operator(u)
    return 0.5 * IDENTITY + a, 0.5 * IDENTITY - a


def qm_probabilities(rho: DensityOperator2, u: BlochVector) -> tuple[float, float]:
    """Born-rule probabilities Tr(rho P+), Tr(rho P-) for spin along ``u``."""
    if isinstance(rho, SpinState):
        rho = DensityOperator2.pure(rho)
    p_plus_op, _ = spin_projectors(u)
    p_plus = float(np.trace(rho.matrix @ p_plus_op).real)
    p_plus = min(1.0, max(0.0, p_plus))
    return p_plus, 1.0 - p_plus


def angle_between(a: BlochVector, b: BlochVector) -> float:
    na, nb = a.norm, b.norm
    if na == 0.0 or nb == 0.0:
        raise DomainError("angle undefined for a zero vector")
    c = a.dot(b) / (na * nb)
    return math.acos(min(1.0, max(-1.0, c)))


def density_from_mixture(
    lambda1: float, psi1: SpinState, lambda2: float, psi2: SpinState
) -> DensityOperator2:
    """lambda1 |psi1><psi1| + lambda2 |psi2><psi2| for orthogonal psi1, psi2."""
    for name, lam in (("lambda1", lambda1), ("lambda2", lambda2)):
        if not 0.0 <= lam <= 1.0:
            raise DomainError(f"{name}={lam!r} outside [0, 1]")
    if abs(lambda1 + lambda2 - 1.0) > NORM_TOL:
        raise DomainError(f"weights sum to {lambda1 + lambda2!r}, not 1")
    if abs(psi1.inner(psi2)) > ORTHO_TOL:
        raise DomainError("mixture components are not orthogonal")
    m = lambda1 * psi1.projector() + lambda2 * psi2.projector()
    # symmetrize away rounding so the Hermitian check is exact
    return DensityOperator2(0.5 * (m + m.conj().T))


def directions_for_gamma(gamma: float) -> tuple[BlochVector, BlochVector]:
    """A state direction v = z and a measurement direction u at angle ``gamma`` from it."""
    if not 0.0 <= gamma <= math.pi:
        raise DomainError(f"gamma={gamma!r} outside [0, pi]")
    return BlochVector(0.0, 0.0, 1.0), BlochVector(math.sin(gamma), 0.0, math.cos(gamma))
