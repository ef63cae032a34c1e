"""Quadrature and bisection helpers.

Both are thin: quadrature delegates to QUADPACK through scipy and adds an
absolute-error contract; bisection is written out because the samplers need a
vectorised version that brackets many roots at once.
"""

from __future__ import annotations

import warnings
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from .errors import QuadratureError

QUAD_ABS_TOL = 1e-9


def integrate_1d(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    breakpoints: Iterable[float] = (),
    abs_tol: float = QUAD_ABS_TOL,
) -> float:
    """Integrate ``func`` over ``[a, b]`` with an absolute error below ``abs_tol``.

    Panels are driven well past ``abs_tol``; ``abs_tol`` is only the failure
    threshold for the summed error estimate.

    The interval is split at every breakpoint strictly inside it so that kinks
    of piecewise-linear tables never fall inside a Gauss-Kronrod panel.
    Raises QuadratureError when QUADPACK reports trouble or the accumulated
    error estimate exceeds ``abs_tol``.
    """
    if b < a:
        return -integrate_1d(func, b, a, breakpoints=breakpoints, abs_tol=abs_tol)
    if b == a:
        return 0.0
    inner = sorted({float(x) for x in breakpoints if a < x < b})
    edges = [a, *inner, b]
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, err, info = integrate.quad(
                func, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1
            )[:3]
        if not np.isfinite(value):
            raise QuadratureError(
                f"non-finite integral on [{lo}, {hi}]", estimate=value, abserr=err, info=info
            )
        total += value
        total_err += err
    if total_err > abs_tol:
        raise QuadratureError(
            f"quadrature error estimate {total_err:.3e} exceeds {abs_tol:.1e} on [{a}, {b}]",
            estimate=total,
            abserr=total_err,
        )
    return total


def bisect_decreasing(
    func: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    *,
    xtol: float = 0.0,
    max_iter: int = 200,
) -> float:
    """Solve ``func(x) = target`` for a nonincreasing ``func`` on ``[lo, hi]``.

    With the default ``xtol=0`` the bracket shrinks until the midpoint is no
    longer representable between its ends.
    """
    if func(lo) <= target:
        return lo
    if func(hi) >= target:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        if func(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisect_increasing_vec(
    func: Callable[[np.ndarray], np.ndarray],
    targets: np.ndarray,
    lo: float,
    hi: float,
    *,
    iterations: int = 64,
) -> np.ndarray:
    """Vectorised bisection for a nondecreasing ``func`` on the fixed bracket ``[lo, hi]``."""
    targets = np.asarray(targets, dtype=float)
    left = np.full(targets.shape, lo, dtype=float)
    right = np.full(targets.shape, hi, dtype=float)
    for _ in range(iterations):
        mid = 0.5 * (left + right)
        below = func(mid) < targets
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
    return 0.5 * (left + right)


def merge_breakpoints(*groups: Sequence[float]) -> tuple[float, ...]:
    return tuple(sorted({float(x) for g in groups for x in g}))
