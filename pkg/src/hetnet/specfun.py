"""Special functions and quadrature used by the analytic expressions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate


class QuadratureError(ArithmeticError):
    """Quadrature or series evaluation failed to reach the requested accuracy."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    truncation_threshold: float = 1e-12

    def __post_init__(self):
        if not (0 < self.rel_tol < 1):
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.abs_tol <= 0 or self.truncation_threshold <= 0 or self.max_subdivisions <= 0:
            raise ValueError("quadrature tolerances and budgets must be positive")


DEFAULT_QUAD = QuadratureSpec()

_MAX_TERMS = 500
_SERIES_EPS = 1e-17


def _series_2f1(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    # plain Gauss series, only called with 0 <= z <= 1/2
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(_MAX_TERMS):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1))) * z
        total = total + term
        if not np.any(np.abs(term) > _SERIES_EPS * np.abs(total)):
            return total
    raise QuadratureError("hypergeometric series did not converge")


def hyp2f1_neg(b: float, c: float, x):
    """Gauss hypergeometric function 2F1(1, b; c; x) for x <= 0 and c = b + 1.

    After the Pfaff transformation the argument is z = x/(x-1) in [0, 1).
    For z <= 1/2 the Gauss series in z is summed directly; for z > 1/2 the
    connection formula around z = 1 is used, which stays well conditioned
    as x -> -inf. Accepts scalars or arrays.
    """
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    if abs(c - (b + 1)) > 1e-12:
        raise ValueError("only the family c = b + 1 is supported")
    xa = np.asarray(x, dtype=float)
    if np.any(xa > 0) or np.any(np.isnan(xa)):
        raise ValueError("x must be <= 0")
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    out = np.empty_like(xa)

    w = 1.0 / (1.0 - xa)          # 1 - z, in (0, 1]
    z = -xa * w                   # x / (x - 1)
    near = z <= 0.5
    if np.any(near):
        out[near] = w[near] * _series_2f1(1.0, 1.0, c, z[near])
    far = ~near
    if np.any(far):
        wf, zf = w[far], z[far]
        regular = (b / (b - 1.0)) * _series_2f1(1.0, 1.0, 2.0 - b, wf)
        singular = wf ** (b - 1.0) * zf ** (-b) * (math.pi * b / math.sin(math.pi * b))
        out[far] = wf * (regular + singular)
    return float(out[0]) if scalar else out


def integrate_1d(f: Callable[[float], float], a: float, b: float, q: QuadratureSpec = DEFAULT_QUAD,
                 points=None) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over [a, b] (b may be inf)."""
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err, info = integrate.quad(
            f, a, b, epsabs=q.abs_tol, epsrel=q.rel_tol, limit=q.max_subdivisions,
            points=points, full_output=1)[:3]
    if not math.isfinite(value):
        raise QuadratureError(f"non-finite integral over [{a}, {b}]")
    tol = max(q.rel_tol * abs(value), q.abs_tol)
    # quad reports conservative error estimates; allow a modest safety margin
    if err > 100 * tol:
        raise QuadratureError(
            f"subdivision budget exhausted over [{a}, {b}]: value={value!r} err={err!r}")
    return float(value)


def integrate_1d_vec(f: Callable[[float], np.ndarray], a: float, b: float,
                     q: QuadratureSpec = DEFAULT_QUAD, points=None) -> np.ndarray:
    """Adaptive integral of a vector-valued ``f`` over a finite [a, b]."""
    res = integrate.quad_vec(f, a, b, epsabs=q.abs_tol, epsrel=q.rel_tol,
                             limit=q.max_subdivisions, points=points, full_output=True)
    value, err, info = res
    if not info.success:
        raise QuadratureError(f"vector quadrature failed over [{a}, {b}]: {info.message}")
    return np.asarray(value, dtype=float)


_HARD_RADIUS_CAP = 1e12


def integrate_plane(f: Callable, q: QuadratureSpec = DEFAULT_QUAD, radial: bool = False,
                    scale: float = 1.0) -> float:
    """Integral of ``f(r, phi)`` over the plane in polar coordinates.

    The area element ``r dr dphi`` is applied here, not by the caller. With
    ``radial=True``, ``f`` is called as ``f(r)`` and the angular integral
    reduces to a factor 2*pi. The outer radius starts at ``scale`` and doubles
    until the newest annulus adds less than ``truncation_threshold`` times the
    accumulated value.
    """
    if radial:
        def ring(r):
            return 2.0 * math.pi * r * f(r)
    else:
        def ring(r):
            return r * integrate_1d(lambda phi: f(r, phi), 0.0, 2.0 * math.pi, q)

    inner = 0.0
    outer = float(scale)
    total = integrate_1d(ring, inner, outer, q)
    while True:
        inner, outer = outer, 2.0 * outer
        if outer > _HARD_RADIUS_CAP:
            raise QuadratureError("no decaying tail found within the hard radius cap")
        piece = integrate_1d(ring, inner, outer, q)
        total += piece
        if abs(piece) <= q.truncation_threshold * abs(total) or (total == 0.0 and piece == 0.0):
            return total
