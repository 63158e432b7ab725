"""Approximate average delivery rates of the typical macro and small-cell user.

Every interference Laplace transform, the exclusion-ball correction, the
cluster integral and the factors B1, B2, C1, C2, C3 are evaluated here by
quadrature. Inner radial integrals of the form

    int_0^rho r dr / (1 + r^alpha / c)

have the closed form (rho^2 / 2) 2F1(1, 2/alpha; 1 + 2/alpha; -rho^alpha / c),
which turns every integral over a ball into a one-dimensional angular one.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .params import NetworkParams, Topology, derived_intensities, distance_law
from .specfun import (DEFAULT_QUAD, QuadratureSpec, hyp2f1_neg, integrate_1d,
                      integrate_1d_vec, integrate_plane)


@dataclass(frozen=True)
class TheoryOptions:
    """Switches for the readings of the closed forms that are open to interpretation."""

    # keep the exp(-(e^tau - 1) r^alpha / P) factor in the B1/C1 integrands
    include_leading_factor: bool = True
    # integrate the serving distance over [0, inf) instead of [0, R_c]
    integrate_to_infinity: bool = False
    # use (1 - gamma) in the small-cell backhaul factor C2
    use_one_minus_gamma_for_su: bool = False
    # use tau_sc instead of tau_mc in the capacity-aided C2
    c2_cap_use_tau_sc: bool = False
    nu_grid_nodes: int = 64


DEFAULT_OPTIONS = TheoryOptions()


@dataclass
class TheoremBreakdown:
    factors: dict
    avg_rate: float
    topology: Topology
    tier: str
    variant: str = "WithCache"
    flags: tuple = field(default_factory=tuple)


# --- elementary pieces -------------------------------------------------------

def unbounded_ppp_term(s: float, P: float, alpha: float) -> float:
    """int over R^2 of dx / (1 + |x|^alpha / (s P)) = (sP)^(2/a) pi^2 (2/a) / sin(2 pi / a)."""
    if s <= 0:
        return 0.0
    delta = 2.0 / alpha
    return (s * P) ** delta * math.pi ** 2 * delta / math.sin(math.pi * delta)


def disk_radial_integral(rho, c: float, alpha: float):
    """int_0^rho r dr / (1 + r^alpha / c), vectorized over ``rho``."""
    rho = np.asarray(rho, dtype=float)
    if c <= 0:
        return np.zeros_like(rho) if rho.ndim else 0.0
    with np.errstate(over="ignore"):
        x = -(rho ** alpha) / c
    x = np.where(np.isfinite(x), x, -1e300)
    delta = 2.0 / alpha
    return 0.5 * rho ** 2 * hyp2f1_neg(delta, 1.0 + delta, x)


def disk_tail_integral(rho, c: float, alpha: float):
    """int_rho^inf r dr / (1 + r^alpha / c) for rho > 0, vectorized over ``rho``."""
    rho = np.asarray(rho, dtype=float)
    delta = 2.0 / alpha
    x = -c * rho ** (-alpha)
    return c * rho ** (2.0 - alpha) / (alpha - 2.0) * hyp2f1_neg(1.0 - delta, 2.0 - delta, x)


def _inside_integrand(phi, c, d, R, alpha):
    # origin inside (or on) the ball: boundary distance along direction phi
    rho = d * np.cos(phi) + np.sqrt(np.maximum(R * R - (d * np.sin(phi)) ** 2, 0.0))
    return disk_radial_integral(np.maximum(rho, 0.0), c, alpha)


def _outside_integrand(theta, c, d, R, alpha):
    # origin outside the ball; sin(phi) = (R/d) sin(theta) keeps the integrand smooth
    sphi = (R / d) * np.sin(theta)
    cphi = np.sqrt(1.0 - sphi ** 2)
    half = R * np.cos(theta)
    rho_near = np.maximum(d * cphi - half, 0.0)
    rho_far = d * cphi + half
    # both edges past the kernel scale: difference of tails avoids cancellation
    tail = rho_near ** alpha > c
    span = np.where(
        tail,
        disk_tail_integral(np.where(tail, rho_near, 1.0), c, alpha)
        - disk_tail_integral(np.where(tail, rho_far, 2.0), c, alpha),
        disk_radial_integral(rho_far, c, alpha) - disk_radial_integral(rho_near, c, alpha))
    return np.maximum(span, 0.0) * (R / d) * np.cos(theta) / cphi


def ball_integral(c: float, d: float, R: float, alpha: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """int over B(y, R), |y| = d, of dx / (1 + |x|^alpha / c)."""
    if c <= 0:
        return 0.0
    if d <= R:
        pts = [math.pi / 2] if d > 0.5 * R else None
        half = integrate_1d(lambda phi: float(_inside_integrand(phi, c, d, R, alpha)), 0.0, math.pi, q,
                            points=pts)
    else:
        half = integrate_1d(lambda th: float(_outside_integrand(th, c, d, R, alpha)), 0.0, math.pi / 2, q)
    return 2.0 * half


def ball_integral_many(c: float, ds: np.ndarray, R: float, alpha: float,
                       q: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Vectorized :func:`ball_integral` over many centre distances."""
    ds = np.asarray(ds, dtype=float)
    out = np.zeros_like(ds)
    if c <= 0 or ds.size == 0:
        return out
    inside = ds <= R
    if np.any(inside):
        di = ds[inside]
        out[inside] = 2.0 * integrate_1d_vec(lambda phi: _inside_integrand(phi, c, di, R, alpha),
                                             0.0, math.pi, q, points=[math.pi / 2])
    if np.any(~inside):
        do = ds[~inside]
        out[~inside] = 2.0 * integrate_1d_vec(lambda th: _outside_integrand(th, c, do, R, alpha),
                                              0.0, math.pi / 2, q)
    return out


def laplace_beyond(s: float, r: float, lam: float, P: float, alpha: float) -> float:
    """Laplace transform of PPP interference from interferers farther than ``r``."""
    if s <= 0:
        return 1.0
    delta = 2.0 / alpha
    x = -s * P * r ** (-alpha)
    expo = s * math.pi * lam * P * delta / (1.0 - delta) * r ** (2.0 - alpha)
    return math.exp(-expo * hyp2f1_neg(1.0 - delta, 2.0 - delta, x))


def a_factor(s: float, r: float, R_c: float, P: float, alpha: float,
             q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Exclusion-ball term: (1 / (pi R_c^2)) times the ball integral for a user at distance r <= R_c from the centre."""
    if r > R_c:
        raise ValueError("a_factor requires r <= R_c")
    if r < 0:
        raise ValueError("r must be non-negative")
    return ball_integral(s * P, r, R_c, alpha, q) / (math.pi * R_c ** 2)


def nu_integral(s: float, d: float, R_c: float, P_sc: float, alpha: float,
                q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Mean interference-kernel value of a uniform point in a ball whose centre is ``d`` away."""
    return ball_integral(s * P_sc, d, R_c, alpha, q) / (math.pi * R_c ** 2)


# --- Laplace transforms -----------------------------------------------------

def laplace_mm(s: float, r: float, p: NetworkParams) -> float:
    """Macro interference at a macro user served from distance r."""
    return laplace_beyond(s, r, p.lambda_mc, p.P_mc, p.alpha)


def _hole_corrected(s, r, lam, P_int, p, q):
    if s <= 0:
        return 1.0
    hole = ball_integral(s * P_int, r, p.R_c, p.alpha, q)
    expo = lam * (unbounded_ppp_term(s, P_int, p.alpha) - hole)
    return math.exp(-max(expo, 0.0))


def laplace_sm_cov(s: float, r_mc: float, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Small-cell interference at a macro user; candidate SBSs minus the serving MBS's hole."""
    return _hole_corrected(s, r_mc, p.lambda_sc_prime, p.P_sc, p, q)


def laplace_ss_cov(s: float, r_sc: float, p: NetworkParams) -> float:
    return laplace_beyond(s, r_sc, p.lambda_sc_prime, p.P_sc, p.alpha)


def laplace_ms_cov(s: float, r_sc: float, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Macro interference at a small-cell user; no MBS within R_c of the serving SBS."""
    return _hole_corrected(s, r_sc, p.lambda_mc, p.P_mc, p, q)


def laplace_ms_cap(s: float, p: NetworkParams) -> float:
    if s <= 0:
        return 1.0
    return math.exp(-p.lambda_mc * unbounded_ppp_term(s, p.P_mc, p.alpha))


class NuTable:
    """nu(s, .) tabulated on a geometric radial grid.

    Between nodes the log-log values are interpolated with a monotone cubic;
    below the first node linearly towards d = 0; beyond the last node the
    d^-alpha far-field law is extrapolated from the final node.
    """

    def __init__(self, s: float, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD, nodes: int = 64):
        R, a = p.R_c, p.alpha
        c = s * p.P_sc
        self.alpha = a
        # far edge: well past both the cluster radius and the kernel scale
        d_hi = 1e4 * max(R, c ** (1.0 / a))
        self.d = np.geomspace(R * 1e-2, d_hi, nodes - 1)
        vals = ball_integral_many(c, np.concatenate(([0.0], self.d)), R, a, q) / (math.pi * R * R)
        self.nu0 = float(vals[0])
        self.v = vals[1:]
        self.v = np.maximum(self.v, np.finfo(float).tiny)
        self._interp = PchipInterpolator(np.log(self.d), np.log(self.v))

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        out = np.empty_like(d)
        lo = d < self.d[0]
        hi = d > self.d[-1]
        mid = ~(lo | hi)
        out[lo] = self.nu0 + (self.v[0] - self.nu0) * d[lo] / self.d[0]
        out[mid] = np.exp(self._interp(np.log(d[mid])))
        out[hi] = self.v[-1] * (self.d[-1] / d[hi]) ** self.alpha
        return out if out.ndim else float(out)


@functools.lru_cache(maxsize=4096)
def _nu_table(s: float, p: NetworkParams, q: QuadratureSpec, nodes: int) -> NuTable:
    return NuTable(s, p, q, nodes)


def _cluster_void_integral(s, p, q, nodes):
    # int over R^2 of (1 - exp(-c_bar nu(s, y))) dy
    tab = _nu_table(s, p, q, nodes)
    return integrate_plane(lambda d: -math.expm1(-p.c_bar * tab(d)), q, radial=True, scale=p.R_c)


def laplace_sm_cap(s: float, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD,
                   opts: TheoryOptions = DEFAULT_OPTIONS) -> float:
    """Clustered small-cell interference at a macro user."""
    if s <= 0:
        return 1.0
    return math.exp(-p.lambda_sc_prime * _cluster_void_integral(s, p, q, opts.nu_grid_nodes))


def laplace_ss_cap(s: float, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD,
                   opts: TheoryOptions = DEFAULT_OPTIONS) -> float:
    """Clustered small-cell interference at a user inside a representative cluster."""
    if s <= 0:
        return 1.0
    tab = _nu_table(s, p, q, opts.nu_grid_nodes)
    R = p.R_c
    own = integrate_1d(lambda d: math.exp(-p.c_bar * tab(d)) * 2.0 * d / R ** 2, 0.0, R, q)
    return laplace_sm_cap(s, p, q, opts) * own


# --- factors ----------------------------------------------------------------

def weibull_pdf(r: float, k: float, nu: float) -> float:
    if r < 0:
        return 0.0
    z = r / nu
    return (k / nu) * z ** (k - 1.0) * math.exp(-(z ** k))


def _coverage_integral(integrand, R_c: float, k: float, nu: float, r_star: float,
                       q: QuadratureSpec, to_infinity: bool) -> float:
    # r_star: where the leading factor equals 1/e; the integrand is concentrated below it
    pts = sorted({x for x in (r_star, 0.1 * r_star, 10 * r_star, nu) if 0 < x < R_c})
    value = integrate_1d(integrand, 0.0, R_c, q, points=pts or None)
    if to_infinity:
        value += integrate_1d(integrand, R_c, math.inf, q)
    return min(max(value, 0.0), 1.0)


def _s_of_r(tau: float, P: float, alpha: float, r: float) -> float:
    return math.expm1(tau) * r ** alpha / P


@functools.lru_cache(maxsize=256)
def _b1_cached(t: Topology, p: NetworkParams, q: QuadratureSpec, opts: TheoryOptions) -> float:
    k, nu = distance_law(p, t, "MU")

    def integrand(r):
        if r <= 0:
            return 0.0
        s = _s_of_r(p.tau_mc, p.P_mc, p.alpha, r)
        lead = math.exp(-s) if opts.include_leading_factor else 1.0
        if lead == 0.0:
            return 0.0
        if t is Topology.COVERAGE:
            l_sm = laplace_sm_cov(s, r, p, q)
        else:
            l_sm = laplace_sm_cap(s, p, q, opts)
        return lead * laplace_mm(s, r, p) * l_sm * weibull_pdf(r, k, nu)

    r_star = (p.P_mc / math.expm1(p.tau_mc)) ** (1.0 / p.alpha)
    return _coverage_integral(integrand, p.R_c, k, nu, r_star, q, opts.integrate_to_infinity)


@functools.lru_cache(maxsize=256)
def _c1_cached(t: Topology, p: NetworkParams, q: QuadratureSpec, opts: TheoryOptions) -> float:
    k, nu = distance_law(p, t, "SU")

    def integrand(r):
        if r <= 0:
            return 0.0
        s = _s_of_r(p.tau_sc, p.P_sc, p.alpha, r)
        lead = math.exp(-s) if opts.include_leading_factor else 1.0
        if lead == 0.0:
            return 0.0
        if t is Topology.COVERAGE:
            l_ss = laplace_ss_cov(s, r, p)
            l_ms = laplace_ms_cov(s, r, p, q)
        else:
            l_ss = laplace_ss_cap(s, p, q, opts)
            l_ms = laplace_ms_cap(s, p)
        return lead * l_ss * l_ms * weibull_pdf(r, k, nu)

    r_star = (p.P_sc / math.expm1(p.tau_sc)) ** (1.0 / p.alpha)
    return _coverage_integral(integrand, p.R_c, k, nu, r_star, q, opts.integrate_to_infinity)


def _downlink_key(p: NetworkParams) -> NetworkParams:
    # B1 / C1 do not depend on backhaul or caching parameters; normalise them for the cache
    return p.replace(gamma=0.5, mu=1.0, eta=2.0, F_sc=0.0, F=1.0, lambda_cr=1.0)


def factor_b1(t, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD,
              opts: TheoryOptions = DEFAULT_OPTIONS) -> float:
    """Downlink factor of the typical macro user."""
    return _b1_cached(Topology.parse(t), _downlink_key(p), q, opts)


def factor_c1(t, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD,
              opts: TheoryOptions = DEFAULT_OPTIONS) -> float:
    """Downlink factor of the typical small-cell user."""
    return _c1_cached(Topology.parse(t), _downlink_key(p), q, opts)


def _one_minus_exp(expo: float) -> float:
    if math.isinf(expo):
        return 1.0
    return min(max(-math.expm1(-expo), 0.0), 1.0)


def factor_b2(t, p: NetworkParams) -> float:
    """Backhaul factor of the typical macro user; gamma = 0 yields the limit 1."""
    t = Topology.parse(t)
    if t is Topology.COVERAGE:
        lam_sc = derived_intensities(p, t).lambda_sc
        num = p.tau_mc * p.lambda_cr * (p.lambda_mc + lam_sc)
        den = p.mu * p.gamma * p.lambda_mc ** 2 * p.lambda_ut
    else:
        num = p.tau_mc * p.lambda_cr
        den = p.mu * p.gamma * p.macro_user_density
    return _one_minus_exp(math.inf if den == 0 else num / den)


def factor_c2(t, p: NetworkParams, opts: TheoryOptions = DEFAULT_OPTIONS) -> float:
    """Backhaul factor of the typical small-cell user (lambda_mr read as lambda_mc)."""
    t = Topology.parse(t)
    g = 1.0 - p.gamma if opts.use_one_minus_gamma_for_su else p.gamma
    d = derived_intensities(p, t)
    if t is Topology.COVERAGE:
        num = p.tau_sc * p.lambda_cr * (p.lambda_mc + d.lambda_sc)
        den = p.mu * g * d.lambda_sc ** 2 * p.lambda_ut
    else:
        tau = p.tau_sc if opts.c2_cap_use_tau_sc else p.tau_mc
        num = tau * p.lambda_cr
        den = p.mu * g * d.lambda_ut_s
    return _one_minus_exp(math.inf if den == 0 else num / den)


def factor_c3(p: NetworkParams) -> float:
    """Probability that a power-law request falls among the F_sc cached chunks."""
    return -math.expm1((1.0 - p.eta) * math.log1p(p.F_sc))


def compose_su(tau_sc: float, c1: float, c2: float, c3: float) -> float:
    return tau_sc * c1 * c2 + tau_sc * c1 * c3 - tau_sc * c1 * c2 * c3


def _flags(t: Topology, p: NetworkParams, tier: str, opts: TheoryOptions) -> tuple:
    out = []
    if tier == "MU":
        if p.gamma == 0:
            out.append("gamma_zero_limit")
    else:
        g = 1.0 - p.gamma if opts.use_one_minus_gamma_for_su else p.gamma
        if g == 0:
            out.append("gamma_zero_limit")
        if t is Topology.COVERAGE:
            out.append("lambda_mr_as_lambda_mc")
        elif not opts.c2_cap_use_tau_sc:
            out.append("c2_cap_tau_mc_literal")
        if opts.use_one_minus_gamma_for_su:
            out.append("su_backhaul_one_minus_gamma")
    if opts.include_leading_factor:
        out.append("leading_factor_literal")
    if opts.integrate_to_infinity:
        out.append("serving_distance_to_infinity")
    return tuple(out)


def avg_rate_mu(t, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD,
                opts: TheoryOptions = DEFAULT_OPTIONS) -> TheoremBreakdown:
    t = Topology.parse(t)
    b1 = factor_b1(t, p, q, opts)
    b2 = factor_b2(t, p)
    return TheoremBreakdown({"B1": b1, "B2": b2}, p.tau_mc * b1 * b2, t, "MU", "WithCache",
                            _flags(t, p, "MU", opts))


def avg_rate_su(t, p: NetworkParams, q: QuadratureSpec = DEFAULT_QUAD,
                opts: TheoryOptions = DEFAULT_OPTIONS, cache: bool = True) -> TheoremBreakdown:
    """Typical small-cell user; ``cache=False`` gives the no-cache variant (C3 = 0)."""
    t = Topology.parse(t)
    c1 = factor_c1(t, p, q, opts)
    c2 = factor_c2(t, p, opts)
    c3 = factor_c3(p) if cache else 0.0
    return TheoremBreakdown({"C1": c1, "C2": c2, "C3": c3}, compose_su(p.tau_sc, c1, c2, c3), t, "SU",
                            "WithCache" if cache else "NoCache", _flags(t, p, "SU", opts))
