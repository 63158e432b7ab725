"""Scenario parameterization for the two-tier cache-enabled network.

All densities are in points/m^2, distances in meters, powers in Watts and
rates in nats/s/Hz (the delivery condition is ``log(1 + SIR) > tau`` with the
natural log).
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Optional


class Topology(str, enum.Enum):
    COVERAGE = "cov"
    CAPACITY = "cap"

    @classmethod
    def parse(cls, value: "str | Topology") -> "Topology":
        if isinstance(value, Topology):
            return value
        key = str(value).strip().lower()
        aliases = {
            "cov": cls.COVERAGE, "coverage": cls.COVERAGE, "coverageaided": cls.COVERAGE,
            "cap": cls.CAPACITY, "capacity": cls.CAPACITY, "capacityaided": cls.CAPACITY,
        }
        try:
            return aliases[key.replace("-", "").replace("_", "")]
        except KeyError:
            raise ValueError(f"unknown topology {value!r}") from None


class ParameterError(ValueError):
    """Raised when a parameter set violates one or more model constraints."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class NetworkParams:
    lambda_cr: float = 1.0e-5
    lambda_mc: float = 1.5e-5
    lambda_sc_prime: float = 5.5e-5
    lambda_ut: float = 12.8e-5
    # None -> lambda_mc (one MU per MBS on average)
    lambda_ut_m: Optional[float] = None
    c_bar: float = 3.0
    R_c: float = 80.0
    P_mc: float = 16.0
    P_sc: float = 3.0
    alpha: float = 4.0
    tau_mc: float = 4.0
    tau_sc: float = 4.0
    mu: float = 30.0
    gamma: float = 0.6
    eta: float = 1.45
    F_sc: float = 4.0
    F: float = 500.0
    dist_k: Optional[float] = None
    dist_nu: Optional[float] = None

    def replace(self, **changes) -> "NetworkParams":
        return dataclasses.replace(self, **changes)

    @property
    def macro_user_density(self) -> float:
        return self.lambda_mc if self.lambda_ut_m is None else self.lambda_ut_m

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(NetworkParams))


def fig3_params() -> NetworkParams:
    """Coverage-aided parameter set of the gamma / storage sweeps."""
    return NetworkParams(
        lambda_cr=1.0e-5, lambda_mc=1.5e-5, lambda_sc_prime=5.5e-5, lambda_ut=12.8e-5,
        P_mc=16.0, P_sc=3.0, tau_mc=4.0, tau_sc=4.0, alpha=4.0, R_c=80.0,
        mu=30.0, gamma=0.6, F=500.0, F_sc=4.0, eta=1.45,
    )


def fig4_params() -> NetworkParams:
    """Capacity-aided parameter set of the gamma / storage sweeps."""
    return NetworkParams(
        lambda_cr=1.0e-5, lambda_mc=1.5e-5, lambda_sc_prime=1.5e-5, lambda_ut_m=3.0e-5,
        c_bar=3.0, P_mc=16.0, P_sc=3.0, tau_mc=4.0, tau_sc=4.0, alpha=4.0, R_c=80.0,
        mu=30.0, gamma=0.6, F=500.0, F_sc=4.0, eta=1.45,
    )


def _violations(p: NetworkParams, t: "Topology | None") -> list[str]:
    out = []
    positive = ("lambda_cr", "lambda_mc", "lambda_sc_prime", "lambda_ut", "c_bar", "R_c",
                "P_mc", "P_sc", "tau_mc", "tau_sc", "mu")
    for name in positive:
        v = getattr(p, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            out.append(f"{name} must be a finite positive number (got {v!r})")
    for name in ("lambda_ut_m", "dist_k", "dist_nu"):
        v = getattr(p, name)
        if v is not None and not (math.isfinite(v) and v > 0):
            out.append(f"{name} must be positive when given (got {v!r})")
    if t is Topology.COVERAGE and p.lambda_sc_prime <= p.lambda_mc:
        out.append("lambda_sc_prime must exceed lambda_mc")
    if not p.alpha > 2:
        out.append("alpha must exceed 2")
    if not 0.0 <= p.gamma <= 1.0:
        out.append("gamma out of [0,1]")
    if not p.eta > 1:
        out.append("eta must exceed 1")
    if not p.F_sc >= 0:
        out.append("F_sc must be non-negative")
    if not p.F > p.F_sc:
        out.append("F must exceed F_sc")
    return out


def validate(p: NetworkParams, t=None) -> NetworkParams:
    """Return ``p`` unchanged, or raise :class:`ParameterError` listing every violation.

    The hole process needs lambda_sc_prime > lambda_mc, so that constraint is
    only checked when ``t`` is the coverage-aided topology.
    """
    problems = _violations(p, None if t is None else Topology.parse(t))
    if problems:
        raise ParameterError(problems)
    return p


@dataclass(frozen=True)
class DerivedIntensities:
    lambda_sc: float
    lambda_ut_s: float
    lambda_ut_total: float


def derived_intensities(p: NetworkParams, t: Topology) -> DerivedIntensities:
    t = Topology.parse(t)
    lambda_ut_s = p.c_bar / (math.pi * p.R_c ** 2)
    if t is Topology.COVERAGE:
        lambda_sc = p.lambda_sc_prime * math.exp(-p.lambda_mc * math.pi * p.R_c ** 2)
        total = p.lambda_ut
    else:
        lambda_sc = p.lambda_sc_prime * p.c_bar
        total = p.lambda_mc + lambda_sc
    return DerivedIntensities(lambda_sc=lambda_sc, lambda_ut_s=lambda_ut_s, lambda_ut_total=total)


def distance_law(p: NetworkParams, t: Topology, tier: str) -> tuple[float, float]:
    """Weibull (shape, scale) of the serving distance for ``tier`` in {"MU", "SU"}.

    The default is the nearest-point law of a PPP with the serving tier's
    density: shape 2, scale (pi * lambda)^(-1/2).
    """
    tier = tier.upper()
    if tier == "MU":
        lam = p.lambda_mc
    elif tier == "SU":
        lam = derived_intensities(p, t).lambda_sc
    else:
        raise ValueError(f"unknown tier {tier!r}")
    k = 2.0 if p.dist_k is None else p.dist_k
    nu = (math.pi * lam) ** -0.5 if p.dist_nu is None else p.dist_nu
    return k, nu
