"""Generative simulation of the two-tier network and delivery-rate estimation.

Each realization draws its own substream from the master seed through
``SeedSequence(seed, spawn_key=(index, attempt))``, so results do not depend
on how realizations are split across worker processes.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .params import NetworkParams, Topology
from .pointprocess import (PointSet, Role, Window, hole_mask, nearest_many, sample_cox_users,
                           sample_mcp, sample_php, sample_ppp)

log = logging.getLogger(__name__)

MAX_REJECTION_RATE = 0.01
_TYPICAL_SU_TRIES = 10000


class EmptyTierError(RuntimeError):
    """A realization has no station of a tier the typical user needs."""


class RejectionLimitError(RuntimeError):
    pass


def substream(seed: int, index: int, attempt: int = 0) -> np.random.Generator:
    """Counter-based child stream for realization ``index`` (and redraw ``attempt``)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index), int(attempt))))


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    cap = os.environ.get("HETNET_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def default_window(p: NetworkParams, t: Topology, toroidal: bool = True) -> Window:
    t = Topology.parse(t)
    dens = [p.lambda_cr, p.lambda_mc, p.lambda_sc_prime]
    dens.append(p.lambda_ut if t is Topology.COVERAGE else p.macro_user_density)
    return Window.guarded(p.R_c, dens, toroidal=toroidal)


# --- scenario ---------------------------------------------------------------

@dataclass
class Scenario:
    topology: Topology
    params: NetworkParams
    window: Window
    cr: PointSet
    mbs: PointSet
    sbs: PointSet
    parents: Optional[PointSet]
    # coverage-aided: one homogeneous user set; capacity-aided: sus and mus
    users: Optional[PointSet]
    sus: Optional[PointSet]
    mus: Optional[PointSet]
    cr_capacity: np.ndarray
    rng: np.random.Generator = field(repr=False)


def generate_scenario(p: NetworkParams, t, stream: np.random.Generator, window: Optional[Window] = None,
                      sbs_tier: bool = True, with_users: bool = True) -> Scenario:
    """Draw every point set of one realization.

    Raises :class:`EmptyTierError` if the window holds no MBS, or no SBS
    while the small-cell tier is enabled.
    """
    t = Topology.parse(t)
    w = window or default_window(p, t)
    rng = stream
    cr = sample_ppp(p.lambda_cr, w, rng, Role.CR)
    mbs = sample_ppp(p.lambda_mc, w, rng, Role.MBS)
    parents = users = sus = mus = None
    if not sbs_tier:
        sbs = PointSet(Role.SBS)
    elif t is Topology.COVERAGE:
        sbs = sample_php(mbs, p.lambda_sc_prime, p.R_c, w, rng)
    else:
        parents, sbs = sample_mcp(p.lambda_sc_prime, p.c_bar, p.R_c, w, rng)
    if with_users:
        if t is Topology.COVERAGE:
            users = sample_ppp(p.lambda_ut, w, rng, Role.MU)
        elif parents is not None:
            sus, mus = sample_cox_users(parents, p.c_bar, p.R_c, p.macro_user_density, w, rng)
        else:
            mus = sample_ppp(p.macro_user_density, w, rng, Role.MU)
    cap = p.mu * rng.exponential(size=len(cr))
    if len(mbs) == 0 or (sbs_tier and len(sbs) == 0):
        raise EmptyTierError("realization without MBS or SBS in the window")
    return Scenario(t, p, w, cr, mbs, sbs, parents, users, sus, mus, cap, rng)


# --- hierarchical tree ------------------------------------------------------

@dataclass
class HierTree:
    """Nearest-neighbour association CR <- BS <- user.

    ``cr_of_mbs[i]`` is the CR serving MBS i; ``mbs_of_user[j]`` the MBS
    serving macro user j (likewise for the small-cell tier). Counts are
    per-CR (N_mc, N_sc) and per-BS (N_mu, N_su).
    """

    cr_of_mbs: np.ndarray
    cr_of_sbs: np.ndarray
    r_mc: np.ndarray
    r_sc: np.ndarray
    mu_points: np.ndarray
    su_points: np.ndarray
    mbs_of_user: np.ndarray
    sbs_of_user: np.ndarray
    r_mu: np.ndarray
    r_su: np.ndarray
    N_mc: np.ndarray
    N_sc: np.ndarray
    N_mu: np.ndarray
    N_su: np.ndarray

    def mbs_attached_to(self, cr_index: int) -> np.ndarray:
        return np.flatnonzero(self.cr_of_mbs == cr_index)

    def sbs_attached_to(self, cr_index: int) -> np.ndarray:
        return np.flatnonzero(self.cr_of_sbs == cr_index)

    def users_of_mbs(self, mbs_index: int) -> np.ndarray:
        return np.flatnonzero(self.mbs_of_user == mbs_index)

    def users_of_sbs(self, sbs_index: int) -> np.ndarray:
        return np.flatnonzero(self.sbs_of_user == sbs_index)


def build_tree(s: Scenario) -> HierTree:
    if len(s.cr) == 0:
        raise EmptyTierError("no central router in the window")
    w = s.window
    n_cr = len(s.cr)
    cr_of_mbs, r_mc = nearest_many(s.mbs.points, s.cr.points, w)
    if len(s.sbs):
        cr_of_sbs, r_sc = nearest_many(s.sbs.points, s.cr.points, w)
    else:
        cr_of_sbs, r_sc = np.zeros(0, dtype=np.int64), np.zeros(0)

    if s.topology is Topology.COVERAGE:
        pts = s.users.points if s.users is not None else np.empty((0, 2))
        i_m, d_m = nearest_many(pts, s.mbs.points, w)
        if len(s.sbs):
            i_s, d_s = nearest_many(pts, s.sbs.points, w)
            macro = d_m <= d_s
        else:
            i_s, d_s = np.zeros(len(pts), dtype=np.int64), np.full(len(pts), np.inf)
            macro = np.ones(len(pts), dtype=bool)
        mu_points, su_points = pts[macro], pts[~macro]
        mbs_of_user, r_mu = i_m[macro], d_m[macro]
        sbs_of_user, r_su = i_s[~macro], d_s[~macro]
    else:
        mu_points = s.mus.points if s.mus is not None else np.empty((0, 2))
        su_points = s.sus.points if s.sus is not None else np.empty((0, 2))
        mbs_of_user, r_mu = nearest_many(mu_points, s.mbs.points, w)
        if len(s.sbs) and len(su_points):
            sbs_of_user, r_su = nearest_many(su_points, s.sbs.points, w)
        else:
            sbs_of_user, r_su = np.zeros(0, dtype=np.int64), np.zeros(0)

    return HierTree(
        cr_of_mbs=cr_of_mbs, cr_of_sbs=cr_of_sbs, r_mc=r_mc, r_sc=r_sc,
        mu_points=mu_points, su_points=su_points,
        mbs_of_user=mbs_of_user, sbs_of_user=sbs_of_user, r_mu=r_mu, r_su=r_su,
        N_mc=np.bincount(cr_of_mbs, minlength=n_cr), N_sc=np.bincount(cr_of_sbs, minlength=n_cr),
        N_mu=np.bincount(mbs_of_user, minlength=len(s.mbs)),
        N_su=np.bincount(sbs_of_user, minlength=len(s.sbs)),
    )


# --- typical users and SIR --------------------------------------------------

def typical_su_position(s: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Location of the typical small-cell user.

    Capacity-aided: uniform in the ball of a uniformly chosen cluster.
    Coverage-aided: uniform in the window, conditioned on lying outside every
    exclusion ball and on the nearest station being an SBS.
    """
    w = s.window
    if s.topology is Topology.CAPACITY:
        if s.parents is None or len(s.parents) == 0:
            raise EmptyTierError("no cluster for the typical small-cell user")
        k = rng.integers(len(s.parents))
        r = s.params.R_c * math.sqrt(rng.random())
        th = rng.uniform(0.0, 2.0 * math.pi)
        return w.wrap(s.parents.points[k] + np.array([r * math.cos(th), r * math.sin(th)]))
    L = w.half_extent
    batch = 64
    for _ in range(_TYPICAL_SU_TRIES // batch):
        cand = rng.uniform(-L, L, size=(batch, 2))
        ok = hole_mask(cand, s.mbs.points, s.params.R_c, w)
        if not ok.any():
            continue
        cand = cand[ok]
        _, d_m = nearest_many(cand, s.mbs.points, w)
        _, d_s = nearest_many(cand, s.sbs.points, w)
        good = np.flatnonzero(d_s < d_m)
        if len(good):
            return cand[good[0]]
    raise EmptyTierError("could not place the typical small-cell user")


@dataclass
class SirDraw:
    sir: float
    serving_index: int
    serving_distance: float
    signal: float
    interference: float


def sir_sample(s: Scenario, tier: str, position=(0.0, 0.0), rng: Optional[np.random.Generator] = None,
               serving: Optional[int] = None) -> SirDraw:
    """One SIR draw at ``position`` with fresh Rayleigh fading on every link.

    The serving station is the nearest of the tier unless ``serving`` is given.
    """
    rng = rng or s.rng
    p, w = s.params, s.window
    tier = tier.upper()
    if tier == "MU":
        own, other, P_own, P_other = s.mbs.points, s.sbs.points, p.P_mc, p.P_sc
    elif tier == "SU":
        own, other, P_own, P_other = s.sbs.points, s.mbs.points, p.P_sc, p.P_mc
    else:
        raise ValueError(f"unknown tier {tier!r}")
    if len(own) == 0:
        raise EmptyTierError(f"no serving station for tier {tier}")
    d_own = w.distances(own, position)
    d_other = w.distances(other, position)
    i = int(np.argmin(d_own)) if serving is None else int(serving)
    if len(own) + len(other) < 2:
        raise EmptyTierError("no interferer in the window")
    fade_own = rng.exponential(size=len(own))
    fade_other = rng.exponential(size=len(other))
    with np.errstate(divide="ignore"):
        g_own = P_own * fade_own * d_own ** (-p.alpha)
        g_other = P_other * fade_other * d_other ** (-p.alpha)
    signal = float(g_own[i])
    interference = float(g_own.sum() - g_own[i] + g_other.sum())
    if interference == 0.0:
        raise EmptyTierError("zero aggregate interference")
    return SirDraw(signal / interference, i, float(d_own[i]), signal, interference)


# --- backhaul, caching, delivery -------------------------------------------

def backhaul_rates(cr_capacity_mu, cr_capacity_su, load_mu, load_su, p: NetworkParams,
                   per_realization: bool = False):
    """Backhaul rates of the typical users, vectorized over realizations.

    ``cr_capacity_*`` are the serving CR's capacity draws and ``load_*`` the
    per-realization products N_mc*N_mu and N_sc*N_su. Normally the loads are
    replaced by their ensemble mean.
    """
    load_mu = np.asarray(load_mu, dtype=float)
    load_su = np.asarray(load_su, dtype=float)
    if per_realization:
        den_mu, den_su = load_mu, load_su
    else:
        den_mu, den_su = load_mu.mean(), load_su.mean()
    if np.any(den_mu <= 0) or np.any(den_su <= 0):
        raise ZeroDivisionError("zero expected load in the backhaul split")
    r_mu = p.gamma * np.asarray(cr_capacity_mu, dtype=float) / den_mu
    r_su = (1.0 - p.gamma) * np.asarray(cr_capacity_su, dtype=float) / den_su
    return r_mu, r_su


def request_from_uniform(u, eta: float):
    """Inverse CDF of the power-law popularity: f = (1 - u)^(-1/(eta - 1))."""
    return (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / (eta - 1.0))


def sample_request(eta: float, stream: np.random.Generator, size=None):
    if not eta > 1:
        raise ValueError("eta must exceed 1")
    u = stream.random(size)
    f = request_from_uniform(u, eta)
    return float(f) if size is None else f


def cache_hit(f, F_sc: float):
    """The cache holds the F_sc most popular chunks, i.e. the interval [1, 1 + F_sc]."""
    return np.asarray(f) <= 1.0 + F_sc if np.ndim(f) else bool(f <= 1.0 + F_sc)


def delivery_sample(sir: float, backhaul_rate: float, tau: float, hit: bool = False,
                    tier: str = "MU", use_cache: bool = True) -> float:
    """Delivery rate of one typical user: either tau or 0."""
    if not math.log1p(sir) > tau:
        return 0.0
    if backhaul_rate > tau:
        return tau
    if tier.upper() == "SU" and use_cache and hit:
        return tau
    return 0.0


# --- per-realization records and estimation --------------------------------

@dataclass
class Records:
    """Everything the rate estimators need from each realization.

    Capacities are stored in units of mu and requests as the uniform used
    for inverse-CDF sampling, so gamma, mu, eta, F_sc and tau can be
    changed without re-simulating the geometry.
    """

    sir_mu: np.ndarray
    sir_su: np.ndarray
    cap_mu: np.ndarray
    cap_su: np.ndarray
    load_mu: np.ndarray
    load_su: np.ndarray
    u_request: np.ndarray
    rejected: int = 0

    @property
    def n(self) -> int:
        return len(self.sir_mu)

    @classmethod
    def concat(cls, parts: list["Records"]) -> "Records":
        return cls(*(np.concatenate([getattr(r, f) for r in parts]) for f in
                     ("sir_mu", "sir_su", "cap_mu", "cap_su", "load_mu", "load_su", "u_request")),
                   rejected=sum(r.rejected for r in parts))


def _one_realization(p: NetworkParams, t: Topology, w: Window, seed: int, index: int,
                     max_attempts: int = 50):
    for attempt in range(max_attempts):
        rng = substream(seed, index, attempt)
        try:
            s = generate_scenario(p, t, rng, w)
            tree = build_tree(s)
            mu = sir_sample(s, "MU", (0.0, 0.0), rng)
            su_pos = typical_su_position(s, rng)
            su = sir_sample(s, "SU", su_pos, rng)
        except EmptyTierError:
            continue
        m, k = mu.serving_index, su.serving_index
        # the typical user joins its serving cell
        load_mu = tree.N_mc[tree.cr_of_mbs[m]] * (tree.N_mu[m] + 1)
        load_su = tree.N_sc[tree.cr_of_sbs[k]] * (tree.N_su[k] + 1)
        cap_mu = s.cr_capacity[tree.cr_of_mbs[m]] / p.mu
        cap_su = s.cr_capacity[tree.cr_of_sbs[k]] / p.mu
        u = rng.random()
        return (mu.sir, su.sir, cap_mu, cap_su, load_mu, load_su, u), attempt
    raise RejectionLimitError(f"realization {index}: {max_attempts} consecutive empty draws")


def _simulate_range(args) -> Records:
    p, t, w, seed, start, stop = args
    rows, rejected = [], 0
    for i in range(start, stop):
        row, rej = _one_realization(p, t, w, seed, i)
        rows.append(row)
        rejected += rej
    cols = list(zip(*rows)) if rows else [()] * 7
    return Records(*(np.asarray(c, dtype=float) for c in cols), rejected=rejected)


def simulate_records(p: NetworkParams, t, n_realizations: int, seed: int, workers: Optional[int] = None,
                     window: Optional[Window] = None) -> Records:
    """Run ``n_realizations`` independent realizations, possibly in parallel."""
    t = Topology.parse(t)
    w = window or default_window(p, t)
    nw = min(worker_count(workers), max(1, n_realizations))
    bounds = np.linspace(0, n_realizations, nw * 4 + 1 if nw > 1 else 2).astype(int)
    tasks = [(p, t, w, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if nw == 1:
        parts = [_simulate_range(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            parts = list(ex.map(_simulate_range, tasks))
    rec = Records.concat(parts)
    if rec.rejected > MAX_REJECTION_RATE * n_realizations:
        raise RejectionLimitError(
            f"{rec.rejected} rejected draws for {n_realizations} realizations "
            f"(limit {MAX_REJECTION_RATE:.0%}); densities too low for the window?")
    if rec.rejected:
        log.info("redrew %d empty realizations", rec.rejected)
    return rec


@dataclass(frozen=True)
class RateEstimate:
    mean: float
    ci_half_width: float
    n_samples: int
    tier: str
    topology: Topology
    variant: str


def _estimate(samples: np.ndarray, tier, t, variant) -> RateEstimate:
    n = len(samples)
    mean = float(np.sum(samples) / n)
    sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    return RateEstimate(mean, 1.96 * sd / math.sqrt(n), n, tier, t, variant)


def delivery_from_records(rec: Records, p: NetworkParams, per_realization_load: bool = False) -> dict:
    """Per-realization delivery rates keyed by "MU", "SU", "SU-NoCache"."""
    r_mu, r_su = backhaul_rates(p.mu * rec.cap_mu, p.mu * rec.cap_su, rec.load_mu, rec.load_su, p,
                                per_realization=per_realization_load)
    down_mu = np.log1p(rec.sir_mu) > p.tau_mc
    down_su = np.log1p(rec.sir_su) > p.tau_sc
    hit = cache_hit(request_from_uniform(rec.u_request, p.eta), p.F_sc)
    no_cache = down_su & (r_su > p.tau_sc)
    with_cache = down_su & ((r_su > p.tau_sc) | hit)
    return {
        "MU": np.where(down_mu & (r_mu > p.tau_mc), p.tau_mc, 0.0),
        "SU": np.where(with_cache, p.tau_sc, 0.0),
        "SU-NoCache": np.where(no_cache, p.tau_sc, 0.0),
    }


def rates_from_records(rec: Records, p: NetworkParams, t, per_realization_load: bool = False) -> dict:
    t = Topology.parse(t)
    samples = delivery_from_records(rec, p, per_realization_load)
    return {
        "MU": _estimate(samples["MU"], "MU", t, "WithCache"),
        "SU": _estimate(samples["SU"], "SU", t, "WithCache"),
        "SU-NoCache": _estimate(samples["SU-NoCache"], "SU", t, "NoCache"),
    }


def estimate_avg_rates(p: NetworkParams, t, n_realizations: int, seed: int, workers: Optional[int] = None,
                       per_realization_load: bool = False) -> dict:
    """Monte Carlo average delivery rates of the typical MU and SU (with and without cache)."""
    if n_realizations < 100:
        raise ValueError("n_realizations must be at least 100")
    rec = simulate_records(p, t, n_realizations, seed, workers)
    return rates_from_records(rec, p, t, per_realization_load)


# --- interference Laplace-transform oracles ---------------------------------

LAPLACE_KINDS = ("mm", "sm_cov", "ss_cov", "ms_cov", "sm_cap", "ss_cap", "ms_cap")


def _disk_ppp_batch(lam, r_in, r_out, n, rng):
    # PPP on the annulus r_in < |x| < r_out for n independent samples; returns (sample ids, x, y)
    mean = lam * math.pi * (r_out ** 2 - r_in ** 2)
    counts = rng.poisson(mean, size=n)
    ids = np.repeat(np.arange(n), counts)
    m = len(ids)
    rad = np.sqrt(r_in ** 2 + rng.random(m) * (r_out ** 2 - r_in ** 2))
    th = rng.uniform(0.0, 2.0 * math.pi, m)
    return ids, rad * np.cos(th), rad * np.sin(th)


def _cluster_batch(px, py, pid, c_bar, R, rng):
    counts = rng.poisson(c_bar, size=len(px))
    src = np.repeat(np.arange(len(px)), counts)
    m = len(src)
    rad = R * np.sqrt(rng.random(m))
    th = rng.uniform(0.0, 2.0 * math.pi, m)
    return pid[src], px[src] + rad * np.cos(th), py[src] + rad * np.sin(th)


def interference_samples(kind: str, p: NetworkParams, n: int, rng: np.random.Generator,
                         r: Optional[float] = None, radius: Optional[float] = None,
                         batch: int = 2000) -> np.ndarray:
    """Aggregate interference at the origin under the conditioning each transform assumes.

    mm / ss_cov: PPP beyond the serving distance ``r``; sm_cov / ms_cov:
    PPP outside the exclusion ball centred at distance ``r``; ms_cap: an
    unconditioned PPP; sm_cap: a Matern cluster process; ss_cap: the same
    plus a representative cluster whose parent is uniform in B(0, R_c).
    Interferers are simulated up to ``radius`` from the origin.
    """
    if kind not in LAPLACE_KINDS:
        raise ValueError(f"unknown interference kind {kind!r}")
    lam, P = {
        "mm": (p.lambda_mc, p.P_mc), "ms_cov": (p.lambda_mc, p.P_mc), "ms_cap": (p.lambda_mc, p.P_mc),
        "ss_cov": (p.lambda_sc_prime, p.P_sc), "sm_cov": (p.lambda_sc_prime, p.P_sc),
        "sm_cap": (p.lambda_sc_prime, p.P_sc), "ss_cap": (p.lambda_sc_prime, p.P_sc),
    }[kind]
    if kind in ("mm", "ss_cov", "sm_cov", "ms_cov") and r is None:
        raise ValueError(f"{kind} needs a serving distance r")
    radius = radius or 40.0 * max(p.R_c, (math.pi * lam) ** -0.5)
    out = np.empty(n)
    for start in range(0, n, batch):
        m = min(batch, n - start)
        if kind in ("mm", "ss_cov"):
            ids, x, y = _disk_ppp_batch(lam, r, radius, m, rng)
        elif kind in ("sm_cov", "ms_cov", "ms_cap"):
            ids, x, y = _disk_ppp_batch(lam, 0.0, radius, m, rng)
            if kind != "ms_cap":
                keep = (x - r) ** 2 + y ** 2 >= p.R_c ** 2
                ids, x, y = ids[keep], x[keep], y[keep]
        else:
            pid, px, py = _disk_ppp_batch(lam, 0.0, radius + p.R_c, m, rng)
            if kind == "ss_cap":
                rr = p.R_c * np.sqrt(rng.random(m))
                th = rng.uniform(0.0, 2.0 * math.pi, m)
                pid = np.concatenate((pid, np.arange(m)))
                px = np.concatenate((px, rr * np.cos(th)))
                py = np.concatenate((py, rr * np.sin(th)))
            ids, x, y = _cluster_batch(px, py, pid, p.c_bar, p.R_c, rng)
        fade = rng.exponential(size=len(ids))
        with np.errstate(divide="ignore"):
            contrib = P * fade * (x * x + y * y) ** (-p.alpha / 2.0)
        out[start:start + m] = np.bincount(ids, weights=contrib, minlength=m)
    return out


def laplace_mc(kind: str, s_values, p: NetworkParams, n: int, seed: int, r: Optional[float] = None,
               radius: Optional[float] = None):
    """Monte Carlo E[exp(-s I)] and its standard error for each s."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    inter = interference_samples(kind, p, n, rng, r=r, radius=radius)
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    vals = np.exp(-np.outer(s, inter))
    return vals.mean(axis=1), vals.std(axis=1, ddof=1) / math.sqrt(n)


def sir_samples(p: NetworkParams, tier: str = "MU", n: int = 10000, seed: int = 0, t=Topology.COVERAGE,
                sbs_tier: bool = True) -> np.ndarray:
    """SIR samples of the typical user over ``n`` independent realizations."""
    t = Topology.parse(t)
    w = default_window(p, t)
    out = np.empty(n)
    for i in range(n):
        for attempt in range(50):
            rng = substream(seed, i, attempt)
            try:
                s = generate_scenario(p, t, rng, w, sbs_tier=sbs_tier, with_users=False)
                pos = (0.0, 0.0) if tier.upper() == "MU" else typical_su_position(s, rng)
                out[i] = sir_sample(s, tier, pos, rng).sir
                break
            except EmptyTierError:
                continue
        else:
            raise RejectionLimitError(f"realization {i}: no usable draw")
    return out
