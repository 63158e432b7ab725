"""Point-process samplers on a square window and nearest-point queries.

The window is the square [-L, L)^2. With ``toroidal=True`` (the default)
distances wrap around, which removes edge effects for the stationary
processes simulated here.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

# hard cap on expected points per draw; protects memory on absurd inputs
MAX_EXPECTED_POINTS = 5e7


class Role(str, enum.Enum):
    CR = "CR"
    MBS = "MBS"
    SBS = "SBS"
    MU = "MU"
    SU = "SU"


@dataclass(frozen=True)
class Window:
    half_extent: float
    toroidal: bool = True

    def __post_init__(self):
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")

    @property
    def side(self) -> float:
        return 2.0 * self.half_extent

    @property
    def area(self) -> float:
        return self.side ** 2

    @classmethod
    def guarded(cls, R_c: float, densities, toroidal: bool = True, factor: float = 10.0,
                half_extent: Optional[float] = None) -> "Window":
        """Window satisfying L >= factor * max(R_c, (pi * min density)^-1/2).

        An explicit ``half_extent`` is honoured only if it meets the guard.
        """
        lam_min = min(d for d in densities if d > 0)
        need = factor * max(R_c, (math.pi * lam_min) ** -0.5)
        if half_extent is None:
            return cls(math.ceil(need / 100.0) * 100.0, toroidal)
        if half_extent < need:
            raise ValueError(f"half_extent {half_extent} below edge-effect guard {need:.1f}")
        return cls(float(half_extent), toroidal)

    def wrap(self, xy: np.ndarray) -> np.ndarray:
        """Map coordinates back into [-L, L) (identity for non-toroidal windows)."""
        if not self.toroidal:
            return xy
        L = self.half_extent
        return (xy + L) % self.side - L

    def displacement(self, xy: np.ndarray, q) -> np.ndarray:
        """Vectors from ``q`` to each row of ``xy`` under the window metric."""
        d = np.asarray(xy, dtype=float) - np.asarray(q, dtype=float)
        if self.toroidal:
            d = (d + self.half_extent) % self.side - self.half_extent
        return d

    def distances(self, xy: np.ndarray, q) -> np.ndarray:
        d = self.displacement(xy, q)
        return np.hypot(d[..., 0], d[..., 1])


@dataclass
class PointSet:
    role: Role
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    parent_index: Optional[np.ndarray] = None

    def __post_init__(self):
        self.role = Role(self.role)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.parent_index is not None:
            self.parent_index = np.asarray(self.parent_index, dtype=np.int64)
            if len(self.parent_index) != len(self.points):
                raise ValueError("parent_index length must match points")

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        if self.role != other.role or not np.array_equal(self.points, other.points):
            return False
        if (self.parent_index is None) != (other.parent_index is None):
            return False
        return self.parent_index is None or np.array_equal(self.parent_index, other.parent_index)


def _check_cap(mean_count: float) -> None:
    if mean_count > MAX_EXPECTED_POINTS:
        raise ValueError(f"expected {mean_count:.3g} points exceeds cap {MAX_EXPECTED_POINTS:.3g}")


def _uniform_in_window(n: int, w: Window, rng: np.random.Generator) -> np.ndarray:
    L = w.half_extent
    return rng.uniform(-L, L, size=(n, 2))


def _uniform_in_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_ppp(lam: float, w: Window, rng: np.random.Generator, role: Role = Role.MBS) -> PointSet:
    """Homogeneous PPP of intensity ``lam`` on the window."""
    if not lam > 0:
        raise ValueError("intensity must be positive")
    mean = lam * w.area
    _check_cap(mean)
    n = rng.poisson(mean)
    return PointSet(role, _uniform_in_window(n, w, rng))


def _to_box(xy: np.ndarray, w: Window) -> np.ndarray:
    out = np.mod(xy + w.half_extent, w.side)
    out[out >= w.side] = 0.0
    return out


def hole_mask(candidates: np.ndarray, centers: np.ndarray, R_c: float, w: Window) -> np.ndarray:
    """True for candidates at distance >= R_c from every center."""
    if len(centers) == 0 or len(candidates) == 0:
        return np.ones(len(candidates), dtype=bool)
    if w.toroidal:
        tree = cKDTree(_to_box(centers, w), boxsize=w.side)
        d, _ = tree.query(_to_box(candidates, w), k=1)
    else:
        d, _ = cKDTree(centers).query(candidates, k=1)
    return d >= R_c


def sample_php(mbs: PointSet, lambda_sc_prime: float, R_c: float, w: Window,
               rng: np.random.Generator) -> PointSet:
    """Poisson hole process: candidate PPP minus the R_c-balls around each MBS."""
    if mbs.role is not Role.MBS:
        raise ValueError("holes must be carved around an MBS point set")
    cand = sample_ppp(lambda_sc_prime, w, rng, Role.SBS)
    keep = hole_mask(cand.points, mbs.points, R_c, w)
    return PointSet(Role.SBS, cand.points[keep])


def _cluster(parents: np.ndarray, mean_per: float, R_c: float, w: Window,
             rng: np.random.Generator, role: Role) -> PointSet:
    counts = rng.poisson(mean_per, size=len(parents)) if len(parents) else np.zeros(0, dtype=np.int64)
    idx = np.repeat(np.arange(len(parents)), counts)
    pts = parents[idx] + _uniform_in_disk(len(idx), R_c, rng)
    if w.toroidal:
        pts = w.wrap(pts)
    else:
        inside = np.all(np.abs(pts) <= w.half_extent, axis=1)
        pts, idx = pts[inside], idx[inside]
    return PointSet(role, pts, idx)


def sample_mcp(lambda_sc_prime: float, c_bar: float, R_c: float, w: Window,
               rng: np.random.Generator) -> tuple[PointSet, PointSet]:
    """Matern cluster process; returns (parents, daughters).

    Daughters carry the index of their parent. On a torus they wrap across
    the boundary; otherwise those falling outside the window are dropped.
    """
    parents = sample_ppp(lambda_sc_prime, w, rng, Role.SBS)
    _check_cap(lambda_sc_prime * w.area * c_bar)
    daughters = _cluster(parents.points, c_bar, R_c, w, rng, Role.SBS)
    return parents, daughters


def sample_cox_users(parents: PointSet, c_bar: float, R_c: float, lambda_ut_m: float, w: Window,
                     rng: np.random.Generator) -> tuple[PointSet, PointSet]:
    """Clustered small-cell users plus a PPP of macro users; returns (sus, mus)."""
    sus = _cluster(parents.points, c_bar, R_c, w, rng, Role.SU)
    mus = sample_ppp(lambda_ut_m, w, rng, Role.MU)
    return sus, mus


def nearest(q, s: PointSet, w: Window) -> tuple[int, float]:
    """Index of and distance to the point of ``s`` closest to ``q``; ties go to the lowest index."""
    if len(s) == 0:
        raise ValueError("nearest() on an empty point set")
    d = w.distances(s.points, q)
    i = int(np.argmin(d))
    return i, float(d[i])


def nearest_many(queries: np.ndarray, targets: np.ndarray, w: Window) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized nearest-target lookup for many queries (indices, distances)."""
    queries = np.asarray(queries, dtype=float).reshape(-1, 2)
    if len(targets) == 0:
        raise ValueError("nearest_many() with no targets")
    if len(queries) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if w.toroidal:
        tree = cKDTree(_to_box(targets, w), boxsize=w.side)
        d, i = tree.query(_to_box(queries, w), k=1)
    else:
        d, i = cKDTree(targets).query(queries, k=1)
    return np.asarray(i, dtype=np.int64), np.asarray(d, dtype=float)


def dump_csv(path, point_sets) -> None:
    """Write point sets as CSV rows ``role,x,y,parent_index`` (blank index when absent)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["role", "x", "y", "parent_index"])
        for ps in point_sets:
            parents = ps.parent_index if ps.parent_index is not None else [None] * len(ps)
            for (x, y), pi in zip(ps.points, parents):
                wr.writerow([ps.role.value, repr(float(x)), repr(float(y)), "" if pi is None else int(pi)])


def load_csv(path) -> list[PointSet]:
    groups: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            groups.setdefault(row["role"], []).append(row)
    out = []
    for role, rows in groups.items():
        pts = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
        has_parent = all(r["parent_index"] != "" for r in rows)
        parent = np.array([int(r["parent_index"]) for r in rows]) if has_parent else None
        out.append(PointSet(Role(role), pts, parent))
    return out
