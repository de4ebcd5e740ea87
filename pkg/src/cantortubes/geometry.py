"""Affine flats against axis-aligned cubes.

Cubes are given by lower corners `lo` (K, d) and a side length. The flat-cube
measure follows one convention throughout: a flat that meets a closed cube
only in its boundary (e.g. a line running along a face) contributes zero.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.stats import qmc

from .construction import ConstructionParams, Realization

ORTHO_TOL = 1e-12
INCIDENCE_TOL = 1e-12


class InvalidFlat(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Flat:
    """Affine m-plane through `point` spanned by the orthonormal rows of `basis`."""

    point: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float).reshape(-1)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[1] != point.shape[0]:
            raise InvalidFlat("invalid flat: basis and point dimensions differ")
        m, d = basis.shape
        if not 1 <= m <= d - 1:
            raise InvalidFlat("invalid flat: need 1 <= m <= d-1")
        if not np.all(np.isfinite(basis)) or not np.allclose(basis @ basis.T, np.eye(m), atol=ORTHO_TOL, rtol=0):
            raise InvalidFlat("invalid flat: basis not orthonormal")
        point.flags.writeable = False
        basis.flags.writeable = False
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def line(cls, point, direction) -> "Flat":
        u = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(u)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidFlat("invalid flat: zero direction")
        return cls(point, (u / norm)[None, :])

    @classmethod
    def through(cls, a, b) -> "Flat":
        a = np.asarray(a, dtype=float)
        return cls.line(a, np.asarray(b, dtype=float) - a)

    @classmethod
    def hyperplane(cls, normal, offset: float) -> "Flat":
        """The hyperplane {x : normal . x = offset}."""
        nu = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(nu)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidFlat("invalid flat: zero normal")
        nu = nu / norm
        _, _, vt = np.linalg.svd(nu[None, :])
        return cls(nu * (offset / norm), vt[1:])

    @classmethod
    def coordinate_hyperplane(cls, d: int, i: int, value: float = 0.0) -> "Flat":
        e = np.zeros(d)
        e[i] = 1.0
        return cls.hyperplane(e, value)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    @property
    def normal(self) -> np.ndarray:
        if self.dim != self.ambient - 1:
            raise InvalidFlat("normal is defined for hyperplanes only")
        _, _, vt = np.linalg.svd(self.basis)
        return vt[-1]

    @property
    def direction(self) -> np.ndarray:
        if self.dim != 1:
            raise InvalidFlat("direction is defined for lines only")
        return self.basis[0]

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.point + (x - self.point) @ self.projector

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "basis": self.basis.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Flat":
        if "basis" in data:
            return cls(data["point"], data["basis"])
        if "direction" in data:
            return cls.line(data["point"], data["direction"])
        if "normal" in data:
            return cls.hyperplane(data["normal"], data.get("offset", 0.0))
        raise InvalidFlat("flat needs basis, direction or normal")


@dataclass(frozen=True)
class Strip:
    """Open neighbourhood {x : dist(x, flat) < width/2}; a tube when flat is a line."""

    flat: Flat
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("strip width must be positive")


def unit_cube(d: int) -> tuple[np.ndarray, float]:
    return np.zeros((1, d)), 1.0


def _as_cubes(lo, side):
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    side = np.broadcast_to(np.asarray(side, dtype=float), lo.shape[:1])
    return lo, side


def _clip_line(p: np.ndarray, u: np.ndarray, lo: np.ndarray, side: np.ndarray):
    """Parameter interval [t0, t1] of p + t u inside each cube's interior closure."""
    hi = lo + side[:, None]
    t0 = np.full(lo.shape[0], -np.inf)
    t1 = np.full(lo.shape[0], np.inf)
    for i in range(p.shape[0]):
        if u[i] == 0.0:
            inside = (lo[:, i] < p[i]) & (p[i] < hi[:, i])
            t0 = np.where(inside, t0, np.inf)
            t1 = np.where(inside, t1, -np.inf)
            continue
        # a tiny u[i] overflows to +-inf, which is the correct unbounded or empty slab interval
        with np.errstate(over="ignore"):
            a = (lo[:, i] - p[i]) / u[i]
            b = (hi[:, i] - p[i]) / u[i]
        t0 = np.maximum(t0, np.minimum(a, b))
        t1 = np.minimum(t1, np.maximum(a, b))
    return t0, t1


def _line_lengths(W: Flat, lo, side) -> np.ndarray:
    t0, t1 = _clip_line(W.point, W.basis[0], lo, side)
    return np.maximum(t1 - t0, 0.0)


def _interior_hit_hyperplane(nu, c, lo, side):
    base = lo @ nu
    lo_v = base + side * np.minimum(nu, 0).sum()
    hi_v = base + side * np.maximum(nu, 0).sum()
    return (lo_v < c) & (c < hi_v)


def _plane_areas_3d(W: Flat, lo, side) -> np.ndarray:
    nu = W.normal
    c = float(nu @ W.point)
    K = lo.shape[0]
    pts = []
    for a in range(3):
        others = [i for i in range(3) if i != a]
        for o1, o2 in itertools.product((0.0, 1.0), repeat=2):
            base = lo.copy()
            base[:, others[0]] += o1 * side
            base[:, others[1]] += o2 * side
            if nu[a] == 0.0:
                pts.append(np.full((K, 3), np.nan))
                continue
            tau = (c - base @ nu) / nu[a]
            ok = (tau >= -1e-12 * side) & (tau <= side * (1 + 1e-12))
            q = base.copy()
            q[:, a] += np.clip(tau, 0.0, side)
            q[~ok] = np.nan
            pts.append(q)
    pts = np.stack(pts, axis=1)  # (K, 12, 3)
    uv = (pts - W.point) @ W.basis.T  # (K, 12, 2)
    valid = ~np.isnan(uv[..., 0])
    count = valid.sum(axis=1)
    safe = np.where(valid[..., None], uv, 0.0)
    centre = safe.sum(axis=1) / np.maximum(count, 1)[:, None]
    rel = uv - centre[:, None, :]
    ang = np.where(valid, np.arctan2(rel[..., 1], rel[..., 0]), np.inf)
    order = np.argsort(ang, axis=1)
    rel = np.take_along_axis(rel, order[..., None], axis=1)
    svalid = np.take_along_axis(valid, order, axis=1)
    # pad missing vertices with the last valid one so they add nothing
    last = np.maximum(count - 1, 0)
    lastpt = rel[np.arange(K), last]
    rel = np.where(svalid[..., None], rel, lastpt[:, None, :])
    x, y = rel[..., 0], rel[..., 1]
    area = 0.5 * np.abs((x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y).sum(axis=1))
    area = np.where(count >= 3, area, 0.0)
    return np.where(_interior_hit_hyperplane(nu, c, lo, side), area, 0.0)


def _hyperplane_volumes(W: Flat, lo, side) -> np.ndarray:
    d = W.ambient
    nu = W.normal
    c = float(nu @ W.point)
    hit = _interior_hit_hyperplane(nu, c, lo, side)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    out = np.zeros(lo.shape[0])
    for k in np.flatnonzero(hit):
        pts = []
        for a in range(d):
            if nu[a] == 0.0:
                continue
            for cnr in corners[corners[:, a] == 0]:
                base = lo[k] + side[k] * cnr
                tau = (c - base @ nu) / nu[a]
                if -1e-12 * side[k] <= tau <= side[k] * (1 + 1e-12):
                    q = base.copy()
                    q[a] += min(max(tau, 0.0), side[k])
                    pts.append(q)
        uv = (np.array(pts) - W.point) @ W.basis.T
        try:
            out[k] = ConvexHull(uv).volume
        except QhullError:
            out[k] = 0.0
    return out


def flat_cubes_measure(W: Flat, lo, side) -> np.ndarray:
    """H^m(W cap Q) for every cube; exact for lines (any d) and hyperplanes."""
    lo, side = _as_cubes(lo, side)
    if lo.shape[1] != W.ambient:
        raise InvalidFlat("invalid flat: ambient dimension mismatch")
    if W.dim == 1:
        return _line_lengths(W, lo, side)
    if W.dim == W.ambient - 1:
        if W.ambient == 3:
            return _plane_areas_3d(W, lo, side)
        return _hyperplane_volumes(W, lo, side)
    return np.array([flat_cube_measure_estimate(W, l, s)[0] for l, s in zip(lo, side)])


def flat_cube_measure(W: Flat, lo=None, side: float = 1.0) -> float:
    if lo is None:
        lo = np.zeros(W.ambient)
    return float(flat_cubes_measure(W, lo, side)[0])


def flat_cube_measure_estimate(W: Flat, lo, side: float, points: int = 2**14, replicates: int = 8, seed: int = 0):
    """Randomized quasi-Monte-Carlo H^m(W cap Q) with its standard error.

    Samples the flat's own coordinates over the bounding box of the projected
    cube vertices. Serves flat dimensions without an exact routine.
    """
    lo = np.asarray(lo, dtype=float).reshape(-1)
    d, m = W.ambient, W.dim
    verts = lo + side * np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    uv = (verts - W.point) @ W.basis.T
    a, b = uv.min(axis=0), uv.max(axis=0)
    box = float(np.prod(b - a))
    if box == 0.0:
        return 0.0, 0.0
    vals = []
    for rep in range(replicates):
        s = qmc.Sobol(m, scramble=True, seed=seed + rep).random(points)
        x = W.point + (a + s * (b - a)) @ W.basis
        inside = np.all((x > lo) & (x < lo + side), axis=1)
        vals.append(box * inside.mean())
    vals = np.array(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicates))


def boundary_measure(W: Flat, lo=None, side: float = 1.0, eps: float = 0.0) -> float:
    """H^m of the points of W cap Q within distance eps of the cube boundary."""
    return float(boundary_measures(W, np.zeros(W.ambient) if lo is None else lo, side, eps)[0])


def boundary_measures(W: Flat, lo, side, eps: float) -> np.ndarray:
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, side = _as_cubes(lo, side)
    total = flat_cubes_measure(W, lo, side)
    inner_side = side - 2 * eps
    live = inner_side > 0
    inner = np.zeros_like(total)
    if np.any(live):
        inner[live] = flat_cubes_measure(W, lo[live] + eps, inner_side[live])
    return np.maximum(total - inner, 0.0)


def plane_angle(H: Flat, W: Flat) -> float:
    """Angle between hyperplane H and flat W, from their direction spaces only."""
    if H.dim != H.ambient - 1:
        raise InvalidFlat("H is not a hyperplane")
    if H.ambient != W.ambient:
        raise InvalidFlat("ambient dimension mismatch")
    s = float(np.linalg.norm(W.basis @ H.normal))
    return math.asin(min(1.0, s))


def coordinate_angles(W: Flat) -> np.ndarray:
    """Angles between W and each coordinate hyperplane {x_i = 0}."""
    s = np.linalg.norm(W.basis, axis=0)
    return np.arcsin(np.minimum(1.0, s))


def gamma_membership(W: Flat, n: int, params: ConstructionParams) -> bool:
    return bool(coordinate_angles(W).min() >= params.r(n) ** W.ambient)


def _cube_vertices(d: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=d)))


def projection_metric(V: Flat, W: Flat) -> float:
    """sup over the unit cube of |pi_V(x) - pi_W(x)|, attained at a vertex."""
    if V.dim != W.dim or V.ambient != W.ambient:
        raise InvalidFlat("dimension mismatch")
    x = _cube_vertices(V.ambient)
    return float(np.linalg.norm(V.project(x) - W.project(x), axis=1).max())


def realization_flat_measure(r: Realization, W: Flat, n: int | None = None) -> float:
    """|W cap E_n|: sum of flat-cube measures over the chosen level-n cubes."""
    n = r.depth if n is None else n
    if n > r.depth:
        raise ValueError("level beyond realization depth")
    return float(flat_cubes_measure(W, r.lower_corners(n), r.params.r(n)).sum())


def _line_box_distance(p, u, lo, side) -> np.ndarray:
    hi = lo + side[:, None]
    d = p.shape[0]
    K = lo.shape[0]
    bps = []
    for i in range(d):
        if u[i] != 0.0:
            bps.append((lo[:, i] - p[i]) / u[i])
            bps.append((hi[:, i] - p[i]) / u[i])
    bps = np.sort(np.stack(bps, axis=1), axis=1) if bps else np.zeros((K, 0))
    left = np.concatenate([np.full((K, 1), -np.inf), bps], axis=1)
    right = np.concatenate([bps, np.full((K, 1), np.inf)], axis=1)
    mid = np.where(
        np.isinf(left), right - 1.0, np.where(np.isinf(right), left + 1.0, 0.5 * (left + right))
    )
    mid = np.where(np.isinf(mid), 0.0, mid)
    num = np.zeros_like(mid)
    den = np.zeros_like(mid)
    for i in range(d):
        x = p[i] + mid * u[i]
        below = x < lo[:, i : i + 1]
        above = x > hi[:, i : i + 1]
        bound = np.where(below, lo[:, i : i + 1], hi[:, i : i + 1])
        act = below | above
        num += np.where(act, u[i] * (p[i] - bound), 0.0)
        den += np.where(act, u[i] ** 2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstar = np.where(den > 0, -num / den, mid)
    tstar = np.clip(tstar, left, right)
    tstar = np.where(np.isfinite(tstar), tstar, mid)
    f = np.zeros_like(tstar)
    for i in range(d):
        x = p[i] + tstar * u[i]
        e = np.maximum(np.maximum(lo[:, i : i + 1] - x, 0.0), x - hi[:, i : i + 1])
        f += e**2
    return np.sqrt(f.min(axis=1))


def strip_hits(S: Strip, lo, side) -> np.ndarray:
    """Closed cubes meeting the open strip, distances rounded outward."""
    lo, side = _as_cubes(lo, side)
    W = S.flat
    half = S.width / 2 + INCIDENCE_TOL
    if W.dim == W.ambient - 1:
        nu = W.normal
        c = float(nu @ W.point)
        base = lo @ nu
        lo_v = base + side * np.minimum(nu, 0).sum()
        hi_v = base + side * np.maximum(nu, 0).sum()
        return (hi_v > c - half) & (lo_v < c + half)
    if W.dim == 1:
        return _line_box_distance(W.point, W.direction, lo, side) < half
    raise NotImplementedError("strip incidence supports lines and hyperplanes")


def strip_cube_count(r: Realization, S: Strip, n: int | None = None) -> int:
    """Z(S, n): number of chosen level-n cubes meeting the strip."""
    n = r.depth if n is None else n
    if n > r.depth:
        raise ValueError("level beyond realization depth")
    return int(strip_hits(S, r.lower_corners(n), r.params.r(n)).sum())
