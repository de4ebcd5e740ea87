"""The natural measure mu on a realization and the quantities built from it."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .construction import CubeAddress, Realization


class InsufficientResolution(ValueError):
    pass


@dataclass(frozen=True)
class NaturalMeasure:
    """mu restricted to the cubes of levels 0..depth: each chosen level-k cube has mass 1/P_k."""

    realization: Realization
    depth: int | None = None

    def __post_init__(self):
        depth = self.realization.depth if self.depth is None else self.depth
        if not 0 <= depth <= self.realization.depth:
            raise ValueError("depth beyond realization")
        object.__setattr__(self, "depth", depth)

    @property
    def params(self):
        return self.realization.params

    def cube_mass(self, k: int) -> Fraction:
        return Fraction(1, self.params.P(k))

    def total_mass(self) -> Fraction:
        return self.cube_mass(self.depth) * len(self.realization.cubes(self.depth))

    def measure_of_cube(self, q: CubeAddress) -> Fraction:
        if q.level > self.depth:
            raise ValueError("undefined at this depth")
        return self.cube_mass(q.level) if self.realization.contains(q) else Fraction(0)


def measure_of_cube(m: NaturalMeasure, q: CubeAddress) -> Fraction:
    return m.measure_of_cube(q)


@dataclass(frozen=True)
class BallMeasure:
    lower: float
    estimate: float
    upper: float


def _subsample_offsets(d: int, per_axis: int = 4) -> np.ndarray:
    g = (np.arange(per_axis) + 0.5) / per_axis
    return np.array(list(itertools.product(g, repeat=d)))


def _ball_masses(lo: np.ndarray, side: float, mass: float, x: np.ndarray, radii: np.ndarray):
    """(lower, estimate, upper) arrays over radii for one centre point."""
    near = np.clip(x, lo, lo + side)
    dmin = np.linalg.norm(near - x, axis=1)
    far = np.maximum(np.abs(x - lo), np.abs(x - lo - side))
    dmax = np.linalg.norm(far, axis=1)
    offsets = _subsample_offsets(lo.shape[1])
    lower, est, upper = [], [], []
    for r in radii:
        inside = dmax <= r
        partial = (dmin < r) & ~inside
        frac = 0.0
        if np.any(partial):
            pts = lo[partial][:, None, :] + side * offsets[None, :, :]
            frac = (np.linalg.norm(pts - x, axis=2) <= r).mean(axis=1).sum()
        n_in = inside.sum()
        lower.append(mass * n_in)
        est.append(mass * (n_in + frac))
        upper.append(mass * (n_in + partial.sum()))
    return np.array(lower), np.array(est), np.array(upper)


def measure_of_ball(m: NaturalMeasure, x, r: float) -> BallMeasure:
    """mu(B(x, r)) from the deepest-level cubes.

    Cubes straddling the sphere contribute their mass times the fraction of a
    fixed 4^d midpoint subsample lying in the ball; `lower`/`upper` count such
    cubes as fully out / fully in.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    side = m.params.r(m.depth)
    if r < side:
        raise InsufficientResolution("insufficient resolution")
    lo = m.realization.lower_corners(m.depth)
    lower, est, upper = _ball_masses(lo, side, float(m.cube_mass(m.depth)), np.asarray(x, float), [r])
    return BallMeasure(float(lower[0]), float(est[0]), float(upper[0]))


@dataclass
class AhlforsScan:
    exponent: float
    min_ratio: float
    max_ratio: float
    bracket_min: float
    bracket_max: float
    rows: list = field(default_factory=list, repr=False)

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio if self.min_ratio > 0 else float("inf")

    @property
    def bracket_spread(self) -> float:
        return self.bracket_max / self.bracket_min if self.bracket_min > 0 else float("inf")


def ahlfors_ratio_scan(
    m: NaturalMeasure,
    samples: int,
    radii,
    exponent: float | None = None,
    seed: int = 0,
) -> AhlforsScan:
    """Extremes of mu(B(x, r)) / r^exponent over sampled deepest-cube centres and radii.

    `rows` holds (x..., r, lower, estimate, upper) for CSV export; the bracket
    extremes use lower brackets for the minimum and upper ones for the maximum.
    """
    radii = np.asarray(list(radii), dtype=float)
    if radii.size == 0:
        raise ValueError("empty radii list")
    side = m.params.r(m.depth)
    if np.any(radii < side):
        raise InsufficientResolution("insufficient resolution")
    d = m.params.d
    exponent = d - 1 if exponent is None else exponent
    lo = m.realization.lower_corners(m.depth)
    rng = np.random.default_rng(seed)
    picks = rng.choice(lo.shape[0], size=samples, replace=lo.shape[0] < samples)
    mass = float(m.cube_mass(m.depth))
    rows = []
    ratios, lows, highs = [], [], []
    for x in lo[picks] + side / 2:
        lower, est, upper = _ball_masses(lo, side, mass, x, radii)
        scale = radii**exponent
        ratios.append(est / scale)
        lows.append(lower / scale)
        highs.append(upper / scale)
        for j, r in enumerate(radii):
            rows.append((*x.tolist(), float(r), float(lower[j]), float(est[j]), float(upper[j])))
    ratios = np.array(ratios)
    return AhlforsScan(
        exponent=float(exponent),
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        bracket_min=float(np.min(lows)),
        bracket_max=float(np.max(highs)),
        rows=rows,
    )


def projection_measure(r: Realization, axis: int, level: int | None = None) -> Fraction:
    """Exact length of the projection of E_n onto a coordinate axis (n = depth by default)."""
    if r.params.d != 2:
        raise ValueError("exact projection only for d=2")
    if axis not in (0, 1):
        raise ValueError("axis must be 0 (x) or 1 (y)")
    level = r.depth if level is None else level
    if not 0 <= level <= r.depth:
        raise ValueError("undefined at this depth")
    cells = np.unique(r.cubes(level)[:, axis])
    # closed intervals [i, i+1] * r_n overlap only at endpoints
    return Fraction(int(cells.size), r.params.scale(level))
