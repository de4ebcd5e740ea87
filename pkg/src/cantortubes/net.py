"""Constructive epsilon-nets of angle-bounded lines and hyperplanes.

Flats are parameterized per coordinate chart j (the dominant direction
coordinate for lines, the dominant normal coordinate for hyperplanes) by
slopes a in [-1, 1]^(d-1) and offsets b. Over the unit cube the projection
map moves by at most 2*R per unit slope change and 1 per unit offset
change (R bounds |x - p| for x in the cube and p the chart base point), so
rounding to a lattice with slope spacing eps/(2(d-1)R) and offset spacing
eps/n_offsets keeps every flat within rho-distance eps of its lattice point.
Slope lattices have an even number of cells, so no member has a zero
slope and all members lie at a positive angle to every coordinate
hyperplane.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .constants import c_geom_for
from .construction import ConstructionParams
from .geometry import Flat, InvalidFlat, _interior_hit_hyperplane, _line_lengths

SUPPORTED = {(2, 1), (3, 1), (3, 2)}
MATERIALIZE_LIMIT = 500_000


@dataclass(frozen=True)
class NetParams:
    level: int
    alpha: float
    eps_net: float
    c_geom: float

    @classmethod
    def for_level(
        cls,
        params: ConstructionParams,
        n: int,
        m: int,
        eps_net: float | None = None,
        c_geom: float | None = None,
    ) -> "NetParams":
        d = params.d
        r = params.r(n)
        return cls(
            level=n,
            alpha=r**d,
            eps_net=r ** (2 * d + 1) if eps_net is None else eps_net,
            c_geom=c_geom_for(d, m) if c_geom is None else c_geom,
        )


class UnsupportedNet(ValueError):
    pass


@dataclass(frozen=True)
class _Axis:
    lo: float
    count: int

    @property
    def step(self) -> float:
        return -2 * self.lo / self.count

    def values(self) -> np.ndarray:
        return self.lo + (np.arange(self.count) + 0.5) * self.step

    def round(self, x: np.ndarray) -> np.ndarray:
        idx = np.floor((np.asarray(x) - self.lo) / self.step)
        idx = np.clip(idx, 0, self.count - 1)
        return self.lo + (idx + 0.5) * self.step


class Net:
    """Implicit lattice net; `nearest` works at any size, `members` only when small."""

    def __init__(self, np_: NetParams, d: int, m: int):
        if (d, m) not in SUPPORTED:
            raise UnsupportedNet(f"unsupported (d, m) = ({d}, {m})")
        self.params = np_
        self.d, self.m = d, m
        self.is_line = m == 1
        eps = np_.eps_net
        if self.is_line:
            self.offset_bound = 1.0
            self.n_offsets = d - 1
            reach = math.sqrt(d) / 2 + self.offset_bound * math.sqrt(d - 1)
        else:
            self.offset_bound = d / 2
            self.n_offsets = 1
            reach = math.sqrt(d) / 2 + self.offset_bound
        self.reach = reach
        self.single = eps >= 2 * math.sqrt(d)
        if self.single:
            self.slope_axis = None
            self.offset_axis = None
        else:
            ka = math.ceil(2 / (eps / (2 * (d - 1) * reach)))
            ka += ka % 2
            kb = max(1, math.ceil(2 * self.offset_bound / (eps / self.n_offsets)))
            self.slope_axis = _Axis(-1.0, max(2, ka))
            self.offset_axis = _Axis(-self.offset_bound, kb)

    @property
    def cardinality(self) -> int:
        if self.single:
            return self.d
        per_chart = self.slope_axis.count ** (self.d - 1) * self.offset_axis.count**self.n_offsets
        return self.d * per_chart

    @property
    def c_net(self) -> float:
        """Exponent with #net = (1/eps)^c_net."""
        return math.log(self.cardinality) / math.log(1 / self.params.eps_net) if self.params.eps_net < 1 else float("nan")

    def _flat(self, j: int, a: np.ndarray, b: np.ndarray) -> Flat:
        d = self.d
        others = [i for i in range(d) if i != j]
        centre = np.full(d, 0.5)
        if self.is_line:
            v = np.zeros(d)
            v[j] = 1.0
            v[others] = a
            p = centre.copy()
            p[others] += b
            return Flat.line(p, v)
        nvec = np.zeros(d)
        nvec[j] = 1.0
        nvec[others] = -np.asarray(a)
        p = centre.copy()
        p[j] += float(np.asarray(b).reshape(-1)[0])
        return Flat.hyperplane(nvec, float(nvec @ p))

    def chart_coordinates(self, W: Flat) -> tuple[int, np.ndarray, np.ndarray]:
        d = self.d
        if W.dim != self.m or W.ambient != d:
            raise InvalidFlat("flat dimension does not match the net")
        centre = np.full(d, 0.5)
        if self.is_line:
            u = W.direction
            j = int(np.argmax(np.abs(u)))
            v = u / u[j]
            others = [i for i in range(d) if i != j]
            q = W.point + (0.5 - W.point[j]) * v
            return j, v[others], q[others] - 0.5
        nu = W.normal
        j = int(np.argmax(np.abs(nu)))
        nvec = nu / nu[j]
        others = [i for i in range(d) if i != j]
        return j, -nvec[others], np.array([nvec @ (W.point - centre)])

    def nearest(self, W: Flat) -> Flat:
        j, a, b = self.chart_coordinates(W)
        if self.single:
            return self._flat(j, np.full(self.d - 1, 0.5), np.zeros(self.n_offsets))
        b = np.clip(b, -self.offset_bound, self.offset_bound)
        return self._flat(j, self.slope_axis.round(a), self.offset_axis.round(b))

    def members(self, meeting_cube: bool = True, limit: int = MATERIALIZE_LIMIT) -> list[Flat]:
        if self.cardinality > limit:
            raise UnsupportedNet(f"net has {self.cardinality} members; too many to materialize")
        out = []
        for j in range(self.d):
            if self.single:
                combos = [(np.full(self.d - 1, 0.5), np.zeros(self.n_offsets))]
            else:
                sl = self.slope_axis.values()
                of = self.offset_axis.values()
                combos = (
                    (np.array(a), np.array(b))
                    for a in itertools.product(sl, repeat=self.d - 1)
                    for b in itertools.product(of, repeat=self.n_offsets)
                )
            for a, b in combos:
                W = self._flat(j, a, b)
                if not meeting_cube or meets_unit_cube(W):
                    out.append(W)
        return out

    def to_dict(self, limit: int = MATERIALIZE_LIMIT) -> dict:
        """JSON export: parameters plus every member meeting the unit cube."""
        return {
            "params": {
                "level": self.params.level,
                "alpha": self.params.alpha,
                "eps_net": self.params.eps_net,
                "c_geom": self.params.c_geom,
            },
            "d": self.d,
            "m": self.m,
            "cardinality": self.cardinality,
            "members": [W.to_dict() for W in self.members(limit=limit)],
        }


def meets_unit_cube(W: Flat) -> bool:
    lo = np.zeros((1, W.ambient))
    side = np.ones(1)
    if W.dim == 1:
        # closed-cube test: slightly enlarge so touching flats count
        return bool(_line_lengths(W, lo - 1e-12, side + 2e-12)[0] > 0)
    nu = W.normal
    return bool(_interior_hit_hyperplane(nu, float(nu @ W.point), lo - 1e-12, side + 2e-12)[0])


def build_net(np_: NetParams, d: int, m: int) -> Net:
    return Net(np_, d, m)
