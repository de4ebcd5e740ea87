"""Randomized audits of the geometric lemmas and the c_geom calibration.

Three ratios are audited, all of which must stay below c_geom:

* transfer:  (H^m(W cap Q) - H^m(W' cap Q)) / r_n^(d+m), W' the nearest net member
* boundary:  H^m(B(Q, W, 2 eps)) / r_n^(d+m), eps = r_n^(2d+1)
* strips:    Z(S, n) r_n^(d-k) / h with h the largest sampled |W cap E_n|, W in Gamma_n

Flats are sampled half uniformly and half "stressed", i.e. at an angle of
alpha * f (f log-uniform in [1, 8]) to some coordinate hyperplane, so the
audit reaches the angle floor where the boundary estimate is tight.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .construction import (
    COLUMN_LR,
    DIAGONAL_LD,
    UNIFORM_SUBSET,
    ConstructionParams,
    SelectionRule,
    build_realization,
)
from .geometry import (
    Flat,
    Strip,
    boundary_measures,
    coordinate_angles,
    flat_cube_measure_estimate,
    flat_cubes_measure,
    strip_cube_count,
)
from .net import Net, NetParams

MAX_LEVEL = {(2, 1): 6, (3, 1): 4, (3, 2): 4}


def cube_grid(d: int, n: int, params: ConstructionParams) -> tuple[np.ndarray, float]:
    """All level-n cubes D_n as lower corners."""
    k = params.scale(n)
    idx = np.array(list(itertools.product(range(k), repeat=d)), dtype=float)
    return idx / k, 1.0 / k


def _random_unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_flat(rng, d: int, m: int, alpha: float | None = None, through=None) -> Flat:
    """Random flat through a uniform point of the cube (or `through`).

    With `alpha`, the flat is tilted to angle alpha * f from a random
    coordinate hyperplane, f log-uniform in [1, 8].
    """
    p = rng.random(d) if through is None else np.asarray(through, float)
    if alpha is None:
        if m == 1:
            return Flat.line(p, _random_unit(rng, d))
        nu = _random_unit(rng, d)
        return Flat.hyperplane(nu, float(nu @ p))
    theta = alpha * math.exp(rng.uniform(0, math.log(8)))
    i = int(rng.integers(d))
    w = _random_unit(rng, d)
    w[i] = 0.0
    w /= np.linalg.norm(w)
    e = np.zeros(d)
    e[i] = 1.0 if rng.random() < 0.5 else -1.0
    if m == 1:
        # small component along e_i: angle theta to H_i
        return Flat.line(p, w * math.cos(theta) + e * math.sin(theta))
    nu = e * math.cos(theta) + w * math.sin(theta)
    return Flat.hyperplane(nu, float(nu @ p))


def random_gamma_flat(rng, d: int, m: int, alpha: float, stress: bool, through=None) -> Flat:
    while True:
        W = random_flat(rng, d, m, alpha if stress else None, through)
        if coordinate_angles(W).min() >= alpha:
            return W


@dataclass
class LemmaAudit:
    d: int
    m: int
    cases: int = 0
    cubes_checked: int = 0
    max_transfer: float = 0.0
    max_boundary: float = 0.0
    max_rho_over_eps: float = 0.0
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "cases": self.cases,
            "cubes_checked": self.cubes_checked,
            "max_transfer_ratio": self.max_transfer,
            "max_boundary_ratio": self.max_boundary,
            "max_rho_over_eps": self.max_rho_over_eps,
            "violations": len(self.violations),
        }


def net_lemma_case(W: Flat, net: Net, params: ConstructionParams, n: int, grid, c_geom: float | None = None):
    """Transfer and boundary ratios for one flat over all level-n cubes."""
    from .geometry import projection_metric

    d, m = W.ambient, W.dim
    lo, side = grid
    r = params.r(n)
    eps = net.params.eps_net
    Wp = net.nearest(W)
    here = flat_cubes_measure(W, lo, side)
    hit = here > 0
    there = flat_cubes_measure(Wp, lo[hit], side)
    bnd = boundary_measures(W, lo[hit], side, 2 * eps)
    scale = r ** (d + m)
    transfer = (here[hit] - there) / scale
    boundary = bnd / scale
    rho = projection_metric(W, Wp) / eps
    return transfer, boundary, rho, int(hit.sum())


def net_lemma_audit(
    d: int,
    m: int,
    cases: int,
    seed: int,
    levels=None,
    c_geom: float | None = None,
) -> LemmaAudit:
    """Audit the net transfer inequality and the boundary bound on random flats in Gamma_n."""
    rng = np.random.default_rng(seed)
    levels = list(range(1, MAX_LEVEL[(d, m)] + 1)) if levels is None else list(levels)
    params = ConstructionParams.constant(d, 2, 2 ** (d - 1), max(levels))
    grids = {n: cube_grid(d, n, params) for n in levels}
    nets = {n: Net(NetParams.for_level(params, n, m, c_geom=c_geom if c_geom else 1.0), d, m) for n in levels}
    audit = LemmaAudit(d, m)
    for case in range(cases):
        n = levels[case % len(levels)]
        alpha = params.r(n) ** d
        W = random_gamma_flat(rng, d, m, alpha, stress=bool(case % 2))
        transfer, boundary, rho, hits = net_lemma_case(W, nets[n], params, n, grids[n])
        audit.cases += 1
        audit.cubes_checked += hits
        if hits:
            audit.max_transfer = max(audit.max_transfer, float(transfer.max()))
            audit.max_boundary = max(audit.max_boundary, float(boundary.max()))
        audit.max_rho_over_eps = max(audit.max_rho_over_eps, rho)
        if c_geom is not None and hits and (transfer.max() > c_geom or boundary.max() > c_geom or rho > 1):
            audit.violations.append({"case": case, "n": n, "flat": W.to_dict()})
    return audit


@dataclass
class StripAudit:
    cases: int = 0
    max_ratio: float = 0.0
    max_bound_ratio: float = 0.0
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "cases": self.cases,
            "max_ratio": self.max_ratio,
            "max_fubini_ratio": self.max_bound_ratio,
            "violations": len(self.violations),
        }


def sampled_h(rng, r, n: int, samples: int = 400) -> float:
    """Largest |W cap E_n| over sampled lines in Gamma_n, including lines that
    chase cubes at the angle floor in each axis direction."""
    d = r.params.d
    alpha = r.params.r(n) ** d
    lo = r.lower_corners(n)
    side = r.params.r(n)
    best = 0.0
    flats = [random_gamma_flat(rng, d, 1, alpha, stress=bool(i % 2)) for i in range(samples)]
    centres = lo + side / 2
    for c in centres[rng.permutation(len(centres))[:64]]:
        for axis in range(d):
            u = np.full(d, math.sin(alpha * 1.0000001))
            u[axis] = 1.0
            flats.append(Flat.line(c, u))
    for W in flats:
        best = max(best, float(flat_cubes_measure(W, lo, side).sum()))
    return best


def strip_count_audit(
    realizations: int,
    strips_per: int,
    seed: int,
    levels=(1, 2, 3, 4),
    c_geom: float | None = None,
) -> StripAudit:
    """Z(S, n) r_n^(d-k) / h for tubes of width <= r_n in d = 2 (k = 1).

    Also checks the slab bound Z r_n^d <= (w + 2 sqrt(d) r_n)^k h on the same strips.
    """
    rng = np.random.default_rng(seed)
    rules = [SelectionRule(COLUMN_LR), SelectionRule(UNIFORM_SUBSET), SelectionRule(DIAGONAL_LD)]
    d, k = 2, 1
    audit = StripAudit()
    for i in range(realizations):
        n = levels[i % len(levels)]
        params = ConstructionParams.constant(d, 2, 2, n)
        real = build_realization(params, rules[i % len(rules)], int(rng.integers(2**63)))
        h = sampled_h(rng, real, n)
        r = params.r(n)
        for j in range(strips_per):
            w = r * rng.uniform(1e-3, 1.0)
            if j % 4 == 0:
                u = np.eye(d)[rng.integers(d)]
                W = Flat.line(rng.random(d), u)
            else:
                W = random_flat(rng, d, 1)
            Z = strip_cube_count(real, Strip(W, w), n)
            ratio = Z * r ** (d - k) / h
            slab = Z * r**d / ((w + 2 * math.sqrt(d) * r) ** k * h)
            audit.cases += 1
            audit.max_ratio = max(audit.max_ratio, ratio)
            audit.max_bound_ratio = max(audit.max_bound_ratio, slab)
            if c_geom is not None and ratio > c_geom:
                audit.violations.append({"n": n, "width": w, "flat": W.to_dict(), "Z": Z, "h": h})
    return audit


def measure_audit_rows(d: int, m: int, cases: int, seed: int) -> list[tuple]:
    """Exact flat-cube measures against the sampling estimate on random flats through the unit cube.

    Rows are (case, exact, estimate, estimate standard error, exact - estimate).
    """
    rng = np.random.default_rng(seed)
    rows = []
    for case in range(cases):
        W = random_flat(rng, d, m, through=rng.uniform(0.2, 0.8, d))
        lo = np.zeros(d)
        exact = float(flat_cubes_measure(W, lo, 1.0)[0])
        est, se = flat_cube_measure_estimate(W, lo, 1.0, seed=case)
        rows.append((case, exact, est, se, exact - est))
    return rows


def calibrate_c_geom(d: int, m: int, cases: int = 10_000, seed: int = 20240601) -> dict:
    """Twice the largest audited ratio for (d, m)."""
    lemma = net_lemma_audit(d, m, cases, seed)
    out = {"lemma": lemma.as_dict()}
    worst = max(lemma.max_transfer, lemma.max_boundary)
    if (d, m) == (2, 1):
        strips = strip_count_audit(cases // 50, 50, seed + 1)
        out["strips"] = strips.as_dict()
        worst = max(worst, strips.max_ratio)
    out["c_geom"] = 2 * worst
    return out
