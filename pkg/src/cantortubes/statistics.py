"""Monte-Carlo experiments on Y_n^W, good events, tube scans and projected box dimension.

Trials are grown in batches with `sample_levels`; trial i always uses the
seed `derive_seed(seed, tag, i)`, so results do not depend on how trials are
split into chunks or how many threads run them.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import _hashrng
from .constants import FREQ_SE_BUDGET, MEAN_SE_BUDGET, c_geom_for
from .construction import (
    ConstructionParams,
    Realization,
    SelectionRule,
    build_realization,
    dimension_value,
    sample_levels,
)
from .geometry import Flat, flat_cube_measure, flat_cubes_measure, realization_flat_measure, strip_hits, Strip
from .net import Net
from .reports import Curve, ExperimentReport

# cubes materialized per chunk of trials
CHUNK_CUBES = 1 << 21

# seed tags separating the independent families of draws
_TAG_CONDITIONAL = 1
_TAG_UNCONDITIONAL = 2
_TAG_TUBES = 3


class InadmissibleParameters(ValueError):
    """Concentration parameters that would make a check vacuous or meaningless."""


# ---------------------------------------------------------------------------
# concentration parameters


def _ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def _dim_condition(params: ConstructionParams, level: int, t: float, s: float, eps: float) -> bool:
    r, P = params.r(level), params.P(level)
    tol = 1e-9
    a = -(t + 4 * eps) * math.log(r)
    b = -(s - eps) * math.log(r)
    c = math.log(P)
    e = -(s + eps) * math.log(r)
    return a <= b + tol and b <= c + tol and c <= e + tol


@dataclass(frozen=True)
class ConcentrationParams:
    t: float
    k: int
    eps_dim: float
    n0: int
    R0: float
    R: float
    Cn0: float
    Cn0_upper: float
    s: float
    lambda_: float | None = None
    lambda0: float | None = None

    @classmethod
    def derive(
        cls,
        params: ConstructionParams,
        t: float,
        k: int,
        eps_dim: float | None = None,
        R: float | None = None,
        lambda_: float | None = None,
        lambda0: float | None = None,
        period: int | None = None,
    ) -> "ConcentrationParams":
        """Fill in n0, R0 and C(n0) for a construction.

        n0 is the first level from which the dimension sandwich holds at
        every computed level. R0 bounds |W cap E_n0| by summing, over the
        P_n0 cubes, the m-volume of a ball circumscribing one cube (capped
        by the same bound for the unit cube). Without an explicit `R` the
        smallest admissible value 2 R0 C(n0) (with the tail bracket) is used.
        """
        d = params.d
        m = d - k
        if not 1 <= k <= d - 1:
            raise InadmissibleParameters("k must lie in 1..d-1")
        s = dimension_value(params, period)
        if not t < s:
            raise InadmissibleParameters(f"t = {t} must be below s = {s}")
        eps = (s - t) / 5 if eps_dim is None else eps_dim
        if not (0 < 5 * eps <= s - t + 1e-12):
            raise InadmissibleParameters("need 0 < 5 eps <= s - t")
        n0 = None
        for cand in range(1, params.depth + 1):
            if all(_dim_condition(params, j, t, s, eps) for j in range(cand, params.depth + 1)):
                n0 = cand
                break
        if n0 is None:
            raise InadmissibleParameters("dimension sandwich fails at the deepest level")
        r0 = params.r(n0)
        per_cube = _ball_volume(m) * (math.sqrt(d) * r0 / 2) ** m
        whole = _ball_volume(m) * (math.sqrt(d) / 2) ** m
        reach = min(params.P(n0) * per_cube, whole)
        R0 = max(reach / (params.P(n0) * r0 ** (t + d - k)), 1.0 + 1e-9)
        M = params.M_bound
        finite = math.prod(1 + params.r(i) ** eps for i in range(n0 + 1, params.depth + 1))
        Cn0 = (2 * math.sqrt(d) * M) ** (d - k) * finite
        tail = math.exp(params.r(params.depth) ** eps / (1 - 2.0 ** (-eps)))
        Cn0_upper = Cn0 * tail
        if R is None:
            R = 2 * R0 * Cn0_upper * (1 + 1e-9)
        return cls(t, k, eps, n0, R0, float(R), Cn0, Cn0_upper, s, lambda_, lambda0)

    @property
    def admissible(self) -> bool:
        """True when R exceeds 2 R0 C(n0) even with the tail bracket."""
        return self.R > 2 * self.R0 * self.Cn0_upper

    def mgf_lhs(self, params: ConstructionParams, n: int, lam: float) -> float:
        d = params.d
        return lam * (2 * math.sqrt(d) * params.r(n - 1)) ** (d - self.k) / (params.P(n) * params.r(n) ** d)

    def mgf_pair(self, params: ConstructionParams, n: int) -> tuple[float, float]:
        """(lambda, lambda0): the stored pair, or the largest lambda allowed with lambda0 = 1."""
        if self.lambda_ is not None and self.lambda0 is not None:
            return self.lambda_, self.lambda0
        lam0 = 1.0 if self.lambda0 is None else self.lambda0
        return lam0 / self.mgf_lhs(params, n, 1.0), lam0

    def check_mgf_pair(self, params: ConstructionParams, n: int) -> tuple[float, float]:
        lam, lam0 = self.mgf_pair(params, n)
        if not (lam > 0 and lam0 > 0 and self.mgf_lhs(params, n, lam) <= lam0 * (1 + 1e-12) and lam0 <= 1):
            raise InadmissibleParameters("invalid λ/λ0 pair")
        return lam, lam0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["admissible"] = self.admissible
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConcentrationParams":
        keys = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in keys})


# ---------------------------------------------------------------------------
# batched trial machinery


def _normalizer(params: ConstructionParams, n: int) -> float:
    return 1.0 / (params.P(n) * params.r(n) ** params.d)


def y_statistic(r: Realization, W: Flat, n: int) -> float:
    """Y_n^W = |W cap E_n| / (P_n r_n^d)."""
    return realization_flat_measure(r, W, n) * _normalizer(r.params, n)


def _chunks(count: int, per_trial_cubes: int) -> list[tuple[int, int]]:
    size = max(1, CHUNK_CUBES // max(1, per_trial_cubes))
    return [(a, min(count, a + size)) for a in range(0, count, size)]


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _batch_measures(
    params: ConstructionParams,
    rule: SelectionRule,
    flats: Sequence[Flat],
    seeds: np.ndarray,
    levels: Sequence[int],
    start_level: int = 0,
    start: np.ndarray | None = None,
    threads: int = 1,
) -> dict[int, np.ndarray]:
    """|W cap E_n| for every flat, trial and requested level: {n: (len(flats), T)}."""
    levels = sorted(set(levels))
    top = max(levels)
    T = len(seeds)
    base = 1 if start is None else start.shape[0]
    per_trial = base * math.prod(n for _, n in params.levels[start_level:top])

    def run(span):
        a, b = span
        out = {}
        for level, coords, trial in sample_levels(params, rule, seeds[a:b], top, start_level, start):
            if level not in levels:
                continue
            lo = coords * params.r(level)
            side = params.r(level)
            vals = np.empty((len(flats), b - a))
            for i, W in enumerate(flats):
                lengths = flat_cubes_measure(W, lo, side)
                vals[i] = np.bincount(trial, weights=lengths, minlength=b - a)
            out[level] = vals
        return out

    parts = _map(run, _chunks(T, per_trial), threads)
    return {n: np.concatenate([p[n] for p in parts], axis=1) for n in levels}


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _base(experiment, params, rule, seed, trials, **extra):
    cfg = {"construction": params.to_dict(), "rule": rule.to_dict()}
    cfg.update(extra)
    return ExperimentReport(experiment, cfg, int(seed), int(trials))


# ---------------------------------------------------------------------------
# martingale and MGF


def _conditional_y(params, rule, W, n, trials, seed, threads):
    if not 1 <= n <= params.depth:
        raise ValueError("level outside 1..depth")
    prefix = build_realization(params.truncated(n - 1), rule, seed)
    y_prev = y_statistic(prefix, W, n - 1)
    seeds = _hashrng.derive_seeds(seed, trials, _TAG_CONDITIONAL, n)
    vals = _batch_measures(params, rule, [W], seeds, [n], n - 1, prefix.cubes(n - 1), threads)[n][0]
    return y_prev, vals * _normalizer(params, n)


def martingale_check(
    params: ConstructionParams,
    rule: SelectionRule,
    W: Flat,
    n: int,
    trials: int,
    seed: int = 0,
    threads: int = 1,
) -> ExperimentReport:
    """Conditional mean of Y_n^W given a fixed E_{n-1} against Y_{n-1}^W."""
    t0 = time.perf_counter()
    y_prev, y = _conditional_y(params, rule, W, n, trials, seed, threads)
    mean, se = _mean_se(y)
    rep = _base("martingale", params, rule, seed, trials, flat=W.to_dict(), level=n)
    gap = abs(mean - y_prev)
    slack = 1e-12 * max(1.0, abs(y_prev))
    ok = gap <= MEAN_SE_BUDGET * se + slack
    if y_prev == 0.0:
        rep.flags.append("degenerate: flat misses E_{n-1}")
    rep.statistics = {
        "mean": mean,
        "se": se,
        "y_prev": y_prev,
        "gap_in_se": gap / se if se > 0 else 0.0,
        "budget_used": gap / (MEAN_SE_BUDGET * se + slack),
        "quantiles": dict(zip(("q05", "q50", "q95"), np.quantile(y, [0.05, 0.5, 0.95]).tolist())),
        "max": float(y.max()),
    }
    rep.bounds = {"se_budget": MEAN_SE_BUDGET}
    rep.checks = {"conditional_mean": bool(ok)}
    rep.curves = {"samples": Curve(["trial", "Y_n"], [(i, float(v)) for i, v in enumerate(y)])}
    rep.runtime = time.perf_counter() - t0
    return rep


def conditional_mgf_check(
    params: ConstructionParams,
    rule: SelectionRule,
    W: Flat,
    n: int,
    cp: ConcentrationParams,
    trials: int,
    seed: int = 0,
    threads: int = 1,
) -> ExperimentReport:
    """E(exp(lambda Y_n) | E_{n-1}) against exp((1 + lambda0) lambda Y_{n-1})."""
    t0 = time.perf_counter()
    lam, lam0 = cp.check_mgf_pair(params, n)
    y_prev, y = _conditional_y(params, rule, W, n, trials, seed, threads)
    e = np.exp(lam * y)
    mgf, se = _mean_se(e)
    rse = se / mgf
    bound = math.exp((1 + lam0) * lam * y_prev)
    rep = _base("mgf", params, rule, seed, trials, flat=W.to_dict(), level=n, concentration=cp.to_dict())
    rep.statistics = {"mgf": mgf, "relative_se": rse, "y_prev": y_prev, "lambda": lam, "lambda0": lam0}
    rep.bounds = {"mgf_bound": bound, "hypothesis_lhs": cp.mgf_lhs(params, n, lam)}
    rep.checks = {"mgf_bound": bool(mgf <= bound * (1 + MEAN_SE_BUDGET * rse) + 1e-12 * bound)}
    rep.runtime = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# tail and good events


def _binom_se(p: float, T: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / T)


def tail_probability_check(
    params: ConstructionParams,
    rule: SelectionRule,
    W: Flat,
    levels: Sequence[int],
    cp: ConcentrationParams,
    trials: int,
    seed: int = 0,
    threads: int = 1,
) -> ExperimentReport:
    """Exceedance frequency of Y_n^W > R r_n^(t-k) against exp(-r_n^(-eps)).

    All levels are read off the same independent realizations. The trend
    check asks each frequency to exceed its predecessor by at most
    3 combined standard errors.
    """
    t0 = time.perf_counter()
    levels = sorted(int(n) for n in levels)
    if not levels:
        raise ValueError("no levels")
    if levels[0] <= cp.n0:
        raise InadmissibleParameters(f"levels must exceed n0 = {cp.n0}")
    if levels[-1] > params.depth:
        raise ValueError("level beyond construction depth")
    if cp.lambda_ is not None or cp.lambda0 is not None:
        for n in levels:
            cp.check_mgf_pair(params, n)
    seeds = _hashrng.derive_seeds(seed, trials, _TAG_UNCONDITIONAL)
    meas = _batch_measures(params, rule, [W], seeds, levels, threads=threads)
    whole = flat_cube_measure(W)
    rep = _base("tail", params, rule, seed, trials, flat=W.to_dict(), levels=levels, concentration=cp.to_dict())
    rows = []
    checks = {}
    freqs, ses = [], []
    for n in levels:
        y = meas[n][0] * _normalizer(params, n)
        thr = cp.R * params.r(n) ** (cp.t - cp.k)
        bound = math.exp(-(params.r(n) ** (-cp.eps_dim)))
        ymax = whole * _normalizer(params, n)
        vacuous = thr >= ymax
        freq = float(np.mean(y > thr))
        se_b = _binom_se(bound, trials)
        se_f = _binom_se(freq, trials)
        ok = freq <= bound + FREQ_SE_BUDGET * se_b
        checks[f"tail_n{n}"] = bool(ok)
        if vacuous:
            rep.flags.append(f"vacuous at n={n}: threshold {thr:.4g} >= max Y {ymax:.4g}")
        rows.append((n, thr, freq, se_f, bound, se_b, int(vacuous)))
        freqs.append(freq)
        ses.append(se_f)
    trend = all(
        freqs[i + 1] <= freqs[i] + FREQ_SE_BUDGET * math.hypot(ses[i], ses[i + 1]) for i in range(len(freqs) - 1)
    )
    checks["nonincreasing"] = bool(trend)
    if not cp.admissible:
        rep.flags.append("R below 2 R0 C(n0): desk-scale threshold")
    rep.statistics = {"frequencies": dict(zip(map(str, levels), freqs))}
    rep.bounds = {"R": cp.R, "admissible_R": 2 * cp.R0 * cp.Cn0_upper}
    rep.checks = checks
    rep.curves = {
        "tail": Curve(["n", "threshold", "frequency", "frequency_se", "bound", "bound_se", "vacuous"], rows)
    }
    rep.runtime = time.perf_counter() - t0
    return rep


def good_event_threshold(params: ConstructionParams, n: int, cp: ConcentrationParams, c_geom: float) -> float:
    d, k = params.d, cp.k
    return cp.R * params.P(n) * params.r(n) ** (cp.t + d - k) + c_geom * params.r(n) ** (d - k)


def good_event_frequency(
    params: ConstructionParams,
    rule: SelectionRule,
    net: Net | Sequence[Flat],
    n: int,
    cp: ConcentrationParams,
    trials: int,
    seed: int = 0,
    threads: int = 1,
    c_geom: float | None = None,
) -> ExperimentReport:
    """Fraction of realizations in which |W' cap E_n| stays below the good-event bound for every member W'."""
    t0 = time.perf_counter()
    if isinstance(net, Net):
        if net.params.level != n:
            raise ValueError("net level mismatch")
        members = net.members()
        c_geom = net.params.c_geom if c_geom is None else c_geom
        eps_net = net.params.eps_net
    else:
        members = list(net)
        eps_net = None
        if c_geom is None:
            c_geom = c_geom_for(params.d, params.d - cp.k)
    if not members:
        raise ValueError("empty net")
    thr = good_event_threshold(params, n, cp, c_geom)
    seeds = _hashrng.derive_seeds(seed, trials, _TAG_UNCONDITIONAL)
    vals = _batch_measures(params, rule, members, seeds, [n], threads=threads)[n]
    worst = vals.max(axis=0)
    good = worst <= thr
    freq = float(good.mean())
    rep = _base(
        "good-events", params, rule, seed, trials, level=n, members=len(members), eps_net=eps_net,
        concentration=cp.to_dict(),
    )
    rep.statistics = {
        "frequency": freq,
        "frequency_se": _binom_se(freq, trials),
        "max_member_measure": float(worst.max()),
        "mean_worst_member_measure": float(worst.mean()),
    }
    rep.bounds = {"threshold": thr, "c_geom": c_geom}
    rep.checks = {}
    rep.runtime = time.perf_counter() - t0
    return rep


def good_event_trend(reports: Sequence[ExperimentReport], trials: int) -> bool:
    """Frequencies nondecreasing in n, up to 3 combined standard errors."""
    f = [r.statistics["frequency"] for r in reports]
    se = [_binom_se(x, trials) for x in f]
    return all(f[i + 1] >= f[i] - FREQ_SE_BUDGET * math.hypot(se[i], se[i + 1]) for i in range(len(f) - 1))


# ---------------------------------------------------------------------------
# tube scans


@dataclass
class TubeScan:
    widths: list
    exponents: list
    max_mass: list
    argmax: list
    resolution_limited: list
    tubes_scanned: list

    def ratio_curve(self, t: float) -> np.ndarray:
        return np.array(self.max_mass) / np.array(self.widths) ** t

    def max_ratio(self, t: float) -> float:
        return float(self.ratio_curve(t).max())


def _stratified_lines(rng, count: int) -> list[tuple[np.ndarray, float]]:
    """(unit normal, offset) pairs for d = 2 with angle x offset stratification."""
    n_ang = max(1, int(round(math.sqrt(count))))
    n_off = max(1, math.ceil(count / n_ang))
    out = []
    for i in range(n_ang):
        for j in range(n_off):
            if len(out) == count:
                return out
            phi = math.pi * (i + rng.random()) / n_ang
            nu = np.array([math.cos(phi), math.sin(phi)])
            lo = np.minimum(nu, 0).sum()
            hi = np.maximum(nu, 0).sum()
            out.append((nu, lo + (hi - lo) * (j + rng.random()) / n_off))
    return out


def _random_lines(rng, d: int, count: int) -> list[Flat]:
    out = []
    for _ in range(count):
        u = rng.normal(size=d)
        out.append(Flat.line(rng.random(d), u / np.linalg.norm(u)))
    return out


def _axis_lines(d: int, w: float) -> list[Flat]:
    """Axis-parallel lines on a grid of step w/2 in the remaining coordinates."""
    steps = np.arange(0, 1 + 1e-12, w / 2)
    if d > 2 and steps.size ** (d - 1) > 20_000:
        steps = np.linspace(0, 1, int(20_000 ** (1 / (d - 1))))
    out = []
    for axis in range(d):
        others = [i for i in range(d) if i != axis]
        u = np.zeros(d)
        u[axis] = 1.0
        for off in np.array(np.meshgrid(*[steps] * (d - 1), indexing="ij")).reshape(d - 1, -1).T:
            p = np.zeros(d)
            p[others] = off
            out.append(Flat.line(p, u))
    return out


def _cluster_lines(centres: np.ndarray, w: float, top: int = 12) -> list[Flat]:
    """Lines through the densest w-cells (pairwise) plus axis lines through each."""
    d = centres.shape[1]
    cells = np.floor(centres / w).astype(np.int64)
    uniq, inv, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    order = np.argsort(-counts, kind="stable")[:top]
    inv = inv.reshape(-1)
    anchors = [centres[inv == j].mean(axis=0) for j in order]
    out = []
    for a, b in zip(*np.triu_indices(len(anchors), 1)):
        if np.linalg.norm(anchors[a] - anchors[b]) > 0:
            out.append(Flat.through(anchors[a], anchors[b]))
    for a in anchors:
        for axis in range(d):
            out.append(Flat.line(a, np.eye(d)[axis]))
    return out


def _masses_d2(normals: np.ndarray, offsets: np.ndarray, lo: np.ndarray, side: float, w: float, mass: float):
    """Outer mass of every d = 2 tube {|nu.x - c| < w/2} (closed cubes, tolerance outward)."""
    half = w / 2 + 1e-12
    out = np.empty(len(offsets))
    block = max(1, (1 << 22) // max(1, lo.shape[0]))
    for a in range(0, len(offsets), block):
        nu = normals[a : a + block]
        c = offsets[a : a + block, None]
        base = nu @ lo.T
        lo_v = base + side * np.minimum(nu, 0).sum(axis=1)[:, None]
        hi_v = base + side * np.maximum(nu, 0).sum(axis=1)[:, None]
        out[a : a + block] = ((hi_v > c - half) & (lo_v < c + half)).sum(axis=1) * mass
    return out


def _line_normal_form(W: Flat) -> tuple[np.ndarray, float]:
    u = W.direction
    nu = np.array([-u[1], u[0]])
    return nu, float(nu @ W.point)


def tube_sup_scan(
    r: Realization,
    t: float | Sequence[float],
    widths: Sequence[float],
    tubes_per_width: int,
    strategy: str = "stratified+adversarial",
    seed: int = 0,
) -> ExperimentReport:
    """Largest mu(E cap T) / w^t over scanned tubes T of each width.

    mu(E cap T) is the mass of the deepest-level cubes meeting T. The scan
    uses `tubes_per_width` stratified random tubes; with the adversarial
    strategy it adds axis-parallel tubes on a w/2 grid and tubes through the
    densest w-cells of the realization.
    """
    t0 = time.perf_counter()
    exps = [float(t)] if np.isscalar(t) else [float(x) for x in t]
    widths = [float(w) for w in widths]
    if any(not 0 < w <= 1 for w in widths):
        raise ValueError("widths must lie in (0, 1]")
    if strategy not in ("stratified", "stratified+adversarial"):
        raise ValueError(f"unknown strategy {strategy!r}")
    p = r.params
    d = p.d
    n = r.depth
    side = p.r(n)
    mass = 1.0 / p.P(n)
    lo = r.lower_corners(n)
    centres = lo + side / 2
    rng = np.random.default_rng(_hashrng.derive_seed(seed, _TAG_TUBES))
    scan = TubeScan(widths, exps, [], [], [], [])
    for w in widths:
        if d == 2:
            pairs = _stratified_lines(rng, tubes_per_width)
            normals = [nu for nu, _ in pairs]
            offsets = [c for _, c in pairs]
            flats = [None] * len(pairs)
            if strategy != "stratified":
                for W in _axis_lines(d, w) + _cluster_lines(centres, w):
                    nu, c = _line_normal_form(W)
                    normals.append(nu)
                    offsets.append(c)
                    flats.append(W)
            masses = _masses_d2(np.array(normals), np.array(offsets), lo, side, w, mass)
            best = int(np.argmax(masses))
            W_best = flats[best] or Flat.hyperplane(normals[best], offsets[best])
            if W_best.dim != 1:
                W_best = Flat.line(W_best.point, W_best.basis[0])
            count = len(masses)
        else:
            flats = _random_lines(rng, d, tubes_per_width)
            if strategy != "stratified":
                flats += _axis_lines(d, w) + _cluster_lines(centres, w)
            masses = np.array([strip_hits(Strip(W, w), lo, side).sum() * mass for W in flats])
            best = int(np.argmax(masses))
            W_best = flats[best]
            count = len(flats)
        scan.max_mass.append(float(masses[best]))
        scan.argmax.append(W_best.to_dict())
        scan.resolution_limited.append(bool(w < side))
        scan.tubes_scanned.append(count)
    rep = ExperimentReport(
        "tube-scan",
        {
            "construction": p.to_dict(),
            "rule": r.rule.to_dict(),
            "realization_seed": r.seed,
            "t": exps,
            "widths": widths,
            "tubes_per_width": tubes_per_width,
            "strategy": strategy,
        },
        int(seed),
        0,
    )
    for w, lim in zip(widths, scan.resolution_limited):
        if lim:
            rep.flags.append(f"resolution-limited at width {w:.4g}")
    rep.statistics = {
        "max_ratio": {str(e): scan.max_ratio(e) for e in exps},
        "tubes_scanned": scan.tubes_scanned,
        "argmax": scan.argmax,
    }
    rows = []
    for i, w in enumerate(widths):
        rows.append((w, scan.max_mass[i], *[scan.max_mass[i] / w**e for e in exps], scan.tubes_scanned[i]))
    rep.curves = {"width": Curve(["width", "max_mass", *[f"ratio_t{e:g}" for e in exps], "tubes"], rows)}
    rep.payload = scan
    rep.runtime = time.perf_counter() - t0
    return rep


def tube_growth_check(scan: TubeScan, t: float, fine: float, reference: float, factor: float = 2.0) -> tuple[bool, float]:
    """max ratio at `fine` <= factor * max ratio at `reference`; returns (ok, growth)."""
    curve = scan.ratio_curve(t)
    i = scan.widths.index(fine)
    j = scan.widths.index(reference)
    growth = float(curve[i] / curve[j]) if curve[j] > 0 else float("inf")
    return growth <= factor, growth


# ---------------------------------------------------------------------------
# projected box dimension


@dataclass
class BoxDimension:
    slope: float
    intercept: float
    residual: float
    deltas: list
    counts: list


def _direction_basis(V, d: int) -> np.ndarray:
    if isinstance(V, Flat):
        return V.basis
    v = np.atleast_2d(np.asarray(V, dtype=float))
    if v.shape[1] != d:
        raise ValueError("direction has the wrong dimension")
    q, _ = np.linalg.qr(v.T)
    return q.T


def box_dimension_estimate(r: Realization, V, depths: Sequence[int]) -> BoxDimension:
    """Least-squares slope of log N(delta) against log(1/delta), delta = r_j.

    N(delta) counts delta-grid cells of V's coordinates met by the projected
    deepest-level cubes. For one-dimensional V each cube projects to an
    interval and the count is exact; for higher-dimensional V the count uses
    projected cube centres and is meant for delta well above r_depth.
    """
    depths = sorted(set(int(j) for j in depths))
    if len(depths) < 3:
        raise ValueError("insufficient scales")
    p = r.params
    if depths[-1] > r.depth or depths[0] < 0:
        raise ValueError("depths must lie within the realization depth")
    B = _direction_basis(V, p.d)
    side = p.r(r.depth)
    lo = r.lower_corners()
    counts = []
    deltas = [p.r(j) for j in depths]
    if B.shape[0] == 1:
        u = B[0]
        a = lo @ u + side * np.minimum(u, 0).sum()
        b = lo @ u + side * np.maximum(u, 0).sum()
        for delta in deltas:
            # cells meeting the interval's interior; endpoints on grid lines add no cell
            first = np.floor(a / delta + 1e-9).astype(np.int64)
            last = np.ceil(b / delta - 1e-9).astype(np.int64) - 1
            span = int((last - first).max()) + 1
            cells = first[:, None] + np.arange(span)[None, :]
            cells = cells[cells <= last[:, None]]
            counts.append(int(np.unique(cells).size))
    else:
        proj = (lo + side / 2) @ B.T
        for delta in deltas:
            counts.append(int(np.unique(np.floor(proj / delta).astype(np.int64), axis=0).shape[0]))
    x = -np.log(np.array(deltas))
    y = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return BoxDimension(float(slope), float(intercept), resid, deltas, counts)
