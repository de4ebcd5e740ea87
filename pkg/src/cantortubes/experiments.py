"""Run configurations and the named experiments behind the command line."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import measure_audit_rows, net_lemma_audit, strip_count_audit
from .constants import AHLFORS_SPREAD_LIMIT, c_geom_for
from .construction import (
    ConstructionParams,
    InvalidParameters,
    SelectionRule,
    build_realization,
    validate_params,
)
from .geometry import Flat
from .measure import NaturalMeasure, ahlfors_ratio_scan
from .net import NetParams, build_net
from .reports import Curve, ExperimentReport
from .statistics import (
    ConcentrationParams,
    box_dimension_estimate,
    conditional_mgf_check,
    good_event_frequency,
    good_event_trend,
    martingale_check,
    tail_probability_check,
    tube_growth_check,
    tube_sup_scan,
)

SCHEMA_VERSION = 1
EXPERIMENTS = ("martingale", "mgf", "tail", "good-events", "tube-scan", "box-dim", "ahlfors", "net-audit")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params: ConstructionParams | None = None
    rule: SelectionRule = field(default_factory=SelectionRule)
    seed: int = 0
    experiment: dict = field(default_factory=dict)
    concentration: dict | None = None
    threads: int = 1
    formats: tuple = ("json", "csv")
    figures: bool = False
    config_path: str | None = None
    out: str = "."

    @classmethod
    def from_dict(cls, data: dict, command: str) -> "RunConfig":
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        try:
            params = ConstructionParams.from_dict(data["construction"]) if "construction" in data else None
            rule = SelectionRule.from_dict(data.get("rule", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad construction or rule: {exc}") from None
        exp = dict(data.get("experiment", {}))
        return cls(
            command=command,
            params=params,
            rule=rule,
            seed=int(data.get("seed", 0)),
            experiment=exp,
            concentration=exp.get("concentration"),
            threads=int(data.get("threads", 1)),
            formats=tuple(data.get("formats", ("json", "csv"))),
        )

    @classmethod
    def load(cls, path: str | Path, command: str) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = cls.from_dict(data, command)
        cfg.config_path = str(path)
        return cfg

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config_path": self.config_path,
            "construction": None if self.params is None else self.params.to_dict(),
            "rule": self.rule.to_dict(),
            "seed": self.seed,
            "experiment": self.experiment,
            "threads": self.threads,
            "formats": list(self.formats),
            "figures": self.figures,
        }

    def require_params(self) -> ConstructionParams:
        if self.params is None:
            raise ConfigError("config has no construction block")
        report = validate_params(self.params, self.rule)
        if not report:
            raise InvalidParameters(report)
        return self.params


def _flat(doc) -> Flat:
    if doc is None:
        raise ConfigError("experiment needs a flat")
    return Flat.from_dict(doc)


def _widths(opts) -> list[float]:
    if "widths" in opts:
        return [float(w) for w in opts["widths"]]
    lo, hi = opts.get("width_exponents", [3, 10])
    return [2.0**-j for j in range(int(lo), int(hi) + 1)]


def _concentration(cfg: RunConfig, params: ConstructionParams) -> ConcentrationParams:
    c = cfg.concentration or {}
    if "t" not in c:
        raise ConfigError("experiment needs concentration.t")
    return ConcentrationParams.derive(
        params,
        float(c["t"]),
        int(c.get("k", 1)),
        eps_dim=c.get("eps_dim"),
        R=c.get("R"),
        lambda_=c.get("lambda"),
        lambda0=c.get("lambda0"),
        period=c.get("period"),
    )


def _martingale(cfg, opts):
    p = cfg.require_params()
    rep = martingale_check(p, cfg.rule, _flat(opts.get("flat")), int(opts.get("level", p.depth)),
                           int(opts.get("trials", 10_000)), cfg.seed, cfg.threads)
    if rep.trials < 1000:
        rep.flags.append("fewer than 10^3 trials")
    return rep


def _mgf(cfg, opts):
    p = cfg.require_params()
    cp = _concentration(cfg, p)
    return conditional_mgf_check(p, cfg.rule, _flat(opts.get("flat")), int(opts.get("level", p.depth)), cp,
                                 int(opts.get("trials", 10_000)), cfg.seed, cfg.threads)


def _tail(cfg, opts):
    p = cfg.require_params()
    cp = _concentration(cfg, p)
    levels = opts.get("levels", list(range(cp.n0 + 1, p.depth + 1)))
    return tail_probability_check(p, cfg.rule, _flat(opts.get("flat")), levels, cp,
                                  int(opts.get("trials", 10_000)), cfg.seed, cfg.threads)


def _good_events(cfg, opts):
    t0 = time.perf_counter()
    p = cfg.require_params()
    cp = _concentration(cfg, p)
    m = p.d - cp.k
    trials = int(opts.get("trials", 200))
    levels = [int(n) for n in opts.get("levels", [4, 5, 6])]
    reps = []
    rows = []
    for n in levels:
        net = build_net(NetParams.for_level(p, n, m, eps_net=opts.get("eps_net")), p.d, m)
        rep = good_event_frequency(p, cfg.rule, net, n, cp, trials, cfg.seed, cfg.threads)
        reps.append(rep)
        rows.append((n, rep.statistics["frequency"], rep.statistics["frequency_se"], rep.bounds["threshold"],
                     rep.params["members"], net.params.eps_net))
    out = ExperimentReport("good-events", {"construction": p.to_dict(), "rule": cfg.rule.to_dict(),
                                           "levels": levels, "concentration": cp.to_dict()}, cfg.seed, trials)
    out.statistics = {"frequencies": {str(n): r.statistics["frequency"] for n, r in zip(levels, reps)}}
    out.bounds = {"R": cp.R, "admissible_R": 2 * cp.R0 * cp.Cn0_upper}
    out.checks = {"nondecreasing": good_event_trend(reps, trials)}
    if not cp.admissible:
        out.flags.append("R below 2 R0 C(n0): desk-scale threshold")
    out.curves = {"frequency": Curve(["n", "frequency", "frequency_se", "threshold", "members", "eps_net"], rows)}
    out.runtime = time.perf_counter() - t0
    return out


def _tube_scan(cfg, opts):
    p = cfg.require_params()
    real = build_realization(p, cfg.rule, cfg.seed)
    exps = opts.get("t", [0.8])
    exps = [exps] if np.isscalar(exps) else list(exps)
    widths = _widths(opts)
    rep = tube_sup_scan(real, exps, widths, int(opts.get("tubes_per_width", 2000)),
                        opts.get("strategy", "stratified+adversarial"), int(opts.get("scan_seed", cfg.seed)))
    fine = float(opts.get("fine_width", min(widths)))
    ref = float(opts.get("reference_width", 2.0**-5))
    factor = float(opts.get("growth_factor", 2.0))
    growth = {}
    for t in exps:
        ok, g = tube_growth_check(rep.payload, float(t), fine, ref, factor)
        growth[str(t)] = g
        if float(t) < p.d - 1:
            rep.checks[f"bounded_t{t:g}"] = ok
    rep.statistics["growth"] = growth
    rep.bounds = {"growth_factor": factor, "fine_width": fine, "reference_width": ref}
    return rep


def _box_dim(cfg, opts):
    t0 = time.perf_counter()
    p = cfg.require_params()
    real = build_realization(p, cfg.rule, cfg.seed)
    depths = list(range(*opts.get("depth_range", [6, p.depth]))) if "depths" not in opts else opts["depths"]
    dirs = opts.get("directions", 50)
    if isinstance(dirs, int):
        if p.d != 2:
            raise ConfigError("random directions are generated for d = 2; list them explicitly otherwise")
        rng = np.random.default_rng(int(opts.get("direction_seed", 0)))
        angles = rng.uniform(0, math.pi, dirs)
        dirs = [[math.cos(a), math.sin(a)] for a in angles]
    lo, hi = opts.get("band", [0.9, 1.0])
    rows, slopes = [], []
    for i, v in enumerate(dirs):
        est = box_dimension_estimate(real, v, depths)
        slopes.append(est.slope)
        for delta, count in zip(est.deltas, est.counts):
            rows.append((i, *[float(x) for x in np.atleast_1d(v)], -math.log(delta), math.log(count), count))
    rep = ExperimentReport("box-dim", {"construction": p.to_dict(), "rule": cfg.rule.to_dict(), "depths": depths,
                                       "directions": [list(map(float, np.atleast_1d(v))) for v in dirs]},
                           cfg.seed, 0)
    slopes = np.array(slopes)
    rep.statistics = {"slopes": slopes.tolist(), "min_slope": float(slopes.min()), "max_slope": float(slopes.max()),
                      "in_band": int(((slopes >= lo) & (slopes <= hi)).sum())}
    rep.bounds = {"band": [lo, hi]}
    rep.checks = {"slopes_in_band": bool(np.all((slopes >= lo - 1e-12) & (slopes <= hi + 1e-12)))}
    header = ["direction", *[f"v{j}" for j in range(len(np.atleast_1d(dirs[0])))], "log_inv_delta", "log_count",
              "count"]
    rep.curves = {"box": Curve(header, rows)}
    rep.runtime = time.perf_counter() - t0
    return rep


def _ahlfors(cfg, opts):
    t0 = time.perf_counter()
    p = cfg.require_params()
    real = build_realization(p, cfg.rule, cfg.seed)
    if "radii" in opts:
        radii = [float(r) for r in opts["radii"]]
    else:
        lo, hi = opts.get("radius_exponents", [2, 10])
        radii = [2.0**-j for j in range(int(lo), int(hi) + 1)]
    limit = float(opts.get("limit", AHLFORS_SPREAD_LIMIT))
    scan = ahlfors_ratio_scan(NaturalMeasure(real), int(opts.get("samples", 200)), radii, opts.get("exponent"),
                              int(opts.get("sample_seed", cfg.seed)))
    rep = ExperimentReport("ahlfors", {"construction": p.to_dict(), "rule": cfg.rule.to_dict(), "radii": radii,
                                       "exponent": scan.exponent, "samples": int(opts.get("samples", 200))},
                           cfg.seed, 0)
    rep.statistics = {"min_ratio": scan.min_ratio, "max_ratio": scan.max_ratio, "spread": scan.spread,
                      "bracket_min": scan.bracket_min, "bracket_max": scan.bracket_max,
                      "bracket_spread": scan.bracket_spread}
    rep.bounds = {"spread_limit": limit}
    rep.checks = {"spread": scan.spread <= limit}
    header = [*[f"x{j}" for j in range(p.d)], "r", "lower", "estimate", "upper"]
    rep.curves = {"balls": Curve(header, scan.rows)}
    rep.runtime = time.perf_counter() - t0
    return rep


def _net_audit(cfg, opts):
    t0 = time.perf_counter()
    d = int(opts.get("d", cfg.params.d if cfg.params else 2))
    m = int(opts.get("m", 1))
    c_geom = float(opts.get("c_geom", c_geom_for(d, m)))
    cases = int(opts.get("cases", 1000))
    lemma = net_lemma_audit(d, m, cases, cfg.seed, opts.get("levels"), c_geom=c_geom)
    rep = ExperimentReport("net-audit", {"d": d, "m": m, "cases": cases, "levels": opts.get("levels")},
                           cfg.seed, cases)
    rep.statistics = {"lemma": lemma.as_dict()}
    rep.bounds = {"c_geom": c_geom}
    rep.checks = {"transfer_and_boundary": not lemma.violations, "rho_within_eps": lemma.max_rho_over_eps <= 1}
    rows = measure_audit_rows(d, m, int(opts.get("measure_cases", 50)), cfg.seed)
    rep.curves = {"measure_audit": Curve(["case", "exact", "oracle", "oracle_se", "error"], rows)}
    # one-point resolution of the 2^14-point sampler over a window of side at most sqrt(d)
    floor = d ** (m / 2) / 2**14
    rep.checks["measure_audit"] = all(abs(row[4]) <= 4 * row[3] + floor for row in rows)
    if (d, m) == (2, 1) and opts.get("strips", True):
        strips = strip_count_audit(int(opts.get("strip_realizations", 20)), int(opts.get("strips_per", 50)),
                                   cfg.seed + 1, c_geom=c_geom)
        rep.statistics["strips"] = strips.as_dict()
        rep.checks["strip_count"] = not strips.violations
    rep.runtime = time.perf_counter() - t0
    return rep


_RUNNERS = {
    "martingale": _martingale,
    "mgf": _mgf,
    "tail": _tail,
    "good-events": _good_events,
    "tube-scan": _tube_scan,
    "box-dim": _box_dim,
    "ahlfors": _ahlfors,
    "net-audit": _net_audit,
}


def run_experiment(cfg: RunConfig) -> ExperimentReport:
    name = cfg.experiment.get("name")
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)}")
    return _RUNNERS[name](cfg, cfg.experiment)


__all__ = ["ConfigError", "EXPERIMENTS", "RunConfig", "run_experiment"]
