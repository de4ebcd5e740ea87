"""Acceptance criteria, each at its stated tolerance.

Every test records one ``[PASS]`` or ``[FAIL]`` line; the lines are printed
together at the end of the pytest run (see ``conftest.py``). Run standalone
with ``python3 tests/test_acceptance.py``.

Two criteria are known shortfalls and are marked ``xfail(strict=True)``: they
run unweakened, and an unexpected pass turns the run red so the record gets
revisited. The README explains both.
"""
from __future__ import annotations

import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from cantortubes.calibration import net_lemma_audit, random_flat, strip_count_audit
from cantortubes.constants import AHLFORS_SPREAD_LIMIT, C_GEOM
from cantortubes.construction import (
    COLUMN_LR,
    DIAGONAL_LD,
    LEFT_COLUMN,
    UNIFORM_SUBSET,
    ConstructionParams,
    SelectionRule,
    build_realization,
)
from cantortubes.experiments import RunConfig, run_experiment
from cantortubes.geometry import Flat, flat_cubes_measure
from cantortubes.measure import NaturalMeasure, projection_measure
from cantortubes.statistics import martingale_check, tube_growth_check, tube_sup_scan
from oracles import flat_cube_measure_qmc

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
E22 = SelectionRule(COLUMN_LR)
F22 = SelectionRule(DIAGONAL_LD)
W_TILT = Flat.line([0.5, 0.5], [math.cos(1.0), math.sin(1.0)])

RESULTS: list[str] = []


def record(criterion: str, ok: bool, detail: str, runtime: float) -> bool:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail} ({runtime:.1f} s)")
    print(RESULTS[-1])
    return ok


def info(criterion: str, detail: str) -> None:
    RESULTS.append(f"[INFO] {criterion}: {detail}")
    print(RESULTS[-1])


def config(name: str) -> RunConfig:
    return RunConfig.load(CONFIGS / f"{name}.json", "experiment")


# ----------------------------------------------------------- 1 and 2: exact


def test_c01_exact_projection_laws():
    t0 = time.perf_counter()
    p = ConstructionParams.constant(2, 2, 2, 12)
    bad = 0
    for seed in range(100):
        e = build_realization(p, E22, seed)
        f = build_realization(p, F22, seed)
        for n in range(1, 13):
            bad += projection_measure(e, 1, level=n) != 1
            bad += projection_measure(e, 0, level=n) > Fraction(1, 2)
            bad += projection_measure(f, 0, level=n) != 1
            bad += projection_measure(f, 1, level=n) != 1
    runtime = time.perf_counter() - t0
    ok = bad == 0 and runtime < 10
    assert record("1 exact projection laws", ok, f"{bad} violations over 100 seeds x 12 levels x 2 models", runtime)


def test_c02_normalization_and_nestedness():
    t0 = time.perf_counter()
    bad = 0
    cases = [
        (ConstructionParams.constant(2, 2, 2, 12), E22),
        (ConstructionParams.constant(2, 2, 2, 12), F22),
        (ConstructionParams.constant(2, 3, 4, 7), SelectionRule(UNIFORM_SUBSET)),
        (ConstructionParams.constant(3, 2, 4, 6), SelectionRule(UNIFORM_SUBSET)),
        (ConstructionParams(2, ((2, 3), (3, 5), (2, 2), (4, 7))), SelectionRule(UNIFORM_SUBSET)),
    ]
    for p, rule in cases:
        for seed in range(20):
            r = build_realization(p, rule, seed)
            for k in range(r.depth + 1):
                bad += len(r.cubes(k)) != p.P(k)
                bad += NaturalMeasure(r, k).total_mass() != 1
    runtime = time.perf_counter() - t0
    assert record("2 normalization and nestedness", bad == 0, f"{bad} violations over 100 realizations", runtime)


# ---------------------------------------------------------------- 3: oracle


def test_c03_geometry_oracle_agreement():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    pairs = 0
    hexagon = Flat.hyperplane([1, 1, 1], 1.5)
    exact = flat_cubes_measure(hexagon, np.zeros(3), 1.0)[0]
    ref = flat_cube_measure_qmc(hexagon.point, hexagon.basis, np.zeros(3), 1.0)
    worst = max(worst, abs(exact - ref) / ref, abs(exact - 3 * math.sqrt(3) / 4) / exact)
    kinds = [(2, 1), (3, 1), (3, 2)]
    for i in range(1000):
        d, m = kinds[i % 3]
        side = 0.5 ** int(rng.integers(0, 4))
        lo = rng.integers(0, int(round(1 / side)), size=d) * side
        W = random_flat(rng, d, m, through=lo + side * rng.uniform(0.25, 0.75, d))
        exact = flat_cubes_measure(W, lo, side)[0]
        ref = flat_cube_measure_qmc(W.point, W.basis, lo, side, log2_points=20)
        worst = max(worst, abs(exact - ref) / ref)
        pairs += 1
    runtime = time.perf_counter() - t0
    ok = worst <= 1e-3 and runtime < 120
    assert record("3 geometry oracle agreement", ok, f"max relative error {worst:.2e} over {pairs} pairs + hexagon",
                  runtime)


# -------------------------------------------------------- 4 and 5: geometry


def test_c04_net_lemma_audit():
    t0 = time.perf_counter()
    audit = net_lemma_audit(2, 1, 1000, 20240601, c_geom=C_GEOM[(2, 1)])
    runtime = time.perf_counter() - t0
    ok = not audit.violations and audit.max_rho_over_eps <= 1 and runtime < 300
    detail = (f"{len(audit.violations)} violations; max transfer {audit.max_transfer:.3f}, max boundary "
              f"{audit.max_boundary:.3f} vs c_geom {C_GEOM[(2, 1)]}")
    assert record("4 net lemma audit", ok, detail, runtime)


def test_c05_strip_count_bound():
    t0 = time.perf_counter()
    audit = strip_count_audit(20, 50, seed=20240602, c_geom=C_GEOM[(2, 1)])
    runtime = time.perf_counter() - t0
    ok = not audit.violations and audit.cases == 1000
    detail = f"{len(audit.violations)} violations in {audit.cases} strips; max Z r^(d-k)/h {audit.max_ratio:.3f}"
    assert record("5 strip count bound", ok, detail, runtime)


# ------------------------------------------------------- 6 and 7: statistics


def test_c06_martingale_identity():
    # per model and level: the fixed tilted line, plus a line at the same angle through the
    # centre of the first retained cube of the conditioning prefix (so the check is never vacuous)
    t0 = time.perf_counter()
    p = ConstructionParams.constant(2, 2, 2, 6)
    worst, fails, degenerate, checks = 0.0, 0, 0, 0
    for rule in (E22, F22):
        for n in range(1, 7):
            prefix = build_realization(p.truncated(n - 1), rule, 11)
            centre = prefix.lower_corners(n - 1)[0] + p.r(n - 1) / 2
            for W in (W_TILT, Flat.line(centre, [math.cos(1.0), math.sin(1.0)])):
                rep = martingale_check(p, rule, W, n, 10_000, seed=11)
                worst = max(worst, rep.statistics["budget_used"])
                fails += not rep.passed
                degenerate += bool(rep.flags)
                checks += 1
    runtime = time.perf_counter() - t0
    detail = (f"{fails} of {checks} checks fail ({degenerate} degenerate); largest gap uses "
              f"{100 * worst:.0f}% of the 4 SE budget")
    assert record("6 martingale identity", fails == 0, detail, runtime)


def test_c07_mgf_and_tail_bounds():
    t0 = time.perf_counter()
    mgf = run_experiment(config("mgf"))
    tail = run_experiment(config("tail"))
    runtime = time.perf_counter() - t0
    freqs = [row[2] for row in tail.curves["tail"].rows]
    ok = mgf.passed and tail.passed and runtime < 600
    detail = (f"mgf {mgf.statistics['mgf']:.4f} <= bound {mgf.bounds['mgf_bound']:.4f}; tail frequencies "
              f"{freqs} at admissible R = {tail.bounds['R']:.3g}, vacuous at "
              f"{sum('vacuous' in f for f in tail.flags)} of {len(freqs)} levels")
    record("7 MGF and tail bounds", ok, detail, runtime)
    desk = run_experiment(config("tail_desk_scale"))
    rows = desk.curves["tail"].rows
    info("7 desk-scale R = 1",
         "frequencies " + ", ".join(f"n={r[0]}: {r[2]:.3f} (bound {r[4]:.3f})" for r in rows)
         + f"; nonincreasing {desk.checks['nonincreasing']}")
    assert ok


# ------------------------------------------------------------- 8: tube scan


@pytest.fixture(scope="module")
def tube_report():
    t0 = time.perf_counter()
    rep = run_experiment(config("tube_scan"))
    rep.runtime = time.perf_counter() - t0
    return rep


def _tube_case(rep, t: float) -> bool:
    ok, growth = tube_growth_check(rep.payload, t, 2.0**-10, 2.0**-5)
    ok = ok and rep.runtime < 600 and min(rep.payload.tubes_scanned) >= 2000
    return record(f"8 tube boundedness t={t}", ok, f"growth finest / 2^-5 = {growth:.2f} (limit 2)", rep.runtime)


@pytest.mark.parametrize("t", [0.7, 0.8])
def test_c08_tube_boundedness(tube_report, t):
    assert _tube_case(tube_report, t)


@pytest.mark.xfail(strict=True, reason="scanned growth 2.68 exceeds the factor 2 at t=0.9; see README")
def test_c08_tube_boundedness_t09(tube_report):
    assert _tube_case(tube_report, 0.9)


def test_c08_tube_contrast_left_column():
    t0 = time.perf_counter()
    r = build_realization(ConstructionParams.constant(2, 2, 2, 12), LEFT_COLUMN, 1)
    widths = [2.0**-j for j in range(3, 11)]
    scan = tube_sup_scan(r, 1.0, widths, 2000, seed=1).payload
    _, growth = tube_growth_check(scan, 1.0, 2.0**-10, 2.0**-5)
    runtime = time.perf_counter() - t0
    assert record("8 tube contrast (forced column, t=1)", growth >= 4, f"growth {growth:.1f} (needs >= 4)", runtime)


# ---------------------------------------------------------- 9 and 10: scans


@pytest.mark.xfail(strict=True, reason="14 of 50 slopes fall below 0.9 (minimum 0.851); see README")
def test_c09_projection_box_dimension():
    t0 = time.perf_counter()
    rep = run_experiment(config("box_dim"))
    runtime = time.perf_counter() - t0
    s = rep.statistics
    ok = rep.passed and runtime < 300
    detail = f"{s['in_band']}/50 slopes in [0.9, 1.0]; range [{s['min_slope']:.3f}, {s['max_slope']:.3f}]"
    assert record("9 projection box dimension", ok, detail, runtime)


def test_c10_ahlfors_regularity():
    t0 = time.perf_counter()
    rep = run_experiment(config("ahlfors"))
    runtime = time.perf_counter() - t0
    s = rep.statistics
    detail = (f"spread {s['spread']:.2f}, bracket spread {s['bracket_spread']:.2f} "
              f"(bracket [{s['bracket_min']:.3f}, {s['bracket_max']:.3f}]) vs limit {AHLFORS_SPREAD_LIMIT:g}")
    assert record("10 Ahlfors regularity", rep.passed, detail, runtime)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
