from __future__ import annotations

import math

import numpy as np
import pytest

from cantortubes.calibration import (
    calibrate_c_geom,
    cube_grid,
    measure_audit_rows,
    net_lemma_audit,
    random_gamma_flat,
    strip_count_audit,
)
from cantortubes.constants import C_GEOM, CALIBRATION_CASES, CALIBRATION_SEED, c_geom_for
from cantortubes.construction import ConstructionParams
from cantortubes.geometry import coordinate_angles


def _ceil3(x: float) -> float:
    return math.ceil(x * 1000) / 1000


@pytest.mark.parametrize("d, m", [(2, 1), (3, 1)])
def test_frozen_constants_are_reproducible(d, m):
    # the frozen values are the calibration output rounded up to three decimals
    out = calibrate_c_geom(d, m, CALIBRATION_CASES, CALIBRATION_SEED)
    assert _ceil3(out["c_geom"]) == C_GEOM[(d, m)]


def test_reduced_audit_within_frozen_constant_3_2():
    audit = net_lemma_audit(3, 2, 1000, CALIBRATION_SEED, c_geom=C_GEOM[(3, 2)])
    assert not audit.violations
    assert audit.max_rho_over_eps <= 1
    assert 2 * max(audit.max_transfer, audit.max_boundary) <= C_GEOM[(3, 2)]


def test_c_geom_lookup():
    assert c_geom_for(2, 1) == C_GEOM[(2, 1)]
    with pytest.raises(ValueError):
        c_geom_for(5, 2)


def test_audit_flags_a_too_small_constant():
    audit = net_lemma_audit(2, 1, 200, 1, levels=[1, 2], c_geom=1e-6)
    assert audit.violations
    assert audit.as_dict()["violations"] == len(audit.violations)


def test_strip_audit_slab_ratio_below_one():
    audit = strip_count_audit(12, 20, seed=4, c_geom=C_GEOM[(2, 1)])
    assert not audit.violations
    assert audit.max_bound_ratio <= 1.0


def test_cube_grid_covers_level():
    p = ConstructionParams.constant(2, 2, 2, 3)
    lo, side = cube_grid(2, 3, p)
    assert lo.shape == (64, 2)
    assert side == pytest.approx(1 / 8)


@pytest.mark.parametrize("stress", [False, True])
def test_random_gamma_flats_respect_floor(stress):
    rng = np.random.default_rng(0)
    for _ in range(100):
        W = random_gamma_flat(rng, 3, 2, 0.05, stress=stress)
        assert coordinate_angles(W).min() >= 0.05


def test_measure_audit_rows_agree():
    rows = measure_audit_rows(3, 2, 10, seed=2)
    assert [row[0] for row in rows] == list(range(10))
    for _, exact, est, se, err in rows:
        assert err == pytest.approx(exact - est)
        assert abs(err) <= 4 * se + 3 / 2**14
