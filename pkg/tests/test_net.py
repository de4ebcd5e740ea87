from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cantortubes.calibration import random_gamma_flat
from cantortubes.construction import ConstructionParams
from cantortubes.geometry import Flat, InvalidFlat, coordinate_angles, projection_metric
from cantortubes.net import Net, NetParams, UnsupportedNet, build_net, meets_unit_cube

P2 = ConstructionParams.constant(2, 2, 2, 6)


def _line_arrays(flats):
    pts = np.array([W.point for W in flats])
    dirs = np.array([W.direction for W in flats])
    return pts, dirs


def _brute_min_rho(W: Flat, pts: np.ndarray, dirs: np.ndarray) -> float:
    """min over members of the vertex-sup distance between projections, vectorized over members."""
    verts = np.array(list(itertools.product((0.0, 1.0), repeat=W.ambient)))
    wp = W.project(verts)
    worst = np.zeros(len(pts))
    for x, px in zip(verts, wp):
        proj = pts + ((x - pts) * dirs).sum(axis=1, keepdims=True) * dirs
        worst = np.maximum(worst, np.linalg.norm(proj - px, axis=1))
    return float(worst.min())


@pytest.fixture(scope="module")
def net_2_1_1():
    return build_net(NetParams.for_level(P2, 1, 1), 2, 1)


def test_net_params_defaults():
    np_ = NetParams.for_level(P2, 1, 1)
    assert np_.alpha == pytest.approx(0.25)
    assert np_.eps_net == pytest.approx(2.0**-5)
    assert np_.c_geom > 0


def test_level_one_net_size(net_2_1_1):
    assert net_2_1_1.cardinality <= 10**5
    assert len(net_2_1_1.members()) <= net_2_1_1.cardinality


def test_density_on_random_gamma_lines(net_2_1_1):
    # density verified by sampled minimization over all members, independent of the chart rounding
    rng = np.random.default_rng(0)
    eps = net_2_1_1.params.eps_net
    pts, dirs = _line_arrays(net_2_1_1.members(meeting_cube=False))
    alpha = net_2_1_1.params.alpha
    for i in range(1000):
        W = random_gamma_flat(rng, 2, 1, alpha, stress=bool(i % 2))
        assert projection_metric(W, net_2_1_1.nearest(W)) <= eps
        if i % 10 == 0:
            assert _brute_min_rho(W, pts, dirs) <= eps


@pytest.mark.parametrize("d, m", [(2, 1), (3, 1), (3, 2)])
@pytest.mark.parametrize("n", [1, 2])
def test_nearest_within_eps(d, m, n):
    p = ConstructionParams.constant(d, 2, 2 ** (d - 1), 2)
    net = Net(NetParams.for_level(p, n, m), d, m)
    rng = np.random.default_rng(10 * d + m + n)
    for i in range(200):
        W = random_gamma_flat(rng, d, m, net.params.alpha, stress=bool(i % 2))
        assert projection_metric(W, net.nearest(W)) <= net.params.eps_net


def test_coarse_net_single_member_per_chart():
    net = Net(NetParams.for_level(P2, 1, 1, eps_net=4.0), 2, 1)
    assert net.single
    assert net.cardinality == 2
    rng = np.random.default_rng(1)
    for _ in range(200):
        W = random_gamma_flat(rng, 2, 1, 0.25, stress=False)
        assert projection_metric(W, net.nearest(W)) <= 4.0


def test_cardinality_grows_polynomially():
    exps = []
    for n in (1, 2, 3):
        net = Net(NetParams.for_level(P2, n, 1), 2, 1)
        c = net.c_net
        assert math.log(net.cardinality) / math.log(1 / net.params.eps_net) <= c + 1e-12
        exps.append(c)
    # a two-parameter lattice per chart: the exponent approaches 2 from above as eps shrinks
    assert exps == sorted(exps, reverse=True)
    assert 2 <= exps[-1] <= exps[0] <= 3


def test_members_are_in_gamma(net_2_1_1):
    for W in net_2_1_1.members():
        assert coordinate_angles(W).min() > 0
        assert meets_unit_cube(W)


def test_unsupported_combinations():
    p = ConstructionParams.constant(4, 2, 8, 1)
    with pytest.raises(UnsupportedNet):
        Net(NetParams.for_level(p, 1, 1, c_geom=1.0), 4, 1)
    with pytest.raises(UnsupportedNet, match="too many"):
        Net(NetParams.for_level(P2, 4, 1), 2, 1).members()


def test_nearest_rejects_wrong_dimension(net_2_1_1):
    with pytest.raises(InvalidFlat):
        net_2_1_1.nearest(Flat.line([0, 0, 0], [1, 1, 1]))


def test_net_export_roundtrip():
    net = Net(NetParams.for_level(P2, 1, 1, eps_net=0.25), 2, 1)
    doc = net.to_dict()
    flats = [Flat.from_dict(f) for f in doc["members"]]
    assert len(flats) == len(net.members())
    assert doc["params"]["eps_net"] == 0.25


@given(st.integers(0, 2**31))
def test_nearest_is_idempotent(seed):
    net = Net(NetParams.for_level(P2, 2, 1), 2, 1)
    rng = np.random.default_rng(seed)
    W = random_gamma_flat(rng, 2, 1, net.params.alpha, stress=False)
    Wp = net.nearest(W)
    assert projection_metric(net.nearest(Wp), Wp) < 1e-12
