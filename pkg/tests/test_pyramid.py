from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import random_cloud
from hpsr.geometry import VoxelCloud
from hpsr.pyramid import PyramidParams, build_pyramid, derive_params, map_s_to_q


def test_derive_params_examples():
    p = derive_params(F(1, 8))
    assert (p.L, p.K, p.Kprime) == (2, 2, 1)
    p = derive_params(F(3, 8))
    assert (p.L, p.K, p.Kprime, p.g) == (1, 2, 0, F(3, 4))
    p = derive_params(F(1, 2))
    assert (p.L, p.K, p.Kprime, p.g) == (0, 1, 0, F(1, 2))


def test_derive_params_K_one_has_no_reuse():
    p = derive_params(F(1, 64), K_max=1, Kprime_max=2)
    assert (p.K, p.Kprime) == (1, 0)


@pytest.mark.parametrize("q", [F(0), F(1), F(3, 2), F(-1, 2)])
def test_derive_params_rejects_q(q):
    with pytest.raises(ValueError, match="q out of range"):
        derive_params(q)


def test_L_matches_log2_bound():
    for den in range(2, 200):
        for num in range(1, den):
            q = F(num, den)
            L = derive_params(q).L
            assert 2 ** (L + 1) * q >= 1 > 2 ** L * q
            g = derive_params(q).g
            assert F(1, 2) <= g < 1


def test_params_validation():
    with pytest.raises(ValueError):
        PyramidParams(F(1, 8), 2, 3, 1)
    with pytest.raises(ValueError):
        PyramidParams(F(1, 8), 1, 2, 0)


@pytest.mark.parametrize("s, q", [("3/4", F(1, 4)), ("1/2", F(1, 8)), ("7/8", F(1, 2)), ("1/4", F(1, 16)),
                                  ("1/8", F(1, 32)), ("1/16", F(1, 64))])
def test_map_s_to_q(s, q):
    assert map_s_to_q(s) == q


@pytest.mark.parametrize("s", ["0", "5/4", "1"])
def test_map_s_to_q_rejects(s):
    with pytest.raises(ValueError):
        map_s_to_q(s)


def test_build_pyramid_example():
    V = VoxelCloud([[0, 0, 0], [7, 7, 7]], 3)
    pyr = build_pyramid(V, derive_params(F(1, 8)))
    assert [lv.points.tolist() for lv in pyr.levels] == [
        [[0, 0, 0], [4, 4, 4]], [[0, 0, 0], [2, 2, 2]], [[0, 0, 0], [1, 1, 1]]]


def test_origin_is_fixed():
    V = VoxelCloud([[0, 0, 0]], 6)
    for q in (F(1, 8), F(3, 8), F(1, 2), F(5, 64)):
        assert all(lv.points.tolist() == [[0, 0, 0]] for lv in build_pyramid(V, derive_params(q)).levels)


def test_full_depth_bitdepths(rng):
    V = random_cloud(rng, 500, 7)
    params = derive_params(F(1, 4), K_max=5)
    assert (params.L, params.K, params.g) == (1, 2, F(1, 2))
    pyr = build_pyramid(V, params)
    assert len(pyr) == 3
    assert pyr[0].bitdepth == 7 + 1
    assert pyr[1].bitdepth == pyr[2].bitdepth == 7
    assert len(pyr[2]) <= len(pyr[1])


@pytest.mark.parametrize("q, K_max", [(F(1, 8), 2), (F(3, 8), 2), (F(5, 16), 3), (F(1, 2), 2), (F(3, 32), 3)])
def test_build_pyramid_matches_oracle(rng, q, K_max):
    V = random_cloud(rng, 800, 8, "blob")
    params = derive_params(q, K_max=K_max)
    pyr = build_pyramid(V, params)
    want, L, g = oracles.pyramid(V.as_set(), q, params.K)
    assert (L, g) == (params.L, params.g)
    assert [lv.as_set() for lv in pyr.levels] == want
    for k in range(1, len(pyr)):
        assert len(pyr[k]) <= len(pyr[k - 1])
    for lv in pyr.levels:
        assert np.array_equal(lv.points, np.unique(lv.points, axis=0))


def test_every_level_point_has_a_source(rng):
    V = random_cloud(rng, 3000, 9, "surface")
    params = derive_params(F(3, 16))
    pyr = build_pyramid(V, params)
    g = params.g
    for k in range(1, len(pyr)):
        factor = g if k == params.K else F(1, 2)
        assert oracles.scale_set(pyr[k - 1].as_set(), factor) == pyr[k].as_set()


def test_pyramid_deterministic(rng):
    V = random_cloud(rng, 1000, 8)
    a = build_pyramid(V, derive_params(F(1, 8)))
    b = build_pyramid(VoxelCloud(V.points[::-1]), derive_params(F(1, 8)))
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a.levels, b.levels))


def test_empty_cloud_rejected():
    with pytest.raises(ValueError, match="empty cloud"):
        build_pyramid(VoxelCloud(np.empty((0, 3), dtype=int)), derive_params(F(1, 8)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.data())
def test_s_to_q_is_two_applications(den, data):
    num = data.draw(st.integers(1, den - 1))
    s = F(num, den)

    def f(x):
        return F(x.numerator - 1, x.denominator) if x > F(1, 2) else x / 2

    assert map_s_to_q(s) == f(f(s))
