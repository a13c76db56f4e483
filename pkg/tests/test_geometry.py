from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from hpsr.geometry import (
    FACE6,
    FACE_EDGE18,
    FULL26,
    VoxelCloud,
    as_fraction,
    candidate_count,
    coord_class,
    coord_classes,
    neighbor_set,
    phi,
    preimage_bounds,
    preimage_interval,
    round_half_up,
    round_scaled,
)


@pytest.mark.parametrize("x, expected", [(0, 0), (F(7, 2), 4), (F(5, 4), 1), (F(1, 2), 1), (F(3, 2), 2)])
def test_round_half_up(x, expected):
    assert round_half_up(x) == expected


def test_round_half_up_rejects_negative():
    with pytest.raises(ValueError, match="negative coordinate"):
        round_half_up(F(-1, 3))


def test_round_scaled_matches_fraction_rounding(rng):
    vals = rng.integers(0, 5000, size=300)
    for num, den in [(1, 2), (3, 4), (5, 7), (1, 8), (8, 3)]:
        got = round_scaled(vals, num, den)
        assert got.tolist() == [oracles.rhu(F(int(v) * num, den)) for v in vals]


def test_as_fraction_rejects_float():
    with pytest.raises(TypeError):
        as_fraction(0.5)
    assert as_fraction("3/8") == F(3, 8)


def test_neighbor_set_sizes_and_order():
    assert (len(FACE6), len(FACE_EDGE18), len(FULL26)) == (6, 18, 26)
    for ns in (FACE6, FACE_EDGE18, FULL26):
        offs = [tuple(o) for o in ns.offsets]
        assert len(set(offs)) == len(offs)
        assert (0, 0, 0) not in offs
        assert offs == sorted(offs, key=lambda o: (o[2], o[1], o[0]))
        assert offs == oracles.offsets(len(ns))
    s6, s18, s26 = ({tuple(o) for o in ns.offsets} for ns in (FACE6, FACE_EDGE18, FULL26))
    assert s6 < s18 < s26


def test_neighbor_set_rejects_unknown_size():
    with pytest.raises(ValueError):
        neighbor_set(8)


def test_phi_examples():
    iso = VoxelCloud([[5, 5, 5]])
    assert phi(iso, FACE6).tolist() == [0]
    p = np.array([5, 5, 5])
    full = VoxelCloud(np.vstack([p, p + FULL26.offsets]))
    for ns in (FACE6, FACE_EDGE18, FULL26):
        assert phi(full, ns, [p]).tolist() == [2 ** len(ns) - 1]
    one = VoxelCloud(np.vstack([p, p + FACE6.offsets[1]]))
    assert phi(one, FACE6, [p]).tolist() == [2]


def test_phi_out_of_grid_is_unoccupied():
    c = VoxelCloud([[0, 0, 0], [1, 0, 0]])
    # offset (-1, 0, 0) is index 2 in FACE6, (1, 0, 0) is index 3
    assert phi(c, FACE6).tolist() == [1 << 3, 1 << 2]


def test_phi_matches_oracle_and_ignores_storage_order(rng):
    pts = rng.integers(0, 12, size=(400, 3))
    cloud = VoxelCloud(pts)
    s = cloud.as_set()
    shuffled = VoxelCloud(pts[rng.permutation(len(pts))])
    for ns in (FACE6, FACE_EDGE18, FULL26):
        want = [oracles.phi(tuple(p), s, len(ns)) for p in cloud.points.tolist()]
        assert phi(cloud, ns).tolist() == want
        assert phi(shuffled, ns, cloud.points).tolist() == want


@pytest.mark.parametrize("X, g, expected", [
    (0, F(3, 4), (0, 0)),
    (2, F(3, 4), (2, 3)),
    (1, F(1, 2), (1, 2)),
    (5, F(1), (5, 5)),
])
def test_preimage_interval_examples(X, g, expected):
    assert preimage_interval(X, g) == expected


@pytest.mark.parametrize("g", [F(1, 3), F(9, 8), F(0)])
def test_preimage_rejects_bad_factor(g):
    with pytest.raises(ValueError, match="invalid fractional factor"):
        preimage_interval(1, g)


def _factors(max_den):
    return sorted({F(a, b) for b in range(1, max_den + 1) for a in range(1, b + 1) if 2 * a > b})


def test_preimage_partition_property():
    X = np.arange(2 ** 12)
    for g in _factors(64):
        lo, hi = preimage_bounds(X, g)
        size = hi - lo + 1
        assert lo[0] == 0
        assert np.all((size == 1) | (size == 2)), g
        assert np.all(lo[1:] == hi[:-1] + 1), g


def test_preimage_matches_exhaustive_search():
    x = np.arange(2 ** 14 + 1)
    for g in _factors(24):
        img = round_scaled(x, g.numerator, g.denominator)
        top = int(img[-1]) - 1  # the last image value may be cut by the search bound
        X = np.arange(top + 1)
        lo, hi = preimage_bounds(X, g)
        first = np.searchsorted(img, X, side="left")
        last = np.searchsorted(img, X, side="right") - 1
        assert np.array_equal(lo, first) and np.array_equal(hi, last), g


def test_coord_class_examples():
    assert coord_class((2, 2, 0), F(3, 4)) == 3
    assert candidate_count(7) == 8
    pts = np.random.default_rng(0).integers(0, 100, size=(50, 3))
    assert not coord_classes(pts, F(1)).any()


def test_class_count_equals_product_of_interval_sizes(rng):
    pts = rng.integers(0, 300, size=(200, 3))
    for g in (F(3, 4), F(5, 8), F(1, 2), F(11, 16), F(7, 9)):
        cs = coord_classes(pts, g)
        lo, hi = preimage_bounds(pts, g)
        assert np.array_equal([candidate_count(int(c)) for c in cs], np.prod(hi - lo + 1, axis=1))


def test_voxelcloud_dedupes_and_orders():
    c = VoxelCloud([[3, 0, 0], [1, 2, 3], [3, 0, 0], [1, 0, 9]])
    assert c.points.tolist() == [[1, 0, 9], [1, 2, 3], [3, 0, 0]]
    assert c.bitdepth == 4
    assert not c.points.flags.writeable


def test_voxelcloud_rejects_negative():
    with pytest.raises(ValueError):
        VoxelCloud([[0, -1, 0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 5000), st.integers(1, 40), st.data())
def test_preimage_roundtrip_property(X, den, data):
    num = data.draw(st.integers(den // 2 + 1, den))
    g = F(num, den)
    lo, hi = preimage_interval(X, g)
    assert hi - lo in (0, 1)
    for x in range(lo, hi + 1):
        assert oracles.rhu(x * g) == X
    if lo > 0:
        assert oracles.rhu((lo - 1) * g) < X
    assert oracles.rhu((hi + 1) * g) > X
