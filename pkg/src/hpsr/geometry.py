"""Integer voxel-grid primitives shared by the encoder and the decoder.

All coordinate arithmetic is exact: scale factors are :class:`fractions.Fraction`
values and rounding is done on integers, so both sides of the codec agree
bit for bit.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product

import numpy as np

__all__ = [
    "FACE6",
    "FACE_EDGE18",
    "FULL26",
    "NeighborSet",
    "VoxelCloud",
    "as_fraction",
    "candidate_count",
    "coord_class",
    "coord_classes",
    "neighbor_set",
    "phi",
    "preimage_bounds",
    "preimage_interval",
    "round_half_up",
    "round_scaled",
    "voxel_keys",
]

# Largest coordinate a VoxelCloud may hold. Keys reserve one slot below zero
# and two above this bound so neighbour and child queries never alias.
MAX_COORD = (1 << 21) + 1
_STRIDE = np.uint64(MAX_COORD + 3)


def as_fraction(value) -> Fraction:
    """Parse ``"a/b"`` strings, ints and Fractions into a reduced Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("scale factors must be exact rationals, not floats")
    return Fraction(value)


def round_half_up(x) -> int:
    """``floor(x + 1/2)`` for a non-negative rational ``x``."""
    x = as_fraction(x)
    if x < 0:
        raise ValueError("negative coordinate")
    return (2 * x.numerator + x.denominator) // (2 * x.denominator)


def round_scaled(values, num: int, den: int) -> np.ndarray:
    """Elementwise ``round_half_up(values * num / den)`` on integer arrays."""
    values = np.asarray(values, dtype=np.int64)
    if values.size and values.min() < 0:
        raise ValueError("negative coordinate")
    return (2 * values * num + den) // (2 * den)


class NeighborSet:
    """A fixed, ordered set of neighbour offsets.

    Offsets are sorted lexicographically by ``(dz, dy, dx)``; the position of an
    offset in this order is its bit index in the neighbourhood code.
    """

    def __init__(self, size: int):
        if size not in (6, 18, 26):
            raise ValueError(f"unsupported neighbour set size {size}; use 6, 18 or 26")
        offsets = []
        for dz, dy, dx in product((-1, 0, 1), repeat=3):
            nonzero = (dx != 0) + (dy != 0) + (dz != 0)
            if nonzero == 0:
                continue
            if size == 6 and nonzero != 1:
                continue
            if size == 18 and nonzero > 2:
                continue
            offsets.append((dx, dy, dz))
        self.id = size
        self.offsets = np.array(offsets, dtype=np.int64)
        self.offsets.flags.writeable = False

    def __len__(self):
        return len(self.offsets)

    def __repr__(self):
        return f"NeighborSet({self.id})"

    def __eq__(self, other):
        return isinstance(other, NeighborSet) and other.id == self.id

    def __hash__(self):
        return hash(self.id)


FACE6 = NeighborSet(6)
FACE_EDGE18 = NeighborSet(18)
FULL26 = NeighborSet(26)
_SETS = {6: FACE6, 18: FACE_EDGE18, 26: FULL26}


def neighbor_set(size) -> NeighborSet:
    if isinstance(size, NeighborSet):
        return size
    try:
        return _SETS[int(size)]
    except (KeyError, ValueError):
        raise ValueError(f"unsupported neighbour set size {size!r}; use 6, 18 or 26") from None


def voxel_keys(points: np.ndarray) -> np.ndarray:
    """Order-preserving uint64 keys for coordinates in ``[-1, MAX_COORD + 1]``.

    Sorting keys sorts points lexicographically by (x, y, z).
    """
    p = np.asarray(points, dtype=np.int64).reshape(-1, 3) + 1
    p = p.astype(np.uint64)
    return (p[:, 0] * _STRIDE + p[:, 1]) * _STRIDE + p[:, 2]


def keys_to_points(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    z = keys % _STRIDE
    rest = keys // _STRIDE
    y = rest % _STRIDE
    x = rest // _STRIDE
    return np.stack([x, y, z], axis=1).astype(np.int64) - 1


class VoxelCloud:
    """A deduplicated set of non-negative voxel coordinates.

    Points are stored as a read-only ``(N, 3)`` int64 array in ascending
    lexicographic order. ``bitdepth`` bounds the grid: every coordinate is
    below ``2**bitdepth``. When omitted it is the smallest bound that fits.
    """

    __slots__ = ("points", "bitdepth", "_keys")

    def __init__(self, points, bitdepth: int | None = None, *, canonical: bool = False):
        pts = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        if pts.size and pts.min() < 0:
            raise ValueError("negative coordinate")
        if pts.size and pts.max() > MAX_COORD:
            raise ValueError(f"coordinate exceeds {MAX_COORD}")
        keys = voxel_keys(pts)
        if not canonical:
            keys, first = np.unique(keys, return_index=True)
            pts = pts[first]
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        keys.flags.writeable = False
        needed = int(pts.max()).bit_length() if pts.size else 0
        if bitdepth is None:
            bitdepth = max(1, needed)
        elif bitdepth < max(1, needed):
            raise ValueError(f"coordinates do not fit in bitdepth {bitdepth}")
        self.points = pts
        self.bitdepth = int(bitdepth)
        self._keys = keys

    @classmethod
    def from_keys(cls, keys, bitdepth=None):
        keys = np.unique(np.asarray(keys, dtype=np.uint64))
        cloud = cls(keys_to_points(keys), bitdepth, canonical=True)
        return cloud

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"VoxelCloud(n={len(self)}, bitdepth={self.bitdepth})"

    def __eq__(self, other):
        if not isinstance(other, VoxelCloud):
            return NotImplemented
        return np.array_equal(self._keys, other._keys)

    __hash__ = None

    def contains(self, points) -> np.ndarray:
        """Boolean membership for each row of ``points``.

        Rows with coordinates of -1 or just past the grid are allowed and
        simply report ``False``.
        """
        q = voxel_keys(points)
        if len(self._keys) == 0:
            return np.zeros(len(q), dtype=bool)
        idx = np.searchsorted(self._keys, q)
        idx[idx == len(self._keys)] = 0
        return self._keys[idx] == q

    def as_set(self) -> set[tuple[int, int, int]]:
        return {tuple(map(int, p)) for p in self.points}


def phi(cloud: VoxelCloud, nbrs, points=None) -> np.ndarray:
    """Neighbourhood codes: bit n is set when ``point + offsets[n]`` is occupied.

    Computed for every point of ``cloud`` unless ``points`` is given. Offsets
    that fall off the grid count as unoccupied.
    """
    nbrs = neighbor_set(nbrs)
    pts = cloud.points if points is None else np.asarray(points, dtype=np.int64).reshape(-1, 3)
    codes = np.zeros(len(pts), dtype=np.int64)
    for n, off in enumerate(nbrs.offsets):
        codes |= cloud.contains(pts + off).astype(np.int64) << n
    return codes


def _check_factor(g: Fraction) -> None:
    if not (Fraction(1, 2) <= g <= 1):
        raise ValueError("invalid fractional factor")


def preimage_bounds(X, g) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``preimage_interval``: inclusive ``(lo, hi)`` arrays."""
    g = as_fraction(g)
    _check_factor(g)
    a, b = g.numerator, g.denominator
    X = np.asarray(X, dtype=np.int64)
    # round_half_up(x*a/b) == X  <=>  2bX - b <= 2ax < 2bX + b
    lo = -((-(2 * b * X - b)) // (2 * a))
    hi = -((-(2 * b * X + b)) // (2 * a)) - 1
    return np.maximum(lo, 0), hi


def preimage_interval(X: int, g) -> tuple[int, int]:
    """All ``x >= 0`` with ``round_half_up(x * g) == X``, as ``(lo, hi)``."""
    if X < 0:
        raise ValueError("negative coordinate")
    lo, hi = preimage_bounds(np.array([X]), g)
    return int(lo[0]), int(hi[0])


def coord_classes(points, g) -> np.ndarray:
    """Per-point class: bit ``axis`` is set when that axis has two preimages."""
    lo, hi = preimage_bounds(points, g)
    wide = ((hi - lo) == 1).astype(np.int64)
    return wide[:, 0] | (wide[:, 1] << 1) | (wide[:, 2] << 2)


def coord_class(p, g) -> int:
    return int(coord_classes(np.asarray(p, dtype=np.int64).reshape(1, 3), g)[0])


def candidate_count(c: int) -> int:
    """Number of candidate children for class ``c`` (1, 2, 4 or 8)."""
    return 1 << bin(int(c)).count("1")
