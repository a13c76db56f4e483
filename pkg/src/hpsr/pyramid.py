"""Successive grid downsampling and the codec's scale parameters."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import VoxelCloud, as_fraction, round_scaled

__all__ = ["PyramidParams", "Pyramid", "derive_params", "map_s_to_q", "build_pyramid"]


@dataclass(frozen=True)
class PyramidParams:
    """Scale parameters of one encoding.

    ``q`` is the overall downsampling factor, ``L`` the number of halvings it
    spans, ``K`` the number of pyramid steps, ``Kprime`` the number of extra
    decoder-side doublings and ``g = 2**L * q`` the last, fractional step.
    """

    q: Fraction
    L: int
    K: int
    Kprime: int

    def __post_init__(self):
        if not (0 < self.q < 1):
            raise ValueError("q out of range")
        if self.L != _levels(self.q):
            raise ValueError(f"L={self.L} inconsistent with q={self.q}")
        if not (1 <= self.K <= self.L + 1):
            raise ValueError(f"K={self.K} outside [1, {self.L + 1}]")
        if not (0 <= self.Kprime <= self.L + 1 - self.K):
            raise ValueError(f"Kprime={self.Kprime} outside [0, {self.L + 1 - self.K}]")
        if self.Kprime and self.K < 2:
            raise ValueError("Kprime > 0 needs K >= 2 (reuses an intermediate prior)")

    @property
    def g(self) -> Fraction:
        return self.q * 2**self.L

    @property
    def shift(self) -> int:
        """Halvings applied before the pyramid starts (``L + 1 - K``)."""
        return self.L + 1 - self.K

    @property
    def upscale_shift(self) -> int:
        """Doublings left after the extra super-resolution stage."""
        return self.L + 1 - self.K - self.Kprime


def _levels(q: Fraction) -> int:
    # smallest t with 2**t >= 1/q, minus one
    t = 0
    while q.numerator << t < q.denominator:
        t += 1
    return t - 1


def derive_params(q, K_max: int = 2, Kprime_max: int = 2) -> PyramidParams:
    """Default hyper-parameters: ``K = min(L+1, K_max)``, ``K' = min(K'_max, L+1-K)``.

    ``K'`` is forced to zero when ``K == 1`` since there is no intermediate
    pattern table to reuse.
    """
    q = as_fraction(q)
    if not (0 < q < 1):
        raise ValueError("q out of range")
    if K_max < 1 or Kprime_max < 0:
        raise ValueError("K_max must be >= 1 and Kprime_max >= 0")
    L = _levels(q)
    K = min(L + 1, K_max)
    Kprime = min(Kprime_max, L + 1 - K) if K >= 2 else 0
    return PyramidParams(q=q, L=L, K=K, Kprime=Kprime)


def _halve(f: Fraction) -> Fraction:
    if f > Fraction(1, 2):
        return Fraction(f.numerator - 1, f.denominator)
    return f / 2


def map_s_to_q(s) -> Fraction:
    """Translate an octree quantisation step ``s`` into a pyramid factor ``q``."""
    s = as_fraction(s)
    if not (0 < s <= 1):
        raise ValueError("s out of range (0, 1]")
    q = _halve(_halve(s))
    if q == 0:
        raise ValueError(f"s={s} maps to q=0")
    return q


@dataclass(frozen=True)
class Pyramid:
    levels: tuple[VoxelCloud, ...]
    params: PyramidParams

    @property
    def base(self) -> VoxelCloud:
        return self.levels[-1]

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]


def build_pyramid(V: VoxelCloud, params: PyramidParams) -> Pyramid:
    if len(V) == 0:
        raise ValueError("empty cloud")
    n = params.shift
    # one guard bit per level: rounding can land exactly on the next power of two
    # clouds coarser than the shift collapse onto {0, 1}, which still fits one bit
    bitdepth = max(1, V.bitdepth - n + 1)
    pts = round_scaled(V.points, 1, 1 << n) if n else V.points
    levels = [VoxelCloud(pts, bitdepth)]
    for _ in range(1, params.K):
        bitdepth = max(1, bitdepth - 1)
        levels.append(VoxelCloud(round_scaled(levels[-1].points, 1, 2), bitdepth))
    g = params.g
    levels.append(VoxelCloud(round_scaled(levels[-1].points, g.numerator, g.denominator), bitdepth))
    return Pyramid(tuple(levels), params)


def downsample_to_base(V: VoxelCloud, params: PyramidParams) -> VoxelCloud:
    """``V^(K)`` alone, as used by the direct-upscaling baseline."""
    return build_pyramid(V, params).base


def scale_points(points: np.ndarray, factor: Fraction) -> np.ndarray:
    factor = as_fraction(factor)
    return round_scaled(points, factor.numerator, factor.denominator)
