"""Decoder-side coarse-to-fine reconstruction from the base cloud and the prior."""
from __future__ import annotations

import numpy as np

from .geometry import VoxelCloud, as_fraction, neighbor_set, phi, round_scaled
from .prior import HierPrior, children_grid, levelK_candidate_grid

__all__ = [
    "decode_reconstruct",
    "extra_sr",
    "final_upscale",
    "interpolate_base",
    "interpolate_intermediate",
    "reconstruct_pyramid",
]


def _lookup(table: dict[int, int], codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not table:
        return np.zeros(len(codes), dtype=np.int64), np.zeros(len(codes), dtype=bool)
    keys = np.fromiter(table.keys(), dtype=np.int64, count=len(table))
    vals = np.fromiter(table.values(), dtype=np.int64, count=len(table))
    order = np.argsort(keys)
    keys, vals = keys[order], vals[order]
    idx = np.searchsorted(keys, codes)
    idx[idx == len(keys)] = 0
    found = keys[idx] == codes
    return np.where(found, vals[idx], 0), found


def interpolate_base(VK: VoxelCloud, level_k: dict[int, dict[int, int]], g, nbrs) -> VoxelCloud:
    """Super-resolve the base cloud by one (fractional) step.

    Class-0 points and points whose cluster has no table entry are mapped back
    by plain division; every other point emits the candidates its pattern
    selects.
    """
    g = as_fraction(g)
    nbrs = neighbor_set(nbrs)
    cand, m, valid, c = levelK_candidate_grid(VK.points, g)
    r = phi(VK, nbrs)
    flat = {(cc << 32) | rr: s for cc, t in level_k.items() for rr, s in t.items()}
    sigma, found = _lookup(flat, (c << 32) | r)
    found &= c > 0
    emit = valid & found[:, None] & ((sigma[:, None] >> np.maximum(m, 0)) & 1).astype(bool)
    direct = round_scaled(VK.points[~found], g.denominator, g.numerator)
    pts = np.concatenate([direct, cand[emit]])
    return VoxelCloud(pts)


def interpolate_intermediate(Vk: VoxelCloud, table: dict[int, int], nbrs) -> VoxelCloud:
    """Double the resolution of ``Vk`` using one intermediate pattern table.

    Points whose neighbourhood code is missing from ``table`` are upscaled
    directly to ``2 * p``.
    """
    if len(Vk) == 0:
        return VoxelCloud(np.empty((0, 3), dtype=np.int64))
    r = phi(Vk, nbrs)
    sigma, found = _lookup(table, r)
    kids = children_grid(Vk.points)
    bits = (sigma[:, None] >> np.arange(8)) & 1
    emit = bits.astype(bool) & found[:, None] & (kids >= 0).all(axis=2)
    pts = np.concatenate([2 * Vk.points[~found], kids[emit]])
    return VoxelCloud(pts)


def extra_sr(V0: VoxelCloud, sigma1: dict[int, int], Kprime: int, nbrs) -> VoxelCloud:
    """Reuse the last intermediate table ``Kprime`` more times."""
    out = V0
    for _ in range(Kprime):
        out = interpolate_intermediate(out, sigma1, nbrs)
    return out


def final_upscale(V0: VoxelCloud, params, Kprime: int | None = None) -> VoxelCloud:
    """Scale back to the input grid; the factor is a power of two, so exact."""
    Kprime = params.Kprime if Kprime is None else Kprime
    shift = params.L + 1 - params.K - Kprime
    if shift < 0:
        raise ValueError("Kprime + K exceeds L + 1")
    if shift == 0:
        return V0
    return VoxelCloud(V0.points << shift, canonical=True)


def reconstruct_pyramid(VK: VoxelCloud, prior: HierPrior, params, nbrsK, nbrsI) -> VoxelCloud:
    """``V^(K)`` to the reconstruction of ``V^(0)``, before the extra stage."""
    vhat = interpolate_base(VK, prior.level_k, params.g, nbrsK)
    if len(prior.intermediates) != params.K - 1:
        raise ValueError("prior depth does not match K")
    for table in prior.intermediates:
        vhat = interpolate_intermediate(vhat, table, nbrsI)
    return vhat


def decode_reconstruct(VK: VoxelCloud, prior: HierPrior, params, nbrsK=18, nbrsI=6,
                       skip_kprime: bool = False) -> VoxelCloud:
    vhat = reconstruct_pyramid(VK, prior, params, nbrsK, nbrsI)
    kprime = 0 if skip_kprime else params.Kprime
    if kprime:
        vhat = extra_sr(vhat, prior.intermediates[-1], kprime, nbrsI)
    return final_upscale(vhat, params, kprime)
