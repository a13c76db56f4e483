"""Encoder-side construction of the hierarchical interpolation prior.

Points are clustered by coordinate class (base level only) and neighbourhood
code. For every cluster we count, per candidate child, how often that child
is occupied in the next finer cloud, and keep the children that are occupied
at least half of the time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .geometry import (
    VoxelCloud,
    as_fraction,
    candidate_count,
    coord_classes,
    neighbor_set,
    phi,
    preimage_bounds,
)

__all__ = [
    "HierPrior",
    "build_hier_prior",
    "build_intermediate_prior",
    "build_levelK_prior",
    "build_pattern",
    "candidates_intermediate",
    "candidates_levelK",
    "intermediate_keys",
    "levelK_keys",
]

# _T_BITS[t] is the (bx, by, bz) corner selected by 3-bit index t
_T_BITS = np.array([[t & 1, (t >> 1) & 1, (t >> 2) & 1] for t in range(8)], dtype=np.int64)


def _pext_table() -> np.ndarray:
    """``table[c, t]``: index of corner ``t`` among the corners allowed by ``c``.

    Entries are -1 where ``t`` uses an axis that ``c`` does not split.
    """
    table = np.full((8, 8), -1, dtype=np.int64)
    for c in range(8):
        for t in range(8):
            if t & ~c:
                continue
            m, out = 0, 0
            for axis in range(3):
                if c >> axis & 1:
                    out |= (t >> axis & 1) << m
                    m += 1
            table[c, t] = out
    return table


_PEXT = _pext_table()


@dataclass
class HierPrior:
    """Interpolation patterns for every pyramid level.

    ``level_k`` maps a coordinate class ``c`` (1..7) to ``{code: pattern}``;
    ``intermediates`` holds one ``{code: pattern}`` table per intermediate
    level, finest-but-one first, i.e. ``[sigma^(K-1), ..., sigma^(1)]``.
    Tables are kept in ascending code order.
    """

    level_k: dict[int, dict[int, int]] = field(default_factory=lambda: {c: {} for c in range(1, 8)})
    intermediates: list[dict[int, int]] = field(default_factory=list)

    def __post_init__(self):
        for c in range(1, 8):
            self.level_k.setdefault(c, {})
        if set(self.level_k) != set(range(1, 8)):
            raise ValueError("level-K tables must be keyed by classes 1..7")

    @property
    def n_entries(self) -> int:
        return sum(len(t) for t in self.level_k.values()) + sum(len(t) for t in self.intermediates)

    def payload_bits(self) -> int:
        """Pattern bits before any padding or entropy coding."""
        bits = sum(len(self.level_k[c]) * candidate_count(c) for c in range(1, 8))
        return bits + 8 * sum(len(t) for t in self.intermediates)


def levelK_candidate_grid(points: np.ndarray, g) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """All eight corner slots of each point's preimage box.

    Returns ``(cand, m, valid, c)`` where ``cand`` is ``(N, 8, 3)``, ``m`` the
    candidate index of each slot, ``valid`` marks slots that are real
    candidates and ``c`` is the coordinate class of each point.
    """
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    lo, hi = preimage_bounds(points, g)
    wide = (hi - lo).astype(np.int64)
    c = wide[:, 0] | (wide[:, 1] << 1) | (wide[:, 2] << 2)
    cand = lo[:, None, :] + _T_BITS[None, :, :]
    m = _PEXT[c]
    return cand, m, m >= 0, c


def candidates_levelK(p, g) -> np.ndarray:
    """Candidate preimages of one base-level voxel, ordered by candidate index."""
    cand, m, valid, c = levelK_candidate_grid(np.asarray(p).reshape(1, 3), g)
    out = np.empty((candidate_count(int(c[0])), 3), dtype=np.int64)
    out[m[0, valid[0]]] = cand[0, valid[0]]
    return out


def children_grid(points: np.ndarray) -> np.ndarray:
    """``(N, 8, 3)`` children ``2X - 1 + b`` of each voxel, slot ``m = bx + 2by + 4bz``."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    return 2 * points[:, None, :] - 1 + _T_BITS[None, :, :]


def candidates_intermediate(p) -> tuple[np.ndarray, np.ndarray]:
    """The eight children of ``p`` and a mask of the ones inside the grid."""
    kids = children_grid(np.asarray(p).reshape(1, 3))[0]
    return kids, (kids >= 0).all(axis=1)


def build_pattern(cluster, candidates_fn, finer: VoxelCloud) -> int:
    """Threshold the per-candidate occupancy frequency of one cluster at 1/2.

    ``candidates_fn(point)`` returns the ordered candidates of a point;
    candidates with negative coordinates never count as occupied.
    """
    cluster = np.asarray(cluster, dtype=np.int64).reshape(-1, 3)
    if len(cluster) == 0:
        raise ValueError("empty cluster")
    hits = None
    for p in cluster:
        cands = np.asarray(candidates_fn(p), dtype=np.int64).reshape(-1, 3)
        present = finer.contains(cands) & (cands >= 0).all(axis=1)
        hits = present.astype(np.int64) if hits is None else hits + present
    return _threshold(hits[None, :], np.array([len(cluster)]))[0]


def _threshold(hits: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    # f_m >= 1/2  <=>  2 * p_m >= n
    bits = (2 * hits >= sizes[:, None]).astype(np.int64)
    return (bits << np.arange(hits.shape[1], dtype=np.int64)).sum(axis=1)


def _cluster_patterns(group: np.ndarray, n_groups: int, slot_m: np.ndarray, present: np.ndarray) -> np.ndarray:
    sizes = np.bincount(group, minlength=n_groups)
    flat = (group[:, None] * 8 + np.where(present, slot_m, 0)).ravel()
    hits = np.bincount(flat, weights=present.ravel(), minlength=n_groups * 8)
    return _threshold(hits.reshape(n_groups, 8).astype(np.int64), sizes)


def levelK_keys(VK: VoxelCloud, g, nbrs) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate class and neighbourhood code of every base-level point."""
    return coord_classes(VK.points, g), phi(VK, nbrs)


def build_levelK_prior(VK: VoxelCloud, VKm1: VoxelCloud, g, nbrs) -> dict[int, dict[int, int]]:
    g = as_fraction(g)
    nbrs = neighbor_set(nbrs)
    table: dict[int, dict[int, int]] = {c: {} for c in range(1, 8)}
    c, r = levelK_keys(VK, g, nbrs)
    sel = c > 0
    if not sel.any():
        return table
    key = (c[sel] << 32) | r[sel]
    uniq, group = np.unique(key, return_inverse=True)
    cand, m, valid, _ = levelK_candidate_grid(VK.points[sel], g)
    present = VKm1.contains(cand.reshape(-1, 3)).reshape(-1, 8) & valid
    patterns = _cluster_patterns(group.ravel(), len(uniq), m, present)
    for k, sigma in zip(uniq.tolist(), patterns.tolist()):
        table[k >> 32][k & 0xFFFFFFFF] = sigma
    return table


def intermediate_keys(V: VoxelCloud, nbrs) -> np.ndarray:
    return phi(V, nbrs)


def build_intermediate_prior(Vhat: VoxelCloud, finer: VoxelCloud, nbrs) -> dict[int, int]:
    """Patterns mapping a reconstructed level onto the original finer level."""
    if len(Vhat) == 0:
        return {}
    r = intermediate_keys(Vhat, nbrs)
    uniq, group = np.unique(r, return_inverse=True)
    kids = children_grid(Vhat.points)
    present = finer.contains(kids.reshape(-1, 3)).reshape(-1, 8)
    slot_m = np.broadcast_to(np.arange(8, dtype=np.int64), present.shape)
    patterns = _cluster_patterns(group.ravel(), len(uniq), slot_m, present)
    return dict(zip(uniq.tolist(), patterns.tolist()))


def build_hier_prior(pyr, nbrsK=18, nbrsI=6) -> tuple[HierPrior, VoxelCloud]:
    """Closed-loop prior construction.

    Intermediate tables are learned on the decoder's own reconstructions so
    that the decoder re-derives exactly the same cluster keys. Returns the
    prior and the reconstruction of ``V^(0)`` before any extra doublings.
    """
    from .superres import interpolate_base, interpolate_intermediate

    params = pyr.params
    K = params.K
    g = params.g
    level_k = build_levelK_prior(pyr[K], pyr[K - 1], g, nbrsK)
    vhat = interpolate_base(pyr[K], level_k, g, nbrsK)
    intermediates = []
    for k in range(K - 1, 0, -1):
        sigma = build_intermediate_prior(vhat, pyr[k - 1], nbrsI)
        intermediates.append(sigma)
        vhat = interpolate_intermediate(vhat, sigma, nbrsI)
    return HierPrior(level_k, intermediates), vhat


def frequencies(cluster, candidates_fn, finer: VoxelCloud) -> list[Fraction]:
    """Exact occupancy frequency of every candidate over a cluster."""
    cluster = np.asarray(cluster, dtype=np.int64).reshape(-1, 3)
    counts = None
    for p in cluster:
        cands = np.asarray(candidates_fn(p), dtype=np.int64).reshape(-1, 3)
        present = (finer.contains(cands) & (cands >= 0).all(axis=1)).astype(int)
        counts = present if counts is None else counts + present
    return [Fraction(int(k), len(cluster)) for k in counts]
