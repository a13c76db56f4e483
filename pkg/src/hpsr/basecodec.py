"""Lossless octree coder for the base cloud.

Occupancy bytes are produced breadth first, nodes within a level in Morton
order, and every occupancy bit is range coded with a context made of the
child index, the number of siblings already coded as occupied (clamped to 3)
and the tree depth (clamped to 7).

Substream layout::

    u8   coder version
    u8   octree depth (bitdepth)
    u32  point count, little endian
    ...  range-coded occupancy bits
"""
from __future__ import annotations

import struct

import numpy as np
from numba import njit

from .errors import StreamError
from .geometry import VoxelCloud
from .rangecoder import _ERR, BinDecoder, RangeCoderError, _decode_bit, encode_bits

__all__ = ["BASE_CODER_VERSION", "BaseStreamError", "decode_base", "encode_base", "occupancy_levels"]

BASE_CODER_VERSION = 1
MAX_BITDEPTH = 21
N_CONTEXTS = 8 * 4 * 8
_HEADER = struct.Struct("<BBI")


class BaseStreamError(StreamError):
    """Raised for any truncated, corrupt or inconsistent base stream."""

    def __init__(self, detail: str = ""):
        super().__init__("malformed base stream" + (f": {detail}" if detail else ""))


def morton_encode(points: np.ndarray, depth: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.int64)
    code = np.zeros(len(pts), dtype=np.int64)
    for i in range(depth):
        for axis in range(3):
            code |= ((pts[:, axis] >> i) & 1) << (3 * i + axis)
    return code


def morton_decode(codes: np.ndarray, depth: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    pts = np.zeros((len(codes), 3), dtype=np.int64)
    for i in range(depth):
        for axis in range(3):
            pts[:, axis] |= ((codes >> (3 * i + axis)) & 1) << i
    return pts


def occupancy_levels(V: VoxelCloud, depth: int | None = None) -> list[np.ndarray]:
    """Breadth-first occupancy bytes, one array per tree level."""
    depth = _depth(V) if depth is None else depth
    codes = np.unique(morton_encode(V.points, depth))
    levels = []
    for d in range(depth):
        kids = np.unique(codes >> (3 * (depth - d - 1)))
        parents = kids >> 3
        starts = np.flatnonzero(np.r_[True, parents[1:] != parents[:-1]])
        occ = np.bitwise_or.reduceat(np.left_shift(1, kids & 7), starts)
        levels.append(occ.astype(np.uint8))
    return levels


def _depth(V: VoxelCloud) -> int:
    return max(1, int(V.points.max()).bit_length()) if len(V) else 1


def _contexts(occ: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    bits = (occ.astype(np.int64)[:, None] >> np.arange(8)) & 1
    before = np.minimum(np.cumsum(bits, axis=1) - bits, 3)
    ctx = (np.arange(8)[None, :] * 4 + before) * 8 + min(d, 7)
    return bits.ravel(), ctx.ravel()


def encode_base(V: VoxelCloud) -> bytes:
    if len(V) == 0:
        raise ValueError("empty cloud")
    depth = _depth(V)
    if depth > MAX_BITDEPTH:
        raise ValueError(f"bitdepth {depth} exceeds {MAX_BITDEPTH}")
    bits, ctx = [], []
    for d, occ in enumerate(occupancy_levels(V, depth)):
        b, c = _contexts(occ, d)
        bits.append(b)
        ctx.append(c)
    payload = encode_bits(np.concatenate(bits), np.concatenate(ctx), N_CONTEXTS)
    return _HEADER.pack(BASE_CODER_VERSION, depth, len(V)) + payload


@njit(cache=True)
def _decode_octree(data, state, probs, depth, n_points):
    nodes = np.zeros(1, dtype=np.int64)
    for d in range(depth):
        kids = np.empty(nodes.shape[0] * 8, dtype=np.int64)
        nk = 0
        dctx = min(d, 7)
        for node in nodes:
            cnt = 0
            for m in range(8):
                c = (m * 4 + min(cnt, 3)) * 8 + dctx
                bit = _decode_bit(data, state, probs, c)
                if state[_ERR]:
                    return nodes[:0], 1
                if bit:
                    kids[nk] = node * 8 + m
                    nk += 1
                    cnt += 1
            if cnt == 0:
                return nodes[:0], 2
            if nk > n_points:
                return nodes[:0], 3
        nodes = kids[:nk]
    return nodes, 0


_DECODE_ERRORS = {
    1: "payload ended early",
    2: "empty occupancy byte",
    3: "more leaves than declared points",
}


def decode_base(data: bytes) -> VoxelCloud:
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise BaseStreamError("missing header")
    version, depth, n_points = _HEADER.unpack_from(data)
    if version != BASE_CODER_VERSION:
        raise BaseStreamError(f"unsupported coder version {version}")
    if not 1 <= depth <= MAX_BITDEPTH:
        raise BaseStreamError(f"bad depth {depth}")
    if n_points < 1 or n_points > 8**depth:
        raise BaseStreamError(f"bad point count {n_points}")
    try:
        dec = BinDecoder(data[_HEADER.size:], N_CONTEXTS)
    except RangeCoderError as exc:
        raise BaseStreamError(str(exc)) from None
    codes, err = _decode_octree(dec.data, dec.state, dec.probs, depth, n_points)
    if err:
        raise BaseStreamError(_DECODE_ERRORS[err])
    if len(codes) != n_points:
        raise BaseStreamError("point count mismatch")
    try:
        dec.finish()
    except RangeCoderError as exc:
        raise BaseStreamError(str(exc)) from None
    return VoxelCloud(morton_decode(codes, depth), depth)
