"""Serialisation of the hierarchical prior.

Only pattern values are written. The decoder recovers every cluster key by
partitioning clouds it already holds, so it tells the reader how many values
to expect (and which keys they belong to) level by level.

Substream layout: ``u8 mode`` followed by the payload.

RAW payload
    Base level first: for c = 1..7, the patterns in ascending code order,
    each packed MSB first in exactly ``M_c`` bits, each class group padded
    with zero bits to a byte boundary. Then one byte per pattern for
    ``sigma^(K-1)`` down to ``sigma^(1)``, ascending code order.

ENTROPY payload
    Empty for an empty prior. Otherwise ``u32`` total pattern count followed
    by the same pattern bits (without padding), range coded with one
    adaptive model per candidate index.
"""
from __future__ import annotations

import struct
from enum import IntEnum

import numpy as np

from .errors import StreamError
from .geometry import candidate_count
from .prior import HierPrior
from .rangecoder import BinDecoder, RangeCoderError, encode_bits

__all__ = ["PriorMode", "PriorDesyncError", "PriorReader", "decode_prior", "encode_prior"]


class PriorMode(IntEnum):
    RAW = 0
    ENTROPY = 1

    @classmethod
    def parse(cls, value) -> "PriorMode":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown prior mode {value!r}") from None
        return cls(value)


class PriorDesyncError(StreamError):
    def __init__(self, detail: str = ""):
        super().__init__("prior/cloud desync" + (f": {detail}" if detail else ""))


def _sections(prior: HierPrior):
    """Yield ``(values, n_bits)`` per section in stream order."""
    for c in range(1, 8):
        table = prior.level_k.get(c, {})
        yield [table[r] for r in sorted(table)], candidate_count(c)
    for table in prior.intermediates:
        yield [table[r] for r in sorted(table)], 8


def _msb_bits(values, width: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((v[:, None] >> shifts) & 1).astype(np.uint8)


def encode_prior(prior: HierPrior, mode=PriorMode.RAW) -> bytes:
    mode = PriorMode.parse(mode)
    out = bytearray([mode])
    sections = list(_sections(prior))
    for values, width in sections:
        if any(v < 0 or v >> width for v in values):
            raise ValueError(f"pattern does not fit in {width} bits")
    if mode is PriorMode.RAW:
        for values, width in sections:
            if width == 8:
                out += bytes(values)
            elif values:
                out += np.packbits(_msb_bits(values, width).ravel()).tobytes()
        return bytes(out)
    total = sum(len(v) for v, _ in sections)
    if total == 0:
        return bytes(out)
    bits, ctx = [], []
    for values, width in sections:
        if values:
            bits.append(_msb_bits(values, width).ravel())
            ctx.append(np.tile(np.arange(width - 1, -1, -1), len(values)))
    out += struct.pack("<I", total)
    out += encode_bits(np.concatenate(bits), np.concatenate(ctx), 8)
    return bytes(out)


class PriorReader:
    """Pulls pattern tables out of a prior substream one level at a time."""

    def __init__(self, data: bytes, mode=None):
        data = bytes(data)
        if not data:
            raise PriorDesyncError("missing mode byte")
        try:
            self.mode = PriorMode(data[0])
        except ValueError:
            raise PriorDesyncError(f"unknown prior mode {data[0]}") from None
        if mode is not None and PriorMode.parse(mode) is not self.mode:
            raise PriorDesyncError("prior mode mismatch")
        self._payload = data[1:]
        self._pos = 0
        self._remaining = 0
        self._decoder = None
        if self.mode is PriorMode.ENTROPY and self._payload:
            if len(self._payload) < 4:
                raise PriorDesyncError("truncated entry count")
            (self._remaining,) = struct.unpack_from("<I", self._payload)
            try:
                self._decoder = BinDecoder(self._payload[4:], 8)
            except RangeCoderError as exc:
                raise PriorDesyncError(str(exc)) from None

    def _read(self, n: int, width: int) -> list[int]:
        if n == 0:
            return []
        if self.mode is PriorMode.RAW:
            nbytes = (n * width + 7) // 8
            chunk = self._payload[self._pos:self._pos + nbytes]
            if len(chunk) != nbytes:
                raise PriorDesyncError("stream shorter than expected")
            self._pos += nbytes
            bits = np.unpackbits(np.frombuffer(chunk, dtype=np.uint8))
            if bits[n * width:].any():
                raise PriorDesyncError("non-zero padding")
            bits = bits[:n * width].reshape(n, width).astype(np.int64)
        else:
            if self._decoder is None or n > self._remaining:
                raise PriorDesyncError("more patterns expected than coded")
            self._remaining -= n
            ctx = np.tile(np.arange(width - 1, -1, -1), n)
            try:
                bits = self._decoder.decode(ctx).reshape(n, width).astype(np.int64)
            except RangeCoderError as exc:
                raise PriorDesyncError(str(exc)) from None
        return (bits << np.arange(width - 1, -1, -1)).sum(axis=1).tolist()

    def read_level_k(self, keys_by_class) -> dict[int, dict[int, int]]:
        table = {}
        for c in range(1, 8):
            keys = sorted(int(k) for k in keys_by_class.get(c, ()))
            table[c] = dict(zip(keys, self._read(len(keys), candidate_count(c))))
        return table

    def read_intermediate(self, keys) -> dict[int, int]:
        keys = sorted(int(k) for k in keys)
        return dict(zip(keys, self._read(len(keys), 8)))

    def finish(self) -> None:
        if self.mode is PriorMode.RAW:
            if self._pos != len(self._payload):
                raise PriorDesyncError("unread prior bytes")
            return
        if self._remaining:
            raise PriorDesyncError("fewer patterns expected than coded")
        if self._decoder is not None:
            try:
                self._decoder.finish()
            except RangeCoderError as exc:
                raise PriorDesyncError(str(exc)) from None


def decode_prior(data: bytes, level_k_keys, intermediate_keys, mode=None) -> HierPrior:
    """Decode a whole prior when every level's cluster keys are known.

    ``level_k_keys`` maps class ``c`` to its codes and ``intermediate_keys``
    lists the code sets of ``sigma^(K-1) .. sigma^(1)``.
    """
    reader = PriorReader(data, mode)
    level_k = reader.read_level_k(level_k_keys)
    inter = [reader.read_intermediate(k) for k in intermediate_keys]
    reader.finish()
    return HierPrior(level_k, inter)


def prior_layout(prior: HierPrior):
    """The key sets a decoder would supply for ``prior``."""
    return ({c: sorted(t) for c, t in prior.level_k.items()},
            [sorted(t) for t in prior.intermediates])
