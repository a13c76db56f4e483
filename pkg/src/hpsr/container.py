"""The on-disk bitstream: a fixed 22-byte header, the base substream, the prior substream.

See FORMAT.md for the byte layout.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .errors import StreamError
from .pyramid import PyramidParams, _levels

__all__ = ["ContainerError", "Header", "HEADER_SIZE", "read_container", "write_container"]

MAGIC = b"HPSR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHHBBBBII")
HEADER_SIZE = _HEADER.size


class ContainerError(StreamError):
    pass


@dataclass(frozen=True)
class Header:
    bitdepth: int
    q: Fraction
    K: int
    Kprime: int
    nbr_k: int = 18
    nbr_i: int = 6
    base_length: int = 0
    prior_length: int = 0
    version: int = FORMAT_VERSION

    @property
    def params(self) -> PyramidParams:
        return PyramidParams(q=self.q, L=_levels(self.q), K=self.K, Kprime=self.Kprime)

    def bit_accounting(self) -> dict[str, int]:
        return {
            "header_bits": 8 * HEADER_SIZE,
            "base_bits": 8 * self.base_length,
            "prior_bits": 8 * self.prior_length,
        }


def _validate(h: Header) -> None:
    if not 1 <= h.bitdepth <= 21:
        raise ContainerError(f"invalid parameters: bitdepth {h.bitdepth}")
    num, den = h.q.numerator, h.q.denominator
    if not (0 < num < den < 1 << 16):
        raise ContainerError(f"invalid parameters: q={h.q}")
    if h.nbr_k not in (6, 18, 26) or h.nbr_i not in (6, 18, 26):
        raise ContainerError("invalid parameters: neighbour set id")
    try:
        h.params
    except ValueError as exc:
        raise ContainerError(f"invalid parameters: {exc}") from None


def write_container(header: Header, base: bytes, prior: bytes) -> bytes:
    header = Header(
        bitdepth=header.bitdepth, q=header.q, K=header.K, Kprime=header.Kprime,
        nbr_k=header.nbr_k, nbr_i=header.nbr_i,
        base_length=len(base), prior_length=len(prior), version=header.version,
    )
    _validate(header)
    head = _HEADER.pack(
        MAGIC, header.version, header.bitdepth, header.q.numerator, header.q.denominator,
        header.K, header.Kprime, header.nbr_k, header.nbr_i, len(base), len(prior),
    )
    return head + bytes(base) + bytes(prior)


def read_container(data: bytes) -> tuple[Header, bytes, bytes]:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise ContainerError("not an HPSR stream")
    if len(data) < HEADER_SIZE:
        raise ContainerError("truncated stream: incomplete header")
    (_, version, bitdepth, num, den, K, Kprime, nbr_k, nbr_i,
     base_len, prior_len) = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported format version {version}")
    if den == 0 or gcd(num, den) != 1:
        raise ContainerError(f"invalid parameters: q={num}/{den} is not reduced")
    header = Header(bitdepth, Fraction(num, den), K, Kprime, nbr_k, nbr_i, base_len, prior_len, version)
    _validate(header)
    body = len(data) - HEADER_SIZE
    if base_len + prior_len > body:
        raise ContainerError("truncated stream: declared lengths exceed file size")
    if base_len + prior_len < body:
        raise ContainerError("trailing bytes after prior substream")
    base = data[HEADER_SIZE:HEADER_SIZE + base_len]
    prior = data[HEADER_SIZE + base_len:]
    return header, base, prior
