import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cloud, solid_box
from hpsr.basecodec import (
    BaseStreamError,
    decode_base,
    encode_base,
    morton_decode,
    morton_encode,
    occupancy_levels,
)
from hpsr.errors import StreamError
from hpsr.geometry import VoxelCloud
from hpsr.rangecoder import BinDecoder, RangeCoderError, decode_bits, encode_bits


def test_rangecoder_roundtrip(rng):
    for n in (0, 1, 7, 1000, 50000):
        p = rng.uniform(0.01, 0.99)
        bits = (rng.random(n) < p).astype(np.uint8)
        ctx = rng.integers(0, 16, n)
        data = encode_bits(bits, ctx, 16)
        assert np.array_equal(decode_bits(data, ctx, 16), bits)


def test_rangecoder_compresses_skewed_bits(rng):
    bits = (rng.random(20000) < 0.02).astype(np.uint8)
    data = encode_bits(bits, np.zeros(len(bits), dtype=np.int64), 1)
    assert 8 * len(data) < 0.25 * len(bits)


def test_rangecoder_incremental_decoder(rng):
    bits = rng.integers(0, 2, 3000).astype(np.uint8)
    ctx = rng.integers(0, 4, 3000)
    dec = BinDecoder(encode_bits(bits, ctx, 4), 4)
    got = np.concatenate([dec.decode(ctx[:1000]), dec.decode(ctx[1000:])])
    dec.finish()
    assert np.array_equal(got, bits)


def test_rangecoder_truncation_detected(rng):
    bits = rng.integers(0, 2, 5000).astype(np.uint8)
    ctx = np.zeros(5000, dtype=np.int64)
    data = encode_bits(bits, ctx, 1)
    with pytest.raises(RangeCoderError):
        decode_bits(data[:-1], ctx, 1)
    with pytest.raises(RangeCoderError):
        decode_bits(data + b"\x00", ctx, 1)


def test_morton_roundtrip(rng):
    pts = rng.integers(0, 2 ** 12, size=(500, 3))
    assert np.array_equal(morton_decode(morton_encode(pts, 12), 12), pts)


def test_full_cube_single_occupancy_byte():
    V = solid_box(0, 2, 1)
    assert [lv.tolist() for lv in occupancy_levels(V)] == [[0xFF]]


def test_single_point_roundtrip():
    V = VoxelCloud([[0, 0, 0]], 3)
    assert decode_base(encode_base(V)) == V


def test_header_layout(rng):
    V = random_cloud(rng, 4096, 10)
    data = encode_base(V)
    version, depth, count = struct.unpack_from("<BBI", data)
    assert (version, depth, count) == (1, 10, len(V))
    assert decode_base(data) == V


def test_two_hundred_round_trips():
    rng = np.random.default_rng(7)
    for i in range(200):
        b = int(rng.integers(1, 13))
        n = int(rng.integers(1, min(4000, 8 ** b) + 1))
        V = random_cloud(rng, n, b, ("uniform", "blob", "surface")[i % 3])
        data = encode_base(V)
        out = decode_base(data)
        assert out == V, i
        assert data == encode_base(V)


def test_solid_cube_beats_raw_listing():
    V = solid_box(3, 19, 6)
    assert 8 * len(encode_base(V)) < 3 * 6 * len(V)


def test_empty_rejected():
    with pytest.raises(ValueError):
        encode_base(VoxelCloud(np.empty((0, 3), dtype=int)))


def test_malformed_streams_raise_structured_errors(rng):
    V = random_cloud(rng, 2000, 8, "blob")
    data = encode_base(V)
    with pytest.raises(BaseStreamError):
        decode_base(b"")
    with pytest.raises(BaseStreamError):
        decode_base(data[:6])
    for cut in range(1, len(data), max(1, len(data) // 50)):
        with pytest.raises(BaseStreamError, match="malformed base stream"):
            decode_base(data[:-cut])
    bad_version = bytes([9]) + data[1:]
    with pytest.raises(BaseStreamError):
        decode_base(bad_version)


def test_fuzzed_base_streams_never_crash(rng):
    V = random_cloud(rng, 500, 7)
    data = bytearray(encode_base(V))
    for _ in range(300):
        mutated = bytearray(data)
        for _ in range(int(rng.integers(1, 4))):
            mutated[int(rng.integers(0, len(mutated)))] ^= 1 << int(rng.integers(0, 8))
        try:
            out = decode_base(bytes(mutated))
        except StreamError:
            continue
        assert isinstance(out, VoxelCloud)


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=64))
def test_random_bytes_never_crash(blob):
    try:
        decode_base(blob)
    except StreamError:
        pass


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 300)] * 3), min_size=1, max_size=200))
def test_base_roundtrip_property(pts):
    V = VoxelCloud(pts)
    assert decode_base(encode_base(V)) == V
