"""Adaptive binary range coder.

A carry-propagating range coder with 32-bit range, byte-wise renormalisation
below 2**24 and 12-bit adaptive probabilities updated with shift 5. The
decoder consumes exactly as many bytes as the encoder produced, which lets
callers detect truncation and trailing garbage.

The loops are compiled with numba; the public wrappers take and return plain
numpy arrays and ``bytes``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import StreamError

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE >> 1
MOVE_BITS = 5
TOP = 1 << 24
MASK32 = 0xFFFFFFFF

# decoder state slots
_RANGE, _CODE, _POS, _ERR = 0, 1, 2, 3


class RangeCoderError(StreamError):
    pass


@njit(cache=True)
def _encode_kernel(bits, ctx, probs):
    n = bits.shape[0]
    out = np.empty(n + 16, dtype=np.uint8)
    n_out = 0
    low = np.int64(0)
    rng = np.int64(MASK32)
    cache = np.int64(0)
    cache_size = np.int64(1)
    for i in range(n + 5):
        if i < n:
            p = probs[ctx[i]]
            bound = (rng >> PROB_BITS) * p
            if bits[i] == 0:
                rng = bound
                probs[ctx[i]] = p + ((PROB_ONE - p) >> MOVE_BITS)
            else:
                low += bound
                rng -= bound
                probs[ctx[i]] = p - (p >> MOVE_BITS)
            if rng >= TOP:
                continue
        while True:
            # shift_low
            if (low & MASK32) < 0xFF000000 or (low >> 32) != 0:
                carry = low >> 32
                temp = cache
                while True:
                    if n_out == out.shape[0]:
                        grown = np.empty(out.shape[0] * 2, dtype=np.uint8)
                        grown[:n_out] = out[:n_out]
                        out = grown
                    out[n_out] = (temp + carry) & 0xFF
                    n_out += 1
                    temp = 0xFF
                    cache_size -= 1
                    if cache_size == 0:
                        break
                cache = (low >> 24) & 0xFF
            cache_size += 1
            low = (low & 0x00FFFFFF) << 8
            if i >= n:
                break
            rng = (rng << 8) & MASK32
            if rng >= TOP:
                break
    return out[:n_out]


@njit(cache=True)
def _next_byte(data, state):
    pos = state[_POS]
    state[_POS] = pos + 1
    if pos < data.shape[0]:
        return np.int64(data[pos])
    state[_ERR] = 1
    return np.int64(0)


@njit(cache=True)
def _init_state(data, state):
    state[_RANGE] = MASK32
    state[_CODE] = 0
    state[_POS] = 0
    state[_ERR] = 0
    if data.shape[0] == 0 or data[0] != 0:
        state[_ERR] = 1
    for _ in range(5):
        state[_CODE] = ((state[_CODE] << 8) | _next_byte(data, state)) & MASK32


@njit(cache=True)
def _decode_bit(data, state, probs, c):
    rng = state[_RANGE]
    code = state[_CODE]
    p = probs[c]
    bound = (rng >> PROB_BITS) * p
    if code < bound:
        rng = bound
        probs[c] = p + ((PROB_ONE - p) >> MOVE_BITS)
        bit = 0
    else:
        code -= bound
        rng -= bound
        probs[c] = p - (p >> MOVE_BITS)
        bit = 1
    while rng < TOP:
        rng = (rng << 8) & MASK32
        code = ((code << 8) | _next_byte(data, state)) & MASK32
    state[_RANGE] = rng
    state[_CODE] = code
    return bit


@njit(cache=True)
def _decode_kernel(data, state, probs, ctx):
    n = ctx.shape[0]
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        out[i] = _decode_bit(data, state, probs, ctx[i])
        if state[_ERR]:
            return out[:i + 1]
    return out


def encode_bits(bits, contexts, n_contexts: int) -> bytes:
    """Code ``bits[i]`` with adaptive model ``contexts[i]``."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    contexts = np.ascontiguousarray(contexts, dtype=np.int64)
    if bits.shape != contexts.shape:
        raise ValueError("bits and contexts must have the same length")
    if len(contexts) and (contexts.min() < 0 or contexts.max() >= n_contexts):
        raise ValueError("context index out of range")
    probs = np.full(n_contexts, PROB_INIT, dtype=np.int64)
    return _encode_kernel(bits, contexts, probs).tobytes()


class BinDecoder:
    """Resumable decoder; bits can be pulled in several batches."""

    def __init__(self, data: bytes, n_contexts: int):
        self.data = np.frombuffer(bytes(data), dtype=np.uint8)
        self.state = np.zeros(4, dtype=np.int64)
        self.probs = np.full(n_contexts, PROB_INIT, dtype=np.int64)
        _init_state(self.data, self.state)
        if self.state[_ERR]:
            raise RangeCoderError("malformed range-coded stream")

    def decode(self, contexts) -> np.ndarray:
        contexts = np.ascontiguousarray(contexts, dtype=np.int64)
        if len(contexts) and (contexts.min() < 0 or contexts.max() >= len(self.probs)):
            raise ValueError("context index out of range")
        out = _decode_kernel(self.data, self.state, self.probs, contexts)
        if self.state[_ERR]:
            raise RangeCoderError("range-coded stream ended early")
        return out

    def finish(self) -> None:
        """Require that every byte of the stream has been consumed."""
        if self.state[_POS] != len(self.data):
            raise RangeCoderError("range-coded stream length mismatch")


def decode_bits(data: bytes, contexts, n_contexts: int) -> np.ndarray:
    dec = BinDecoder(data, n_contexts)
    out = dec.decode(contexts)
    dec.finish()
    return out
