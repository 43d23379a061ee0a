"""Bit sequences with rank/select and fixed-width packed integer sequences.

Both structures store little-endian 64-bit words: bit ``i`` of a sequence
lives at bit ``i % 64`` of word ``i // 64``, and packed values are laid
out back to back starting at bit 0.  The word buffers can be any
bytes-like object, including a slice of a memory-mapped file, so loading
does not copy them.
"""

from __future__ import annotations

import sys
from bisect import bisect_left
from collections.abc import Iterable, Iterator
from array import array

import numpy as np

from hdtx.errors import IdOutOfRange

WORD = 64
GROUP_WORDS = 8  # rank sample every 8 words
_NATIVE_LITTLE = sys.byteorder == "little"


def encode_varint(n: int) -> bytes:
    out = bytearray()
    while n >= 0x80:
        out.append((n & 0x7F) | 0x80)
        n >>= 7
    out.append(n)
    return bytes(out)


def decode_varint(buf, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if b < 0x80:
            return result, pos
        shift += 7


def word_count(n_bits: int) -> int:
    return (n_bits + WORD - 1) // WORD


def bit_width(max_value: int) -> int:
    return max(1, int(max_value).bit_length())


def _word_view(buf, n_words: int):
    """A sequence of Python ints over ``n_words`` little-endian words."""
    if n_words == 0:
        return ()
    mv = memoryview(buf).cast("B")[: n_words * 8]
    if _NATIVE_LITTLE:
        return mv.cast("Q")
    return array("Q", np.frombuffer(mv, dtype="<u8").astype(np.uint64))


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a 0/1 array into whole little-endian words."""
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    pad = (-len(packed)) % 8
    return packed.tobytes() + b"\0" * pad


def pack_values(values: np.ndarray, width: int) -> bytes:
    """Pack unsigned integers at ``width`` bits each into whole words."""
    values = np.asarray(values, dtype=np.uint64)
    if len(values) == 0:
        return b""
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).ravel()
    return pack_bits(bits)


class BitSequence:
    """Immutable bit sequence with rank and select over set bits."""

    def __init__(self, length: int, words=b""):
        self.length = length
        self.n_words = word_count(length)
        self._buf = words
        self._words = _word_view(words, self.n_words)
        counts = np.bitwise_count(self.to_words()) if self.n_words else np.zeros(0, np.uint8)
        cumulative = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
        self.ones = int(cumulative[-1])
        # samples[g] = number of ones before word g * GROUP_WORDS
        self._samples = array("q", cumulative[::GROUP_WORDS].tolist())

    @classmethod
    def from_bits(cls, bits) -> BitSequence:
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(len(bits), pack_bits(bits))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self._words[i >> 6] >> (i & 63)) & 1

    def to_words(self) -> np.ndarray:
        return np.frombuffer(memoryview(self._buf).cast("B")[: self.n_words * 8], dtype="<u8")

    def to_numpy(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.length if stop is None else stop
        if stop <= start:
            return np.zeros(0, dtype=np.uint8)
        w0, w1 = start >> 6, word_count(stop)
        raw = memoryview(self._buf).cast("B")[w0 * 8 : w1 * 8]
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
        return bits[start - w0 * 64 : stop - w0 * 64]

    def rank1(self, i: int) -> int:
        """Number of set bits in positions ``[0, i)``."""
        if i <= 0:
            return 0
        if i >= self.length:
            return self.ones
        w = i >> 6
        g = w // GROUP_WORDS
        count = self._samples[g]
        words = self._words
        for k in range(g * GROUP_WORDS, w):
            count += words[k].bit_count()
        return count + (words[w] & ((1 << (i & 63)) - 1)).bit_count()

    def select1(self, k: int) -> int:
        """Position of the ``k``-th set bit (1-based ``k``)."""
        if not 1 <= k <= self.ones:
            raise IdOutOfRange(f"select1({k}) with {self.ones} set bits")
        g = bisect_left(self._samples, k) - 1
        count = self._samples[g]
        words = self._words
        wi = g * GROUP_WORDS
        while True:
            w = words[wi]
            c = w.bit_count()
            if count + c >= k:
                for _ in range(k - count - 1):
                    w &= w - 1
                return wi * WORD + (w & -w).bit_length() - 1
            count += c
            wi += 1

    def next_one(self, pos: int) -> int:
        """First position ``>= pos`` holding a set bit, or ``len(self)``."""
        if pos >= self.length:
            return self.length
        words = self._words
        wi = pos >> 6
        w = words[wi] >> (pos & 63) << (pos & 63)
        while not w:
            wi += 1
            if wi >= self.n_words:
                return self.length
            w = words[wi]
        return min(wi * WORD + (w & -w).bit_length() - 1, self.length)

    def word_bytes(self) -> memoryview:
        return memoryview(self._buf).cast("B")[: self.n_words * 8]


class PackedSequence:
    """Immutable sequence of unsigned integers stored at a fixed bit width."""

    def __init__(self, count: int, width: int, words=b""):
        if not 1 <= width <= 64:
            raise ValueError(f"bit width {width} out of range")
        self.count = count
        self.width = width
        self.n_words = word_count(count * width)
        self._buf = words
        self._words = _word_view(words, self.n_words)
        self._mask = (1 << width) - 1

    @classmethod
    def from_values(cls, values) -> PackedSequence:
        values = np.asarray(values, dtype=np.uint64)
        width = bit_width(int(values.max()) if len(values) else 0)
        return cls(len(values), width, pack_values(values, width))

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.count:
            raise IndexError(i)
        bit = i * self.width
        wi, off = bit >> 6, bit & 63
        v = self._words[wi] >> off
        if off + self.width > WORD:
            v |= self._words[wi + 1] << (WORD - off)
        return v & self._mask

    def values(self, start: int, stop: int) -> list[int]:
        """Values in ``[start, stop)`` decoded with plain integer arithmetic."""
        return [self[i] for i in range(start, stop)]

    def to_numpy(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.count if stop is None else stop
        if stop <= start:
            return np.zeros(0, dtype=np.uint64)
        w = self.width
        w0 = (start * w) >> 6
        w1 = word_count(stop * w)
        raw = memoryview(self._buf).cast("B")[w0 * 8 : w1 * 8]
        words = np.concatenate((np.frombuffer(raw, dtype="<u8").astype(np.uint64), [np.uint64(0)]))
        pos = np.arange(start, stop, dtype=np.uint64) * np.uint64(w) - np.uint64(w0 * 64)
        idx = (pos >> np.uint64(6)).astype(np.intp)
        off = pos & np.uint64(63)
        lo = words[idx] >> off
        spill = off + np.uint64(w) > np.uint64(64)
        if spill.any():
            hi_shift = np.where(spill, np.uint64(64) - off, np.uint64(0))
            hi = np.where(spill, words[idx + 1] << hi_shift, np.uint64(0))
            lo = lo | hi
        if w < 64:
            lo &= np.uint64(self._mask)
        return lo

    def __iter__(self) -> Iterator[int]:
        return iter(self.to_numpy().tolist())

    def word_bytes(self) -> memoryview:
        return memoryview(self._buf).cast("B")[: self.n_words * 8]


def iter_packed_chunks(chunks: Iterable[np.ndarray], width: int) -> Iterator[bytes]:
    """Pack a stream of value chunks; every chunk but the last must hold a multiple of 64 values."""
    for chunk in chunks:
        if len(chunk):
            yield pack_values(chunk, width)


def iter_bit_chunks(chunks: Iterable[np.ndarray]) -> Iterator[bytes]:
    for chunk in chunks:
        if len(chunk):
            yield pack_bits(chunk)
