"""Alphabet, word windows, reduction, counts and the FKW1 file format."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from . import rng
from .params import ModelParams


class Symbol(IntEnum):
    B_H = 0
    B_C = 1
    O_H = 2
    O_C = 3
    O_F = 4

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def is_burger(self) -> bool:
        return self <= 1

    @property
    def is_order(self) -> bool:
        return self >= 2

    @classmethod
    def parse(cls, s) -> "Symbol":
        if isinstance(s, (int, np.integer)):
            return cls(int(s))
        return cls(_LABELS.index(str(s)))


_LABELS = ("b_h", "b_c", "o_h", "o_c", "o_f")
B_H, B_C, O_H, O_C, O_F = (Symbol(k) for k in range(5))


class WordFormatError(ValueError):
    """Malformed FKW1 payload."""


@dataclass(frozen=True, eq=False)
class Word:
    """The window X_start ... X_end of a bi-infinite word.

    ``symbols`` is a read-only uint8 array with codes 0..4.
    """

    start: int
    symbols: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.symbols, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("symbols must be one-dimensional")
        if arr.size and arr.max() > 4:
            raise ValueError("symbol codes must lie in 0..4")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "symbols", arr)
        object.__setattr__(self, "start", int(self.start))

    @classmethod
    def of(cls, symbols: Iterable, start: int = 1) -> "Word":
        return cls(start, np.array([int(Symbol.parse(s)) for s in symbols], dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.symbols.size)

    @property
    def end(self) -> int:
        """Last index (``start - 1`` for the empty window)."""
        return self.start + len(self) - 1

    def __contains__(self, i: int) -> bool:
        return self.start <= i <= self.end

    def __getitem__(self, i: int) -> Symbol:
        if i not in self:
            raise IndexError(f"index {i} outside window [{self.start}, {self.end}]")
        return Symbol(int(self.symbols[i - self.start]))

    def segment(self, a: int, b: int) -> "Word":
        """Sub-window X_a ... X_b (clipped to the window)."""
        a = max(a, self.start)
        b = min(b, self.end)
        if b < a:
            return Word(a, np.zeros(0, dtype=np.uint8))
        return Word(a, self.symbols[a - self.start:b - self.start + 1])

    def __eq__(self, other) -> bool:
        return (isinstance(other, Word) and self.start == other.start
                and np.array_equal(self.symbols, other.symbols))

    def __hash__(self):
        return hash((self.start, self.symbols.tobytes()))

    def __repr__(self) -> str:
        body = " ".join(_LABELS[c] for c in self.symbols[:24])
        more = " ..." if len(self) > 24 else ""
        return f"Word(start={self.start}, [{body}{more}])"

    def labels(self) -> list:
        return [_LABELS[c] for c in self.symbols]


@dataclass(frozen=True)
class ReducedWord:
    """Canonical form: pending orders (left to right), then the burger stack (bottom to top)."""

    orders: tuple = ()
    burgers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(Symbol.parse(s) for s in self.orders))
        object.__setattr__(self, "burgers", tuple(Symbol.parse(s) for s in self.burgers))
        if any(not s.is_order for s in self.orders) or any(not s.is_burger for s in self.burgers):
            raise ValueError("orders must be order symbols and burgers burger symbols")

    def __len__(self) -> int:
        return len(self.orders) + len(self.burgers)

    def is_empty(self) -> bool:
        return not self.orders and not self.burgers

    def symbols(self) -> tuple:
        return self.orders + self.burgers

    def to_dict(self) -> dict:
        return {"orders": [s.label for s in self.orders],
                "burgers": [s.label for s in self.burgers]}


@dataclass(frozen=True)
class CountVector:
    n: tuple
    d: int
    d_star: int

    @property
    def length(self) -> int:
        return int(sum(self.n))

    def __getitem__(self, s) -> int:
        return self.n[int(Symbol.parse(s))]


@njit(cache=True)
def match_kernel(sym):
    """Stack matching.  Returns relative match positions (-1 when unmatched).

    Two per-kind stacks of positions; the topmost burger overall is the
    larger of the two tops, so every operation is O(1).
    """
    n = sym.size
    phi = np.full(n, -1, dtype=np.int64)
    hs = np.empty(n, dtype=np.int64)
    cs = np.empty(n, dtype=np.int64)
    nh = 0
    nc = 0
    for k in range(n):
        s = sym[k]
        if s == 0:
            hs[nh] = k
            nh += 1
        elif s == 1:
            cs[nc] = k
            nc += 1
        elif s == 2:
            if nh > 0:
                nh -= 1
                phi[k] = hs[nh]
                phi[hs[nh]] = k
        elif s == 3:
            if nc > 0:
                nc -= 1
                phi[k] = cs[nc]
                phi[cs[nc]] = k
        else:
            if nh > 0 and (nc == 0 or hs[nh - 1] > cs[nc - 1]):
                nh -= 1
                phi[k] = hs[nh]
                phi[hs[nh]] = k
            elif nc > 0:
                nc -= 1
                phi[k] = cs[nc]
                phi[cs[nc]] = k
    return phi


def _as_codes(w) -> np.ndarray:
    if isinstance(w, Word):
        return w.symbols
    if isinstance(w, ReducedWord):
        return np.array([int(s) for s in w.symbols()], dtype=np.uint8)
    return np.array([int(Symbol.parse(s)) for s in w], dtype=np.uint8)


def reduce(w) -> ReducedWord:
    """Reduce a word (a :class:`Word` or any sequence of symbols) to canonical form."""
    codes = _as_codes(w)
    if codes.size == 0:
        return ReducedWord()
    phi = match_kernel(codes)
    left = codes[phi < 0]
    orders = tuple(Symbol(int(c)) for c in left if c >= 2)
    burgers = tuple(Symbol(int(c)) for c in left if c < 2)
    return ReducedWord(orders, burgers)


def reduce_concat(r1: ReducedWord, r2: ReducedWord) -> ReducedWord:
    """Product in the reduction semigroup: ``reduce(x y)`` from ``reduce(x)`` and ``reduce(y)``."""
    return reduce(r1.symbols() + r2.symbols())


def reduced_length(w) -> int:
    """``|R(w)|`` without building the symbol tuples."""
    codes = _as_codes(w)
    if codes.size == 0:
        return 0
    return int(np.count_nonzero(match_kernel(codes) < 0))


def counts(x) -> CountVector:
    codes = _as_codes(x)
    n = tuple(int(v) for v in np.bincount(codes, minlength=5)[:5])
    return CountVector(n, n[0] - n[2], n[1] - n[3])


def sample_word(params: ModelParams, start: int, end: int, seed: int, stream: int = 0) -> Word:
    """Symbols X_start..X_end of replica ``stream``; X_i depends only on (seed, stream, i)."""
    if end < start:
        raise ValueError("empty index range")
    key = np.uint64(rng.replica_seed(seed, stream))
    codes = rng.fill_symbols(key, start, end - start + 1, *rng.thresholds(params.p))
    return Word(start, codes)


_HEADER = struct.Struct("<4sqQ")
MAGIC = b"FKW1"


def serialize(w: Word) -> bytes:
    return _HEADER.pack(MAGIC, w.start, len(w)) + w.symbols.tobytes()


def deserialize(data: bytes) -> Word:
    if len(data) < _HEADER.size:
        raise WordFormatError("truncated header")
    magic, start, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WordFormatError(f"bad magic {magic!r}")
    payload = data[_HEADER.size:]
    if len(payload) != length:
        raise WordFormatError(f"payload has {len(payload)} bytes, header says {length}")
    codes = np.frombuffer(payload, dtype=np.uint8)
    if codes.size and codes.max() > 4:
        raise WordFormatError("symbol byte outside 0..4")
    return Word(start, codes.copy())


def write_word(path, w: Word) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(w))


def read_word(path) -> Word:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
