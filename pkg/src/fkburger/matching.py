"""Matches, the resolved word Y, flexible-order records and hitting-time statistics."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

import numpy as np
from numba import njit

from . import rng
from .params import ModelParams
from .word import Symbol, Word, match_kernel


class _OutsideWindow:
    """Sentinel for a match that falls outside the current window."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "OutsideWindow"

    def __reduce__(self):
        return (_OutsideWindow, ())


OUTSIDE = _OutsideWindow()


@dataclass(frozen=True)
class Censored:
    """Hitting time larger than ``cap``."""

    cap: int


class UnresolvedFlexible(ValueError):
    def __init__(self, index):
        super().__init__(f"flexible order at index {index} has no match in the window")
        self.index = index


class Direction(Enum):
    LEFT = "L"
    RIGHT = "R"
    UNDEFINED = "U"

    def opposite(self) -> "Direction":
        return {Direction.LEFT: Direction.RIGHT, Direction.RIGHT: Direction.LEFT}.get(self, self)


class MatchTable:
    """Match function of a window.

    ``rel`` holds 0-based match offsets (-1 where the match is outside).
    """

    def __init__(self, word: Word, rel: np.ndarray):
        self.word = word
        self.rel = rel
        self.start = word.start
        self.end = word.end

    @property
    def window(self) -> tuple:
        return (self.start, self.end)

    def phi(self, i: int):
        if not self.start <= i <= self.end:
            raise IndexError(f"index {i} outside window")
        k = self.rel[i - self.start]
        return OUTSIDE if k < 0 else int(k) + self.start

    def matched(self, i: int) -> bool:
        return self.rel[i - self.start] >= 0

    def as_absolute(self) -> np.ndarray:
        """Absolute match indices; unmatched entries hold ``start - 1``."""
        return np.where(self.rel >= 0, self.rel + self.start, self.start - 1)


def compute_matches(w: Word) -> MatchTable:
    rel = match_kernel(w.symbols) if len(w) else np.zeros(0, dtype=np.int64)
    return MatchTable(w, rel)


# ---------------------------------------------------------------- phi star

@njit(cache=True)
def _build_min_tree(vals):
    size = 1
    while size < max(vals.size, 1):
        size *= 2
    tree = np.full(2 * size, np.iinfo(np.int64).max, dtype=np.int64)
    tree[size:size + vals.size] = vals
    for k in range(size - 1, 0, -1):
        tree[k] = min(tree[2 * k], tree[2 * k + 1])
    return tree, size


@njit(cache=True)
def _rightmost_below(tree, size, lo, hi, x):
    """Largest position in [lo, hi] with value < x, or -1."""
    if lo > hi:
        return -1
    left = np.empty(64, dtype=np.int64)
    right = np.empty(64, dtype=np.int64)
    nl = 0
    nr = 0
    a = lo + size
    b = hi + size + 1
    while a < b:
        if a & 1:
            left[nl] = a
            nl += 1
            a += 1
        if b & 1:
            b -= 1
            right[nr] = b
            nr += 1
        a >>= 1
        b >>= 1
    for t in range(nr + nl):
        node = right[t] if t < nr else left[nl - 1 - (t - nr)]
        if tree[node] < x:
            while node < size:
                node = 2 * node + 1 if tree[2 * node + 1] < x else 2 * node
            return node - size
    return -1


@njit(cache=True)
def _phi_star_kernel(sym, phi):
    """Relative phi* for every matched order; -2 marks outside, -1 not applicable."""
    n = sym.size
    big = np.iinfo(np.int64).max
    vals = np.empty(n, dtype=np.int64)
    for k in range(n):
        if sym[k] < 2:
            vals[k] = big
        elif phi[k] < 0:
            vals[k] = -1
        else:
            vals[k] = phi[k]
    tree, size = _build_min_tree(vals)
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if sym[i] >= 2 and phi[i] >= 0:
            l = phi[i]
            k = _rightmost_below(tree, size, l + 1, i - 1, l)
            if k < 0:
                out[i] = l
            elif phi[k] < 0:
                out[i] = -2
            else:
                out[i] = phi[k]
    return out


def phi_star_array(mt: MatchTable) -> np.ndarray:
    """Relative phi* offsets for the whole window (-2 outside, -1 not an in-window matched order)."""
    w = mt.word
    if not len(w):
        return np.zeros(0, dtype=np.int64)
    cached = getattr(mt, "_phi_star", None)
    if cached is None:
        cached = _phi_star_kernel(w.symbols, mt.rel)
        mt._phi_star = cached
    return cached


def phi_star(w: Word, mt: MatchTable, i: int):
    """Match of the rightmost order in X(phi(i), i), or phi(i) if that word has no orders."""
    if not w[i].is_order:
        raise ValueError(f"index {i} does not carry an order")
    if not mt.matched(i):
        raise ValueError(f"order at index {i} is unmatched in the window")
    k = phi_star_array(mt)[i - w.start]
    return OUTSIDE if k == -2 else int(k) + w.start


# ---------------------------------------------------------------- Y word

def resolve_Y(w: Word, mt: MatchTable) -> Word:
    """Replace each o_f by o_h or o_c according to the burger it consumes."""
    sym = w.symbols.copy()
    flex = np.flatnonzero(sym == 4)
    for k in flex:
        j = mt.rel[k]
        if j < 0:
            raise UnresolvedFlexible(int(k) + w.start)
        sym[k] = 2 if sym[j] == 0 else 3
    return Word(w.start, sym)


@njit(cache=True)
def _partial_prefix(sym, phi):
    """Inclusive prefix sums of the h- and c-walks, unmatched o_f contributing 0."""
    n = sym.size
    ph = np.zeros(n + 1, dtype=np.int64)
    pc = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        dh = 0
        dc = 0
        s = sym[k]
        if s == 0:
            dh = 1
        elif s == 1:
            dc = 1
        elif s == 2:
            dh = -1
        elif s == 3:
            dc = -1
        elif phi[k] >= 0:
            if sym[phi[k]] == 0:
                dh = -1
            else:
                dc = -1
        ph[k + 1] = ph[k] + dh
        pc[k + 1] = pc[k] + dc
    return ph, pc


def _prefix(mt: MatchTable):
    cached = getattr(mt, "_prefix", None)
    if cached is None:
        cached = _partial_prefix(mt.word.symbols, mt.rel)
        mt._prefix = cached
    return cached


def flex_interval_length(mt: MatchTable, i: int) -> int:
    """|X(phi(i), i)| for a matched o_f at ``i``.

    The reduced word holds only the orders crossing the consumed burger;
    it equals minus the walk increment over (phi(i), i) in the coordinate
    opposite to that burger's kind.
    """
    k = i - mt.start
    j = int(mt.rel[k])
    ph, pc = _prefix(mt)
    pre = pc if mt.word.symbols[j] == 0 else ph
    return int(pre[j + 1] - pre[k])


@dataclass(frozen=True)
class FlexRecord:
    """A matched flexible order.  ``reduced_len`` is |X(phi, i)|."""

    i: int
    phi: int
    phi_star: object
    dir: Direction
    degenerate: bool
    reduced_len: int

    @property
    def area(self) -> int:
        return self.i - self.phi

    @property
    def boundary_len(self) -> int:
        return self.reduced_len + 1

    def csv_row(self) -> list:
        ps = "outside" if self.phi_star is OUTSIDE else self.phi_star
        return [self.i, self.phi, ps, self.dir.value, int(self.degenerate)]


ConeRecord = FlexRecord
FLEX_CSV_HEADER = ["i", "phi", "phi_star", "dir", "degenerate"]


def flex_record(w: Word, mt: MatchTable, i: int) -> FlexRecord:
    k = i - w.start
    j = int(mt.rel[k])
    if w.symbols[k] != 4 or j < 0:
        raise ValueError(f"index {i} is not a matched flexible order")
    ps = phi_star_array(mt)[k]
    L = flex_interval_length(mt, i)
    d = Direction.LEFT if w.symbols[j] == 1 else Direction.RIGHT
    return FlexRecord(i, j + w.start, OUTSIDE if ps == -2 else int(ps) + w.start, d, L == 0, L)


def flex_records(w: Word, mt: MatchTable) -> list:
    """One record per matched o_f, sorted by index."""
    if not len(w):
        return []
    ks = np.flatnonzero((w.symbols == 4) & (mt.rel >= 0))
    return [flex_record(w, mt, int(k) + w.start) for k in ks]


# ---------------------------------------------------------------- forward matches

def forward_match(w: Word, i: int):
    """Smallest j >= i+1 such that X(i+1, j) contains an order."""
    if (i + 1) not in w or not w[i + 1].is_burger:
        raise ValueError(f"index {i} is not a pre-burger time")
    nh = nc = 0
    stack = []
    for j in range(i + 1, w.end + 1):
        s = int(w.symbols[j - w.start])
        if s == 0:
            nh += 1
            stack.append(0)
        elif s == 1:
            nc += 1
            stack.append(1)
        elif s == 2:
            if nh == 0:
                return j
            nh -= 1
            _remove_top(stack, 0)
        elif s == 3:
            if nc == 0:
                return j
            nc -= 1
            _remove_top(stack, 1)
        else:
            if not stack:
                return j
            if stack.pop() == 0:
                nh -= 1
            else:
                nc -= 1
    return OUTSIDE


def _remove_top(stack, kind):
    for t in range(len(stack) - 1, -1, -1):
        if stack[t] == kind:
            del stack[t]
            return


@njit(cache=True)
def _ancestor_free_kernel(sym):
    n = sym.size
    out = np.empty(n, dtype=np.int64)
    m = 0
    hs = np.empty(n, dtype=np.int64)
    cs = np.empty(n, dtype=np.int64)
    nh = 0
    nc = 0
    for k in range(n):
        s = sym[k]
        hit = False
        if s == 0:
            hs[nh] = k
            nh += 1
        elif s == 1:
            cs[nc] = k
            nc += 1
        elif s == 2:
            if nh > 0:
                nh -= 1
            else:
                hit = True
        elif s == 3:
            if nc > 0:
                nc -= 1
            else:
                hit = True
        else:
            if nh > 0 and (nc == 0 or hs[nh - 1] > cs[nc - 1]):
                nh -= 1
            elif nc > 0:
                nc -= 1
            else:
                hit = True
        if hit:
            out[m] = k
            m += 1
            nh = 0
            nc = 0
    return out[:m]


def ancestor_free(w: Word, lo: int | None = None, hi: int | None = None) -> list:
    """Ancestor-free times: i such that X(k, i) contains an order for all k in [1, i].

    Computed by restarting the reduction after each such time; the window
    must start at index 1.
    """
    if w.start != 1:
        raise ValueError("ancestor-free times need a window starting at index 1")
    lo = 1 if lo is None else lo
    hi = w.end if hi is None else hi
    if not len(w):
        return []
    idx = _ancestor_free_kernel(w.symbols) + 1
    return [int(i) for i in idx if lo <= i <= hi]


# ---------------------------------------------------------------- hitting times

STATS = ("J", "Jtilde", "I", "KF", "P")
BACKWARD = {"J": True, "Jtilde": True, "P": True, "I": False, "KF": False}
_CODE = {"J": 0, "Jtilde": 1, "I": 2, "KF": 3, "P": 4}
STAT_ALIASES = {"J_tilde": "Jtilde", "K_F": "KF", "K^F": "KF"}


def _stat_name(stat: str) -> str:
    stat = STAT_ALIASES.get(stat, stat)
    if stat not in _CODE:
        raise ValueError(f"unknown statistic {stat!r}; choose from {STATS}")
    return stat


class _Backward:
    """Reduction of X(-j,-1) under left-appending; only orders are tracked
    because a surviving burger sits right of every later left-appended symbol."""

    def __init__(self):
        self.tops = {2: [], 3: [], 4: []}
        self.burger = False

    def push(self, s: int, j: int):
        if s >= 2:
            self.tops[s].append(j)
            return
        own = self.tops[2 if s == 0 else 3]
        flex = self.tops[4]
        if own and (not flex or own[-1] > flex[-1]):
            own.pop()
        elif flex:
            flex.pop()
        else:
            self.burger = True

    @property
    def n_orders(self) -> int:
        return sum(len(v) for v in self.tops.values())


class _Forward:
    def __init__(self):
        self.h = []
        self.c = []
        self.order = False
        self.flex = False

    def push(self, s: int, i: int):
        if s == 0:
            self.h.append(i)
        elif s == 1:
            self.c.append(i)
        elif s == 2:
            if self.h:
                self.h.pop()
            else:
                self.order = True
        elif s == 3:
            if self.c:
                self.c.pop()
            else:
                self.order = True
        else:
            if self.h and (not self.c or self.h[-1] > self.c[-1]):
                self.h.pop()
            elif self.c:
                self.c.pop()
            else:
                self.order = True
                self.flex = True


def hitting_time(stream: Iterable, stat: str, cap: int):
    """Hitting time of ``stat`` read lazily from ``stream``.

    For J, Jtilde and P the stream yields X_{-1}, X_{-2}, ...; for I and KF
    it yields X_1, X_2, ....  Returns an int or :class:`Censored`.
    """
    stat = _stat_name(stat)
    if cap < 1:
        raise ValueError("cap must be at least 1")
    st = _Backward() if BACKWARD[stat] else _Forward()
    for j, s in enumerate(stream, start=1):
        if j > cap:
            return Censored(cap)
        st.push(int(Symbol.parse(s)), j)
        if stat == "J" and st.burger:
            return j
        if stat == "Jtilde" and not st.tops[4]:
            return j
        if stat == "P" and st.n_orders == 0:
            return j
        if stat == "I" and st.order:
            return j
        if stat == "KF" and st.flex:
            return j
    return Censored(cap)


def replica_stream(params: ModelParams, seed: int, replica: int, backward: bool) -> Iterator[Symbol]:
    """Lazy symbol stream X_{-1}, X_{-2}, ... (backward) or X_1, X_2, ... of a replica."""
    key = np.uint64(rng.replica_seed(seed, replica))
    c = rng.thresholds(params.p)
    step = -1 if backward else 1
    k = step
    block = 256
    while True:
        if backward:
            arr = rng.fill_symbols(key, k - block + 1, block, *c)[::-1]
        else:
            arr = rng.fill_symbols(key, k, block, *c)
        for s in arr:
            yield Symbol(int(s))
        k += step * block


@njit(cache=True)
def _hit_one(code, key, cap, c0, c1, c2, c3, hs, cs, fs):
    if code == 0 or code == 1 or code == 4:
        nh = 0
        nc = 0
        nf = 0
        for j in range(1, cap + 1):
            s = rng.symbol_at(key, -j, c0, c1, c2, c3)
            if s == 2:
                hs[nh] = j
                nh += 1
            elif s == 3:
                cs[nc] = j
                nc += 1
            elif s == 4:
                fs[nf] = j
                nf += 1
            else:
                if s == 0:
                    if nh > 0 and (nf == 0 or hs[nh - 1] > fs[nf - 1]):
                        nh -= 1
                    elif nf > 0:
                        nf -= 1
                    elif code == 0:
                        return j
                else:
                    if nc > 0 and (nf == 0 or cs[nc - 1] > fs[nf - 1]):
                        nc -= 1
                    elif nf > 0:
                        nf -= 1
                    elif code == 0:
                        return j
            if code == 1 and nf == 0:
                return j
            if code == 4 and nh + nc + nf == 0:
                return j
        return cap + 1
    nh = 0
    nc = 0
    for i in range(1, cap + 1):
        s = rng.symbol_at(key, i, c0, c1, c2, c3)
        if s == 0:
            hs[nh] = i
            nh += 1
        elif s == 1:
            cs[nc] = i
            nc += 1
        elif s == 2:
            if nh > 0:
                nh -= 1
            elif code == 2:
                return i
        elif s == 3:
            if nc > 0:
                nc -= 1
            elif code == 2:
                return i
        else:
            if nh > 0 and (nc == 0 or hs[nh - 1] > cs[nc - 1]):
                nh -= 1
            elif nc > 0:
                nc -= 1
            else:
                return i
    return cap + 1


@njit(cache=True)
def _hit_batch(code, seed, r0, count, cap, c0, c1, c2, c3):
    out = np.empty(count, dtype=np.int64)
    hs = np.empty(cap + 1, dtype=np.int64)
    cs = np.empty(cap + 1, dtype=np.int64)
    fs = np.empty(cap + 1, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        out[t] = _hit_one(code, key, cap, c0, c1, c2, c3, hs, cs, fs)
    return out


def hitting_times(params: ModelParams, stat: str, cap: int, seed: int, r0: int, count: int) -> np.ndarray:
    """Hitting times of replicas r0 .. r0+count-1; censored values are ``cap + 1``."""
    stat = _stat_name(stat)
    return _hit_batch(_CODE[stat], np.uint64(seed), r0, count, cap, *rng.thresholds(params.p))


# ---------------------------------------------------------------- long scans

@njit(cache=True)
def _flex_scan_batch(seed, r0, count, n, c0, c1, c2, c3):
    """Forward scan of X(1, n): number of o_f meeting an empty stack, and the last such index."""
    nf_out = np.empty(count, dtype=np.int64)
    last_out = np.empty(count, dtype=np.int64)
    matched_out = np.empty(count, dtype=np.int64)
    hs = np.empty(n + 1, dtype=np.int64)
    cs = np.empty(n + 1, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        nh = 0
        nc = 0
        nf = 0
        last = 0
        matched = 0
        for i in range(1, n + 1):
            s = rng.symbol_at(key, i, c0, c1, c2, c3)
            if s == 0:
                hs[nh] = i
                nh += 1
            elif s == 1:
                cs[nc] = i
                nc += 1
            elif s == 2:
                if nh > 0:
                    nh -= 1
            elif s == 3:
                if nc > 0:
                    nc -= 1
            else:
                if nh > 0 and (nc == 0 or hs[nh - 1] > cs[nc - 1]):
                    nh -= 1
                    matched += 1
                elif nc > 0:
                    nc -= 1
                    matched += 1
                else:
                    nf += 1
                    last = i
        nf_out[t] = nf
        last_out[t] = last
        matched_out[t] = matched
    return nf_out, last_out, matched_out


def flex_scan(params: ModelParams, n: int, seed: int, r0: int, count: int):
    """Per replica: (#o_f in X(1,n), last i <= n with X_i = o_f and phi(i) <= 0, #o_f matched in [1,n])."""
    return _flex_scan_batch(np.uint64(seed), r0, count, n, *rng.thresholds(params.p))


@njit(cache=True)
def _jtilde_age_batch(seed, r0, count, n, c0, c1, c2, c3):
    """Backward scan: largest j <= n with no o_f in X(-j,-1) (0 if none)."""
    out = np.empty(count, dtype=np.int64)
    hs = np.empty(n + 1, dtype=np.int64)
    cs = np.empty(n + 1, dtype=np.int64)
    fs = np.empty(n + 1, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        nh = 0
        nc = 0
        nf = 0
        last = 0
        for j in range(1, n + 1):
            s = rng.symbol_at(key, -j, c0, c1, c2, c3)
            if s == 2:
                hs[nh] = j
                nh += 1
            elif s == 3:
                cs[nc] = j
                nc += 1
            elif s == 4:
                fs[nf] = j
                nf += 1
            elif s == 0:
                if nh > 0 and (nf == 0 or hs[nh - 1] > fs[nf - 1]):
                    nh -= 1
                elif nf > 0:
                    nf -= 1
            else:
                if nc > 0 and (nf == 0 or cs[nc - 1] > fs[nf - 1]):
                    nc -= 1
                elif nf > 0:
                    nf -= 1
            if nf == 0:
                last = j
        out[t] = last
    return out


def jtilde_last_renewal(params: ModelParams, n: int, seed: int, r0: int, count: int) -> np.ndarray:
    return _jtilde_age_batch(np.uint64(seed), r0, count, n, *rng.thresholds(params.p))
