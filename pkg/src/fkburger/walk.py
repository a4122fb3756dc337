"""The lattice walk D = (d, d*), its rescaling and pi/2-cone times."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng
from .matching import (OUTSIDE, Direction, MatchTable, flex_record, phi_star_array)
from .params import ModelParams
from .word import Word

_INC = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=np.int64)


class NotFound:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NotFound"


NOT_FOUND = NotFound()


class CensoredError(RuntimeError):
    """The answer depends on matches outside the window."""


@dataclass(frozen=True, eq=False)
class WalkPath:
    """D at integer times t0, t0+1, ..., t0+len-1 with D(0) = (0, 0)."""

    t0: int
    d: np.ndarray
    d_star: np.ndarray

    @property
    def t1(self) -> int:
        return self.t0 + self.d.size - 1

    def at(self, t: int) -> tuple:
        if not self.t0 <= t <= self.t1:
            raise IndexError(f"time {t} outside [{self.t0}, {self.t1}]")
        return int(self.d[t - self.t0]), int(self.d_star[t - self.t0])

    def times(self) -> np.ndarray:
        return np.arange(self.t0, self.t1 + 1)


def build_walk(y: Word, origin: int = 1) -> WalkPath:
    """Walk of a resolved word.

    The symbol at index ``origin`` is the first positive step, so
    D(n) = d(Y(origin, origin+n-1)) and D(-n) = -d(Y(origin-n, origin-1)).
    With ``origin = 1`` this is the usual d(n) = d(Y(1,n)).
    """
    if np.any(y.symbols == 4):
        k = int(np.flatnonzero(y.symbols == 4)[0]) + y.start
        raise ValueError(f"flexible order at index {k}; resolve the word first")
    if not y.start <= origin <= y.end + 1:
        raise ValueError("origin must lie in the window or just after it")
    inc = _INC[y.symbols.astype(np.int64)] if len(y) else np.zeros((0, 2), dtype=np.int64)
    cum = np.vstack([np.zeros((1, 2), dtype=np.int64), np.cumsum(inc, axis=0)])
    cum -= cum[origin - y.start]
    return WalkPath(y.start - origin, cum[:, 0].copy(), cum[:, 1].copy())


def rescaled_eval(path: WalkPath, n: int, t: float) -> tuple:
    """Z^n(t) = n^{-1/2} D(nt) with linear interpolation."""
    x = n * t
    if not path.t0 <= x <= path.t1:
        raise ValueError(f"time {t} outside the path range at scale {n}")
    k = int(np.floor(x))
    f = x - k
    if f == 0.0:
        return path.d[k - path.t0] / np.sqrt(n), path.d_star[k - path.t0] / np.sqrt(n)
    a = k - path.t0
    u = (1 - f) * path.d[a] + f * path.d[a + 1]
    v = (1 - f) * path.d_star[a] + f * path.d_star[a + 1]
    return u / np.sqrt(n), v / np.sqrt(n)


def is_weak_cone_time(path: WalkPath, t: int) -> bool:
    """Integer time t is a weak pi/2-cone time of the interpolated path."""
    if t - 1 < path.t0:
        raise IndexError("need one step of history")
    a = t - path.t0
    return path.d[a - 1] >= path.d[a] and path.d_star[a - 1] >= path.d_star[a]


def last_entrance(path: WalkPath, t: int):
    """v(t) of an integer cone time of the interpolated path, or OUTSIDE if not reached in range."""
    a = t - path.t0
    u, v = path.d[a], path.d_star[a]
    for s in range(a - 1, -1, -1):
        if path.d[s] < u or path.d_star[s] < v:
            return s + 1 + path.t0
    return OUTSIDE


def maximal_f_times(w: Word, mt: MatchTable, lo: int, hi: int) -> list:
    """Matched o_f with [phi(i), i] in [lo, hi] not nested in another such interval."""
    lo = max(lo, w.start)
    hi = min(hi, w.end)
    out = []
    for k in range(lo - w.start, hi - w.start + 1):
        j = mt.rel[k]
        if w.symbols[k] != 4 or j < 0 or j + w.start < lo:
            continue
        while out and out[-1][0] > j:
            out.pop()
        out.append((j, k))
    return [flex_record(w, mt, k + w.start) for _, k in out]


def stopping_iota(w: Word, mt: MatchTable, a: float, r: float, n: int):
    """Smallest i with X_i = o_f, i >= a n and i - phi(i) >= r n - 1.

    An o_f matched before the window qualifies when even the smallest
    possible interval is long enough; otherwise :class:`CensoredError`.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    need = r * n - 1
    first = max(w.start, int(np.ceil(a * n)))
    for i in range(first, w.end + 1):
        k = i - w.start
        if w.symbols[k] != 4:
            continue
        j = mt.rel[k]
        if j >= 0:
            if k - j >= need:
                return i
        elif i - (w.start - 1) >= need:
            return i
        else:
            raise CensoredError(f"o_f at {i} is matched before the window")
    return NOT_FOUND


@dataclass(frozen=True)
class ConeHit:
    t: float
    v: float
    u: float
    dir: Direction
    index: int
    censored: bool = False


@njit(cache=True)
def _prev_smaller(x):
    """Index of the last earlier strictly smaller entry, or -1."""
    n = x.size
    out = np.empty(n, dtype=np.int64)
    st = np.empty(n, dtype=np.int64)
    top = 0
    for k in range(n):
        while top > 0 and x[st[top - 1]] >= x[k]:
            top -= 1
        out[k] = st[top - 1] if top > 0 else -1
        st[top] = k
        top += 1
    return out


@njit(cache=True)
def _cone_scan(u, v, k0, r_steps):
    pu = _prev_smaller(u)
    pv = _prev_smaller(v)
    for k in range(max(k0, 1), u.size):
        if u[k - 1] >= u[k] and v[k - 1] >= v[k]:
            last = max(pu[k], pv[k])
            vk = last + 1
            if k - vk >= r_steps:
                return k, vk, min(pu[k], pv[k]), pv[k] > pu[k], last < 0
    return -1, 0, 0, False, False


def continuous_cone_scan(u, v, t0: float, h: float, a: float, r: float, reverse: bool = False):
    """First grid time t >= a that is a weak pi/2-cone time with t - v >= r.

    ``u``, ``v`` are samples at times t0 + k h.  Comparisons are exact on
    the stored values.  v is the last entrance time and u the last time at
    which both coordinates were below their current values.  ``reverse``
    applies the scan to the time reversal, giving forward cone times
    (returned times then refer to the reversed clock).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if reverse:
        u = u[::-1].copy()
        v = v[::-1].copy()
    k0 = int(np.ceil((a - t0) / h - 1e-9))
    r_steps = r / h - 1e-9
    k, vk, uk, left, cens = _cone_scan(u, v, k0, r_steps)
    if k < 0:
        return NOT_FOUND
    return ConeHit(t0 + k * h, t0 + vk * h, t0 + uk * h if uk >= 0 else float("-inf"),
                   Direction.LEFT if left else Direction.RIGHT, int(k), bool(cens))


def brute_cone_scan(u, v, t0, h, a, r):
    """O(m^2) reference for :func:`continuous_cone_scan`."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    k0 = max(int(np.ceil((a - t0) / h - 1e-9)), 1)
    for k in range(k0, u.size):
        s = k
        while s - 1 >= 0 and u[s - 1] >= u[k] and v[s - 1] >= v[k]:
            s -= 1
        if s == k:
            continue
        if (k - s) * h >= r - 1e-9 * h:
            su = k
            while su >= 0 and not (u[su:k + 1].min() < u[k] and v[su:k + 1].min() < v[k]):
                su -= 1
            left = (s - 1 >= 0 and v[s - 1] < v[k]) and not (u[s - 1] < u[k])
            if s - 1 >= 0 and v[s - 1] < v[k] and u[s - 1] < u[k]:
                left = True
            return ConeHit(t0 + k * h, t0 + s * h, t0 + su * h if su >= 0 else float("-inf"),
                           Direction.LEFT if left else Direction.RIGHT, k, s == 0)
    return NOT_FOUND


# ---------------------------------------------------------------- conditioned walks

@njit(cache=True)
def _no_burger_batch(seed, r0, count, n, extra, c0, c1, c2, c3):
    """Rejection sampler for {X(-n,-1) has no burger}.

    Accepted replicas report (#o_h, #o_c, #o_f resolved to h, to c, unresolved)
    in X(-n,-1); unresolved o_f are looked up further left for ``extra`` symbols.
    """
    acc = np.zeros(count, dtype=np.bool_)
    res = np.zeros((count, 5), dtype=np.int64)
    m = n + extra
    hs = np.empty(m + 1, dtype=np.int64)
    cs = np.empty(m + 1, dtype=np.int64)
    fs = np.empty(m + 1, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        nh = 0
        nc = 0
        nf = 0
        ok = True
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
                    ok = False
                    break
            else:
                if nc > 0 and (nf == 0 or cs[nc - 1] > fs[nf - 1]):
                    nc -= 1
                elif nf > 0:
                    nf -= 1
                else:
                    ok = False
                    break
        if not ok:
            continue
        acc[t] = True
        res[t, 0] = nh
        res[t, 1] = nc
        # resolve the pending o_f by reading further left
        fh = 0
        fc = 0
        for j in range(n + 1, m + 1):
            if nf == 0:
                break
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
                    if fs[nf] <= n:
                        fh += 1
            else:
                if nc > 0 and (nf == 0 or cs[nc - 1] > fs[nf - 1]):
                    nc -= 1
                elif nf > 0:
                    nf -= 1
                    if fs[nf] <= n:
                        fc += 1
        pend = 0
        for q in range(nf):
            if fs[q] <= n:
                pend += 1
        res[t, 2] = fh
        res[t, 3] = fc
        res[t, 4] = pend
    return acc, res


def no_burger_endpoints(params: ModelParams, n: int, seed: int, r0: int, count: int, extra: int | None = None):
    """Z^n(-1) for replicas conditioned on X(-n,-1) containing no burger.

    X(-n,-1) then consists of orders only and Z^n(-1) = n^{-1/2}(#H-orders, #C-orders),
    flexible orders counted by the burger they eventually consume.  Flexible
    orders still pending after ``extra`` further symbols contribute 1/2 to
    each coordinate; their total is exact.
    Returns (accepted mask, array of (U, V) for accepted replicas, pending counts).
    """
    extra = 4 * n if extra is None else extra
    acc, res = _no_burger_batch(np.uint64(seed), r0, count, n, extra, *rng.thresholds(params.p))
    r = res[acc]
    uv = np.column_stack([r[:, 0] + r[:, 2] + 0.5 * r[:, 4], r[:, 1] + r[:, 3] + 0.5 * r[:, 4]]) / np.sqrt(n)
    return acc, uv, r[:, 4]


@njit(cache=True)
def _no_order_batch(seed, r0, count, n, c0, c1, c2, c3):
    acc = np.zeros(count, dtype=np.bool_)
    res = np.zeros((count, 2), dtype=np.int64)
    hs = np.empty(n + 1, dtype=np.int64)
    cs = np.empty(n + 1, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        nh = 0
        nc = 0
        ok = True
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
                else:
                    ok = False
                    break
            elif s == 3:
                if nc > 0:
                    nc -= 1
                else:
                    ok = False
                    break
            else:
                if nh > 0 and (nc == 0 or hs[nh - 1] > cs[nc - 1]):
                    nh -= 1
                elif nc > 0:
                    nc -= 1
                else:
                    ok = False
                    break
        if ok:
            acc[t] = True
            res[t, 0] = nh
            res[t, 1] = nc
    return acc, res


def no_order_endpoints(params: ModelParams, n: int, seed: int, r0: int, count: int):
    """Z^n(1) for replicas conditioned on X(1,n) containing no order (all matches resolved in-window)."""
    acc, res = _no_order_batch(np.uint64(seed), r0, count, n, *rng.thresholds(params.p))
    return acc, res[acc] / np.sqrt(n)


@njit(cache=True)
def _endpoint_batch(seed, r0, count, n, extra, c0, c1, c2, c3):
    """D(n) for the window [1, n].

    Flexible orders of X(1, n) left pending are resolved by left-appending
    X_0, X_{-1}, ... (at most ``extra`` symbols) to the pending orders.
    Stacks hold keys -i so that the leftmost order has the largest key.
    Columns: d(n), d*(n), number still unresolved (counted in neither).
    """
    out = np.zeros((count, 3), dtype=np.int64)
    size = n + extra + 1
    hs = np.empty(size, dtype=np.int64)
    cs = np.empty(size, dtype=np.int64)
    ph = np.empty(size, dtype=np.int64)
    pc = np.empty(size, dtype=np.int64)
    pf = np.empty(size, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        d = 0
        ds = 0
        nh = 0
        nc = 0
        mh = 0
        mc = 0
        mf = 0
        for i in range(1, n + 1):
            s = rng.symbol_at(key, i, c0, c1, c2, c3)
            if s == 0:
                d += 1
                hs[nh] = i
                nh += 1
            elif s == 1:
                ds += 1
                cs[nc] = i
                nc += 1
            elif s == 2:
                d -= 1
                if nh > 0:
                    nh -= 1
                else:
                    ph[mh] = -i
                    mh += 1
            elif s == 3:
                ds -= 1
                if nc > 0:
                    nc -= 1
                else:
                    pc[mc] = -i
                    mc += 1
            else:
                if nh > 0 and (nc == 0 or hs[nh - 1] > cs[nc - 1]):
                    nh -= 1
                    d -= 1
                elif nc > 0:
                    nc -= 1
                    ds -= 1
                else:
                    pf[mf] = -i
                    mf += 1
        pend = mf
        if pend > 0:
            ph[:mh] = ph[:mh][::-1].copy()
            pc[:mc] = pc[:mc][::-1].copy()
            pf[:mf] = pf[:mf][::-1].copy()
            for j in range(0, -extra, -1):
                s = rng.symbol_at(key, j, c0, c1, c2, c3)
                if s == 2:
                    ph[mh] = -j
                    mh += 1
                elif s == 3:
                    pc[mc] = -j
                    mc += 1
                elif s == 4:
                    pf[mf] = -j
                    mf += 1
                elif s == 0:
                    if mh > 0 and (mf == 0 or ph[mh - 1] > pf[mf - 1]):
                        mh -= 1
                    elif mf > 0:
                        mf -= 1
                        if pf[mf] < 0:
                            d -= 1
                            pend -= 1
                else:
                    if mc > 0 and (mf == 0 or pc[mc - 1] > pf[mf - 1]):
                        mc -= 1
                    elif mf > 0:
                        mf -= 1
                        if pf[mf] < 0:
                            ds -= 1
                            pend -= 1
                if pend == 0:
                    break
        out[t, 0] = d
        out[t, 1] = ds
        out[t, 2] = pend
    return out


def endpoint_samples(params: ModelParams, n: int, seed: int, r0: int, count: int,
                     extra: int | None = None) -> np.ndarray:
    """Rows (d(n), d*(n), unresolved) for X(1, n).

    Flexible orders still unresolved after ``extra`` symbols to the left of
    the window are left out of both coordinates; callers split them evenly.
    """
    extra = 10 * n if extra is None else extra
    return _endpoint_batch(np.uint64(seed), r0, count, n, extra, *rng.thresholds(params.p))


WALK_CSV_HEADER = ["index", "t", "d", "d_star", "unresolved"]


def walk_rows(w: Word, mt: MatchTable, origin: int | None = None) -> list:
    """Walk CSV rows for any window; flexible orders unmatched in the window
    contribute no step and are counted in the ``unresolved`` column."""
    from .matching import _prefix
    origin = w.start if origin is None else origin
    ph, pc = _prefix(mt)
    unres = np.concatenate([[0], np.cumsum((w.symbols == 4) & (mt.rel < 0))])
    base = origin - w.start
    rows = []
    for k in range(len(w) + 1):
        rows.append([w.start + k - 1, k - base, int(ph[k] - ph[base]), int(pc[k] - pc[base]),
                     int(unres[k] - unres[base])])
    return rows
