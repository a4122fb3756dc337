"""Correlated planar Brownian motion, quadrant cone events and the conditioned meander.

Z = (U, V) has unit-time covariance [[(1-p)/2, p/2], [p/2, (1-p)/2]].
Paths are sampled on a grid of step ``dt`` from the counter-based normal
stream of :mod:`rng`; path r of a run with seed s uses replica key r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import special

from . import rng
from .params import DomainError, ModelParams


@dataclass(frozen=True)
class BMPath:
    dt: float
    samples: np.ndarray
    T: float

    @property
    def u(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.samples[:, 1]


@dataclass(frozen=True)
class StandardizingMap:
    A: np.ndarray
    A_inv: np.ndarray


def unit_cov(params: ModelParams) -> np.ndarray:
    p = params.p
    return np.array([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])


def cholesky_factor(params: ModelParams) -> np.ndarray:
    """Lower-triangular L with L L^T equal to the unit covariance."""
    p = params.p
    a = math.sqrt((1 - p) / 2)
    b = (p / 2) / a
    c = math.sqrt((1 - p) / 2 - b * b)
    return np.array([[a, 0.0], [b, c]])


def standardizing_map(params: ModelParams) -> StandardizingMap:
    """The upper-triangular A sending Z to a standard planar Brownian motion."""
    p = params.p
    s = math.sqrt(1 - 2 * p)
    A = math.sqrt(2 * (1 - p) / (1 - 2 * p)) * np.array([[1.0, -p / (1 - p)], [0.0, s / (1 - p)]])
    return StandardizingMap(A, np.linalg.inv(A))


def _check_dt(dt: float, T: float = 1.0) -> int:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if T < dt:
        raise DomainError("T must be at least dt")
    return int(round(T / dt))


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _path(key, nsteps, sdt, l00, l10, l11, u0, v0):
    out = np.empty((nsteps + 1, 2))
    u, v = u0, v0
    out[0, 0] = u
    out[0, 1] = v
    for k in range(nsteps):
        g1, g2 = rng.normal_pair(key, k)
        u += sdt * l00 * g1
        v += sdt * (l10 * g1 + l11 * g2)
        out[k + 1, 0] = u
        out[k + 1, 1] = v
    return out


@njit(cache=True)
def _ends_batch(seed, r0, count, nsteps, sdt, l00, l10, l11):
    out = np.empty((count, 2))
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        u = 0.0
        v = 0.0
        for k in range(nsteps):
            g1, g2 = rng.normal_pair(key, k)
            u += sdt * l00 * g1
            v += sdt * (l10 * g1 + l11 * g2)
        out[t, 0] = u
        out[t, 1] = v
    return out


@njit(cache=True)
def _cone_batch(seed, r0, count, nsteps, sdt, l00, l10, l11, levels):
    """Per path and level: E (both coordinates stay above -level) and E'."""
    m = levels.size
    e = np.ones((count, m), dtype=np.bool_)
    ep = np.ones((count, m), dtype=np.bool_)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        u = 0.0
        v = 0.0
        alive = m
        for k in range(nsteps):
            g1, g2 = rng.normal_pair(key, k)
            u += sdt * l00 * g1
            v += sdt * (l10 * g1 + l11 * g2)
            for a in range(m):
                if ep[t, a]:
                    lv = -levels[a]
                    if u < lv and v < lv:
                        ep[t, a] = False
                        alive -= 1
                    if e[t, a] and (u < lv or v < lv):
                        e[t, a] = False
            if alive == 0:
                break
    return e, ep


@njit(cache=True)
def _quadrant_batch(seed, r0, count, nsteps, sdt, l00, l10, l11, u0, v0, mark):
    """Run paths from (u0, v0) until they leave the quadrant on the grid.

    Returns (alive at the end, value at step ``mark``, value at the end).
    """
    ok = np.zeros(count, dtype=np.bool_)
    mid = np.full((count, 2), np.nan)
    end = np.full((count, 2), np.nan)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        u = u0[t]
        v = v0[t]
        good = True
        for k in range(nsteps):
            g1, g2 = rng.normal_pair(key, k)
            u += sdt * l00 * g1
            v += sdt * (l10 * g1 + l11 * g2)
            if u < 0.0 or v < 0.0:
                good = False
                break
            if k + 1 == mark:
                mid[t, 0] = u
                mid[t, 1] = v
        if good:
            ok[t] = True
            end[t, 0] = u
            end[t, 1] = v
    return ok, mid, end


def _factor(params):
    L = cholesky_factor(params)
    return L[0, 0], L[1, 0], L[1, 1]


# ---------------------------------------------------------------- sampling

def sample_bm(params: ModelParams, T: float, dt: float, seed: int, replica: int = 0) -> BMPath:
    """Grid path of Z on [0, T] started at the origin."""
    nsteps = _check_dt(dt, T)
    key = np.uint64(rng.replica_seed(seed, replica))
    return BMPath(dt, _path(key, nsteps, math.sqrt(dt), *_factor(params), 0.0, 0.0), nsteps * dt)


def bm_endpoints(params: ModelParams, T: float, dt: float, seed: int, r0: int, count: int) -> np.ndarray:
    nsteps = _check_dt(dt, T)
    return _ends_batch(np.uint64(seed), r0, count, nsteps, math.sqrt(dt), *_factor(params))


def cone_event_flags(params: ModelParams, deltas, dt: float, seed: int, r0: int, count: int):
    """Boolean arrays (count, len(deltas)) for E_delta and E'_delta on [0, 1]."""
    nsteps = _check_dt(dt)
    levels = np.sqrt(np.asarray(deltas, dtype=float))
    if (levels <= 0).any():
        raise DomainError("delta must be positive")
    return _cone_batch(np.uint64(seed), r0, count, nsteps, math.sqrt(dt), *_factor(params), levels)


def cone_event_prob(params: ModelParams, delta: float, dt: float, N: int, seed: int) -> dict:
    """Monte Carlo P(E_delta) and P(E'_delta) with binomial standard errors."""
    e, ep = cone_event_flags(params, [delta], dt, seed, 0, N)
    pe, pp = e[:, 0].mean(), ep[:, 0].mean()
    return {"p_E": float(pe), "p_Eprime": float(pp),
            "stderr": float(math.sqrt(pe * (1 - pe) / N)),
            "stderr_Eprime": float(math.sqrt(pp * (1 - pp) / N)),
            "delta": delta, "dt": dt, "N": N, "seed": seed}


def cone_slopes(params: ModelParams, deltas, dt: float, N: int, seed: int) -> dict:
    """Log-log slopes of both cone probabilities over a set of deltas.

    The same paths are scored at every delta, which keeps the slope noise
    well below the noise of the individual probabilities.
    """
    e, ep = cone_event_flags(params, deltas, dt, seed, 0, N)
    x = np.log(np.asarray(deltas, dtype=float))
    pe, pp = e.mean(axis=0), ep.mean(axis=0)
    return {"deltas": list(map(float, deltas)), "p_E": pe.tolist(), "p_Eprime": pp.tolist(),
            "slope_E": float(np.polyfit(x, np.log(pe), 1)[0]),
            "slope_Eprime": float(np.polyfit(x, np.log(pp), 1)[0]),
            "dt": dt, "N": N, "seed": seed}


class MeanderExhausted(RuntimeError):
    """No accepted path within ``max_tries``."""


def meander_batch(params: ModelParams, dt: float, seed: int, r0: int, tries: int,
                  mark: float = 0.5, start=None) -> dict:
    """Rejection run over ``tries`` paths; returns acceptance flags and values at ``mark`` and 1.

    ``start`` optionally gives per-path starting points (tries, 2) and
    ``mark`` is ignored when it falls outside (0, 1).
    """
    nsteps = _check_dt(dt)
    mk = int(round(mark / dt))
    if start is None:
        u0 = np.zeros(tries)
        v0 = np.zeros(tries)
    else:
        start = np.asarray(start, dtype=float)
        u0, v0 = start[:, 0].copy(), start[:, 1].copy()
    ok, mid, end = _quadrant_batch(np.uint64(seed), r0, tries, nsteps, math.sqrt(dt),
                                   *_factor(params), u0, v0, mk)
    return {"accepted": ok, "mid": mid, "end": end}


def meander_sample(params: ModelParams, dt: float, seed: int, max_tries: int) -> BMPath:
    """First path (in replica order) that stays in the closed quadrant at every grid point."""
    nsteps = _check_dt(dt)
    chunk = 4096
    for r0 in range(0, max_tries, chunk):
        cnt = min(chunk, max_tries - r0)
        ok = meander_batch(params, dt, seed, r0, cnt)["accepted"]
        hit = np.flatnonzero(ok)
        if hit.size:
            r = r0 + int(hit[0])
            key = np.uint64(rng.replica_seed(seed, r))
            return BMPath(dt, _path(key, nsteps, math.sqrt(dt), *_factor(params), 0.0, 0.0), 1.0)
    raise MeanderExhausted(f"no accepted path in {max_tries} tries")


def meander_endpoints(params: ModelParams, dt: float, seed: int, accepted: int,
                      mark: float = 0.5, chunk: int = 1 << 16) -> dict:
    """Collect ``accepted`` meander samples, with values at ``mark`` and at time 1."""
    mids, ends, tried = [], [], 0
    got = 0
    while got < accepted:
        b = meander_batch(params, dt, seed, tried, chunk, mark)
        ok = b["accepted"]
        mids.append(b["mid"][ok])
        ends.append(b["end"][ok])
        got += int(ok.sum())
        tried += chunk
    mid = np.concatenate(mids)[:accepted]
    end = np.concatenate(ends)[:accepted]
    return {"mid": mid, "end": end, "tries": tried, "rate": got / tried}


# ---------------------------------------------------------------- density

def _polar(params: ModelParams, z) -> tuple:
    w = standardizing_map(params).A @ np.asarray(z, dtype=float)
    return float(np.hypot(*w)), float(np.arctan2(w[1], w[0]))


def survival_series(params: ModelParams, z, s: float, terms: int = 200) -> np.ndarray | float:
    """P_z(T > s) for the quadrant exit time, from the wedge heat-kernel expansion.

    In standardized coordinates the quadrant is a wedge of angle
    alpha = pi/(2 mu).  Integrating the eigenfunction expansion over the
    angle and then the radius in closed form gives, with x = r^2/(4s),

        sum over odd n of  sqrt(2 pi) r / (alpha nu_n sqrt(s)) sin(nu_n theta)
                           (ive((nu_n - 1)/2, x) + ive((nu_n + 1)/2, x)),

    where nu_n = n pi / alpha.  ``z`` may be a single point or an (m, 2) array.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if s <= 0:
        out = np.ones(len(z))
        return float(out[0]) if single else out
    w = z @ standardizing_map(params).A.T
    r = np.hypot(w[:, 0], w[:, 1])
    th = np.arctan2(w[:, 1], w[:, 0])
    alpha = math.pi / (2 * params.mu)
    x = r * r / (4 * s)
    tot = np.zeros(len(z))
    for n in range(1, 2 * terms, 2):
        nu = n * math.pi / alpha
        term = (math.sqrt(2 * math.pi) * r / (alpha * nu * math.sqrt(s)) * np.sin(nu * th)
                * (special.ive((nu - 1) / 2, x) + special.ive((nu + 1) / 2, x)))
        tot += term
        if n > 5 and np.abs(term).max() < 1e-13:
            break
    out = np.clip(tot, 0.0, 1.0)
    return float(out[0]) if single else out


def survival_mc(params: ModelParams, z, s: float, N: int, seed: int, dt: float = 1e-3) -> float:
    """Grid Monte Carlo estimate of P_z(T > s)."""
    if s <= 0:
        return 1.0
    nsteps = max(1, int(round(s / dt)))
    start = np.tile(np.asarray(z, dtype=float), (N, 1))
    ok, _, _ = _quadrant_batch(np.uint64(seed), 0, N, nsteps, math.sqrt(s / nsteps),
                               *_factor(params), start[:, 0].copy(), start[:, 1].copy(), -1)
    return float(ok.mean())


def density_prefactor(params: ModelParams, t: float, z) -> float:
    """Closed-form part of the meander density at time t, i.e. the density at t = 1.

    The time power is t^(1 + 2 mu), the value forced by Brownian scaling
    of the wedge entrance law.
    """
    r, th = _polar(params, z)
    mu = params.mu
    if th <= 0 or th >= math.pi / (2 * mu):
        return 0.0
    detA = float(np.linalg.det(standardizing_map(params).A))
    return (detA / (2 ** mu * math.gamma(mu) * t ** (1 + 2 * mu))
            * r ** (2 * mu) * math.exp(-r * r / (2 * t)) * math.sin(2 * mu * th))


def meander_density(params: ModelParams, t: float, z, N: int = 10000, seed: int = 0,
                    method: str = "mc", dt: float = 1e-3) -> float:
    """Density of the quadrant meander at time t and point z.

    ``method`` selects how P_z(T > 1 - t) is evaluated: "mc" (grid Monte
    Carlo with N paths) or "series" (wedge eigenfunction expansion).
    """
    if not 0 < t <= 1:
        raise DomainError("t must lie in (0, 1]")
    z = np.asarray(z, dtype=float)
    if (z < 0).any():
        raise DomainError("z must lie in the closed first quadrant")
    pre = density_prefactor(params, t, z)
    if pre == 0.0 or t == 1:
        return pre
    if method == "series":
        return pre * survival_series(params, z, 1 - t)
    if method == "mc":
        return pre * survival_mc(params, z, 1 - t, N, seed, dt)
    raise ValueError(f"unknown method {method!r}")


def meander_density_grid(params: ModelParams, t: float, pts) -> np.ndarray:
    """Vectorized density at an (m, 2) array of points, survival from the series."""
    pts = np.asarray(pts, dtype=float)
    A = standardizing_map(params).A
    w = pts @ A.T
    r = np.hypot(w[:, 0], w[:, 1])
    th = np.arctan2(w[:, 1], w[:, 0])
    mu = params.mu
    inside = (th > 0) & (th < math.pi / (2 * mu))
    pre = (np.linalg.det(A) / (2 ** mu * math.gamma(mu) * t ** (1 + 2 * mu))
           * r ** (2 * mu) * np.exp(-r * r / (2 * t)) * np.sin(2 * mu * np.where(inside, th, 0.0)))
    pre = np.where(inside, pre, 0.0)
    if t == 1:
        return pre
    return pre * survival_series(params, pts, 1 - t)


def bin_probabilities(params: ModelParams, t: float, edges, h: float = 0.01, reach: float = 4.0):
    """Meander mass of each cell of a product grid, by the midpoint rule."""
    g = np.arange(h / 2, reach, h)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    dens = meander_density_grid(params, t, np.column_stack([uu.ravel(), vv.ravel()]))
    dens = dens.reshape(uu.shape) * h * h
    idx = np.searchsorted(edges, g, side="right") - 1
    k = len(edges) - 1
    out = np.zeros((k, k))
    np.add.at(out, (idx[:, None].repeat(len(g), 1), idx[None, :].repeat(len(g), 0)), dens)
    return out
