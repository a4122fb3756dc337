"""Renewal processes, heavy-tail exponent estimation and small statistics helpers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from numba import njit
from scipy import stats

from . import rng


# ---------------------------------------------------------------- lifetimes

@dataclass(frozen=True)
class Deterministic:
    k: int

    def pmf(self) -> dict:
        return {self.k: Fraction(1)}


@dataclass(frozen=True)
class BernoulliMix:
    """Lifetime k1 with probability p1, otherwise k2."""

    p1: Fraction
    k1: int
    p2: Fraction
    k2: int

    def pmf(self) -> dict:
        out = {}
        for pr, k in ((Fraction(self.p1), self.k1), (Fraction(self.p2), self.k2)):
            out[k] = out.get(k, Fraction(0)) + pr
        return out


@dataclass(frozen=True)
class ParetoInt:
    """ceil(U^(-1/alpha)), so that P(Y > n) = n^(-alpha) for integers n >= 1."""

    alpha: float


@dataclass(frozen=True)
class Callback:
    """Lifetime drawn by ``fn(seed, replica, index)``; must return a positive int."""

    fn: Callable


def _kind(life) -> tuple:
    if isinstance(life, Deterministic):
        return 0, float(life.k), 0.0, 0.0, 0.0
    if isinstance(life, BernoulliMix):
        return 1, float(life.p1), float(life.k1), float(life.k2), 0.0
    if isinstance(life, ParetoInt):
        return 2, float(life.alpha), 0.0, 0.0, 0.0
    raise TypeError(f"no compiled sampler for {life!r}")


@njit(cache=True, inline="always")
def _draw(kind, a, b, c, key, k):
    if kind == 0:
        return np.int64(a)
    u = rng.uniform_at(key, k)
    if kind == 1:
        return np.int64(b) if u < a else np.int64(c)
    x = (1.0 - u) ** (-1.0 / a)
    if x > 9.0e18:
        return np.int64(9 * 10 ** 18)
    return np.int64(math.ceil(x))


@njit(cache=True)
def _renewal_batch(kind, a, b, c, n, seed, r0, count):
    m_n = np.zeros(count, dtype=np.int64)
    age = np.zeros(count, dtype=np.int64)
    for t in range(count):
        key = rng.key_of(seed, r0 + t)
        s = np.int64(0)
        m = 0
        k = 0
        while True:
            y = _draw(kind, a, b, c, key, k)
            k += 1
            if y > n - s:
                break
            s += y
            m += 1
        m_n[t] = m
        age[t] = n - s
    return m_n, age


@njit(cache=True)
def _lifetime_batch(kind, a, b, c, seed, r0, count):
    out = np.empty(count, dtype=np.int64)
    for t in range(count):
        out[t] = _draw(kind, a, b, c, rng.key_of(seed, r0 + t), 0)
    return out


@dataclass
class RenewalTrace:
    lifetimes: np.ndarray
    partial_sums: np.ndarray
    n: int
    M_n: int
    age: int


def simulate_renewal(lifetime, n: int, seed: int, replica: int = 0) -> RenewalTrace:
    """Lifetimes of one replica up to and including the first one that passes n."""
    ys = []
    s = 0
    if isinstance(lifetime, Callback):
        draw = lambda k: int(lifetime.fn(seed, replica, k))  # noqa: E731
    else:
        kind, a, b, c, _ = _kind(lifetime)
        key = np.uint64(rng.replica_seed(seed, replica))
        draw = lambda k: int(_draw(kind, a, b, c, key, k))  # noqa: E731
    k = 0
    while True:
        y = draw(k)
        if y < 1:
            raise ValueError("lifetimes must be positive")
        ys.append(y)
        k += 1
        if s + y > n:
            break
        s += y
    ys = np.array(ys, dtype=np.int64)
    sums = np.cumsum(ys)
    return RenewalTrace(ys, sums, n, len(ys) - 1, n - s)


def renewal_batch(lifetime, n: int, seed: int, r0: int, count: int):
    """(M_n, age) arrays for ``count`` replicas starting at ``r0``."""
    kind, a, b, c, _ = _kind(lifetime)
    return _renewal_batch(kind, a, b, c, n, np.uint64(seed), r0, count)


def lifetime_samples(lifetime, seed: int, r0: int, count: int) -> np.ndarray:
    kind, a, b, c, _ = _kind(lifetime)
    return _lifetime_batch(kind, a, b, c, np.uint64(seed), r0, count)


# ---------------------------------------------------------------- exact identities

def renewal_mass(pmf: dict, i: int) -> Fraction:
    """P(i is a renewal time) from the renewal equation."""
    u = [Fraction(1)] + [Fraction(0)] * i
    for t in range(1, i + 1):
        u[t] = sum((pr * u[t - y] for y, pr in pmf.items() if y <= t), Fraction(0))
    return u[i]


def hit_prob_product(pmf: dict, indices, max_support: int = 5, max_index: int = 12) -> dict:
    """Enumerate lifetime sequences to get P(all indices are renewal times).

    Compares with the product of single-gap renewal probabilities.
    """
    pmf = {int(k): Fraction(v) for k, v in pmf.items() if v}
    idx = sorted(int(i) for i in indices)
    if max(pmf) > max_support or (idx and idx[-1] > max_index) or min(pmf) < 1:
        raise MemoryError("support or horizon too large for enumeration")
    if any(a >= b for a, b in zip(idx, idx[1:])) or (idx and idx[0] < 1):
        raise ValueError("indices must be positive and strictly increasing")
    top = idx[-1] if idx else 0
    want = set(idx)
    total = Fraction(0)
    stack = [(0, Fraction(1), 0)]
    # depth-first over partial sums; a branch is done once it reaches the last index
    while stack:
        s, pr, hit = stack.pop()
        if s >= top:
            if hit == len(want):
                total += pr
            continue
        for y, q in pmf.items():
            t = s + y
            stack.append((t, pr * q, hit + (t in want)))
    prod = Fraction(1)
    prev = 0
    for i in idx:
        prod *= renewal_mass(pmf, i - prev)
        prev = i
    return {"enumerated": total, "product": prod, "equal": total == prod}


# ---------------------------------------------------------------- moments and age law

def moment_mn(m_n: np.ndarray, k: int, n: int, mass_exponent: float | None = None,
              slack: float = 0.1) -> dict:
    """Empirical E[M_n^k] and its log base n.

    ``mass_exponent`` is the decay exponent a of the renewal mass,
    P(i is a renewal time) = i^(-a + o(1)); the bound checked is k(1 - a) + slack.
    For lifetimes with P(Y > n) = n^(-alpha), alpha < 1, the mass exponent is 1 - alpha.
    """
    m = np.asarray(m_n, dtype=float)
    mom = float(np.mean(m ** k))
    lg = math.log(mom) / math.log(n) if mom > 0 else -math.inf
    out = {"k": k, "n": n, "moment": mom, "log_n_moment": lg}
    if mass_exponent is not None:
        bound = k * (1 - mass_exponent) + slack
        out.update(bound=bound, ok=bool(lg <= bound))
    return out


def pareto_mass_exponent(alpha: float) -> float:
    """Renewal-mass decay exponent of a lifetime with tail exponent alpha in (0, 1)."""
    return 1.0 - alpha


def ks_distance(samples, cdf: Callable) -> float:
    """Two-sided Kolmogorov-Smirnov distance between a sample and a CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 1:
        raise ValueError("need at least one sample")
    f = cdf(x)
    i = np.arange(1, x.size + 1)
    return float(max(np.max(i / x.size - f), np.max(f - (i - 1) / x.size)))


def ks_two_sample(a, b) -> float:
    return float(stats.ks_2samp(a, b).statistic)


def beta_age_cdf(alpha: float) -> Callable:
    """Reference age law Beta(1 - alpha, alpha)."""
    return stats.beta(1 - alpha, alpha).cdf


def age_fraction_ecdf(age_fraction, alpha: float) -> dict:
    """ECDF summary and KS distances of age/n against both Beta parameterizations."""
    x = np.sort(np.asarray(age_fraction, dtype=float))
    if x.size < 1000:
        raise ValueError("need at least 1000 traces")
    return {"N": int(x.size), "ks": ks_distance(x, beta_age_cdf(alpha)),
            "ks_swapped": ks_distance(x, stats.beta(alpha, 1 - alpha).cdf),
            "quantiles": np.quantile(x, [0.1, 0.25, 0.5, 0.75, 0.9]).tolist(),
            "reference": f"Beta({1 - alpha:g}, {alpha:g})"}


def empirical_cov(values) -> np.ndarray:
    """Unbiased 2x2 covariance of paired samples given as an (N, 2) array."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
        raise ValueError("need at least two (x, y) pairs")
    return np.cov(v, rowvar=False, ddof=1)


# ---------------------------------------------------------------- tail exponents

@dataclass
class TailEstimate:
    """Survival estimates at doubling thresholds and the per-step exponents."""

    thresholds: list
    survivors: list
    N: int
    p_hat: list
    stderr: list
    alpha_steps: list
    alpha_step_stderr: list
    alpha_hat: float
    alpha_stderr: float
    censored: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("thresholds", "survivors", "N", "p_hat", "stderr",
                                               "alpha_steps", "alpha_step_stderr", "alpha_hat",
                                               "alpha_stderr", "censored")} | self.extra

    def csv_rows(self) -> list:
        rows = []
        for k, t in enumerate(self.thresholds):
            a = self.alpha_steps[k - 1] if k else ""
            rows.append([t, self.survivors[k], self.N, self.p_hat[k], self.stderr[k], a])
        return rows


TAILS_CSV_HEADER = ["threshold", "survivors", "N", "p_hat", "stderr", "alpha_hat_step"]


def doubling_thresholds(lo: int, hi: int) -> list:
    out = [int(lo)]
    while out[-1] * 2 <= hi:
        out.append(out[-1] * 2)
    return out


def tail_estimate(values, thresholds, censored: int = 0) -> TailEstimate:
    """Tail-ratio exponents from samples, where censored values exceed every threshold."""
    v = np.asarray(values)
    N = int(v.size)
    th = [int(t) for t in thresholds]
    surv = [int(np.count_nonzero(v > t)) for t in th]
    p = [s / N for s in surv]
    se = [math.sqrt(x * (1 - x) / N) for x in p]
    steps, step_se = [], []
    for a, b in zip(surv, surv[1:]):
        if a == 0 or b == 0:
            steps.append(math.nan)
            step_se.append(math.inf)
            continue
        c = b / a
        steps.append(-math.log2(c))
        # nested survivor sets: the ratio is a binomial proportion out of a
        step_se.append(math.sqrt(max(1 - c, 1e-300) / (a * c)) / math.log(2))
    w = np.array([1 / s ** 2 if np.isfinite(s) and s > 0 else 0.0 for s in step_se])
    st = np.array(steps)
    if w.sum() > 0:
        ah = float(np.sum(w * np.nan_to_num(st)) / w.sum())
        ase = float(1 / math.sqrt(w.sum()))
    else:
        ah, ase = math.nan, math.inf
    return TailEstimate(th, surv, N, p, se, steps, step_se, ah, ase, censored)


def tail_ratio_exponent(sampler: Callable, n_grid, N: int, seed: int) -> TailEstimate:
    """Sample ``N`` values via ``sampler(seed, r0, count, cap)`` and estimate the tail exponent.

    The sampler is called with cap = 2 * max threshold and may return any
    value above the cap for censored draws.
    """
    th = list(n_grid)
    cap = 2 * max(th)
    v = np.asarray(sampler(seed, 0, N, cap))
    return tail_estimate(v, th, censored=int(np.count_nonzero(v > cap)))


def pareto_sampler(alpha: float) -> Callable:
    life = ParetoInt(alpha)

    def f(seed, r0, count, cap):
        return np.minimum(lifetime_samples(life, seed, r0, count), cap + 1)

    return f


def monotone_toward(steps, target: float, tol: float = 0.0) -> bool:
    """Whether |step - target| never grows by more than ``tol`` along the sequence."""
    d = [abs(s - target) for s in steps]
    return all(b <= a + tol for a, b in zip(d, d[1:]))
