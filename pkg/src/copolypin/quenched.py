"""Finite-n quenched partition sums by renewal dynamic programming.

The constrained partition sum over paths that end at the interface at time k
obeys

    Z_k = sum_{j<k} Z_j * rho(k-j) * 1/2 (e^{c1 (S_k - S_j)} + e^{c2 (S_k - S_j)}) * e^{pin_k}

with S the prefix sum of (omega_hat + h_hat), pin_k = beta_bar*omega_bar_k - h_bar
and (c1, c2) = (0, -2 beta_hat) for the excess Hamiltonian or
(beta_hat, -beta_hat) for the full one. The two exponentials separate, so every
row is two dot products over rescaled linear weights. A row falls back to an
explicit log-sum-exp when the fast sum underflows.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.special import expit

from ._errors import InputError, NoBracket, TooLarge, UnsupportedGap
from .annealed import ModelParams, copolymer_exponent, hc_ann_combined
from .disorder import DisorderSample, fixed_sample, log_mgf, sample
from .excursion import ExcursionLaw, warn_if_sparse

MODES = ("excess", "full")
_FAST = {"reassoc", "contract", "nsz", "arcp"}
_RESCALE = 300.0
_UNDERFLOW = 1e-250


@njit(cache=True, nogil=True, fastmath=_FAST)
def _dot2(u, v, rho_rev, j0, k, off):
    a = 0.0
    b = 0.0
    for j in range(j0, k):
        r = rho_rev[off + j]
        a += u[j] * r
        b += v[j] * r
    return a, b


@njit(cache=True, nogil=True, fastmath=_FAST)
def _dot_moments(u, m1, m2, rho_rev, j0, k, off):
    a1 = 0.0
    a2 = 0.0
    for j in range(j0, k):
        w = u[j] * rho_rev[off + j]
        a1 += w * m1[j]
        a2 += w * m2[j]
    return a1, a2


@njit(cache=True, nogil=True)
def _log_side(la, m1, m2, logrho_rev, j0, k, off):
    # log sum_j exp(la_j) rho(k-j) plus the normalized first two moments
    mx = -np.inf
    for j in range(j0, k):
        t = la[j] + logrho_rev[off + j]
        if t > mx:
            mx = t
    if mx == -np.inf:
        return -np.inf, 0.0, 0.0
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for j in range(j0, k):
        t = la[j] + logrho_rev[off + j]
        if t > -np.inf:
            w = math.exp(t - mx)
            s0 += w
            s1 += w * m1[j]
            s2 += w * m2[j]
    return mx + math.log(s0), s1 / s0, s2 / s0


@njit(cache=True, nogil=True)
def _renewal_dp(rho_rev, logrho_rev, s, pin, c1, c2, kmax, moments):
    n = s.shape[0] - 1
    logz = np.full(n + 1, -np.inf)
    m1 = np.zeros(n + 1)
    m2 = np.zeros(n + 1)
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    la = np.full(n + 1, -np.inf)
    lb = np.full(n + 1, -np.inf)
    logz[0] = 0.0
    la[0] = -c1 * s[0]
    lb[0] = -c2 * s[0]
    ra = la[0]
    rb = lb[0]
    u[0] = 1.0
    v[0] = 1.0
    log2 = math.log(2.0)
    for k in range(1, n + 1):
        j0 = max(0, k - kmax)
        off = n - k
        a1 = a2 = b1 = b2 = 0.0
        a, b = _dot2(u, v, rho_rev, j0, k, off)
        if a > _UNDERFLOW:
            log_a = math.log(a) + ra
            if moments:
                a1, a2 = _dot_moments(u, m1, m2, rho_rev, j0, k, off)
                a1 /= a
                a2 /= a
        else:
            log_a, a1, a2 = _log_side(la, m1, m2, logrho_rev, j0, k, off)
        if b > _UNDERFLOW:
            log_b = math.log(b) + rb
            if moments:
                b1, b2 = _dot_moments(v, m1, m2, rho_rev, j0, k, off)
                b1 /= b
                b2 /= b
        else:
            log_b, b1, b2 = _log_side(lb, m1, m2, logrho_rev, j0, k, off)
        ta = c1 * s[k] + log_a
        tb = c2 * s[k] + log_b
        mx = max(ta, tb)
        if mx == -np.inf:
            continue
        wa = math.exp(ta - mx)
        wb = math.exp(tb - mx)
        logz[k] = pin[k] - log2 + mx + math.log(wa + wb)
        if moments:
            pa = wa / (wa + wb)
            pb = 1.0 - pa
            m1[k] = pa * (a1 + 1.0) + pb * (b1 + 1.0)
            m2[k] = pa * (a2 + 2.0 * a1 + 1.0) + pb * (b2 + 2.0 * b1 + 1.0)
        la[k] = logz[k] - c1 * s[k]
        lb[k] = logz[k] - c2 * s[k]
        if la[k] > ra + _RESCALE:
            scale = math.exp(ra - la[k])
            for j in range(k):
                u[j] *= scale
            ra = la[k]
        if lb[k] > rb + _RESCALE:
            scale = math.exp(rb - lb[k])
            for j in range(k):
                v[j] *= scale
            rb = lb[k]
        u[k] = math.exp(la[k] - ra)
        v[k] = math.exp(lb[k] - rb)
    return logz, m1, m2


@dataclass(frozen=True)
class LogPartitionTable:
    logz: np.ndarray = field(repr=False)
    mode: str
    params: ModelParams
    sample: DisorderSample = field(repr=False)
    rho: ExcursionLaw = field(repr=False)
    mean_returns: np.ndarray | None = field(default=None, repr=False)
    second_moment_returns: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.logz) - 1


class PathSample(NamedTuple):
    return_times: tuple[int, ...]
    excursion_signs: tuple[int, ...]
    m_n: int


def _couplings(params: ModelParams, mode: str) -> tuple[float, float]:
    if mode == "excess":
        return 0.0, -2.0 * params.beta_hat
    if mode == "full":
        return params.beta_hat, -params.beta_hat
    raise InputError(f"mode must be one of {MODES}")


def _rho_arrays(rho: ExcursionLaw, n: int):
    p = rho.pmf(n)
    if not np.any(p > 0):
        raise UnsupportedGap(f"no admissible excursion length <= {n}")
    rev = np.ascontiguousarray(p[::-1])
    with np.errstate(divide="ignore"):
        lrev = np.log(rev)
    kmax = n if rho.infinite_support else min(n, rho.cutoff)
    return rev, lrev, kmax


def _run(params, rho, smp, mode, moments):
    c1, c2 = _couplings(params, mode)
    n = smp.n
    rev, lrev, kmax = _rho_arrays(rho, n)
    s = np.zeros(n + 1)
    np.cumsum(smp.hat + params.h_hat, out=s[1:])
    pin = np.empty(n + 1)
    pin[0] = 0.0
    pin[1:] = params.beta_bar * smp.bar - params.h_bar
    return _renewal_dp(rev, lrev, s, pin, c1, c2, kmax, moments)


def dp_log_partition(params: ModelParams, rho: ExcursionLaw, smp: DisorderSample,
                     mode: str = "excess", moments: bool = False) -> LogPartitionTable:
    """logz[k] = log Z_k for k = 0..n in O(n^2) time and O(n) memory."""
    logz, m1, m2 = _run(params, rho, smp, mode, moments)
    if moments:
        return LogPartitionTable(logz, mode, params, smp, rho, m1, m2)
    return LogPartitionTable(logz, mode, params, smp, rho)


def excursion_log_weight(params: ModelParams, rho_val: float, hat_segment, bar_end: float,
                         mode: str = "excess") -> float:
    """log of one excursion's weight, from its own letters (no prefix sums)."""
    if rho_val <= 0:
        return -math.inf
    e = params.beta_hat * math.fsum(x + params.h_hat for x in hat_segment)
    if mode == "excess":
        cop = math.log(0.5) + np.logaddexp(0.0, -2.0 * e)
    else:
        cop = math.log(0.5) + np.logaddexp(e, -e)
    return math.log(rho_val) + float(cop) + params.beta_bar * bar_end - params.h_bar


def enumerate_oracle(params: ModelParams, rho: ExcursionLaw, smp: DisorderSample,
                     mode: str = "excess") -> float:
    """log Z_n summed over every return-time set, by brute force (n <= 22)."""
    n = smp.n
    if n > 22:
        raise TooLarge("enumeration is limited to n <= 22")
    _couplings(params, mode)
    p = rho.pmf(n)
    w = np.zeros((n + 1, n + 1))
    for j in range(n):
        for k in range(j + 1, n + 1):
            lw = excursion_log_weight(params, p[k - j - 1], smp.hat[j:k], smp.bar[k - 1], mode)
            w[j, k] = math.exp(lw) if lw > -math.inf else 0.0
    masks = np.arange(2 ** (n - 1), dtype=np.int64)
    last = np.zeros(len(masks), dtype=np.int64)
    prod = np.ones(len(masks))
    for k in range(1, n + 1):
        ret = np.ones(len(masks), dtype=bool) if k == n else ((masks >> (k - 1)) & 1).astype(bool)
        prod[ret] *= w[last[ret], k]
        last[ret] = k
    total = math.fsum(prod.tolist())
    return math.log(total) if total > 0 else -math.inf


def return_statistics(params: ModelParams, rho: ExcursionLaw, smp: DisorderSample) -> tuple[float, float]:
    """Mean and variance of the number of returns M_n under the polymer measure."""
    t = dp_log_partition(params, rho, smp, "excess", moments=True)
    m1 = float(t.mean_returns[-1])
    m2 = float(t.second_moment_returns[-1])
    return m1, max(0.0, m2 - m1 * m1)


def annealed_log_partition(params: ModelParams, rho: ExcursionLaw, laws, n: int) -> np.ndarray:
    """log E[Z_k], k = 0..n, excess mode.

    Excursions use disjoint letters, so the average factorizes into
    rho(l) * 1/2 (1 + e^{l delta}) * e^{M_bar(-beta_bar) - h_bar} per excursion;
    this is the same recursion with S_k = k, c1 = 0 and c2 = delta.
    """
    law_hat, law_bar = laws
    delta = copolymer_exponent(params.beta_hat, params.h_hat, law_hat)
    rev, lrev, kmax = _rho_arrays(rho, n)
    s = np.arange(n + 1, dtype=float)
    pin = np.full(n + 1, log_mgf(law_bar, -params.beta_bar) - params.h_bar)
    logz, _, _ = _renewal_dp(rev, lrev, s, pin, 0.0, delta, kmax, False)
    return logz


def default_threads() -> int:
    env = os.environ.get("COPOLYPIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InputError("COPOLYPIN_THREADS must be an integer") from exc
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def replica_map(fn, count: int, threads: int | None = None) -> list:
    """Ordered map over replica indices; order of the results never depends on scheduling."""
    threads = threads or default_threads()
    if threads == 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(count)))


def jackknife(values) -> tuple[float, float]:
    """Mean and jackknife standard error. Identical inputs give exactly zero error."""
    x = np.asarray(values, dtype=float)
    r = len(x)
    if r < 2:
        raise InputError("need at least two replicas")
    d = x - x[0]
    mean = x[0] + d.sum() / r
    loo = (d.sum() - d) / (r - 1)
    var = (r - 1) / r * float(np.sum((loo - loo.mean()) ** 2))
    return float(mean), math.sqrt(var)


def default_n_grid(n: int) -> list[int]:
    grid = [2**e for e in range(8, 15) if 2**e < n]
    return grid + [n]


class QuenchedEstimate(NamedTuple):
    estimate: float
    stderr: float
    n: int
    replicas: int
    seed: int
    grid: tuple[tuple[int, float, float], ...]
    extrapolated: float


def _extrapolate(grid) -> float:
    if len(grid) < 2:
        return grid[-1][1]
    x = np.array([1.0 / g[0] for g in grid])
    y = np.array([g[1] for g in grid])
    slope, icept = np.polyfit(x, y, 1)
    return float(icept)


def replica_log_partitions(params: ModelParams, rho: ExcursionLaw, laws, n: int, replicas: int,
                           seed: int, threads: int | None = None) -> np.ndarray:
    """(replicas, n+1) array of excess-mode log Z_k, replica r drawn on stream r."""
    law_hat, law_bar = laws

    def one(r):
        smp = sample(law_hat, law_bar, n, seed, r)
        return _run(params, rho, smp, "excess", False)[0]

    return np.vstack(replica_map(one, replicas, threads))


def estimate_g_que(params: ModelParams, rho: ExcursionLaw, laws, n: int, replicas: int, seed: int,
                   n_grid=None, threads: int | None = None) -> QuenchedEstimate:
    """Replica mean of (1/n) log Z_n (excess mode) with a jackknife error.

    The grid values come from the same tables, so they cost nothing extra;
    ``extrapolated`` is the intercept of a fit linear in 1/n.
    """
    if replicas < 2:
        raise InputError("replicas must be >= 2")
    grid_n = sorted(set(default_n_grid(n) if n_grid is None else [int(m) for m in n_grid if 1 <= m <= n]) | {n})
    tables = replica_log_partitions(params, rho, laws, n, replicas, seed, threads)
    grid = []
    for m in grid_n:
        mean, err = jackknife(tables[:, m] / m)
        grid.append((m, mean, err))
    est, err = grid[-1][1], grid[-1][2]
    return QuenchedEstimate(est, err, n, replicas, seed, tuple(grid), _extrapolate(grid))


class PseudoCritical(NamedTuple):
    estimate: float
    ci: float
    bracket: tuple[float, float]
    evaluations: int


def pseudo_critical_hhat(beta_hat: float, beta_bar: float, h_bar: float, rho: ExcursionLaw, laws,
                         n: int, replicas: int, seed: int, eps_abs: float = 1e-4,
                         width: float = 0.01, h_min: float = 1e-3, h_max: float = 20.0,
                         threads: int | None = None) -> PseudoCritical:
    """Bisection in h_hat on 'estimate_g_que > max(eps_abs, 3 stderr)'.

    The same replica seeds are used at every h_hat. The search never evaluates
    h_hat = 0; the lowest probe is ``h_min``. If the point is still localized
    at ``h_max`` the curve is reported as +inf with bracket (h_max, inf).
    """
    if not beta_hat > 0:
        raise InputError("beta_hat must be > 0")
    warn_if_sparse(rho, "pseudo_critical_hhat")
    count = 0

    def localized(h):
        nonlocal count
        count += 1
        p = ModelParams(beta_hat, h, beta_bar, h_bar)
        q = estimate_g_que(p, rho, laws, n, replicas, seed, n_grid=[], threads=threads)
        return q.estimate > max(eps_abs, 3 * q.stderr)

    if not localized(h_min):
        raise NoBracket(f"delocalized already at h_hat={h_min}")
    hc = hc_ann_combined(beta_hat, beta_bar, h_bar, rho, laws)
    hi = min(h_max, hc + 0.25) if math.isfinite(hc) else h_max
    lo = h_min
    while localized(hi):
        if hi >= h_max:
            return PseudoCritical(math.inf, math.inf, (h_max, math.inf), count)
        lo, hi = hi, min(h_max, 2 * hi)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if localized(mid):
            lo = mid
        else:
            hi = mid
    return PseudoCritical(0.5 * (lo + hi), 0.5 * (hi - lo), (lo, hi), count)


def sample_path(table: LogPartitionTable, seed: int, draws: int | None = None):
    """Backward sampling of return times and excursion signs.

    With ``draws`` given, returns a list of that many paths; the per-endpoint
    distributions are cached across draws.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed) & (2**64 - 1))))
    params, smp = table.params, table.sample
    n = table.n
    if not math.isfinite(table.logz[n]):
        raise UnsupportedGap("endpoint has zero weight")
    p = table.rho.pmf(n)
    with np.errstate(divide="ignore"):
        lp = np.log(p)
    s = np.zeros(n + 1)
    np.cumsum(smp.hat + params.h_hat, out=s[1:])
    c1, c2 = _couplings(params, table.mode)
    cache: dict[int, np.ndarray] = {}

    def cdf(k):
        if k not in cache:
            j = np.arange(k)
            ds = s[k] - s[j]
            lw = table.logz[j] + lp[k - j - 1] + np.logaddexp(c1 * ds, c2 * ds)
            w = np.exp(lw - np.max(lw))
            c = np.cumsum(w)
            cache[k] = c / c[-1]
        return cache[k]

    def one():
        times = [n]
        signs = []
        k = n
        while k > 0:
            j = int(np.searchsorted(cdf(k), rng.random(), side="right"))
            ds = s[k] - s[j]
            below = expit((c2 - c1) * ds)
            signs.append(-1 if rng.random() < below else 1)
            if j > 0:
                times.append(j)
            k = j
        times.reverse()
        signs.reverse()
        return PathSample(tuple(times), tuple(signs), len(times))

    if draws is None:
        return one()
    return [one() for _ in range(draws)]


__all__ = [
    "LogPartitionTable", "PathSample", "QuenchedEstimate", "PseudoCritical",
    "dp_log_partition", "enumerate_oracle", "return_statistics", "annealed_log_partition",
    "estimate_g_que", "pseudo_critical_hhat", "sample_path", "jackknife", "fixed_sample",
]
