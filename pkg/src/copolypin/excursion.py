"""Excursion-length laws with polynomial tails.

A law is an explicit head table rho(1..K) plus an analytic tail
rho(n) = c * n**(-alpha) * exp(-decay * n) on the lengths n > K that are
multiples of ``period``. Untilted laws have decay 0; tilting only moves the
decay and the normalisation, so it stays exact and composes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1, gamma, gammaincc, gammaln, zeta

from ._errors import InputError, InvalidExponent, NonNormalizable, TheoryWarning

DEFAULT_TOL = 1e-12
_EM_DIRECT = 64


@dataclass(frozen=True)
class ExcursionLaw:
    head: np.ndarray = field(repr=False)
    alpha: float = math.inf
    tail_c: float = 0.0
    decay: float = 0.0
    period: int = 1
    name: str = "table"

    def __post_init__(self):
        h = np.asarray(self.head, dtype=float)
        if h.ndim != 1 or len(h) < 1:
            raise InputError("head table must be a nonempty 1-d array")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise InputError("masses must be finite and nonnegative")
        if self.tail_c < 0 or self.decay < 0:
            raise InputError("tail coefficient and decay must be nonnegative")
        if self.tail_c > 0 and self.alpha < 1:
            raise InvalidExponent("tail exponent must be >= 1")
        h.flags.writeable = False
        object.__setattr__(self, "head", h)

    @property
    def cutoff(self) -> int:
        return len(self.head)

    @property
    def tail_model(self) -> str:
        return "power" if self.tail_c > 0 else "none"

    @property
    def infinite_support(self) -> bool:
        return self.tail_c > 0

    @property
    def theoretical_validity(self) -> bool:
        # non-sparsity needs a subexponential tail
        return self.tail_c > 0 and self.decay == 0

    @property
    def min_length(self) -> int:
        nz = np.flatnonzero(self.head)
        if len(nz):
            return int(nz[0]) + 1
        return self._first_tail_index() * self.period

    def _first_tail_index(self, start: int = 1) -> int:
        first = max(start, self.cutoff + 1)
        return -(-first // self.period)

    def pmf(self, n_max: int) -> np.ndarray:
        """rho(1..n_max) as an array, tail included."""
        out = np.zeros(n_max)
        k = min(n_max, self.cutoff)
        out[:k] = self.head[:k]
        if n_max > self.cutoff and self.tail_c > 0:
            n = np.arange(self.cutoff + 1, n_max + 1)
            on = n % self.period == 0
            nn = n[on].astype(float)
            out[n[on] - 1] = self.tail_c * np.exp(-self.alpha * np.log(nn) - self.decay * nn)
        return out

    def total_mass(self) -> float:
        return series(self, 0, 1.0, 0.0)

    def check_tail_exponent(self, rel: float = 0.05) -> bool:
        """Local log-slope of the head between K/2 and K against -alpha."""
        if self.tail_c == 0:
            return True
        p = self.period
        hi = (self.cutoff // p) * p
        lo = max(p, ((self.cutoff // 2) // p) * p)
        if lo >= hi or self.head[lo - 1] <= 0 or self.head[hi - 1] <= 0:
            return False
        slope = (math.log(self.head[hi - 1]) - math.log(self.head[lo - 1])) / math.log(hi / lo)
        slope += self.decay * (hi - lo) / math.log(hi / lo)
        return abs(slope + self.alpha) <= rel * self.alpha


def _upper_gamma(a: float, x: float) -> float:
    # Gamma(a, x) for any real a and x > 0, via upward recurrence for a <= 0
    if a > 0:
        return float(gammaincc(a, x) * gamma(a))
    if a == 0:
        return float(exp1(x))
    return (_upper_gamma(a + 1.0, x) - math.exp(a * math.log(x) - x)) / a


def _tail_sum(s: float, b: float, m0: int) -> float:
    """sum_{m >= m0} m**(-s) * exp(-b*m), Euler-Maclaurin after 64 direct terms."""
    if b < 0:
        return math.inf
    if b == 0:
        return float(zeta(s, m0)) if s > 1 else math.inf
    m = np.arange(m0, m0 + _EM_DIRECT, dtype=float)
    direct = float(np.sum(np.exp(-s * np.log(m) - b * m)))
    x = float(m0 + _EM_DIRECT)
    lf = -s * math.log(x) - b * x
    if lf < -745:
        return direct
    f = math.exp(lf)
    d1 = -s / x - b
    d2 = s / x**2
    d3 = -2 * s / x**3
    f1 = f * d1
    f3 = f * (d3 + 3 * d1 * d2 + d1**3)
    integral = math.exp((s - 1) * math.log(b)) * _upper_gamma(1 - s, b * x)
    return direct + integral + 0.5 * f - f1 / 12 + f3 / 720


def series(law: ExcursionLaw, k: float, gam: float, g: float, start: int = 1) -> float:
    """sum_{n >= start} n**k * rho(n)**gam * exp(-g n), with +inf when divergent."""
    start = max(int(start), 1)
    out = 0.0
    if start <= law.cutoff:
        h = law.head[start - 1:]
        n = np.arange(start, law.cutoff + 1, dtype=float)
        pos = h > 0
        if np.any(pos):
            lt = k * np.log(n[pos]) + gam * np.log(h[pos]) - g * n[pos]
            out = float(np.sum(np.exp(lt)))
    if law.tail_c > 0:
        p = law.period
        s = law.alpha * gam - k
        b = (law.decay * gam + g) * p
        tail = _tail_sum(s, b, law._first_tail_index(start))
        if math.isinf(tail):
            return math.inf
        out += law.tail_c**gam * p ** (-s) * tail
    return out


def grand_sum(law: ExcursionLaw, g: float, tol: float = DEFAULT_TOL) -> float:
    """N(g) = sum_n exp(-g n) rho(n)."""
    if not tol > 0:
        raise InputError("tol must be positive")
    if g == 0:
        return 1.0
    val = series(law, 0.0, 1.0, g)
    # rounding can push the sum past the total mass for tiny g
    return min(val, 1.0) if g > 0 else val


def log_grand_sum(law: ExcursionLaw, g: float) -> float:
    n = grand_sum(law, g)
    return math.log(n) if n > 0 else -math.inf


def invert_grand_sum(law: ExcursionLaw, y: float, tol: float = DEFAULT_TOL):
    """Solve N(x) = y for x >= 0, given 0 < y <= 1. Returns (x, residual, bracket)."""
    if not 0 < y <= 1:
        raise InputError("target must lie in (0, 1]")
    if y == 1:
        return 0.0, 0.0, (0.0, 0.0)
    lo, hi = 0.0, 1.0
    while grand_sum(law, hi) > y:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise NonNormalizable("grand sum does not decay")
    lo, hi = bisect_decreasing(lambda x: grand_sum(law, x) - y, lo, hi, tol)
    x = 0.5 * (lo + hi)
    return x, grand_sum(law, x) - y, (lo, hi)


def bisect_decreasing(f, lo: float, hi: float, tol: float):
    """Shrink [lo, hi] around the sign change of a decreasing f.

    Runs until the width is below tol and then a few extra halvings, or until
    floating point cannot split the interval further.
    """
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 0.25 * tol:
            break
    return lo, hi


def tilt(law: ExcursionLaw, g: float) -> ExcursionLaw:
    """rho_g(n) = exp(-g n) rho(n) / N(g)."""
    if g == 0:
        return law
    big_n = grand_sum(law, g)
    if not math.isfinite(big_n):
        raise NonNormalizable(f"N({g}) is infinite")
    if law.decay + g < 0 and law.tail_c > 0:
        raise NonNormalizable(f"N({g}) is infinite")
    n = np.arange(1, law.cutoff + 1, dtype=float)
    head = law.head * np.exp(-g * n) / big_n
    return ExcursionLaw(head, law.alpha, law.tail_c / big_n, law.decay + g, law.period, law.name)


def warn_if_sparse(law: ExcursionLaw, what: str):
    """Theory-backed outputs assume a subexponential tail; say so when it is missing."""
    if not law.theoretical_validity:
        warnings.warn(f"{what}: excursion law {law.name!r} has no subexponential tail, "
                      "so the result is not backed by the theory", TheoryWarning, stacklevel=3)


def mean_length(law: ExcursionLaw) -> float:
    if law.tail_c > 0 and law.decay == 0 and law.alpha <= 2:
        return math.inf
    return series(law, 1.0, 1.0, 0.0)


def srw_return_law(cutoff: int) -> ExcursionLaw:
    """First-return times of simple random walk, alpha = 3/2.

    rho(2m) = C_{m-1} / 2**(2m-1); the tail coefficient is fitted so that the
    tail carries exactly the missing mass P(tau > cutoff) = binom(K, K/2) / 2**K.
    """
    if cutoff < 2 or cutoff % 2:
        raise InputError("cutoff must be even and >= 2")
    head = np.zeros(cutoff)
    m = np.arange(1, cutoff // 2 + 1, dtype=float)
    # C_{m-1} = (2m-2)! / ((m-1)! m!)
    log_cat = gammaln(2 * m - 1) - gammaln(m) - gammaln(m + 1)
    head[1::2] = np.exp(log_cat - (2 * m - 1) * math.log(2))
    big_m = cutoff // 2
    missing = math.exp(gammaln(cutoff + 1) - 2 * gammaln(big_m + 1) - cutoff * math.log(2))
    c = missing / (2**-1.5 * float(zeta(1.5, big_m + 1)))
    return ExcursionLaw(head, 1.5, c, 0.0, 2, "srw")


def power_law(alpha: float, cutoff: int) -> ExcursionLaw:
    """rho(n) = n**(-alpha) / zeta(alpha) for all n >= 1."""
    if not alpha > 1:
        raise InvalidExponent("power law needs alpha > 1")
    if cutoff < 1:
        raise InputError("cutoff must be >= 1")
    z = float(zeta(alpha, 1))
    n = np.arange(1, cutoff + 1, dtype=float)
    return ExcursionLaw(n**-alpha / z, float(alpha), 1.0 / z, 0.0, 1, "power")


def table_law(probs) -> ExcursionLaw:
    """Finite-support law from explicit masses rho(1), rho(2), ..."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or not p.sum() > 0:
        raise InputError("table masses must be nonnegative with positive sum")
    if abs(p.sum() - 1) > 1e-9:
        raise InputError("table masses must sum to 1")
    return ExcursionLaw(p / p.sum(), math.inf, 0.0, 0.0, 1, "table")


def truncate(law: ExcursionLaw, length: int) -> ExcursionLaw:
    """Restrict to lengths <= length and renormalize (finite support)."""
    p = law.pmf(length)
    return ExcursionLaw(p / p.sum(), math.inf, 0.0, 0.0, 1, law.name + "-trunc")


def from_config(cfg) -> ExcursionLaw:
    """Accepts a JSON dict or the compact CLI forms 'srw', 'srw:K', 'power:ALPHA[:K]'."""
    if isinstance(cfg, str):
        parts = cfg.split(":")
        try:
            if parts[0] == "srw":
                cfg = {"kind": "srw"}
                if len(parts) > 1:
                    cfg["cutoff"] = int(parts[1])
            elif parts[0] == "power":
                cfg = {"kind": "power", "alpha": float(parts[1])}
                if len(parts) > 2:
                    cfg["cutoff"] = int(parts[2])
            else:
                raise InputError(f"unknown rho spec {cfg!r}")
        except (IndexError, ValueError) as exc:
            raise InputError(f"bad rho spec {cfg!r}") from exc
    kind = cfg.get("kind")
    if kind == "srw":
        return srw_return_law(int(cfg.get("cutoff", 100000)))
    if kind == "power":
        return power_law(float(cfg["alpha"]), int(cfg.get("cutoff", 100000)))
    if kind == "table":
        return table_law(cfg["probs"])
    raise InputError(f"unknown rho kind {kind!r}")
