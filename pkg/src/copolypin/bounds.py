"""Computable bounds on the quenched critical curve and the quenched
variational value: Monthus line, fractional-moment bounds, wetting
thresholds and the large-h_hat bound on S^que.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import DomainError, InputError, InvalidGrid, NoBracket
from .annealed import LOG2, ModelParams, hc_ann_copolymer, hc_ann_pinning
from .disorder import DisorderLaw, log_mgf
from .excursion import ExcursionLaw, bisect_decreasing, series, warn_if_sparse
from .quenched import estimate_g_que


@dataclass(frozen=True)
class BoundReport:
    lower: float
    upper: float
    method: str
    witness: float | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isfinite(self.lower) and math.isfinite(self.upper) and self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")


def monthus_line(beta_hat: float, alpha: float, law_hat: DisorderLaw) -> float:
    """Annealed copolymer critical point at the reduced coupling beta_hat / alpha."""
    if not beta_hat > 0:
        raise InputError("beta_hat must be > 0")
    if not alpha >= 1:
        raise InputError("alpha must be >= 1")
    return hc_ann_copolymer(beta_hat / alpha, law_hat)


def default_grid(alpha: float, points: int = 64) -> np.ndarray:
    """Log-spaced offsets above 1/alpha, ending exactly at 1."""
    lo = 1.0 / alpha
    grid = lo + np.geomspace(1e-6, 1.0 - lo, points)
    grid[-1] = 1.0
    return grid


def sum_rho_power(rho: ExcursionLaw, gam: float) -> float:
    """sum_n rho(n)**gam (infinite when gam*alpha <= 1 and the tail is polynomial)."""
    return series(rho, 0.0, gam, 0.0)


def fractional_moment_hc_upper(beta_hat: float, h_bar: float, rho: ExcursionLaw, law_hat: DisorderLaw,
                               gamma_grid=None) -> BoundReport:
    """Upper bound on the quenched critical h_hat at beta_bar = 0.

    gamma qualifies when sum rho(n)^gamma e^{-h_bar gamma} 2^{1-gamma} <= 1; the
    bound is hc_ann_copolymer(gamma * beta_hat), minimized over qualifying grid
    points. Since that map is increasing in gamma, the witness is the smallest
    qualifying gamma.
    """
    warn_if_sparse(rho, "fractional_moment_hc_upper")
    lo = 1.0 / rho.alpha
    grid = default_grid(rho.alpha) if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= lo) or np.any(grid > 1):
        raise InvalidGrid(f"gamma grid must lie in ({lo}, 1]")
    best, witness = math.inf, None
    for gam in np.sort(grid):
        # at gamma = 1 the series is the total mass, exactly 1
        mass = 1.0 if gam == 1 else sum_rho_power(rho, gam)
        lhs = math.log(mass) - h_bar * gam + (1 - gam) * LOG2
        if lhs <= 0:
            best, witness = hc_ann_copolymer(gam * beta_hat, law_hat), float(gam)
            break
    lower = monthus_line(beta_hat, rho.alpha, law_hat) if math.isfinite(rho.alpha) else -math.inf
    necessary = math.isfinite(sum_rho_power(rho, lo)) if lo > 0 else True
    return BoundReport(lower, best, "fractional_moment", witness, {"sum_rho_pow_inv_alpha_finite": necessary})


def admissible_t_max(beta_hat: float, h_hat: float, law_hat: DisorderLaw) -> float:
    """Largest t in [0, 1] with M_hat(2 beta_hat t) - 2 beta_hat h_hat t <= 0."""
    phi = lambda t: log_mgf(law_hat, 2 * beta_hat * t) - 2 * beta_hat * h_hat * t
    if beta_hat == 0 or phi(1.0) <= 0:
        return 1.0
    if h_hat == 0:
        return 0.0
    # phi is convex with phi(0) = 0 and phi'(0) < 0: bisect its positive root
    lo, hi = bisect_decreasing(lambda t: -phi(t), 1e-300, 1.0, 1e-15)
    # step back if the top of the bracket is not admissible
    return lo if phi(hi) > 0 else hi


def s_que_upper(beta_hat: float, h_hat: float, beta_bar: float, g: float, rho: ExcursionLaw, laws,
                t_grid=None) -> BoundReport:
    """Fractional-moment upper bound on S^que(beta_hat, h_hat, beta_bar; g).

    Minimizes (1-t)/t log 2 + (1/t) log sum rho_g(n)^t + (1/t) M_bar(-beta_bar t) + log N(g)
    over admissible t. The largest admissible t is added to the grid, so at
    g = 0 the bound is finite exactly when h_hat exceeds the Monthus line.
    """
    if g < 0:
        raise InputError("g must be >= 0")
    warn_if_sparse(rho, "s_que_upper")
    law_hat, law_bar = laws
    if t_grid is None:
        grid = default_grid(rho.alpha) if g == 0 else np.geomspace(1e-3, 1.0, 64)
    else:
        grid = np.asarray(t_grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 1):
        raise InvalidGrid("t grid must lie in (0, 1]")
    t_max = admissible_t_max(beta_hat, h_hat, law_hat)
    cands = [t for t in grid if t <= t_max]
    if t_max > 0:
        cands.append(t_max)
    best, witness = math.inf, None
    for t in sorted(set(cands)):
        if g == 0 and t * rho.alpha <= 1:
            continue
        # (1/t) log sum rho_g^t + log N(g) = (1/t) log sum rho^t e^{-g t n}
        sm = series(rho, 0.0, t, g * t)
        if not math.isfinite(sm) or sm <= 0:
            continue
        val = (1 - t) / t * LOG2 + math.log(sm) / t + log_mgf(law_bar, -beta_bar * t) / t
        if val < best:
            best, witness = val, float(t)
    return BoundReport(-math.inf, best, "s_que_upper", witness, {"t_max": t_max})


def xi_upper(beta_hat: float, h_hat: float, beta_bar: float, rho: ExcursionLaw, laws,
             hc_que_pinning: float) -> float:
    """Bound on S^que(beta_hat, h_hat, beta_bar; 0) above the annealed copolymer curve.

    log(1/2 (1 + e^{M_hat(2 beta_hat) - 2 beta_hat h_hat})) plus the caller's value of the
    quenched pinning critical point.
    """
    law_hat, _ = laws
    if beta_hat > 0 and h_hat < hc_ann_copolymer(beta_hat, law_hat):
        raise DomainError("h_hat is below the annealed copolymer critical point")
    delta = log_mgf(law_hat, 2 * beta_hat) - 2 * beta_hat * h_hat
    return math.log1p(math.exp(delta)) - LOG2 + hc_que_pinning


@dataclass(frozen=True)
class WettingReport:
    annealed: float
    quenched_estimate: float
    ci: float
    bracket: tuple[float, float]


def pinning_pseudo_critical(beta_bar: float, rho: ExcursionLaw, law_bar: DisorderLaw, law_hat: DisorderLaw,
                            n: int, replicas: int, seed: int, eps_abs: float = 1e-4, width: float = 0.01,
                            threads: int | None = None) -> tuple[float, float, tuple[float, float]]:
    """Bisection in h_bar for the pure pinning model (beta_hat = h_hat = 0)."""
    laws = (law_hat, law_bar)

    def localized(hb):
        q = estimate_g_que(ModelParams(0.0, 0.0, beta_bar, hb), rho, laws, n, replicas, seed,
                           n_grid=[], threads=threads)
        return q.estimate > max(eps_abs, 3 * q.stderr)

    top = hc_ann_pinning(beta_bar, law_bar)
    lo, hi = top - 1.0, top + 0.01
    steps = 0
    while not localized(lo):
        lo -= 1.0
        steps += 1
        if steps > 20:
            raise NoBracket("pinning model never localizes")
    if localized(hi):
        raise NoBracket("pinning model localized above the annealed critical point")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if localized(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), 0.5 * (hi - lo), (lo, hi)


def wetting_thresholds(beta_bar: float, rho: ExcursionLaw, law_bar: DisorderLaw, n: int, replicas: int,
                       seed: int = 0, law_hat: DisorderLaw | None = None, **kw) -> WettingReport:
    """Annealed wetting threshold M_bar(-beta_bar) - log 2 and a quenched estimate."""
    from .disorder import PM1

    est, ci, br = pinning_pseudo_critical(beta_bar, rho, law_bar, law_hat or PM1, n, replicas, seed, **kw)
    return WettingReport(hc_ann_pinning(beta_bar, law_bar) - LOG2, est - LOG2, ci, (br[0] - LOG2, br[1] - LOG2))
