"""Closed-form annealed free energies, critical curves and phase labels.

Every formula goes through the grand sum N(g) of the excursion law, so the
results are exact up to the series error of ``excursion.series``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from ._errors import InputError, ZeroCoupling
from .disorder import DisorderLaw, log_mgf
from .excursion import (
    DEFAULT_TOL,
    ExcursionLaw,
    bisect_decreasing,
    grand_sum,
    invert_grand_sum,
)

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class ModelParams:
    beta_hat: float
    h_hat: float
    beta_bar: float
    h_bar: float

    def __post_init__(self):
        for name in ("beta_hat", "h_hat", "beta_bar"):
            v = getattr(self, name)
            if not v >= 0 or math.isinf(v):
                raise InputError(f"{name} must be finite and >= 0, got {v}")
        if math.isnan(self.h_bar) or math.isinf(self.h_bar):
            raise InputError("h_bar must be finite")

    def replace(self, **kw) -> "ModelParams":
        d = dict(self.__dict__)
        d.update(kw)
        return ModelParams(**d)


class RootResult(NamedTuple):
    root: float
    residual: float
    bracket: tuple[float, float]


@dataclass(frozen=True)
class PhaseReport:
    g_ann: float
    g_hat_ann: float
    h_bar_star: float
    label: str


def _laws(laws) -> tuple[DisorderLaw, DisorderLaw]:
    law_hat, law_bar = laws
    return law_hat, law_bar


def copolymer_exponent(beta_hat: float, h_hat: float, law_hat: DisorderLaw) -> float:
    """M_hat(2 beta_hat) - 2 beta_hat h_hat, the growth rate of the averaged
    copolymer factor along one excursion."""
    return log_mgf(law_hat, 2 * beta_hat) - 2 * beta_hat * h_hat


def g_hat_ann(beta_hat: float, h_hat: float, law_hat: DisorderLaw) -> float:
    return max(0.0, copolymer_exponent(beta_hat, h_hat, law_hat))


def s_ann(params: ModelParams, rho: ExcursionLaw, laws, g: float) -> float:
    """M_bar(-beta_bar) + log(1/2 [N(g) + N(g - delta)])."""
    law_hat, law_bar = _laws(laws)
    delta = copolymer_exponent(params.beta_hat, params.h_hat, law_hat)
    a = grand_sum(rho, g)
    b = grand_sum(rho, g - delta)
    tot = a + b
    if math.isinf(tot):
        return math.inf
    if tot <= 0:
        return -math.inf
    return log_mgf(law_bar, -params.beta_bar) + math.log(0.5 * tot)


def h_bar_star(beta_hat: float, h_hat: float, beta_bar: float, rho: ExcursionLaw, laws) -> float:
    law_hat, law_bar = _laws(laws)
    delta = copolymer_exponent(beta_hat, h_hat, law_hat)
    return log_mgf(law_bar, -beta_bar) + math.log(0.5 * (1.0 + grand_sum(rho, abs(delta))))


def solve_g_ann(params: ModelParams, rho: ExcursionLaw, laws, tol: float = DEFAULT_TOL) -> RootResult:
    law_hat, _ = _laws(laws)
    g0 = g_hat_ann(params.beta_hat, params.h_hat, law_hat)
    hs = h_bar_star(params.beta_hat, params.h_hat, params.beta_bar, rho, laws)
    if params.h_bar >= hs:
        return RootResult(g0, hs - params.h_bar, (g0, g0))

    def f(g):
        return s_ann(params, rho, laws, g) - params.h_bar

    width = 1.0
    while f(g0 + width) > 0:
        width *= 2
        if width > 1e8:
            raise InputError("no finite annealed free energy")
    lo, hi = bisect_decreasing(f, g0, g0 + width, tol)
    g = 0.5 * (lo + hi)
    return RootResult(g, f(g), (lo, hi))


def g_ann(params: ModelParams, rho: ExcursionLaw, laws, tol: float = DEFAULT_TOL) -> float:
    return solve_g_ann(params, rho, laws, tol).root


def hc_ann_copolymer(beta_hat: float, law_hat: DisorderLaw) -> float:
    if beta_hat == 0:
        raise ZeroCoupling("annealed copolymer curve needs beta_hat > 0")
    if beta_hat < 0:
        raise InputError("beta_hat must be >= 0")
    return log_mgf(law_hat, 2 * beta_hat) / (2 * beta_hat)


def hc_ann_pinning(beta_bar: float, law_bar: DisorderLaw) -> float:
    return log_mgf(law_bar, -beta_bar)


def solve_g_ann_pinning(beta_bar: float, h_bar: float, rho: ExcursionLaw, law_bar: DisorderLaw,
                        tol: float = DEFAULT_TOL) -> RootResult:
    excess = hc_ann_pinning(beta_bar, law_bar) - h_bar
    if excess <= 0:
        return RootResult(0.0, 0.0, (0.0, 0.0))
    x, res, br = invert_grand_sum(rho, math.exp(-excess), tol)
    return RootResult(x, res, br)


def g_ann_pinning(beta_bar: float, h_bar: float, rho: ExcursionLaw, law_bar: DisorderLaw,
                  tol: float = DEFAULT_TOL) -> float:
    return solve_g_ann_pinning(beta_bar, h_bar, rho, law_bar, tol).root


def solve_hc_ann_combined(beta_hat: float, beta_bar: float, h_bar: float, rho: ExcursionLaw, laws,
                          tol: float = DEFAULT_TOL) -> RootResult:
    """Annealed critical h_hat of the combined model.

    On the middle branch s_ann(h_hat; g=0) = h_bar reads
    N(2 beta_hat h_hat - M_hat(2 beta_hat)) = 2 exp(h_bar - M_bar(-beta_bar)) - 1,
    so the root is found by inverting N and mapping back to h_hat.
    """
    law_hat, law_bar = _laws(laws)
    hc_cop = hc_ann_copolymer(beta_hat, law_hat)
    mbar = log_mgf(law_bar, -beta_bar)
    if h_bar <= mbar - LOG2:
        return RootResult(math.inf, 0.0, (math.inf, math.inf))
    if h_bar > mbar:
        return RootResult(hc_cop, 0.0, (hc_cop, hc_cop))
    y = 2.0 * math.exp(h_bar - mbar) - 1.0
    x, _, (xl, xh) = invert_grand_sum(rho, y, tol / 10 * 2 * beta_hat)
    m2 = log_mgf(law_hat, 2 * beta_hat)
    to_h = lambda v: (v + m2) / (2 * beta_hat)
    root = to_h(x)
    p = ModelParams(beta_hat, root, beta_bar, h_bar)
    return RootResult(root, s_ann(p, rho, laws, 0.0) - h_bar, (to_h(xl), to_h(xh)))


def hc_ann_combined(beta_hat: float, beta_bar: float, h_bar: float, rho: ExcursionLaw, laws,
                    tol: float = DEFAULT_TOL) -> float:
    return solve_hc_ann_combined(beta_hat, beta_bar, h_bar, rho, laws, tol).root


def classify_ann(params: ModelParams, rho: ExcursionLaw, laws, tol: float = DEFAULT_TOL) -> PhaseReport:
    law_hat, _ = _laws(laws)
    ghat = g_hat_ann(params.beta_hat, params.h_hat, law_hat)
    hs = h_bar_star(params.beta_hat, params.h_hat, params.beta_bar, rho, laws)
    g = g_ann(params, rho, laws, tol)
    # h_hat < hc_ann_copolymer(beta_hat) is the same as a positive exponent
    if params.beta_hat > 0 and copolymer_exponent(params.beta_hat, params.h_hat, law_hat) > 0:
        label = "L1_ann"
    elif params.h_bar < hs:
        label = "L2_ann"
    else:
        label = "D_ann"
    return PhaseReport(g, ghat, hs, label)
