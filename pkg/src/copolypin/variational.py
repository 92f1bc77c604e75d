"""Finite-alphabet word measures and the variational functionals built on them.

A word measure q is a length law r on {1..L} together with, for each length
m, a joint table for the monomer letters (omega_hat_1..omega_hat_m) and
independent per-position laws for the charges omega_bar. Letters are indexed
by the atoms of the reference disorder laws, so every table is absolutely
continuous with respect to the reference letters by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.special import logsumexp, xlogy

from ._errors import ComplexityCap, DegenerateCertificate, DomainError, InputError
from .annealed import LOG2, ModelParams, copolymer_exponent, hc_ann_combined, s_ann
from .disorder import DisorderLaw, log_mgf
from .excursion import ExcursionLaw, grand_sum, series, warn_if_sparse

COMPLEXITY_CAP = 10**7
DEFAULT_TR = 8


def _require_finite(law: DisorderLaw):
    if not law.is_finite:
        raise InputError("word measures need finite disorder alphabets")


def _letter_sums(atoms: np.ndarray, m: int) -> np.ndarray:
    """Array of shape (A,)*m holding the sum of the letters of each word."""
    grids = np.meshgrid(*([atoms] * m), indexing="ij", sparse=True)
    return reduce(np.add, grids, np.zeros([len(atoms)] * m))


def _log_product(logp: np.ndarray, m: int) -> np.ndarray:
    return _letter_sums(logp, m)


def _check_cap(a: int, length: int, cap: int = COMPLEXITY_CAP):
    if sum(a**m for m in range(1, length + 1)) > cap:
        raise ComplexityCap(f"{a}^{length} letter tuples exceed the cap {cap}")


@dataclass(frozen=True)
class WordMeasure:
    law_hat: DisorderLaw
    law_bar: DisorderLaw
    r: np.ndarray = field(repr=False)
    hat: tuple = field(repr=False)
    bar: tuple = field(repr=False)
    truncated_mass: float = 0.0

    def __post_init__(self):
        _require_finite(self.law_hat)
        _require_finite(self.law_bar)
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or len(r) != len(self.hat) or len(r) != len(self.bar):
            raise InputError("length law and tables disagree on the maximal length")
        if np.any(r < 0) or abs(r.sum() - 1) > 1e-9:
            raise InputError("length law must be a probability vector")
        a, b = len(self.law_hat.support), len(self.law_bar.support)
        for m, (t, s) in enumerate(zip(self.hat, self.bar), start=1):
            if t.shape != (a,) * m or s.shape != (m, b):
                raise InputError(f"tables for length {m} have the wrong shape")
            if r[m - 1] > 0 and (abs(t.sum() - 1) > 1e-9 or np.any(np.abs(s.sum(axis=1) - 1) > 1e-9)):
                raise InputError(f"letter laws for length {m} are not normalized")
        object.__setattr__(self, "r", r)

    @property
    def max_len(self) -> int:
        return len(self.r)

    @property
    def mean_length(self) -> float:
        return float(np.arange(1, self.max_len + 1) @ self.r)

    def hat_position_marginal(self, m: int, k: int) -> np.ndarray:
        t = self.hat[m - 1]
        axes = tuple(i for i in range(m) if i != k - 1)
        return t.sum(axis=axes) if axes else t

    @classmethod
    def from_product(cls, law_hat, law_bar, r, hat_pos, bar_pos, cap: int = COMPLEXITY_CAP):
        """Build from per-position letter laws: hat_pos[m-1] has shape (m, A)."""
        r = np.asarray(r, dtype=float)
        _check_cap(len(law_hat.support), len(r), cap)
        hat = []
        for m in range(1, len(r) + 1):
            rows = np.asarray(hat_pos[m - 1], dtype=float)
            hat.append(reduce(np.multiply.outer, rows) if m > 1 else rows[0].copy())
        return cls(law_hat, law_bar, r, tuple(hat), tuple(np.asarray(b, dtype=float) for b in bar_pos))


def reference_measure(rho: ExcursionLaw, laws, max_len: int) -> WordMeasure:
    """The reference word law restricted to lengths <= max_len and renormalized."""
    law_hat, law_bar = laws
    p = rho.pmf(max_len)
    mass = p.sum()
    if mass <= 0:
        raise InputError("no excursion mass below max_len")
    hp = [np.tile(law_hat.weights, (m, 1)) for m in range(1, max_len + 1)]
    bp = [np.tile(law_bar.weights, (m, 1)) for m in range(1, max_len + 1)]
    q = WordMeasure.from_product(law_hat, law_bar, p / mass, hp, bp)
    return WordMeasure(law_hat, law_bar, q.r, q.hat, q.bar, 1.0 - mass)


def phi_pin(q: WordMeasure) -> float:
    """Mean charge of the first letter of a word."""
    atoms = q.law_bar.atoms
    return float(sum(q.r[m - 1] * (q.bar[m - 1][0] @ atoms) for m in range(1, q.max_len + 1)))


def log_phi(beta_hat: float, h_hat: float, m: int, letter_sum):
    """log 1/2 (1 + exp(-2 beta_hat (m h_hat + sum of letters)))."""
    return np.logaddexp(0.0, -2.0 * beta_hat * (m * h_hat + letter_sum)) - LOG2


def phi_cop(q: WordMeasure, beta_hat: float, h_hat: float, cap: int = COMPLEXITY_CAP) -> float:
    """E_q of log phi over the monomer letters of one word, summed exactly."""
    _check_cap(len(q.law_hat.support), q.max_len, cap)
    atoms = q.law_hat.atoms
    tot = 0.0
    for m in range(1, q.max_len + 1):
        if q.r[m - 1] == 0:
            continue
        lp = log_phi(beta_hat, h_hat, m, _letter_sums(atoms, m))
        tot += q.r[m - 1] * float(np.sum(q.hat[m - 1] * lp))
    return tot


def _kl(p: np.ndarray, logref: np.ndarray) -> float:
    return float(np.sum(xlogy(p, p)) - np.sum(p * np.where(p > 0, logref, 0.0)))


def relative_entropy_word(q: WordMeasure, rho: ExcursionLaw, laws=None) -> float:
    """h(q | reference word law), +inf when q puts mass where rho vanishes."""
    law_hat, law_bar = laws if laws is not None else (q.law_hat, q.law_bar)
    if law_hat != q.law_hat or law_bar != q.law_bar:
        raise InputError("word measure is indexed by a different alphabet")
    p = rho.pmf(q.max_len)
    lh = np.log(law_hat.weights)
    lb = np.log(law_bar.weights)
    tot = 0.0
    for m in range(1, q.max_len + 1):
        rm = q.r[m - 1]
        if rm == 0:
            continue
        if p[m - 1] == 0:
            return math.inf
        inner = _kl(q.hat[m - 1], _log_product(lh, m))
        inner += sum(_kl(q.bar[m - 1][j], lb) for j in range(m))
        tot += rm * (math.log(rm / p[m - 1]) + inner)
    return tot


def annealed_functional(q: WordMeasure, params: ModelParams, g: float, rho: ExcursionLaw, laws=None) -> float:
    """beta_bar Phi(q) + Phi_cop(q) - g m_q - h(q | reference)."""
    h = relative_entropy_word(q, rho, laws)
    if math.isinf(h):
        return -math.inf
    return (params.beta_bar * phi_pin(q) + phi_cop(q, params.beta_hat, params.h_hat)
            - g * q.mean_length - h)


# -- the annealed maximizer -------------------------------------------------


def _effective_delta(params: ModelParams, g: float, law_hat: DisorderLaw) -> float:
    delta = copolymer_exponent(params.beta_hat, params.h_hat, law_hat)
    if g < delta:
        # rounding at the critical point (h_hat = M_hat(2 beta_hat) / (2 beta_hat))
        if delta - g <= 1e-12 * max(1.0, abs(delta)):
            return g
        raise DomainError(f"g={g} is below the copolymer excess free energy {delta}")
    return delta


def _bar_tilt(law_bar: DisorderLaw, beta_bar: float) -> np.ndarray:
    lw = beta_bar * law_bar.atoms + np.log(law_bar.weights)
    return np.exp(lw - logsumexp(lw))


def _maximizer_length_logweights(params, g, rho, delta, max_len):
    p = rho.pmf(max_len)
    m = np.arange(1, max_len + 1, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(p) - g * m + np.logaddexp(0.0, m * delta) - LOG2


def _maximizer_hat_table(params: ModelParams, law_hat: DisorderLaw, m: int, delta: float) -> np.ndarray:
    lt = _log_product(np.log(law_hat.weights), m)
    lt = lt + np.logaddexp(0.0, -2 * params.beta_hat * (m * params.h_hat + _letter_sums(law_hat.atoms, m)))
    t = np.exp(lt - np.logaddexp(0.0, m * delta))
    return t / t.sum()


def maximizer_normalizer(params: ModelParams, g: float, rho: ExcursionLaw, laws) -> float:
    """N(beta_hat, h_hat, beta_bar; g) without the charge factor: 1/2 [N(g) + N(g - delta)]."""
    delta = _effective_delta(params, g, laws[0])
    return 0.5 * (grand_sum(rho, g) + grand_sum(rho, g - delta))


def maximizer_q(params: ModelParams, g: float, rho: ExcursionLaw, laws, max_len: int,
                cap: int = COMPLEXITY_CAP) -> WordMeasure:
    """The unique maximizer of the annealed functional, cut at max_len and renormalized.

    ``truncated_mass`` is the probability of lengths above max_len under the
    untruncated maximizer.
    """
    law_hat, law_bar = laws
    _require_finite(law_hat)
    _require_finite(law_bar)
    _check_cap(len(law_hat.support), max_len, cap)
    delta = _effective_delta(params, g, law_hat)
    lw = _maximizer_length_logweights(params, g, rho, delta, max_len)
    head = float(np.exp(logsumexp(lw)))
    tail = 0.5 * (series(rho, 0, 1, g, max_len + 1) + series(rho, 0, 1, g - delta, max_len + 1))
    r = np.exp(lw - logsumexp(lw))
    hat = tuple(_maximizer_hat_table(params, law_hat, m, delta) for m in range(1, max_len + 1))
    tilted = _bar_tilt(law_bar, params.beta_bar)
    bar = []
    for m in range(1, max_len + 1):
        b = np.tile(law_bar.weights, (m, 1))
        b[0] = tilted
        bar.append(b)
    return WordMeasure(law_hat, law_bar, r, hat, tuple(bar), tail / (head + tail))


def perturb(q: WordMeasure, rng: np.random.Generator, concentration: float = 200.0) -> WordMeasure:
    """Dirichlet noise around every component of q (mean q, renormalized)."""

    def noisy(p):
        flat = np.asarray(p, dtype=float).ravel()
        out = rng.dirichlet(concentration * flat + 1e-3)
        return out.reshape(np.shape(p))

    r = noisy(q.r)
    hat = tuple(noisy(t) for t in q.hat)
    bar = tuple(np.vstack([noisy(row) for row in b]) for b in q.bar)
    return WordMeasure(q.law_hat, q.law_bar, r, hat, bar)


def letter_sum_law(law_hat: DisorderLaw, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of the sum of m letters, by repeated convolution on a rounded grid."""
    vals = {0.0: 1.0}
    for _ in range(m):
        nxt: dict[float, float] = {}
        for v, pv in vals.items():
            for a, pa in zip(law_hat.support, law_hat.probs):
                key = round(v + a, 12)
                nxt[key] = nxt.get(key, 0.0) + pv * pa
        vals = nxt
    keys = np.array(sorted(vals))
    return keys, np.array([vals[k] for k in keys])


def maximizer_entropy_terms(params: ModelParams, g: float, rho: ExcursionLaw, laws, max_len: int) -> dict:
    """Term-by-term entropy of the cut maximizer, through the law of the letter sum.

    Returns the charge/normalisation term, the copolymer term E[log phi], the
    length term g m_q and their combination h = I + II - g m_q.
    """
    law_hat, law_bar = laws
    delta = _effective_delta(params, g, law_hat)
    lw = _maximizer_length_logweights(params, g, rho, delta, max_len)
    log_norm = float(logsumexp(lw))
    r = np.exp(lw - log_norm)
    tilted = _bar_tilt(law_bar, params.beta_bar)
    term_i = (params.beta_bar * float(tilted @ law_bar.atoms) - log_mgf(law_bar, -params.beta_bar) - log_norm)
    term_ii = 0.0
    for m in range(1, max_len + 1):
        if r[m - 1] == 0:
            continue
        sums, probs = letter_sum_law(law_hat, m)
        lphi = log_phi(params.beta_hat, params.h_hat, m, sums)
        # E over the cut maximizer of log phi at length m: weights mu^m(s) * phi(s) / E[phi]
        phi = np.exp(lphi)
        term_ii += r[m - 1] * float(np.sum(probs * phi * lphi) / np.sum(probs * phi))
    mq = float(np.arange(1, max_len + 1) @ r)
    return {"I": term_i, "II": term_ii, "g_mq": g * mq, "entropy": term_i + term_ii - g * mq}


# -- truncation and the first-letter marginal --------------------------------


@dataclass(frozen=True)
class TruncatedWordMeasure:
    """[q]_tr: lengths >= tr folded onto tr, keeping only their first tr letters."""

    measure: WordMeasure
    tr: int

    @property
    def r_tr(self) -> np.ndarray:
        return self.measure.r

    @property
    def folded_mass(self) -> float:
        return float(self.measure.r[-1])

    @property
    def mean_length(self) -> float:
        return self.measure.mean_length


def truncate_word_measure(q: WordMeasure, tr: int) -> TruncatedWordMeasure:
    if tr < 1:
        raise InputError("tr must be >= 1")
    if tr >= q.max_len:
        # nothing to fold but the support; pad up to tr with empty lengths
        pad = tr - q.max_len
        a, b = len(q.law_hat.support), len(q.law_bar.support)
        r = np.concatenate([q.r, np.zeros(pad)])
        hat = q.hat + tuple(np.full((a,) * m, 1.0 / a**m) for m in range(q.max_len + 1, tr + 1))
        bar = q.bar + tuple(np.full((m, b), 1.0 / b) for m in range(q.max_len + 1, tr + 1))
        return TruncatedWordMeasure(WordMeasure(q.law_hat, q.law_bar, r, hat, bar), tr)
    r = q.r[:tr].copy()
    r[tr - 1] = q.r[tr - 1:].sum()
    hat_tr = np.zeros_like(q.hat[tr - 1])
    bar_tr = np.zeros_like(q.bar[tr - 1])
    for m in range(tr, q.max_len + 1):
        w = q.r[m - 1]
        if w == 0:
            continue
        t = q.hat[m - 1]
        hat_tr += w * (t.sum(axis=tuple(range(tr, m))) if m > tr else t)
        bar_tr += w * q.bar[m - 1][:tr]
    if r[tr - 1] > 0:
        hat_tr /= r[tr - 1]
        bar_tr /= r[tr - 1]
    else:
        hat_tr = q.hat[tr - 1]
        bar_tr = q.bar[tr - 1]
    hat = q.hat[: tr - 1] + (hat_tr,)
    bar = q.bar[: tr - 1] + (bar_tr,)
    return TruncatedWordMeasure(WordMeasure(q.law_hat, q.law_bar, r, hat, bar), tr)


def _tail_sums(rho: ExcursionLaw, g: float, delta: float, tr: int) -> tuple[float, float]:
    return series(rho, 0, 1, g, tr), series(rho, 0, 1, g - delta, tr)


def truncated_maximizer(params: ModelParams, g: float, rho: ExcursionLaw, laws, tr: int = DEFAULT_TR,
                        cap: int = COMPLEXITY_CAP) -> TruncatedWordMeasure:
    """Exact [q*]_tr of the untruncated maximizer.

    The letters beyond position tr integrate out, so the folded length-tr table
    is proportional to prod mu_hat * (T0 + exp(-2 beta_hat sum - tr M_hat(2 beta_hat)) T1)
    with T0 = sum_{n>=tr} rho(n) e^{-g n} and T1 = sum_{n>=tr} rho(n) e^{-(g - delta) n}.
    """
    law_hat, law_bar = laws
    _check_cap(len(law_hat.support), tr, cap)
    delta = _effective_delta(params, g, law_hat)
    nhat = 0.5 * (grand_sum(rho, g) + grand_sum(rho, g - delta))
    t0, t1 = _tail_sums(rho, g, delta, tr)
    lw = _maximizer_length_logweights(params, g, rho, delta, tr - 1)
    r = np.concatenate([np.exp(lw) / nhat, [0.5 * (t0 + t1) / nhat]])
    hat = [_maximizer_hat_table(params, law_hat, m, delta) for m in range(1, tr)]
    m2 = log_mgf(law_hat, 2 * params.beta_hat)
    lt = _log_product(np.log(law_hat.weights), tr)
    ex = np.exp(-2 * params.beta_hat * _letter_sums(law_hat.atoms, tr) - tr * m2)
    fold = np.exp(lt) * (t0 + ex * t1)
    hat.append(fold / fold.sum())
    tilted = _bar_tilt(law_bar, params.beta_bar)
    bar = []
    for m in range(1, tr + 1):
        b = np.tile(law_bar.weights, (m, 1))
        b[0] = tilted
        bar.append(b)
    q = WordMeasure(law_hat, law_bar, r / r.sum(), tuple(hat), tuple(bar))
    return TruncatedWordMeasure(q, tr)


def psi_first_letter_marginal(q_tr: TruncatedWordMeasure) -> np.ndarray:
    """Law of the letter at a uniformly chosen position of the concatenated words.

    Returned as a joint table over (hat atom, bar atom).
    """
    q = q_tr.measure
    a, b = len(q.law_hat.support), len(q.law_bar.support)
    out = np.zeros((a, b))
    for m in range(1, q.max_len + 1):
        w = q.r[m - 1]
        if w == 0:
            continue
        for k in range(1, m + 1):
            out += w * np.outer(q.hat_position_marginal(m, k), q.bar[m - 1][k - 1])
    return out / q.mean_length


def tilted_hat_law(law_hat: DisorderLaw, beta_hat: float) -> np.ndarray:
    """mu_hat_{beta_hat}(w) = exp(-2 beta_hat w - M_hat(2 beta_hat)) mu_hat(w)."""
    return np.exp(-2 * beta_hat * law_hat.atoms - log_mgf(law_hat, 2 * beta_hat)) * law_hat.weights


def psi_marginal_closed_form(params: ModelParams, g: float, rho: ExcursionLaw, laws,
                             tr: int = DEFAULT_TR) -> np.ndarray:
    """First-letter marginal of [q*]_tr from grand sums alone.

    Every position of a length-m word (m < tr) carries the monomer law
    proportional to mu_hat + e^{m delta} mu_hat_beta; a folded word carries
    T0 mu_hat + T1 mu_hat_beta at each of its tr positions. The first position
    carries the tilted charge law, all others the reference one.
    """
    law_hat, law_bar = laws
    delta = _effective_delta(params, g, law_hat)
    mu = law_hat.weights
    mu_b = tilted_hat_law(law_hat, params.beta_hat)
    t0, t1 = _tail_sums(rho, g, delta, tr)
    p = rho.pmf(tr - 1)
    m = np.arange(1, tr, dtype=float)
    pg = p * np.exp(-g * m)
    pd = p * np.exp(-(g - delta) * m)
    coef_mu = float(m @ pg) + tr * t0
    coef_mub = float(m @ pd) + tr * t1
    first = grand_sum(rho, g) * mu + grand_sum(rho, g - delta) * mu_b
    every = coef_mu * mu + coef_mub * mu_b
    tilted = _bar_tilt(law_bar, params.beta_bar)
    joint = np.outer(first, tilted) + np.outer(every - first, law_bar.weights)
    return joint / (coef_mu + coef_mub)


def _kl_letters(psi: np.ndarray, law_hat: DisorderLaw, law_bar: DisorderLaw) -> float:
    ref = np.outer(law_hat.weights, law_bar.weights)
    return _kl(psi, np.log(ref))


def quenched_rate_lower(q: WordMeasure, tr: int, alpha: float, rho: ExcursionLaw, laws=None) -> float:
    """h(q | reference) + (alpha - 1) m_[q]tr h(Psi marginal of [q]_tr | reference letters)."""
    h = relative_entropy_word(q, rho, laws)
    if math.isinf(h) or alpha == 1:
        return h
    qt = truncate_word_measure(q, tr)
    psi = psi_first_letter_marginal(qt)
    return h + (alpha - 1) * qt.mean_length * _kl_letters(psi, q.law_hat, q.law_bar)


@dataclass(frozen=True)
class GapReport:
    delta: float
    tr: int
    truncated_mass: float
    h_hat_critical: float
    mean_length_tr: float
    psi_entropy: float
    s_ann: float

    def as_dict(self) -> dict:
        # functional_value: certified upper bound on the quenched value, s_ann - delta
        return {
            "functional_value": self.s_ann - self.delta,
            "s_ann": self.s_ann,
            "delta": self.delta,
            "tr": self.tr,
            "truncated_mass": self.truncated_mass,
        }


def gap_certificate(beta_hat: float, beta_bar: float, h_bar: float, alpha: float, rho: ExcursionLaw, laws,
                    tr: int = DEFAULT_TR, strict: bool = True) -> GapReport:
    """(alpha - 1) m_[q*]tr h(Psi | mu_hat x mu_bar) at the annealed maximizer on the
    annealed critical curve (g = 0).

    ``truncated_mass`` reports the probability folded onto length tr.
    """
    law_hat, law_bar = laws
    if not beta_hat > 0:
        raise InputError("beta_hat must be > 0")
    if not alpha > 1:
        raise InputError("alpha must be > 1")
    warn_if_sparse(rho, "gap_certificate")
    mbar = log_mgf(law_bar, -beta_bar)
    if not (mbar - LOG2 < h_bar <= mbar):
        raise DomainError("h_bar must lie in (M_bar(-beta_bar) - log 2, M_bar(-beta_bar)]")
    hc = hc_ann_combined(beta_hat, beta_bar, h_bar, rho, laws)
    params = ModelParams(beta_hat, hc, beta_bar, h_bar)
    qt = truncated_maximizer(params, 0.0, rho, laws, tr)
    psi = psi_first_letter_marginal(qt)
    kl = _kl_letters(psi, law_hat, law_bar)
    delta = (alpha - 1) * qt.mean_length * kl
    rep = GapReport(delta, tr, qt.folded_mass, hc, qt.mean_length, kl, s_ann(params, rho, laws, 0.0))
    if strict and not delta > 1e-12:
        raise DegenerateCertificate(f"gap {delta} is not positive")
    return rep
