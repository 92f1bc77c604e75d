"""Disorder laws for monomer types and interface charges.

Both laws are standardized to mean 0 and variance 1 on construction. Only
finite discrete laws and the standard gaussian are supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._errors import DegenerateLaw, InputError

_TOL = 1e-12


@dataclass(frozen=True)
class DisorderLaw:
    kind: str
    support: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.support or self.probs:
                raise InputError("gaussian law takes no atoms")
            return
        if self.kind != "finite_discrete":
            raise InputError(f"unknown disorder kind {self.kind!r}")
        if len(self.support) != len(self.probs) or len(self.support) < 2:
            raise InputError("need at least two atoms with matching probabilities")
        p = np.asarray(self.probs)
        x = np.asarray(self.support)
        if np.any(p < 0) or abs(p.sum() - 1.0) > _TOL:
            raise InputError("probabilities must be nonnegative and sum to 1")
        if abs(p @ x) > _TOL or abs(p @ x**2 - 1.0) > _TOL:
            raise InputError("law is not standardized; use standardize()")

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite_discrete"

    @property
    def atoms(self) -> np.ndarray:
        return np.asarray(self.support, dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def log_mgf(self, t: float) -> float:
        return log_mgf(self, t)


GAUSSIAN = DisorderLaw("gaussian")
PM1 = DisorderLaw("finite_discrete", (-1.0, 1.0), (0.5, 0.5))


def standardize(support, weights) -> DisorderLaw:
    """Affinely map atoms to mean 0 / variance 1 and normalize the weights.

    Atoms with zero weight are dropped and coincident atoms merged.
    """
    x = np.asarray(support, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise InputError("support and weights must be 1-d of equal length")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(x)):
        raise InputError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise InputError("weights are all zero")
    keep = w > 0
    x, w = x[keep], w[keep] / w[keep].sum()
    uniq, inv = np.unique(x, return_inverse=True)
    w = np.bincount(inv, weights=w)
    mean = float(w @ uniq)
    var = float(w @ (uniq - mean) ** 2)
    if len(uniq) < 2 or not var > 0:
        raise DegenerateLaw("input law has zero variance")
    z = (uniq - mean) / math.sqrt(var)
    # re-centre to kill the rounding left by the affine map
    z = z - float(w @ z)
    z = z / math.sqrt(float(w @ z**2))
    return DisorderLaw("finite_discrete", tuple(z.tolist()), tuple(w.tolist()))


def log_mgf(law: DisorderLaw, t: float) -> float:
    """log E[exp(-t X)]."""
    if law.kind == "gaussian":
        return 0.5 * t * t
    if t == 0:
        return 0.0
    return float(logsumexp(-t * law.atoms, b=law.weights))


def from_config(cfg) -> DisorderLaw:
    """Build a law from the CLI/JSON description."""
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    kind = cfg.get("kind")
    if kind == "pm1":
        return PM1
    if kind == "gaussian":
        return GAUSSIAN
    if kind == "discrete":
        try:
            return standardize(cfg["atoms"], cfg["weights"])
        except KeyError as err:
            raise InputError(f"discrete law needs {err.args[0]!r}") from err
    raise InputError(f"unknown disorder kind {kind!r}")


@dataclass(frozen=True)
class DisorderSample:
    hat: np.ndarray = field(repr=False)
    bar: np.ndarray = field(repr=False)
    n: int
    seed: int
    stream: int


def _generator(seed: int, stream: int, which: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(stream), which))
    return np.random.Generator(np.random.Philox(ss))


def _draw(law: DisorderLaw, rng: np.random.Generator, n: int) -> np.ndarray:
    if law.kind == "gaussian":
        return rng.standard_normal(n)
    cdf = np.cumsum(law.weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return law.atoms[idx]


def sample(law_hat: DisorderLaw, law_bar: DisorderLaw, n: int, seed: int, stream: int = 0) -> DisorderSample:
    """Draw n i.i.d. (hat, bar) pairs.

    The hat and bar arrays come from distinct Philox sub-streams keyed by
    (seed, stream), so a replica is reproducible no matter which worker runs it.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    hat = _draw(law_hat, _generator(seed, stream, 0), n)
    bar = _draw(law_bar, _generator(seed, stream, 1), n)
    hat.flags.writeable = False
    bar.flags.writeable = False
    return DisorderSample(hat, bar, n, int(seed), int(stream))


def fixed_sample(hat, bar, seed: int = 0, stream: int = 0) -> DisorderSample:
    """Wrap explicit arrays, mostly for tests and hand-built environments."""
    hat = np.array(hat, dtype=float)
    bar = np.array(bar, dtype=float)
    if hat.shape != bar.shape or hat.ndim != 1 or len(hat) < 1:
        raise InputError("hat and bar must be equal-length nonempty 1-d arrays")
    return DisorderSample(hat, bar, len(hat), seed, stream)
