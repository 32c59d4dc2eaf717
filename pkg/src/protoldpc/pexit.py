"""Protograph EXIT analysis over the binary-input AWGN channel.

Messages are Gaussian LLRs described by a single parameter ``sigma`` (mean
``sigma**2 / 2``, variance ``sigma**2``) whose mutual information is
``J(sigma)``.  Variable nodes add ``sigma**2`` of their inputs; check nodes
act in the dual domain through ``K(sigma) = J^{-1}(1 - J(sigma))``, which is an
involution.  Running the whole recursion on ``sigma`` values avoids inverting
``J`` close to 1, where it is numerically flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .protograph import Protograph, design_rate

SIGMA_MAX = 50.0
APP_TARGET = 1.0 - 1e-6
DEFAULT_MAX_ITER = 3000
STALL_WINDOW = 100


class PexitError(ValueError):
    pass


def _softplus_bits(l: float) -> float:
    # log2(1 + exp(-l)) without overflow
    return (max(-l, 0.0) + math.log1p(math.exp(-abs(l)))) / math.log(2.0)


def j_complement(sigma: float) -> float:
    """``1 - J(sigma)`` computed directly, accurate where ``J`` is close to 1."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return 1.0
    mu = sigma * sigma / 2.0

    def integrand(z):
        return math.exp(-0.5 * z * z) * _softplus_bits(mu + sigma * z)

    # the Gaussian weight is negligible beyond 40 standard deviations
    val, _ = integrate.quad(integrand, -40.0, 40.0, epsabs=1e-14, epsrel=1e-12, limit=400, points=[-mu / sigma])
    return val / math.sqrt(2.0 * math.pi)


def j_function(sigma: float) -> float:
    """Mutual information between a bit and a consistent Gaussian LLR."""
    return 1.0 - j_complement(sigma)


def j_inverse(info: float) -> float:
    """Inverse of :func:`j_function` by bracketing root search."""
    if not 0.0 <= info <= 1.0:
        raise ValueError("mutual information must lie in [0, 1]")
    if info == 0.0:
        return 0.0
    if info == 1.0:
        return math.inf
    hi = 1.0
    while j_function(hi) < info:
        hi *= 2.0
        if hi > 1e3:
            return math.inf
    return optimize.brentq(lambda s: j_function(s) - info, 0.0, hi, xtol=1e-13, rtol=1e-15)


@dataclass(frozen=True)
class _Tables:
    sigma: np.ndarray
    k_of_sigma: np.ndarray
    app_sigma: float


@lru_cache(maxsize=1)
def _tables() -> _Tables:
    """Dense table of ``K`` on a grid refined near zero."""
    grid = np.unique(np.concatenate([[0.0], np.geomspace(1e-4, 0.05, 120), np.arange(0.05, SIGMA_MAX, 0.01), [SIGMA_MAX]]))
    jc = np.array([j_complement(s) for s in grid])
    jv = 1.0 - jc
    # K(s) solves J(K) = 1 - J(s) = jc(s); interpolate the inverse of J in log scale
    pos = jv > 0
    log_j = np.log(jv[pos])
    k = np.empty_like(grid)
    with np.errstate(divide="ignore"):
        target = np.log(jc)
    inside = target >= log_j[0]
    k[inside] = np.interp(target[inside], log_j, grid[pos])
    # below the table J(s) ~ s^2 / (8 ln 2)
    k[~inside] = np.sqrt(np.exp(target[~inside]) * 8.0 * math.log(2.0))
    k[0] = SIGMA_MAX
    k[-1] = 0.0
    return _Tables(grid, k, j_inverse(APP_TARGET))


def _k(sig: np.ndarray, t: _Tables) -> np.ndarray:
    return np.interp(np.minimum(sig, SIGMA_MAX), t.sigma, t.k_of_sigma)


def channel_sigma(eb_n0_db: float, rate: float) -> float:
    """LLR parameter of a BPSK/AWGN channel: ``sigma_ch**2 = 8 R Eb/N0``."""
    return math.sqrt(8.0 * rate * 10.0 ** (eb_n0_db / 10.0))


@dataclass
class PexitState:
    Iev: np.ndarray
    Iec: np.ndarray
    iteration: int
    eb_n0_db: float


@dataclass(frozen=True)
class PexitOutcome:
    converged: bool
    iterations_used: int
    min_app_info: float


class _Pexit:
    def __init__(self, p: Protograph):
        if not p.is_standard:
            raise PexitError("EXIT analysis supports standard protographs only")
        self.p = p
        self.var_of = np.array([s.var for s in p.sockets], dtype=np.int64)
        self.check_of = np.array([s.check for s in p.sockets], dtype=np.int64)
        self.punct = np.array([j in p.punctured for j in range(p.num_vars)])
        self.rate = float(design_rate(p).transmitted)

    def run(self, eb_n0_db: float, max_iter: int = DEFAULT_MAX_ITER) -> tuple[PexitOutcome, PexitState]:
        t = _tables()
        nv, nc = self.p.num_vars, self.p.num_checks
        ch2 = np.where(self.punct, 0.0, channel_sigma(eb_n0_db, self.rate) ** 2)
        sig_c = np.zeros(len(self.var_of))
        history: list[float] = []
        sig_v = np.zeros_like(sig_c)
        app = np.zeros(nv)
        for it in range(1, max_iter + 1):
            tot_v = np.bincount(self.var_of, weights=sig_c**2, minlength=nv) + ch2
            sig_v = np.sqrt(np.maximum(tot_v[self.var_of] - sig_c**2, 0.0))
            kv2 = _k(sig_v, t) ** 2
            tot_c = np.bincount(self.check_of, weights=kv2, minlength=nc)
            sig_c = _k(np.sqrt(np.maximum(tot_c[self.check_of] - kv2, 0.0)), t)
            app = np.sqrt(np.bincount(self.var_of, weights=sig_c**2, minlength=nv) + ch2)
            worst = float(app.min())
            if worst > t.app_sigma:
                return PexitOutcome(True, it, j_function(worst)), self._state(sig_v, sig_c, it, eb_n0_db)
            history.append(worst)
            if it > STALL_WINDOW and worst <= history[it - 1 - STALL_WINDOW] * (1.0 + 1e-9):
                break
        return PexitOutcome(False, it, j_function(float(app.min()))), self._state(sig_v, sig_c, it, eb_n0_db)

    @staticmethod
    def _state(sig_v, sig_c, it, eb_n0_db) -> PexitState:
        jv = np.vectorize(j_function)
        return PexitState(jv(sig_v), jv(sig_c), it, eb_n0_db)


@lru_cache(maxsize=64)
def _engine(p: Protograph) -> _Pexit:
    return _Pexit(p)


def pexit_run(p: Protograph, eb_n0_db: float, max_iter: int = DEFAULT_MAX_ITER) -> PexitOutcome:
    """Run the EXIT recursion; converged when every a-posteriori information exceeds ``1 - 1e-6``.

    Punctured variable nodes receive no channel information.  The run stops
    early as a failure when the smallest a-posteriori parameter has not grown
    over 100 iterations.
    """
    if not math.isfinite(eb_n0_db):
        raise ValueError("Eb/N0 must be finite")
    return _engine(p).run(eb_n0_db, max_iter)[0]


@dataclass(frozen=True)
class AwgnThreshold:
    threshold_db: float
    lower_db: float
    upper_db: float


def awgn_threshold(
    p: Protograph,
    precision_db: float = 0.01,
    bracket: tuple[float, float] = (-1.6, 10.0),
    max_iter: int = DEFAULT_MAX_ITER,
) -> AwgnThreshold:
    """Smallest Eb/N0 (dB) at which the EXIT recursion converges, by bisection."""
    lo, hi = bracket
    eng = _engine(p)
    if eng.run(lo, max_iter)[0].converged:
        raise PexitError(f"recursion already converges at the lower bracket end {lo} dB; widen the bracket")
    if not eng.run(hi, max_iter)[0].converged:
        raise PexitError(f"recursion fails at the upper bracket end {hi} dB; widen the bracket")
    while hi - lo > precision_db:
        mid = 0.5 * (lo + hi)
        if eng.run(mid, max_iter)[0].converged:
            hi = mid
        else:
            lo = mid
    return AwgnThreshold(0.5 * (lo + hi), lo, hi)
