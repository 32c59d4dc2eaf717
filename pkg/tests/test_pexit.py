from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import optimize

from protoldpc.pexit import (
    PexitError,
    awgn_threshold,
    channel_sigma,
    j_function,
    j_inverse,
    pexit_run,
)
from protoldpc.protograph import Protograph


def j_oracle(sigma: float) -> float:
    """J by a dense trapezoid rule over the consistent Gaussian LLR."""
    z = np.linspace(-40.0, 40.0, 800001)
    f = np.exp(-0.5 * z * z) * np.logaddexp(0.0, -(sigma**2 / 2 + sigma * z)) / math.log(2.0)
    return 1.0 - float(np.trapezoid(f, z)) / math.sqrt(2 * math.pi)


def _phi(x: float) -> float:
    if x <= 0:
        return 1.0
    if x < 10:
        return math.exp(-0.4527 * x**0.86 + 0.0218)
    return math.sqrt(math.pi / x) * math.exp(-x / 4) * (1 - 10 / (7 * x))


def _phi_inv(y: float) -> float:
    if y >= 1.0:
        return 0.0
    return optimize.brentq(lambda x: _phi(x) - y, 1e-12, 1e4)


def regular_ga_threshold_db(dv: int, dc: int) -> float:
    """Mean-evolution threshold of a regular ensemble under the Gaussian approximation."""
    rate = 1 - dv / dc

    def converges(sig: float) -> bool:
        m0 = 2 / sig**2
        mu = 0.0
        for _ in range(3000):
            mu = _phi_inv(1 - (1 - _phi(m0 + (dv - 1) * mu)) ** (dc - 1))
            if mu > 60:
                return True
        return False

    lo, hi = 0.5, 1.5
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if converges(mid) else (lo, mid)
    sig = 0.5 * (lo + hi)
    return 10 * math.log10(1 / (2 * rate * sig**2))


@pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0, 2.0, 4.0, 8.0])
def test_j_matches_quadrature_oracle(sigma):
    assert j_function(sigma) == pytest.approx(j_oracle(sigma), abs=1e-9)


def test_j_endpoints():
    assert j_function(0.0) == 0.0
    assert j_function(30.0) > 1 - 1e-9
    assert j_inverse(0.0) == 0.0 and j_inverse(1.0) == math.inf
    with pytest.raises(ValueError):
        j_inverse(1.5)


@pytest.mark.parametrize("info", [1e-4, 0.1, 0.5, 0.9, 0.999, 1 - 1e-7])
def test_j_inverse_roundtrip(info):
    assert j_function(j_inverse(info)) == pytest.approx(info, abs=1e-10)


def test_j_is_increasing():
    vals = [j_function(s) for s in np.linspace(0.0, 12.0, 49)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_channel_sigma():
    assert channel_sigma(0.0, 0.5) == pytest.approx(2.0)


def test_regular_36_against_gaussian_approximation():
    th = awgn_threshold(Protograph.from_matrix([[3, 3]]))
    assert th.threshold_db == pytest.approx(regular_ga_threshold_db(3, 6), abs=0.1)
    assert th.upper_db - th.lower_db <= 0.01


def test_run_is_monotone_in_snr():
    p = Protograph.from_matrix([[1, 2, 1], [1, 1, 2]])
    th = awgn_threshold(p, precision_db=0.05).threshold_db
    assert pexit_run(p, th + 0.2).converged
    assert not pexit_run(p, th - 0.2).converged
    assert pexit_run(p, th + 1.0).converged


def test_puncturing_raises_the_threshold_rate_corrected():
    base = [[1, 2, 1, 1], [2, 1, 1, 2]]
    plain = Protograph.from_matrix(base)
    punct = Protograph.from_matrix(base, {0})
    # both thresholds exist; a punctured node gets no channel information
    a = awgn_threshold(plain).threshold_db
    b = awgn_threshold(punct).threshold_db
    assert math.isfinite(a) and math.isfinite(b) and a != b


def test_bracket_errors():
    p = Protograph.from_matrix([[3, 3]])
    with pytest.raises(PexitError):
        awgn_threshold(p, bracket=(2.0, 5.0))
    with pytest.raises(PexitError):
        awgn_threshold(p, bracket=(-1.0, 0.5))


def test_generalized_protographs_rejected():
    from protoldpc.component import hamming74

    p = Protograph(np.array([[4, 3], [3, 4]]), check_code=(hamming74(), hamming74()))
    with pytest.raises(PexitError):
        pexit_run(p, 1.0)
