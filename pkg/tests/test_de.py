from __future__ import annotations

import numpy as np
import pytest

from protoldpc.component import BinaryLinearCode
from protoldpc.de import (
    HAVE_NUMBA,
    DensityEvolution,
    bec_threshold,
    de_init,
    de_run,
    de_step,
    standard_closed_form_step,
)
from protoldpc.protograph import Protograph

from conftest import CODE52_WORDS, DEGREE_ONE_NEIGHBOUR, SMALL_RED_NONEMPTY, random_standard_protograph

# thresholds of regular ensembles, known to four digits
REGULAR_36 = 0.4294
REGULAR_48 = 0.3834


def c52_variable_protograph() -> Protograph:
    code = BinaryLinearCode.from_codewords(5, CODE52_WORDS, "c52")
    return Protograph(np.array([[2, 1], [3, 1]]), var_code=(code, None))


def test_zero_erasure_converges_immediately():
    out = de_run(Protograph.from_matrix([[3, 3]]), 0.0)
    assert out.converged and out.iterations_used == 1
    assert out.final_max_x == 0.0 and out.final_max_app == 0.0


def test_full_erasure_never_converges():
    out = de_run(Protograph.from_matrix([[3, 3]]), 1.0)
    assert not out.converged and out.final_max_x == 1.0


@pytest.mark.parametrize("base, want", [([[3, 3]], REGULAR_36), ([[4, 4]], REGULAR_48)])
def test_regular_thresholds(base, want):
    assert bec_threshold(Protograph.from_matrix(base)).threshold == pytest.approx(want, abs=2e-4)


def test_cycle_code_threshold_is_one_up_to_iteration_budget():
    # x_t = eps**t needs about 23 / (1 - eps) iterations to pass 1e-10
    th = bec_threshold(Protograph.from_matrix([[2]]))
    assert 0.99 < th.threshold <= 1.0


def test_threshold_bracket_is_consistent():
    p = Protograph.from_matrix(SMALL_RED_NONEMPTY)
    th = bec_threshold(p, precision=1e-3)
    assert th.upper - th.lower <= 1e-3
    assert de_run(p, th.lower).converged
    assert not de_run(p, th.upper).converged


def test_init_values():
    p = Protograph.from_matrix([[1, 2, 1], [1, 1, 2]], {2})
    s = de_init(p, 0.3)
    assert s.iteration == 0 and np.all(s.y == 1.0)
    for sock in p.sockets:
        assert s.x[p.socket_index[sock.key]] == (1.0 if sock.var == 2 else 0.3)


def test_generalized_variable_init_and_step():
    p = c52_variable_protograph()
    eps = 0.4
    s0 = de_init(p, eps)
    v0 = p.var_sockets[0]
    # with all check messages erased only the channel slots matter; position 5
    # lies on two codewords, one through each channel slot
    assert np.allclose(s0.x[list(v0)], [eps, eps, eps, eps, 2 * eps - eps**2])
    rng = np.random.default_rng(5)
    s = s0
    s.x = rng.random(len(p.sockets))
    s1 = de_step(p, s)
    y = {p.sockets[e].var_position + 1: s1.y[e] for e in v0}
    expected = eps * y[3] * y[5] + eps**2 * y[2] * y[3] * y[4] - eps**2 * y[2] * y[3] * y[4] * y[5]
    assert s1.x[v0[0]] == pytest.approx(expected, abs=1e-14)


def test_degree_one_sockets_hold_channel_value():
    p = Protograph.from_matrix(DEGREE_ONE_NEIGHBOUR)
    s = de_init(p, 0.5)
    deg1 = p.var_sockets[1][0]
    for _ in range(30):
        s = de_step(p, s)
        assert s.x[deg1] == 0.5


def test_monotone_in_epsilon():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = random_standard_protograph(rng)
        lo, hi = de_init(p, 0.3), de_init(p, 0.35)
        for _ in range(40):
            lo, hi = de_step(p, lo), de_step(p, hi)
            assert np.all(lo.x <= hi.x + 1e-15) and np.all(lo.y <= hi.y + 1e-15)


def test_closed_forms_match_polynomial_engine():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(50):
        # keep node degrees within the component-code size cap
        p = random_standard_protograph(rng, max_cols=5, entry_max=2)
        poly = DensityEvolution(p, force_polynomial=True)
        eps = float(rng.random())
        s_poly = poly.init(eps)
        s_ref = de_init(p, eps)
        for _ in range(50):
            s_poly = poly.step(s_poly)
            s_ref = standard_closed_form_step(p, s_ref)
            worst = max(worst, float(np.abs(s_poly.x - s_ref.x).max()), float(np.abs(s_poly.y - s_ref.y).max()))
    assert worst < 1e-12


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled path needs numba")
def test_compiled_run_matches_numpy_run():
    rng = np.random.default_rng(23)
    for _ in range(15):
        p = random_standard_protograph(rng)
        eng = DensityEvolution(p)
        assert eng.compiled is not None
        for eps in (0.2, 0.45, 0.7):
            fast = eng.run(eps, max_iter=800)
            slow = eng.run(eps, max_iter=800, keep_trajectory=True)
            assert (fast.converged, fast.iterations_used) == (slow.converged, slow.iterations_used)
            assert fast.final_max_app == pytest.approx(slow.final_max_app, rel=1e-9, abs=1e-300)


def test_trajectory_and_convergence_invariant():
    p = Protograph.from_matrix([[3, 3]])
    out = de_run(p, 0.3, keep_trajectory=True)
    assert out.converged and len(out.trajectory) == out.iterations_used
    assert out.final_max_app < 1e-10
    apps = [a for _, a in out.trajectory]
    assert all(b <= a for a, b in zip(apps, apps[1:]))


def test_argument_validation():
    p = Protograph.from_matrix([[3, 3]])
    with pytest.raises(ValueError):
        de_run(p, 0.3, max_iter=0)
    with pytest.raises(ValueError):
        de_run(p, 0.3, delta=0.0)
    with pytest.raises(ValueError):
        bec_threshold(p, precision=1e-7)
