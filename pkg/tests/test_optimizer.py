from __future__ import annotations

import math

import numpy as np
import pytest

from protoldpc.blockcheck import check_block_condition
from protoldpc.component import BinaryLinearCode
from protoldpc.optimizer import (
    Candidate,
    OptimizerConfig,
    crossover,
    enforce_degrees,
    init_population,
    mutate,
    optimize,
    pick_donors,
    select,
)
from protoldpc.protograph import Protograph

from conftest import CODE52_WORDS


def template(rows=3, cols=6):
    return Protograph.from_matrix(np.zeros((rows, cols), dtype=int))


def generalized_template():
    c52 = BinaryLinearCode.from_codewords(5, CODE52_WORDS, "c52")
    return Protograph(np.zeros((3, 6), dtype=int), var_code=(c52,) + (None,) * 5)


@pytest.mark.parametrize("b1, b2, b3, want", [(2, 3, 1, 3), (0, 0, 4, 2), (8, 8, 0, 8), (1, 0, 1, 1), (0, 1, 0, 1)])
def test_mutation_examples(b1, b2, b3, want):
    out = mutate(np.array([[b1]]), np.array([[b2]]), np.array([[b3]]), 0.5, 8)
    assert out.tolist() == [[want]]


def test_crossover_extremes():
    rng = np.random.default_rng(0)
    parent = Protograph.from_matrix([[1, 2], [3, 0]])
    mutant = np.array([[4, 4], [4, 4]])
    assert crossover(parent, mutant, rng, 0.0).base.tolist() == [[1, 2], [3, 0]]
    assert crossover(parent, mutant, rng, 1.0).base.tolist() == [[4, 4], [4, 4]]


def test_selection_rules():
    p = Protograph.from_matrix([[3, 3]])
    good_parent = Candidate(p, 0.40, True)
    better_child = Candidate(p, 0.42, True)
    bad_child = Candidate(p, 0.90, False)
    assert select(good_parent, better_child) is better_child
    assert select(better_child, good_parent) is better_child
    assert select(good_parent, bad_child) is good_parent
    uncert_parent = Candidate(p, 0.5, False)
    assert select(uncert_parent, good_parent) is good_parent
    assert select(uncert_parent, bad_child) is uncert_parent
    assert Candidate(p, math.nan, True).score == -math.inf


def test_donors_are_distinct_from_target():
    rng = np.random.default_rng(1)
    for k in range(6):
        d = pick_donors(6, k, rng)
        assert len(set(d)) == 3 and k not in d


def test_initial_population_is_certified():
    cfg = OptimizerConfig(template(), population_size=8, rng_seed=4, generations=0)
    for p in init_population(cfg):
        assert check_block_condition(p).verdict


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(template(), population_size=3)
    with pytest.raises(ValueError):
        OptimizerConfig(template(), channel="bsc")
    assert OptimizerConfig(template()).population_size == 18


def test_search_is_deterministic_and_monotone():
    cfg = OptimizerConfig(template(2, 4), population_size=8, generations=6, rng_seed=11)
    a = optimize(cfg)
    b = optimize(cfg)
    assert [c.threshold for c in a.history] == [c.threshold for c in b.history]
    assert np.array_equal(a.best.protograph.base, b.best.protograph.base)
    scores = [c.threshold for c in a.history]
    assert all(y >= x for x, y in zip(scores, scores[1:]))
    assert all(c.certificate_ok for c in a.history)


def test_jobs_do_not_change_the_result():
    cfg1 = OptimizerConfig(template(2, 4), population_size=6, generations=3, rng_seed=2)
    cfg2 = OptimizerConfig(template(2, 4), population_size=6, generations=3, rng_seed=2, jobs=2)
    assert [c.threshold for c in optimize(cfg1).history] == [c.threshold for c in optimize(cfg2).history]


def test_enforce_degrees_on_generalized_columns():
    t = generalized_template()
    rng = np.random.default_rng(0)
    for _ in range(20):
        base = enforce_degrees(rng.integers(0, 9, size=(3, 6)), t, 8, rng)
        assert base[:, 0].sum() == 5


def test_generalized_search_keeps_code_lengths():
    cfg = OptimizerConfig(generalized_template(), population_size=6, generations=3, rng_seed=5)
    res = optimize(cfg)
    for c in res.history:
        assert c.protograph.base[:, 0].sum() == 5
        assert c.certificate_ok
