from __future__ import annotations

import json

import numpy as np
import pytest

from protoldpc.blockcheck import (
    BlockCheckError,
    check_block_condition,
    classify_edges,
    dex_variable_nodes,
    load_base_matrix_csv,
    min_distance_prepass,
    propagate_dex,
    red_base_matrix,
    red_reduce,
    red_reduce_dgldpc,
    save_certificate,
)
from protoldpc.component import BinaryLinearCode, hamming74
from protoldpc.de import de_init, de_step
from protoldpc.optimizer import enforce_degrees
from protoldpc.protograph import Protograph

from conftest import CODE52_WORDS, random_standard_protograph


def keys(p, edges):
    return {p.sockets[e].key for e in edges}


def random_dgldpc(rng) -> Protograph:
    c52 = BinaryLinearCode.from_codewords(5, CODE52_WORDS, "c52")
    template = Protograph(np.zeros((3, 5), dtype=int), var_code=(c52, None, None, None, None),
                          check_code=(hamming74(), None, None))
    base = enforce_degrees(rng.integers(0, 3, size=(3, 5)), template, 4, rng)
    base[1:, 1:] += rng.integers(0, 2, size=(2, 4))
    vl = (tuple(int(x) + 1 for x in rng.permutation(5)),) + (None,) * 4
    cl = (tuple(int(x) + 1 for x in rng.permutation(7)), None, None)
    return Protograph(base, frozenset(), template.var_code, template.check_code, vl, cl)


# --- standard reducer ---------------------------------------------------------


def test_red_empty_fixture(red_empty):
    red, trace = red_reduce(red_empty)
    assert red.is_empty
    assert [st.rule for st in trace] == ["degree-one", "degree-one", "cycle"]


def test_red_nonempty_fixture(red_nonempty):
    red, _ = red_reduce(red_nonempty)
    assert red.variables == (2, 3) and red.checks == (2,)
    assert red_base_matrix(red).tolist() == [[3, 3]]


def test_dex_fixture(red_nonempty):
    p = red_nonempty
    red, _ = red_reduce(p)
    Dx, Dy = propagate_dex(p, red.edges)
    assert keys(p, Dy) == keys(p, red.edges) | {(1, 1, 0), (0, 0, 0)}
    assert keys(p, Dx) == keys(p, red.edges) | {(0, 1, 0), (1, 2, 0), (1, 2, 1)}
    assert dex_variable_nodes(p, Dy) == frozenset({0, 1, 2, 3})


def test_verdicts_on_fixtures(red_empty, red_nonempty):
    assert check_block_condition(red_nonempty, 1).verdict
    cert = check_block_condition(red_empty, 1)
    assert not cert.verdict and cert.available_info == 0


def test_required_info_bounds(red_nonempty):
    with pytest.raises(BlockCheckError):
        check_block_condition(red_nonempty, 99)
    with pytest.raises(BlockCheckError):
        check_block_condition(red_nonempty, -1)


def test_tree_of_degree_two_variables_survives():
    # a chain of degree-2 variables is a tree; the degree-3 column keeps every check alive
    p = Protograph.from_matrix([[1, 0, 1], [1, 1, 1], [0, 1, 1]])
    red, trace = red_reduce(p)
    assert len(red.edges) == len(p.sockets) and trace == ()


def test_parallel_edges_of_a_degree_two_variable_form_a_cycle():
    p = Protograph.from_matrix([[2, 1, 1], [0, 2, 1]])
    red, _ = red_reduce(p)
    assert red.is_empty


def test_red_edges_are_in_both_flag_sets():
    rng = np.random.default_rng(4)
    for _ in range(40):
        p = random_standard_protograph(rng, punctured=False)
        red, _ = red_reduce(p)
        Dx, Dy = propagate_dex(p, red.edges)
        assert red.edges <= Dx & Dy
        cert = check_block_condition(p, 0)
        assert cert.Dy == Dy and cert.Dx == Dx


def test_propagation_is_order_independent():
    rng = np.random.default_rng(8)
    for _ in range(25):
        p = random_standard_protograph(rng)
        red, _ = red_reduce(p)
        ref = propagate_dex(p, red.edges)
        for k in range(3):
            assert propagate_dex(p, red.edges, schedule_rng=np.random.default_rng(k)) == ref


def test_red_edges_decay_and_degree_one_edges_do_not(red_nonempty):
    p = red_nonempty
    red, _ = red_reduce(p)
    s = de_init(p, 0.5)
    for _ in range(60):
        s = de_step(p, s)
    assert s.x[sorted(red.edges)].max() < 1e-12
    assert s.x[0] == 0.5


# --- generalized reducer ------------------------------------------------------


def test_generalized_reducer_agrees_on_standard_graphs():
    rng = np.random.default_rng(12)
    for _ in range(30):
        p = random_standard_protograph(rng, max_cols=5, entry_max=2)
        a, _ = red_reduce(p)
        b, _ = red_reduce_dgldpc(p)
        c, _ = red_reduce_dgldpc(p, force_polynomial=True)
        assert a.edges == b.edges == c.edges


def test_prepass_is_subset_of_polynomial_reduction():
    rng = np.random.default_rng(31)
    for _ in range(20):
        p = random_dgldpc(rng)
        removed, _ = min_distance_prepass(p)
        full, _ = red_reduce_dgldpc(p, prepass=False)
        assert not removed & full.edges
        with_prepass, _ = red_reduce_dgldpc(p, prepass=True)
        assert with_prepass.edges == full.edges


def test_check_code_with_distance_three_keeps_its_parallel_edges():
    c52 = BinaryLinearCode.from_codewords(5, CODE52_WORDS, "c52")
    p = Protograph(np.array([[2, 3], [0, 3]]), check_code=(c52, None))
    red, trace = red_reduce_dgldpc(p)
    assert len(red.edges) == len(p.sockets) and trace == ()
    # the same base matrix with parity checks loses the degree-2 variable
    std, _ = red_reduce(Protograph.from_matrix([[2, 3], [0, 3]]))
    assert std.edges == frozenset({5, 6, 7})


def test_variable_code_without_redundancy_is_degree_one_like():
    full = BinaryLinearCode(3, ((1, 0, 0), (0, 1, 0), (0, 0, 1)), "full3")
    p = Protograph(np.array([[1, 1], [1, 1], [1, 1]]), var_code=(full, None))
    assert classify_edges(p).E1 == frozenset({0, 2, 4})
    red, _ = red_reduce_dgldpc(p)
    assert red.is_empty
    assert not check_block_condition(p).verdict


def test_generalized_check_flags():
    # a (5,2) check needs three flagged inputs on an information set, a parity check needs all others
    c52 = BinaryLinearCode.from_codewords(5, CODE52_WORDS, "c52")
    p = Protograph(np.array([[1, 1, 1, 1, 1], [1, 1, 1, 1, 1]]), check_code=(c52, None))
    Dx, Dy = propagate_dex(p, set(p.check_sockets[1]))
    assert set(p.check_sockets[0]) <= Dy


# --- serialization -------------------------------------------------------------


def test_certificate_json(tmp_path, red_nonempty):
    cert = check_block_condition(red_nonempty, 1)
    save_certificate(red_nonempty, cert, tmp_path / "cert.json")
    data = json.loads((tmp_path / "cert.json").read_text())
    assert data["verdict"] is True
    assert data["red_edges"] == [[2, 2, 0], [2, 2, 1], [2, 2, 2], [2, 3, 0], [2, 3, 1], [2, 3, 2]]
    assert [st["rule"] for st in data["removal_trace"]] == ["degree-one", "degree-one"]


def test_base_matrix_csv(tmp_path):
    (tmp_path / "b.csv").write_text("1,2,0\n0,1,3\n")
    assert load_base_matrix_csv(tmp_path / "b.csv").tolist() == [[1, 2, 0], [0, 1, 3]]
    (tmp_path / "s.csv").write_text("5,-1,0\n-1,7,2\n")
    assert load_base_matrix_csv(tmp_path / "s.csv").tolist() == [[1, 0, 1], [0, 1, 1]]
