"""Certification that block- and bit-error thresholds coincide.

The reduction removes edges whose messages cannot fall double exponentially
(sockets at degree-one variable nodes and cycles through degree-two variable
nodes, or their generalized counterparts), leaving a subgraph ``RED(G)``.
Flags are then propagated from that subgraph through the whole protograph to
find the variable nodes whose bit-erasure probability decays double
exponentially.  The protograph passes when enough information bits can be
placed on such nodes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np

from .component import (
    BinaryLinearCode,
    extend_for_variable,
    extrinsic_erasure_polynomial,
    least_degree,
    low_weight_supports,
    punctured,
    recoverable_by_rank,
)
from .protograph import Protograph, design_rate


class BlockCheckError(ValueError):
    pass


@dataclass(frozen=True)
class RemovalStep:
    """One batch of removals made by the reducer.

    ``rule`` is ``"cycle"`` or ``"degree-one"`` for the standard reducer and
    ``"E1v"``, ``"E1c"`` or ``"E2"`` for the generalized one.
    """

    pass_index: int
    rule: str
    variables: tuple[int, ...]
    checks: tuple[int, ...]
    sockets: tuple[int, ...]


@dataclass(frozen=True)
class RedSubgraph:
    protograph: Protograph
    edges: frozenset[int]

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(sorted({self.protograph.sockets[s].var for s in self.edges}))

    @property
    def checks(self) -> tuple[int, ...]:
        return tuple(sorted({self.protograph.sockets[s].check for s in self.edges}))

    @property
    def is_empty(self) -> bool:
        return not self.edges


@dataclass(frozen=True)
class EdgeClassification:
    E1: frozenset[int]
    E2: frozenset[int]


@dataclass(frozen=True)
class BlockCertificate:
    red_edges: frozenset[int]
    Dx: frozenset[int]
    Dy: frozenset[int]
    dex_vars: frozenset[int]
    verdict: bool
    required_info: int
    available_info: int
    removal_trace: tuple[RemovalStep, ...]
    generalized_reducer: bool = False


# ---------------------------------------------------------------------------
# standard reducer


def _alive_var_sockets(p: Protograph, alive: set[int]) -> list[list[int]]:
    return [[s for s in socks if s in alive] for socks in p.var_sockets]


def _on_cycle_edges(check_edges: dict[int, tuple[int, int]]) -> set[int]:
    """Keys of contracted edges lying on a cycle of the check multigraph."""
    g = nx.MultiGraph()
    for key, (a, b) in check_edges.items():
        g.add_edge(a, b, key=key)
    on_cycle = set()
    for key, (a, b) in check_edges.items():
        if a == b or g.number_of_edges(a, b) > 1:
            on_cycle.add(key)
    simple = nx.Graph(g)
    simple.remove_edges_from(list(nx.selfloop_edges(simple)))
    bridges = {frozenset(e) for e in nx.bridges(simple)}
    for key, (a, b) in check_edges.items():
        if a != b and frozenset((a, b)) not in bridges:
            on_cycle.add(key)
    return on_cycle


def red_reduce(p: Protograph) -> tuple[RedSubgraph, tuple[RemovalStep, ...]]:
    """Iteratively strip cycles of degree-two variables and degree-one variables.

    Each pass first contracts every degree-two variable into an edge between
    its two checks (a double edge becomes a self-loop) and removes the
    variables on cycles of that multigraph with all their checks; it then
    removes every degree-one variable with its check.  Passes repeat until
    neither rule fires.
    """
    if not p.is_standard:
        raise BlockCheckError("red_reduce needs a standard protograph; use red_reduce_dgldpc")
    alive = set(range(len(p.sockets)))
    trace: list[RemovalStep] = []
    pass_index = 0
    while True:
        changed = False
        for rule in ("cycle", "degree-one"):
            vsocks = _alive_var_sockets(p, alive)
            if rule == "cycle":
                contracted = {
                    j: (p.sockets[s[0]].check, p.sockets[s[1]].check) for j, s in enumerate(vsocks) if len(s) == 2
                }
                victims = sorted(_on_cycle_edges(contracted))
            else:
                victims = [j for j, s in enumerate(vsocks) if len(s) == 1]
            if not victims:
                continue
            checks = sorted({p.sockets[s].check for j in victims for s in vsocks[j]})
            removed = {s for j in victims for s in vsocks[j]}
            removed |= {s for i in checks for s in p.check_sockets[i] if s in alive}
            alive -= removed
            trace.append(RemovalStep(pass_index, rule, tuple(victims), tuple(checks), tuple(sorted(removed))))
            changed = True
        if not changed:
            break
        pass_index += 1
    return RedSubgraph(p, frozenset(alive)), tuple(trace)


# ---------------------------------------------------------------------------
# generalized reducer


@lru_cache(maxsize=4096)
def _node_polynomials(code: BinaryLinearCode, variable_node: bool):
    target = extend_for_variable(code) if variable_node else code
    slots = tuple(range(code.n + 1, target.n + 1))
    return tuple(extrinsic_erasure_polynomial(target, pos) for pos in range(1, code.n + 1)), slots


def _standard_profile(alive_pos: list[int], n_removed: int, variable_node: bool):
    """Least degree and linear terms of repetition / parity nodes in closed form."""
    out = {}
    for pos in alive_pos:
        others = [q for q in alive_pos if q != pos]
        if variable_node:
            # eps * prod(y_others); removed inputs are 1
            deg = len(others)
        elif n_removed:
            deg = 0
        else:
            # 1 - prod(1 - x_others)
            deg = 1 if others else None
        linear = tuple(others) if deg == 1 else ()
        out[pos] = (deg, linear)
    return out


def _polynomial_profile(code: BinaryLinearCode, variable_node: bool, alive_pos: list[int], removed_pos: list[int]):
    polys, slots = _node_polynomials(code, variable_node)
    subst = {q: 1 for q in removed_pos}
    out = {}
    for pos in alive_pos:
        poly = polys[pos - 1]
        if subst:
            poly = poly.substitute({q: v for q, v in subst.items() if q in poly.variables})
        deg, linear = least_degree(poly, slots)
        out[pos] = (deg, tuple(linear))
    return out


def _structural_profile(code: BinaryLinearCode, alive_pos: list[int], removed_pos: list[int]):
    """Low-weight codewords of the residual code through each surviving position.

    Removing an edge erases its message permanently, which for least-degree
    purposes is the same as puncturing that position.
    """
    residual = punctured(code, removed_pos) if removed_pos else code
    keep = [q for q in range(1, code.n + 1) if q not in set(removed_pos)]
    out = {}
    for local, pos in enumerate(keep, start=1):
        if pos not in alive_pos:
            continue
        supports = low_weight_supports(residual, local, 2)
        if any(not s for s in supports):
            out[pos] = (0, ())
        elif supports:
            out[pos] = (1, tuple(sorted(keep[next(iter(s)) - 1] for s in supports)))
        else:
            out[pos] = (2, ())
    return out


def _profiles(p: Protograph, alive: set[int], mode: str):
    """Per-socket (least degree, linear-term sockets) at both endpoints."""
    var_prof: dict[int, tuple] = {}
    check_prof: dict[int, tuple] = {}
    for side in ("var", "check"):
        count = p.num_vars if side == "var" else p.num_checks
        for node in range(count):
            socks = p.var_sockets[node] if side == "var" else p.check_sockets[node]
            if not any(s in alive for s in socks):
                continue
            pmap = p.var_position_map(node) if side == "var" else p.check_position_map(node)
            sock_of = dict(zip(pmap, socks))
            alive_pos = [q for q, s in sock_of.items() if s in alive]
            removed_pos = [q for q, s in sock_of.items() if s not in alive]
            generalized = (p.var_code if side == "var" else p.check_code)[node] is not None
            if generalized or mode == "polynomial-all":
                code = p.var_component(node) if side == "var" else p.check_component(node)
            if generalized:
                if mode == "standard-only":
                    continue
                if mode == "structural":
                    prof = _structural_profile(code, alive_pos, removed_pos)
                else:
                    prof = _polynomial_profile(code, side == "var", alive_pos, removed_pos)
            elif mode == "structural":
                continue
            elif mode == "polynomial-all":
                prof = _polynomial_profile(code, side == "var", alive_pos, removed_pos)
            else:
                prof = _standard_profile(alive_pos, len(removed_pos), side == "var")
            target = var_prof if side == "var" else check_prof
            for pos, (deg, linear) in prof.items():
                target[sock_of[pos]] = (deg, tuple(sock_of[q] for q in linear))
    return var_prof, check_prof


def _classify(var_prof, check_prof) -> tuple[set[int], set[int], set[int]]:
    e1v = {s for s, (d, _) in var_prof.items() if d == 0}
    e1c = {s for s, (d, _) in check_prof.items() if d == 0}
    dep = nx.DiGraph()
    for s, (d, linear) in var_prof.items():
        if d == 1:
            dep.add_edges_from((("y", f), ("x", s)) for f in linear)
    for s, (d, linear) in check_prof.items():
        if d == 1:
            dep.add_edges_from((("x", f), ("y", s)) for f in linear)
    e2: set[int] = set()
    for comp in nx.strongly_connected_components(dep):
        if len(comp) > 1:
            e2 |= {s for _, s in comp}
    return e1v, e1c, e2


def classify_edges(p: Protograph, alive: Iterable[int] | None = None, mode: str = "polynomial") -> EdgeClassification:
    """E1 (least degree zero at either endpoint) and E2 (self-sustaining degree-one loops).

    E2 collects every edge whose message lies in a nontrivial strongly
    connected component of the graph of degree-one dependencies: ``x_e``
    depends on ``y_f`` when the variable function of ``e`` has least degree
    one and contains the linear term ``y_f``; symmetrically at checks.
    """
    alive = set(range(len(p.sockets))) if alive is None else set(alive)
    e1v, e1c, e2 = _classify(*_profiles(p, alive, mode))
    return EdgeClassification(frozenset(e1v | e1c), frozenset(e2))


def _reduce_generalized(p: Protograph, alive: set[int], mode: str, trace: list[RemovalStep], start_pass: int):
    pass_index = start_pass
    while True:
        e1v, e1c, e2 = _classify(*_profiles(p, alive, mode))
        e1c -= e1v
        e2 -= e1v | e1c
        if not (e1v or e1c or e2):
            return pass_index
        for rule, socks in (("E1v", e1v), ("E1c", e1c), ("E2", e2)):
            if socks:
                sk = tuple(sorted(socks))
                trace.append(
                    RemovalStep(
                        pass_index,
                        rule,
                        tuple(sorted({p.sockets[s].var for s in sk})),
                        tuple(sorted({p.sockets[s].check for s in sk})),
                        sk,
                    )
                )
        alive -= e1v | e1c | e2
        pass_index += 1


def min_distance_prepass(p: Protograph) -> tuple[frozenset[int], tuple[RemovalStep, ...]]:
    """Fast structural reduction from low-weight codewords of generalized nodes.

    Weight-one codewords of a residual component code through a position put
    that edge in E1; weight-two codewords supply the degree-one dependencies
    used for E2.  Standard nodes use their closed forms.  The result is a
    subset of what the polynomial reducer removes.
    """
    alive = set(range(len(p.sockets)))
    trace: list[RemovalStep] = []
    _reduce_generalized_mixed(p, alive, trace)
    return frozenset(set(range(len(p.sockets))) - alive), tuple(trace)


def _reduce_generalized_mixed(p: Protograph, alive: set[int], trace: list[RemovalStep]) -> int:
    # structural profiles at generalized nodes, closed forms at standard ones
    pass_index = 0
    while True:
        var_s, check_s = _profiles(p, alive, "structural")
        var_std, check_std = _profiles(p, alive, "standard-only")
        var_prof = {**var_std, **var_s}
        check_prof = {**check_std, **check_s}
        e1v, e1c, e2 = _classify(var_prof, check_prof)
        e1 = e1v | e1c
        gone = (e1 | e2) & alive
        if not gone:
            return pass_index
        sk = tuple(sorted(gone))
        trace.append(
            RemovalStep(
                pass_index,
                "min-distance",
                tuple(sorted({p.sockets[s].var for s in sk})),
                tuple(sorted({p.sockets[s].check for s in sk})),
                sk,
            )
        )
        alive -= gone
        pass_index += 1


def red_reduce_dgldpc(
    p: Protograph, prepass: bool = True, force_polynomial: bool = False
) -> tuple[RedSubgraph, tuple[RemovalStep, ...]]:
    """Reduction for protographs with generalized component codes.

    Every pass classifies the surviving edges from the least-degree profiles
    of each node's extrinsic erasure functions, with removed edges' messages
    replaced by 1, and removes E1 and E2 until nothing changes.
    ``force_polynomial`` evaluates standard nodes through their polynomials as
    well (exponential in node degree; meant for cross-checks on small graphs).
    """
    alive = set(range(len(p.sockets)))
    trace: list[RemovalStep] = []
    start = 0
    if prepass and not p.is_standard:
        start = _reduce_generalized_mixed(p, alive, trace)
    _reduce_generalized(p, alive, "polynomial-all" if force_polynomial else "polynomial", trace, start)
    return RedSubgraph(p, frozenset(alive)), tuple(trace)


# ---------------------------------------------------------------------------
# flag propagation and verdict


def _var_flag_rule(p: Protograph, j: int):
    """Return f(pos, flagged_positions) -> bool for the variable-side flag."""
    code = p.var_code[j]
    if code is None:
        return lambda pos, flagged: any(q != pos for q in flagged)
    ext = extend_for_variable(code)
    slots = set(range(code.n + 1, ext.n + 1))
    everything = set(range(1, code.n + 1))

    def rule(pos, flagged):
        return recoverable_by_rank(ext, pos, (everything - set(flagged) - {pos}) | slots)

    return rule


def _check_flag_rule(p: Protograph, i: int):
    code = p.check_code[i]
    d = int(p.check_degrees[i])
    if code is None:
        return lambda pos, flagged: len([q for q in flagged if q != pos]) == d - 1
    everything = set(range(1, code.n + 1))

    def rule(pos, flagged):
        return recoverable_by_rank(code, pos, everything - set(flagged) - {pos})

    return rule


def propagate_dex(
    p: Protograph, red_edges: Iterable[int], schedule_rng: np.random.Generator | None = None
) -> tuple[frozenset[int], frozenset[int]]:
    """Fixed point of the monotone {0,1} flag recursion seeded by ``red_edges``.

    A variable-to-check flag ``s_e`` switches on when the outgoing message is
    forced to zero by the flagged incoming ones (standard nodes: some other
    socket flagged); a check-to-variable flag ``r_e`` switches on under the
    same rule at the check (standard: every other socket flagged).  Flags
    never switch off.  ``schedule_rng`` randomizes the update order, which
    must not change the result.
    """
    S = len(p.sockets)
    r = np.zeros(S, dtype=bool)
    s = np.zeros(S, dtype=bool)
    r[list(red_edges)] = True
    var_rules = [_var_flag_rule(p, j) for j in range(p.num_vars)]
    check_rules = [_check_flag_rule(p, i) for i in range(p.num_checks)]
    nodes = [("v", j) for j in range(p.num_vars)] + [("c", i) for i in range(p.num_checks)]
    changed = True
    while changed:
        changed = False
        order = range(len(nodes)) if schedule_rng is None else schedule_rng.permutation(len(nodes))
        for k in order:
            kind, idx = nodes[k]
            if kind == "v":
                socks, pmap, flags, out, rule = p.var_sockets[idx], p.var_position_map(idx), r, s, var_rules[idx]
            else:
                socks, pmap, flags, out, rule = p.check_sockets[idx], p.check_position_map(idx), s, r, check_rules[idx]
            flagged = [pmap[t] for t, e in enumerate(socks) if flags[e]]
            for t, e in enumerate(socks):
                if not out[e] and rule(pmap[t], flagged):
                    out[e] = True
                    changed = True
    return frozenset(np.flatnonzero(s).tolist()), frozenset(np.flatnonzero(r).tolist())


def dex_variable_nodes(p: Protograph, Dy: Iterable[int]) -> frozenset[int]:
    """Variable nodes with at least one incoming flagged check message."""
    return frozenset(p.sockets[e].var for e in Dy)


def check_block_condition(
    p: Protograph, required_info: int | None = None, generalized: bool | None = None
) -> BlockCertificate:
    """Run reduction, propagation and the information-placement verdict.

    Any non-punctured variable node may carry information bits; a generalized
    variable node contributes its code dimension.  ``required_info`` defaults
    to the number of information bits of the protograph.
    """
    capacity = design_rate(p).info_bits
    if required_info is None:
        required_info = capacity
    if required_info < 0 or required_info > capacity:
        raise BlockCheckError(f"required_info={required_info} outside [0, {capacity}]")
    use_general = (not p.is_standard) if generalized is None else generalized
    red, trace = red_reduce_dgldpc(p) if use_general else red_reduce(p)
    Dx, Dy = propagate_dex(p, red.edges)
    dex = dex_variable_nodes(p, Dy)
    available = sum(p.var_info_bits(j) for j in dex if j not in p.punctured)
    return BlockCertificate(
        red.edges, Dx, Dy, dex, available >= required_info, required_info, available, trace, use_general
    )


def red_base_matrix(red: RedSubgraph) -> np.ndarray:
    """Multiplicity matrix of the surviving nodes in original index order."""
    rows, cols = red.checks, red.variables
    out = np.zeros((len(rows), len(cols)), dtype=np.int64)
    ri = {c: k for k, c in enumerate(rows)}
    ci = {v: k for k, v in enumerate(cols)}
    for e in red.edges:
        sock = red.protograph.sockets[e]
        out[ri[sock.check], ci[sock.var]] += 1
    return out


# ---------------------------------------------------------------------------
# serialization


def certificate_to_dict(p: Protograph, cert: BlockCertificate) -> dict:
    def triples(edges):
        return [list(p.sockets[e].key) for e in sorted(edges)]

    return {
        "verdict": cert.verdict,
        "required_info": cert.required_info,
        "available_info": cert.available_info,
        "generalized_reducer": cert.generalized_reducer,
        "red_edges": triples(cert.red_edges),
        "Dx": triples(cert.Dx),
        "Dy": triples(cert.Dy),
        "dex_vars": sorted(cert.dex_vars),
        "removal_trace": [
            {
                "pass": st.pass_index,
                "rule": st.rule,
                "variables": list(st.variables),
                "checks": list(st.checks),
                "edges": triples(st.sockets),
            }
            for st in cert.removal_trace
        ],
    }


def save_certificate(p: Protograph, cert: BlockCertificate, path: str | Path) -> None:
    Path(path).write_text(json.dumps(certificate_to_dict(p, cert), indent=2) + "\n")


def load_base_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a base matrix stored as comma-separated integers, one row per line.

    A file containing ``-1`` entries is read as a shift table, where ``-1``
    marks an absent edge and any other entry a single edge.
    """
    with open(path, newline="") as fh:
        rows = [[int(tok) for tok in row if tok.strip()] for row in csv.reader(fh) if row]
    arr = np.asarray(rows, dtype=np.int64)
    if (arr < 0).any():
        return (arr >= 0).astype(np.int64)
    return arr
