"""Quasi-cyclic lifting, girth, alist I/O and Monte-Carlo erasure decoding.

A lift of size ``Z`` replaces variable type ``j`` by nodes ``(j, t)`` and check
type ``i`` by nodes ``(i, r)``, ``t, r`` in ``0..Z-1``.  A protograph edge with
circulant shift ``k`` connects ``(j, t)`` to ``(i, (t + k) mod Z)``.  Column
``j*Z + t`` and row ``i*Z + r`` are the corresponding matrix indices.
"""

from __future__ import annotations

import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .protograph import Protograph, parse_protograph, serialize_protograph

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


SIM_BLOCK = 1000
DEFAULT_MAX_BLOCK_ERRORS = 200


class LiftError(ValueError):
    pass


@dataclass(frozen=True)
class LiftedCode:
    """Sparse parity-check matrix given by its edge list.

    ``shifts[s]`` is the circulant shift of protograph socket ``s`` when the
    code came from :func:`lift`; codes read from a bare alist file have no
    protograph, ``Z`` or shifts.
    """

    n: int
    m: int
    edge_rows: np.ndarray
    edge_cols: np.ndarray
    punctured_columns: frozenset[int] = frozenset()
    Z: int | None = None
    shifts: tuple[int, ...] | None = None
    protograph: Protograph | None = None
    _csr: dict = field(default_factory=dict, repr=False, compare=False)

    def _build(self):
        if not self._csr:
            order = np.lexsort((self.edge_cols, self.edge_rows))
            chk_ptr = np.zeros(self.m + 1, dtype=np.int64)
            np.add.at(chk_ptr, self.edge_rows + 1, 1)
            self._csr["chk_ptr"] = np.cumsum(chk_ptr)
            self._csr["chk_idx"] = self.edge_cols[order].astype(np.int64)
            order = np.lexsort((self.edge_rows, self.edge_cols))
            var_ptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(var_ptr, self.edge_cols + 1, 1)
            self._csr["var_ptr"] = np.cumsum(var_ptr)
            self._csr["var_idx"] = self.edge_rows[order].astype(np.int64)
        return self._csr

    @property
    def check_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        c = self._build()
        return c["chk_ptr"], c["chk_idx"]

    @property
    def var_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        c = self._build()
        return c["var_ptr"], c["var_idx"]

    @property
    def column_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_cols, minlength=self.n)

    @property
    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_rows, minlength=self.m)

    def dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        h[self.edge_rows, self.edge_cols] = 1
        return h

    @property
    def transmitted_mask(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.punctured_columns)] = False
        return mask


def from_dense(h: np.ndarray, punctured_columns=()) -> LiftedCode:
    h = np.asarray(h)
    rows, cols = np.nonzero(h)
    return LiftedCode(h.shape[1], h.shape[0], rows.astype(np.int64), cols.astype(np.int64), frozenset(punctured_columns))


# ---------------------------------------------------------------------------
# lifting


def _check_distances(var_edges, check_edges, nv: int, nc: int, Z: int, src: int) -> np.ndarray:
    """BFS distances (in edges) from variable ``(src, 0)`` to every check copy; -1 if unreachable."""
    dist = np.full((nc, Z), -1, dtype=np.int64)
    seen_v = np.zeros((nv, Z), dtype=bool)
    seen_c = np.zeros((nc, Z), dtype=bool)
    front_v = np.zeros((nv, Z), dtype=bool)
    front_v[src, 0] = seen_v[src, 0] = True
    level = 0
    while front_v.any():
        front_c = np.zeros((nc, Z), dtype=bool)
        for j in np.flatnonzero(front_v.any(axis=1)):
            for i, k in var_edges[j]:
                front_c[i] |= np.roll(front_v[j], k)
        front_c &= ~seen_c
        level += 1
        dist[front_c] = level
        seen_c |= front_c
        front_v = np.zeros((nv, Z), dtype=bool)
        for i in np.flatnonzero(front_c.any(axis=1)):
            for j, k in check_edges[i]:
                front_v[j] |= np.roll(front_c[i], -k)
        front_v &= ~seen_v
        seen_v |= front_v
        level += 1
    return dist


def lift(p: Protograph, Z: int, rng: np.random.Generator | None = None) -> LiftedCode:
    """Circulant lift with greedy girth-aware shift selection.

    Variable types are visited in order of increasing degree.  For each socket
    the shift is chosen so the new edge closes the longest possible cycle
    (or none): a BFS from variable copy 0 scores every candidate check copy.
    Ties go to the smallest shift, or to a uniformly random one when ``rng``
    is given.  Parallel edges of one bundle get distinct shifts.
    """
    if not p.is_standard:
        raise LiftError("lifting supports standard protographs only")
    if Z < 1:
        raise LiftError("lift size must be positive")
    if Z < int(p.base.max(initial=0)):
        raise LiftError(f"Z={Z} cannot separate {int(p.base.max())} parallel edges")
    nc, nv = p.num_checks, p.num_vars
    var_edges: list[list[tuple[int, int]]] = [[] for _ in range(nv)]
    check_edges: list[list[tuple[int, int]]] = [[] for _ in range(nc)]
    shifts = np.zeros(len(p.sockets), dtype=np.int64)
    order = sorted(range(nv), key=lambda j: (int(p.var_degrees[j]), j))
    for j in order:
        for s in p.var_sockets[j]:
            i = p.sockets[s].check
            used = {k for (ii, k) in var_edges[j] if ii == i}
            dist = _check_distances(var_edges, check_edges, nv, nc, Z, j)[i]
            score = np.where(dist < 0, np.iinfo(np.int64).max, dist)
            if used:
                score[list(used)] = -1
            best = np.flatnonzero(score == score.max())
            k = int(best[0] if rng is None else rng.choice(best))
            shifts[s] = k
            var_edges[j].append((i, k))
            check_edges[i].append((j, k))
    rows, cols = [], []
    t = np.arange(Z)
    for s, sock in enumerate(p.sockets):
        cols.append(sock.var * Z + t)
        rows.append(sock.check * Z + (t + shifts[s]) % Z)
    rows_a = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols_a = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    punct = frozenset(int(j * Z + tt) for j in p.punctured for tt in range(Z))
    return LiftedCode(nv * Z, nc * Z, rows_a, cols_a, punct, Z, tuple(int(k) for k in shifts), p)


# ---------------------------------------------------------------------------
# girth


def _shortest_cycle_through(start: int, var_ptr, var_idx, chk_ptr, chk_idx, n: int) -> int:
    # nodes: variables 0..n-1, checks n..n+m-1
    dist = {start: 0}
    parent = {start: -1}
    best = math.inf
    queue = deque([start])
    while queue:
        a = queue.popleft()
        if 2 * dist[a] >= best:
            break
        if a < n:
            nbrs = (int(c) + n for c in var_idx[var_ptr[a] : var_ptr[a + 1]])
        else:
            nbrs = (int(v) for v in chk_idx[chk_ptr[a - n] : chk_ptr[a - n + 1]])
        for b in nbrs:
            if b not in dist:
                dist[b] = dist[a] + 1
                parent[b] = a
                queue.append(b)
            elif parent[a] != b:
                best = min(best, dist[a] + dist[b] + 1)
    return best


def girth(code: LiftedCode) -> int:
    """Length of the shortest cycle of the Tanner graph, 0 for a forest.

    Lifted codes are quasi-cyclic, so one BFS per variable type suffices.
    """
    var_ptr, var_idx = code.var_adjacency
    chk_ptr, chk_idx = code.check_adjacency
    if code.Z is not None and code.protograph is not None:
        starts = [j * code.Z for j in range(code.protograph.num_vars)]
    else:
        starts = range(code.n)
    best = math.inf
    for u in starts:
        best = min(best, _shortest_cycle_through(u, var_ptr, var_idx, chk_ptr, chk_idx, code.n))
    return 0 if best == math.inf else int(best)


# ---------------------------------------------------------------------------
# alist I/O


def write_alist(code: LiftedCode, path: str | Path) -> None:
    """Write the MacKay alist file plus a ``.json`` sidecar with lift metadata."""
    var_ptr, var_idx = code.var_adjacency
    chk_ptr, chk_idx = code.check_adjacency
    cdeg, rdeg = code.column_degrees, code.row_degrees
    lines = [f"{code.n} {code.m}", f"{int(cdeg.max(initial=0))} {int(rdeg.max(initial=0))}"]
    lines.append(" ".join(map(str, cdeg)))
    lines.append(" ".join(map(str, rdeg)))
    wc, wr = int(cdeg.max(initial=0)), int(rdeg.max(initial=0))
    for j in range(code.n):
        entries = [int(r) + 1 for r in var_idx[var_ptr[j] : var_ptr[j + 1]]]
        lines.append(" ".join(map(str, entries + [0] * (wc - len(entries)))))
    for i in range(code.m):
        entries = [int(c) + 1 for c in chk_idx[chk_ptr[i] : chk_ptr[i + 1]]]
        lines.append(" ".join(map(str, entries + [0] * (wr - len(entries)))))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "punctured_columns": sorted(code.punctured_columns),
        "Z": code.Z,
        "shifts": None,
        "protograph": None,
    }
    if code.protograph is not None and code.shifts is not None:
        meta["shifts"] = [[*code.protograph.sockets[s].key, k] for s, k in enumerate(code.shifts)]
        meta["protograph"] = serialize_protograph(code.protograph)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def read_alist(path: str | Path) -> LiftedCode:
    path = Path(path)
    nums = [[int(t) for t in ln.split()] for ln in path.read_text().splitlines() if ln.strip()]
    try:
        n, m = nums[0][:2]
        col_lists = nums[4 : 4 + n]
        if len(col_lists) != n:
            raise IndexError
    except (IndexError, ValueError) as exc:
        raise LiftError(f"{path}: malformed alist file") from exc
    rows, cols = [], []
    for j, entries in enumerate(col_lists):
        for r in entries:
            if r > 0:
                rows.append(r - 1)
                cols.append(j)
    punct: frozenset[int] = frozenset()
    Z = shifts = proto = None
    side = Path(str(path) + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
        punct = frozenset(meta.get("punctured_columns") or ())
        Z = meta.get("Z")
        if meta.get("protograph"):
            proto = parse_protograph(meta["protograph"])
            idx = proto.socket_index
            sh = [0] * len(proto.sockets)
            for c, v, cp, k in meta["shifts"]:
                sh[idx[(c, v, cp)]] = k
            shifts = tuple(sh)
    return LiftedCode(n, m, np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64), punct, Z, shifts, proto)


# ---------------------------------------------------------------------------
# decoders


@njit(cache=True)
def _peel(erased, chk_ptr, chk_idx, var_ptr, var_idx):
    """Peeling decoder; ``erased`` is modified in place to the residual erasures."""
    m = chk_ptr.shape[0] - 1
    count = np.zeros(m, dtype=np.int64)
    for c in range(m):
        for e in range(chk_ptr[c], chk_ptr[c + 1]):
            if erased[chk_idx[e]]:
                count[c] += 1
    stack = np.empty(m, dtype=np.int64)
    top = 0
    for c in range(m):
        if count[c] == 1:
            stack[top] = c
            top += 1
    while top > 0:
        top -= 1
        c = stack[top]
        if count[c] != 1:
            continue
        v = -1
        for e in range(chk_ptr[c], chk_ptr[c + 1]):
            if erased[chk_idx[e]]:
                v = chk_idx[e]
                break
        if v < 0:
            continue
        erased[v] = False
        for e in range(var_ptr[v], var_ptr[v + 1]):
            c2 = var_idx[e]
            count[c2] -= 1
            if count[c2] == 1:
                stack[top] = c2
                top += 1
    return erased


@njit(cache=True)
def _simulate_block(erasures, punct_mask, chk_ptr, chk_idx, var_ptr, var_idx):
    trials, n = erasures.shape
    bit_err = 0
    blk_err = 0
    for t in range(trials):
        e = erasures[t].copy()
        for j in range(n):
            if punct_mask[j]:
                e[j] = True
        _peel(e, chk_ptr, chk_idx, var_ptr, var_idx)
        any_left = False
        for j in range(n):
            if e[j]:
                any_left = True
                if not punct_mask[j]:
                    bit_err += 1
        if any_left:
            blk_err += 1
    return bit_err, blk_err


def peel_decode(code: LiftedCode, erased: np.ndarray) -> np.ndarray:
    """Residual erasures after peeling (punctured columns are not added here)."""
    chk_ptr, chk_idx = code.check_adjacency
    var_ptr, var_idx = code.var_adjacency
    return _peel(np.array(erased, dtype=np.bool_), chk_ptr, chk_idx, var_ptr, var_idx)


def message_passing_decode(code: LiftedCode, erased: np.ndarray, max_iter: int | None = None) -> np.ndarray:
    """Flooding erasure message passing; returns residual erasures at the fixpoint.

    A check-to-variable message is known when all other incoming messages are
    known; a variable-to-check message is known when the channel value or any
    other incoming check message is known.
    """
    rows, cols = code.edge_rows, code.edge_cols
    channel_known = ~np.asarray(erased, dtype=bool)
    v2c = channel_known[cols].copy()
    c2v = np.zeros_like(v2c)
    limit = max_iter if max_iter is not None else len(rows) + 2
    for _ in range(limit):
        unknown_per_check = np.bincount(rows, weights=~v2c, minlength=code.m)
        new_c2v = (unknown_per_check[rows] - (~v2c)) == 0
        known_per_var = np.bincount(cols, weights=new_c2v, minlength=code.n)
        new_v2c = channel_known[cols] | ((known_per_var[cols] - new_c2v) > 0)
        if np.array_equal(new_c2v, c2v) and np.array_equal(new_v2c, v2c):
            break
        c2v, v2c = new_c2v, new_v2c
    known = channel_known | (np.bincount(cols, weights=c2v, minlength=code.n) > 0)
    return ~known


def is_stopping_set(code: LiftedCode, support: np.ndarray) -> bool:
    """True if no check sees exactly one position of ``support``."""
    support = np.asarray(support, dtype=bool)
    hits = np.bincount(code.edge_rows, weights=support[code.edge_cols], minlength=code.m)
    return not np.any(hits == 1)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class SimResult:
    epsilon: float
    trials: int
    bit_errors: int
    block_errors: int
    ber: float
    fer: float
    fer_ci: tuple[float, float]
    ber_ci: tuple[float, float]
    transmitted_bits: int


def _run_block(args):
    code_arrays, punct_mask, eps, seed, block, size = args
    chk_ptr, chk_idx, var_ptr, var_idx, n = code_arrays
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    erasures = rng.random((size, n)) < eps
    return _simulate_block(erasures, punct_mask, chk_ptr, chk_idx, var_ptr, var_idx)


def _wilson(k: int, n: int) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def simulate_bec(
    code: LiftedCode,
    epsilon: float,
    trials: int,
    seed: int = 0,
    jobs: int = 1,
    max_block_errors: int | None = DEFAULT_MAX_BLOCK_ERRORS,
) -> SimResult:
    """All-zero-codeword erasure simulation with the peeling decoder.

    Trials run in blocks of 1000, block ``b`` drawing from the stream
    ``SeedSequence([seed, b])``, so results do not depend on ``jobs``.  With
    ``max_block_errors`` set, the run stops after the first block at which the
    block-error count reaches it.  Punctured positions start erased and are
    excluded from the bit-error count; a block error is any erasure left.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    chk_ptr, chk_idx = code.check_adjacency
    var_ptr, var_idx = code.var_adjacency
    arrays = (chk_ptr, chk_idx, var_ptr, var_idx, code.n)
    punct_mask = ~code.transmitted_mask
    n_blocks = -(-trials // SIM_BLOCK)
    sizes = [min(SIM_BLOCK, trials - b * SIM_BLOCK) for b in range(n_blocks)]
    done_trials = bit_err = blk_err = 0
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        b = 0
        while b < n_blocks:
            batch = list(range(b, min(n_blocks, b + max(jobs, 1))))
            args = [(arrays, punct_mask, float(epsilon), int(seed), bb, sizes[bb]) for bb in batch]
            results = list(pool.map(_run_block, args)) if pool else [_run_block(a) for a in args]
            stop = False
            for bb, (be, fe) in zip(batch, results):
                done_trials += sizes[bb]
                bit_err += int(be)
                blk_err += int(fe)
                if max_block_errors is not None and blk_err >= max_block_errors:
                    stop = True
                    break
            if stop:
                break
            b = batch[-1] + 1
    finally:
        if pool:
            pool.shutdown()
    tx = int(code.transmitted_mask.sum())
    total_bits = done_trials * tx
    return SimResult(
        float(epsilon),
        done_trials,
        bit_err,
        blk_err,
        bit_err / total_bits if total_bits else 0.0,
        blk_err / done_trials,
        _wilson(blk_err, done_trials),
        _wilson(bit_err, total_bits),
        tx,
    )
