"""Differential-evolution search over base matrices.

Candidates are scored by their BEC threshold (or, on the AWGN channel, by
the negated EXIT threshold in dB) and only candidates that pass the
block-error certificate may win a selection.  Each candidate index of each
generation draws from its own random stream, so the search is reproducible
and independent of how many worker processes evaluate the population.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blockcheck import check_block_condition
from .de import bec_threshold
from .pexit import PexitError, awgn_threshold
from .protograph import Protograph, RateError

SEARCH_PRECISION = 1e-3
FINAL_PRECISION = 1e-4
AWGN_SEARCH_PRECISION_DB = 0.01
REPAIR_CAP = 64
RESAMPLE_CAP = 200


class OptimizerError(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    """Search settings.

    ``template`` fixes the size, component codes at generalized nodes and
    punctured columns; its base matrix is ignored.  ``population_size``
    defaults to the number of entries of the base matrix.
    """

    template: Protograph
    population_size: int | None = None
    entry_max: int = 8
    mutation_factor: float = 0.5
    crossover_prob: float = 0.88
    generations: int = 6000
    rng_seed: int = 0
    channel: str = "bec"
    jobs: int = 1

    def __post_init__(self):
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover probability must lie in [0, 1]")
        if self.entry_max < 1:
            raise ValueError("entry_max must be at least 1")
        if self.channel not in ("bec", "awgn"):
            raise ValueError("channel must be 'bec' or 'awgn'")
        if self.population_size is None:
            self.population_size = self.template.num_checks * self.template.num_vars
        if self.population_size < 4:
            raise ValueError("population needs at least 4 members")


@dataclass(frozen=True)
class Candidate:
    protograph: Protograph
    threshold: float
    certificate_ok: bool

    @property
    def score(self) -> float:
        """Larger is better: the erasure threshold, or minus the Eb/N0 threshold."""
        return self.threshold if not math.isnan(self.threshold) else -math.inf


@dataclass
class OptimizeResult:
    best: Candidate
    history: list[Candidate] = field(default_factory=list)
    final_threshold: float | None = None
    initial_best: Candidate | None = None


# ---------------------------------------------------------------------------
# structure helpers


def _stream(seed: int, generation: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, generation, index]))


def _general_rows(t: Protograph) -> list[int]:
    return [i for i, c in enumerate(t.check_code) if c is not None]


def _general_cols(t: Protograph) -> list[int]:
    return [j for j, c in enumerate(t.var_code) if c is not None]


def _fix_line(line: np.ndarray, allowed: np.ndarray, target: int, cap: int, rng) -> None:
    """Add or remove single edges at random allowed cells until the sum hits ``target``."""
    line[~allowed] = 0
    while line.sum() < target:
        cells = np.flatnonzero(allowed & (line < cap))
        line[rng.choice(cells)] += 1
    while line.sum() > target:
        cells = np.flatnonzero(line > 0)
        line[rng.choice(cells)] -= 1


def enforce_degrees(base: np.ndarray, t: Protograph, cap: int, rng) -> np.ndarray:
    """Make generalized rows/columns sum to their code lengths.

    Cells where a generalized check meets a generalized variable are kept
    empty, so the two kinds of constraint never compete.
    """
    out = np.array(base, dtype=np.int64)
    grows, gcols = _general_rows(t), _general_cols(t)
    col_ok = np.ones(t.num_vars, dtype=bool)
    col_ok[gcols] = False
    row_ok = np.ones(t.num_checks, dtype=bool)
    row_ok[grows] = False
    for i in grows:
        _fix_line(out[i], col_ok, t.check_code[i].n, cap, rng)
    for j in gcols:
        col = out[:, j].copy()
        _fix_line(col, row_ok, t.var_code[j].n, cap, rng)
        out[:, j] = col
    return out


def _random_labels(t: Protograph, rng) -> tuple[tuple, tuple]:
    vl = tuple(tuple(int(x) + 1 for x in rng.permutation(c.n)) if c is not None else None for c in t.var_code)
    cl = tuple(tuple(int(x) + 1 for x in rng.permutation(c.n)) if c is not None else None for c in t.check_code)
    return vl, cl


def _build(t: Protograph, base: np.ndarray, var_labels=(), check_labels=()) -> Protograph:
    return Protograph(base, t.punctured, t.var_code, t.check_code, var_labels, check_labels)


# ---------------------------------------------------------------------------
# evaluation


def certified(p: Protograph) -> bool:
    if (p.var_degrees == 0).any():
        return False
    try:
        return check_block_condition(p).verdict
    except (RateError, ValueError):
        return False


def evaluate(p: Protograph, channel: str = "bec", precision: float | None = None) -> Candidate:
    """Threshold and certificate of one protograph."""
    ok = certified(p)
    if channel == "bec":
        th = bec_threshold(p, precision or SEARCH_PRECISION).threshold
    else:
        try:
            th = -awgn_threshold(p, precision or AWGN_SEARCH_PRECISION_DB).threshold_db
        except PexitError:
            th = math.nan
    return Candidate(p, th, ok)


def _evaluate_args(args):
    return evaluate(*args)


def repair(p: Protograph, cap: int, rng, attempts: int = REPAIR_CAP) -> Protograph | None:
    """Add edges at random between low-degree standard variables and standard checks.

    Edges go from a degree-0, 1 or 2 standard variable node to a random
    standard check node until the certificate passes.
    """
    t = p
    base = np.array(p.base)
    std_rows = [i for i in range(p.num_checks) if p.check_code[i] is None]
    for _ in range(attempts):
        cand = _build(t, base, p.var_labels, p.check_labels)
        if certified(cand):
            return cand
        deg = base.sum(axis=0)
        low = [j for j in range(p.num_vars) if p.var_code[j] is None and deg[j] <= 2]
        if not low or not std_rows:
            return None
        j = int(rng.choice(low))
        rows = [i for i in std_rows if base[i, j] < cap]
        if not rows:
            return None
        base[int(rng.choice(rows)), j] += 1
    cand = _build(t, base, p.var_labels, p.check_labels)
    return cand if certified(cand) else None


# ---------------------------------------------------------------------------
# operators


def init_population(cfg: OptimizerConfig) -> list[Protograph]:
    t = cfg.template
    pop = []
    for k in range(cfg.population_size):
        rng = _stream(cfg.rng_seed, 0, k)
        for _ in range(RESAMPLE_CAP):
            base = rng.integers(0, cfg.entry_max + 1, size=t.base.shape)
            base = enforce_degrees(base, t, cfg.entry_max, rng)
            vl, cl = _random_labels(t, rng)
            fixed = repair(_build(t, base, vl, cl), cfg.entry_max, rng)
            if fixed is not None:
                pop.append(fixed)
                break
        else:
            raise OptimizerError(f"could not produce a certified initial candidate {k}")
    return pop


def mutate(b1: np.ndarray, b2: np.ndarray, b3: np.ndarray, F: float = 0.5, entry_max: int = 8) -> np.ndarray:
    """``clamp(round(|b1 + F (b2 - b3)|), 0, entry_max)`` entrywise."""
    raw = np.abs(np.asarray(b1) + F * (np.asarray(b2, dtype=float) - np.asarray(b3)))
    # round half away from zero on non-negative values
    return np.clip(np.floor(raw + 0.5).astype(np.int64), 0, entry_max)


def pick_donors(n: int, k: int, rng) -> tuple[int, int, int]:
    choices = [i for i in range(n) if i != k]
    r = rng.choice(choices, size=3, replace=False)
    return int(r[0]), int(r[1]), int(r[2])


def crossover(parent: Protograph, mutant: np.ndarray, rng, p_c: float) -> Protograph:
    """Take each entry from the mutant with probability ``p_c``.

    Generalized nodes whose entries changed get fresh random socket labels;
    the others keep the parent's.
    """
    mask = rng.random(parent.base.shape) < p_c
    base = np.where(mask, mutant, parent.base)
    vl = list(parent.var_labels)
    cl = list(parent.check_labels)
    changed = base != parent.base
    for j, c in enumerate(parent.var_code):
        if c is not None and changed[:, j].any():
            vl[j] = tuple(int(x) + 1 for x in rng.permutation(c.n))
    for i, c in enumerate(parent.check_code):
        if c is not None and changed[i].any():
            cl[i] = tuple(int(x) + 1 for x in rng.permutation(c.n))
    return _build(parent, base, tuple(vl), tuple(cl))


def select(parent: Candidate, child: Candidate) -> Candidate:
    """Keep the better certified candidate; the parent wins when neither is certified."""
    if parent.certificate_ok and child.certificate_ok:
        return child if child.score > parent.score else parent
    if child.certificate_ok:
        return child
    return parent


# ---------------------------------------------------------------------------
# driver


def optimize(cfg: OptimizerConfig, progress=None) -> OptimizeResult:
    """Run the search; ``history[g]`` is the best certified candidate after generation ``g``.

    ``history[0]`` is the best of the initial population.  The winner is
    re-evaluated at the final precision.
    """
    cache: dict[bytes, Candidate] = {}
    t = cfg.template

    def key(p: Protograph) -> bytes:
        return p.base.tobytes() + repr((p.var_labels, p.check_labels)).encode()

    pool = ProcessPoolExecutor(max_workers=cfg.jobs) if cfg.jobs > 1 else None

    def evaluate_all(protos: list[Protograph]) -> list[Candidate]:
        todo = list({key(p): p for p in protos if key(p) not in cache}.values())
        args = [(p, cfg.channel, None) for p in todo]
        results = list(pool.map(_evaluate_args, args)) if pool else [_evaluate_args(a) for a in args]
        for p, c in zip(todo, results):
            cache[key(p)] = c
        return [Candidate(p, cache[key(p)].threshold, cache[key(p)].certificate_ok) for p in protos]

    try:
        pop = evaluate_all(init_population(cfg))
        best = max((c for c in pop if c.certificate_ok), key=lambda c: c.score)
        result = OptimizeResult(best, [best], initial_best=best)
        n = len(pop)
        for g in range(1, cfg.generations + 1):
            children = []
            for k in range(n):
                rng = _stream(cfg.rng_seed, g, k)
                r1, r2, r3 = pick_donors(n, k, rng)
                m = mutate(pop[r1].protograph.base, pop[r2].protograph.base, pop[r3].protograph.base,
                           cfg.mutation_factor, cfg.entry_max)
                child = crossover(pop[k].protograph, m, rng, cfg.crossover_prob)
                child = _build(child, enforce_degrees(child.base, t, cfg.entry_max, rng),
                               child.var_labels, child.check_labels)
                children.append(child)
            evaluated = evaluate_all(children)
            pop = [select(pop[k], evaluated[k]) for k in range(n)]
            gen_best = max((c for c in pop if c.certificate_ok), key=lambda c: c.score)
            if gen_best.score > best.score:
                best = gen_best
            result.history.append(best)
            if progress is not None:
                progress(g, best)
        result.best = best
        final = evaluate(best.protograph, cfg.channel,
                         FINAL_PRECISION if cfg.channel == "bec" else AWGN_SEARCH_PRECISION_DB / 10)
        result.final_threshold = final.threshold if cfg.channel == "bec" else -final.threshold
        return result
    finally:
        if pool:
            pool.shutdown()
