"""Protograph data model, text format, validation and rates.

Indices in the Python API are 0-based.  The text format uses 1-based node
indices in its directives, matching how base matrices are usually listed.

Text format::

    nc nv
    <nc rows of nv nonnegative integers>
    punctured j1 j2 ...
    code NAME n k cw1 cw2 ... cw(2^k)
    vnode j code NAME [labels p1 ... pd]
    cnode i code NAME [labels p1 ... pd]

Lines starting with ``#`` are comments.  Labels give, for each socket of the
node in socket order, the component-code position it is attached to.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .component import BinaryLinearCode, CodeError, builtin_code, enumerate_codewords, repetition, single_parity_check


class ProtographFormatError(ValueError):
    """Syntax or consistency error in a protograph file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeSocket:
    """One protograph edge: copy ``copy`` of the bundle between ``check`` and ``var``.

    Positions are the 0-based order of the socket among the sockets of each
    endpoint; sockets at a node are ordered by (peer index, copy).
    """

    check: int
    var: int
    copy: int
    check_position: int
    var_position: int

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.check, self.var, self.copy)


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    message: str
    location: str = ""


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]


@dataclass(frozen=True)
class RateInfo:
    design: Fraction
    transmitted: Fraction
    info_bits: int
    transmitted_bits: int


@dataclass(frozen=True, eq=False)
class Protograph:
    """Base matrix with node roles.

    ``var_code[j]`` / ``check_code[i]`` is ``None`` for standard nodes
    (repetition / single parity check of the node degree).  ``var_labels``
    and ``check_labels`` hold, for generalized nodes, the 1-based code
    position of each socket in socket order; ``None`` means identity.
    """

    base: np.ndarray
    punctured: frozenset[int] = frozenset()
    var_code: tuple[BinaryLinearCode | None, ...] = ()
    check_code: tuple[BinaryLinearCode | None, ...] = ()
    var_labels: tuple[tuple[int, ...] | None, ...] = ()
    check_labels: tuple[tuple[int, ...] | None, ...] = ()

    def __post_init__(self):
        base = np.array(self.base, dtype=np.int64, copy=True)
        if base.ndim != 2:
            raise ValueError("base matrix must be two-dimensional")
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        nc, nv = base.shape
        object.__setattr__(self, "punctured", frozenset(int(j) for j in self.punctured))
        for name, size in (("var_code", nv), ("check_code", nc), ("var_labels", nv), ("check_labels", nc)):
            val = tuple(getattr(self, name)) or (None,) * size
            if len(val) != size:
                raise ValueError(f"{name} has length {len(val)}, expected {size}")
            object.__setattr__(self, name, val)

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[int]], punctured: Iterable[int] = ()) -> Protograph:
        return cls(np.asarray(rows, dtype=np.int64), frozenset(punctured))

    @property
    def num_checks(self) -> int:
        return self.base.shape[0]

    @property
    def num_vars(self) -> int:
        return self.base.shape[1]

    @property
    def var_degrees(self) -> np.ndarray:
        return self.base.sum(axis=0)

    @property
    def check_degrees(self) -> np.ndarray:
        return self.base.sum(axis=1)

    @property
    def is_standard(self) -> bool:
        return all(c is None for c in self.var_code) and all(c is None for c in self.check_code)

    @cached_property
    def sockets(self) -> tuple[EdgeSocket, ...]:
        """All edge sockets ordered by (check, var, copy)."""
        nc, nv = self.base.shape
        var_pos = [0] * nv
        # var positions follow (check, copy) order, which is the same traversal
        out = []
        for i in range(nc):
            cpos = 0
            for j in range(nv):
                for c in range(int(self.base[i, j])):
                    out.append(EdgeSocket(i, j, c, cpos, var_pos[j]))
                    cpos += 1
                    var_pos[j] += 1
        return tuple(out)

    @cached_property
    def var_sockets(self) -> tuple[tuple[int, ...], ...]:
        """Socket indices at each variable node, in var-position order."""
        buckets: list[list[tuple[int, int]]] = [[] for _ in range(self.num_vars)]
        for s, sock in enumerate(self.sockets):
            buckets[sock.var].append((sock.var_position, s))
        return tuple(tuple(s for _, s in sorted(b)) for b in buckets)

    @cached_property
    def check_sockets(self) -> tuple[tuple[int, ...], ...]:
        buckets: list[list[tuple[int, int]]] = [[] for _ in range(self.num_checks)]
        for s, sock in enumerate(self.sockets):
            buckets[sock.check].append((sock.check_position, s))
        return tuple(tuple(s for _, s in sorted(b)) for b in buckets)

    @cached_property
    def socket_index(self) -> Mapping[tuple[int, int, int], int]:
        return {sock.key: s for s, sock in enumerate(self.sockets)}

    def var_component(self, j: int) -> BinaryLinearCode:
        """Component code enforced at variable ``j`` (repetition if standard)."""
        code = self.var_code[j]
        return code if code is not None else repetition(max(int(self.var_degrees[j]), 1))

    def check_component(self, i: int) -> BinaryLinearCode:
        code = self.check_code[i]
        return code if code is not None else single_parity_check(max(int(self.check_degrees[i]), 1))

    def var_info_bits(self, j: int) -> int:
        code = self.var_code[j]
        return 1 if code is None else code.k

    def check_redundancy(self, i: int) -> int:
        code = self.check_code[i]
        return 1 if code is None else code.n - code.k

    def var_position_map(self, j: int) -> tuple[int, ...]:
        """1-based code position for each socket of variable ``j``."""
        lab = self.var_labels[j]
        return lab if lab is not None else tuple(range(1, int(self.var_degrees[j]) + 1))

    def check_position_map(self, i: int) -> tuple[int, ...]:
        lab = self.check_labels[i]
        return lab if lab is not None else tuple(range(1, int(self.check_degrees[i]) + 1))

    def with_base(self, base: np.ndarray) -> Protograph:
        """Same roles and codes with a new base matrix; labels are dropped."""
        return Protograph(base, self.punctured, self.var_code, self.check_code)

    def __eq__(self, other):
        if not isinstance(other, Protograph):
            return NotImplemented
        return serialize_protograph(self) == serialize_protograph(other)

    def __hash__(self):
        return hash(serialize_protograph(self))


# ---------------------------------------------------------------------------
# validation


def _is_permutation(labels: Sequence[int], n: int) -> bool:
    return sorted(labels) == list(range(1, n + 1))


def validate(p: Protograph) -> ValidationReport:
    """Report every invariant violation of ``p``; never raises."""
    issues: list[Issue] = []
    base = p.base
    if base.size == 0:
        issues.append(Issue("error", "empty base matrix"))
        return ValidationReport(tuple(issues))
    if (base < 0).any():
        i, j = np.argwhere(base < 0)[0]
        issues.append(Issue("error", "negative multiplicity", f"({i + 1},{j + 1})"))
    nc, nv = base.shape
    for j in sorted(p.punctured):
        if not 0 <= j < nv:
            issues.append(Issue("error", f"punctured index {j + 1} is not a variable node", f"v{j + 1}"))
    if all(j in p.punctured for j in range(nv)):
        issues.append(Issue("error", "every variable node is punctured"))
    vdeg, cdeg = p.var_degrees, p.check_degrees
    for j in range(nv):
        if vdeg[j] == 0:
            issues.append(Issue("warning", "variable node has degree 0", f"v{j + 1}"))
        code = p.var_code[j]
        if code is not None and code.n != vdeg[j]:
            issues.append(Issue("error", f"degree {vdeg[j]} != code length {code.n}", f"v{j + 1}"))
        lab = p.var_labels[j]
        if lab is not None and not _is_permutation(lab, int(vdeg[j])):
            issues.append(Issue("error", "socket labels are not a bijection onto code positions", f"v{j + 1}"))
        if lab is not None and code is None:
            issues.append(Issue("warning", "labels on a standard node are ignored", f"v{j + 1}"))
    for i in range(nc):
        if cdeg[i] == 0:
            issues.append(Issue("warning", "check node has degree 0", f"c{i + 1}"))
        code = p.check_code[i]
        if code is not None and code.n != cdeg[i]:
            issues.append(Issue("error", f"degree {cdeg[i]} != code length {code.n}", f"c{i + 1}"))
        lab = p.check_labels[i]
        if lab is not None and not _is_permutation(lab, int(cdeg[i])):
            issues.append(Issue("error", "socket labels are not a bijection onto code positions", f"c{i + 1}"))
        if lab is not None and code is None:
            issues.append(Issue("warning", "labels on a standard node are ignored", f"c{i + 1}"))
    return ValidationReport(tuple(issues))


def design_rate(p: Protograph) -> RateInfo:
    """Design rate and transmitted rate.

    design = 1 - sum(d_c - k_c) / sum(k_v); transmitted divides the same
    number of information bits by the channel bits actually sent (punctured
    variable nodes excluded).
    """
    k_total = sum(p.var_info_bits(j) for j in range(p.num_vars))
    redundancy = sum(p.check_redundancy(i) for i in range(p.num_checks))
    info = k_total - redundancy
    sent = sum(p.var_info_bits(j) for j in range(p.num_vars) if j not in p.punctured)
    if info <= 0 or sent <= 0:
        raise RateError("overconstrained protograph: nonpositive rate")
    return RateInfo(Fraction(info, k_total), Fraction(info, sent), info, sent)


# ---------------------------------------------------------------------------
# text format


def _parse_int(tok: str, line: int, col: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ProtographFormatError(f"expected integer {what}, got {tok!r}", line, col) from None


def _tokens(text: str) -> list[tuple[int, list[tuple[int, str]]]]:
    out = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("#") or not raw.strip():
            continue
        stripped = raw
        toks = []
        col = 0
        for tok in stripped.split():
            col = stripped.index(tok, col)
            toks.append((col + 1, tok))
            col += len(tok)
        out.append((ln, toks))
    return out


def parse_protograph(text: str) -> Protograph:
    """Parse the protograph text format.

    Raises
    ------
    ProtographFormatError
        Syntax errors, dimension mismatches, unknown code names, and socket
        labels that are not a bijection.
    """
    lines = _tokens(text)
    if not lines:
        raise ProtographFormatError("empty protograph file")
    ln, toks = lines[0]
    if len(toks) != 2:
        raise ProtographFormatError("header must be 'num_checks num_vars'", ln, 1)
    nc = _parse_int(toks[0][1], ln, toks[0][0], "num_checks")
    nv = _parse_int(toks[1][1], ln, toks[1][0], "num_vars")
    if nc < 1 or nv < 1:
        raise ProtographFormatError("dimensions must be positive", ln, 1)
    if len(lines) < 1 + nc:
        raise ProtographFormatError(f"expected {nc} matrix rows, found {len(lines) - 1}", lines[-1][0])
    rows = []
    for ln, toks in lines[1 : 1 + nc]:
        if len(toks) != nv:
            raise ProtographFormatError(f"row has {len(toks)} entries, expected {nv}", ln, 1)
        row = []
        for col, tok in toks:
            v = _parse_int(tok, ln, col, "multiplicity")
            if v < 0:
                raise ProtographFormatError("negative multiplicity", ln, col)
            row.append(v)
        rows.append(row)
    base = np.array(rows, dtype=np.int64)
    vdeg, cdeg = base.sum(axis=0), base.sum(axis=1)

    punctured: set[int] = set()
    declared: dict[str, BinaryLinearCode] = {}
    var_code: list[BinaryLinearCode | None] = [None] * nv
    check_code: list[BinaryLinearCode | None] = [None] * nc
    var_labels: list[tuple[int, ...] | None] = [None] * nv
    check_labels: list[tuple[int, ...] | None] = [None] * nc

    def resolve(name: str, ln: int, col: int) -> BinaryLinearCode:
        if name in declared:
            return declared[name]
        try:
            return builtin_code(name)
        except CodeError:
            raise ProtographFormatError(f"unknown code {name!r}", ln, col) from None

    for ln, toks in lines[1 + nc :]:
        kw = toks[0][1]
        if kw == "punctured":
            for col, tok in toks[1:]:
                j = _parse_int(tok, ln, col, "variable index")
                if not 1 <= j <= nv:
                    raise ProtographFormatError(f"punctured index {j} outside 1..{nv}", ln, col)
                punctured.add(j - 1)
        elif kw == "code":
            if len(toks) < 4:
                raise ProtographFormatError("code directive needs NAME n k codewords...", ln, toks[0][0])
            name = toks[1][1]
            n = _parse_int(toks[2][1], ln, toks[2][0], "code length")
            k = _parse_int(toks[3][1], ln, toks[3][0], "code dimension")
            words = [tok for _, tok in toks[4:]]
            if len(words) != 1 << k:
                raise ProtographFormatError(f"code {name} lists {len(words)} codewords, expected {1 << k}", ln, toks[0][0])
            try:
                code = BinaryLinearCode.from_codewords(n, words, name)
            except CodeError as exc:
                raise ProtographFormatError(str(exc), ln, toks[0][0]) from None
            if code.k != k:
                raise ProtographFormatError(f"code {name} has dimension {code.k}, declared {k}", ln, toks[0][0])
            declared[name] = code
        elif kw in ("vnode", "cnode"):
            if len(toks) < 4 or toks[2][1] != "code":
                raise ProtographFormatError(f"expected '{kw} INDEX code NAME [labels ...]'", ln, toks[0][0])
            idx = _parse_int(toks[1][1], ln, toks[1][0], "node index")
            limit = nv if kw == "vnode" else nc
            if not 1 <= idx <= limit:
                raise ProtographFormatError(f"{kw} index {idx} outside 1..{limit}", ln, toks[1][0])
            code = resolve(toks[3][1], ln, toks[3][0])
            degree = int(vdeg[idx - 1] if kw == "vnode" else cdeg[idx - 1])
            if code.n != degree:
                raise ProtographFormatError(
                    f"{kw} {idx} has degree {degree} but code {toks[3][1]} has length {code.n}", ln, toks[3][0]
                )
            labels = None
            if len(toks) > 4:
                if toks[4][1] != "labels":
                    raise ProtographFormatError("expected 'labels'", ln, toks[4][0])
                labels = tuple(_parse_int(tok, ln, col, "label") for col, tok in toks[5:])
                if not _is_permutation(labels, degree):
                    raise ProtographFormatError(f"labels of {kw} {idx} are not a bijection onto 1..{degree}", ln, toks[4][0])
            if kw == "vnode":
                var_code[idx - 1], var_labels[idx - 1] = code, labels
            else:
                check_code[idx - 1], check_labels[idx - 1] = code, labels
        else:
            raise ProtographFormatError(f"unknown directive {kw!r}", ln, toks[0][0])

    return Protograph(base, frozenset(punctured), tuple(var_code), tuple(check_code), tuple(var_labels), tuple(check_labels))


def serialize_protograph(p: Protograph) -> str:
    """Canonical text form; ``parse_protograph`` inverts it exactly."""
    nc, nv = p.base.shape
    out = [f"{nc} {nv}"]
    out += [" ".join(str(int(v)) for v in row) for row in p.base]
    if p.punctured:
        out.append("punctured " + " ".join(str(j + 1) for j in sorted(p.punctured)))
    names: dict[str, BinaryLinearCode] = {}
    for code in list(p.var_code) + list(p.check_code):
        if code is not None:
            names.setdefault(_code_name(code), code)
    for name, code in sorted(names.items()):
        out.append(f"code {name} {code.n} {code.k} " + " ".join(enumerate_codewords(code)))

    def node_line(kind, idx, code, labels):
        line = f"{kind} {idx + 1} code {_code_name(code)}"
        if labels is not None:
            line += " labels " + " ".join(map(str, labels))
        return line

    for j, code in enumerate(p.var_code):
        if code is not None:
            out.append(node_line("vnode", j, code, p.var_labels[j]))
    for i, code in enumerate(p.check_code):
        if code is not None:
            out.append(node_line("cnode", i, code, p.check_labels[i]))
    return "\n".join(out) + "\n"


def _code_name(code: BinaryLinearCode) -> str:
    if code.name and code.name.replace("_", "").replace("-", "").isalnum():
        return code.name
    return "g" + "".join(enumerate_codewords(code)[1:2]) + f"_{code.n}_{code.k}"


def load_protograph(path: str | Path) -> Protograph:
    return parse_protograph(Path(path).read_text(encoding="utf-8"))


def save_protograph(p: Protograph, path: str | Path) -> None:
    Path(path).write_text(serialize_protograph(p), encoding="utf-8")


# ---------------------------------------------------------------------------
# row listings


def parse_row_listing(text: str, shape: tuple[int, int]) -> np.ndarray:
    """Build a base matrix from ``i: j1, j2^m, ...`` row listings (1-based).

    ``j^m`` sets multiplicity ``m`` at column ``j``; a bare ``j`` means 1.
    """
    base = np.zeros(shape, dtype=np.int64)
    for raw in text.replace(";", "\n").splitlines():
        raw = raw.strip()
        if not raw:
            continue
        head, _, body = raw.partition(":")
        i = int(head) - 1
        for item in body.replace(".", " ").replace(",", " ").split():
            col, _, mult = item.partition("^")
            base[i, int(col) - 1] = int(mult) if mult else 1
    return base
