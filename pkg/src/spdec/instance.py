"""K-SAT instances, DIMACS I/O, unit-propagating simplification and the factor graph."""
from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

UNSET = -1


class ParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class Literal(NamedTuple):
    """``negated=False`` means the clause is satisfied by ``var`` being true."""

    var: int
    negated: bool = False

    def satisfied_by(self, value: bool) -> bool:
        return value != self.negated


Clause = tuple  # tuple[Literal, ...]


def make_clause(literals: Iterable) -> Clause:
    """Build a clause, merging repeated literals.

    Accepts ``Literal`` objects or ``(var, negated)`` pairs. A variable
    occurring with both signs is rejected.
    """
    seen: dict[int, bool] = {}
    out = []
    for lit in literals:
        var, neg = int(lit[0]), bool(lit[1])
        if var in seen:
            if seen[var] != neg:
                raise ValueError(f"variable {var} appears with both signs in one clause")
            continue
        seen[var] = neg
        out.append(Literal(var, neg))
    if not out:
        raise ValueError("empty clause")
    return tuple(out)


@dataclass(frozen=True)
class Instance:
    n_vars: int
    clauses: tuple
    # original id of each local variable; None means identity
    var_ids: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_vars < 0:
            raise ValueError("n_vars must be non-negative")
        for c in self.clauses:
            for lit in c:
                if not 0 <= lit.var < self.n_vars:
                    raise ValueError(f"literal {lit} out of range for {self.n_vars} variables")
        if self.var_ids is not None and len(self.var_ids) != self.n_vars:
            raise ValueError("var_ids length must equal n_vars")

    @classmethod
    def from_lists(cls, n_vars: int, clauses: Iterable[Iterable]) -> "Instance":
        return cls(n_vars, tuple(make_clause(c) for c in clauses))

    @classmethod
    def from_dimacs_ints(cls, n_vars: int, clauses: Iterable[Iterable[int]]) -> "Instance":
        return cls.from_lists(n_vars, ([(abs(x) - 1, x < 0) for x in c] for c in clauses))

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    @property
    def alpha(self) -> float:
        return len(self.clauses) / self.n_vars if self.n_vars > 0 else 0.0

    def original_id(self, var: int) -> int:
        return var if self.var_ids is None else self.var_ids[var]

    def clause_sizes(self) -> list[int]:
        return [len(c) for c in self.clauses]


def generate_random(n: int, alpha: float, k: int = 3, seed=None) -> Instance:
    """Random K-SAT: ``round(alpha*n)`` clauses of ``k`` distinct variables, fair signs."""
    if k < 1 or n < k:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    m = int(round(alpha * n))
    rng = np.random.default_rng(seed)
    vars_ = rng.integers(0, n, size=(m, k))
    # resample rows with a repeated variable
    while m:
        srt = np.sort(vars_, axis=1)
        bad = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1)) if k > 1 else np.empty(0, int)
        if bad.size == 0:
            break
        vars_[bad] = rng.integers(0, n, size=(bad.size, k))
    negs = rng.random((m, k)) < 0.5
    clauses = tuple(
        tuple(Literal(int(v), bool(s)) for v, s in zip(row_v, row_s))
        for row_v, row_s in zip(vars_.tolist(), negs.tolist())
    )
    return Instance(n, clauses)


def parse_dimacs(text) -> Instance:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    header = None
    clauses: list[list[int]] = []
    current: list[int] = []
    lineno = 0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            if header is not None:
                raise ParseError("duplicate problem line", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"malformed problem line {line!r}", lineno)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ParseError(f"malformed problem line {line!r}", lineno) from None
            if header[0] < 0 or header[1] < 0:
                raise ParseError("negative counts in problem line", lineno)
            continue
        if header is None:
            raise ParseError("clause before problem line", lineno)
        for tok in line.split():
            try:
                x = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", lineno) from None
            if x == 0:
                if not current:
                    raise ParseError("empty clause", lineno)
                clauses.append(current)
                current = []
            elif abs(x) > header[0]:
                raise ParseError(f"literal {x} out of range (n={header[0]})", lineno)
            else:
                current.append(x)
    if header is None:
        raise ParseError("missing problem line", lineno or None)
    if current:
        raise ParseError("last clause not terminated by 0", lineno)
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}", lineno)
    try:
        return Instance.from_dimacs_ints(header[0], clauses)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def write_dimacs(inst: Instance) -> str:
    lines = [f"p cnf {inst.n_vars} {len(inst.clauses)}"]
    for c in inst.clauses:
        lines.append(" ".join(str(-(l.var + 1) if l.negated else l.var + 1) for l in c) + " 0")
    return "\n".join(lines) + "\n"


def as_assignment(values, n: int | None = None) -> np.ndarray:
    """Coerce booleans / ``None`` / int codes into an int8 array (``UNSET`` = -1)."""
    if isinstance(values, np.ndarray) and values.dtype != object:
        arr = values.astype(np.int8)
    else:
        arr = np.array([UNSET if v is None else int(bool(v)) for v in values], dtype=np.int8)
    if n is not None and arr.shape != (n,):
        raise ValueError(f"assignment has length {arr.size}, expected {n}")
    return arr


def verify_assignment(inst: Instance, a) -> bool:
    vals = as_assignment(a, inst.n_vars)
    if (vals == UNSET).any():
        raise ValueError("assignment has unset variables")
    for c in inst.clauses:
        if not any(bool(vals[l.var]) != l.negated for l in c):
            return False
    return True


@dataclass
class SimplifyResult:
    contradiction: bool
    instance: Instance | None
    forced: dict  # original id -> bool, including the fixed variable itself


def fix_variable(inst: Instance, var: int, value: bool) -> SimplifyResult:
    """Fix ``var`` (local index) and simplify by unit propagation to a fixpoint.

    The reduced instance drops every assigned variable; its ``var_ids`` map
    local indices back to the ids of the instance the chain started from.
    """
    if not 0 <= var < inst.n_vars:
        raise ValueError(f"variable {var} out of range")
    occ: list[list[int]] = [[] for _ in range(inst.n_vars)]
    for ci, c in enumerate(inst.clauses):
        for lit in c:
            occ[lit.var].append(ci)
    satisfied = [False] * len(inst.clauses)
    remaining = [len(c) for c in inst.clauses]
    assign: dict[int, bool] = {}
    queue: deque = deque([(var, bool(value))])
    for ci, c in enumerate(inst.clauses):
        if len(c) == 1:
            queue.append((c[0].var, not c[0].negated))

    def _contradiction():
        return SimplifyResult(True, None, {inst.original_id(v): b for v, b in assign.items()})

    while queue:
        v, b = queue.popleft()
        if v in assign:
            if assign[v] != b:
                return _contradiction()
            continue
        assign[v] = b
        for ci in occ[v]:
            if satisfied[ci]:
                continue
            c = inst.clauses[ci]
            if any(l.var == v and l.satisfied_by(b) for l in c):
                satisfied[ci] = True
                continue
            remaining[ci] -= 1
            if remaining[ci] == 0:
                return _contradiction()
            if remaining[ci] == 1:
                last = next(l for l in c if l.var not in assign)
                queue.append((last.var, not last.negated))

    keep = [v for v in range(inst.n_vars) if v not in assign]
    local = {v: j for j, v in enumerate(keep)}
    clauses = tuple(
        tuple(Literal(local[l.var], l.negated) for l in c if l.var not in assign)
        for ci, c in enumerate(inst.clauses)
        if not satisfied[ci]
    )
    ids = tuple(inst.original_id(v) for v in keep)
    reduced = Instance(len(keep), clauses, ids)
    return SimplifyResult(False, reduced, {inst.original_id(v): b for v, b in assign.items()})


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """CSR factor graph. Edge ``e`` is the incidence of ``edge_var[e]`` in ``edge_clause[e]``.

    Edges are numbered clause by clause in literal order, so the edges of
    clause ``c`` are ``clause_ptr[c]:clause_ptr[c+1]``; ``var_edges`` lists
    edge ids grouped by variable with offsets ``var_ptr``.
    """

    n_vars: int
    n_clauses: int
    clause_ptr: np.ndarray
    edge_var: np.ndarray
    edge_neg: np.ndarray
    edge_clause: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray

    @classmethod
    def from_instance(cls, inst: Instance) -> "FactorGraph":
        sizes = np.fromiter((len(c) for c in inst.clauses), dtype=np.int64, count=len(inst.clauses))
        clause_ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=clause_ptr[1:])
        n_edges = int(clause_ptr[-1])
        edge_var = np.fromiter((l.var for c in inst.clauses for l in c), dtype=np.int64, count=n_edges)
        edge_neg = np.fromiter((l.negated for c in inst.clauses for l in c), dtype=np.bool_, count=n_edges)
        edge_clause = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)
        var_edges = np.argsort(edge_var, kind="stable").astype(np.int64)
        var_ptr = np.zeros(inst.n_vars + 1, dtype=np.int64)
        np.cumsum(np.bincount(edge_var, minlength=inst.n_vars), out=var_ptr[1:])
        return cls(inst.n_vars, len(sizes), clause_ptr, edge_var, edge_neg, edge_clause, var_ptr, var_edges)

    @property
    def n_edges(self) -> int:
        return int(self.edge_var.size)

    @cached_property
    def sweep_index(self) -> tuple:
        """Compact int32 copies used by the sweep kernel: ``(var_ptr, var_edges, cb)``.

        ``cb[e]`` holds the edge range of the clause containing edge ``e``.
        """
        cb = np.empty((self.n_edges, 2), dtype=np.int32)
        cb[:, 0] = self.clause_ptr[self.edge_clause]
        cb[:, 1] = self.clause_ptr[self.edge_clause + 1]
        return self.var_ptr.astype(np.int32), self.var_edges.astype(np.int32), cb

    def clause_edges(self, c: int) -> np.ndarray:
        return np.arange(self.clause_ptr[c], self.clause_ptr[c + 1])

    def var_edge_ids(self, i: int) -> np.ndarray:
        return self.var_edges[self.var_ptr[i]:self.var_ptr[i + 1]]

    def clauses_of(self, i: int) -> np.ndarray:
        return self.edge_clause[self.var_edge_ids(i)]

    def members(self, c: int) -> np.ndarray:
        return self.edge_var[self.clause_ptr[c]:self.clause_ptr[c + 1]]

    def edge(self, i: int, c: int) -> int:
        for e in range(self.clause_ptr[c], self.clause_ptr[c + 1]):
            if self.edge_var[e] == i:
                return int(e)
        raise KeyError(f"variable {i} is not in clause {c}")

    def is_forest(self) -> bool:
        """True iff the bipartite variable/clause graph has no cycle."""
        parent = list(range(self.n_vars + self.n_clauses))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in range(self.n_edges):
            a, b = find(int(self.edge_var[e])), find(self.n_vars + int(self.edge_clause[e]))
            if a == b:
                return False
            parent[a] = b
        return True
