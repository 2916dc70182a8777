"""Brute-force ground truth for tiny instances.

* exhaustive enumeration of satisfying assignments (plus an independent
  bit-parallel counter used as a cross-check),
* clustering of solutions into connected components of the graph whose
  edges join assignments at Hamming distance 1, with per-cluster warnings,
* exhaustive enumeration of warning-propagation fixed points, i.e. survey
  fixed points restricted to the three pure vectors T, I, F,
* an exact two-pass survey recursion on forests.
"""
from __future__ import annotations

import csv
import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .instance import FactorGraph, Instance
from .sp import MessageState
from .survey import IDENTITY, ContradictionError, Survey, literal_flip, normalize, product_all

MAX_ENUM_VARS = 26
MAX_WARNING_EDGES = 12


class SizeGuardError(ValueError):
    """The instance is too large for an exhaustive sweep."""


class WarningValue(enum.IntEnum):
    TRUE = 0
    UNKNOWN = 1
    FALSE = 2

    @property
    def letter(self) -> str:
        return "TIF"[self.value]


# --- solutions --------------------------------------------------------

def _literal_columns(inst: Instance):
    """Per clause: arrays of variable indices and their signs."""
    return [(np.array([l.var for l in c]), np.array([l.negated for l in c])) for c in inst.clauses]


def exhaustive_solutions(inst: Instance, chunk_bits: int = 16) -> np.ndarray:
    """All satisfying assignments as a bool array of shape ``(S, n_vars)``.

    Rows are in lexicographic order with variable 0 most significant and
    false before true.
    """
    n = inst.n_vars
    if n > MAX_ENUM_VARS:
        raise SizeGuardError(f"exhaustive enumeration needs n_vars <= {MAX_ENUM_VARS}, got {n}")
    cols = _literal_columns(inst)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    step = 1 << min(chunk_bits, n)
    found = []
    for start in range(0, 1 << n, step):
        codes = np.arange(start, min(start + step, 1 << n), dtype=np.int64)
        x = ((codes[:, None] >> shifts[None, :]) & 1).astype(bool)
        ok = np.ones(codes.size, dtype=bool)
        for vars_, negs in cols:
            ok &= (x[:, vars_] != negs).any(axis=1)
        found.append(x[ok])
    return np.concatenate(found) if found else np.zeros((0, n), dtype=bool)


def count_solutions_bitparallel(inst: Instance) -> int:
    """Solution count using Python integers as truth tables over all 2^n assignments."""
    n = inst.n_vars
    if n > MAX_ENUM_VARS:
        raise SizeGuardError(f"exhaustive counting needs n_vars <= {MAX_ENUM_VARS}, got {n}")
    size = 1 << n
    full = (1 << size) - 1
    tables = []
    for i in range(n):
        # bit a of the table is the value of variable i under assignment code a
        period = 1 << (n - 1 - i)
        block = ((1 << period) - 1) << period
        width = 2 * period
        while width < size:
            block |= block << width
            width *= 2
        tables.append(block)
    acc = full
    for c in inst.clauses:
        sat = 0
        for lit in c:
            sat |= (full ^ tables[lit.var]) if lit.negated else tables[lit.var]
        acc &= sat
    return acc.bit_count()


# --- clusters ---------------------------------------------------------

@dataclass(frozen=True)
class Cluster:
    members: np.ndarray  # (k, n) bool, lexicographic order
    warnings: tuple  # WarningValue per variable


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple

    def __len__(self) -> int:
        return len(self.clusters)

    def warning_assignments(self) -> list:
        return [c.warnings for c in self.clusters]


def cluster_warnings(members: np.ndarray) -> tuple:
    """TRUE where every member is true, FALSE where every member is false, else UNKNOWN."""
    all_true = members.all(axis=0)
    all_false = ~members.any(axis=0)
    return tuple(WarningValue.TRUE if t else WarningValue.FALSE if f else WarningValue.UNKNOWN
                 for t, f in zip(all_true.tolist(), all_false.tolist()))


def cluster_solutions(solutions) -> ClusterSet:
    """Connected components of the Hamming-distance-1 graph on ``solutions``.

    Clusters are ordered by their lexicographically first member.
    """
    sols = np.asarray(solutions, dtype=bool)
    if sols.ndim != 2 or sols.shape[0] == 0:
        raise ValueError("cluster_solutions needs a nonempty 2-d list of assignments")
    n = sols.shape[1]
    codes = (sols.astype(np.int64) << np.arange(n - 1, -1, -1, dtype=np.int64)).sum(axis=1).tolist()
    index = {code: k for k, code in enumerate(codes)}
    if len(index) != len(codes):
        raise ValueError("duplicate assignments in solution list")
    parent = list(range(len(codes)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k, code in enumerate(codes):
        for b in range(n):
            j = index.get(code ^ (1 << b))
            if j is not None and j > k:
                ra, rb = find(k), find(j)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for k in range(len(codes)):
        groups.setdefault(find(k), []).append(k)
    clusters = []
    for ids in sorted(groups.values(), key=lambda g: min(codes[k] for k in g)):
        ids = sorted(ids, key=lambda k: codes[k])
        members = sols[ids]
        clusters.append(Cluster(members, cluster_warnings(members)))
    return ClusterSet(tuple(clusters))


# --- warning-propagation fixed points --------------------------------

@dataclass(frozen=True)
class WarningFixedPoint:
    edges: tuple  # WarningValue per node->clause edge, factor-graph edge order
    node_warnings: tuple  # WarningValue per variable from the full product
    trivial: bool
    legal: bool  # node warnings equal some cluster's warning assignment


def enumerate_warning_fixed_points(inst: Instance, clusters: ClusterSet | None = None) -> list:
    """Every {T, I, F} assignment of node->clause edges that is a fixed point of the survey equations.

    Assignments in which some cavity or full node product vanishes (a
    variable warned both ways) are excluded. ``clusters`` defaults to the
    clusters of the exhaustive solution set and is used only for the
    ``legal`` flag. Results are in lexicographic order of the edge values.
    """
    g = FactorGraph.from_instance(inst)
    e_count = g.n_edges
    if e_count > MAX_WARNING_EDGES:
        raise SizeGuardError(f"warning enumeration needs <= {MAX_WARNING_EDGES} edges, got {e_count}")
    if clusters is None:
        sols = exhaustive_solutions(inst)
        clusters = cluster_solutions(sols) if len(sols) else ClusterSet(())
    legal_set = set(clusters.warning_assignments())

    # all 3^E candidates, edge 0 most significant
    powers = 3 ** np.arange(e_count - 1, -1, -1, dtype=np.int64)
    cand = ((np.arange(3 ** e_count, dtype=np.int64)[:, None] // powers[None, :]) % 3).astype(np.int8)
    n_cand = cand.shape[0]
    neg = g.edge_neg
    # literal forced false: F on a positive literal, T on a negated one
    forced_false = np.where(neg[None, :], cand == WarningValue.TRUE, cand == WarningValue.FALSE)
    # warn[:, e]: clause of e forces edge_var[e] to satisfy it
    warn = np.ones((n_cand, e_count), dtype=bool)
    for c in range(g.n_clauses):
        lo, hi = int(g.clause_ptr[c]), int(g.clause_ptr[c + 1])
        for e in range(lo, hi):
            for e2 in range(lo, hi):
                if e2 != e:
                    warn[:, e] &= forced_false[:, e2]
    toward_true = warn & ~neg[None, :]
    toward_false = warn & neg[None, :]

    ok = np.ones(n_cand, dtype=bool)
    node = np.full((n_cand, g.n_vars), WarningValue.UNKNOWN, dtype=np.int8)
    for i in range(g.n_vars):
        edges = g.var_edge_ids(i)
        if edges.size == 0:
            continue
        t_all = toward_true[:, edges]
        f_all = toward_false[:, edges]
        nt, nf = t_all.sum(axis=1), f_all.sum(axis=1)
        ok &= ~((nt > 0) & (nf > 0))
        node[:, i] = np.where(nt > 0, WarningValue.TRUE, np.where(nf > 0, WarningValue.FALSE, WarningValue.UNKNOWN))
        for k, e in enumerate(edges):
            ct = nt - t_all[:, k]
            cf = nf - f_all[:, k]
            ok &= ~((ct > 0) & (cf > 0))
            expected = np.where(ct > 0, WarningValue.TRUE, np.where(cf > 0, WarningValue.FALSE, WarningValue.UNKNOWN))
            ok &= cand[:, e] == expected
    out = []
    for r in np.flatnonzero(ok):
        edges = tuple(WarningValue(int(v)) for v in cand[r])
        nw = tuple(WarningValue(int(v)) for v in node[r])
        out.append(WarningFixedPoint(edges, nw, all(w is WarningValue.UNKNOWN for w in edges), nw in legal_set))
    return out


# --- exact recursion on forests --------------------------------------

def tree_exact_sp(inst: Instance) -> MessageState:
    """Exact survey messages on a forest by one upward and one downward pass.

    Raises ValueError if the factor graph has a cycle and
    ContradictionError if some cavity product vanishes.
    """
    g = FactorGraph.from_instance(inst)
    if not g.is_forest():
        raise ValueError("tree_exact_sp needs an acyclic factor graph")
    s = np.tile(np.asarray(IDENTITY, dtype=float), (g.n_edges, 1))
    u = np.tile(np.asarray(IDENTITY, dtype=float), (g.n_edges, 1))

    def u_msg(e):
        c = int(g.edge_clause[e])
        f = 1.0
        for e2 in range(int(g.clause_ptr[c]), int(g.clause_ptr[c + 1])):
            if e2 != e:
                f *= literal_flip(s[e2], bool(g.edge_neg[e2])).f
        return literal_flip(Survey(f, 1.0 - f, 0.0), bool(g.edge_neg[e]))

    def s_msg(e):
        i = int(g.edge_var[e])
        v, logz = product_all(Survey(*u[e2]) for e2 in g.var_edge_ids(i) if e2 != e)
        if logz == -math.inf:
            raise ContradictionError(f"cavity product at variable {i} vanishes")
        return normalize(v)

    # nodes: variables 0..n-1, clauses n..n+m-1; BFS from the smallest node of each component
    n = g.n_vars
    seen = np.zeros(n + g.n_clauses, dtype=bool)
    order = []  # (node, edge to parent or -1)
    for root in range(n + g.n_clauses):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([(root, -1)])
        while queue:
            node, up = queue.popleft()
            order.append((node, up))
            if node < n:
                nbrs = [(n + int(g.edge_clause[e]), int(e)) for e in g.var_edge_ids(node)]
            else:
                c = node - n
                nbrs = [(int(g.edge_var[e]), e) for e in range(int(g.clause_ptr[c]), int(g.clause_ptr[c + 1]))]
            for other, e in nbrs:
                if e != up and not seen[other]:
                    seen[other] = True
                    queue.append((other, e))
    # upward: each node sends toward its parent once all children have reported
    for node, up in reversed(order):
        if up < 0:
            continue
        if node < n:
            s[up] = s_msg(up)
        else:
            u[up] = u_msg(up)
    # downward: parents send to children
    for node, up in order:
        if node < n:
            for e in g.var_edge_ids(node):
                if e != up:
                    s[e] = s_msg(int(e))
        else:
            c = node - n
            for e in range(int(g.clause_ptr[c]), int(g.clause_ptr[c + 1])):
                if e != up:
                    u[e] = u_msg(e)
    return MessageState(s, u, None, 0)


# --- golden files -----------------------------------------------------

GOLDEN_FIELDS = ("instance_id", "n_solutions", "n_clusters", "n_warning_fixed_points")


def oracle_counts(inst: Instance) -> dict:
    sols = exhaustive_solutions(inst)
    clusters = cluster_solutions(sols) if len(sols) else ClusterSet(())
    fps = enumerate_warning_fixed_points(inst, clusters)
    return {"n_solutions": len(sols), "n_clusters": len(clusters), "n_warning_fixed_points": len(fps)}


def write_golden_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=GOLDEN_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in GOLDEN_FIELDS})


def read_golden_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{"instance_id": r["instance_id"], **{k: int(r[k]) for k in GOLDEN_FIELDS[1:]}}
                for r in csv.DictReader(fh)]
