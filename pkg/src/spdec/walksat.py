"""WalkSAT for the residual formula left once the surveys become trivial."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .instance import FactorGraph, Instance, verify_assignment


@dataclass
class WalkSatConfig:
    max_flips: int = 10_000_000
    noise: float = 0.5
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")


@dataclass
class WalkSatResult:
    success: bool
    assignment: np.ndarray | None
    flips: int
    restarts_used: int


@njit(cache=True)
def _walksat(n_vars, clause_ptr, lit_var, lit_neg, lit_clause, var_ptr, var_occ, max_flips, noise, seed):
    np.random.seed(seed)
    n_clauses = clause_ptr.size - 1
    x = np.empty(n_vars, dtype=np.bool_)
    for v in range(n_vars):
        x[v] = np.random.random() < 0.5
    true_count = np.zeros(n_clauses, dtype=np.int64)
    unsat = np.empty(n_clauses, dtype=np.int64)
    pos = np.full(n_clauses, -1, dtype=np.int64)
    n_unsat = 0
    for c in range(n_clauses):
        for e in range(clause_ptr[c], clause_ptr[c + 1]):
            if x[lit_var[e]] != lit_neg[e]:
                true_count[c] += 1
        if true_count[c] == 0:
            pos[c] = n_unsat
            unsat[n_unsat] = c
            n_unsat += 1
    flips = 0
    while n_unsat > 0 and flips < max_flips:
        c = unsat[np.random.randint(n_unsat)]
        lo, hi = clause_ptr[c], clause_ptr[c + 1]
        # break counts of the clause members; ties broken uniformly
        v = -1
        best = 1 << 62
        n_best = 0
        for e in range(lo, hi):
            u = lit_var[e]
            brk = 0
            for p in range(var_ptr[u], var_ptr[u + 1]):
                e2 = var_occ[p]
                if x[u] != lit_neg[e2] and true_count[lit_clause[e2]] == 1:
                    brk += 1
            if brk < best:
                best = brk
                v = u
                n_best = 1
            elif brk == best:
                n_best += 1
                if np.random.randint(n_best) == 0:
                    v = u
        if best > 0 and np.random.random() < noise:
            v = lit_var[lo + np.random.randint(hi - lo)]
        x[v] = not x[v]
        flips += 1
        for p in range(var_ptr[v], var_ptr[v + 1]):
            e2 = var_occ[p]
            c2 = lit_clause[e2]
            if x[v] != lit_neg[e2]:
                true_count[c2] += 1
                if true_count[c2] == 1:
                    last = unsat[n_unsat - 1]
                    unsat[pos[c2]] = last
                    pos[last] = pos[c2]
                    pos[c2] = -1
                    n_unsat -= 1
            else:
                true_count[c2] -= 1
                if true_count[c2] == 0:
                    pos[c2] = n_unsat
                    unsat[n_unsat] = c2
                    n_unsat += 1
    return n_unsat == 0, x, flips


def solve_easy(inst: Instance, cfg: WalkSatConfig | None = None) -> WalkSatResult:
    """Search for a satisfying assignment; FAILURE is reported, not raised."""
    cfg = cfg or WalkSatConfig()
    if not inst.clauses:
        return WalkSatResult(True, np.ones(inst.n_vars, dtype=bool), 0, 0)
    g = FactorGraph.from_instance(inst)
    total = 0
    for r in range(max(1, cfg.restarts)):
        seed = int(np.random.SeedSequence([cfg.seed, r]).generate_state(1)[0] % (2**31))
        ok, x, flips = _walksat(inst.n_vars, g.clause_ptr, g.edge_var, g.edge_neg, g.edge_clause, g.var_ptr, g.var_edges,
                                cfg.max_flips, cfg.noise, seed)
        total += flips
        if ok:
            if not verify_assignment(inst, x):
                raise AssertionError("walksat returned an assignment that does not verify")
            return WalkSatResult(True, x.copy(), total, r + 1)
    return WalkSatResult(False, None, total, max(1, cfg.restarts))
