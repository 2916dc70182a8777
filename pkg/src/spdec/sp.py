"""Survey propagation: fixed-point iteration, complexity and decimation estimates.

The heavy lifting happens in :mod:`spdec._kernels`. The per-message
functions here (``clause_message``, ``cavity_survey`` ...) are written
directly on top of :mod:`spdec.survey` and are used as the readable
reference for the kernels and for small instances.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .instance import FactorGraph
from .survey import (
    IDENTITY,
    ContradictionError,
    Survey,
    literal_flip,
    normalize,
    product,
    product_all,
)


class UnsatCertificateError(ArithmeticError):
    """Some clause is violated with certainty (its complexity term is -inf)."""


class SPStatus(str, enum.Enum):
    CONVERGED_NONTRIVIAL = "CONVERGED_NONTRIVIAL"
    CONVERGED_TRIVIAL = "CONVERGED_TRIVIAL"
    NO_CONVERGENCE = "NO_CONVERGENCE"
    CONTRADICTION = "CONTRADICTION"
    UNSAT_CERTIFICATE = "UNSAT_CERTIFICATE"

    @property
    def converged(self) -> bool:
        return self in (SPStatus.CONVERGED_NONTRIVIAL, SPStatus.CONVERGED_TRIVIAL)


class InitMode(str, enum.Enum):
    RANDOM = "random"
    TRIVIAL_PERTURBED = "trivial-perturbed"


@dataclass
class SPConfig:
    tol: float = 1e-3
    max_sweeps: int = 1000
    damping: float = 0.0
    init: InitMode = InitMode.RANDOM
    trivial_threshold: float = 1e-8
    # Below this max(s_T, s_F) a converged state is followed until it either
    # reaches trivial_threshold or settles (residual < 1e-3 * tol).
    collapse_probe: float = 1e-2

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        self.init = InitMode(self.init)


@dataclass
class MessageState:
    """Directed-edge messages indexed by the factor-graph edge ids.

    ``s_edge[e]`` is the cavity survey sent by ``edge_var[e]`` to
    ``edge_clause[e]``; ``u_edge[e]`` the message travelling back.
    """

    s_edge: np.ndarray
    u_edge: np.ndarray
    seed: int | None = None
    sweeps: int = 0

    def copy(self) -> "MessageState":
        return MessageState(self.s_edge.copy(), self.u_edge.copy(), self.seed, self.sweeps)


@dataclass
class SPResult:
    status: SPStatus
    sweeps: int
    residual: float
    sigma: float | None = None


def all_live(graph: FactorGraph) -> np.ndarray:
    return np.ones(graph.n_edges, dtype=np.bool_)


def init_state(graph: FactorGraph, mode: InitMode = InitMode.RANDOM, seed=None) -> MessageState:
    rng = np.random.default_rng(seed)
    mode = InitMode(mode)
    if mode is InitMode.RANDOM:
        s = rng.dirichlet(np.ones(3), size=graph.n_edges)
    else:
        eps = 1e-2 * rng.random((graph.n_edges, 2))
        s = np.column_stack([eps[:, 0], 1.0 - eps[:, 0] - eps[:, 1], eps[:, 1]])
    u = np.tile(np.array([0.0, 1.0, 0.0]), (graph.n_edges, 1))
    return MessageState(np.ascontiguousarray(s), u, seed, 0)


def _kargs(graph: FactorGraph):
    return graph.var_ptr, graph.var_edges, graph.clause_ptr, graph.edge_clause, graph.edge_neg


def active_variables(graph: FactorGraph, live: np.ndarray) -> np.ndarray:
    """Variables with at least one live edge, in increasing order."""
    counts = np.bincount(graph.edge_var[live], minlength=graph.n_vars)
    return np.flatnonzero(counts)


def sigma_from_state(graph: FactorGraph, state: MessageState, live: np.ndarray | None = None) -> float:
    """Total complexity of the messages in ``state`` (nats), using the kernels."""
    if live is None:
        live = all_live(graph)
    _, lognorm = K.node_surveys(*_kargs(graph), live, state.s_edge)
    if np.isneginf(lognorm).any():
        raise ContradictionError("a node product has zero norm")
    k_live, logs = K.clause_terms(graph.clause_ptr, graph.edge_neg, live, state.s_edge)
    big = k_live >= 2
    if np.isneginf(logs[big]).any():
        raise UnsatCertificateError("a clause is violated with certainty")
    return float(lognorm.sum() - ((k_live[big] - 1) * logs[big]).sum())


def solve(graph: FactorGraph, cfg: SPConfig | None = None, seed=None,
          state: MessageState | None = None, live: np.ndarray | None = None) -> tuple[MessageState, SPResult]:
    """Iterate the survey equations to a fixed point.

    ``state`` is updated in place when given (warm start). ``live`` masks
    the edges that still take part in the formula.
    """
    cfg = cfg or SPConfig()
    if live is None:
        live = all_live(graph)
    if state is None:
        state = init_state(graph, cfg.init, seed)
    rng = np.random.default_rng(seed)
    active = active_variables(graph, live)
    s = state.s_edge
    if active.size == 0:
        state.sweeps += 1
        state.u_edge[:] = IDENTITY
        return state, SPResult(SPStatus.CONVERGED_TRIVIAL, 1, 0.0, 0.0)

    g = graph
    vp, ve, cb = g.sweep_index
    q = K.flipped_f(g.edge_neg, live, s)

    def one_sweep(order):
        return K.sweep(order, vp, ve, cb, g.edge_neg, live, q, s, cfg.damping)

    sweeps = 0
    change = math.inf
    converged = False
    while sweeps < cfg.max_sweeps:
        change, bad = one_sweep(rng.permutation(active))
        sweeps += 1
        if bad >= 0:
            state.sweeps += sweeps
            return state, SPResult(SPStatus.CONTRADICTION, sweeps, change)
        if change < cfg.tol:
            converged = True
            break
    if not converged:
        state.sweeps += sweeps
        return state, SPResult(SPStatus.NO_CONVERGENCE, sweeps, change)

    level = K.trivial_measure(live, s)
    while cfg.trivial_threshold <= level < cfg.collapse_probe and sweeps < cfg.max_sweeps:
        change, bad = one_sweep(rng.permutation(active))
        sweeps += 1
        if bad >= 0:
            state.sweeps += sweeps
            return state, SPResult(SPStatus.CONTRADICTION, sweeps, change)
        level = K.trivial_measure(live, s)
        if change < 1e-3 * cfg.tol:
            break
    state.sweeps += sweeps

    if level < cfg.trivial_threshold:
        s[live] = IDENTITY
        # unit clauses still send pure warnings into an all-I cavity state
        state.u_edge[:] = K.clause_messages(graph.clause_ptr, graph.edge_clause, graph.edge_neg, live, s)
        return state, SPResult(SPStatus.CONVERGED_TRIVIAL, sweeps, change, 0.0)

    state.u_edge[:] = K.clause_messages(graph.clause_ptr, graph.edge_clause, graph.edge_neg, live, s)
    try:
        sigma = sigma_from_state(graph, state, live)
    except ContradictionError:
        return state, SPResult(SPStatus.CONTRADICTION, sweeps, change)
    except UnsatCertificateError:
        return state, SPResult(SPStatus.UNSAT_CERTIFICATE, sweeps, change)
    return state, SPResult(SPStatus.CONVERGED_NONTRIVIAL, sweeps, change, sigma)


def node_survey_array(graph: FactorGraph, state: MessageState, live: np.ndarray | None = None) -> np.ndarray:
    """Normalized node surveys for every variable, shape (n_vars, 3)."""
    if live is None:
        live = all_live(graph)
    surveys, lognorm = K.node_surveys(*_kargs(graph), live, state.s_edge)
    if np.isneginf(lognorm).any():
        raise ContradictionError("a node product has zero norm")
    return surveys


# --- reference implementations on top of the survey algebra -------------

def _live(live, e) -> bool:
    return True if live is None else bool(live[e])


def clause_message(graph: FactorGraph, state: MessageState, c: int, target: int, live=None) -> Survey:
    """u(target, c): how strongly clause ``c`` forces ``target`` to satisfy it."""
    f = 1.0
    target_neg = None
    for e in range(graph.clause_ptr[c], graph.clause_ptr[c + 1]):
        if not _live(live, e):
            continue
        if graph.edge_var[e] == target:
            target_neg = bool(graph.edge_neg[e])
            continue
        f *= literal_flip(state.s_edge[e], bool(graph.edge_neg[e])).f
    if target_neg is None:
        raise ValueError(f"variable {target} is not a live member of clause {c}")
    return literal_flip(Survey(f, 1.0 - f, 0.0), target_neg)


def _incoming(graph, state, i, exclude, live):
    for e in graph.var_edge_ids(i):
        c = int(graph.edge_clause[e])
        if c == exclude or not _live(live, e):
            continue
        yield clause_message(graph, state, c, i, live)


def cavity_survey(graph: FactorGraph, state: MessageState, i: int, excluded: int, live=None) -> Survey:
    v, logz = product_all(_incoming(graph, state, i, excluded, live))
    if logz == -math.inf:
        raise ContradictionError(f"cavity product at variable {i} vanishes")
    return normalize(v)


def node_survey(graph: FactorGraph, state: MessageState, i: int, live=None) -> Survey:
    v, logz = product_all(_incoming(graph, state, i, None, live))
    if logz == -math.inf:
        raise ContradictionError(f"product at variable {i} vanishes")
    return normalize(v)


def complexity_clause(graph: FactorGraph, state: MessageState, c: int, live=None) -> float:
    """ln(1 - prod of flipped F components); -inf when the clause is surely violated."""
    p = 1.0
    for e in range(graph.clause_ptr[c], graph.clause_ptr[c + 1]):
        if _live(live, e):
            p *= literal_flip(state.s_edge[e], bool(graph.edge_neg[e])).f
    if p >= 1.0:
        return -math.inf
    return math.log1p(-p)


def complexity_node(graph: FactorGraph, state: MessageState, i: int, live=None) -> float:
    _, logz = product_all(_incoming(graph, state, i, None, live))
    if logz == -math.inf:
        raise ContradictionError(f"product at variable {i} vanishes")
    return logz


def complexity_total(graph: FactorGraph, state: MessageState, live=None) -> float:
    total = 0.0
    for i in range(graph.n_vars):
        total += complexity_node(graph, state, i, live)
    for c in range(graph.n_clauses):
        k = sum(1 for e in range(graph.clause_ptr[c], graph.clause_ptr[c + 1]) if _live(live, e))
        if k < 2:
            continue
        term = complexity_clause(graph, state, c, live)
        if term == -math.inf:
            raise UnsatCertificateError(f"clause {c} is violated with certainty")
        total -= (k - 1) * term
    return total


def delta_from_survey(s) -> tuple[float, bool]:
    """Complexity lost by fixing a variable along its majority direction.

    Returns ``(delta, direction)`` with ``delta = -ln(1 - min(s_T, s_F))``
    and ``direction`` true when ``s_T >= s_F``.
    """
    direction = bool(s[0] >= s[2])
    return -math.log1p(-min(s[0], s[2])), direction


def delta_estimate(graph: FactorGraph, state: MessageState, i: int, live=None) -> tuple[float, bool]:
    return delta_from_survey(node_survey(graph, state, i, live))


def delta_array(surveys: np.ndarray) -> np.ndarray:
    return -np.log1p(-np.minimum(surveys[:, 0], surveys[:, 2]))
