"""Survey-inspired decimation.

Solve the survey equations, fix the most certain variables along their
majority direction, simplify by unit propagation, re-solve from the
previous messages, and repeat until the surveys collapse to the trivial
solution (the residual formula is then handed to a local-search solver)
or the complexity turns negative.
"""
from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .instance import UNSET, FactorGraph, Instance, Literal
from .sp import (
    MessageState,
    SPConfig,
    SPResult,
    SPStatus,
    active_variables,
    init_state,
    node_survey_array,
    solve,
)
from .survey import ContradictionError

log = logging.getLogger(__name__)


class Selection(str, enum.Enum):
    CERTITUDE = "certitude"
    POLARIZATION = "polarization"


class DecimationStatus(str, enum.Enum):
    EASY_RESIDUAL = "EASY_RESIDUAL"
    NEGATIVE_COMPLEXITY = "NEGATIVE_COMPLEXITY"
    SP_FAILURE = "SP_FAILURE"
    CONTRADICTION = "CONTRADICTION"


@dataclass
class DecimationConfig:
    selection: Selection = Selection.CERTITUDE
    # fraction of the original variable count fixed per step (at least one)
    batch_fraction: float = 1e-4
    sp: SPConfig = field(default_factory=SPConfig)
    abort_on_negative_sigma: bool = True

    def __post_init__(self):
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ValueError("batch_fraction must lie in (0, 1]")
        self.selection = Selection(self.selection)

    def batch_size(self, n_original: int) -> int:
        return max(1, int(round(self.batch_fraction * n_original)))


@dataclass
class ChosenVar:
    var: int
    value: bool
    certitude: float
    polarization: float
    delta: float
    survey: tuple


@dataclass
class StepRecord:
    step: int
    f: float
    sigma: float | None
    sigma_density: float | None
    n_free: int
    n_clauses: int
    chosen: list = field(default_factory=list)
    delta_pred: float = 0.0
    delta_measured: float = math.nan
    sp_status: SPStatus | None = None
    sweeps: int = 0

    @property
    def chosen_certitude(self) -> float:
        return float(np.mean([c.certitude for c in self.chosen])) if self.chosen else math.nan

    @property
    def chosen_polarization(self) -> float:
        return float(np.mean([c.polarization for c in self.chosen])) if self.chosen else math.nan


@dataclass
class DecimationOutcome:
    status: DecimationStatus
    trace: list
    residual: Instance | None
    assignment: np.ndarray
    n_vars: int

    @property
    def initial_density(self) -> float | None:
        return self.trace[0].sigma_density if self.trace else None

    @property
    def final_density(self) -> float | None:
        """Last nonzero complexity density of a nontrivial state (the value the run jumped from).

        Nontrivial states with Σ exactly 0 are skipped: they carry only pure
        warnings (a single cluster) and appear just before the collapse.
        """
        for rec in reversed(self.trace):
            if rec.sp_status is SPStatus.CONVERGED_NONTRIVIAL and rec.sigma_density != 0.0:
                return rec.sigma_density
        return None

    @property
    def f_final(self) -> float:
        return self.trace[-1].f if self.trace else 0.0


class WorkingFormula:
    """Mutable view of an instance under partial assignment.

    Shares the factor graph of the original instance and tracks which
    edges are still live; variable ids therefore stay the original ones.
    """

    def __init__(self, inst: Instance, graph: FactorGraph | None = None):
        self.instance = inst
        self.graph = graph or FactorGraph.from_instance(inst)
        g = self.graph
        self.live = np.ones(g.n_edges, dtype=np.bool_)
        self.clause_len = np.diff(g.clause_ptr).astype(np.int64)
        self.clause_sat = np.zeros(g.n_clauses, dtype=np.bool_)
        self.values = np.full(g.n_vars, UNSET, dtype=np.int8)
        self.n_fixed = 0
        # plain lists are much faster than numpy scalars in the propagation loop
        self._edge_var = g.edge_var.tolist()
        self._edge_neg = g.edge_neg.tolist()
        self._edge_clause = g.edge_clause.tolist()
        self._clause_ptr = g.clause_ptr.tolist()
        self._var_ptr = g.var_ptr.tolist()
        self._var_edges = g.var_edges.tolist()

    @property
    def n_vars(self) -> int:
        return self.graph.n_vars

    @property
    def n_free(self) -> int:
        return self.graph.n_vars - self.n_fixed

    @property
    def n_clauses(self) -> int:
        return int(self.graph.n_clauses - self.clause_sat.sum())

    def propagate_units(self) -> list:
        """Propagate the unit clauses already present; returns the implied fixings."""
        units = [(self._edge_var[e], not self._edge_neg[e])
                 for c in range(self.graph.n_clauses) if self.clause_len[c] == 1 and not self.clause_sat[c]
                 for e in range(self._clause_ptr[c], self._clause_ptr[c + 1]) if self.live[e]]
        return self._run(deque(units))

    def assign(self, var: int, value: bool) -> list:
        """Fix ``var`` and propagate. Returns all ``(var, value)`` fixings made.

        Raises ContradictionError when a clause loses its last literal.
        """
        if self.values[var] != UNSET:
            raise ValueError(f"variable {var} is already fixed")
        return self._run(deque([(var, bool(value))]))

    def _run(self, queue: deque) -> list:
        live, values = self.live, self.values
        ev, en, ec, cp = self._edge_var, self._edge_neg, self._edge_clause, self._clause_ptr
        done = []
        while queue:
            v, b = queue.popleft()
            cur = values[v]
            if cur != UNSET:
                if bool(cur) != b:
                    raise ContradictionError(f"unit propagation assigns variable {v} both ways")
                continue
            values[v] = b
            self.n_fixed += 1
            done.append((v, b))
            for p in range(self._var_ptr[v], self._var_ptr[v + 1]):
                e = self._var_edges[p]
                if not live[e]:
                    continue
                c = ec[e]
                if en[e] != b:
                    self.clause_sat[c] = True
                    live[cp[c]:cp[c + 1]] = False
                    self.clause_len[c] = 0
                    continue
                live[e] = False
                self.clause_len[c] -= 1
                if self.clause_len[c] == 0:
                    raise ContradictionError(f"clause {c} became empty")
                if self.clause_len[c] == 1:
                    for e2 in range(cp[c], cp[c + 1]):
                        if live[e2]:
                            queue.append((ev[e2], not en[e2]))
                            break
        return done

    def residual_instance(self) -> Instance:
        """The simplified formula over the unfixed variables (original ids in ``var_ids``)."""
        free = np.flatnonzero(self.values == UNSET)
        local = {int(v): j for j, v in enumerate(free)}
        clauses = []
        cp = self._clause_ptr
        for c in range(self.graph.n_clauses):
            if self.clause_sat[c]:
                continue
            clauses.append(tuple(Literal(local[self._edge_var[e]], self._edge_neg[e])
                                 for e in range(cp[c], cp[c + 1]) if self.live[e]))
        return Instance(len(free), tuple(clauses), tuple(int(v) for v in free))


def _scores(surveys: np.ndarray, rule: Selection) -> np.ndarray:
    if rule is Selection.CERTITUDE:
        return 1.0 - np.minimum(surveys[:, 0], surveys[:, 2])
    return np.abs(surveys[:, 0] - surveys[:, 2])


def rank_order(surveys: np.ndarray, rule: Selection, candidates: np.ndarray | None = None) -> np.ndarray:
    """Candidate ids sorted by decreasing score, ties by lower id."""
    if candidates is None:
        candidates = np.arange(surveys.shape[0])
    score = _scores(surveys[candidates], Selection(rule))
    return candidates[np.lexsort((candidates, -score))]


def rank_variables(surveys, rule: Selection, candidates=None) -> list:
    """Ranked ``(node, score, direction)`` triples; direction is true when s_T >= s_F."""
    surveys = np.asarray(surveys, dtype=float)
    order = rank_order(surveys, rule, None if candidates is None else np.asarray(candidates))
    score = _scores(surveys, Selection(rule))
    return [(int(i), float(score[i]), bool(surveys[i, 0] >= surveys[i, 2])) for i in order]


def _record(step, wf, res, chosen=(), delta_measured=math.nan) -> StepRecord:
    sigma = res.sigma if res.status.converged else None
    density = None
    if sigma is not None:
        density = sigma / wf.n_free if wf.n_free else 0.0
    chosen = list(chosen)
    return StepRecord(
        step=step,
        f=wf.n_fixed / wf.n_vars if wf.n_vars else 0.0,
        sigma=sigma,
        sigma_density=density,
        n_free=wf.n_free,
        n_clauses=wf.n_clauses,
        chosen=chosen,
        delta_pred=float(sum(c.delta for c in chosen)),
        delta_measured=delta_measured,
        sp_status=res.status,
        sweeps=res.sweeps,
    )


def decimate_step(wf: WorkingFormula, state: MessageState, res: SPResult, cfg: DecimationConfig,
                  step: int, seed=None) -> tuple[SPResult, StepRecord]:
    """Fix one batch of top-ranked variables and re-solve from the current messages.

    Mutates ``wf`` and ``state``. Raises ContradictionError if the fixings
    empty a clause.
    """
    if res.status is not SPStatus.CONVERGED_NONTRIVIAL:
        raise ValueError(f"decimation needs a nontrivial fixed point, got {res.status.value}")
    g = wf.graph
    surveys = node_survey_array(g, state, wf.live)
    candidates = active_variables(g, wf.live)
    order = rank_order(surveys, cfg.selection, candidates)
    want = cfg.batch_size(wf.n_vars)
    chosen = []
    for v in order:
        if len(chosen) >= want:
            break
        if wf.values[v] != UNSET:
            continue
        s = surveys[v]
        lo = min(s[0], s[2])
        value = bool(s[0] >= s[2])
        chosen.append(ChosenVar(int(v), value, 1.0 - lo, abs(s[0] - s[2]), -math.log1p(-lo), tuple(s)))
        wf.assign(int(v), value)
    sigma_before = res.sigma
    state, new = solve(g, cfg.sp, seed=(0 if seed is None else seed, step), state=state, live=wf.live)
    measured = sigma_before - new.sigma if new.status.converged else math.nan
    return new, _record(step, wf, new, chosen, measured)


def _terminal(res: SPResult, rec: StepRecord, cfg: DecimationConfig):
    if res.status in (SPStatus.CONTRADICTION, SPStatus.UNSAT_CERTIFICATE):
        return DecimationStatus.CONTRADICTION
    if res.status is SPStatus.NO_CONVERGENCE:
        return DecimationStatus.SP_FAILURE
    if res.status is SPStatus.CONVERGED_TRIVIAL:
        return DecimationStatus.EASY_RESIDUAL
    if cfg.abort_on_negative_sigma and rec.sigma_density is not None and rec.sigma_density < 0:
        return DecimationStatus.NEGATIVE_COMPLEXITY
    return None


def run(inst: Instance, cfg: DecimationConfig | None = None, seed=0, callback=None) -> DecimationOutcome:
    """Decimate until the surveys become trivial or the run fails.

    ``callback(record)`` is invoked after every step, including step 0
    (the initial solve).
    """
    cfg = cfg or DecimationConfig()
    wf = WorkingFormula(inst)

    def outcome(status, trace):
        residual = wf.residual_instance() if status is DecimationStatus.EASY_RESIDUAL else None
        return DecimationOutcome(status, trace, residual, wf.values.copy(), inst.n_vars)

    try:
        wf.propagate_units()
    except ContradictionError:
        return outcome(DecimationStatus.CONTRADICTION, [])

    state = init_state(wf.graph, cfg.sp.init, seed)
    state, res = solve(wf.graph, cfg.sp, seed=(seed, 0), state=state, live=wf.live)
    rec = _record(0, wf, res)
    trace = [rec]
    if callback:
        callback(rec)
    step = 0
    while True:
        status = _terminal(res, rec, cfg)
        if status is not None:
            log.debug("decimation finished: %s after %d steps (f=%.4f)", status.value, step, rec.f)
            return outcome(status, trace)
        step += 1
        try:
            res, rec = decimate_step(wf, state, res, cfg, step, seed)
        except ContradictionError:
            rec = StepRecord(step, wf.n_fixed / wf.n_vars, None, None, wf.n_free, wf.n_clauses,
                             sp_status=SPStatus.CONTRADICTION)
            trace.append(rec)
            return outcome(DecimationStatus.CONTRADICTION, trace)
        trace.append(rec)
        if callback:
            callback(rec)
