"""Rank reduction of a relaxed solution along nontrivial trace-preserving moves.

Each block is split as X_i = Q_i Q_i^H + T_i where Q_i collects the eigenpairs
above a small factor threshold and T_i is the (tiny) remainder.  The factor
threshold sits far below the 0.01% reporting rule: interior-point solutions
carry eigenvalues just under that rule which still move strongly weighted rows,
so they are reduced along with everything else rather than dropped.  A step
replaces Q_i Q_i^H by Q_i (I - Delta_i / delta) Q_i^H with the Delta_i solving
the homogeneous trace system of all constraint rows; T_i is carried along
unchanged, so every row value is preserved exactly and not only up to the
truncation error of the factorisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hermitian
from .sdr import SdpProblem, from_constraints

FACTOR_THRESHOLD = 1e-10
NULL_THRESHOLD = 1e-9
OBJECTIVE_GUARD = 1e-7
ROW_GUARD = 1e-8


@dataclass
class RankReductionState:
    """Current iterate with its significant factors and the discarded tails."""

    X: list
    Q: list
    tails: list
    iteration: int = 0
    rel_threshold: float = FACTOR_THRESHOLD

    @property
    def ranks(self):
        return [Q.shape[1] for Q in self.Q]


@dataclass(frozen=True, eq=False)
class DeltaSet:
    deltas: list

    def extremal_eigenvalue(self):
        """Signed eigenvalue of largest magnitude over all blocks; ties favour the positive one."""
        best = 0.0
        for D in self.deltas:
            if D.size == 0:
                continue
            ev = np.linalg.eigvalsh(D)
            for v in (ev[-1], ev[0]):
                if abs(v) > abs(best):
                    best = float(v)
        return best


@dataclass
class TraceRecord:
    iteration: int
    ranks: list
    delta_star: float
    objective_drift: float
    row_drift: float


@dataclass
class ReductionReport:
    X: list
    ranks: list
    iterations: int
    max_iter: int
    trace: list = field(default_factory=list)
    stopped: str = ""


def _as_problem(constraints, X_list) -> SdpProblem:
    if isinstance(constraints, SdpProblem):
        return constraints
    X0 = np.asarray(X_list[0])
    return from_constraints(list(constraints), len(X_list), X0.shape[0])


def factorize(X_list, rel_threshold: float = FACTOR_THRESHOLD) -> RankReductionState:
    Q, tails, X = [], [], []
    for Xi in X_list:
        Xi = 0.5 * (np.asarray(Xi) + np.asarray(Xi).conj().T)
        w, U = np.linalg.eigh(Xi)
        total = float(np.sum(w))
        keep = w >= rel_threshold * total if total > 0 else np.zeros_like(w, dtype=bool)
        Qi = U[:, keep][:, ::-1] * np.sqrt(w[keep][::-1])
        X.append(Xi)
        Q.append(Qi)
        tails.append(Xi - Qi @ Qi.conj().T)
    return RankReductionState(X, Q, tails, rel_threshold=rel_threshold)


def assemble_system(state: RankReductionState, constraints) -> np.ndarray:
    """Real matrix whose row l maps stacked Delta coordinates to sum_m Tr(Q_m^H A_lm Q_m Delta_m)."""
    problem = _as_problem(constraints, state.X)
    return hermitian.trace_system(problem.A, state.Q)


def find_nontrivial_delta(system: np.ndarray, ranks) -> DeltaSet | None:
    """Unit-norm null vector of ``system`` split into Hermitian blocks of the given ranks."""
    system = np.asarray(system, dtype=float)
    n = system.shape[1]
    if n == 0:
        return None
    _, s, Vt = np.linalg.svd(system, full_matrices=True)
    smax = float(s[0]) if s.size else 0.0
    numerical = int(np.sum(s > NULL_THRESHOLD * smax)) if smax > 0 else 0
    if numerical >= n:
        return None
    v = Vt[-1].copy()
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        v = -v
    deltas, pos = [], 0
    for K in ranks:
        deltas.append(hermitian.from_coords(v[pos:pos + K * K], K))
        pos += K * K
    return DeltaSet(deltas)


def reduction_step(state: RankReductionState, delta_set: DeltaSet) -> RankReductionState:
    delta_star = delta_set.extremal_eigenvalue()
    scale = max((np.linalg.norm(D) for D in delta_set.deltas), default=0.0)
    if abs(delta_star) <= 1e-12 * max(scale, 1e-300):
        raise ValueError("no rank drop")
    X = []
    for Q, T, D in zip(state.Q, state.tails, delta_set.deltas):
        K = Q.shape[1]
        core = Q @ (np.eye(K) - D / delta_star) @ Q.conj().T
        Xi = core + T
        X.append(0.5 * (Xi + Xi.conj().T))
    new = factorize(X, state.rel_threshold)
    new.iteration = state.iteration + 1
    return new


def _objective(X_list):
    return float(sum(np.trace(X).real for X in X_list))


def rank_reduce(X_list, constraints, trace: list | None = None,
                rel_threshold: float = FACTOR_THRESHOLD) -> list:
    """Reduce ranks until no nontrivial move exists or the iteration budget is used.

    The budget is the sum of the initial factor ranks minus M.  A step whose objective
    drift exceeds 1e-7 (1 + objective), or that moves any row value by more than
    1e-8 max(1, |b|) from its starting value, is refused and ends the procedure.
    Records are appended to ``trace`` when given.
    """
    return reduce_with_report(X_list, constraints, rel_threshold, trace).X


def reduce_with_report(X_list, constraints, rel_threshold: float = FACTOR_THRESHOLD,
                       trace: list | None = None) -> ReductionReport:
    problem = _as_problem(constraints, X_list)
    state = factorize(X_list, rel_threshold)
    M = len(X_list)
    max_iter = max(0, sum(state.ranks) - M)
    records = trace if trace is not None else []
    stopped = "max_iter"
    base_obj = _objective(state.X)
    base_vals = problem.values(state.X)
    bscale = np.maximum(1.0, np.abs(problem.b))

    while state.iteration < max_iter:
        system = assemble_system(state, problem)
        delta = find_nontrivial_delta(system, state.ranks)
        if delta is None:
            stopped = "no_null_space"
            break
        try:
            candidate = reduction_step(state, delta)
        except ValueError:
            stopped = "no_rank_drop"
            break
        obj = _objective(candidate.X)
        if abs(obj - _objective(state.X)) > OBJECTIVE_GUARD * (1.0 + abs(base_obj)):
            stopped = "objective_guard"
            break
        drift = np.abs(problem.values(candidate.X) - base_vals) / bscale
        # a numerically (not exactly) null direction moves the rows; stop before it adds up
        if np.max(drift, initial=0.0) > ROW_GUARD:
            stopped = "row_guard"
            break
        records.append(TraceRecord(candidate.iteration, candidate.ranks, delta.extremal_eigenvalue(),
                                   obj - base_obj, float(np.max(drift, initial=0.0))))
        state = candidate

    return ReductionReport(state.X, state.ranks, state.iteration, max_iter, records, stopped)
