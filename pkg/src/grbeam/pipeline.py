"""End-to-end design: relaxation, rank reduction, code selection, extraction.

When the reduced solution has rank above the largest admissible code
dimension, Gaussian randomization with power control supplies a feasible but
generally suboptimal design instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import rankred, sdr
from .linksim import theoretical_sinr
from .ostbc import SUPPORTED_DIMENSIONS
from .randomize import RandomizationFailed, randomization_search
from .scenario import Scenario
from .sdr import InfeasibleError, RANK_THRESHOLD, Tolerances

log = logging.getLogger(__name__)

SINR_SLACK = 1e-6

__all__ = [
    "BeamformingSolution", "InfeasibleError", "RandomizationFailed", "RandomizationRequired",
    "ReducedRelaxation", "SolveOptions", "extract_beamformers", "finish", "max_constraints_for",
    "phase_rotate", "relax_and_reduce", "select_code_dimension", "solve_downlink", "verify",
]


class RandomizationRequired(ValueError):
    pass


def max_constraints_for(K: int) -> int:
    """Largest number of shaping rows for which rank <= K is always attainable."""
    if K not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"unsupported code dimension: {K}")
    return (K + 1) ** 2 - 2


def select_code_dimension(ranks, max_dim: int = 8) -> int:
    r = max(ranks, default=0)
    for K in SUPPORTED_DIMENSIONS:
        if K > max_dim:
            break
        if K >= r:
            return K
    raise RandomizationRequired(f"rank {r} exceeds code dimension {max_dim}; randomization required")


def extract_beamformers(X_list, K: int, rel_threshold: float = RANK_THRESHOLD) -> list:
    """W_i = [Q_i, 0] with X_i ~ Q_i Q_i^H, padded with zero columns to K."""
    out = []
    for X in X_list:
        X = 0.5 * (X + X.conj().T)
        w, U = np.linalg.eigh(X)
        total = float(np.sum(w))
        keep = w >= rel_threshold * total if total > 0 else np.zeros_like(w, dtype=bool)
        Q = U[:, keep][:, ::-1] * np.sqrt(w[keep][::-1])
        if Q.shape[1] > K:
            raise ValueError(f"rank {Q.shape[1]} exceeds code dimension {K}")
        W = np.zeros((X.shape[0], K), dtype=complex)
        W[:, :Q.shape[1]] = Q
        out.append(W)
    return out


def phase_rotate(W_list, channels) -> list:
    """Scale every column by a unit-modulus factor so that W_i^H h_i is real and >= 0."""
    out = []
    for W, h in zip(W_list, channels):
        g = W.conj().T @ h
        mag = np.abs(g)
        theta = np.ones_like(g)
        nz = mag > 0
        theta[nz] = g[nz] / mag[nz]
        Wr = W * theta[None, :]
        out.append(Wr)
    return out


@dataclass(frozen=True)
class SolveOptions:
    tolerances: Tolerances = Tolerances()
    n_rand: int = 300
    seed: int = 0
    max_code_dim: int = 8
    rank_threshold: float = RANK_THRESHOLD
    # Best interior-point iterates within this scaled residual and gap are
    # accepted when the strict tolerances cannot be met.
    inexact_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_code_dim not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"unsupported code dimension: {self.max_code_dim}")
        if self.n_rand < 1:
            raise ValueError("n_rand must be at least 1")


@dataclass(eq=False)
class BeamformingSolution:
    W: list
    K: int
    total_power: float
    exact: bool
    diagnostics: dict = field(default_factory=dict)

    def gram(self):
        return [W @ W.conj().T for W in self.W]


def verify(W_list, scenario: Scenario, problem=None):
    """Return (sinr list, worst scaled shaping violation)."""
    sinrs = [theoretical_sinr(W_list, u.h, u.noise_power, i) for i, u in enumerate(scenario.users)]
    if problem is None:
        problem = sdr.assemble(scenario)
    X = [W @ W.conj().T for W in W_list]
    M = scenario.M
    bscale = np.maximum(1.0, np.abs(problem.b[M:]))
    viol = problem.violations(X)[M:] / bscale
    return sinrs, float(np.max(viol, initial=0.0))


def _relax(problem, options: SolveOptions, diag):
    try:
        primal, dual, report = sdr.solve(problem, options.tolerances)
        diag["sdr_status"] = "optimal"
    except sdr.MaxIterationsError as exc:
        report = exc.report
        if (exc.primal is None or report.primal_residual > options.inexact_tolerance
                or report.relative_gap > options.inexact_tolerance):
            raise
        primal, dual = exc.primal, exc.dual
        diag["sdr_status"] = "inexact"
        log.info("accepting inexact relaxation: residual %.2e gap %.2e",
                 report.primal_residual, report.relative_gap)
    diag["sdr"] = report.as_dict()
    return primal, dual


@dataclass(eq=False)
class ReducedRelaxation:
    """Relaxed solution after rank reduction, shared by all code-dimension caps."""

    problem: sdr.SdpProblem
    X: list
    ranks: list
    diagnostics: dict


def relax_and_reduce(scenario: Scenario, options: SolveOptions = SolveOptions()) -> ReducedRelaxation:
    problem = sdr.assemble(scenario)
    diag = {}
    primal, _ = _relax(problem, options, diag)
    diag["sdr_objective"] = primal.objective
    ranks0 = [sdr.numerical_rank(X, options.rank_threshold) for X in primal.X]
    diag["initial_ranks"] = ranks0

    X = primal.X
    if max(ranks0) > 1:
        report = rankred.reduce_with_report(X, problem)
        X = report.X
        diag["reduction_iterations"] = report.iterations
        diag["reduction_stop"] = report.stopped
        diag["reduction_trace"] = [r.__dict__ for r in report.trace]
    else:
        diag["reduction_iterations"] = 0
    ranks = [sdr.numerical_rank(Xi, options.rank_threshold) for Xi in X]
    diag["ranks"] = ranks
    return ReducedRelaxation(problem, X, ranks, diag)


def finish(scenario: Scenario, reduced: ReducedRelaxation, options: SolveOptions = SolveOptions(),
           rng: np.random.Generator | None = None) -> BeamformingSolution:
    """Select K and extract, or fall back to randomization, then rotate."""
    diag = dict(reduced.diagnostics)
    try:
        K = select_code_dimension(reduced.ranks, options.max_code_dim)
        W = extract_beamformers(reduced.X, K, options.rank_threshold)
        exact = True
    except RandomizationRequired:
        K = options.max_code_dim
        if rng is None:
            rng = np.random.default_rng(options.seed)
        best = randomization_search(reduced.X, reduced.problem, options.n_rand, rng, K)
        W = best.W
        exact = False
        diag["randomization_index"] = best.index

    W = phase_rotate(W, scenario.channels)
    total = float(sum(np.vdot(Wi, Wi).real for Wi in W))
    sinrs, shaping_violation = verify(W, scenario, reduced.problem)
    diag["sinr"] = sinrs
    diag["shaping_violation"] = shaping_violation
    diag["sinr_ok"] = all(s >= u.sinr_target * (1 - SINR_SLACK) for s, u in zip(sinrs, scenario.users))
    return BeamformingSolution(W, K, total, exact, diag)


def solve_downlink(scenario: Scenario, options: SolveOptions = SolveOptions()) -> BeamformingSolution:
    """Relaxation, rank reduction, code selection and phase rotation in one call.

    Raises InfeasibleError when the relaxation is infeasible and
    RandomizationFailed when the fallback finds no feasible candidate.
    """
    return finish(scenario, relax_and_reduce(scenario, options), options)
