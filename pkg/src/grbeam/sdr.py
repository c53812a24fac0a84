"""Semidefinite relaxation of the power-minimisation problem.

    min  sum_i Tr(X_i)
    s.t. sum_m Tr(A_lm X_m) <sense_l> b_l,   l = 1..M+L
         X_i >= 0

Each Hermitian block is handled through its real symmetric embedding
[[Re X, -Im X], [Im X, Re X]], whose eigenvalues are those of X with doubled
multiplicity.  ``>=`` rows are negated to ``<=`` and receive a nonnegative
slack; equality rows get none.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hermitian
from .conic import ConicData, solve_conic
from .scenario import Scenario, ShapingConstraint

RANK_THRESHOLD = 1e-4


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    """Raised with a dual improving ray ``eta`` certifying primal infeasibility."""

    def __init__(self, msg, eta=None):
        super().__init__(msg)
        self.eta = eta


class UnboundedError(SolverError):
    def __init__(self, msg, X=None):
        super().__init__(msg)
        self.X = X


class MaxIterationsError(SolverError):
    """Raised when no iterate met the tolerances; carries the best one."""

    def __init__(self, msg, primal=None, dual=None, report=None):
        super().__init__(msg)
        self.primal = primal
        self.dual = dual
        self.report = report


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-8
    gap: float = 1e-7
    psd: float = 1e-9
    max_iter: int = 200


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """``A`` has shape (R, M, N, N); rows are QoS rows first, then shaping rows."""

    A: np.ndarray
    b: np.ndarray
    senses: tuple

    @property
    def n_rows(self):
        return self.A.shape[0]

    @property
    def M(self):
        return self.A.shape[1]

    @property
    def N(self):
        return self.A.shape[2]

    def values(self, X_list):
        X = np.asarray(X_list)
        return np.real(np.einsum("rmij,mij->r", self.A.conj(), X))

    def violations(self, X_list):
        """Per-row constraint violation (zero when satisfied)."""
        v = self.values(X_list)
        out = np.empty_like(v)
        for r, s in enumerate(self.senses):
            if s == ">=":
                out[r] = max(0.0, self.b[r] - v[r])
            elif s == "<=":
                out[r] = max(0.0, v[r] - self.b[r])
            else:
                out[r] = abs(v[r] - self.b[r])
        return out

    def slacks(self, X_list):
        """Signed slack of every row (zero for equality rows when met)."""
        v = self.values(X_list)
        sign = np.array([1.0 if s == ">=" else -1.0 for s in self.senses])
        return sign * (v - self.b)

    def constraints(self):
        return [ShapingConstraint(self.A[r], float(self.b[r]), s) for r, s in enumerate(self.senses)]


@dataclass(frozen=True, eq=False)
class SdrSolution:
    X: list
    objective: float


@dataclass(frozen=True, eq=False)
class DualSolution:
    eta: np.ndarray
    Z: list
    objective: float


@dataclass
class KktReport:
    primal_objective: float
    dual_objective: float
    gap: float
    relative_gap: float
    primal_residual: float
    primal_psd_violation: float
    dual_psd_violation: float
    dual_sign_violation: float
    complementary_slackness: np.ndarray = field(repr=False)
    iterations: int = 0

    def as_dict(self):
        d = dict(self.__dict__)
        d["complementary_slackness"] = float(np.max(self.complementary_slackness, initial=0.0))
        return d


def from_constraints(constraints, M: int, N: int) -> SdpProblem:
    if constraints:
        A = np.stack([c.A for c in constraints])
    else:
        A = np.zeros((0, M, N, N), dtype=complex)
    b = np.array([c.b for c in constraints], dtype=float)
    return SdpProblem(A, b, tuple(c.sense for c in constraints))


def assemble(scenario: Scenario) -> SdpProblem:
    return from_constraints(scenario.constraints(), scenario.M, scenario.N)


def embed(A):
    """Real symmetric embedding of a Hermitian matrix (batched over leading axes)."""
    Ar, Ai = A.real, A.imag
    top = np.concatenate([Ar, -Ai], axis=-1)
    bottom = np.concatenate([Ai, Ar], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def unembed(S):
    n = S.shape[-1] // 2
    S11, S12, S21, S22 = S[:n, :n], S[:n, n:], S[n:, :n], S[n:, n:]
    X = 0.5 * (S11 + S22) + 0.5j * (S21 - S12)
    return 0.5 * (X + X.conj().T)


def _conic_data(problem: SdpProblem):
    R, M = problem.n_rows, problem.M
    sign = np.array([-1.0 if s == ">=" else 1.0 for s in problem.senses])
    norms = np.sqrt(np.sum(np.abs(problem.A) ** 2, axis=(1, 2, 3)))
    scale = np.where(norms > 0, norms, 1.0)
    rowfac = sign / scale
    ineq = [r for r, s in enumerate(problem.senses) if s != "=="]
    Al = np.zeros((R, len(ineq)))
    for j, r in enumerate(ineq):
        Al[r, j] = 1.0
    As = [0.5 * rowfac[:, None, None] * embed(problem.A[:, m]) for m in range(M)]
    b = rowfac * problem.b
    cs = [0.5 * np.eye(2 * problem.N) for _ in range(M)]
    return ConicData(Al, As, b, np.zeros(len(ineq)), cs), rowfac


def dual_slacks(problem: SdpProblem, eta):
    """Z_i = I - sum_l eta_l A_li."""
    N = problem.N
    Z = np.eye(N)[None] - np.einsum("r,rmij->mij", eta, problem.A)
    return [0.5 * (Zi + Zi.conj().T) for Zi in Z]


def _solutions(problem, result, rowfac):
    X = [unembed(S) for S in result.x[1]]
    eta = result.y * rowfac
    objective = float(sum(np.trace(Xi).real for Xi in X))
    return (SdrSolution(X, objective),
            DualSolution(eta, dual_slacks(problem, eta), float(eta @ problem.b)))


def kkt_report(problem: SdpProblem, primal: SdrSolution, dual: DualSolution, iterations=0) -> KktReport:
    pobj = float(sum(np.trace(X).real for X in primal.X))
    dobj = float(dual.eta @ problem.b)
    bscale = np.maximum(1.0, np.abs(problem.b))
    pres = float(np.max(problem.violations(primal.X) / bscale, initial=0.0))
    ppsd = max((max(0.0, -np.linalg.eigvalsh(X)[0]) for X in primal.X), default=0.0)
    Z = dual_slacks(problem, dual.eta)
    dpsd = max((max(0.0, -np.linalg.eigvalsh(Zi)[0]) for Zi in Z), default=0.0)
    sign_viol = 0.0
    for eta, s in zip(dual.eta, problem.senses):
        if s == ">=":
            sign_viol = max(sign_viol, -eta)
        elif s == "<=":
            sign_viol = max(sign_viol, eta)
    cs = np.abs(dual.eta * problem.slacks(primal.X))
    gap = pobj - dobj
    return KktReport(pobj, dobj, gap, abs(gap) / max(1.0, abs(pobj)), pres, ppsd, dpsd,
                     sign_viol, cs, iterations)


def _meets(report: KktReport, tol: Tolerances):
    return (report.primal_residual <= tol.feasibility
            and report.primal_psd_violation <= tol.psd * max(1.0, report.primal_objective)
            and report.dual_psd_violation <= tol.feasibility
            and report.dual_sign_violation <= tol.feasibility
            and report.relative_gap <= tol.gap)


def polish(problem: SdpProblem, X_list, rel_threshold=1e-10, active_tol=1e-6):
    """Remove residual row violations by a minimum-norm move inside range(X).

    The correction is X_m + Q_m D_m Q_m^H with X_m ~ Q_m Q_m^H, so it stays
    PSD as long as every |D_m|_2 < 1.  Violated rows are moved onto their
    bound, nearly active rows are held fixed and rows with comfortable slack
    are left free.  Returns the corrected list, or None when no safe
    correction exists.
    """
    slack = problem.slacks(X_list)
    bscale = np.maximum(1.0, np.abs(problem.b))
    rows, target = [], []
    for r, s in enumerate(problem.senses):
        sign = 1.0 if s == ">=" else -1.0
        if s == "==" or slack[r] < 0:
            rows.append(r)
            target.append(-sign * slack[r] if s != "==" else problem.b[r] - problem.values(X_list)[r])
        elif slack[r] <= active_tol * bscale[r]:
            rows.append(r)
            target.append(0.0)
    target = np.array(target)
    if not np.any(target):
        return list(X_list)
    Q = [hermitian.factor(X, rel_threshold) for X in X_list]
    T = hermitian.trace_system(problem.A[rows], Q)
    coef, *_ = np.linalg.lstsq(T, target, rcond=None)
    if np.max(np.abs(T @ coef - target)) > 1e-3 * np.max(np.abs(target)):
        return None
    deltas = hermitian.split_coords(coef, Q)
    if any(D.size and np.linalg.norm(D, 2) >= 0.5 for D in deltas):
        return None
    out = []
    for X, Qm, D in zip(X_list, Q, deltas):
        Xn = X + Qm @ D @ Qm.conj().T
        out.append(0.5 * (Xn + Xn.conj().T))
    return out


def solve(problem: SdpProblem, tol: Tolerances = Tolerances()):
    """Solve the relaxation; returns ``(SdrSolution, DualSolution, KktReport)``."""
    data, rowfac = _conic_data(problem)
    row_scale = np.maximum(1.0, np.abs(problem.b)) * np.abs(rowfac)
    result = solve_conic(data, feastol=0.01 * tol.feasibility, gaptol=0.01 * tol.gap,
                         max_iter=tol.max_iter, row_scale=row_scale)
    if result.status == "infeasible":
        eta = result.y * rowfac
        raise InfeasibleError("relaxation is infeasible", eta / max(np.max(np.abs(eta)), 1e-300))
    if result.status == "unbounded":
        raise UnboundedError("relaxation is unbounded", [unembed(S) for S in result.x[1]])
    primal, dual = _solutions(problem, result, rowfac)
    report = kkt_report(problem, primal, dual, result.iterations)
    if report.primal_residual > 1e-3 * tol.feasibility:
        X = polish(problem, primal.X)
        if X is not None:
            candidate = SdrSolution(X, float(sum(np.trace(Xi).real for Xi in X)))
            polished = kkt_report(problem, candidate, dual, result.iterations)
            if polished.primal_residual < report.primal_residual:
                primal, report = candidate, polished
    if _meets(report, tol):
        return primal, dual, report
    raise MaxIterationsError(
        f"solver stopped ({result.status}) after {result.iterations} iterations "
        f"without meeting tolerances", primal, dual, report)


def numerical_rank(X, rel_threshold: float = RANK_THRESHOLD) -> int:
    """Count eigenvalues at or above ``rel_threshold`` times the trace."""
    ev = np.linalg.eigvalsh(X)[::-1]
    total = float(np.sum(ev))
    if total <= 0:
        return 0
    return int(np.sum(ev >= rel_threshold * total))
