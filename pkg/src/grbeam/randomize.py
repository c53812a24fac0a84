"""Gaussian randomization with per-user power control.

Candidates W_bar_i = U_i S_i^{1/2} L_i are drawn around the relaxed solution
X_i = U_i S_i U_i^H with L_i an N x K matrix of unit-variance circular Gaussian
entries.  A linear program then rescales each user's candidate so that every
constraint row holds at minimum total power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import solve_lp
from .sdr import SdpProblem, from_constraints

RANDOM_K = 8


class PowerControlInfeasible(RuntimeError):
    pass


class RandomizationFailed(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RandomCandidate:
    W_bar: list
    p: np.ndarray
    total_power: float
    index: int = 0

    @property
    def W(self):
        return [np.sqrt(pm) * Wm for pm, Wm in zip(self.p, self.W_bar)]


def _as_problem(constraints, N, M) -> SdpProblem:
    if isinstance(constraints, SdpProblem):
        return constraints
    return from_constraints(list(constraints), M, N)


def draw_candidate(X_list, rng: np.random.Generator, K: int = RANDOM_K) -> list:
    out = []
    for X in X_list:
        X = np.asarray(X)
        N = X.shape[0]
        w, U = np.linalg.eigh(0.5 * (X + X.conj().T))
        root = U * np.sqrt(np.maximum(w, 0.0))
        L = (rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))) / np.sqrt(2.0)
        out.append(root @ L)
    return out


def power_control(candidates, constraints) -> np.ndarray:
    """Per-user scales p >= 0 of minimum total power making sqrt(p_m) W_bar_m feasible."""
    M = len(candidates)
    N = candidates[0].shape[0]
    problem = _as_problem(constraints, N, M)
    grams = np.stack([W @ W.conj().T for W in candidates])
    G = np.real(np.einsum("rmij,mij->rm", problem.A.conj(), grams))
    cost = np.real(np.trace(grams, axis1=1, axis2=2))
    res = solve_lp(cost, G, problem.senses, problem.b)
    if res.status != "optimal":
        raise PowerControlInfeasible(f"power control program is {res.status}")
    return res.x


def randomization_search(X_list, constraints, n_rand: int, rng: np.random.Generator,
                         K: int = RANDOM_K) -> RandomCandidate:
    """Best of ``n_rand`` scaled candidates; ties keep the earliest draw."""
    if n_rand < 1:
        raise ValueError("n_rand must be at least 1")
    M = len(X_list)
    N = np.asarray(X_list[0]).shape[0]
    problem = _as_problem(constraints, N, M)
    best = None
    for idx in range(n_rand):
        cand = draw_candidate(X_list, rng, K)
        try:
            p = power_control(cand, problem)
        except PowerControlInfeasible:
            continue
        power = float(sum(pm * np.vdot(W, W).real for pm, W in zip(p, cand)))
        if best is None or power < best.total_power:
            best = RandomCandidate(cand, p, power, idx)
    if best is None:
        raise RandomizationFailed(f"all {n_rand} power-control programs were infeasible")
    return best
