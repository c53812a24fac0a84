"""Instance generators and independent oracles shared by the tests."""

import numpy as np

from grbeam import scenario as sc


def random_psd(rng, N, rank=None):
    rank = N if rank is None else rank
    G = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    return G @ G.conj().T


def random_instance(rng, max_n=10, max_m=4, max_l=30):
    """Random scenario mixing charging floors, power caps and PSD floors."""
    N = int(rng.integers(3, max_n + 1))
    M = int(rng.integers(1, max_m + 1))
    L = int(rng.integers(0, max_l + 1))
    users = [sc.User(sc.steering_vector(rng.uniform(-60, 60), N), float(sc.db2lin(rng.uniform(0, 10))))
             for _ in range(M)]
    shaping = []
    for _ in range(L):
        kind = rng.integers(3)
        if kind == 0:
            shaping += sc.charging_constraints([rng.uniform(-90, 90)], float(rng.uniform(0.5, 3)), N, M)
        elif kind == 1:
            h = sc.steering_vector(rng.uniform(-90, 90), N)
            shaping.append(sc.ShapingConstraint(np.stack([np.outer(h, h.conj())] * M),
                                                float(rng.uniform(5, 20)), "<="))
        else:
            B = random_psd(rng, N) / N
            shaping.append(sc.ShapingConstraint(np.stack([B] * M), float(rng.uniform(0.5, 2)), ">="))
    return sc.Scenario(N, users, shaping)


def cvxpy_relaxation(problem):
    """Optimal value of the relaxation from an independent conic solver."""
    import cvxpy as cp

    X = [cp.Variable((problem.N, problem.N), hermitian=True) for _ in range(problem.M)]
    cons = [Xm >> 0 for Xm in X]
    for r in range(problem.n_rows):
        v = sum(cp.real(cp.trace(problem.A[r, m] @ X[m])) for m in range(problem.M))
        s, b = problem.senses[r], problem.b[r]
        cons.append(v >= b if s == ">=" else v <= b if s == "<=" else v == b)
    prob = cp.Problem(cp.Minimize(sum(cp.real(cp.trace(Xm)) for Xm in X)), cons)
    # Clarabel occasionally raises on infeasible instances; fall back before giving up
    for solver, opts in (("CLARABEL", {}), ("CVXOPT", {}), ("SCS", {"eps": 1e-9, "max_iters": 200_000})):
        try:
            prob.solve(solver=solver, **opts)
            return prob.status, prob.value
        except cp.error.SolverError:
            continue
    raise RuntimeError("no oracle solver succeeded")
