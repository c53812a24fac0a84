import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grbeam import rankred, scenario as sc, sdr
from grbeam.pipeline import max_constraints_for
from helpers import random_instance


def _eye_rows(N, M, b=1.0):
    rows = []
    for m in range(M):
        A = np.zeros((M, N, N), dtype=complex)
        A[m] = np.eye(N)
        rows.append(sc.ShapingConstraint(A, b, ">="))
    return rows


def test_system_of_zero_constraints_is_zero():
    N, M = 3, 2
    rows = [sc.ShapingConstraint(np.zeros((M, N, N)), 0.0, ">=")] * 4
    state = rankred.factorize([np.eye(N), np.eye(N)])
    T = rankred.assemble_system(state, rows)
    assert T.shape == (4, 18)
    assert not np.any(T)


def test_system_scalar_block():
    rng = np.random.default_rng(0)
    q = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    A = B + B.conj().T
    state = rankred.factorize([np.outer(q, q.conj())])
    T = rankred.assemble_system(state, [sc.ShapingConstraint(A[None], 1.0, "<=")])
    Q = state.Q[0]
    assert T.shape == (1, 1)
    assert T[0, 0] == pytest.approx(np.real(Q.conj().T @ A @ Q)[0, 0])


def test_nontrivial_delta_when_underdetermined():
    rng = np.random.default_rng(2)
    ranks = [2, 3]
    T = rng.standard_normal((7, 13))  # 13 > 7 unknowns
    delta = rankred.find_nontrivial_delta(T, ranks)
    assert delta is not None
    v = np.concatenate([np.real(np.diag(D)) for D in delta.deltas])
    assert np.any(v) or any(np.any(D) for D in delta.deltas)
    from grbeam import hermitian
    coords = np.concatenate([hermitian.coords(D) for D in delta.deltas])
    assert np.linalg.norm(coords) == pytest.approx(1.0)
    assert np.max(np.abs(T @ coords)) < 1e-8


def test_no_delta_for_full_column_rank():
    rng = np.random.default_rng(3)
    assert rankred.find_nontrivial_delta(rng.standard_normal((9, 5)), [1, 2]) is None


def test_step_on_identity():
    N = 2
    state = rankred.factorize([np.eye(N)])
    # factor of I is any unitary; express Delta in the factor basis
    Q = state.Q[0]
    D = Q.conj().T @ np.diag([1.0, -1.0]) @ np.linalg.pinv(Q.conj().T)
    D = 0.5 * (D + D.conj().T)
    new = rankred.reduction_step(state, rankred.DeltaSet([D]))
    assert np.allclose(new.X[0], np.diag([0.0, 2.0]), atol=1e-12)
    assert new.ranks == [1]
    assert np.trace(new.X[0]).real == pytest.approx(2.0)


def test_step_eigenvalues_in_unit_band():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    D = B + B.conj().T
    d = rankred.DeltaSet([D]).extremal_eigenvalue()
    ev = np.linalg.eigvalsh(np.eye(3) - D / d)
    assert ev.min() >= -1e-12 and ev.max() <= 2 + 1e-12
    assert min(abs(ev)) < 1e-12


def test_step_without_drop():
    state = rankred.factorize([np.eye(2)])
    with pytest.raises(ValueError, match="no rank drop"):
        rankred.reduction_step(state, rankred.DeltaSet([np.zeros((2, 2))]))


def test_rank_one_input_unchanged():
    h = sc.steering_vector(10.0, 4)
    X = [np.outer(h, h.conj())]
    rows = _eye_rows(4, 1)
    report = rankred.reduce_with_report(X, rows)
    assert report.iterations == 0 and report.max_iter == 0
    assert np.allclose(report.X[0], X[0], rtol=0, atol=1e-15)


def test_toy_high_rank_face():
    # Tr(X_m) >= 1 alone leaves the whole trace-one face optimal; the
    # interior-point solver returns its full-rank centre
    N, M = 3, 2
    rng = np.random.default_rng(8)
    rows = _eye_rows(N, M)
    for _ in range(5):
        h = sc.steering_vector(rng.uniform(-90, 90), N)
        rows.append(sc.ShapingConstraint(np.stack([np.outer(h, h.conj())] * M), 10.0, "<="))
    problem = sdr.from_constraints(rows, M, N)
    primal, _, _ = sdr.solve(problem)
    assert [sdr.numerical_rank(X) for X in primal.X] == [3, 3]
    report = rankred.reduce_with_report(primal.X, problem)
    ranks = [sdr.numerical_rank(X) for X in report.X]
    assert sum(r * r for r in ranks) <= problem.n_rows
    assert sum(np.trace(X).real for X in report.X) == pytest.approx(primal.objective, rel=1e-9)
    assert np.all(problem.violations(report.X) <= 1e-8)


def test_example2_reduction():
    problem = sdr.assemble(sc.example2())
    try:
        primal = sdr.solve(problem)[0]
    except sdr.MaxIterationsError as exc:
        primal = exc.primal
    before = [sdr.numerical_rank(X) for X in primal.X]
    assert before == [14, 15, 15]
    trace = []
    X = rankred.rank_reduce(primal.X, problem, trace=trace)
    ranks = [sdr.numerical_rank(Xi) for Xi in X]
    assert max(ranks) <= 8 and sum(r * r for r in ranks) <= problem.n_rows
    assert trace and all(r.row_drift <= 1e-7 for r in trace)


def _reduced(seed):
    rng = np.random.default_rng(seed)
    problem = sdr.assemble(random_instance(rng, max_n=8, max_m=3, max_l=20))
    try:
        primal = sdr.solve(problem)[0]
    except (sdr.InfeasibleError, sdr.MaxIterationsError):
        return None
    return problem, primal, rankred.reduce_with_report(primal.X, problem)


@settings(max_examples=30)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_reduction_invariants(seed):
    out = _reduced(seed)
    if out is None:
        return
    problem, primal, report = out
    bscale = np.maximum(1.0, np.abs(problem.b))
    drift = np.abs(problem.values(report.X) - problem.values(primal.X)) / bscale
    assert np.max(drift) <= 1e-7
    obj = sum(np.trace(X).real for X in report.X)
    assert abs(obj - primal.objective) <= 1e-7 * (1 + primal.objective)
    for X in report.X:
        assert np.linalg.eigvalsh(X)[0] >= -1e-9 * np.trace(X).real
    assert report.iterations <= report.max_iter
    sums = [sum(rankred.factorize(primal.X).ranks)] + [sum(r.ranks) for r in report.trace]
    assert all(b < a for a, b in zip(sums, sums[1:]))
    ranks = [sdr.numerical_rank(X) for X in report.X]
    assert sum(r * r for r in ranks) <= problem.n_rows


def test_row_guard_stops_near_null_steps():
    # here the last moves follow only numerically null directions and would
    # drift a row by ~2e-7
    problem, primal, report = _reduced(30573)
    assert report.stopped == "row_guard"
    drift = np.abs(problem.values(report.X) - problem.values(primal.X)) / np.maximum(1.0, np.abs(problem.b))
    assert np.max(drift) <= rankred.ROW_GUARD


@settings(max_examples=30)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_lemma_two_bound(seed):
    out = _reduced(seed)
    if out is None:
        return
    problem, _, report = out
    L = problem.n_rows - problem.M
    ranks = [sdr.numerical_rank(X) for X in report.X]
    for K in (1, 2, 4, 8):
        if L <= max_constraints_for(K):
            assert max(ranks) <= K
            break
