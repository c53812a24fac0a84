import numpy as np
import pytest
from hypothesis import given, strategies as st

from grbeam import scenario as sc
from grbeam.linksim import theoretical_sinr
from grbeam.pipeline import max_constraints_for

angles = st.floats(-89, 89, allow_nan=False)


def test_steering_broadside():
    assert np.allclose(sc.steering_vector(0.0, 4), np.ones(4))


def test_steering_endfire():
    assert np.allclose(sc.steering_vector(90.0, 2), [1, -1])


def test_steering_entry_two():
    h = sc.steering_vector(-5.0, 12)
    assert np.isclose(h[1], np.exp(1j * np.pi * np.sin(np.deg2rad(-5.0))))
    assert np.allclose(np.abs(h), 1.0)


def test_steering_rejects_empty():
    with pytest.raises(ValueError):
        sc.steering_vector(0.0, 0)


@given(theta=angles, N=st.integers(2, 20))
def test_derivatives_match_finite_differences(theta, N):
    h, dh, d2h = sc.steering_derivatives(theta, N)
    step = 1e-4
    hp, dhp, _ = sc.steering_derivatives(theta + np.rad2deg(step), N)
    hm, dhm, _ = sc.steering_derivatives(theta - np.rad2deg(step), N)
    assert np.allclose((hp - hm) / (2 * step), dh, atol=1e-5 * N ** 3)
    assert np.allclose((dhp - dhm) / (2 * step), d2h, atol=1e-5 * N ** 4)


def test_user_validation():
    h = np.ones(3, dtype=complex)
    for kwargs in (dict(sinr_target=0.0), dict(sinr_target=1.0, noise_power=0.0)):
        with pytest.raises(ValueError):
            sc.User(h, **kwargs)
    with pytest.raises(ValueError):
        sc.User(np.zeros(3), 1.0)


def test_constraint_validation():
    with pytest.raises(ValueError, match="sense"):
        sc.ShapingConstraint(np.zeros((1, 2, 2)), 0.0, ">")
    with pytest.raises(ValueError, match="Hermitian"):
        sc.ShapingConstraint(np.array([[[0, 1], [0, 0]]]), 0.0, ">=")


def test_scenario_validation():
    with pytest.raises(ValueError):
        sc.Scenario(3, [])
    with pytest.raises(ValueError):
        sc.Scenario(4, [sc.User(np.ones(3), 1.0)])


def test_qos_single_user():
    h = sc.steering_vector(10.0, 5)
    s = sc.Scenario(5, [sc.User(h, 2.0, 0.5)])
    (row,) = sc.qos_constraints(s)
    assert row.sense == ">=" and row.b == pytest.approx(1.0)
    assert np.allclose(row.A[0], np.outer(h, h.conj()))


def test_qos_cross_term():
    h1, h2 = sc.steering_vector(0.0, 4), sc.steering_vector(30.0, 4)
    s = sc.Scenario(4, [sc.User(h1, 1.0), sc.User(h2, 1.0)])
    rows = sc.qos_constraints(s)
    assert np.allclose(rows[0].A[1], -np.outer(h1, h1.conj()))


def test_qos_rows_equivalent_to_sinr():
    rng = np.random.default_rng(3)
    s = sc.example1(6.0)
    for _ in range(20):
        W = [rng.standard_normal((12, 2)) + 1j * rng.standard_normal((12, 2)) for _ in range(3)]
        X = [w @ w.conj().T for w in W]
        for i, (row, u) in enumerate(zip(sc.qos_constraints(s), s.users)):
            ok_rows = row.residual(X) >= 0
            ok_sinr = theoretical_sinr(W, u.h, u.noise_power, i) >= u.sinr_target
            assert ok_rows == ok_sinr


def test_qos_vanishing_target():
    h = sc.steering_vector(0.0, 3)
    s = sc.Scenario(3, [sc.User(h, 1e-12)])
    X = [np.outer(h, h.conj())]
    assert sc.qos_constraints(s)[0].residual(X) > 0


def test_charging_broadside_received_power():
    N, M = 4, 2
    (row,) = sc.charging_constraints([0.0], 1.0, N, M)
    W = [np.eye(N)[:, :2], 0.5 * np.eye(N)[:, 1:3]]
    X = [w @ w.conj().T for w in W]
    h = sc.steering_vector(0.0, N)
    assert row.value(X) == pytest.approx(sum(np.linalg.norm(h.conj() @ w) ** 2 for w in W))


def test_charging_boundary_residual_zero():
    N = 3
    (row,) = sc.charging_constraints([20.0], 1.0, N, 1)
    h = sc.steering_vector(20.0, N)
    X = [np.outer(h, h.conj()) / N ** 2]
    assert row.residual(X) == pytest.approx(0.0, abs=1e-14)


def test_charging_rejects_nonpositive_threshold():
    with pytest.raises(ValueError):
        sc.charging_constraints([0.0], 0.0, 3, 1)


def test_sidelobe_groups():
    rows = sc.sidelobe_constraints([-30.0, 40.0], 0.1, 1e-5, 6, 2)
    assert [r.sense for r in rows] == ["<="] * 4 + [">="] * 4
    assert [r.b for r in rows] == [0.1, 0.1, 1e-5, 1e-5, -1e-5, -1e-5, 0.0, 0.0]
    assert np.array_equal(rows[2].A, rows[4].A)


def test_sidelobe_derivative_row_is_pattern_derivative():
    rng = np.random.default_rng(1)
    N = 8
    X = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    X = X @ X.conj().T
    rows = sc.sidelobe_constraints([25.0], 0.1, 1e-5, N, 1)

    def f(deg):
        h = sc.steering_vector(deg, N)
        return np.real(h.conj() @ X @ h)

    step = 1e-5
    dstep = np.rad2deg(step)
    d1 = (f(25.0 + dstep) - f(25.0 - dstep)) / (2 * step)
    d2 = (f(25.0 + dstep) - 2 * f(25.0) + f(25.0 - dstep)) / step ** 2
    assert rows[1].value([X]) == pytest.approx(d1, rel=1e-5)
    assert rows[3].value([X]) == pytest.approx(d2, rel=1e-3)


def test_nulling_eigenvalues():
    N, beta = 6, 0.2
    (row,) = sc.relaxed_nulling_constraints([15.0], beta, N, 1)
    ev = np.linalg.eigvalsh(row.A[0])
    n2 = float(N)
    assert ev[0] == pytest.approx(beta * n2 - n2)
    assert np.allclose(ev[1:], beta * n2)


def test_nulling_rejects_matched_beam():
    N = 5
    (row,) = sc.relaxed_nulling_constraints([15.0], 0.3, N, 1)
    h = sc.steering_vector(15.0, N)
    assert row.residual([np.outer(h, h.conj())]) < 0


def test_nulling_user_major_order():
    rows = sc.relaxed_nulling_constraints([0.0, 10.0], 0.1, 3, 2)
    occupied = [int(np.flatnonzero(np.any(r.A != 0, axis=(1, 2)))[0]) for r in rows]
    assert occupied == [0, 0, 1, 1]


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.1])
def test_nulling_rejects_beta(beta):
    with pytest.raises(ValueError):
        sc.relaxed_nulling_constraints([0.0], beta, 3, 1)


def test_perturb_zero_width_is_identity():
    nominal = np.array([-5.0, 10.0, 25.0])
    assert np.array_equal(sc.perturb_angles(nominal, np.random.default_rng(0), 0.0), nominal)


def test_perturb_statistics():
    rng = np.random.default_rng(7)
    nominal = np.full(100_000, 12.0)
    out = sc.perturb_angles(nominal, rng)
    assert np.all(np.abs(out - 12.0) <= 0.25)
    sigma = 0.5 / np.sqrt(12) / np.sqrt(out.size)
    assert abs(out.mean() - 12.0) < 3 * sigma


def test_perturb_seeded():
    a = sc.perturb_angles([1.0, 2.0], np.random.default_rng(5))
    b = sc.perturb_angles([1.0, 2.0], np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_example_counts():
    e1, e2, e4 = sc.example1(), sc.example2(), sc.example4()
    assert (e1.N, e1.M, e1.L) == (12, 3, 22)
    assert (e2.N, e2.M, e2.L) == (18, 3, 76)
    assert (e4.N, e4.M, e4.L) == (15, 3, 66)
    assert max(e1.L, e2.L, e4.L) <= max_constraints_for(8)


def test_example_defaults():
    e1 = sc.example1(10.0)
    assert e1.shaping[0].b == pytest.approx(10 ** 0.5)
    assert all(u.noise_power == 0.1 and u.sinr_target == pytest.approx(10.0) for u in e1.users)


def test_example_matrices_hermitian():
    for s in (sc.example1(), sc.example2(), sc.example4()):
        for row in s.constraints():
            assert np.max(np.abs(row.A - row.A.conj().transpose(0, 2, 1))) <= 1e-12


def test_example_perturbation_is_seeded():
    a = sc.example2(rng=np.random.default_rng(4))
    b = sc.example2(rng=np.random.default_rng(4))
    assert np.array_equal(a.channels, b.channels)
    assert not np.allclose(a.channels, sc.example2().channels)


def test_with_sinr_per_user():
    s = sc.example1().with_sinr([1.0, 2.0, 3.0])
    assert [u.sinr_target for u in s.users] == [1.0, 2.0, 3.0]


def test_db_conversions():
    assert sc.db2lin(10.0) == pytest.approx(10.0)
    assert sc.lin2db(sc.db2lin(3.3)) == pytest.approx(3.3)
