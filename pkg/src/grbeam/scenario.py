"""Channels, QoS rows and shaping-constraint builders.

Angles are in degrees at the API boundary.  Angle derivatives of the steering
vector are taken with respect to the angle in radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SENSES = (">=", "<=", "==")

# Nominal directions used by the four reference experiments.
USER_ANGLES_EX1 = (-5.0, 10.0, 25.0)
USER_ANGLES_EX4 = (-15.0, 5.0, 25.0)
TERMINAL_ANGLES = (
    -80.0, -75.0, -70.0, -65.0, -60.0, -55.0, -45.0, -35.0, -25.0, -8.0, -2.0,
    12.0, 18.0, 35.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0,
)
COCHANNEL_ANGLES_EX2 = (
    -89.375, -80.0, -70.625, -61.25, -51.875, -42.5, -33.125, -23.75, -14.375,
    2.0, 3.0, 17.0, 18.0, 34.375, 43.75, 53.125, 62.5, 71.875, 81.25,
)
NOISE_POWER = 0.1


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class User:
    h: np.ndarray
    sinr_target: float
    noise_power: float = NOISE_POWER

    def __post_init__(self):
        if self.sinr_target <= 0:
            raise ValueError("SINR target must be positive")
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")
        if np.linalg.norm(self.h) == 0:
            raise ValueError("channel must be nonzero")


@dataclass(frozen=True, eq=False)
class ShapingConstraint:
    """One row sum_m Tr(A[m] X_m) <sense> b.

    ``A`` has shape (M, N, N); every slice is Hermitian but need not be PSD.
    """

    A: np.ndarray
    b: float
    sense: str

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown constraint sense {self.sense!r}")
        A = np.asarray(self.A, dtype=complex)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("constraint matrices must have shape (M, N, N)")
        scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
        if np.max(np.abs(A - A.conj().transpose(0, 2, 1)), initial=0.0) > 1e-12 * scale:
            raise ValueError("constraint matrices must be Hermitian")
        object.__setattr__(self, "A", A)

    def value(self, X_list) -> float:
        return float(sum(np.real(np.vdot(Am, Xm)) for Am, Xm in zip(self.A, X_list)))

    def residual(self, X_list) -> float:
        """Signed slack; nonnegative when the row is satisfied."""
        v = self.value(X_list)
        if self.sense == ">=":
            return v - self.b
        if self.sense == "<=":
            return self.b - v
        return -abs(v - self.b)


@dataclass(frozen=True, eq=False)
class Scenario:
    N: int
    users: tuple
    shaping: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "shaping", tuple(self.shaping))
        if not self.users:
            raise ValueError("scenario needs at least one user")
        for u in self.users:
            if u.h.shape != (self.N,):
                raise ValueError("channel length does not match antenna count")
        for c in self.shaping:
            if c.A.shape != (self.M, self.N, self.N):
                raise ValueError("shaping matrices have inconsistent dimensions")

    @property
    def M(self) -> int:
        return len(self.users)

    @property
    def L(self) -> int:
        return len(self.shaping)

    @property
    def channels(self) -> np.ndarray:
        return np.stack([u.h for u in self.users])

    def constraints(self) -> list[ShapingConstraint]:
        """QoS rows followed by shaping rows, in input order."""
        return qos_constraints(self) + list(self.shaping)

    def with_sinr(self, sinr_targets) -> "Scenario":
        targets = np.broadcast_to(np.asarray(sinr_targets, dtype=float), (self.M,))
        users = [User(u.h, float(t), u.noise_power) for u, t in zip(self.users, targets)]
        return Scenario(self.N, users, self.shaping)


def steering_vector(theta_deg: float, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be positive")
    k = np.arange(N)
    return np.exp(1j * np.pi * k * np.sin(np.deg2rad(theta_deg)))


def steering_derivatives(theta_deg: float, N: int):
    """Return h, dh/dmu and d^2h/dmu^2 with mu in radians."""
    mu = np.deg2rad(theta_deg)
    k = np.arange(N)
    h = np.exp(1j * np.pi * k * np.sin(mu))
    phase_rate = 1j * np.pi * k * np.cos(mu)
    dh = phase_rate * h
    d2h = (phase_rate ** 2 - 1j * np.pi * k * np.sin(mu)) * h
    return h, dh, d2h


def _outer(a, b):
    return np.outer(a, b.conj())


def _shared(A, M):
    return np.broadcast_to(A, (M,) + A.shape).copy()


def qos_constraints(scenario: Scenario) -> list[ShapingConstraint]:
    M, N = scenario.M, scenario.N
    rows = []
    for i, user in enumerate(scenario.users):
        R = _outer(user.h, user.h)
        A = np.empty((M, N, N), dtype=complex)
        for m in range(M):
            A[m] = R if m == i else -user.sinr_target * R
        rows.append(ShapingConstraint(A, user.sinr_target * user.noise_power, ">="))
    return rows


def charging_constraints(terminal_angles, b_min: float, N: int, M: int):
    """Minimum received power ``b_min`` (linear) at every charging terminal."""
    if b_min <= 0:
        raise ValueError("charging threshold must be positive")
    rows = []
    for theta in terminal_angles:
        h = steering_vector(theta, N)
        rows.append(ShapingConstraint(_shared(_outer(h, h), M), float(b_min), ">="))
    return rows


def sidelobe_constraints(cochannel_angles, cap: float, eps: float, N: int, M: int):
    """Interference caps plus flatness and curvature rows at each angle.

    Rows come in four groups of J = len(cochannel_angles): power caps (<= cap),
    first-derivative upper bounds (<= eps), first-derivative lower bounds
    (>= -eps) and curvature rows (>= 0).
    """
    if eps <= 0 or cap <= 0:
        raise ValueError("cap and eps must be positive")
    caps, upper, lower, curv = [], [], [], []
    for mu in cochannel_angles:
        h, dh, d2h = steering_derivatives(mu, N)
        D1 = _outer(dh, h) + _outer(h, dh)
        D2 = _outer(h, d2h) + _outer(d2h, h) + 2.0 * _outer(dh, dh)
        caps.append(ShapingConstraint(_shared(_outer(h, h), M), float(cap), "<="))
        upper.append(ShapingConstraint(_shared(D1, M), float(eps), "<="))
        lower.append(ShapingConstraint(_shared(D1, M), -float(eps), ">="))
        curv.append(ShapingConstraint(_shared(D2, M), 0.0, ">="))
    return caps + upper + lower + curv


def relaxed_nulling_constraints(cochannel_angles, beta: float, N: int, M: int):
    """Per-user leakage limits Tr(h h^H X_i) <= beta |h|^2 Tr(X_i).

    Ordered user-major: all angles for user 1, then user 2, ...
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    mats = []
    for theta in cochannel_angles:
        h = steering_vector(theta, N)
        mats.append(beta * np.vdot(h, h).real * np.eye(N) - _outer(h, h))
    rows = []
    for i in range(M):
        for A in mats:
            blocks = np.zeros((M, N, N), dtype=complex)
            blocks[i] = A
            rows.append(ShapingConstraint(blocks, 0.0, ">="))
    return rows


def perturb_angles(nominal_angles, rng: np.random.Generator, half_width: float = 0.25):
    if half_width < 0:
        raise ValueError("half_width must be nonnegative")
    nominal = np.asarray(nominal_angles, dtype=float)
    if half_width == 0:
        return nominal.copy()
    return nominal + rng.uniform(-half_width, half_width, size=nominal.shape)


def _users_at(angles, sinr_db, N, noise_power=NOISE_POWER):
    targets = np.broadcast_to(db2lin(sinr_db), (len(angles),))
    return [User(steering_vector(t, N), float(g), noise_power) for t, g in zip(angles, targets)]


def example1(sinr_db=10.0, rng=None, half_width=0.25, charge_db=5.0) -> Scenario:
    """Three users, 12 antennas, 22 charging terminals at 5 dB."""
    N = 12
    users_ang, term_ang = np.array(USER_ANGLES_EX1), np.array(TERMINAL_ANGLES)
    if rng is not None:
        users_ang = perturb_angles(users_ang, rng, half_width)
        term_ang = perturb_angles(term_ang, rng, half_width)
    users = _users_at(users_ang, sinr_db, N)
    return Scenario(N, users, charging_constraints(term_ang, float(db2lin(charge_db)), N, len(users)))


def example2(sinr_db=10.0, rng=None, half_width=0.25, cap=0.1, eps=1e-5) -> Scenario:
    """Three users, 18 antennas, 76 sidelobe rows from 19 co-channel users."""
    N = 18
    users_ang, co_ang = np.array(USER_ANGLES_EX1), np.array(COCHANNEL_ANGLES_EX2)
    if rng is not None:
        users_ang = perturb_angles(users_ang, rng, half_width)
        co_ang = perturb_angles(co_ang, rng, half_width)
    users = _users_at(users_ang, sinr_db, N)
    return Scenario(N, users, sidelobe_constraints(co_ang, cap, eps, N, len(users)))


def example4(sinr_db=10.0, beta=0.005, rng=None, half_width=0.25) -> Scenario:
    """Three users, 15 antennas, relaxed nulling towards 22 co-channel users."""
    N = 15
    users_ang, co_ang = np.array(USER_ANGLES_EX4), np.array(TERMINAL_ANGLES)
    if rng is not None:
        users_ang = perturb_angles(users_ang, rng, half_width)
        co_ang = perturb_angles(co_ang, rng, half_width)
    users = _users_at(users_ang, sinr_db, N)
    return Scenario(N, users, relaxed_nulling_constraints(co_ang, beta, N, len(users)))
