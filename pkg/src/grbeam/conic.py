"""Dense primal-dual interior-point method for small linear conic programs.

Solves the standard-form pair

    min  <c, x>   s.t.  A x = b,            x in K
    max  <b, y>   s.t.  A^T y + z = c,      z in K

with K a product of a nonnegative orthant and real symmetric PSD cones.  The
iteration runs on the homogeneous self-dual embedding (variables x, y, z, tau,
kappa) so that infeasible and unbounded instances terminate with a
certificate instead of diverging.  Search directions use Nesterov-Todd
scaling and a Mehrotra predictor-corrector step.

Cone vectors are pairs ``(l, s)``: a 1-D array for the orthant and a list of
square symmetric matrices for the PSD blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

STEP_FRACTION = 0.99
STALL_ITERATIONS = 8
REFINE_STEPS = 1


@dataclass
class ConicData:
    """Constraint data: ``Al`` is (m, p), ``As[j]`` is (m, n_j, n_j)."""

    Al: np.ndarray
    As: list
    b: np.ndarray
    cl: np.ndarray
    cs: list

    @property
    def m(self):
        return self.b.shape[0]

    @property
    def degree(self):
        return self.Al.shape[1] + sum(c.shape[0] for c in self.cs)

    def apply(self, x):
        l, s = x
        out = self.Al @ l
        for Aj, Sj in zip(self.As, s):
            out = out + np.tensordot(Aj, Sj, axes=([1, 2], [0, 1]))
        return out

    def adjoint(self, y):
        l = self.Al.T @ y
        s = [_sym(np.tensordot(y, Aj, axes=(0, 0))) for Aj in self.As]
        return l, s


@dataclass
class ConicResult:
    status: str  # optimal | infeasible | unbounded | max_iterations | stalled
    x: tuple
    y: np.ndarray
    z: tuple
    iterations: int
    primal_objective: float
    dual_objective: float
    history: list = field(default_factory=list)


def _sym(S):
    return 0.5 * (S + S.T)


def _dot(u, v):
    return float(u[0] @ v[0]) + sum(float(np.vdot(a, b)) for a, b in zip(u[1], v[1]))


def _axpy(alpha, u, v):
    return v[0] + alpha * u[0], [b + alpha * a for a, b in zip(u[1], v[1])]


def _scale(alpha, u):
    return alpha * u[0], [alpha * a for a in u[1]]


def _sub(u, v):
    return u[0] - v[0], [a - b for a, b in zip(u[1], v[1])]


def _norm_inf(u):
    vals = [np.max(np.abs(u[0]), initial=0.0)]
    vals += [np.max(np.abs(a), initial=0.0) for a in u[1]]
    return float(max(vals))


def _identity_like(c):
    return np.ones_like(c[0]), [np.eye(a.shape[0]) for a in c[1]]


def _psd_factor(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(_sym(S))
        w = np.maximum(w, np.finfo(float).tiny)
        return V * np.sqrt(w)


class _Scaling:
    """Nesterov-Todd scaling point of a primal-dual interior pair (x, z).

    For PSD blocks R satisfies R^{-1} X R^{-T} = R^T Z R = diag(lam).  For the
    orthant w = sqrt(x / z) and lam = sqrt(x z).
    """

    def __init__(self, x, z):
        xl, xs = x
        zl, zs = z
        self.wl = np.sqrt(xl / zl)
        self.laml = np.sqrt(xl * zl)
        self.R, self.Rinv, self.lams = [], [], []
        for X, Z in zip(xs, zs):
            L1 = _psd_factor(X)
            L2 = _psd_factor(Z)
            U, lam, Vt = np.linalg.svd(L2.T @ L1)
            R = L1 @ Vt.T / np.sqrt(lam)
            Rinv = (np.sqrt(lam)[:, None] * Vt) @ np.linalg.inv(L1)
            self.R.append(R)
            self.Rinv.append(Rinv)
            self.lams.append(lam)

    def apply_H(self, v):
        """x-space image W v W of a dual-space vector."""
        return self.wl ** 2 * v[0], [R @ (R.T @ V @ R) @ R.T for R, V in zip(self.R, v[1])]

    def scale_primal(self, dx):
        return dx[0] / self.wl, [Ri @ D @ Ri.T for Ri, D in zip(self.Rinv, dx[1])]

    def scale_dual(self, dz):
        return dz[0] * self.wl, [R.T @ D @ R for R, D in zip(self.R, dz[1])]

    def unscale_primal(self, u):
        return u[0] * self.wl, [R @ U @ R.T for R, U in zip(self.R, u[1])]

    def lam_sq(self):
        return self.laml ** 2, [np.diag(lam ** 2) for lam in self.lams]

    def lam_inv_solve(self, rhs):
        """Solve lam o u = rhs for u (Jordan product with diagonal lam)."""
        ul = rhs[0] / self.laml
        us = [2.0 * Rh / (lam[:, None] + lam[None, :]) for lam, Rh in zip(self.lams, rhs[1])]
        return ul, us


def _jordan(u, v):
    return u[0] * v[0], [_sym(a @ b) for a, b in zip(u[1], v[1])]


def _max_step_scaled(lam_l, lams, d):
    """Largest alpha with lam + alpha d in K (lam diagonal)."""
    alpha = np.inf
    neg = d[0] < 0
    if np.any(neg):
        alpha = min(alpha, float(np.min(-lam_l[neg] / d[0][neg])))
    for lam, D in zip(lams, d[1]):
        s = 1.0 / np.sqrt(lam)
        ev = np.linalg.eigvalsh(_sym(s[:, None] * D * s[None, :]))
        if ev[0] < 0:
            alpha = min(alpha, -1.0 / ev[0])
    return alpha


def solve_conic(data: ConicData, feastol=1e-10, gaptol=1e-10, inftol=1e-9,
                max_iter=200, row_scale=None) -> ConicResult:
    """Run the embedding to optimality or to an infeasibility certificate.

    ``row_scale`` gives per-row denominators for the primal residual test;
    by default every row uses max(1, |b|_inf).
    """
    A_op, b = data, data.b
    c = (data.cl, data.cs)
    m = data.m
    nu = data.degree

    x = _identity_like(c)
    z = _identity_like(c)
    y = np.zeros(m)
    tau = kappa = 1.0

    bnorm = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    if row_scale is None:
        row_scale = np.full(m, bnorm)
    cnorm = max(1.0, _norm_inf(c))
    history = []
    best = None
    status = "max_iterations"
    it = 0

    for it in range(max_iter + 1):
        Ax = A_op.apply(x)
        ATy = A_op.adjoint(y)
        cx, by = _dot(c, x), float(b @ y)
        rp = Ax - tau * b
        rd = _sub(_axpy(1.0, ATy, z), _scale(tau, c))
        rg = cx - by + kappa
        mu = (_dot(x, z) + tau * kappa) / (nu + 1)

        pres = float(np.max(np.abs(rp) / row_scale, initial=0.0)) / tau
        dres = _norm_inf(rd) / tau / cnorm
        pobj, dobj = cx / tau, by / tau
        gap = abs(pobj - dobj) / max(1.0, abs(pobj))
        history.append(dict(it=it, pres=pres, dres=dres, gap=gap, mu=mu, tau=tau, kappa=kappa))
        log.debug("it %3d pres %.2e dres %.2e gap %.2e mu %.2e tau %.2e kappa %.2e",
                  it, pres, dres, gap, mu, tau, kappa)

        if pres <= feastol and dres <= feastol and gap <= gaptol:
            status = "optimal"
            break
        if by > 0:
            ATyz = _axpy(1.0, ATy, z)
            if _norm_inf(ATyz) / by <= inftol * cnorm / bnorm and tau < 1e-3 * kappa:
                status = "infeasible"
                break
        if cx < 0:
            if float(np.max(np.abs(Ax), initial=0.0)) / -cx <= inftol * bnorm / cnorm and tau < 1e-3 * kappa:
                status = "unbounded"
                break
        merit = max(pres, dres, gap)
        # tau / kappa collapsing means a certificate is forming; not a stall
        certifying = tau < 1e-2 * kappa
        if best is None or merit < best[0]:
            best = (merit, x, y, z, tau, it)
        elif it - best[5] >= STALL_ITERATIONS and not certifying:
            status = "stalled"
            break
        if it == max_iter:
            break

        try:
            step = _iterate(data, c, x, y, z, tau, kappa, rp, rd, rg, mu)
        except (np.linalg.LinAlgError, FloatingPointError):
            status = "stalled"
            break
        if step is None:
            status = "stalled"
            break
        x, y, z, tau, kappa = step

    if status in ("max_iterations", "stalled") and best is not None:
        _, x, y, z, tau, _ = best

    if status in ("infeasible", "unbounded"):
        # Certificates are returned unnormalized by tau.
        return ConicResult(status, x, y, z, it, _dot(c, x), float(b @ y), history)
    x_hat = _scale(1.0 / tau, x)
    z_hat = _scale(1.0 / tau, z)
    y_hat = y / tau
    return ConicResult(status, x_hat, y_hat, z_hat, it, _dot(c, x_hat), float(b @ y_hat), history)


def _iterate(data, c, x, y, z, tau, kappa, rp, rd, rg, mu):
    """One predictor-corrector step; returns the new iterate or None."""
    A_op, b, m = data, data.b, data.m
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        W = _Scaling(x, z)
        # Schur complement A W A^T of the scaled normal equations.
        Msc = (data.Al * W.wl ** 2) @ data.Al.T
        for R, Aj in zip(W.R, data.As):
            Gj = (R.T @ Aj @ R).reshape(m, -1)
            Msc += Gj @ Gj.T
        Msc = _sym(Msc)
        try:
            chol = sla.cho_factor(Msc + 1e-14 * np.trace(Msc) / m * np.eye(m), lower=True)
            base_solve = lambda r: sla.cho_solve(chol, r)
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(Msc)
            base_solve = lambda r: sla.lu_solve(lu, r)

        def msolve(r):
            # A few rounds of iterative refinement against the unregularised matrix.
            sol = base_solve(r)
            for _ in range(REFINE_STEPS):
                sol = sol + base_solve(r - Msc @ sol)
            return sol

        Hc = W.apply_H(c)
        AHc = A_op.apply(Hc)
        dy2 = msolve(b + AHc)
        AT_dy2 = A_op.adjoint(dy2)
        coef = _dot(Hc, AT_dy2) - _dot(c, Hc) - float(b @ dy2) - kappa / tau

        def newton(r1, r2, r3, rc, rtau):
            Hr2 = W.apply_H(r2)
            base = _sub(rc, Hr2)
            dy1 = msolve(r1 - A_op.apply(base))
            AT_dy1 = A_op.adjoint(dy1)
            rhs = r3 - rtau / tau - _dot(c, base) - _dot(c, W.apply_H(AT_dy1)) + float(b @ dy1)
            dtau = rhs / coef
            dy = dy1 + dtau * dy2
            AT_dy = A_op.adjoint(dy)
            dz = _axpy(dtau, c, _sub(r2, AT_dy))
            dx = _sub(rc, W.apply_H(dz))
            dkappa = (rtau - kappa * dtau) / tau
            return dx, dy, dz, dtau, dkappa

        def step_length(dx, dz, dtau, dkappa):
            a = min(_max_step_scaled(W.laml, W.lams, W.scale_primal(dx)),
                    _max_step_scaled(W.laml, W.lams, W.scale_dual(dz)))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        neg_x = _scale(-1.0, x)
        dxa, dya, dza, dtaua, dkappaa = newton(-rp, _scale(-1.0, rd), -rg, neg_x, -tau * kappa)
        alpha_a = min(1.0, step_length(dxa, dza, dtaua, dkappaa))
        sigma = (1.0 - alpha_a) ** 3

        ds_a, dzs_a = W.scale_primal(dxa), W.scale_dual(dza)
        corr = _jordan(ds_a, dzs_a)
        lam2 = W.lam_sq()
        target = _identity_like(c)
        rhs = _sub(_sub(_scale(sigma * mu, target), lam2), corr)
        rc = W.unscale_primal(W.lam_inv_solve(rhs))
        eta = 1.0 - sigma
        rtau = sigma * mu - tau * kappa - dtaua * dkappaa
        dx, dy, dz, dtau, dkappa = newton(-eta * rp, _scale(-eta, rd), -eta * rg, rc, rtau)
        alpha = min(1.0, STEP_FRACTION * step_length(dx, dz, dtau, dkappa))

        if not np.isfinite(alpha) or alpha < 1e-12:
            return None

        x = _axpy(alpha, dx, x)
        z = _axpy(alpha, dz, z)
        x = (x[0], [_sym(S) for S in x[1]])
        z = (z[0], [_sym(S) for S in z[1]])
        return x, y + alpha * dy, z, tau + alpha * dtau, kappa + alpha * dkappa
