"""Dense convex quadratic programming.

Solves

    min  0.5 x' H x + f' x
    s.t. G x <= w,  A_eq x = b_eq

with an over-relaxed ADMM on the split form l <= M x <= u followed by an
active-set polish pass that solves the KKT system of the identified
active constraints, which brings KKT residuals down to linear-solver
precision. No external solver is used; everything is deterministic for
fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch

_SIGMA = 1e-6          # proximal regularization on x
_ALPHA = 1.6           # over-relaxation
_RHO_EQ_SCALE = 1e3    # penalty boost on equality rows
_RHO_BOUNDS = (1e-6, 1e6)
_CHECK_EVERY = 25


class QpStatus(Enum):
    OPTIMAL = "optimal"
    SOFTENED_TERMINAL = "softened_terminal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class QpProblem:
    """Quadratic program data in inequality/equality form."""

    H: np.ndarray
    f: np.ndarray
    G: np.ndarray | None = None
    w: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.f.size
        self.G = (
            np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float)
        )
        self.w = (
            np.zeros(0) if self.w is None else np.asarray(self.w, dtype=float).ravel()
        )
        self.A_eq = (
            np.zeros((0, n))
            if self.A_eq is None
            else np.asarray(self.A_eq, dtype=float)
        )
        self.b_eq = (
            np.zeros(0)
            if self.b_eq is None
            else np.asarray(self.b_eq, dtype=float).ravel()
        )
        self._check_dims()

    def _check_dims(self):
        n = self.f.size
        if self.H.shape != (n, n):
            raise DimensionMismatch(f"H has shape {self.H.shape}, expected ({n}, {n})")
        if self.G.shape[0] != self.w.size or (self.G.size and self.G.shape[1] != n):
            raise DimensionMismatch("inequality rows G and bounds w do not conform")
        if self.A_eq.shape[0] != self.b_eq.size or (
            self.A_eq.size and self.A_eq.shape[1] != n
        ):
            raise DimensionMismatch("equality rows A_eq and targets b_eq do not conform")

    @property
    def n(self) -> int:
        return self.f.size

    def validate(self) -> list[str]:
        """Invariant check used by configuration validation and tests."""
        problems = []
        scale = 1.0 + float(np.abs(self.H).max(initial=0.0))
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-9 * scale:
            problems.append("H is not symmetric")
        else:
            eigs = np.linalg.eigvalsh(0.5 * (self.H + self.H.T))
            if eigs.min(initial=0.0) < -1e-9 * scale:
                problems.append(f"H has negative eigenvalue {eigs.min():.3e}")
        return problems

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    status: QpStatus
    kkt_residual: float
    iterations: int
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""


def _kkt_residuals(H, f, M, l, u, x, y):
    """(stationarity, primal, dual, complementarity) infinity norms."""
    stat = float(np.abs(H @ x + f + M.T @ y).max(initial=0.0)) if y.size else float(
        np.abs(H @ x + f).max(initial=0.0)
    )
    if M.shape[0] == 0:
        return stat, 0.0, 0.0, 0.0
    mx = M @ x
    pfeas = float(np.maximum(np.maximum(mx - u, l - mx), 0.0).max(initial=0.0))
    ineq_lo = np.isinf(l)
    dfeas = float(np.maximum(-y[ineq_lo], 0.0).max(initial=0.0)) if ineq_lo.any() else 0.0
    y_pos = np.maximum(y, 0.0)
    y_neg = np.maximum(-y, 0.0)
    up_gap = np.where(np.isfinite(u), np.abs(u - mx), 0.0)
    lo_gap = np.where(np.isfinite(l), np.abs(mx - l), 0.0)
    eq = np.isfinite(l) & np.isfinite(u) & (u - l < 1e-14)
    comp_terms = y_pos * up_gap + y_neg * lo_gap
    comp_terms[eq] = 0.0
    comp = float(comp_terms.max(initial=0.0))
    return stat, pfeas, dfeas, comp


def _polish(H, f, M, l, u, x, y, slack_tol, dual_tol):
    """Solve the KKT system of the presumed active set.

    Returns (x, y, kkt) or None when the active-set guess is inconsistent.
    """
    n = f.size
    mx = M @ x
    eq = np.isfinite(l) & np.isfinite(u) & (u - l < 1e-14)
    act_up = ~eq & np.isfinite(u) & ((u - mx < slack_tol) | (y > dual_tol))
    act_lo = ~eq & ~act_up & np.isfinite(l) & ((mx - l < slack_tol) | (y < -dual_tol))
    rows = np.where(eq | act_up | act_lo)[0]
    rhs_act = np.where(act_lo, l, u)[rows]
    A = M[rows]
    k = rows.size

    delta = 1e-11
    kkt = np.block(
        [[H + delta * np.eye(n), A.T], [A, -delta * np.eye(k)]]
    )
    rhs = np.concatenate([-f, rhs_act])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    # Iterative refinement against the unregularized KKT system.
    for _ in range(2):
        res_top = -f - (H @ sol[:n] + A.T @ sol[n:])
        res_bot = rhs_act - A @ sol[:n]
        corr = np.linalg.solve(kkt, np.concatenate([res_top, res_bot]))
        sol = sol + corr
    x_new = sol[:n]
    nu = sol[n:]

    y_new = np.zeros(M.shape[0])
    y_new[rows] = nu
    sign_ok = np.all(y_new[act_up] > -1e-9) and np.all(y_new[act_lo] < 1e-9)
    if not sign_ok:
        return None
    stat, pfeas, dfeas, comp = _kkt_residuals(H, f, M, l, u, x_new, y_new)
    return x_new, y_new, max(stat, pfeas, dfeas, comp)


def _solve_unconstrained(qp: QpProblem, tol: float) -> QpSolution:
    H = 0.5 * (qp.H + qp.H.T)
    try:
        x = np.linalg.solve(H, -qp.f)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(H + 1e-12 * np.eye(qp.n), -qp.f, rcond=None)[0]
    kkt = float(np.abs(H @ x + qp.f).max(initial=0.0))
    status = QpStatus.OPTIMAL if kkt <= tol else QpStatus.MAX_ITERATIONS
    return QpSolution(
        x=x,
        objective=qp.objective(x),
        status=status,
        kkt_residual=kkt,
        iterations=0,
    )


def solve_qp(
    qp: QpProblem,
    tol: float = 1e-8,
    max_iter: int = 20000,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> QpSolution:
    """Solve a convex QP to the requested KKT residual.

    The returned status is OPTIMAL only when the certified KKT residual
    (stationarity, primal/dual feasibility, complementarity) is at or
    below ``tol``. On iteration exhaustion the best iterate found is
    returned with status MAX_ITERATIONS; a detected primal-infeasibility
    certificate yields status INFEASIBLE.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = qp.n
    m_ineq = qp.w.size
    p_eq = qp.b_eq.size
    if m_ineq + p_eq == 0:
        return _solve_unconstrained(qp, tol)

    H = 0.5 * (qp.H + qp.H.T)
    f = qp.f
    M = np.vstack([qp.G, qp.A_eq])
    l = np.concatenate([np.full(m_ineq, -np.inf), qp.b_eq])
    u = np.concatenate([qp.w, qp.b_eq])
    m = m_ineq + p_eq

    rho = np.full(m, 1.0)
    rho[m_ineq:] *= _RHO_EQ_SCALE

    def factor(rho_vec):
        # The iteration only needs moderate accuracy (polish restores full
        # precision), so a precomputed inverse keeps the loop at one GEMV.
        K = H + _SIGMA * np.eye(n) + (M.T * rho_vec) @ M
        return np.linalg.inv(K)

    k_inv = factor(rho)

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=float).copy()
    z = np.clip(M @ x, l, u)

    best = (np.inf, x.copy(), y.copy())
    y_prev_check = y.copy()
    it = 0
    m_norm = max(1.0, float(np.abs(M).max(initial=0.0)))

    def try_finish(x_c, y_c):
        """Polish, then certify; returns the best (kkt, x, y) found."""
        candidates = [(max(_kkt_residuals(H, f, M, l, u, x_c, y_c)), x_c, y_c)]
        for slack_tol, dual_tol in ((1e-7, 1e-9), (1e-5, 1e-7)):
            p = _polish(H, f, M, l, u, x_c, y_c, slack_tol, dual_tol)
            if p is not None:
                candidates.append((p[2], p[0], p[1]))
                if p[2] <= tol:
                    break
        return min(candidates, key=lambda c: c[0])

    while it < max_iter:
        for _ in range(_CHECK_EVERY):
            rhs = _SIGMA * x - f + M.T @ (rho * z - y)
            x_tilde = k_inv @ rhs
            z_tilde = M @ x_tilde
            x = _ALPHA * x_tilde + (1.0 - _ALPHA) * x
            z_relaxed = _ALPHA * z_tilde + (1.0 - _ALPHA) * z
            z_new = np.clip(z_relaxed + y / rho, l, u)
            y = y + rho * (z_relaxed - z_new)
            z = z_new
            it += 1

        mx = M @ x
        r_prim = float(np.abs(mx - z).max(initial=0.0))
        r_dual = float(np.abs(H @ x + f + M.T @ y).max(initial=0.0))
        scale_p = max(float(np.abs(mx).max(initial=0.0)), float(np.abs(z).max(initial=0.0)), 1.0)
        scale_d = max(
            float(np.abs(H @ x).max(initial=0.0)),
            float(np.abs(f).max(initial=0.0)),
            float(np.abs(M.T @ y).max(initial=0.0)),
            1.0,
        )

        if max(r_prim, r_dual) < np.inf:
            kkt_now = max(_kkt_residuals(H, f, M, l, u, x, y))
            if kkt_now < best[0]:
                best = (kkt_now, x.copy(), y.copy())

        if r_prim <= 1e-4 * scale_p and r_dual <= 1e-4 * scale_d:
            kkt, xb, yb = try_finish(x, y)
            if kkt <= tol:
                return QpSolution(
                    x=xb,
                    objective=qp.objective(xb),
                    status=QpStatus.OPTIMAL,
                    kkt_residual=kkt,
                    iterations=it,
                    duals=yb[:m_ineq],
                    duals_eq=yb[m_ineq:],
                )
            if kkt < best[0]:
                best = (kkt, xb, yb)

        # Primal infeasibility certificate from the dual update direction.
        dy = y - y_prev_check
        y_prev_check = y.copy()
        dy_norm = float(np.abs(dy).max(initial=0.0))
        if dy_norm > 1e-12:
            lo_open = np.isinf(l)
            if not np.any(dy[lo_open] < -1e-10 * dy_norm):
                mt_dy = float(np.abs(M.T @ dy).max(initial=0.0))
                dy_pos = np.maximum(dy, 0.0)
                dy_neg = np.maximum(-dy, 0.0)
                support = float(u @ dy_pos - np.where(lo_open, 0.0, l) @ dy_neg)
                if (
                    mt_dy <= 1e-9 * dy_norm * m_norm
                    and support <= -1e-9 * dy_norm
                ):
                    return QpSolution(
                        x=x,
                        objective=qp.objective(x),
                        status=QpStatus.INFEASIBLE,
                        kkt_residual=best[0],
                        iterations=it,
                        duals=y[:m_ineq],
                        duals_eq=y[m_ineq:],
                        message="primal infeasibility certificate found",
                    )

        # Penalty rebalancing keeps primal and dual residuals comparable.
        ratio = (r_prim / scale_p) / max(r_dual / scale_d, 1e-16)
        if ratio > 25.0 or ratio < 0.04:
            factor_change = float(np.clip(np.sqrt(ratio), 1e-3, 1e3))
            rho = np.clip(rho * factor_change, *_RHO_BOUNDS)
            k_inv = factor(rho)

    kkt, xb, yb = try_finish(best[1], best[2])
    if kkt <= tol:
        status = QpStatus.OPTIMAL
    else:
        status = QpStatus.MAX_ITERATIONS
    return QpSolution(
        x=xb,
        objective=qp.objective(xb),
        status=status,
        kkt_residual=kkt,
        iterations=it,
        duals=yb[:m_ineq],
        duals_eq=yb[m_ineq:],
        message="" if status is QpStatus.OPTIMAL else "iteration limit reached",
    )
