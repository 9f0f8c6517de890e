"""Finite-horizon error-regulation MPC condensed into a dense QP.

The error dynamics are e(k+1) = A e(k) + B u(k) with A = I and
B = T_s * L, relinearized around the current feature point at every
control step. Stacking the horizon gives E = Phi e(k) + Gamma U and a
quadratic cost in U alone; box bounds on inputs, predicted errors, and
the terminal error become linear inequalities on U. The first block of
the optimizer is applied and everything is re-solved next tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, SingularModel
from .interaction import ControlInput
from .qp import QpProblem, QpSolution, QpStatus, solve_qp

SOFT_PENALTY = 1e6  # quadratic weight on constraint slack in the fallback solve


def _diag4(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


@dataclass
class MpcConfig:
    """Horizon, weights, bounds, and constraint switches for the controller."""

    horizon: int = 20
    sample_period: float = 1.0 / 30.0
    q_weight: np.ndarray = field(default_factory=lambda: _diag4([10.0, 10.0, 10.0, 5.0]))
    r_weight: np.ndarray = field(default_factory=lambda: np.eye(4))
    p_term: np.ndarray = field(default_factory=lambda: 10.0 * _diag4([10.0, 10.0, 10.0, 5.0]))
    e_min: np.ndarray = field(default_factory=lambda: -np.array([2.0, 2.0, 3.0, math.pi]))
    e_max: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 3.0, math.pi]))
    u_min: np.ndarray = field(default_factory=lambda: -np.array([1.0, 1.0, 1.0, 0.8]))
    u_max: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0, 0.8]))
    eps_term: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 1.0, 0.5]))
    input_constraints: bool = True
    state_constraints: bool = True
    terminal_constraint: bool = True

    def __post_init__(self):
        for name in ("q_weight", "r_weight", "p_term"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("e_min", "e_max", "u_min", "u_max", "eps_term"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())

    def validate(self) -> list[str]:
        """All invariant violations, with the offending field named."""
        out = []
        if self.horizon < 1:
            out.append(f"horizon: must be >= 1, got {self.horizon}")
        if self.sample_period <= 0.0:
            out.append(f"sample_period: must be > 0, got {self.sample_period}")
        for name in ("q_weight", "r_weight", "p_term"):
            mat = getattr(self, name)
            if mat.shape != (4, 4):
                out.append(f"{name}: must be 4x4")
                continue
            if np.abs(mat - mat.T).max() > 1e-9 * (1.0 + np.abs(mat).max()):
                out.append(f"{name}: must be symmetric")
            elif np.linalg.eigvalsh(mat).min() < -1e-9 * (1.0 + np.abs(mat).max()):
                out.append(f"{name}: must be positive semi-definite")
        for name in ("e_min", "e_max", "u_min", "u_max", "eps_term"):
            if getattr(self, name).shape != (4,):
                out.append(f"{name}: must have 4 entries")
        if self.e_min.shape == (4,) and self.e_max.shape == (4,):
            if not np.all(self.e_min < self.e_max):
                out.append("e_min/e_max: require e_min < e_max componentwise")
        if self.u_min.shape == (4,) and self.u_max.shape == (4,):
            if not np.all(self.u_min < self.u_max):
                out.append("u_min/u_max: require u_min < u_max componentwise")
        if self.eps_term.shape == (4,) and not np.all(self.eps_term > 0.0):
            out.append("eps_term: must be strictly positive componentwise")
        return out

    def with_flags(
        self,
        input_constraints: bool,
        state_constraints: bool,
        terminal_constraint: bool,
    ) -> "MpcConfig":
        return replace(
            self,
            input_constraints=input_constraints,
            state_constraints=state_constraints,
            terminal_constraint=terminal_constraint,
        )


@dataclass(frozen=True)
class PredictionMatrices:
    """Stacked prediction E = Phi e(k) + Gamma U over the horizon."""

    phi: np.ndarray    # (4N, 4)
    gamma: np.ndarray  # (4N, 4N)

    @property
    def horizon(self) -> int:
        return self.phi.shape[0] // 4


def discretize(L: np.ndarray, sample_period: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold error model around the current point: A = I, B = T_s L."""
    if sample_period <= 0.0:
        raise ValueError(f"sample_period must be > 0, got {sample_period}")
    L = np.asarray(L, dtype=float)
    return np.eye(4), sample_period * L


def build_prediction(A: np.ndarray, B: np.ndarray, horizon: int) -> PredictionMatrices:
    """Stack A-powers and the lower block-triangular input response."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    nx = A.shape[0]
    N = horizon
    if np.array_equal(A, np.eye(nx)):
        phi = np.tile(np.eye(nx), (N, 1))
        gamma = np.kron(np.tril(np.ones((N, N))), B)
        return PredictionMatrices(phi=phi, gamma=gamma)
    powers = [np.eye(nx)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    phi = np.vstack(powers[1:])
    gamma = np.zeros((nx * N, nx * N))
    for i in range(N):
        for j in range(i + 1):
            gamma[i * nx:(i + 1) * nx, j * nx:(j + 1) * nx] = powers[i - j] @ B
    return PredictionMatrices(phi=phi, gamma=gamma)


def condense(e_k: np.ndarray, pred: PredictionMatrices, cfg: MpcConfig) -> QpProblem:
    """Express the horizon cost and constraints in the stacked inputs alone.

    The stage weight applies to every predicted error e(k+1)..e(k+N) and
    the terminal weight is added on the final block, so
    Qbar = blockdiag(Q, ..., Q, Q + P).
    """
    e_k = np.asarray(e_k, dtype=float).ravel()
    if e_k.size != 4:
        raise DimensionMismatch(f"error vector has {e_k.size} entries, expected 4")
    N = pred.horizon
    if pred.gamma.shape != (4 * N, 4 * N) or pred.phi.shape != (4 * N, 4):
        raise DimensionMismatch("prediction matrices do not conform to the horizon")

    qbar = np.zeros((4 * N, 4 * N))
    for i in range(N):
        qbar[4 * i:4 * i + 4, 4 * i:4 * i + 4] = cfg.q_weight
    qbar[-4:, -4:] += cfg.p_term
    rbar = np.kron(np.eye(N), cfg.r_weight)

    gamma, phi = pred.gamma, pred.phi
    H = 2.0 * (gamma.T @ qbar @ gamma + rbar)
    H = 0.5 * (H + H.T)
    f = 2.0 * gamma.T @ qbar @ (phi @ e_k)

    g_rows = []
    w_rows = []
    if cfg.input_constraints:
        eye = np.eye(4 * N)
        g_rows += [eye, -eye]
        w_rows += [np.tile(cfg.u_max, N), -np.tile(cfg.u_min, N)]
    if cfg.state_constraints:
        free = phi @ e_k
        g_rows += [gamma, -gamma]
        w_rows += [np.tile(cfg.e_max, N) - free, free - np.tile(cfg.e_min, N)]
    if cfg.terminal_constraint:
        gamma_n = gamma[-4:]
        free_n = phi[-4:] @ e_k
        g_rows += [gamma_n, -gamma_n]
        w_rows += [cfg.eps_term - free_n, cfg.eps_term + free_n]

    G = np.vstack(g_rows) if g_rows else None
    w = np.concatenate(w_rows) if w_rows else None
    return QpProblem(H=H, f=f, G=G, w=w)


def _soften(qp: QpProblem, pred: PredictionMatrices, cfg: MpcConfig) -> QpProblem:
    """Relax state and terminal rows with a shared per-feature slack s >= 0.

    The slack enters the cost as SOFT_PENALTY * ||s||^2, so the relaxed
    problem is always feasible (the input box alone admits a point) while
    heavily discouraging any constraint excess.
    """
    N = pred.horizon
    n = 4 * N
    n_input = 8 * N if cfg.input_constraints else 0
    m = qp.w.size

    H_aug = np.zeros((n + 4, n + 4))
    H_aug[:n, :n] = qp.H
    H_aug[n:, n:] = 2.0 * SOFT_PENALTY * np.eye(4)
    f_aug = np.concatenate([qp.f, np.zeros(4)])

    G_aug = np.zeros((m + 4, n + 4))
    G_aug[:m, :n] = qp.G
    # Soft rows get -1 on the slack of the corresponding feature channel.
    soft = np.arange(n_input, m)
    feat = soft % 4
    G_aug[soft, n + feat] = -1.0
    G_aug[m:, n:] = -np.eye(4)  # s >= 0
    w_aug = np.concatenate([qp.w, np.zeros(4)])
    return QpProblem(H=H_aug, f=f_aug, G=G_aug, w=w_aug)


def predict_errors(e_k: np.ndarray, pred: PredictionMatrices, U: np.ndarray) -> np.ndarray:
    """Stacked predicted errors for a given input sequence, shape (N, 4)."""
    e_k = np.asarray(e_k, dtype=float).ravel()
    U = np.asarray(U, dtype=float).ravel()
    return (pred.phi @ e_k + pred.gamma @ U).reshape(-1, 4)


def mpc_step(
    e_k: np.ndarray,
    L: np.ndarray,
    cfg: MpcConfig,
    tol: float = 1e-8,
    max_iter: int = 20000,
    warm_start: np.ndarray | None = None,
) -> tuple[ControlInput, QpSolution]:
    """One receding-horizon update: returns the first optimal input block.

    When the state or terminal constraints make the QP infeasible (or
    stall the solver), the step is re-solved with penalized slack and the
    solution is tagged SOFTENED_TERMINAL so the controller always emits a
    command.
    """
    L = np.asarray(L, dtype=float)
    if L.shape != (4, 4) or not np.all(np.isfinite(L)):
        raise SingularModel("interaction matrix must be a finite 4x4 matrix")
    A, B = discretize(L, cfg.sample_period)
    pred = build_prediction(A, B, cfg.horizon)
    qp = condense(e_k, pred, cfg)

    sol = solve_qp(qp, tol=tol, max_iter=max_iter, x0=warm_start)
    needs_soften = sol.status is QpStatus.INFEASIBLE or (
        sol.status is QpStatus.MAX_ITERATIONS and sol.kkt_residual > 1e-4
    )
    if needs_soften and (cfg.state_constraints or cfg.terminal_constraint):
        soft_qp = _soften(qp, pred, cfg)
        soft_sol = solve_qp(soft_qp, tol=tol, max_iter=max_iter)
        n = 4 * cfg.horizon
        sol = QpSolution(
            x=soft_sol.x[:n],
            objective=soft_sol.objective,
            status=(
                QpStatus.SOFTENED_TERMINAL
                if soft_sol.status is QpStatus.OPTIMAL
                else soft_sol.status
            ),
            kkt_residual=soft_sol.kkt_residual,
            iterations=sol.iterations + soft_sol.iterations,
            duals=soft_sol.duals,
            message="constraints relaxed with penalized slack",
        )
    u = ControlInput.from_array(sol.x[:4])
    return u, sol
