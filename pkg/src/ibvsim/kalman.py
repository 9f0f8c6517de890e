"""Kalman filtering of the feature vector with dropout handling.

Model:
    x(k) = A x(k-1) + w(k),   w ~ N(0, Q)
    z(k) = C x(k)   + v(k),   v ~ N(0, R)

with A = I for the feature hold model. During measurement dropouts the
filter runs prediction-only, so the controller always receives an
estimate; ``steps_since_update`` counts ticks since the last correction
and flags stale estimates once it exceeds ``max_dropout``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SingularInnovation
from .moments import FeatureVector

_DEFAULT_MEAS_STD = np.array([0.02, 0.02, 0.02, 0.05])


@dataclass
class KalmanConfig:
    """Transition/observation model and noise covariances."""

    a_mat: np.ndarray = field(default_factory=lambda: np.eye(4))
    c_mat: np.ndarray = field(default_factory=lambda: np.eye(4))
    q_noise: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(4))
    r_noise: np.ndarray = field(default_factory=lambda: np.diag(_DEFAULT_MEAS_STD**2))
    p0: np.ndarray = field(default_factory=lambda: 1e-2 * np.eye(4))
    x0: np.ndarray | None = None
    max_dropout: int = 30

    def __post_init__(self):
        for name in ("a_mat", "c_mat", "q_noise", "r_noise", "p0"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=float).ravel()

    def validate(self) -> list[str]:
        out = []
        for name in ("a_mat", "c_mat", "q_noise", "r_noise", "p0"):
            if getattr(self, name).shape != (4, 4):
                out.append(f"{name}: must be 4x4")
        for name in ("q_noise", "r_noise", "p0"):
            mat = getattr(self, name)
            if mat.shape != (4, 4):
                continue
            if np.abs(mat - mat.T).max() > 1e-9 * (1.0 + np.abs(mat).max()):
                out.append(f"{name}: must be symmetric")
            elif np.linalg.eigvalsh(mat).min() < -1e-9 * (1.0 + np.abs(mat).max()):
                out.append(f"{name}: must be positive semi-definite")
        if self.r_noise.shape == (4, 4) and np.all(self.r_noise == self.r_noise.T):
            if np.linalg.eigvalsh(self.r_noise).min() <= 0.0:
                out.append("r_noise: must be positive definite")
        if self.x0 is not None and self.x0.shape != (4,):
            out.append("x0: must have 4 entries")
        if self.max_dropout < 1:
            out.append(f"max_dropout: must be >= 1, got {self.max_dropout}")
        return out


@dataclass(frozen=True)
class KalmanState:
    """Estimate, covariance, and dropout bookkeeping."""

    x_hat: np.ndarray
    p_cov: np.ndarray
    steps_since_update: int = 0
    initialized: bool = False

    def stale(self, cfg: KalmanConfig) -> bool:
        return self.steps_since_update > cfg.max_dropout


def init_state(cfg: KalmanConfig) -> KalmanState:
    """Fresh state; the estimate seeds from the first measurement when x0 is None."""
    x0 = np.zeros(4) if cfg.x0 is None else cfg.x0.copy()
    return KalmanState(
        x_hat=x0,
        p_cov=cfg.p0.copy(),
        steps_since_update=0,
        initialized=cfg.x0 is not None,
    )


def predict(state: KalmanState, cfg: KalmanConfig) -> KalmanState:
    """Time update: propagate the estimate and inflate the covariance."""
    A = cfg.a_mat
    x = A @ state.x_hat
    P = A @ state.p_cov @ A.T + cfg.q_noise
    return replace(
        state,
        x_hat=x,
        p_cov=P,
        steps_since_update=state.steps_since_update + 1,
    )


def update(state: KalmanState, z, cfg: KalmanConfig) -> KalmanState:
    """Measurement update on a post-prediction prior."""
    z = np.asarray(z, dtype=float).ravel()
    C = cfg.c_mat
    P = state.p_cov
    innovation = z - C @ state.x_hat
    S = C @ P @ C.T + cfg.r_noise
    if np.linalg.cond(S) > 1e12:
        raise SingularInnovation("innovation covariance is not invertible")
    K = np.linalg.solve(S.T, (P @ C.T).T).T
    x = state.x_hat + K @ innovation
    P_new = (np.eye(4) - K @ C) @ P
    P_new = 0.5 * (P_new + P_new.T)
    return replace(
        state,
        x_hat=x,
        p_cov=P_new,
        steps_since_update=0,
        initialized=True,
    )


def step(
    state: KalmanState,
    z,
    cfg: KalmanConfig,
) -> tuple[KalmanState, np.ndarray]:
    """Predict, correct when a measurement is present, return the estimate.

    ``z`` may be None (dropout tick), an array, or a FeatureVector. The
    returned estimate is defined at every step; callers can treat the
    estimate as a stale-hold advisory once ``state.stale(cfg)`` is true.
    """
    state = predict(state, cfg)
    if z is not None:
        if isinstance(z, FeatureVector):
            z = z.as_array()
        if not state.initialized:
            # First sighting pins the estimate; covariance stays at the prior.
            state = replace(
                state,
                x_hat=np.asarray(z, dtype=float).ravel().copy(),
                steps_since_update=0,
                initialized=True,
            )
        else:
            state = update(state, z, cfg)
    return state, state.x_hat.copy()
