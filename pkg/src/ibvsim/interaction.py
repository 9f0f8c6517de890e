"""Interaction matrix of the moment features and the classical servo law.

The feature rates obey q_dot = L(t) v_c for camera velocity
v_c = (v_x, v_y, v_z, omega_z), with

    L = [[1/Z, 0,   0,   y_n],
         [0,   1/Z, 0,  -x_n],
         [0,   0,   1/Z,  0 ],
         [0,   0,   0,   -1 ]]

which is invertible for any depth Z > 0 (det L = -1/Z^3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth, SingularInteraction
from .moments import FeatureVector

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ControlInput:
    """Commanded camera velocity: three translations and a yaw rate."""

    v_x: float
    v_y: float
    v_z: float
    omega_z: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("control input entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.v_z, self.omega_z])

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        vx, vy, vz, wz = np.asarray(arr, dtype=float).ravel()
        return cls(float(vx), float(vy), float(vz), float(wz))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.v_x, self.v_y, self.v_z, self.omega_z], dtype=dtype)


def interaction_matrix(q: FeatureVector | np.ndarray, z: float) -> np.ndarray:
    """4x4 interaction matrix evaluated at the given features and depth."""
    if z <= 0.0:
        raise NonPositiveDepth(f"depth must be positive, got {z}")
    x_n, y_n = np.asarray(q, dtype=float).ravel()[:2]
    inv_z = 1.0 / z
    return np.array(
        [
            [inv_z, 0.0, 0.0, y_n],
            [0.0, inv_z, 0.0, -x_n],
            [0.0, 0.0, inv_z, 0.0],
            [0.0, 0.0, 0.0, -1.0],
        ]
    )


def ibvs_law(
    q: FeatureVector | np.ndarray,
    q_star: FeatureVector | np.ndarray,
    L: np.ndarray,
    gain: float,
) -> ControlInput:
    """Classical proportional servo command v_c = -gain * L^-1 (q - q*)."""
    if gain <= 0.0:
        raise ValueError("gain must be strictly positive")
    L = np.asarray(L, dtype=float)
    if np.linalg.cond(L) > _COND_LIMIT:
        raise SingularInteraction("interaction matrix is numerically singular")
    e = np.asarray(q, dtype=float) - np.asarray(q_star, dtype=float)
    v = -gain * np.linalg.solve(L, e)
    return ControlInput.from_array(v)
