"""Closed-loop virtual environment for the servo controllers.

A planar target lies in the world z = 0 plane and a downward-looking
camera flies above it. Commands are (v_x, v_y, v_z, omega_z) in the
yaw-aligned frame: translations integrate into world position, omega_z
integrates into yaw. Image coordinates are read out so that positive
commanded motion produces positive feature motion, matching the sign
convention of the interaction model used by the controllers:

    x_img = (p - w) . xhat_yaw / Z,   y_img = (p - w) . yhat_yaw / Z

for camera position p, plane point w, and depth Z = p_z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, TargetBehindCamera, TrialDiverged
from .interaction import ControlInput, ibvs_law, interaction_matrix
from .kalman import KalmanConfig, init_state
from .kalman import step as kalman_step
from .moments import ConvexPolygon, FeatureVector, feature_vector, polygon_moments
from .mpc import MpcConfig, build_prediction, discretize, mpc_step, predict_errors
from .qp import QpStatus

DIVERGENCE_LIMIT = 100.0
BOUND_TOL = 1e-8

CONTROLLER_KINDS = ("ibvs", "mpc", "mpc1", "mpc2")

# (input_constraints, state_constraints, terminal_constraint) per kind.
CONTROLLER_FLAGS = {
    "mpc": (False, False, False),
    "mpc1": (True, False, False),
    "mpc2": (True, True, True),
}


def rectangle_target(
    width: float = 0.30, height: float = 0.18, center=(0.0, 0.0)
) -> ConvexPolygon:
    """Axis-aligned rectangular target on the world plane.

    The default is slightly anisotropic so the orientation feature is
    well defined (a square has an isotropic second-moment matrix).
    """
    cx, cy = center
    hw, hh = width / 2.0, height / 2.0
    return ConvexPolygon(
        np.array(
            [
                [cx - hw, cy - hh],
                [cx + hw, cy - hh],
                [cx + hw, cy + hh],
                [cx - hw, cy + hh],
            ]
        )
    )


@dataclass(frozen=True)
class CameraState:
    """World position, heading, and simulation clock of the camera."""

    position: np.ndarray
    yaw: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=float).ravel()
        )


@dataclass
class Scenario:
    """Trial configuration: geometry, controller choice, noise, timing."""

    target: ConvexPolygon = field(default_factory=rectangle_target)
    z_star: float = 1.0
    yaw_star: float = 0.0
    initial_position: np.ndarray = field(
        default_factory=lambda: np.array([0.4, 0.0, 1.3])
    )
    initial_yaw: float = math.radians(20.0)
    controller: str = "mpc2"
    kf_enabled: bool = False
    noise_std: np.ndarray = field(
        default_factory=lambda: np.array([0.02, 0.02, 0.02, 0.05])
    )
    dropout_windows: list = field(default_factory=list)
    duration: float = 15.0
    control_rate: float = 30.0
    safety_vmax: float = 1.0
    fov_half_extents: np.ndarray = field(default_factory=lambda: np.array([1.2, 1.2]))
    ibvs_gain: float = 1.0
    use_true_depth: bool = False
    velocity_lag_tau: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.initial_position = np.asarray(self.initial_position, dtype=float).ravel()
        self.noise_std = np.asarray(self.noise_std, dtype=float).ravel()
        self.fov_half_extents = np.asarray(self.fov_half_extents, dtype=float).ravel()
        self.dropout_windows = [(float(a), float(b)) for a, b in self.dropout_windows]
        self.controller = str(self.controller).lower()

    def validate(self) -> list[str]:
        out = []
        if self.controller not in CONTROLLER_KINDS:
            out.append(
                f"controller: unknown kind {self.controller!r}, "
                f"expected one of {CONTROLLER_KINDS}"
            )
        if self.z_star <= 0.0:
            out.append(f"z_star: must be > 0, got {self.z_star}")
        if self.initial_position.size != 3:
            out.append("initial_position: must have 3 entries")
        elif self.initial_position[2] <= 0.0:
            out.append("initial_position: camera must start above the target plane")
        if self.control_rate <= 0.0:
            out.append(f"control_rate: must be > 0, got {self.control_rate}")
        if self.duration <= 0.0:
            out.append(f"duration: must be > 0, got {self.duration}")
        if self.noise_std.size != 4:
            out.append("noise_std: must have 4 entries")
        elif np.any(self.noise_std < 0.0):
            out.append("noise_std: entries must be non-negative")
        for i, (t0, t1) in enumerate(self.dropout_windows):
            if not (0.0 <= t0 < t1 <= self.duration):
                out.append(
                    f"dropout_windows[{i}]: window [{t0}, {t1}) must satisfy "
                    f"0 <= start < end <= duration ({self.duration})"
                )
        if self.safety_vmax <= 0.0:
            out.append(f"safety_vmax: must be > 0, got {self.safety_vmax}")
        if self.fov_half_extents.size != 2 or np.any(self.fov_half_extents <= 0.0):
            out.append("fov_half_extents: must be 2 positive entries")
        if self.ibvs_gain <= 0.0:
            out.append(f"ibvs_gain: must be > 0, got {self.ibvs_gain}")
        if self.velocity_lag_tau < 0.0:
            out.append("velocity_lag_tau: must be >= 0")
        return out

    def initial_camera(self) -> CameraState:
        return CameraState(
            position=self.initial_position.copy(), yaw=self.initial_yaw, time=0.0
        )

    def desired_camera(self) -> CameraState:
        centroid = polygon_moments(self.target)
        return CameraState(
            position=np.array([centroid.centroid_x, centroid.centroid_y, self.z_star]),
            yaw=self.yaw_star,
            time=0.0,
        )


@dataclass(frozen=True)
class TrialMetrics:
    """Summary scores of one closed-loop trial."""

    convergence_time: float
    rmse_error: float
    rmse_joint: float
    constraint_violations: int
    oscillation_std: np.ndarray

    def as_dict(self) -> dict:
        return {
            "convergence_time": float(self.convergence_time),
            "rmse_error": float(self.rmse_error),
            "rmse_joint": float(self.rmse_joint),
            "constraint_violations": int(self.constraint_violations),
            "oscillation_std": [float(v) for v in self.oscillation_std],
        }


@dataclass
class TrialResult:
    """Per-step time series and summary metrics of one trial."""

    controller: str
    seed: int
    t: np.ndarray
    q: np.ndarray
    q_star: np.ndarray
    e: np.ndarray
    u_cmd: np.ndarray
    u_applied: np.ndarray
    kf_x: np.ndarray
    meas_valid: np.ndarray
    qp_status: list
    metrics: TrialMetrics


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return wrapped if wrapped != -math.pi else math.pi


def wrap_orientation(angle: float) -> float:
    """Wrap an orientation difference to (-pi/2, pi/2]; theta is defined mod pi."""
    wrapped = math.remainder(angle, math.pi)
    return wrapped if wrapped != -math.pi / 2.0 else math.pi / 2.0


def _yaw_axes(yaw: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c, s]), np.array([-s, c])


def _project(cam: CameraState, target: ConvexPolygon) -> np.ndarray:
    depth = cam.position[2]
    if depth <= 0.0:
        raise TargetBehindCamera("camera is at or below the target plane")
    x_axis, y_axis = _yaw_axes(cam.yaw)
    rel = cam.position[:2] - target.vertices
    return np.column_stack([rel @ x_axis, rel @ y_axis]) / depth


def reference_features(scenario: Scenario) -> tuple[np.ndarray, float]:
    """Feature vector and second-moment area observed at the desired pose."""
    verts = _project(scenario.desired_camera(), scenario.target)
    moms = polygon_moments(ConvexPolygon(verts))
    a_star = moms.mu20 + moms.mu02
    q_star = feature_vector(moms, scenario.z_star, a_star)
    return q_star.as_array(), a_star


def _features_at(
    cam: CameraState, scenario: Scenario, a_star: float
) -> tuple[np.ndarray, np.ndarray, float]:
    """Noise-free features, projected vertices, and true depth at a pose."""
    verts = _project(cam, scenario.target)
    moms = polygon_moments(ConvexPolygon(verts))
    q = feature_vector(moms, scenario.z_star, a_star)
    return q.as_array(), verts, float(cam.position[2])


def observe(
    cam: CameraState,
    scenario: Scenario,
    rng: np.random.Generator | None = None,
) -> tuple[FeatureVector | None, float]:
    """Measure the feature vector through the pinhole model.

    Returns (None, depth) inside configured dropout windows or when any
    projected target vertex leaves the field-of-view box. Measurement
    noise is drawn from ``rng`` whenever one is supplied, also on missing
    ticks, so the random stream does not depend on visibility.
    """
    _, a_star = reference_features(scenario)
    q, verts, depth = _features_at(cam, scenario, a_star)

    if rng is not None:
        q = q + rng.standard_normal(4) * scenario.noise_std
        q[3] = wrap_orientation(q[3])

    for t0, t1 in scenario.dropout_windows:
        if t0 <= cam.time < t1:
            return None, depth
    hx, hy = scenario.fov_half_extents
    if np.any(np.abs(verts[:, 0]) > hx) or np.any(np.abs(verts[:, 1]) > hy):
        return None, depth
    return FeatureVector.from_array(q), depth


def integrate(cam: CameraState, u: ControlInput, dt: float) -> CameraState:
    """Advance the camera by one zero-order-hold command interval.

    The in-plane displacement uses the closed-form integral of the
    yaw-rotating frame, so the update is exact for piecewise-constant
    commands even while turning.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    uv = np.asarray(u, dtype=float)
    vxy = uv[:2]
    omega = uv[3]
    c0, s0 = math.cos(cam.yaw), math.sin(cam.yaw)
    rot0 = np.array([[c0, -s0], [s0, c0]])
    if abs(omega) < 1e-12:
        delta_xy = rot0 @ vxy * dt
    else:
        a = omega * dt
        integral = (
            np.array([[math.sin(a), -(1.0 - math.cos(a))], [1.0 - math.cos(a), math.sin(a)]])
            / omega
        )
        delta_xy = rot0 @ integral @ vxy
    position = cam.position + np.array([delta_xy[0], delta_xy[1], uv[2] * dt])
    return CameraState(
        position=position,
        yaw=wrap_angle(cam.yaw + omega * dt),
        time=cam.time + dt,
    )


def safety_clamp(u: ControlInput, vmax: float) -> ControlInput:
    """Componentwise clamp of the translational command; yaw rate passes through."""
    if vmax <= 0.0:
        raise ValueError(f"vmax must be > 0, got {vmax}")
    arr = np.asarray(u, dtype=float)
    clipped = arr.copy()
    clipped[:3] = np.clip(arr[:3], -vmax, vmax)
    return ControlInput.from_array(clipped)


def compute_metrics(
    t: np.ndarray,
    e: np.ndarray,
    u_cmd: np.ndarray,
    threshold: float = 0.1,
    sustain_window: float = 1.0,
) -> TrialMetrics:
    """Tracking and smoothness scores from the raw time series.

    The joint score combines the mean squared error norm with the mean
    squared translational command (pre-clamp). Convergence time is the
    start of the first interval where the error norm stays below the
    threshold for at least ``sustain_window`` seconds (NaN when none
    exists).
    """
    t = np.asarray(t, dtype=float)
    e = np.atleast_2d(np.asarray(e, dtype=float))
    u_cmd = np.atleast_2d(np.asarray(u_cmd, dtype=float))
    norms = np.linalg.norm(e, axis=1)
    rmse_error = float(np.sqrt(np.mean(norms**2)))
    v_e = u_cmd[:, :3]
    rmse_joint = float(np.sqrt(np.mean(norms**2) + np.mean(np.sum(v_e**2, axis=1))))

    convergence_time = float("nan")
    below = norms < threshold
    i = 0
    n = below.size
    while i < n:
        if below[i]:
            j = i
            while j < n and below[j]:
                j += 1
            if t[j - 1] - t[i] >= sustain_window - 1e-9 or (
                j == n and t[-1] - t[i] >= sustain_window - 1e-9
            ):
                convergence_time = float(t[i])
                break
            i = j
        else:
            i += 1

    if u_cmd.shape[0] > 1:
        oscillation = np.std(np.diff(u_cmd, axis=0), axis=0)
    else:
        oscillation = np.zeros(4)
    return TrialMetrics(
        convergence_time=convergence_time,
        rmse_error=rmse_error,
        rmse_joint=rmse_joint,
        constraint_violations=0,
        oscillation_std=oscillation,
    )


def _audit_mpc_step(u_cmd, e_k, L, cfg, sol) -> int:
    """Count bound violations of an optimal-status solution."""
    if sol.status is not QpStatus.OPTIMAL:
        return 0
    violations = 0
    u = np.asarray(u_cmd, dtype=float)
    if cfg.input_constraints and (
        np.any(u > cfg.u_max + BOUND_TOL) or np.any(u < cfg.u_min - BOUND_TOL)
    ):
        violations += 1
    if cfg.state_constraints or cfg.terminal_constraint:
        A, B = discretize(L, cfg.sample_period)
        pred = build_prediction(A, B, cfg.horizon)
        errors = predict_errors(e_k, pred, sol.x)
        if cfg.state_constraints and (
            np.any(errors > cfg.e_max + BOUND_TOL)
            or np.any(errors < cfg.e_min - BOUND_TOL)
        ):
            violations += 1
        if cfg.terminal_constraint and np.any(
            np.abs(errors[-1]) > cfg.eps_term + BOUND_TOL
        ):
            violations += 1
    return violations


def run_trial(
    scenario: Scenario,
    mpc_cfg: MpcConfig | None = None,
    kf_cfg: KalmanConfig | None = None,
) -> TrialResult:
    """Run one closed-loop trial at the configured control rate.

    Loop per tick: observe -> estimate (Kalman filter or raw measurement,
    holding the last command on dropout when the filter is disabled) ->
    controller -> safety clamp -> integrate. Fully deterministic for a
    fixed scenario seed.
    """
    violations_list = scenario.validate()
    mpc_cfg = mpc_cfg if mpc_cfg is not None else MpcConfig()
    kf_cfg = kf_cfg if kf_cfg is not None else KalmanConfig()
    violations_list += [f"mpc.{v}" for v in mpc_cfg.validate()]
    violations_list += [f"kalman.{v}" for v in kf_cfg.validate()]
    if violations_list:
        raise ConfigError(violations_list)

    kind = scenario.controller
    if kind in CONTROLLER_FLAGS:
        mpc_cfg = mpc_cfg.with_flags(*CONTROLLER_FLAGS[kind])

    rng = np.random.default_rng(scenario.seed)
    q_star, a_star = reference_features(scenario)
    cam = scenario.initial_camera()
    kf_state = init_state(kf_cfg)

    dt = 1.0 / scenario.control_rate
    n_steps = int(round(scenario.duration * scenario.control_rate))

    t_series = np.zeros(n_steps)
    q_series = np.zeros((n_steps, 4))
    e_series = np.zeros((n_steps, 4))
    u_cmd_series = np.zeros((n_steps, 4))
    u_app_series = np.zeros((n_steps, 4))
    kf_series = np.zeros((n_steps, 4))
    valid_series = np.zeros(n_steps, dtype=bool)
    status_series: list[str] = []

    last_u_cmd = np.zeros(4)
    last_estimate = q_star.copy()
    lag_velocity = np.zeros(4)
    total_violations = 0
    warm_start = None

    for k in range(n_steps):
        t = k * dt
        cam = replace(cam, time=t)

        q_true, _, true_depth = _features_at(cam, scenario, a_star)
        e_true = q_true - q_star
        e_true[3] = wrap_orientation(e_true[3])
        if np.linalg.norm(e_true) > DIVERGENCE_LIMIT:
            raise TrialDiverged(
                f"error norm {np.linalg.norm(e_true):.2f} exceeded "
                f"{DIVERGENCE_LIMIT} at t={t:.2f}s"
            )

        meas, _ = observe(cam, scenario, rng=rng)

        hold_command = False
        hold_position = False
        if scenario.kf_enabled:
            kf_state, estimate = kalman_step(kf_state, meas, kf_cfg)
            if not kf_state.initialized:
                estimate = q_star.copy()
            if kf_state.stale(kf_cfg):
                hold_position = True
        else:
            if meas is None:
                hold_command = True
                estimate = last_estimate
            else:
                estimate = meas.as_array()
        last_estimate = estimate

        if hold_position:
            u_cmd = np.zeros(4)
            status = "stale_hold"
        elif hold_command:
            u_cmd = last_u_cmd.copy()
            status = "held"
        else:
            e_k = estimate - q_star
            e_k[3] = wrap_orientation(e_k[3])
            depth_for_control = true_depth if scenario.use_true_depth else scenario.z_star
            L = interaction_matrix(estimate, depth_for_control)
            if kind == "ibvs":
                u_cmd = ibvs_law(estimate, q_star, L, scenario.ibvs_gain).as_array()
                status = "ibvs"
            else:
                u, sol = mpc_step(e_k, L, mpc_cfg, warm_start=warm_start)
                u_cmd = u.as_array()
                status = sol.status.value
                total_violations += _audit_mpc_step(u_cmd, e_k, L, mpc_cfg, sol)
                # Shift-by-one warm start for the next receding-horizon solve.
                warm_start = np.concatenate([sol.x[4:], sol.x[-4:]])
        last_u_cmd = u_cmd.copy()

        u_applied = safety_clamp(ControlInput.from_array(u_cmd), scenario.safety_vmax)
        u_app_arr = u_applied.as_array()

        if scenario.velocity_lag_tau > 0.0:
            # First-order velocity tracking; integrate with the interval
            # average so position stays exact for the lagged response.
            tau = scenario.velocity_lag_tau
            decay = math.exp(-dt / tau)
            mean_frac = tau * (1.0 - decay) / dt
            v_effective = u_app_arr + (lag_velocity - u_app_arr) * mean_frac
            lag_velocity = u_app_arr + (lag_velocity - u_app_arr) * decay
        else:
            v_effective = u_app_arr

        cam = integrate(cam, ControlInput.from_array(v_effective), dt)

        t_series[k] = t
        q_series[k] = q_true
        e_series[k] = e_true
        u_cmd_series[k] = u_cmd
        u_app_series[k] = u_app_arr
        kf_series[k] = estimate
        valid_series[k] = meas is not None
        status_series.append(status)

    metrics = compute_metrics(t_series, e_series, u_cmd_series)
    metrics = TrialMetrics(
        convergence_time=metrics.convergence_time,
        rmse_error=metrics.rmse_error,
        rmse_joint=metrics.rmse_joint,
        constraint_violations=total_violations,
        oscillation_std=metrics.oscillation_std,
    )
    return TrialResult(
        controller=kind,
        seed=scenario.seed,
        t=t_series,
        q=q_series,
        q_star=q_star,
        e=e_series,
        u_cmd=u_cmd_series,
        u_applied=u_app_series,
        kf_x=kf_series,
        meas_valid=valid_series,
        qp_status=status_series,
        metrics=metrics,
    )
