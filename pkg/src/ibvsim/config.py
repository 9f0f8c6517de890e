"""Scenario/controller configuration files.

A run specification is a single JSON document with four sections:
``scenario`` (geometry, noise, timing), ``mpc`` and ``kalman``
(controller and filter parameters), and ``run`` (batch settings: output
directory, repetitions, controller list, seed base, emit switches).
Matrix-valued fields accept a scalar (multiple of identity), a list of 4
diagonal entries, or a full 4x4 nested list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .kalman import KalmanConfig
from .moments import ConvexPolygon
from .mpc import MpcConfig
from .simworld import CONTROLLER_KINDS, Scenario, rectangle_target

_SCENARIO_FIELDS = {
    "target",
    "z_star",
    "yaw_star",
    "initial_position",
    "initial_yaw",
    "controller",
    "kf_enabled",
    "noise_std",
    "dropout_windows",
    "duration",
    "control_rate",
    "safety_vmax",
    "fov_half_extents",
    "ibvs_gain",
    "use_true_depth",
    "velocity_lag_tau",
    "seed",
}
_MPC_FIELDS = {
    "horizon",
    "sample_period",
    "q_weight",
    "r_weight",
    "p_term",
    "e_min",
    "e_max",
    "u_min",
    "u_max",
    "eps_term",
    "input_constraints",
    "state_constraints",
    "terminal_constraint",
}
_KALMAN_FIELDS = {
    "a_mat",
    "c_mat",
    "q_noise",
    "r_noise",
    "p0",
    "x0",
    "max_dropout",
}
_RUN_FIELDS = {"output_dir", "repetitions", "controllers", "seed_base", "emit"}
_EMIT_FIELDS = {"timeseries", "summary", "comparison", "figures"}


@dataclass
class RunSettings:
    """Batch execution settings from the ``run`` section."""

    output_dir: str = "out"
    repetitions: int = 5
    controllers: list = field(
        default_factory=lambda: ["ibvs", "mpc", "mpc1", "mpc2"]
    )
    seed_base: int = 0
    emit_timeseries: bool = True
    emit_summary: bool = True
    emit_comparison: bool = True
    emit_figures: bool = True

    def validate(self) -> list[str]:
        out = []
        if self.repetitions < 1:
            out.append(f"repetitions: must be >= 1, got {self.repetitions}")
        if not self.controllers:
            out.append("controllers: list must be non-empty")
        for token in self.controllers:
            try:
                parse_controller_token(token)
            except ValueError as exc:
                out.append(f"controllers: {exc}")
        return out


@dataclass
class RunSpec:
    """Fully parsed run specification."""

    scenario: Scenario
    mpc: MpcConfig
    kalman: KalmanConfig
    run: RunSettings

    def validate(self) -> list[str]:
        out = [f"scenario.{v}" for v in self.scenario.validate()]
        out += [f"mpc.{v}" for v in self.mpc.validate()]
        out += [f"kalman.{v}" for v in self.kalman.validate()]
        out += [f"run.{v}" for v in self.run.validate()]
        return out


def parse_controller_token(token: str) -> tuple[str, bool | None]:
    """Split 'mpc2+kf' style tokens into (kind, kf_override)."""
    token = str(token).lower().strip()
    kf = None
    if token.endswith("+kf"):
        kf = True
        token = token[:-3]
    elif token.endswith("-kf"):
        kf = False
        token = token[:-3]
    if token not in CONTROLLER_KINDS:
        raise ValueError(
            f"unknown controller {token!r}, expected one of {CONTROLLER_KINDS} "
            "optionally suffixed with +kf or -kf"
        )
    return token, kf


def _matrix4(value, name: str) -> np.ndarray:
    if np.isscalar(value):
        return float(value) * np.eye(4)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (4,):
        return np.diag(arr)
    if arr.shape == (4, 4):
        return arr
    raise ValueError(f"{name}: expected scalar, 4 diagonal entries, or 4x4 matrix")


def _vector4(value, name: str) -> np.ndarray:
    if np.isscalar(value):
        return float(value) * np.ones(4)
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size != 4:
        raise ValueError(f"{name}: expected scalar or 4 entries")
    return arr


def _target_from_dict(value) -> ConvexPolygon:
    if isinstance(value, dict) and "vertices" in value:
        return ConvexPolygon(np.asarray(value["vertices"], dtype=float))
    if isinstance(value, dict) and "rectangle" in value:
        rect = value["rectangle"]
        return rectangle_target(
            width=float(rect.get("width", 0.30)),
            height=float(rect.get("height", 0.18)),
            center=tuple(rect.get("center", (0.0, 0.0))),
        )
    raise ValueError("target: expected {'rectangle': {...}} or {'vertices': [...]}")


def _check_unknown(section: dict, allowed: set, prefix: str, problems: list):
    for key in section:
        if key not in allowed:
            problems.append(f"{prefix}: unknown field {key!r}")


def scenario_from_dict(data: dict, problems: list[str] | None = None) -> Scenario:
    problems = problems if problems is not None else []
    _check_unknown(data, _SCENARIO_FIELDS, "scenario", problems)
    kwargs = {}
    try:
        if "target" in data:
            kwargs["target"] = _target_from_dict(data["target"])
        if "noise_std" in data:
            kwargs["noise_std"] = _vector4(data["noise_std"], "noise_std")
        for key in data:
            if key in ("target", "noise_std") or key not in _SCENARIO_FIELDS:
                continue
            kwargs[key] = data[key]
        return Scenario(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"scenario: {exc}")
        return Scenario()


def mpc_from_dict(data: dict, problems: list[str] | None = None) -> MpcConfig:
    problems = problems if problems is not None else []
    _check_unknown(data, _MPC_FIELDS, "mpc", problems)
    kwargs = {}
    try:
        for key in ("q_weight", "r_weight", "p_term"):
            if key in data:
                kwargs[key] = _matrix4(data[key], key)
        for key in ("e_min", "e_max", "u_min", "u_max", "eps_term"):
            if key in data:
                kwargs[key] = _vector4(data[key], key)
        for key in (
            "horizon",
            "sample_period",
            "input_constraints",
            "state_constraints",
            "terminal_constraint",
        ):
            if key in data:
                kwargs[key] = data[key]
        return MpcConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"mpc: {exc}")
        return MpcConfig()


def kalman_from_dict(data: dict, problems: list[str] | None = None) -> KalmanConfig:
    problems = problems if problems is not None else []
    _check_unknown(data, _KALMAN_FIELDS, "kalman", problems)
    kwargs = {}
    try:
        for key in ("a_mat", "c_mat", "q_noise", "r_noise", "p0"):
            if key in data:
                kwargs[key] = _matrix4(data[key], key)
        if "x0" in data and data["x0"] is not None:
            kwargs["x0"] = _vector4(data["x0"], "x0")
        if "max_dropout" in data:
            kwargs["max_dropout"] = int(data["max_dropout"])
        return KalmanConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"kalman: {exc}")
        return KalmanConfig()


def run_settings_from_dict(data: dict, problems: list[str] | None = None) -> RunSettings:
    problems = problems if problems is not None else []
    _check_unknown(data, _RUN_FIELDS, "run", problems)
    emit = data.get("emit", {})
    if isinstance(emit, dict):
        _check_unknown(emit, _EMIT_FIELDS, "run.emit", problems)
    else:
        problems.append("run.emit: expected an object of boolean switches")
        emit = {}
    try:
        return RunSettings(
            output_dir=str(data.get("output_dir", "out")),
            repetitions=int(data.get("repetitions", 5)),
            controllers=list(data.get("controllers", ["ibvs", "mpc", "mpc1", "mpc2"])),
            seed_base=int(data.get("seed_base", 0)),
            emit_timeseries=bool(emit.get("timeseries", True)),
            emit_summary=bool(emit.get("summary", True)),
            emit_comparison=bool(emit.get("comparison", True)),
            emit_figures=bool(emit.get("figures", True)),
        )
    except (ValueError, TypeError) as exc:
        problems.append(f"run: {exc}")
        return RunSettings()


def spec_from_dict(data: dict) -> tuple[RunSpec, list[str]]:
    """Parse a spec document, collecting every problem instead of stopping."""
    problems: list[str] = []
    if not isinstance(data, dict):
        return (
            RunSpec(Scenario(), MpcConfig(), KalmanConfig(), RunSettings()),
            ["spec: top level must be a JSON object"],
        )
    known = {"scenario", "mpc", "kalman", "run"}
    _check_unknown(data, known, "spec", problems)
    spec = RunSpec(
        scenario=scenario_from_dict(data.get("scenario", {}), problems),
        mpc=mpc_from_dict(data.get("mpc", {}), problems),
        kalman=kalman_from_dict(data.get("kalman", {}), problems),
        run=run_settings_from_dict(data.get("run", {}), problems),
    )
    problems += spec.validate()
    return spec, problems


def load_spec(path: str) -> RunSpec:
    """Load and fully validate a spec file; raises ConfigError on problems."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"spec: invalid JSON at line {exc.lineno}: {exc.msg}"])
    spec, problems = spec_from_dict(data)
    if problems:
        raise ConfigError(problems)
    return spec


def validate_spec_file(path: str) -> list[str]:
    """Every violation in the file; empty list means the spec is clean."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            return [f"spec: invalid JSON at line {exc.lineno}: {exc.msg}"]
    _, problems = spec_from_dict(data)
    return problems


def default_spec_dict() -> dict:
    """Canonical single-trial spec matching the library defaults."""
    return {
        "scenario": {
            "target": {"rectangle": {"width": 0.30, "height": 0.18, "center": [0.0, 0.0]}},
            "z_star": 1.0,
            "yaw_star": 0.0,
            "initial_position": [0.4, 0.0, 1.3],
            "initial_yaw": round(math.radians(20.0), 12),
            "controller": "mpc2",
            "kf_enabled": False,
            "noise_std": [0.02, 0.02, 0.02, 0.05],
            "dropout_windows": [],
            "duration": 15.0,
            "control_rate": 30.0,
            "safety_vmax": 1.0,
            "fov_half_extents": [1.2, 1.2],
            "ibvs_gain": 1.0,
            "seed": 0,
        },
        "mpc": {
            "horizon": 20,
            "sample_period": 1.0 / 30.0,
            "q_weight": [10.0, 10.0, 10.0, 5.0],
            "r_weight": [1.0, 1.0, 1.0, 1.0],
            "p_term": [100.0, 100.0, 100.0, 50.0],
            "e_min": [-2.0, -2.0, -3.0, -3.141592653589793],
            "e_max": [2.0, 2.0, 3.0, 3.141592653589793],
            "u_min": [-1.0, -1.0, -1.0, -0.8],
            "u_max": [1.0, 1.0, 1.0, 0.8],
            "eps_term": [0.5, 0.5, 1.0, 0.5],
        },
        "kalman": {
            "q_noise": 1e-4,
            "r_noise": [0.0004, 0.0004, 0.0004, 0.0025],
            "p0": 0.01,
            "max_dropout": 30,
        },
        "run": {
            "output_dir": "out",
            "repetitions": 1,
            "controllers": ["mpc2"],
            "seed_base": 0,
            "emit": {
                "timeseries": True,
                "summary": True,
                "comparison": True,
                "figures": True,
            },
        },
    }


def comparison_spec_dict() -> dict:
    """Controller-comparison spec: noisy repeated trials of all four kinds."""
    spec = default_spec_dict()
    spec["scenario"].update(
        {
            "initial_position": [0.55, -0.35, 1.45],
            "initial_yaw": round(math.radians(25.0), 12),
            "noise_std": [0.04, 0.04, 0.04, 0.06],
            "duration": 20.0,
            "ibvs_gain": 1.2,
        }
    )
    spec["mpc"].update(
        {
            "u_min": [-0.4, -0.4, -0.4, -0.6],
            "u_max": [0.4, 0.4, 0.4, 0.6],
        }
    )
    spec["run"].update(
        {
            "repetitions": 5,
            "controllers": ["ibvs", "mpc", "mpc1", "mpc2"],
        }
    )
    return spec
