"""Figure rendering for trial reports.

Every figure is written straight to a file with fixed metadata so that
repeated runs of the same specification produce byte-identical images.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simworld import TrialResult

_SAVE_KWARGS = {"metadata": {"Software": None}, "dpi": 110}


def save_trial_figure(result: TrialResult, path: str, threshold: float = 0.1) -> None:
    """Error-norm and command traces of one trial."""
    fig, (ax_err, ax_cmd) = plt.subplots(
        2, 1, figsize=(7.0, 5.4), sharex=True, constrained_layout=True
    )
    norms = np.linalg.norm(result.e, axis=1)
    ax_err.plot(result.t, norms, color="tab:blue", lw=1.2)
    ax_err.axhline(threshold, color="tab:red", ls="--", lw=0.8, label=f"threshold {threshold}")
    if result.meas_valid is not None and not result.meas_valid.all():
        invalid = ~result.meas_valid
        ax_err.fill_between(
            result.t, 0, norms.max() * 1.05, where=invalid,
            color="0.85", label="measurement dropout",
        )
    ax_err.set_ylabel("|e|")
    ax_err.set_title(f"{result.controller} (seed {result.seed})")
    ax_err.legend(loc="upper right", fontsize=8)

    labels = ["$v_x$", "$v_y$", "$v_z$", r"$\omega_z$"]
    for i, label in enumerate(labels):
        ax_cmd.plot(result.t, result.u_cmd[:, i], lw=1.0, label=label)
    ax_cmd.set_xlabel("time [s]")
    ax_cmd.set_ylabel("command")
    ax_cmd.legend(loc="upper right", ncol=4, fontsize=8)
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_comparison_figure(rows: list[dict], path: str) -> None:
    """Grouped bars of the mean metrics per controller."""
    fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.2), constrained_layout=True)
    names = [row["controller"] for row in rows]
    for ax, key, title in zip(
        axes,
        ("time_s", "rmse_error", "rmse_joint"),
        ("convergence time [s]", "RMSE error", "RMSE joint"),
    ):
        values = [row[key] for row in rows]
        ax.bar(names, values, color="tab:blue")
        ax.set_title(title, fontsize=10)
        ax.tick_params(axis="x", labelrotation=30, labelsize=8)
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
