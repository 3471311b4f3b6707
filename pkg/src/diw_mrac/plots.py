"""Static SVG figures: tracking, adaptation and AC/NAC comparison."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sim import Trajectory  # noqa: E402

_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": "diw-mrac", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def _panels(title: str):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6))
    fig.suptitle(title)
    for ax in axes:
        ax.set_xlabel("time [s]")
        ax.grid(alpha=0.3)
    return fig, axes


def tracking_figure(traj: Trajectory, path) -> None:
    t = traj.t
    fig, (a1, a3) = _panels("Reference tracking")
    a1.plot(t, traj["vr1"], "k--", label="reference $v_{r1}$")
    a1.plot(t, traj["v1"], "C0", label="plant $\\bar v_1$")
    a1.set_ylabel("nozzle flow velocity [m/s]")
    a3.plot(t, traj["ur3"], "k--", label="reference $u_{r3}$")
    a3.plot(t, traj["u3"], "C1", label="plant $\\bar u_3$")
    a3.set_ylabel("strand velocity [m/s]")
    for ax in (a1, a3):
        ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def adaptation_figure(traj: Trajectory, path) -> None:
    t = traj.t
    fig, (a1, a3) = _panels("Uncertainty and its estimate")
    a1.plot(t, traj["d1_true"], "k--", label="true $\\Delta_1$")
    a1.plot(t, traj["dhat1"], "C0", label="estimate $\\hat\\Delta_1$")
    a3.plot(t, traj["d3_true"], "k--", label="true $\\Delta_3$")
    a3.plot(t, traj["dhat3"], "C1", label="estimate $\\hat\\Delta_3$")
    for ax in (a1, a3):
        ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def comparison_figure(adaptive: Trajectory, nonadaptive: Trajectory, path) -> None:
    t = adaptive.t
    fig, (a1, a3) = _panels("Adaptive (AC) vs non-adaptive (NAC) control")
    for ax, state, ref in ((a1, "v1", "vr1"), (a3, "u3", "ur3")):
        ax.plot(t, adaptive[ref], "k--", label="R")
        ax.plot(t, adaptive[state], "C0", label="AC")
        ax.plot(t, nonadaptive[state], "C3", alpha=0.8, label="NAC")
        ax.legend(loc="best")
    a1.set_ylabel("nozzle flow velocity [m/s]")
    a3.set_ylabel("strand velocity [m/s]")
    fig.tight_layout()
    _save(fig, path)
