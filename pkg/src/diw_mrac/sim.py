"""Fixed-step closed-loop simulation.

The augmented state is ``(v1, u3, vr1, ur3, dhat1, dhat3)`` and all six
components advance together under classical RK4.  State feedback is
re-evaluated at every RK stage.  Exogenous signals (commands, pressure
gradient, true uncertainty, noise) are sampled once at the start of each step
and held for the step; their switch times are snapped to the grid.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, TextIO, Tuple

import numpy as np

from .config import SimulationConfig
from .model import (
    ControlInput,
    PlantState,
    UncertaintyPair,
    plant_derivative_lti,
    plant_derivative_ltv,
)
from .mrac import (
    EstimatorState,
    ParamError,
    ReferenceState,
    TrackingError,
    adaptation_derivative,
    control_law,
    lyapunov_rate,
    lyapunov_value,
    reference_equilibrium,
    reference_model_derivative,
)
from .scenario import NoiseSampler, evaluate_signal, snap_to_grid

COLUMNS = (
    "t", "v1", "u3", "vr1", "ur3", "e1", "e3", "mdot", "us",
    "d1_true", "d3_true", "dhat1", "dhat3", "V", "Vdot",
)
DIVERGENCE_LIMIT = 1e12


class SimulationError(RuntimeError):
    def __init__(self, message: str, t: float, state: Sequence[float]):
        super().__init__(f"{message} at t={t:.6g}, state={list(np.asarray(state, dtype=float))}")
        self.t = t
        self.state = np.asarray(state, dtype=float)


class DivergenceError(SimulationError):
    pass


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], x: np.ndarray, t: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    k1 = np.asarray(f(t, x), dtype=float)
    k2 = np.asarray(f(t + 0.5 * dt, x + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(f(t + 0.5 * dt, x + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(f(t + dt, x + dt * k3), dtype=float)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise SimulationError("non-finite derivative", t, x)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Trajectory:
    data: np.ndarray  # shape (rows, len(COLUMNS))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def write_csv(self, fh: TextIO) -> None:
        fh.write(",".join(COLUMNS) + "\n")
        for row in self.data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh: TextIO) -> "Trajectory":
        header = fh.readline().strip().split(",")
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected trajectory header {header}")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        return cls(np.array(rows, dtype=float).reshape(-1, len(COLUMNS)))


class _Exogenous:
    """Per-step samples of every external signal, snapped to the grid."""

    def __init__(self, cfg: SimulationConfig):
        dt = cfg.dt
        self.r1 = snap_to_grid(cfg.r1, dt)
        self.r3 = snap_to_grid(cfg.r3, dt)
        self.pd1 = snap_to_grid(cfg.pd1, dt)
        self.d1 = snap_to_grid(cfg.d1, dt)
        self.d3 = snap_to_grid(cfg.d3, dt)
        self.noise1 = NoiseSampler(cfg.noise1) if cfg.noise1.active else None
        self.noise3 = NoiseSampler(cfg.noise3) if cfg.noise3.active else None
        self.mean1 = cfg.noise1.mean
        self.mean3 = cfg.noise3.mean

    def __call__(self, t: float) -> Tuple[float, float, float, float, float]:
        d1 = evaluate_signal(self.d1, t) + (self.noise1(t) if self.noise1 else self.mean1)
        d3 = evaluate_signal(self.d3, t) + (self.noise3(t) if self.noise3 else self.mean3)
        return (
            evaluate_signal(self.r1, t),
            evaluate_signal(self.r3, t),
            evaluate_signal(self.pd1, t),
            d1,
            d3,
        )


class ClosedLoop:
    """Augmented closed-loop vector field for one configuration."""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        self.b = cfg.model.beta
        self.ctrl = cfg.controller
        self.g = cfg.model.generators if cfg.fidelity == "ltv" else None

    def signals(self, x: np.ndarray, exo) -> Tuple[ControlInput, Tuple[float, float], Tuple[float, float]]:
        """Control command, plant derivative and true (effective) uncertainty."""
        r1, r3, pd1, d1, d3 = exo
        b = self.b
        plant = PlantState(x[0], x[1])
        u = control_law(self.ctrl, b, plant, r1, r3, pd1, EstimatorState(x[4], x[5]))
        if self.g is None:
            return u, plant_derivative_lti(plant, u, b, UncertaintyPair(d1, d3)), (d1, d3)
        applied = ControlInput(u.mdot + d1, u.us + d3, pd1)
        dv1, du3 = plant_derivative_ltv(plant, applied, self.g)
        # uncertainty as seen through the frozen design model
        eff1 = (dv1 - b.b1 * pd1 - b.b2 * x[0]) / b.b3 - u.mdot
        eff3 = (du3 - b.b5 * b.b4 * x[0] - b.b6 * x[1]) / b.b7 - u.us
        return u, (dv1, du3), (eff1, eff3)

    def derivative(self, x: np.ndarray, exo) -> np.ndarray:
        _, (dv1, du3), _ = self.signals(x, exo)
        r1, r3 = exo[0], exo[1]
        dvr1, dur3 = reference_model_derivative(self.b, self.ctrl, ReferenceState(x[2], x[3]), r1, r3)
        dd1, dd3 = adaptation_derivative(self.ctrl, self.b, TrackingError(x[0] - x[2], x[1] - x[3]))
        return np.array([dv1, du3, dvr1, dur3, dd1, dd3])

    def row(self, t: float, x: np.ndarray, exo) -> list:
        u, _, (d1, d3) = self.signals(x, exo)
        e = TrackingError(x[0] - x[2], x[1] - x[3])
        est = EstimatorState(x[4], x[5])
        V = lyapunov_value(self.ctrl, e, ParamError.between(d1, d3, est))
        Vdot = lyapunov_rate(self.ctrl, self.b, e) + 0.0 if V is not None else math.nan
        return [
            t, x[0], x[1], x[2], x[3], e.e1, e.e3, u.mdot, u.us,
            d1, d3, x[4], x[5], math.nan if V is None else V, Vdot,
        ]


def initial_state(cfg: SimulationConfig, exo0) -> np.ndarray:
    r1, r3, _, d1, d3 = exo0
    init = cfg.initial
    eq = reference_equilibrium(cfg.model.beta, cfg.controller, r1, r3)
    vr1 = eq.vr1 if init.vr1 is None else init.vr1
    ur3 = eq.ur3 if init.ur3 is None else init.ur3
    v1 = vr1 if init.v1 is None else init.v1
    u3 = ur3 if init.u3 is None else init.u3
    dhat1 = d1 if init.dhat1 == "true" else init.dhat1
    dhat3 = d3 if init.dhat3 == "true" else init.dhat3
    return np.array([v1, u3, vr1, ur3, dhat1, dhat3], dtype=float)


def run_closed_loop(cfg: SimulationConfig) -> Trajectory:
    cfg.validate()
    loop = ClosedLoop(cfg)
    exo = _Exogenous(cfg)
    dt, n_steps, stride = cfg.dt, cfg.n_steps, cfg.decimation
    out = np.empty((cfg.n_rows, len(COLUMNS)))

    x = initial_state(cfg, exo(0.0))
    for i in range(n_steps + 1):
        t = i * dt
        ex = exo(t)
        if i % stride == 0:
            out[i // stride] = loop.row(t, x, ex)
        if i == n_steps:
            break
        x = rk4_step(lambda _t, y: loop.derivative(y, ex), x, t, dt)
        if not np.all(np.abs(x) <= DIVERGENCE_LIMIT):
            raise DivergenceError("state diverged", (i + 1) * dt, x)
    return Trajectory(out)


def run_pair_comparison(
    cfg: SimulationConfig, cfg_nonadaptive: SimulationConfig
) -> Tuple[Trajectory, Trajectory]:
    if (cfg.dt, cfg.t_end, cfg.decimation) != (cfg_nonadaptive.dt, cfg_nonadaptive.t_end, cfg_nonadaptive.decimation):
        raise ValueError("adaptive and non-adaptive configs must share the time grid")
    c = cfg.controller
    if replace(cfg_nonadaptive, controller=replace(cfg_nonadaptive.controller, gamma1=c.gamma1, gamma3=c.gamma3)) != cfg:
        raise ValueError("paired configs may differ only in adaptation rates")
    return run_closed_loop(cfg), run_closed_loop(cfg_nonadaptive)
