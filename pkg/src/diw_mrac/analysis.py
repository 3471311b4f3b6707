"""Convergence metrics, closed-form oracles and performance-table reports."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import SimulationConfig
from .model import BetaSet, UncertaintyPair
from .mrac import ControllerConfig
from .scenario import snap_to_grid, switch_times
from .sim import Trajectory

BAND_FRACTION = 0.02
BAND_FLOOR = 1e-4

METRIC_COLUMNS = (
    "channel", "t_inject", "band_r", "band_p", "t_cp", "t_cr",
    "converged_r", "converged_p", "horizon_limited",
)
TABLE_COLUMNS = ("case", "block", "delta") + METRIC_COLUMNS
BLOCK_CHANNEL = {"mass_flow": 1, "plate_velocity": 3}


@dataclass(frozen=True)
class ConvergenceMetrics:
    channel: int
    t_inject: float
    band_r: float
    band_p: float
    t_cr: Optional[float]
    t_cp: Optional[float]

    @property
    def converged_r(self) -> bool:
        return self.t_cr is not None

    @property
    def converged_p(self) -> bool:
        return self.t_cp is not None

    @property
    def horizon_limited(self) -> bool:
        # still outside a band when the run ended
        return not (self.converged_r and self.converged_p)

    def as_row(self) -> List[str]:
        return [
            str(self.channel), repr(self.t_inject), repr(self.band_r), repr(self.band_p),
            _fmt_opt(self.t_cp), _fmt_opt(self.t_cr),
            str(int(self.converged_r)), str(int(self.converged_p)), str(int(self.horizon_limited)),
        ]

    @classmethod
    def from_row(cls, row: dict) -> "ConvergenceMetrics":
        return cls(
            channel=int(row["channel"]),
            t_inject=float(row["t_inject"]),
            band_r=float(row["band_r"]),
            band_p=float(row["band_p"]),
            t_cr=_parse_opt(row["t_cr"]),
            t_cp=_parse_opt(row["t_cp"]),
        )


def _fmt_opt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def _parse_opt(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def convergence_time(
    t: Sequence[float], series: Sequence[float], t_inject: float, band: float
) -> Optional[float]:
    """Last-exit settling time into ``[-band, band]`` measured from ``t_inject``.

    Returns 0.0 if the series never leaves the band after ``t_inject`` and
    ``None`` if it is still outside the band at the final sample.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(series, dtype=float)
    if t.size == 0:
        raise ValueError("convergence_time needs a non-empty series")
    if t.size != x.size:
        raise ValueError("time and series lengths differ")
    start = int(np.searchsorted(t, t_inject - 1e-9 * max(1.0, abs(t_inject)), side="left"))
    outside = np.flatnonzero(np.abs(x[start:]) > band)
    if outside.size == 0:
        return 0.0
    last = start + int(outside[-1])
    if last == t.size - 1:
        return None
    return float(t[last + 1] - t_inject)


def steady_state_error_prediction(
    b: BetaSet, cfg: ControllerConfig, residual: UncertaintyPair
) -> Tuple[float, float]:
    """Final value of the tracking errors with frozen estimates."""
    e1 = b.b3 * residual.d1 / (b.b3 * cfg.k1 - b.b2)
    e3 = b.b7 * residual.d3 / (b.b7 * cfg.k3 - b.b6)
    return e1, e3


def injection_time(cfg: SimulationConfig, channel: Optional[int] = None) -> float:
    """First switch of the true-uncertainty signal(s); 0 when there is none."""
    signals = {1: [cfg.d1], 3: [cfg.d3], None: [cfg.d1, cfg.d3]}[channel]
    times = [t for s in signals for t in switch_times(snap_to_grid(s, cfg.dt))]
    if not times and channel is not None:
        return injection_time(cfg, None)
    return min(times) if times else 0.0


def trajectory_metrics(
    traj: Trajectory, channel: int, t_inject: float, fraction: float = BAND_FRACTION
) -> ConvergenceMetrics:
    t = traj.t
    ref, err, est, true = {
        1: ("vr1", "e1", "dhat1", "d1_true"),
        3: ("ur3", "e3", "dhat3", "d3_true"),
    }[channel]
    i0 = min(int(np.searchsorted(t, t_inject - 1e-9 * max(1.0, t_inject))), len(t) - 1)
    band_r = max(fraction * abs(float(traj[ref][i0])), BAND_FLOOR)
    band_p = max(fraction * float(np.max(np.abs(traj[true][i0:]))), BAND_FLOOR)
    return ConvergenceMetrics(
        channel=channel,
        t_inject=float(t_inject),
        band_r=band_r,
        band_p=band_p,
        t_cr=convergence_time(t, traj[err], t_inject, band_r),
        t_cp=convergence_time(t, traj[true] - traj[est], t_inject, band_p),
    )


def run_metrics(cfg: SimulationConfig, traj: Trajectory) -> List[ConvergenceMetrics]:
    return [trajectory_metrics(traj, ch, injection_time(cfg, ch)) for ch in (1, 3)]


def metrics_csv(metrics: Iterable[ConvergenceMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for m in metrics:
        w.writerow(m.as_row())
    return buf.getvalue()


def read_metrics_csv(text: str) -> List[ConvergenceMetrics]:
    return [ConvergenceMetrics.from_row(r) for r in csv.DictReader(io.StringIO(text))]


def steady_index(traj: Trajectory) -> int:
    """Last sample of the final constant, non-baseline disturbance window.

    When the disturbance is removed before the run ends, the steady point is
    the sample just before removal; otherwise it is the final sample.
    """
    d = np.column_stack([traj["d1_true"], traj["d3_true"]])
    n = len(d)
    changed = np.flatnonzero(np.any(d[1:] != d[:-1], axis=1)) + 1  # first index of each new value
    if changed.size == 0 or np.any(d[-1] != d[0]):
        return n - 1
    starts = [0] + changed.tolist()
    ends = changed.tolist() + [n]
    for s, e in reversed(list(zip(starts, ends))):
        if np.any(d[s] != d[0]):
            return e - 1
    return n - 1


# ---------------------------------------------------------------- performance table


@dataclass(frozen=True)
class TableRow:
    case: str
    block: str  # "mass_flow" | "plate_velocity"
    delta: Optional[float]
    metrics: ConvergenceMetrics


def _fmt_time(v: Optional[float]) -> str:
    return "n/c" if v is None else f"{v:.2f}"


def _fmt_delta(block: str, v: Optional[float]) -> str:
    if v is None:
        return "-"
    return f"{v:+.4f}" if block == "mass_flow" else f"{v:+g}"


def performance_table(rows: Sequence[TableRow]) -> Tuple[str, str]:
    """Text rendering (two blocks, mass flow then plate velocity) and CSV."""
    if not rows:
        raise ValueError("performance_table needs at least one row")
    lines = ["Adaptive control performance under mass-flow and plate-velocity disturbances", ""]
    headers = {"mass_flow": "dm [kg/s]", "plate_velocity": "dp [m/s]"}
    width = max(8, max(len(r.case) for r in rows) + 2)
    for block in ("mass_flow", "plate_velocity"):
        block_rows = [r for r in rows if r.block == block]
        if not block_rows:
            continue
        lines.append(f"{'Case':<{width}}{headers[block]:>12}{'t_cp [s]':>12}{'t_cr [s]':>12}")
        lines.append("-" * (width + 36))
        for r in block_rows:
            lines.append(
                f"{r.case:<{width}}{_fmt_delta(block, r.delta):>12}"
                f"{_fmt_time(r.metrics.t_cp):>12}{_fmt_time(r.metrics.t_cr):>12}"
            )
        lines.append("")
    if any(r.metrics.horizon_limited for r in rows):
        lines.append("n/c: not converged within the simulated horizon (horizon-limited)")
    text = "\n".join(lines).rstrip() + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([r.case, r.block, _fmt_opt(r.delta)] + r.metrics.as_row())
    return text, buf.getvalue()


def read_table_csv(text: str) -> List[TableRow]:
    return [
        TableRow(row["case"], row["block"], _parse_opt(row["delta"]), ConvergenceMetrics.from_row(row))
        for row in csv.DictReader(io.StringIO(text))
    ]
