"""Command-line front end.

    diw-mrac run|compare|sweep <scenario.json | preset> --out DIR
             [--set key=value]... [--seed N] [--plots]

``<scenario>`` is a JSON scenario file, or one of the preset ids
(1, 2, 3a, 3b, table1-sweep) when no file of that name exists.

Exit status: 0 success, 2 configuration/validation error, 3 numerical
divergence, 4 partial sweep failure.
"""
from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis
from .config import (
    ConfigError,
    SimulationConfig,
    SweepCase,
    apply_overrides,
    config_from_dict,
    load_json,
    preset_document,
    sweep_from_dict,
)
from .model import DEFAULT_BETA, UncertaintyPair
from .mrac import ControllerConfig, validate_gains
from .scenario import PRESET_IDS
from .sim import SimulationError, Trajectory, run_closed_loop, run_pair_comparison

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_PARTIAL = 0, 2, 3, 4
THREADS_ENV = "DIW_MRAC_THREADS"


@dataclass
class RunManifest:
    scenario: str
    out: Path
    overrides: List[str] = field(default_factory=list)
    seed: Optional[int] = None
    plots: bool = False
    workers: Optional[int] = None  # sweep only; None -> DIW_MRAC_THREADS or CPU count


class _Outputs:
    """Tracks written files so a failed command can remove them."""

    def __init__(self, root: Path):
        self.root = root
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(p)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        return p

    def trajectory(self, name: str, traj: Trajectory) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            traj.write_csv(fh)
        return p

    def discard(self) -> None:
        for p in self.written:
            if p.exists():
                p.unlink()
        self.written.clear()


def load_document(scenario: str) -> Dict:
    path = Path(scenario)
    if path.is_file():
        return load_json(path.read_text(encoding="utf-8"))
    if scenario in PRESET_IDS:
        return preset_document(scenario)
    raise ConfigError(f"scenario {scenario!r} is neither a file nor a preset id ({', '.join(PRESET_IDS)})")


def _document(m: RunManifest) -> Dict:
    doc = apply_overrides(load_document(m.scenario), m.overrides)
    if m.seed is not None:
        doc["seed"] = m.seed
    return doc


def _prepare_out(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")


def _fmt_opt(v: Optional[float]) -> str:
    return "not converged" if v is None else f"{v:.3f} s"


def _csv_opt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def _config_summary(cfg: SimulationConfig) -> List[str]:
    c = cfg.controller
    verdict = validate_gains(cfg.model.beta, c)
    lines = [
        f"case study      : {cfg.case_study or '-'}",
        f"plant fidelity  : {cfg.fidelity}",
        f"grid            : dt={cfg.dt:g} s, t_end={cfg.t_end:g} s, decimation={cfg.decimation}",
        f"beta (b1..b7)   : {list(cfg.model.beta.as_tuple())}",
        f"gains           : k1={c.k1:g} k3={c.k3:g} gamma1={c.gamma1:g} gamma3={c.gamma3:g} p1={c.p1:g} p3={c.p3:g}",
        f"closed-loop poles: {verdict.pole1:g}, {verdict.pole3:g}",
        f"control law     : {'alternative (paper_literal_law)' if c.paper_literal_law else 'matched'}",
        f"seed            : {cfg.seed}",
    ]
    if cfg.model.beta == DEFAULT_BETA:
        lines.append("note            : default beta profile is a placeholder, not a physical calibration")
    return lines


def _lyapunov_summary(traj: Trajectory) -> List[str]:
    V = traj["V"]
    if np.all(np.isnan(V)):
        return ["Lyapunov monitor: not applicable (an adaptation rate is zero)"]
    dV = np.diff(V)
    return [
        f"Lyapunov monitor: V(0)={V[0]:.6g}  V(end)={V[-1]:.6g}  "
        f"largest one-step increase={max(0.0, float(np.max(dV))) if dV.size else 0.0:.3g} "
        "(increases occur only at uncertainty switches)"
    ]


def _run_report(cfg: SimulationConfig, traj: Trajectory, metrics: Sequence[analysis.ConvergenceMetrics]) -> str:
    lines = ["Closed-loop run", ""] + _config_summary(cfg) + [""]
    for m in metrics:
        lines.append(
            f"channel {m.channel}: injection t={m.t_inject:g} s  "
            f"t_cr={_fmt_opt(m.t_cr)} (band {m.band_r:.3g})  "
            f"t_cp={_fmt_opt(m.t_cp)} (band {m.band_p:.3g})"
            + ("  [horizon-limited]" if m.horizon_limited else "")
        )
    lines.append(f"final |e1|={abs(traj['e1'][-1]):.3g}  |e3|={abs(traj['e3'][-1]):.3g}")
    lines += _lyapunov_summary(traj)
    return "\n".join(lines) + "\n"


def _guard(fn):
    """Map library errors to exit codes and clean partial outputs."""

    def wrapper(m: RunManifest) -> int:
        outputs = _Outputs(Path(m.out))
        try:
            _prepare_out(outputs.root)
            return fn(m, outputs)
        except ConfigError as exc:
            outputs.discard()
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except SimulationError as exc:
            outputs.discard()
            print(f"error: simulation aborted: {exc}", file=sys.stderr)
            return EXIT_DIVERGED

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_guard
def cmd_run(m: RunManifest, out: _Outputs) -> int:
    cfg = config_from_dict(_document(m))
    traj = run_closed_loop(cfg)
    metrics = analysis.run_metrics(cfg, traj)
    out.trajectory("trajectory.csv", traj)
    out.text("metrics.csv", analysis.metrics_csv(metrics))
    out.text("report.txt", _run_report(cfg, traj, metrics))
    if m.plots:
        from . import plots

        plots.tracking_figure(traj, out.path("tracking.svg"))
        plots.adaptation_figure(traj, out.path("adaptation.svg"))
    return EXIT_OK


def comparison_pair(cfg: SimulationConfig) -> Tuple[SimulationConfig, SimulationConfig]:
    """(adaptive, non-adaptive) twins differing only in adaptation rates."""
    if cfg.controller.adaptive:
        return cfg, cfg.nonadaptive()
    d = ControllerConfig()
    return cfg.with_adaptation(d.gamma1, d.gamma3), cfg


@dataclass(frozen=True)
class ComparisonSummary:
    t_steady: float
    e_adaptive: Tuple[float, float]
    e_nonadaptive: Tuple[float, float]
    e_predicted: Tuple[float, float]


def summarize_comparison(cfg: SimulationConfig, ac: Trajectory, nac: Trajectory) -> ComparisonSummary:
    i = analysis.steady_index(nac)
    residual = UncertaintyPair(nac["d1_true"][i] - nac["dhat1"][i], nac["d3_true"][i] - nac["dhat3"][i])
    pred = analysis.steady_state_error_prediction(cfg.model.beta, cfg.controller, residual)
    return ComparisonSummary(
        t_steady=float(nac.t[i]),
        e_adaptive=(float(ac["e1"][i]), float(ac["e3"][i])),
        e_nonadaptive=(float(nac["e1"][i]), float(nac["e3"][i])),
        e_predicted=(float(pred[0]), float(pred[1])),
    )


@_guard
def cmd_compare(m: RunManifest, out: _Outputs) -> int:
    cfg_ac, cfg_nac = comparison_pair(config_from_dict(_document(m)))
    ac, nac = run_pair_comparison(cfg_ac, cfg_nac)
    s = summarize_comparison(cfg_nac, ac, nac)
    met_ac = analysis.run_metrics(cfg_ac, ac)
    met_nac = analysis.run_metrics(cfg_nac, nac)

    rows = ["channel,t_steady,e_adaptive,e_nonadaptive,e_nonadaptive_predicted,t_cr_adaptive,t_cr_nonadaptive"]
    for k, ch in enumerate((1, 3)):
        rows.append(",".join([
            str(ch), repr(s.t_steady), repr(s.e_adaptive[k]), repr(s.e_nonadaptive[k]), repr(s.e_predicted[k]),
            _csv_opt(met_ac[k].t_cr), _csv_opt(met_nac[k].t_cr),
        ]))
    lines = ["Adaptive (AC) vs non-adaptive (NAC) comparison", ""] + _config_summary(cfg_ac) + [""]
    lines.append(f"steady point t={s.t_steady:g} s (end of the last constant disturbance window)")
    for k, ch in enumerate((1, 3)):
        lines.append(
            f"channel {ch}: e_AC={s.e_adaptive[k]:.3e}  e_NAC={s.e_nonadaptive[k]:.6e}  "
            f"predicted e_NAC={s.e_predicted[k]:.6e}  "
            f"|NAC - predicted|={abs(s.e_nonadaptive[k] - s.e_predicted[k]):.2e}"
        )
        lines.append(f"           t_cr AC={_fmt_opt(met_ac[k].t_cr)}  NAC={_fmt_opt(met_nac[k].t_cr)}")

    out.trajectory("trajectory_adaptive.csv", ac)
    out.trajectory("trajectory_nonadaptive.csv", nac)
    out.text("comparison.csv", "\n".join(rows) + "\n")
    out.text("report.txt", "\n".join(lines) + "\n")
    if m.plots:
        from . import plots

        plots.comparison_figure(ac, nac, out.path("comparison.svg"))
    return EXIT_OK


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower() or "case"


def _run_case(case: SweepCase) -> Tuple[Optional[str], Optional[analysis.ConvergenceMetrics], Optional[str]]:
    try:
        traj = run_closed_loop(case.config)
    except (SimulationError, ConfigError) as exc:
        return None, None, str(exc)
    ch = analysis.BLOCK_CHANNEL[case.block]
    metrics = analysis.trajectory_metrics(traj, ch, analysis.injection_time(case.config, ch))
    return traj.to_csv(), metrics, None


def sweep_workers(requested: Optional[int], n_cases: int) -> int:
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            requested = os.cpu_count() or 1
    return max(1, min(requested, n_cases))


def run_sweep_cases(cases: Sequence[SweepCase], workers: int):
    if workers <= 1:
        return [_run_case(c) for c in cases]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_case, cases))  # order-stable by case index


@_guard
def cmd_sweep(m: RunManifest, out: _Outputs) -> int:
    cases = sweep_from_dict(_document(m))
    results = run_sweep_cases(cases, sweep_workers(m.workers, len(cases)))

    rows, failures = [], []
    for case, (csv_text, metrics, err) in zip(cases, results):
        if err is not None:
            failures.append(f"{case.label}: {err}")
            continue
        out.text(f"cases/{_slug(case.label)}.csv", csv_text)
        rows.append(analysis.TableRow(case.label, case.block, case.delta, metrics))

    report = [f"Sweep of {len(cases)} case(s); {len(rows)} succeeded, {len(failures)} failed", ""]
    if rows:
        text, table_csv = analysis.performance_table(rows)
        out.text("table.txt", text)
        out.text("table.csv", table_csv)
        report.append(text)
    report += [f"FAILED {f}" for f in failures]
    out.text("report.txt", "\n".join(report).rstrip() + "\n")
    for f in failures:
        print(f"error: case {f}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diw-mrac", description="MRAC simulation of extrusion-based printing")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("scenario", help="scenario JSON file or preset id (" + ", ".join(PRESET_IDS) + ")")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario key (dotted path, JSON value); repeatable")
    p.add_argument("--seed", type=int, default=None, help="run seed for all stochastic signals")
    p.add_argument("--plots", action="store_true", help="also write SVG figures")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    manifest = RunManifest(args.scenario, args.out, args.overrides, args.seed, args.plots)
    return COMMANDS[args.command](manifest)


if __name__ == "__main__":
    sys.exit(main())
