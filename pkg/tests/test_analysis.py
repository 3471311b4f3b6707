import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from diw_mrac.analysis import (
    ConvergenceMetrics,
    TableRow,
    convergence_time,
    injection_time,
    performance_table,
    read_metrics_csv,
    read_table_csv,
    metrics_csv,
    run_metrics,
    steady_index,
    steady_state_error_prediction,
)
from diw_mrac.config import config_from_dict
from diw_mrac.model import BetaSet, UncertaintyPair
from diw_mrac.mrac import ControllerConfig
from diw_mrac.sim import COLUMNS, Trajectory, run_closed_loop

B = BetaSet(1, -2, 1, 1, 1, -3, 1)


def test_convergence_zero_series():
    t = np.arange(0, 10, 0.01)
    assert convergence_time(t, np.zeros_like(t), 3.0, 1e-3) == 0.0


def test_convergence_empty_series():
    with pytest.raises(ValueError):
        convergence_time([], [], 0.0, 1.0)


def test_convergence_never_settles():
    t = np.arange(0, 10, 0.1)
    assert convergence_time(t, np.ones_like(t), 0.0, 0.5) is None


@pytest.mark.parametrize("e0, lam, band", [(1.0, -2.0, 0.02), (-0.3, -0.7, 1e-3), (5.0, -4.0, 0.1)])
def test_convergence_first_order_oracle(e0, lam, band):
    dt, t_inj = 0.01, 12.0
    t = np.arange(0, 40, dt)
    x = np.where(t >= t_inj, e0 * np.exp(lam * (t - t_inj)), 0.0)
    analytic = math.log(abs(e0) / band) / abs(lam)
    got = convergence_time(t, x, t_inj, band)
    assert analytic <= got <= analytic + dt + 1e-12


series = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=60)


@given(series, st.floats(1e-3, 5), st.floats(0.1, 1.0))
def test_band_monotonicity(xs, band, shrink):
    t = np.arange(len(xs)) * 0.1
    wide = convergence_time(t, xs, 0.0, band)
    narrow = convergence_time(t, xs, 0.0, band * shrink)
    if wide is None:
        assert narrow is None
    elif narrow is not None:
        assert narrow >= wide


@given(series, st.integers(0, 10), st.floats(0.0, 100.0))
def test_translation_invariance(xs, k, offset):
    dt = 0.25
    assume(k < len(xs))
    t = np.arange(len(xs)) * dt
    a = convergence_time(t, xs, t[k], 1.0)
    b = convergence_time(t + offset, xs, t[k] + offset, 1.0)
    if a is None:
        assert b is None
    else:
        assert b == pytest.approx(a, abs=1e-9)


def test_steady_state_prediction():
    assert steady_state_error_prediction(B, ControllerConfig(), UncertaintyPair(0, 0)) == (0, 0)
    e1, _ = steady_state_error_prediction(B, ControllerConfig(k1=5), UncertaintyPair(0.7, 0))
    assert e1 == pytest.approx(0.1)


def test_steady_state_prediction_matches_long_nonadaptive_run():
    cfg = config_from_dict({
        "model": {"beta": [1, -2, 1, 1, 1, -3, 1]},
        "controller": {"gamma1": 0, "gamma3": 0},
        "uncertainty": {"d1": 0.7, "d3": -0.24},
        "simulation": {"t_end": 20.0},
    })
    traj = run_closed_loop(cfg)
    e1, e3 = steady_state_error_prediction(cfg.model.beta, cfg.controller, UncertaintyPair(0.7, -0.24))
    assert traj["e1"][-1] == pytest.approx(e1, abs=1e-6)
    assert traj["e3"][-1] == pytest.approx(e3, abs=1e-6)


def _metrics(tcp, tcr, ch=1):
    return ConvergenceMetrics(ch, 40.0, 0.01, 0.001, tcr, tcp)


def test_table_trivial_zero_disturbance():
    cfg = config_from_dict({"model": {"beta": [1, -2, 1, 1, 1, -3, 1]}, "simulation": {"t_end": 5.0}})
    m1, _ = run_metrics(cfg, run_closed_loop(cfg))
    assert (m1.t_cp, m1.t_cr) == (0.0, 0.0)
    text, _ = performance_table([TableRow("Case 1", "mass_flow", 0.0, m1)])
    assert "0.00" in text


def test_table_two_blocks_of_five():
    rows = [TableRow(f"Case {i}", "mass_flow", d, _metrics(8.0 + i, 5.0)) for i, d in
            enumerate([0.0025, -0.0025, -0.005, -0.0075, -0.01], 1)]
    rows += [TableRow(f"Case {i}", "plate_velocity", d, _metrics(31.0, 2.0 + i, 3)) for i, d in
             enumerate([-20, -10, -30, -40, 10], 6)]
    text, table_csv = performance_table(rows)
    blocks = [b for b in text.split("\n\n") if b.startswith("Case")]
    assert len(blocks) == 2
    assert "dm [kg/s]" in blocks[0] and "dp [m/s]" in blocks[1]
    # header plus one line per case
    assert [len([l for l in b.splitlines() if l.startswith("Case ")]) for b in blocks] == [6, 6]
    assert "+0.0025" in blocks[0] and "-40" in blocks[1]
    assert read_table_csv(table_csv) == rows


def test_table_marks_horizon_limited():
    text, table_csv = performance_table([TableRow("A", "plate_velocity", -40.0, _metrics(None, 3.0, 3))])
    assert "n/c" in text and "horizon-limited" in text
    assert read_table_csv(table_csv)[0].metrics.t_cp is None


def test_performance_table_needs_rows():
    with pytest.raises(ValueError):
        performance_table([])


def test_metrics_csv_round_trip():
    ms = [_metrics(7.97, 4.87), _metrics(None, 0.0, 3)]
    assert read_metrics_csv(metrics_csv(ms)) == ms


def test_injection_time():
    cfg = config_from_dict({"case_study": "1"})
    assert injection_time(cfg, 3) == 30.0
    assert injection_time(cfg, 1) == 30.0  # falls back to the other channel
    plain = config_from_dict({"model": {}})
    assert injection_time(plain) == 0.0


def _traj_with_disturbance(d3):
    data = np.zeros((len(d3), len(COLUMNS)))
    data[:, 0] = np.arange(len(d3))
    data[:, COLUMNS.index("d3_true")] = d3
    return Trajectory(data)


def test_steady_index():
    assert steady_index(_traj_with_disturbance([0, 0, 1, 1, 1, 0, 0])) == 4
    assert steady_index(_traj_with_disturbance([0, 0, 1, 1, 2, 2, 2])) == 6
    assert steady_index(_traj_with_disturbance([0, 0, 0])) == 2
