import io
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from diw_mrac.analysis import steady_index, steady_state_error_prediction
from diw_mrac.config import ConfigError, config_from_dict
from diw_mrac.model import (
    ControlInput,
    GammaBarSet,
    PlantState,
    UncertaintyPair,
    beta_from_inputs,
    plant_derivative_lti,
    plant_derivative_ltv,
)
from diw_mrac.sim import (
    COLUMNS,
    DivergenceError,
    SimulationError,
    Trajectory,
    rk4_step,
    run_closed_loop,
    run_pair_comparison,
)

BETA = [1.0, -2.0, 1.0, 1.0, 1.0, -3.0, 1.0]


def cfg_of(**sections):
    doc = {"model": {"beta": BETA}}
    doc.update(sections)
    return config_from_dict(doc)


# ---------------------------------------------------------------- rk4


def test_rk4_zero_field():
    x = np.array([1.0, -2.0])
    assert np.array_equal(rk4_step(lambda t, y: np.zeros(2), x, 0.0, 0.1), x)


def test_rk4_exponential():
    x1 = rk4_step(lambda t, y: -y, np.array([1.0]), 0.0, 0.1)
    assert x1[0] == pytest.approx(0.9048375, abs=1e-7)
    assert x1[0] == pytest.approx(math.exp(-0.1), abs=1e-7)


def test_rk4_order_on_linear_system():
    A = np.array([[-1.0, 2.0], [-3.0, -0.5]])
    x0 = np.array([1.0, 0.5])
    exact = expm(A) @ x0
    errs = []
    for dt in (0.1, 0.05, 0.025):
        x = x0.copy()
        for i in range(int(round(1 / dt))):
            x = rk4_step(lambda t, y: A @ y, x, i * dt, dt)
        errs.append(np.max(np.abs(x - exact)))
    for a, b in zip(errs, errs[1:]):
        assert 12 <= a / b <= 20


def test_rk4_rejects_nonfinite_derivative_and_bad_dt():
    with pytest.raises(SimulationError, match="t=0.5"):
        rk4_step(lambda t, y: np.array([np.inf]), np.array([1.0]), 0.5, 0.1)
    with pytest.raises(ValueError):
        rk4_step(lambda t, y: y, np.array([1.0]), 0.0, 0.0)


# ---------------------------------------------------------------- closed loop


def zero_scenario(**extra):
    return cfg_of(
        commands={"r1": 0, "r3": 0, "pd1": 0},
        initial={"v1": 0, "u3": 0, "vr1": 0, "ur3": 0},
        simulation={"t_end": 5.0},
        **extra,
    )


def test_zero_scenario_is_identically_zero():
    traj = run_closed_loop(zero_scenario())
    assert len(traj) == 501
    assert np.array_equal(traj.data[:, 1:], np.zeros((501, len(COLUMNS) - 1)))


@pytest.mark.parametrize("dt, t_end, dec", [(0.01, 5.0, 1), (0.01, 5.0, 7), (0.003, 1.0, 2), (0.02, 0.05, 1)])
def test_row_count_and_grid(dt, t_end, dec):
    cfg = cfg_of(simulation={"dt": dt, "t_end": t_end, "decimation": dec})
    traj = run_closed_loop(cfg)
    assert len(traj) == math.floor(t_end / (dt * dec) + 1e-9) + 1
    idx = np.arange(len(traj)) * dec
    assert np.array_equal(traj.t, idx * dt)
    assert np.all(np.diff(traj.t) > 0)


def test_determinism_with_noise():
    cfg = cfg_of(noise={"d1": {"std": 0.05}, "d3": {"std": 0.02, "period": 0.1}}, simulation={"t_end": 10.0}, seed=9)
    a, b = run_closed_loop(cfg), run_closed_loop(cfg)
    assert a.to_csv() == b.to_csv()
    c = run_closed_loop(replace(cfg, noise1=replace(cfg.noise1, seed=cfg.noise1.seed + 1)))
    assert a.to_csv() != c.to_csv()


def test_divergence_aborts_with_diagnostic():
    cfg = cfg_of(commands={"r1": {"kind": "ramp", "t0": 0.0, "slope": 1e15}}, simulation={"t_end": 2.0})
    with pytest.raises(DivergenceError, match="t="):
        run_closed_loop(cfg)


def test_nonfinite_aborts():
    cfg = cfg_of(commands={"r1": {"kind": "ramp", "t0": 0.0, "slope": 1e308}}, simulation={"t_end": 2.0})
    with pytest.raises(SimulationError):
        run_closed_loop(cfg)


def test_refuses_invalid_gains():
    cfg = cfg_of()
    bad = replace(cfg, controller=replace(cfg.controller, k1=-10.0))
    with pytest.raises(ConfigError):
        run_closed_loop(bad)


def test_step_switch_lands_on_grid_point():
    cfg = cfg_of(uncertainty={"d3": {"kind": "step", "t0": 0.3, "t1": 0.7, "magnitude": 1.0}},
                 simulation={"dt": 0.1, "t_end": 1.0})
    traj = run_closed_loop(cfg)
    assert traj["d3_true"].tolist() == [0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0]


def test_ltv_plant_matches_lti_with_frozen_beta():
    g = GammaBarSet(0.5, -1.0, 0.8, 1.2, 0.9, -1.5, 1.1)
    u = ControlInput(0.7, 1.3, 0.4)
    b = beta_from_inputs(g, u.mdot, u.us)
    xa = xb = np.array([0.2, -0.1])
    for i in range(500):
        xa = rk4_step(lambda t, y: np.array(plant_derivative_ltv(PlantState(*y), u, g)), xa, i * 0.01, 0.01)
        xb = rk4_step(lambda t, y: np.array(plant_derivative_lti(PlantState(*y), u, b, UncertaintyPair())),
                      xb, i * 0.01, 0.01)
    np.testing.assert_allclose(xa, xb, atol=1e-12)


def test_ltv_closed_loop_at_nominal_operating_point_equals_lti():
    lti = run_closed_loop(cfg_of(simulation={"t_end": 5.0}))
    ltv = run_closed_loop(cfg_of(simulation={"t_end": 5.0, "fidelity": "ltv"}))
    np.testing.assert_allclose(lti.data, ltv.data, atol=1e-12)


def test_ltv_case1_recovers():
    traj = run_closed_loop(config_from_dict({"case_study": "1", "simulation": {"fidelity": "ltv"}}))
    i = int(round(59.9 / 0.01))
    assert abs(traj["e3"][i]) < 1e-6
    assert abs(traj["d3_true"][i] - traj["dhat3"][i]) < 1e-4


def _error_system(cfg, channel):
    b = cfg.model.beta
    c = cfg.controller
    if channel == 1:
        pole, gain, rate = b.b2 - b.b3 * c.k1, b.b3, c.gamma1 * c.p1 * b.b3
    else:
        pole, gain, rate = b.b6 - b.b7 * c.k3, b.b7, c.gamma3 * c.p3 * b.b7
    # (e, dtilde)' = [[pole, gain], [-rate, 0]] (e, dtilde)
    return np.array([[pole, gain], [-rate, 0.0]])


def test_error_dynamics_equivalence():
    cfg = cfg_of(
        uncertainty={"d1": 0.25, "d3": -0.15},
        initial={"v1": 0.9, "u3": 0.1, "dhat1": -0.05, "dhat3": 0.3},
        commands={"r1": {"kind": "step", "t0": 2.0, "magnitude": 1.0}, "r3": 4.0},
        simulation={"dt": 1e-3, "t_end": 10.0},
    )
    traj = run_closed_loop(cfg)
    t = traj.t
    for ch, (e, dh, d) in {1: ("e1", "dhat1", "d1_true"), 3: ("e3", "dhat3", "d3_true")}.items():
        A = _error_system(cfg, ch)
        z0 = np.array([traj[e][0], traj[d][0] - traj[dh][0]])
        oracle = np.array([expm(A * tk) @ z0 for tk in t[::50]])
        assert np.max(np.abs(traj[e][::50] - oracle[:, 0])) < 1e-8
        assert np.max(np.abs(traj[d][::50] - traj[dh][::50] - oracle[:, 1])) < 1e-8


def test_constant_uncertainty_estimate_converges():
    traj = run_closed_loop(cfg_of(uncertainty={"d1": 0.1}))
    assert abs(traj["dhat1"][-1] - 0.1) < 1e-4


def test_lyapunov_certificate_consistency():
    cfg = cfg_of(
        uncertainty={"d1": 0.4, "d3": -0.3},
        initial={"v1": 0.2, "u3": 0.9},
        simulation={"dt": 1e-3, "t_end": 3.0},
    )
    traj = run_closed_loop(cfg)
    V, rate = traj["V"], traj["Vdot"]
    fd = np.diff(V) / cfg.dt
    mid = 0.5 * (rate[1:] + rate[:-1])
    significant = np.abs(mid) > 1e-3 * np.max(np.abs(mid))
    rel = np.abs(fd[significant] - mid[significant]) / np.abs(mid[significant])
    assert np.max(rel) < 0.05


def test_energy_audit_between_switches():
    cfg = config_from_dict({"case_study": "1"})
    traj = run_closed_loop(cfg)
    dV = np.diff(traj["V"])
    switches = {int(round(30 / 0.01)) - 1, int(round(60 / 0.01)) - 1}
    mask = np.ones(dV.size, bool)
    mask[list(switches)] = False
    assert np.max(dV[mask]) <= 1e-9
    assert np.all(dV[sorted(switches)] > 0)


def test_v_not_logged_without_adaptation():
    traj = run_closed_loop(cfg_of(controller={"gamma1": 0.0}, simulation={"t_end": 1.0}))
    assert np.all(np.isnan(traj["V"])) and np.all(np.isnan(traj["Vdot"]))


# ---------------------------------------------------------------- pairs


def test_pair_identical_configs_identical():
    cfg = cfg_of(uncertainty={"d1": 0.1}, simulation={"t_end": 5.0})
    a, b = run_pair_comparison(cfg, cfg)
    assert np.array_equal(a.data, b.data, equal_nan=True)


def test_pair_refuses_mismatched_grids():
    cfg = cfg_of(simulation={"t_end": 5.0})
    with pytest.raises(ValueError, match="grid"):
        run_pair_comparison(cfg, replace(cfg.nonadaptive(), dt=0.02))
    with pytest.raises(ValueError, match="adaptation"):
        run_pair_comparison(cfg, replace(cfg.nonadaptive(), controller=replace(cfg.controller, k1=6.0, gamma1=0.0)))


def test_pair_plate_velocity_step():
    nac_cfg = config_from_dict({"case_study": "3a"})
    ac_cfg = nac_cfg.with_adaptation(50.0, 20.0)
    ac, nac = run_pair_comparison(ac_cfg, nac_cfg)
    i = steady_index(nac)
    assert nac.t[i] == pytest.approx(59.99)
    assert abs(ac["e3"][i]) < 1e-4
    residual = UncertaintyPair(nac["d1_true"][i] - nac["dhat1"][i], nac["d3_true"][i] - nac["dhat3"][i])
    e1_ss, e3_ss = steady_state_error_prediction(nac_cfg.model.beta, nac_cfg.controller, residual)
    assert nac["e3"][i] == pytest.approx(e3_ss, abs=1e-6)
    assert abs(nac["e3"][i]) > 1e-2


def test_trajectory_csv_round_trip():
    traj = run_closed_loop(cfg_of(uncertainty={"d1": 0.1}, simulation={"t_end": 1.0}))
    back = Trajectory.read_csv(io.StringIO(traj.to_csv()))
    assert np.array_equal(back.data, traj.data, equal_nan=True)
