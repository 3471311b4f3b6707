import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diw_mrac.model import (
    BetaSet,
    ControlInput,
    GammaBarSet,
    ModelError,
    PlantState,
    UncertaintyPair,
    beta_from_inputs,
    film_output,
    plant_derivative_lti,
    plant_derivative_ltv,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
ONES = GammaBarSet(1, 1, 1, 1, 1, 1, 1)
B = BetaSet(1, -2, 1, 1, 1, -3, 1)


def test_beta_from_inputs_zero_input():
    b = beta_from_inputs(ONES, 0.0, 0.0)
    assert (b.b1, b.b2, b.b3, b.b5, b.b6, b.b7) == (0, 0, 0, 0, 0, 0)
    assert b.b4 == 1


def test_beta_from_inputs_hand_value():
    g = GammaBarSet(2, 3, 4, 0.7, 5, 6, 7)
    b = beta_from_inputs(g, 0.5, 2.0)
    assert b == BetaSet(1.0, 1.5, 2.0, 0.7, 10.0, 12.0, 14.0)


def test_beta_from_inputs_rejects_nonfinite():
    with pytest.raises(ModelError):
        beta_from_inputs(ONES, math.nan, 1.0)
    with pytest.raises(ModelError):
        beta_from_inputs(ONES, 1.0, math.inf)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_beta_from_inputs_scaling(mdot, us, c):
    g = GammaBarSet(0.3, -1.7, 2.2, 0.9, 1.1, -0.4, 3.0)
    base = beta_from_inputs(g, mdot, us)
    scaled_m = beta_from_inputs(g, c * mdot, us)
    scaled_u = beta_from_inputs(g, mdot, c * us)
    for name in ("b1", "b2", "b3"):
        assert getattr(scaled_m, name) == pytest.approx(c * getattr(base, name), rel=1e-12, abs=1e-300)
        assert getattr(scaled_u, name) == getattr(base, name)
    for name in ("b5", "b6", "b7"):
        assert getattr(scaled_u, name) == pytest.approx(c * getattr(base, name), rel=1e-12, abs=1e-300)
        assert getattr(scaled_m, name) == getattr(base, name)


def test_doubling_mdot_doubles_nozzle_coefficients():
    g = GammaBarSet(0.3, -1.7, 2.2, 0.9, 1.1, -0.4, 3.0)
    a, b = beta_from_inputs(g, 0.4, 1.3), beta_from_inputs(g, 0.8, 1.3)
    assert (b.b1, b.b2, b.b3) == (2 * a.b1, 2 * a.b2, 2 * a.b3)
    assert (b.b5, b.b6, b.b7) == (a.b5, a.b6, a.b7)


def test_lti_homogeneous_zero():
    assert plant_derivative_lti(PlantState(0, 0), ControlInput(0, 0, 0), B) == (0, 0)


def test_lti_hand_value():
    dv1, _ = plant_derivative_lti(PlantState(0.5, 0.0), ControlInput(0.2, 0.0, 1.0), B, UncertaintyPair(0, 0))
    assert dv1 == pytest.approx(0.2, abs=1e-15)


@given(finite, finite, finite, finite)
def test_lti_equilibrium_root(v1, us, d3, b6_mag):
    b = BetaSet(1.0, -2.0, 1.0, 0.8, 1.3, -(abs(b6_mag) + 0.1), 0.9)
    u3_star = -(b.b5 * b.b4 * v1 + b.b7 * (us + d3)) / b.b6
    _, du3 = plant_derivative_lti(PlantState(v1, u3_star), ControlInput(0.0, us), b, UncertaintyPair(0, d3))
    scale = max(1.0, abs(b.b5 * b.b4 * v1), abs(b.b7 * (us + d3)))
    assert abs(du3) <= 1e-12 * scale


@settings(max_examples=200)
@given(st.lists(finite, min_size=14, max_size=14))
def test_lti_superposition(vals):
    """The derivative is affine; its linear part superposes exactly (to rounding)."""
    def pack(v):
        return PlantState(v[0], v[1]), ControlInput(v[2], v[3], v[4]), UncertaintyPair(v[5], v[6])

    xa, ua, da = pack(vals[:7])
    xb, ub, db = pack(vals[7:])
    xs = PlantState(xa.v1 + xb.v1, xa.u3 + xb.u3)
    us_ = ControlInput(ua.mdot + ub.mdot, ua.us + ub.us, ua.pd1 + ub.pd1)
    ds = UncertaintyPair(da.d1 + db.d1, da.d3 + db.d3)
    fa = plant_derivative_lti(xa, ua, B, da)
    fb = plant_derivative_lti(xb, ub, B, db)
    fs = plant_derivative_lti(xs, us_, B, ds)
    for k in range(2):
        assert fs[k] == pytest.approx(fa[k] + fb[k], rel=1e-9, abs=1e-9)


def test_ltv_zero_input_vanishes():
    g = GammaBarSet(0.3, -1.7, 2.2, 0.9, 1.1, -0.4, 3.0)
    assert plant_derivative_ltv(PlantState(3.0, -2.0), ControlInput(0.0, 0.0, 5.0), g) == (0.0, 0.0)


@given(finite, finite, st.floats(-5, 5), st.floats(-5, 5), finite)
def test_ltv_matches_lti_at_frozen_beta(v1, u3, mdot, us, pd1):
    g = GammaBarSet(0.3, -1.7, 2.2, 0.9, 1.1, -0.4, 3.0)
    x, u = PlantState(v1, u3), ControlInput(mdot, us, pd1)
    assert plant_derivative_ltv(x, u, g) == plant_derivative_lti(x, u, beta_from_inputs(g, mdot, us))


def _straight_line_ltv(v1, u3, mdot, us, pd1, g1, g2, g3, b4, g5, g6, g7):
    # independent evaluation: nozzle ODE, algebraic film, strand ODE
    bb1, bb2, bb3 = g1 * mdot, g2 * mdot, g3 * mdot
    bb5, bb6, bb7 = g5 * us, g6 * us, g7 * us
    u2 = b4 * v1
    return bb1 * pd1 + bb2 * v1 + bb3 * mdot, bb5 * u2 + bb6 * u3 + bb7 * us


def test_ltv_spot_check_against_straight_line_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        v1, u3, mdot, us, pd1 = rng.normal(size=5)
        gs = rng.normal(size=7)
        got = plant_derivative_ltv(PlantState(v1, u3), ControlInput(mdot, us, pd1), GammaBarSet(*gs))
        want = _straight_line_ltv(v1, u3, mdot, us, pd1, *gs)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("v1, b4, want", [(0.0, 7.3, 0.0), (2.0, 0.5, 1.0), (-1.25, 1.0, -1.25)])
def test_film_output(v1, b4, want):
    assert film_output(v1, b4) == want


def test_gamma_bar_from_nominal_reproduces_beta():
    g = GammaBarSet.from_nominal(B, 0.5, 2.0)
    assert beta_from_inputs(g, 0.5, 2.0) == B


def test_beta_check_divisors():
    with pytest.raises(ModelError):
        BetaSet(1, -2, 0, 1, 1, -3, 1).check()
    with pytest.raises(ModelError):
        BetaSet(1, 2, 1, 1, 1, -3, 1).check(require_stable=True)
