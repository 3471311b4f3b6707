"""Model reference adaptive controller for the two-channel extrusion plant.

Control, adaptation and reference-model laws, the gain validator for the
closed-loop stability condition, and the Lyapunov monitor.

The feedforward terms cancel ``b1*pd1`` on the nozzle channel and the
``b5*b4*v1`` film coupling on the strand channel, which is what makes the
closed loop coincide with the reference model when the estimates are exact.
``paper_literal_law=True`` swaps in the alternative coefficients
``b2/b3`` and ``b4*b6/b7`` for comparison runs; with that law the matching
property does not hold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .model import BetaSet, ControlInput, PlantState

EPS_DIV = 1e-9


class GainError(ValueError):
    """Controller configuration rejected before any simulation starts."""


@dataclass(frozen=True)
class ControllerConfig:
    k1: float = 5.0
    k3: float = 5.0
    gamma1: float = 50.0
    gamma3: float = 20.0
    p1: float = 1.0
    p3: float = 1.0
    paper_literal_law: bool = False

    def __post_init__(self):
        if not (self.p1 > 0 and self.p3 > 0):
            raise GainError(f"Lyapunov weights must be positive (p1={self.p1}, p3={self.p3})")
        if not (self.gamma1 >= 0 and self.gamma3 >= 0):
            raise GainError(
                f"adaptation rates must be >= 0 (gamma1={self.gamma1}, gamma3={self.gamma3})"
            )

    @property
    def adaptive(self) -> bool:
        return self.gamma1 > 0 and self.gamma3 > 0


@dataclass(frozen=True)
class EstimatorState:
    dhat1: float = 0.0
    dhat3: float = 0.0


@dataclass(frozen=True)
class ReferenceState:
    vr1: float = 0.0
    ur3: float = 0.0


@dataclass(frozen=True)
class TrackingError:
    e1: float
    e3: float

    @classmethod
    def between(cls, x: PlantState, ref: ReferenceState) -> "TrackingError":
        return cls(x.v1 - ref.vr1, x.u3 - ref.ur3)


@dataclass(frozen=True)
class ParamError:
    dtilde1: float
    dtilde3: float

    @classmethod
    def between(cls, d1: float, d3: float, est: EstimatorState) -> "ParamError":
        return cls(d1 - est.dhat1, d3 - est.dhat3)


@dataclass(frozen=True)
class GainVerdict:
    valid: bool
    pole1: float
    pole3: float
    reasons: Tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.valid


def closed_loop_poles(b: BetaSet, cfg: ControllerConfig) -> Tuple[float, float]:
    return b.b2 - b.b3 * cfg.k1, b.b6 - b.b7 * cfg.k3


def validate_gains(b: BetaSet, cfg: ControllerConfig) -> GainVerdict:
    """Check ``b2 - b3*k1 < 0`` and ``b6 - b7*k3 < 0`` (strict)."""
    pole1, pole3 = closed_loop_poles(b, cfg)
    reasons = []
    if not pole1 < 0:
        reasons.append(
            f"stability condition (b2 - b3*k1) < 0 violated: "
            f"b2 - b3*k1 = {b.b2} - {b.b3}*{cfg.k1} = {pole1:g}"
        )
    if not pole3 < 0:
        reasons.append(
            f"stability condition (b6 - b7*k3) < 0 violated: "
            f"b6 - b7*k3 = {b.b6} - {b.b7}*{cfg.k3} = {pole3:g}"
        )
    return GainVerdict(not reasons, pole1, pole3, tuple(reasons))


def check_divisors(b: BetaSet) -> None:
    if abs(b.b3) <= EPS_DIV or abs(b.b7) <= EPS_DIV:
        raise GainError(
            f"|b3| and |b7| must exceed {EPS_DIV:g} for the control law (b3={b.b3}, b7={b.b7})"
        )


def control_law(
    cfg: ControllerConfig,
    b: BetaSet,
    x: PlantState,
    r1: float,
    r3: float,
    pd1: float,
    est: EstimatorState,
) -> ControlInput:
    if cfg.paper_literal_law:
        pd_gain, coupling = b.b2 / b.b3, b.b4 * b.b6 / b.b7
    else:
        pd_gain, coupling = b.b1 / b.b3, b.b5 * b.b4 / b.b7
    mdot = -cfg.k1 * x.v1 + r1 - pd_gain * pd1 - est.dhat1
    us = -cfg.k3 * x.u3 + r3 - coupling * x.v1 - est.dhat3
    return ControlInput(mdot, us, pd1)


def adaptation_derivative(cfg: ControllerConfig, b: BetaSet, e: TrackingError) -> Tuple[float, float]:
    return cfg.gamma1 * cfg.p1 * b.b3 * e.e1, cfg.gamma3 * cfg.p3 * b.b7 * e.e3


def reference_model_derivative(
    b: BetaSet, cfg: ControllerConfig, ref: ReferenceState, r1: float, r3: float
) -> Tuple[float, float]:
    pole1, pole3 = closed_loop_poles(b, cfg)
    return pole1 * ref.vr1 + b.b3 * r1, pole3 * ref.ur3 + b.b7 * r3


def reference_equilibrium(b: BetaSet, cfg: ControllerConfig, r1: float, r3: float) -> ReferenceState:
    pole1, pole3 = closed_loop_poles(b, cfg)
    return ReferenceState(-b.b3 * r1 / pole1, -b.b7 * r3 / pole3)


def lyapunov_value(cfg: ControllerConfig, e: TrackingError, pe: ParamError) -> Optional[float]:
    """Quadratic certificate; ``None`` when either adaptation rate is zero."""
    if not cfg.adaptive:
        return None
    return (
        0.5 * cfg.p1 * e.e1 ** 2
        + 0.5 * cfg.p3 * e.e3 ** 2
        + pe.dtilde1 ** 2 / (2.0 * cfg.gamma1)
        + pe.dtilde3 ** 2 / (2.0 * cfg.gamma3)
    )


def lyapunov_rate(cfg: ControllerConfig, b: BetaSet, e: TrackingError) -> float:
    pole1, pole3 = closed_loop_poles(b, cfg)
    return cfg.p1 * pole1 * e.e1 ** 2 + cfg.p3 * pole3 * e.e3 ** 2
