"""Reduced-order extrusion plant.

Two dynamic states: the mean nozzle flow velocity ``v1`` and the mean
deposited-strand velocity on the plate ``u3``.  The film sub-system in
between is algebraic (``u2 = b4 * v1``) and is folded into the strand
dynamics.

The plant exists in two forms:

* ``plant_derivative_ltv``: coefficients scale with the instantaneous
  inputs (mass flow for b1..b3, plate velocity for b5..b7).
* ``plant_derivative_lti``: coefficients frozen, with additive input
  uncertainties ``d1``/``d3`` standing in for the input dependence.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Tuple


class ModelError(ValueError):
    """Raised for non-finite inputs or inconsistent coefficient sets."""


def _check_finite(**values: float) -> None:
    bad = {k: v for k, v in values.items() if not math.isfinite(v)}
    if bad:
        raise ModelError(f"non-finite model input(s): {bad}")


@dataclass(frozen=True)
class PlantState:
    v1: float
    u3: float


@dataclass(frozen=True)
class ControlInput:
    mdot: float
    us: float
    pd1: float = 0.0


@dataclass(frozen=True)
class UncertaintyPair:
    d1: float = 0.0
    d3: float = 0.0


@dataclass(frozen=True)
class BetaSet:
    b1: float
    b2: float
    b3: float
    b4: float
    b5: float
    b6: float
    b7: float

    def check(self, *, require_stable: bool = False) -> None:
        _check_finite(**{f.name: getattr(self, f.name) for f in fields(self)})
        if self.b3 == 0.0 or self.b7 == 0.0:
            raise ModelError(f"b3 and b7 must be nonzero (got b3={self.b3}, b7={self.b7})")
        if require_stable and not (self.b2 < 0.0 and self.b6 < 0.0):
            raise ModelError(
                f"nominal plant must be open-loop stable: b2={self.b2}, b6={self.b6}"
            )

    def as_tuple(self) -> Tuple[float, ...]:
        return astuple(self)


#: Placeholder profile. Satisfies b2, b6 < 0 and nonzero divisors; it is not a
#: physical calibration of any ink.
DEFAULT_BETA = BetaSet(1.0, -2.0, 1.0, 1.0, 1.0, -3.0, 1.0)


@dataclass(frozen=True)
class GammaBarSet:
    """Generators of the input-dependent coefficients.

    ``b1..b3 = g1..g3 * mdot`` and ``b5..b7 = g5..g7 * us``; ``b4`` has no
    input dependence and is stored as a constant.
    """

    g1: float
    g2: float
    g3: float
    b4: float
    g5: float
    g6: float
    g7: float

    @classmethod
    def from_nominal(cls, beta: BetaSet, mdot0: float, us0: float) -> "GammaBarSet":
        """Generators that reproduce ``beta`` exactly at the operating point."""
        if mdot0 == 0.0 or us0 == 0.0:
            raise ModelError("nominal operating point must have nonzero mdot0 and us0")
        return cls(
            beta.b1 / mdot0, beta.b2 / mdot0, beta.b3 / mdot0, beta.b4,
            beta.b5 / us0, beta.b6 / us0, beta.b7 / us0,
        )


def beta_from_inputs(g: GammaBarSet, mdot: float, us: float) -> BetaSet:
    _check_finite(mdot=mdot, us=us)
    return BetaSet(
        g.g1 * mdot, g.g2 * mdot, g.g3 * mdot, g.b4,
        g.g5 * us, g.g6 * us, g.g7 * us,
    )


def film_output(v1: float, b4: float) -> float:
    return b4 * v1


def plant_derivative_lti(
    x: PlantState, u: ControlInput, b: BetaSet, d: UncertaintyPair = UncertaintyPair()
) -> Tuple[float, float]:
    dv1 = b.b1 * u.pd1 + b.b2 * x.v1 + b.b3 * (u.mdot + d.d1)
    du3 = b.b5 * film_output(x.v1, b.b4) + b.b6 * x.u3 + b.b7 * (u.us + d.d3)
    return dv1, du3


def plant_derivative_ltv(x: PlantState, u: ControlInput, g: GammaBarSet) -> Tuple[float, float]:
    b = beta_from_inputs(g, u.mdot, u.us)
    return plant_derivative_lti(x, u, b)
