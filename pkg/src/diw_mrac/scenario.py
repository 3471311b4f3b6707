"""Exogenous signals, model-error noise and the case-study presets.

Signals are small immutable trees (``SignalProfile``) that serialize to and
from the JSON scenario format.  A bare number in JSON is a constant signal.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

SIGNAL_KINDS = ("constant", "step", "ramp", "piecewise", "sum")
NOISE_FAMILIES = ("gaussian", "uniform")
PRESET_IDS = ("1", "2", "3a", "3b", "table1-sweep")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SignalProfile:
    """Piecewise-analytic time signal.

    ``constant``: ``magnitude`` everywhere.
    ``step``: ``magnitude`` on ``[t0, t1)`` (``t1=None`` means forever), else 0.
    ``ramp``: 0 before ``t0``, then ``slope * (t - t0)``, held after ``t1``.
    ``piecewise``: ``segments`` of ``(start, end, value)``, 0 outside them.
    ``sum``: sum of ``children``.
    """

    kind: str = "constant"
    magnitude: float = 0.0
    t0: float = 0.0
    t1: Optional[float] = None
    slope: float = 0.0
    segments: Tuple[Tuple[float, float, float], ...] = ()
    children: Tuple["SignalProfile", ...] = ()

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ScenarioError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        if self.kind in ("step", "ramp"):
            if self.t0 < 0:
                raise ScenarioError(f"{self.kind}: t0 must be >= 0, got {self.t0}")
            if self.t1 is not None and self.t1 < self.t0:
                raise ScenarioError(f"{self.kind}: t1={self.t1} precedes t0={self.t0}")
        if self.kind == "piecewise":
            prev_end = -math.inf
            for start, end, _ in self.segments:
                if end < start or start < prev_end:
                    raise ScenarioError("piecewise segments must be sorted and non-overlapping")
                prev_end = end

    @property
    def is_zero(self) -> bool:
        if self.kind == "sum":
            return all(c.is_zero for c in self.children)
        if self.kind == "piecewise":
            return all(v == 0 for _, _, v in self.segments)
        if self.kind == "ramp":
            return self.slope == 0
        return self.magnitude == 0


ZERO = SignalProfile()


def constant(value: float) -> SignalProfile:
    return SignalProfile("constant", magnitude=float(value))


def evaluate_signal(p: SignalProfile, t: float) -> float:
    kind = p.kind
    if kind == "constant":
        return p.magnitude
    if kind == "step":
        if t < p.t0 or (p.t1 is not None and t >= p.t1):
            return 0.0
        return p.magnitude
    if kind == "ramp":
        if t < p.t0:
            return 0.0
        end = t if p.t1 is None else min(t, p.t1)
        return p.slope * (end - p.t0)
    if kind == "piecewise":
        for start, end, value in p.segments:
            if start <= t < end:
                return value
        return 0.0
    return sum(evaluate_signal(c, t) for c in p.children)


def switch_times(p: SignalProfile) -> List[float]:
    """Times where the signal (or its slope) changes, sorted and unique."""
    if p.kind in ("step", "ramp"):
        out = [p.t0] + ([] if p.t1 is None else [p.t1])
    elif p.kind == "piecewise":
        out = [t for seg in p.segments for t in seg[:2]]
    elif p.kind == "sum":
        out = [t for c in p.children for t in switch_times(c)]
    else:
        out = []
    return sorted(set(out))


def snap_to_grid(p: SignalProfile, dt: float) -> SignalProfile:
    """Round every switch time to the nearest multiple of ``dt``.

    A snapped time is ``j * dt`` for integer ``j``, so comparing it against a
    grid time ``i * dt`` is exact.
    """

    def snap(t):
        return None if t is None else round(t / dt) * dt

    if p.kind in ("step", "ramp"):
        return replace(p, t0=snap(p.t0), t1=snap(p.t1))
    if p.kind == "piecewise":
        return replace(p, segments=tuple((snap(a), snap(b), v) for a, b, v in p.segments))
    if p.kind == "sum":
        return replace(p, children=tuple(snap_to_grid(c, dt) for c in p.children))
    return p


def signal_from_json(obj: Any, where: str = "signal") -> SignalProfile:
    if isinstance(obj, bool):
        raise ScenarioError(f"{where}: expected a number or signal object, got a boolean")
    if isinstance(obj, (int, float)):
        return constant(obj)
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected a number or signal object, got {type(obj).__name__}")
    kind = obj.get("kind")
    allowed = {
        "constant": {"kind", "value"},
        "step": {"kind", "t0", "t1", "magnitude"},
        "ramp": {"kind", "t0", "t1", "slope"},
        "piecewise": {"kind", "segments"},
        "sum": {"kind", "children"},
    }
    if kind not in allowed:
        raise ScenarioError(f"{where}: unknown signal kind {kind!r}; expected one of {SIGNAL_KINDS}")
    unknown = set(obj) - allowed[kind]
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(unknown)} for {kind} signal")
    try:
        if kind == "constant":
            return constant(_num(obj.get("value", 0.0), f"{where}.value"))
        if kind == "step":
            return SignalProfile(
                "step",
                magnitude=_num(obj["magnitude"], f"{where}.magnitude"),
                t0=_num(obj.get("t0", 0.0), f"{where}.t0"),
                t1=None if obj.get("t1") is None else _num(obj["t1"], f"{where}.t1"),
            )
        if kind == "ramp":
            return SignalProfile(
                "ramp",
                slope=_num(obj["slope"], f"{where}.slope"),
                t0=_num(obj.get("t0", 0.0), f"{where}.t0"),
                t1=None if obj.get("t1") is None else _num(obj["t1"], f"{where}.t1"),
            )
        if kind == "piecewise":
            segs = []
            for i, seg in enumerate(obj["segments"]):
                if not isinstance(seg, dict) or set(seg) != {"t0", "t1", "value"}:
                    raise ScenarioError(f"{where}.segments[{i}]: expected keys t0, t1, value")
                segs.append(tuple(_num(seg[k], f"{where}.segments[{i}].{k}") for k in ("t0", "t1", "value")))
            return SignalProfile("piecewise", segments=tuple(segs))
        children = obj["children"]
        if not isinstance(children, list):
            raise ScenarioError(f"{where}.children: expected a list")
        return SignalProfile(
            "sum",
            children=tuple(signal_from_json(c, f"{where}.children[{i}]") for i, c in enumerate(children)),
        )
    except KeyError as exc:
        raise ScenarioError(f"{where}: missing key {exc.args[0]!r} for {kind} signal") from None


def signal_to_json(p: SignalProfile) -> Any:
    if p.kind == "constant":
        return p.magnitude
    if p.kind == "step":
        return {"kind": "step", "t0": p.t0, "t1": p.t1, "magnitude": p.magnitude}
    if p.kind == "ramp":
        return {"kind": "ramp", "t0": p.t0, "t1": p.t1, "slope": p.slope}
    if p.kind == "piecewise":
        return {"kind": "piecewise", "segments": [{"t0": a, "t1": b, "value": v} for a, b, v in p.segments]}
    return {"kind": "sum", "children": [signal_to_json(c) for c in p.children]}


def _num(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ScenarioError(f"{where}: must be finite, got {v}")
    return v


# ---------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseModel:
    """Zero-order-hold random model error, reproducible from ``seed``."""

    family: str = "gaussian"
    mean: float = 0.0
    std: float = 0.0
    seed: int = 0
    period: float = 0.01

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ScenarioError(f"unknown noise family {self.family!r}; expected one of {NOISE_FAMILIES}")
        if not self.std >= 0:
            raise ScenarioError(f"noise std must be >= 0, got {self.std}")
        if not self.period > 0:
            raise ScenarioError(f"noise sample period must be > 0, got {self.period}")

    @property
    def active(self) -> bool:
        return self.std > 0


class NoiseSampler:
    """Sequential draws from one generator; sample ``k`` holds on ``[k*T, (k+1)*T)``."""

    _CHUNK = 4096

    def __init__(self, model: NoiseModel):
        self.model = model
        self._rng = np.random.default_rng(model.seed)
        self._buf = np.empty(0)

    def _extend(self, k: int) -> None:
        while self._buf.size <= k:
            if self.model.family == "gaussian":
                draw = self._rng.standard_normal(self._CHUNK)
            else:
                draw = self._rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), self._CHUNK)
            self._buf = np.concatenate([self._buf, draw])

    def __call__(self, t: float) -> float:
        m = self.model
        if m.std == 0:
            return m.mean
        # tiny guard so grid times landing on a period boundary select the new sample
        k = int(math.floor(t / m.period + 1e-9))
        self._extend(k)
        return m.mean + m.std * float(self._buf[k])


@lru_cache(maxsize=32)
def _sampler(model: NoiseModel) -> NoiseSampler:
    return NoiseSampler(model)


def sample_noise(n: NoiseModel, t: float) -> float:
    return _sampler(n)(t)


def derive_seed(run_seed: int, channel: int) -> int:
    return int(np.random.SeedSequence([run_seed, channel]).generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------- presets

TABLE1_MASS_FLOW = (0.0025, -0.0025, -0.0050, -0.0075, -0.0100)  # kg/s
TABLE1_PLATE_VELOCITY = (-20.0, -10.0, -30.0, -40.0, 10.0)  # m/s, as printed
TABLE1_INJECTION_TIME = 40.0

CASE1_FRACTION = -0.40
CASE1_T0, CASE1_T1 = 30.0, 60.0
# ramp slope/duration are representative choices, not printed values
CASE2_T0, CASE2_DURATION = 30.0, 10.0
CASE2_SLOPE_FRACTION = -0.10 / 10.0  # -10% of nominal mdot per 10 s


def _case1(us0: float) -> Dict[str, Any]:
    step = {"kind": "step", "t0": CASE1_T0, "t1": CASE1_T1, "magnitude": CASE1_FRACTION * us0}
    return {"uncertainty": {"d3": step}}


def _case2(mdot0: float) -> Dict[str, Any]:
    ramp = {
        "kind": "ramp",
        "t0": CASE2_T0,
        "t1": CASE2_T0 + CASE2_DURATION,
        "slope": CASE2_SLOPE_FRACTION * mdot0,
    }
    return {"uncertainty": {"d1": ramp}}


def _nonadaptive(doc: Dict[str, Any]) -> Dict[str, Any]:
    doc = copy.deepcopy(doc)
    doc["controller"] = {"gamma1": 0.0, "gamma3": 0.0}
    doc["initial"] = {"dhat1": "true", "dhat3": "true"}
    return doc


def table1_cases() -> List[Dict[str, Any]]:
    cases = []
    for i, dm in enumerate(TABLE1_MASS_FLOW, start=1):
        cases.append({
            "label": f"Case {i}", "block": "mass_flow", "delta": dm,
            "uncertainty": {"d1": {"kind": "step", "t0": TABLE1_INJECTION_TIME, "magnitude": dm}},
        })
    for i, dp in enumerate(TABLE1_PLATE_VELOCITY, start=len(TABLE1_MASS_FLOW) + 1):
        cases.append({
            "label": f"Case {i}", "block": "plate_velocity", "delta": dp,
            "uncertainty": {"d3": {"kind": "step", "t0": TABLE1_INJECTION_TIME, "magnitude": dp}},
        })
    return cases


def case_study_presets(preset_id: str, nominal_mdot: float = 1.0, nominal_us: float = 1.0) -> Dict[str, Any]:
    """Scenario document fragment for a case study.

    Returned dicts use the scenario-file schema and are merged underneath the
    user's document, so explicit keys in the file win.
    """
    preset_id = str(preset_id)
    if preset_id == "1":
        return _case1(nominal_us)
    if preset_id == "2":
        return _case2(nominal_mdot)
    if preset_id == "3a":
        return _nonadaptive(_case1(nominal_us))
    if preset_id == "3b":
        return _nonadaptive(_case2(nominal_mdot))
    if preset_id == "table1-sweep":
        return {"cases": table1_cases()}
    raise ScenarioError(f"unknown case study {preset_id!r}; valid ids: {', '.join(PRESET_IDS)}")
