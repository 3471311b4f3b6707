"""Scenario documents (JSON) and the validated ``SimulationConfig``.

Parsing is strict: unknown keys are errors, and no default is ever
substituted for a value that failed to parse.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from .model import DEFAULT_BETA, BetaSet, GammaBarSet, ModelError, beta_from_inputs
from .mrac import ControllerConfig, GainError, check_divisors, validate_gains
from .scenario import (
    PRESET_IDS,
    ZERO,
    NoiseModel,
    ScenarioError,
    SignalProfile,
    case_study_presets,
    constant,
    derive_seed,
    signal_from_json,
    signal_to_json,
)

FIDELITIES = ("lti", "ltv")
BETA_KEYS = ("b1", "b2", "b3", "b4", "b5", "b6", "b7")
GAMMA_BAR_KEYS = ("g1", "g2", "g3", "b4", "g5", "g6", "g7")
STATE_KEYS = ("v1", "u3", "vr1", "ur3")
ESTIMATE_KEYS = ("dhat1", "dhat3")

DEFAULT_R1 = 3.5
DEFAULT_R3 = 4.0


class ConfigError(ValueError):
    """Invalid scenario document; maps to CLI exit status 2."""


@dataclass(frozen=True)
class ModelProfile:
    beta: BetaSet = DEFAULT_BETA
    nominal_mdot: float = 1.0
    nominal_us: float = 1.0
    gamma_bar: Optional[GammaBarSet] = None

    @property
    def generators(self) -> GammaBarSet:
        if self.gamma_bar is not None:
            return self.gamma_bar
        return GammaBarSet.from_nominal(self.beta, self.nominal_mdot, self.nominal_us)


@dataclass(frozen=True)
class InitialConditions:
    """``None`` for a state means "reference-model equilibrium at t = 0";
    ``"true"`` for an estimate means "the true uncertainty at t = 0"."""

    v1: Optional[float] = None
    u3: Optional[float] = None
    vr1: Optional[float] = None
    ur3: Optional[float] = None
    dhat1: Union[float, str] = 0.0
    dhat3: Union[float, str] = 0.0


@dataclass(frozen=True)
class SimulationConfig:
    model: ModelProfile = ModelProfile()
    controller: ControllerConfig = ControllerConfig()
    dt: float = 0.01
    t_end: float = 90.0
    fidelity: str = "lti"
    decimation: int = 1
    r1: SignalProfile = constant(DEFAULT_R1)
    r3: SignalProfile = constant(DEFAULT_R3)
    pd1: SignalProfile = ZERO
    d1: SignalProfile = ZERO
    d3: SignalProfile = ZERO
    noise1: NoiseModel = NoiseModel()
    noise3: NoiseModel = NoiseModel()
    initial: InitialConditions = InitialConditions()
    seed: int = 0
    case_study: Optional[str] = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"simulation.dt must be > 0, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ConfigError(f"simulation.t_end must be >= dt, got t_end={self.t_end}, dt={self.dt}")
        if self.decimation < 1:
            raise ConfigError(f"simulation.decimation must be >= 1, got {self.decimation}")
        if self.fidelity not in FIDELITIES:
            raise ConfigError(f"simulation.fidelity must be one of {FIDELITIES}, got {self.fidelity!r}")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def n_rows(self) -> int:
        return self.n_steps // self.decimation + 1

    def validate(self) -> None:
        """Semantic checks that need the whole config (gains vs. profile)."""
        b = self.model.beta
        try:
            b.check()
            check_divisors(b)
        except (ModelError, GainError) as exc:
            raise ConfigError(f"model.beta: {exc}") from None
        if not (b.b2 < 0 and b.b6 < 0):
            raise ConfigError(f"model.beta: nominal plant must be stable (b2={b.b2}, b6={b.b6} must be < 0)")
        verdict = validate_gains(b, self.controller)
        if not verdict:
            raise ConfigError("controller gains rejected: " + "; ".join(verdict.reasons))
        if self.fidelity == "ltv":
            try:
                nominal = beta_from_inputs(self.model.generators, self.model.nominal_mdot, self.model.nominal_us)
                nominal.check()
            except ModelError as exc:
                raise ConfigError(f"model.gamma_bar: {exc}") from None

    def nonadaptive(self) -> "SimulationConfig":
        return replace(self, controller=replace(self.controller, gamma1=0.0, gamma3=0.0))

    def with_adaptation(self, gamma1: float, gamma3: float) -> "SimulationConfig":
        return replace(self, controller=replace(self.controller, gamma1=gamma1, gamma3=gamma3))


@dataclass(frozen=True)
class SweepCase:
    label: str
    block: str
    delta: Optional[float]
    config: SimulationConfig


# ---------------------------------------------------------------- JSON parsing


_NOISE_KEYS = ("family", "mean", "std", "seed", "period")
_SCHEMA: Dict[str, Any] = {
    "case_study": None,
    "description": None,
    "seed": None,
    "model": {"beta": None, "nominal_mdot": None, "nominal_us": None, "gamma_bar": None},
    "controller": {k: None for k in ("k1", "k3", "gamma1", "gamma3", "p1", "p3", "paper_literal_law")},
    "simulation": {"dt": None, "t_end": None, "fidelity": None, "decimation": None},
    "commands": {"r1": None, "r3": None, "pd1": None},
    "uncertainty": {"d1": None, "d3": None},
    "noise": {ch: {k: None for k in _NOISE_KEYS} for ch in ("d1", "d3")},
    "initial": {k: None for k in STATE_KEYS + ESTIMATE_KEYS},
}
_CASE_META = ("label", "block", "delta")


def load_json(text: str) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    return doc


def deep_merge(base: Dict[str, Any], top: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("uncertainty", "commands"):
            out[k] = deep_merge(out[k], v)
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            # signal maps: replace per-channel, never merge the inside of a signal
            merged = dict(out[k])
            merged.update(copy.deepcopy(v))
            out[k] = merged
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(doc: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply ``dotted.key=value`` pairs; values are JSON, falling back to strings."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        node: Any = _SCHEMA
        for p in parts:
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"override {key!r} does not name a scenario key")
            node = node[p]
        target = doc
        for p in parts[:-1]:
            if not isinstance(target.get(p), dict):
                target[p] = {}
            target = target[p]
        target[parts[-1]] = _parse_value(raw)
    return doc


def _check_keys(obj: Any, allowed: Iterable[str], where: str) -> Dict[str, Any]:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    return obj


def _num(obj: Dict[str, Any], key: str, default: float, where: str) -> float:
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    return float(v)


def _int(obj: Dict[str, Any], key: str, default: int, where: str) -> int:
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _parse_model(obj: Dict[str, Any]) -> ModelProfile:
    _check_keys(obj, _SCHEMA["model"], "model")
    beta = DEFAULT_BETA
    if "beta" in obj:
        raw = obj["beta"]
        if isinstance(raw, list):
            if len(raw) != 7:
                raise ConfigError(f"model.beta: expected 7 coefficients b1..b7, got {len(raw)}")
            raw = dict(zip(BETA_KEYS, raw))
        _check_keys(raw, BETA_KEYS, "model.beta")
        missing = [k for k in BETA_KEYS if k not in raw]
        if missing:
            raise ConfigError(f"model.beta: missing {missing}")
        beta = BetaSet(*(_num(raw, k, 0.0, "model.beta") for k in BETA_KEYS))
    gamma_bar = None
    if obj.get("gamma_bar") is not None:
        raw = _check_keys(obj["gamma_bar"], GAMMA_BAR_KEYS, "model.gamma_bar")
        missing = [k for k in GAMMA_BAR_KEYS if k not in raw]
        if missing:
            raise ConfigError(f"model.gamma_bar: missing {missing}")
        gamma_bar = GammaBarSet(*(_num(raw, k, 0.0, "model.gamma_bar") for k in GAMMA_BAR_KEYS))
    mdot0 = _num(obj, "nominal_mdot", 1.0, "model")
    us0 = _num(obj, "nominal_us", 1.0, "model")
    if mdot0 == 0 or us0 == 0:
        raise ConfigError("model: nominal_mdot and nominal_us must be nonzero")
    return ModelProfile(beta, mdot0, us0, gamma_bar)


def _parse_controller(obj: Dict[str, Any]) -> ControllerConfig:
    where = "controller"
    _check_keys(obj, _SCHEMA["controller"], where)
    d = ControllerConfig()
    literal = obj.get("paper_literal_law", d.paper_literal_law)
    if not isinstance(literal, bool):
        raise ConfigError(f"{where}.paper_literal_law: expected true/false, got {literal!r}")
    try:
        return ControllerConfig(
            k1=_num(obj, "k1", d.k1, where),
            k3=_num(obj, "k3", d.k3, where),
            gamma1=_num(obj, "gamma1", d.gamma1, where),
            gamma3=_num(obj, "gamma3", d.gamma3, where),
            p1=_num(obj, "p1", d.p1, where),
            p3=_num(obj, "p3", d.p3, where),
            paper_literal_law=literal,
        )
    except GainError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_signals(obj: Dict[str, Any], keys: Tuple[str, ...], where: str) -> Dict[str, SignalProfile]:
    _check_keys(obj, keys, where)
    try:
        return {k: signal_from_json(obj[k], f"{where}.{k}") for k in keys if k in obj}
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def _parse_noise(obj: Dict[str, Any], channel: int, run_seed: int, where: str) -> NoiseModel:
    _check_keys(obj, _NOISE_KEYS, where)
    family = obj.get("family", "gaussian")
    seed = obj.get("seed")
    if seed is None:
        seed = derive_seed(run_seed, channel)
    elif isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"{where}.seed: expected a non-negative integer, got {seed!r}")
    try:
        return NoiseModel(
            family=family,
            mean=_num(obj, "mean", 0.0, where),
            std=_num(obj, "std", 0.0, where),
            seed=seed,
            period=_num(obj, "period", 0.01, where),
        )
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def _parse_initial(obj: Dict[str, Any]) -> InitialConditions:
    where = "initial"
    _check_keys(obj, STATE_KEYS + ESTIMATE_KEYS, where)
    vals: Dict[str, Any] = {}
    for k in STATE_KEYS:
        v = obj.get(k, "equilibrium")
        vals[k] = None if v == "equilibrium" else _num(obj, k, 0.0, where)
    for k in ESTIMATE_KEYS:
        v = obj.get(k, 0.0)
        vals[k] = "true" if v == "true" else _num(obj, k, 0.0, where)
    return InitialConditions(**vals)


def _expand_preset(doc: Dict[str, Any]) -> Dict[str, Any]:
    preset = doc.get("case_study")
    if preset is None:
        return doc
    preset = str(preset)
    if preset not in PRESET_IDS:
        raise ConfigError(f"unknown case_study {preset!r}; valid ids: {', '.join(PRESET_IDS)}")
    model = doc.get("model") if isinstance(doc.get("model"), dict) else {}
    mdot0 = _num(model, "nominal_mdot", 1.0, "model")
    us0 = _num(model, "nominal_us", 1.0, "model")
    return deep_merge(case_study_presets(preset, mdot0, us0), doc)


def config_from_dict(doc: Dict[str, Any], *, require_model: bool = True) -> SimulationConfig:
    """Build and validate a config from an already-decoded document."""
    doc = _expand_preset(doc)
    if "cases" in doc:
        raise ConfigError("document defines a sweep ('cases'); use the sweep command")
    _check_keys(doc, _SCHEMA, "scenario")
    if require_model and "model" not in doc and doc.get("case_study") is None:
        raise ConfigError("scenario: 'model' section is required (beta coefficients b1..b7)")
    seed = _int(doc, "seed", 0, "scenario")
    if seed < 0:
        raise ConfigError("scenario.seed must be non-negative")

    model = _parse_model(doc.get("model", {}))
    controller = _parse_controller(doc.get("controller", {}))
    sim = _check_keys(doc.get("simulation", {}), _SCHEMA["simulation"], "simulation")
    fidelity = sim.get("fidelity", "lti")
    commands = _parse_signals(doc.get("commands", {}), ("r1", "r3", "pd1"), "commands")
    unc = _parse_signals(doc.get("uncertainty", {}), ("d1", "d3"), "uncertainty")
    noise = _check_keys(doc.get("noise", {}), ("d1", "d3"), "noise")
    initial = _parse_initial(doc.get("initial", {}))

    cfg = SimulationConfig(
        model=model,
        controller=controller,
        dt=_num(sim, "dt", 0.01, "simulation"),
        t_end=_num(sim, "t_end", 90.0, "simulation"),
        fidelity=fidelity,
        decimation=_int(sim, "decimation", 1, "simulation"),
        r1=commands.get("r1", constant(DEFAULT_R1)),
        r3=commands.get("r3", constant(DEFAULT_R3)),
        pd1=commands.get("pd1", ZERO),
        d1=unc.get("d1", ZERO),
        d3=unc.get("d3", ZERO),
        noise1=_parse_noise(noise.get("d1", {}), 1, seed, "noise.d1"),
        noise3=_parse_noise(noise.get("d3", {}), 3, seed, "noise.d3"),
        initial=initial,
        seed=seed,
        case_study=None if doc.get("case_study") is None else str(doc["case_study"]),
    )
    cfg.validate()
    return cfg


def parse_scenario(text: str, overrides: Iterable[str] = (), seed: Optional[int] = None) -> SimulationConfig:
    doc = apply_overrides(load_json(text), overrides)
    if seed is not None:
        doc["seed"] = seed
    return config_from_dict(doc)


def preset_document(preset_id: str) -> Dict[str, Any]:
    if str(preset_id) not in PRESET_IDS:
        raise ConfigError(f"unknown case study {preset_id!r}; valid ids: {', '.join(PRESET_IDS)}")
    return {"case_study": str(preset_id)}


def _infer_block(case: Dict[str, Any]) -> str:
    unc = case.get("uncertainty", {})
    return "plate_velocity" if isinstance(unc, dict) and "d3" in unc and "d1" not in unc else "mass_flow"


def sweep_from_dict(doc: Dict[str, Any]) -> List[SweepCase]:
    doc = _expand_preset(doc)
    if "cases" not in doc:
        # a plain scenario is a one-case sweep
        cfg = config_from_dict(doc)
        return [SweepCase("Case 1", "mass_flow", None, cfg)]
    cases = doc["cases"]
    if not isinstance(cases, list) or not cases:
        raise ConfigError("sweep: 'cases' must be a non-empty list")
    base = {k: v for k, v in doc.items() if k not in ("cases", "case_study")}
    out = []
    for i, case in enumerate(cases):
        if not isinstance(case, dict):
            raise ConfigError(f"cases[{i}]: expected an object")
        label = case.get("label", f"Case {i + 1}")
        block = case.get("block", _infer_block(case))
        if block not in ("mass_flow", "plate_velocity"):
            raise ConfigError(f"cases[{i}].block: expected 'mass_flow' or 'plate_velocity', got {block!r}")
        delta = case.get("delta")
        if delta is not None and (isinstance(delta, bool) or not isinstance(delta, (int, float))):
            raise ConfigError(f"cases[{i}].delta: expected a number")
        body = {k: v for k, v in case.items() if k not in _CASE_META}
        try:
            cfg = config_from_dict(deep_merge(base, body), require_model=False)
        except ConfigError as exc:
            raise ConfigError(f"cases[{i}] ({label}): {exc}") from None
        out.append(SweepCase(str(label), block, None if delta is None else float(delta), cfg))
    return out


def parse_sweep(text: str, overrides: Iterable[str] = (), seed: Optional[int] = None) -> List[SweepCase]:
    doc = apply_overrides(load_json(text), overrides)
    if seed is not None:
        doc["seed"] = seed
    return sweep_from_dict(doc)


# ---------------------------------------------------------------- serialization


def config_to_dict(cfg: SimulationConfig) -> Dict[str, Any]:
    """Fully explicit document; ``config_from_dict`` of it reproduces ``cfg``."""
    m = cfg.model
    model: Dict[str, Any] = {
        "beta": list(m.beta.as_tuple()),
        "nominal_mdot": m.nominal_mdot,
        "nominal_us": m.nominal_us,
    }
    if m.gamma_bar is not None:
        model["gamma_bar"] = asdict(m.gamma_bar)
    init = cfg.initial
    initial = {k: ("equilibrium" if getattr(init, k) is None else getattr(init, k)) for k in STATE_KEYS}
    initial.update({k: getattr(init, k) for k in ESTIMATE_KEYS})
    return {
        "seed": cfg.seed,
        "model": model,
        "controller": asdict(cfg.controller),
        "simulation": {"dt": cfg.dt, "t_end": cfg.t_end, "fidelity": cfg.fidelity, "decimation": cfg.decimation},
        "commands": {k: signal_to_json(getattr(cfg, k)) for k in ("r1", "r3", "pd1")},
        "uncertainty": {k: signal_to_json(getattr(cfg, k)) for k in ("d1", "d3")},
        "noise": {"d1": asdict(cfg.noise1), "d3": asdict(cfg.noise3)},
        "initial": initial,
    }


def dump_config(cfg: SimulationConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
