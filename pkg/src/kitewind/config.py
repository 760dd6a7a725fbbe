"""JSON (de)serialisation of simulation configs.

Field names are the dataclass field names (snake_case, SI units).  Loading
is strict: unknown keys and badly typed values raise :class:`ConfigError`
naming the offending field and its unit.
"""
from __future__ import annotations

import dataclasses
import json
import math

from .actuator import ActuatorParams
from .autopilot import GuidanceConfig
from .errors import ConfigError
from .presets import get_preset
from .simkit import AUTO_CROSSWIND, Excitation, SimConfig, WindModel
from .wingdyn import EnvParams, KiteState, WingParams

UNITS = {
    "area_A": "m^2", "mass_m": "kg", "span_ds": "m", "lift_CL": "-", "eq_efficiency_Eeq": "-",
    "line_drag_CDl": "-", "line_area_Al": "m^2",
    "tether_r": "m", "attach_distance_d": "m", "air_density_rho": "kg/m^3", "gravity_g": "m/s^2",
    "gain_Km": "m/(s A)", "pole_wm": "rad/s", "current_limit": "A", "position_limit": "m",
    "gear_Kdelta": "-", "cl_damping_zeta": "-", "cl_natural_freq": "rad/s", "load_gain": "m/(s^2 N)",
    "target_minus": "(rad, rad)", "target_plus": "(rad, rad)", "filter_cutoff_wgamma": "Hz",
    "sample_rate": "Hz", "gain_Kc": "m/rad", "angle_arithmetic": "zenith|shortest",
    "nominal_speed": "m/s", "misalignment": "rad", "gust_amplitude": "m/s", "gust_period": "s",
    "turbulence_intensity": "-", "seed": "integer", "turbulence_timescale": "s",
    "theta": "rad", "phi": "rad", "theta_dot": "rad/s", "phi_dot": "rad/s",
    "amplitude": "m", "frequencies": "Hz list",
    "physics_dt": "s", "duration": "s", "inner_rate": "Hz", "outer_rate": "Hz",
}

_SECTIONS = {
    "wing": WingParams, "env": EnvParams, "actuator": ActuatorParams,
    "guidance": GuidanceConfig, "wind": WindModel, "excitation": Excitation,
}
_TUPLES = {"target_minus", "target_plus", "frequencies"}


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def section_to_dict(obj) -> dict:
    return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}


def config_to_dict(cfg: SimConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            out[f.name] = section_to_dict(v)
        else:
            out[f.name] = v
    return out


def dumps(cfg: SimConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=False) + "\n"


def _field_error(section, name, msg):
    where = f"{section}.{name}" if section else name
    unit = UNITS.get(name)
    return ConfigError(f"{where}: {msg}" + (f" (unit: {unit})" if unit else ""))


def _coerce(section, f: dataclasses.Field, value):
    name = f.name
    if name in _TUPLES:
        if not isinstance(value, (list, tuple)) or not all(isinstance(x, (int, float)) for x in value):
            raise _field_error(section, name, f"expected a list of numbers, got {value!r}")
        return tuple(float(x) for x in value)
    if name == "seed":
        if isinstance(value, bool) or not isinstance(value, int):
            raise _field_error(section, name, f"expected an integer, got {value!r}")
        return value
    if name == "angle_arithmetic":
        if not isinstance(value, str):
            raise _field_error(section, name, f"expected a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise _field_error(section, name, f"expected a finite number, got {value!r}")
    return float(value)


def _build(section: str, cls, data, base=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in fields:
            raise ConfigError(f"{section}.{key}: unknown field; expected one of {sorted(fields)}")
    kwargs = {} if base is None else {k: getattr(base, k) for k in fields}
    for key, value in data.items():
        kwargs[key] = _coerce(section, fields[key], value)
    missing = [k for k, f in fields.items() if k not in kwargs
               and f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    if missing:
        raise _field_error(section, missing[0], "missing required field")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def config_from_dict(data: dict, base: SimConfig | None = None) -> SimConfig:
    """Build a :class:`SimConfig`; ``base`` supplies defaults for omitted fields.

    A top-level ``"preset"`` key picks the wing, environment, actuator and guidance defaults by name.
    """
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    data = dict(data)
    if "preset" in data:
        name = data.pop("preset")
        try:
            p = get_preset(name)
        except KeyError as exc:
            raise ConfigError(f"preset: {exc.args[0]}") from None
        base = base or SimConfig(wing=p.wing, env=p.env, actuator=p.actuator, guidance=p.guidance)
    top = {f.name: f for f in dataclasses.fields(SimConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(f"{key}: unknown field; expected one of {sorted(top) + ['preset']}")
    if base is None and "wing" not in data:
        raise ConfigError("wing: missing required section (or give a preset)")
    kwargs = {}
    for key, f in top.items():
        cur = getattr(base, key) if base is not None else None
        if key in _SECTIONS:
            if key in data:
                kwargs[key] = _build(key, _SECTIONS[key], data[key], cur)
            elif cur is not None:
                kwargs[key] = cur
        elif key == "init":
            if key in data:
                v = data[key]
                if v == AUTO_CROSSWIND:
                    kwargs[key] = AUTO_CROSSWIND
                elif isinstance(v, dict):
                    kwargs[key] = _build("init", KiteState, v)
                else:
                    raise ConfigError(f"init: expected 'auto' or a state object, got {v!r}")
            elif cur is not None:
                kwargs[key] = cur
        elif key in data:
            kwargs[key] = _coerce("", f, data[key])
        elif cur is not None:
            kwargs[key] = cur
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from None


def loads(text: str, base: SimConfig | None = None) -> SimConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return config_from_dict(data, base)


def preset_config(name: str) -> SimConfig:
    p = get_preset(name)
    return SimConfig(wing=p.wing, env=p.env, actuator=p.actuator, guidance=p.guidance)
