"""Canonical parameter sets of the three test wings and the ground unit."""
from __future__ import annotations

from dataclasses import dataclass

from .actuator import ActuatorParams
from .autopilot import GuidanceConfig
from .wingdyn import EnvParams, WingParams

WINGS = {
    "airush6": WingParams(area_A=6.0, mass_m=1.7, span_ds=1.8, lift_CL=0.6, eq_efficiency_Eeq=5.1),
    "airush9": WingParams(area_A=9.0, mass_m=2.45, span_ds=2.7, lift_CL=0.8, eq_efficiency_Eeq=5.6),
    "airush12": WingParams(area_A=12.0, mass_m=2.9, span_ds=3.1, lift_CL=0.85, eq_efficiency_Eeq=5.3),
}

ENV = EnvParams(tether_r=30.0, attach_distance_d=0.5, air_density_rho=1.2, gravity_g=9.81)

ACTUATOR = ActuatorParams(
    gain_Km=0.73,
    pole_wm=1.9,
    current_limit=10.0,
    position_limit=0.35,
    gear_Kdelta=4.0,
    cl_damping_zeta=0.7,
    cl_natural_freq=78.0,
)

GUIDANCE = GuidanceConfig(
    target_minus=(-0.2, 0.35),
    target_plus=(0.2, 0.35),
    filter_cutoff_wgamma=0.25,
    sample_rate=50.0,
    gain_Kc=0.046,
)

INNER_RATE = 100.0
OUTER_RATE = 50.0


@dataclass(frozen=True)
class Preset:
    name: str
    wing: WingParams
    env: EnvParams = ENV
    actuator: ActuatorParams = ACTUATOR
    guidance: GuidanceConfig = GUIDANCE


def get_preset(name: str) -> Preset:
    try:
        return Preset(name, WINGS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(WINGS)}") from None
