"""Velocity-angle control and target-point guidance.

The outer loop picks one of two target points in the (phi, theta) plane, points
the raw reference velocity angle at it and smooths that reference with a
second-order Butterworth low-pass.  The middle loop turns the tracking error
into an actuator position reference with a single proportional gain.

Angle arithmetic comes in two flavours.  ``"zenith"`` works directly in the
(-pi, pi] chart of the velocity angle, whose zero points at the zenith: the
raw reference is filtered as is and the error is a plain difference, so a
reversal from east to west always sweeps through "up" and the wing flies
up-loops.  ``"shortest"`` unwraps the raw reference before filtering and wraps
the error, which steers along the shortest rotation, possibly through "down".
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace

from .errors import DegenerateTarget

TWO_PI = 2.0 * math.pi
ARITHMETIC = ("zenith", "shortest")


class Target(str, enum.Enum):
    MINUS = "Minus"
    PLUS = "Plus"


@dataclass(frozen=True)
class GuidanceConfig:
    target_minus: tuple[float, float] = (-0.2, 0.35)  # (phi, theta)
    target_plus: tuple[float, float] = (0.2, 0.35)
    filter_cutoff_wgamma: float = 0.25  # Hz
    sample_rate: float = 50.0  # Hz
    gain_Kc: float = 0.046  # m/rad
    angle_arithmetic: str = "zenith"

    def __post_init__(self):
        if not self.target_minus[0] < self.target_plus[0]:
            raise ValueError("target_minus phi must be below target_plus phi")
        if not self.filter_cutoff_wgamma > 0:
            raise ValueError("filter_cutoff_wgamma must be > 0")
        if not self.sample_rate > 2.0 * self.filter_cutoff_wgamma:
            raise ValueError("sample_rate must exceed twice the filter cutoff")
        if not self.gain_Kc > 0:
            raise ValueError("gain_Kc must be > 0")
        if self.angle_arithmetic not in ARITHMETIC:
            raise ValueError(f"angle_arithmetic must be one of {ARITHMETIC}")

    def target(self, which: Target) -> tuple[float, float]:
        return self.target_plus if which is Target.PLUS else self.target_minus


def wrap_pi(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - a) % TWO_PI


@dataclass(frozen=True)
class Biquad:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float


@functools.lru_cache(maxsize=64)
def butterworth_coefficients(cutoff: float, sample_rate: float) -> Biquad:
    """Second-order Butterworth low-pass via the prewarped bilinear transform."""
    k = math.tan(math.pi * cutoff / sample_rate)
    k2 = k * k
    norm = 1.0 + math.sqrt(2.0) * k + k2
    b0 = k2 / norm
    return Biquad(b0, 2.0 * b0, b0, 2.0 * (k2 - 1.0) / norm, (1.0 - math.sqrt(2.0) * k + k2) / norm)


@dataclass(frozen=True)
class FilterMemory:
    """Direct form I memory: last two inputs and outputs."""

    x1: float
    x2: float
    y1: float
    y2: float

    @classmethod
    def seeded(cls, value: float) -> "FilterMemory":
        return cls(value, value, value, value)

    def shifted(self, offset: float) -> "FilterMemory":
        return FilterMemory(self.x1 + offset, self.x2 + offset, self.y1 + offset, self.y2 + offset)


def butterworth_step(x: float, memory: FilterMemory, cutoff: float,
                     sample_rate: float) -> tuple[float, FilterMemory]:
    coeffs = butterworth_coefficients(cutoff, sample_rate)
    y = (coeffs.b0 * x + coeffs.b1 * memory.x1 + coeffs.b2 * memory.x2
         - coeffs.a1 * memory.y1 - coeffs.a2 * memory.y2)
    return y, FilterMemory(x, memory.x1, y, memory.y1)


@dataclass(frozen=True)
class GuidanceState:
    active_target: Target = Target.PLUS
    filter_memory: FilterMemory | None = None
    switches: int = 0
    last_raw: float | None = field(default=None)  # unwrapped raw reference

    @classmethod
    def initial(cls, phi: float, cfg: GuidanceConfig) -> "GuidanceState":
        return cls(active_target=select_target(phi, Target.PLUS, cfg))


def select_target(phi: float, current: Target, cfg: GuidanceConfig) -> Target:
    if phi < cfg.target_minus[0]:
        return Target.PLUS
    if phi > cfg.target_plus[0]:
        return Target.MINUS
    return current


def raw_reference(theta: float, phi: float, target: tuple[float, float]) -> float:
    """Velocity angle pointing from the wing at the target point."""
    phi_a, theta_a = target
    dphi, dtheta = phi_a - phi, theta_a - theta
    if abs(dphi) < 1e-9 and abs(dtheta) < 1e-9:
        raise DegenerateTarget(f"wing at target ({phi_a}, {theta_a})")
    return math.atan2(dphi * math.cos(theta), dtheta)


def guidance_step(theta: float, phi: float, gstate: GuidanceState,
                  cfg: GuidanceConfig) -> tuple[float, GuidanceState]:
    """One outer-loop sample: switch targets, compute and filter the reference."""
    target = select_target(phi, gstate.active_target, cfg)
    switches = gstate.switches + (target is not gstate.active_target)
    raw = raw_reference(theta, phi, cfg.target(target))

    mem = gstate.filter_memory
    if mem is None or gstate.last_raw is None:
        mem = FilterMemory.seeded(raw)
        unwrapped = raw
    elif cfg.angle_arithmetic == "zenith":
        unwrapped = raw
    else:
        unwrapped = gstate.last_raw + wrap_pi(raw - gstate.last_raw)
    # keep the unwrapped signal near the origin; linear filter so shift is exact
    if abs(unwrapped) > math.pi:
        offset = -TWO_PI * round(unwrapped / TWO_PI)
        unwrapped += offset
        mem = mem.shifted(offset)

    y, mem = butterworth_step(unwrapped, mem, cfg.filter_cutoff_wgamma, cfg.sample_rate)
    new_state = replace(gstate, active_target=target, filter_memory=mem, switches=switches, last_raw=unwrapped)
    return wrap_pi(y), new_state


def velocity_angle_control(gamma_ref: float, gamma: float, cfg: GuidanceConfig,
                           position_limit: float) -> float:
    """Actuator position reference from the velocity-angle error."""
    err = gamma_ref - gamma
    if cfg.angle_arithmetic == "shortest":
        err = wrap_pi(err)
    u = cfg.gain_Kc * err
    return min(position_limit, max(-position_limit, u))
