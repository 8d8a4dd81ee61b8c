"""Occupant equivalent temperature (Madsen, sedentary) and the comfort band."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ComfortParams",
    "occupant_air_velocity",
    "equivalent_temperature",
    "is_comfortable",
]


@dataclass(frozen=True)
class ComfortParams:
    clothing_insulation: float = 0.7  # clo
    comfort_target: float = 24.0  # degC
    comfort_band: float = 1.0  # K, half-width, inclusive
    air_velocity_divisor: float = 10.0

    def __post_init__(self):
        if not self.clothing_insulation > -1:
            raise ValueError("clothing_insulation must be > -1")
        if not self.comfort_band >= 0:
            raise ValueError("comfort_band must be >= 0")
        if not self.air_velocity_divisor > 0:
            raise ValueError("air_velocity_divisor must be > 0")


def occupant_air_velocity(vent_flow: float, params: ComfortParams = ComfortParams()) -> float:
    # l/s -> "m/s" by a fixed divisor; dimensionally loose on purpose.
    return vent_flow / params.air_velocity_divisor


def equivalent_temperature(T_c: float, T_r: float, air_velocity: float,
                           params: ComfortParams = ComfortParams()) -> float:
    """Equivalent temperature felt by a sedentary occupant.

    ``T_r`` is the mean radiant temperature; the cabin model uses the
    interior-mass temperature for it.  At ``air_velocity <= 0.1`` the
    low-flow branch applies (no smoothing across the branch point).
    """
    if air_velocity <= 0.1:
        return 0.5 * (T_c + T_r)
    draft = (0.24 - 0.75 * math.sqrt(air_velocity)) / (1.0 + params.clothing_insulation)
    return 0.55 * T_c + 0.45 * T_r + draft * (36.5 - T_c)


def is_comfortable(T_e: float, params: ComfortParams = ComfortParams()) -> bool:
    return abs(T_e - params.comfort_target) <= params.comfort_band
