"""
Lumped three-node thermal model of a vehicle cabin.

Nodes
-----
mixing chamber   (no storage)  Q_h + I_in (T_amb - T_c) = I_fan (T_x - T_c)
cabin air        C_c k dT_c/dt = I_fan (T_x - T_c) + Q_sol + Q_occ
                                 + (T_m - T_c)/R_m - (T_c - T_amb)/R_c
interior mass    C_m dT_m/dt   = (T_c - T_m)/R_m

``I`` terms are thermal currents (mass flow times specific heat, W/K).  The
heat pump is ideal: the vent air leaves the mixing chamber at exactly the
commanded temperature, whatever power that takes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "CabinState",
    "HvacAction",
    "StepOutcome",
    "ModelDivergenceError",
    "VENT_FLOWS",
    "VENT_TEMPS",
    "RECIRC_POSITIONS",
    "flow_to_conductance",
    "heat_pump_demand",
    "derivatives",
    "step",
]

VENT_FLOWS = (1.0, 34.0, 67.0, 100.0)  # l/s
VENT_TEMPS = tuple(float(t) for t in np.linspace(7.0, 60.0, 5))  # degC
RECIRC_POSITIONS = (0.0, 0.5, 1.0)  # 1 = full recirculation


class ModelDivergenceError(ArithmeticError):
    """Raised when integration produces a non-finite state."""


@dataclass(frozen=True)
class ModelParams:
    """Cabin model constants (defaults: Jaguar XJ fit).

    Conductances are given directly (``1/R``) since that is how the
    constants are tabulated.
    """

    cabin_volume: float = 2.5  # m^3
    cabin_capacitance_factor: float = 8.0
    solar_load: float = 150.0  # W
    occupant_load: float = 120.0  # W
    cabin_conductance: float = 5.741626794 * 4.0  # W/K, 1/R_c
    mass_conductance: float = 75.0 * 1.08  # W/K, 1/R_m
    mass_capacitance: float = 450.0 * 0.02 * 7850.0  # J/K
    air_density: float = 1.2  # kg/m^3
    air_specific_heat: float = 1005.0  # J/(kg K)
    dt: float = 2.0  # s
    substeps: int = 1

    def __post_init__(self):
        positive = (
            "cabin_volume",
            "cabin_capacitance_factor",
            "cabin_conductance",
            "mass_conductance",
            "mass_capacitance",
            "air_density",
            "air_specific_heat",
            "dt",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps!r}")
        for name in ("solar_load", "occupant_load"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def cabin_air_capacitance(self) -> float:
        """C_c = rho * c_p * V_c  (J/K)."""
        return self.air_density * self.air_specific_heat * self.cabin_volume

    @property
    def effective_cabin_capacitance(self) -> float:
        """C_c * k, the capacitance actually seen by the cabin-air node."""
        return self.cabin_air_capacitance * self.cabin_capacitance_factor


@dataclass(frozen=True)
class CabinState:
    T_c: float  # cabin air, degC
    T_m: float  # interior mass, degC
    T_amb: float  # outside air, degC

    def as_array(self) -> np.ndarray:
        return np.array([self.T_c, self.T_m, self.T_amb], dtype=float)

    def is_finite(self) -> bool:
        return math.isfinite(self.T_c) and math.isfinite(self.T_m) and math.isfinite(self.T_amb)


@dataclass(frozen=True)
class HvacAction:
    vent_flow: float  # v_i, l/s
    vent_temp: float  # T_i, degC
    recirc: float  # A_r, 0 = all fresh air, 1 = full recirculation

    def as_array(self) -> np.ndarray:
        return np.array([self.vent_temp, self.vent_flow, self.recirc], dtype=float)

    @property
    def fresh_air_fraction(self) -> float:
        return 1.0 - self.recirc

    def validate(self) -> None:
        if self.vent_flow not in VENT_FLOWS:
            raise ValueError(f"vent_flow {self.vent_flow!r} not in {VENT_FLOWS}")
        if self.vent_temp not in VENT_TEMPS:
            raise ValueError(f"vent_temp {self.vent_temp!r} not in {VENT_TEMPS}")
        if self.recirc not in RECIRC_POSITIONS:
            raise ValueError(f"recirc {self.recirc!r} not in {RECIRC_POSITIONS}")


@dataclass(frozen=True)
class StepOutcome:
    next_state: CabinState
    heat_pump_power: float  # W, signed (positive = heating)
    mixed_air_temp: float  # degC
    fan_conductance: float = field(default=0.0, repr=False)


def flow_to_conductance(vent_flow: float, params: ModelParams) -> float:
    """Thermal current (W/K) carried by a volumetric air flow in l/s."""
    if not vent_flow >= 0:
        raise ValueError(f"vent flow must be >= 0, got {vent_flow!r}")
    return vent_flow / 1000.0 * params.air_density * params.air_specific_heat


def heat_pump_demand(state: CabinState, action: HvacAction, params: ModelParams):
    """Heat-pump power needed to bring the intake mix to the vent set-point.

    Returns
    -------
    (q_h, i_fan, i_in) : tuple of float
        Signed power in W and the blower / fresh-air thermal currents in W/K.
    """
    i_fan = flow_to_conductance(action.vent_flow, params)
    i_in = action.fresh_air_fraction * i_fan
    q_h = i_fan * (action.vent_temp - state.T_c) - i_in * (state.T_amb - state.T_c)
    return q_h, i_fan, i_in


def derivatives(state: CabinState, mixed_air_temp: float, fan_conductance: float,
                params: ModelParams):
    """Time derivatives (dT_c/dt, dT_m/dt) in K/s."""
    T_c, T_m, T_amb = state.T_c, state.T_m, state.T_amb
    cabin_in = (
        fan_conductance * (mixed_air_temp - T_c)
        + params.solar_load
        + params.occupant_load
        + (T_m - T_c) * params.mass_conductance
        - (T_c - T_amb) * params.cabin_conductance
    )
    dTc = cabin_in / params.effective_cabin_capacitance
    dTm = (T_c - T_m) * params.mass_conductance / params.mass_capacitance
    return dTc, dTm


def step(state: CabinState, action: HvacAction, params: ModelParams) -> StepOutcome:
    """Advance the cabin by one control interval with explicit Euler."""
    q_h, i_fan, _ = heat_pump_demand(state, action, params)
    h = params.dt / params.substeps
    T_c, T_m = state.T_c, state.T_m
    for _ in range(int(params.substeps)):
        dTc, dTm = derivatives(CabinState(T_c, T_m, state.T_amb), action.vent_temp, i_fan, params)
        T_c += h * dTc
        T_m += h * dTm
    if not (math.isfinite(T_c) and math.isfinite(T_m)):
        raise ModelDivergenceError(
            f"non-finite cabin state after step from {state} with {action}"
        )
    return StepOutcome(CabinState(T_c, T_m, state.T_amb), q_h, action.vent_temp, i_fan)
