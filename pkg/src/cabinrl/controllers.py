"""
Hand-coded comparison controllers: bang-bang, proportional, commercial
(approximation) and a two-input Mamdani fuzzy controller.

Every controller emits an action from the same 60-action grid as the
learner.  Sensors:

    air  T_s = T_c
    avg  T_s = (T_c + T_m) / 2
    et   T_s = equivalent temperature, computed with the flow commanded on
         the previous step (1 l/s before the first step)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .comfort import ComfortParams, equivalent_temperature, occupant_air_velocity
from .env import encode_action
from .model import RECIRC_POSITIONS, VENT_FLOWS, VENT_TEMPS, CabinState, HvacAction

__all__ = [
    "SensorKind",
    "sensor_reading",
    "snap",
    "bang_bang",
    "proportional",
    "commercial",
    "Membership",
    "FuzzyRuleTable",
    "fuzzy",
    "Controller",
    "CONTROLLER_NAMES",
    "make_controller",
]

TARGET = 24.0
BAND = 1.0
HOLD_RECIRC = 0.5
COMMERCIAL_FLOW_CAP = 67.0


class SensorKind(str, Enum):
    AIR = "air"
    AVG = "avg"
    ET = "et"


def sensor_reading(state: CabinState, last_action: HvacAction | None, kind,
                   comfort: ComfortParams = ComfortParams()) -> float:
    kind = SensorKind(kind)
    if kind is SensorKind.AIR:
        return state.T_c
    if kind is SensorKind.AVG:
        return 0.5 * (state.T_c + state.T_m)
    flow = VENT_FLOWS[0] if last_action is None else last_action.vent_flow
    return equivalent_temperature(state.T_c, state.T_m, occupant_air_velocity(flow, comfort), comfort)


def snap(value: float, grid) -> float:
    """Nearest grid value; ties go to the lower one."""
    return min(grid, key=lambda g: (abs(g - value), g))


def _vent_temp(T_s: float) -> float:
    if T_s < TARGET - BAND:
        return VENT_TEMPS[-1]
    if T_s > TARGET + BAND:
        return VENT_TEMPS[0]
    return snap(TARGET, VENT_TEMPS)


def bang_bang(T_s: float) -> HvacAction:
    """Full fan towards the target outside the band, minimum fan inside it."""
    if abs(T_s - TARGET) > BAND:
        return HvacAction(VENT_FLOWS[-1], _vent_temp(T_s), HOLD_RECIRC)
    return HvacAction(VENT_FLOWS[0], _vent_temp(T_s), HOLD_RECIRC)


def proportional_flow(T_s: float) -> float:
    """Continuous fan demand in l/s before snapping."""
    return 100.0 - 99.0 * math.exp(-abs(T_s - TARGET) / 10.0)


def proportional(T_s: float) -> HvacAction:
    return HvacAction(snap(proportional_flow(T_s), VENT_FLOWS), _vent_temp(T_s), HOLD_RECIRC)


def commercial(T_s: float) -> HvacAction:
    """Stand-in for the proprietary controller: proportional with the fan capped."""
    flow = min(proportional_flow(T_s), COMMERCIAL_FLOW_CAP)
    return HvacAction(snap(flow, VENT_FLOWS), _vent_temp(T_s), HOLD_RECIRC)


# --- fuzzy ------------------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    """Trapezoid ``(a, b, c, d)``: 0 outside [a, d], 1 on [b, c].

    ``a == b`` or ``c == d`` gives a vertical edge; infinite ends make
    shoulders.
    """

    a: float
    b: float
    c: float
    d: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        core = (x >= self.b) & (x <= self.c)
        out[core] = 1.0
        if self.b > self.a:
            rise = (x > self.a) & (x < self.b)
            out[rise] = (x[rise] - self.a) / (self.b - self.a)
        if self.d > self.c:
            fall = (x > self.c) & (x < self.d)
            out[fall] = (self.d - x[fall]) / (self.d - self.c)
        return out if out.ndim else float(out)


INF = math.inf
LEVELS = ("LOW", "MEDIUM", "HIGH")
CLASSES = ("COLD", "NEUTRAL", "HOT")


def _default_rules():
    rules = {
        ("COLD", "COLD"): ("HIGH", "HIGH"),
        ("COLD", "NEUTRAL"): ("HIGH", "MEDIUM"),
        ("COLD", "HOT"): ("HIGH", "MEDIUM"),
        ("HOT", "COLD"): ("LOW", "MEDIUM"),
        ("HOT", "NEUTRAL"): ("LOW", "MEDIUM"),
        ("HOT", "HOT"): ("LOW", "HIGH"),
    }
    for m in CLASSES:
        rules[("NEUTRAL", m)] = ("MEDIUM", "LOW")
    return rules


@dataclass(frozen=True)
class FuzzyRuleTable:
    """Rules map (T_s class, T_m class) to (vent-temperature level, flow level)."""

    rules: dict = field(default_factory=_default_rules)
    inputs: dict = field(default_factory=lambda: {
        "COLD": Membership(-INF, -INF, 22.0, 23.0),
        "NEUTRAL": Membership(22.0, 23.0, 25.0, 26.0),
        "HOT": Membership(25.0, 26.0, INF, INF),
    })
    vent_temp_sets: dict = field(default_factory=lambda: {
        "LOW": Membership(-INF, -INF, 10.0, 20.0),
        "MEDIUM": Membership(10.0, 20.0, 20.0, 30.0),
        "HIGH": Membership(20.0, 30.0, INF, INF),
    })
    flow_sets: dict = field(default_factory=lambda: {
        "LOW": Membership(-INF, -INF, 30.0, 50.0),
        "MEDIUM": Membership(30.0, 50.0, 50.0, 70.0),
        "HIGH": Membership(50.0, 70.0, INF, INF),
    })
    vent_temp_range: tuple = (VENT_TEMPS[0], VENT_TEMPS[-1])
    flow_range: tuple = (VENT_FLOWS[0], VENT_FLOWS[-1])
    resolution: int = 2001

    def __post_init__(self):
        for key in ((s, m) for s in CLASSES for m in CLASSES):
            if key not in self.rules:
                raise ValueError(f"fuzzy rule table is missing cell {key}")
            t, v = self.rules[key]
            if t not in self.vent_temp_sets or v not in self.flow_sets:
                raise ValueError(f"fuzzy rule {key} -> {(t, v)} names an unknown output set")


def _centroid(strengths: dict, sets: dict, lo: float, hi: float, n: int) -> float:
    """Clip each output set at its firing strength, take the max, return the centroid."""
    x = np.linspace(lo, hi, n)
    agg = np.zeros_like(x)
    for level, w in strengths.items():
        if w > 0:
            agg = np.maximum(agg, np.minimum(w, sets[level](x)))
    total = np.trapezoid(agg, x)
    if total <= 0:
        return 0.5 * (lo + hi)
    return float(np.trapezoid(agg * x, x) / total)


def fuzzy_outputs(T_s: float, T_m: float, table: FuzzyRuleTable = FuzzyRuleTable()):
    """Crisp (vent temperature, flow) before snapping to the action grid."""
    mu_s = {k: table.inputs[k](T_s) for k in CLASSES}
    mu_m = {k: table.inputs[k](T_m) for k in CLASSES}
    t_str: dict[str, float] = {}
    v_str: dict[str, float] = {}
    for (cs, cm), (tl, vl) in table.rules.items():
        w = min(mu_s[cs], mu_m[cm])
        t_str[tl] = max(t_str.get(tl, 0.0), w)
        v_str[vl] = max(v_str.get(vl, 0.0), w)
    T_i = _centroid(t_str, table.vent_temp_sets, *table.vent_temp_range, table.resolution)
    v_i = _centroid(v_str, table.flow_sets, *table.flow_range, table.resolution)
    return T_i, v_i


def fuzzy(T_s: float, T_m: float, table: FuzzyRuleTable = FuzzyRuleTable()) -> HvacAction:
    T_i, v_i = fuzzy_outputs(T_s, T_m, table)
    return HvacAction(snap(v_i, VENT_FLOWS), snap(T_i, VENT_TEMPS), HOLD_RECIRC)


# --- episode-level wrappers -------------------------------------------------

CONTROLLER_NAMES = ("bang-bang", "proportional", "commercial", "fuzzy")


class Controller:
    """A baseline controller bound to a sensor, usable as an episode policy.

    Remembers the last commanded action for the ``et`` sensor; call
    ``reset`` between episodes (``run_episode`` does).
    """

    def __init__(self, name: str, sensor, comfort: ComfortParams = ComfortParams(),
                 table: FuzzyRuleTable | None = None):
        if name not in CONTROLLER_NAMES:
            raise ValueError(f"unknown controller {name!r}; expected one of {CONTROLLER_NAMES}")
        self.name = name
        self.sensor = SensorKind(sensor)
        self.comfort = comfort
        self.table = table or FuzzyRuleTable()
        self._rule: Callable = {"bang-bang": bang_bang, "proportional": proportional,
                                "commercial": commercial}.get(name)
        self.last: HvacAction | None = None

    @property
    def label(self) -> str:
        return f"{self.name}-{self.sensor.value}"

    def reset(self) -> None:
        self.last = None

    def act(self, state: CabinState) -> HvacAction:
        T_s = sensor_reading(state, self.last, self.sensor, self.comfort)
        action = fuzzy(T_s, state.T_m, self.table) if self.name == "fuzzy" else self._rule(T_s)
        self.last = action
        return action

    def __call__(self, state: CabinState) -> int:
        return encode_action(self.act(state))


def make_controller(name: str, sensor, comfort: ComfortParams = ComfortParams(),
                    table: FuzzyRuleTable | None = None) -> Controller:
    return Controller(name, sensor, comfort, table)
