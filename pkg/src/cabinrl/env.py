"""
The cabin comfort MDP: action enumeration, start-state sampling, reward,
and fixed-length episodes with an absorbing out-of-bounds state.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .comfort import ComfortParams, equivalent_temperature, is_comfortable, occupant_air_velocity
from .model import (
    RECIRC_POSITIONS,
    VENT_FLOWS,
    VENT_TEMPS,
    CabinState,
    HvacAction,
    ModelParams,
    flow_to_conductance,
    step,
)

__all__ = [
    "RewardParams",
    "EpisodeConfig",
    "EnvParams",
    "Transition",
    "ACTIONS",
    "N_ACTIONS",
    "ACTION_TABLE",
    "decode_action",
    "encode_action",
    "sample_initial_state",
    "reward",
    "max_energy",
    "worst_case_reward",
    "env_step",
    "run_episode",
    "write_scenarios",
    "read_scenarios",
]

ACTIONS: tuple[HvacAction, ...] = tuple(
    HvacAction(v, t, r) for v, t, r in itertools.product(VENT_FLOWS, VENT_TEMPS, RECIRC_POSITIONS)
)
N_ACTIONS = len(ACTIONS)
# rows of (T_i, v_i, A_r), the order the tile coder expects
ACTION_TABLE = np.array([a.as_array() for a in ACTIONS])


@dataclass(frozen=True)
class RewardParams:
    energy_weight: float = 30_000.0  # W per unit of comfort penalty
    fan_energy_coefficient: float = 2.0  # W per l/s

    def __post_init__(self):
        if not (math.isfinite(self.energy_weight) and self.energy_weight > 0):
            raise ValueError(f"energy_weight must be finite and > 0, got {self.energy_weight!r}")
        if not self.fan_energy_coefficient >= 0:
            raise ValueError("fan_energy_coefficient must be >= 0")


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 500
    init_T_m: tuple[float, float] = (0.0, 50.0)
    init_T_amb: tuple[float, float] = (0.0, 40.0)
    init_T_c: tuple[float, float] = (0.0, 50.0)
    max_mass_air_gap: float = 30.0
    envelope: tuple[float, float] = (-5.0, 65.0)

    def __post_init__(self):
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise ValueError(f"max_steps must be a non-negative integer, got {self.max_steps!r}")
        for name in ("init_T_m", "init_T_amb", "init_T_c", "envelope"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} must be an ordered (lo, hi) pair")
        if not self.max_mass_air_gap >= 0:
            raise ValueError("max_mass_air_gap must be >= 0")

    def in_envelope(self, state: CabinState) -> bool:
        lo, hi = self.envelope
        return lo <= state.T_c <= hi and lo <= state.T_m <= hi


@dataclass(frozen=True)
class EnvParams:
    """Everything that defines the MDP dynamics and reward."""

    model: ModelParams = field(default_factory=ModelParams)
    comfort: ComfortParams = field(default_factory=ComfortParams)
    reward: RewardParams = field(default_factory=RewardParams)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)


@dataclass(frozen=True)
class Transition:
    state: CabinState
    action_index: int
    reward: float
    next_state: CabinState
    absorbed: bool
    q_h: float  # W, signed
    t_e: float  # degC, nan once absorbed
    comfortable: bool = False
    energy: float = 0.0  # W, |q_h| + fan term


def decode_action(index: int) -> HvacAction:
    """Map 0..59 to an action; flow varies slowest, recirculation fastest."""
    if not (isinstance(index, (int, np.integer)) and 0 <= index < N_ACTIONS):
        raise IndexError(f"action index must be in [0, {N_ACTIONS}), got {index!r}")
    return ACTIONS[int(index)]


def encode_action(action: HvacAction) -> int:
    iv = VENT_FLOWS.index(action.vent_flow)
    it = VENT_TEMPS.index(action.vent_temp)
    ir = RECIRC_POSITIONS.index(action.recirc)
    return iv * 15 + it * 3 + ir


def sample_initial_state(rng: np.random.Generator, config: EpisodeConfig = EpisodeConfig()) -> CabinState:
    """Uniform start state, rejecting mass/air gaps above the configured limit."""
    while True:
        T_m = rng.uniform(*config.init_T_m)
        T_amb = rng.uniform(*config.init_T_amb)
        T_c = rng.uniform(*config.init_T_c)
        if abs(T_m - T_c) <= config.max_mass_air_gap:
            return CabinState(float(T_c), float(T_m), float(T_amb))


def reward(t_e: float, q_h: float, action: HvacAction, params: RewardParams = RewardParams(),
           comfort: ComfortParams = ComfortParams()):
    """Return ``(r, r_comfort, energy)``; energy in W includes the fan term."""
    r_comfort = 0.0 if is_comfortable(t_e, comfort) else -1.0
    energy = abs(q_h) + params.fan_energy_coefficient * action.vent_flow
    return r_comfort - energy / params.energy_weight, r_comfort, energy


def max_energy(params: EnvParams) -> float:
    """Largest |Q_h| + fan term over the action set and the legal region.

    Q_h is affine in T_c and T_amb, so the corners of the region suffice.
    """
    lo, hi = params.episode.envelope
    amb_lo, amb_hi = params.episode.init_T_amb
    best = 0.0
    for a in ACTIONS:
        i_fan = flow_to_conductance(a.vent_flow, params.model)
        for T_c in (lo, hi):
            for T_amb in (amb_lo, amb_hi):
                q_h = i_fan * (a.vent_temp - T_c) - a.fresh_air_fraction * i_fan * (T_amb - T_c)
                best = max(best, abs(q_h) + params.reward.fan_energy_coefficient * a.vent_flow)
    return best


def worst_case_reward(params: EnvParams) -> float:
    """Per-step penalty paid while in the absorbing state."""
    return -1.0 - max_energy(params) / params.reward.energy_weight


def env_step(state: CabinState, action_index: int, params: EnvParams = EnvParams(),
             absorbed: bool = False, r_min: float | None = None) -> Transition:
    """One MDP transition.

    Once ``absorbed`` is set the state is frozen and every step pays the
    worst-case reward.  ``r_min`` may be passed in to avoid recomputing it.
    """
    action = decode_action(action_index)
    if absorbed:
        if r_min is None:
            r_min = worst_case_reward(params)
        return Transition(state, int(action_index), r_min, state, True, 0.0, math.nan)
    out = step(state, action, params.model)
    nxt = out.next_state
    t_e = equivalent_temperature(
        nxt.T_c, nxt.T_m, occupant_air_velocity(action.vent_flow, params.comfort), params.comfort
    )
    r, r_comfort, energy = reward(t_e, out.heat_pump_power, action, params.reward, params.comfort)
    return Transition(
        state, int(action_index), r, nxt, not params.episode.in_envelope(nxt),
        out.heat_pump_power, t_e, r_comfort == 0.0, energy,
    )


def run_episode(policy: Callable[[CabinState], int], start: CabinState,
                params: EnvParams = EnvParams()) -> list[Transition]:
    """Run exactly ``max_steps`` transitions; there is no terminal state.

    ``policy`` is called with the current state; if it has a ``reset``
    method it is called first, and if it has an ``observe`` method it is
    given each transition (controllers with sensor memory use this).  A
    start state outside the envelope is already absorbing.
    """
    if hasattr(policy, "reset"):
        policy.reset()
    observe = getattr(policy, "observe", None)
    r_min = worst_case_reward(params)
    out = []
    state, absorbed = start, not params.episode.in_envelope(start)
    for _ in range(params.episode.max_steps):
        tr = env_step(state, policy(state), params, absorbed, r_min)
        out.append(tr)
        if observe is not None:
            observe(tr)
        state, absorbed = tr.next_state, tr.absorbed
    return out


SCENARIO_HEADER = ("T_c", "T_m", "T_amb")


def write_scenarios(states: Iterable[CabinState], path=None, comment: str | None = None) -> str:
    """Serialize start states as CSV; returns the text and writes it if ``path`` is given."""
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCENARIO_HEADER)
    for s in states:
        w.writerow([repr(float(s.T_c)), repr(float(s.T_m)), repr(float(s.T_amb))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_scenarios(path) -> list[CabinState]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows or tuple(h.strip() for h in rows[0]) != SCENARIO_HEADER:
        raise ValueError(f"{path}: expected header {','.join(SCENARIO_HEADER)}")
    states = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ValueError(f"{path}: row {lineno} has {len(row)} fields, expected 3")
        states.append(CabinState(*(float(x) for x in row)))
    return states


def scenarios_array(states: Sequence[CabinState]) -> np.ndarray:
    return np.array([[s.T_c, s.T_m, s.T_amb] for s in states], dtype=float).reshape(-1, 3)
