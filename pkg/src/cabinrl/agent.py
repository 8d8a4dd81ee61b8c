"""
Sarsa(lambda) with replacing traces over tile-coded (state, action) features.

Two routes share the same update rule:

* ``sarsa_update`` / ``learn_episode`` -- a plain reference learner with a
  sparse dict of traces, usable with any small MDP (see the chain test).
* ``train`` -- the cabin-specific compiled loop in ``_kernel``, which is
  what produces policies at useful scale.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _kernel
from .env import ACTION_TABLE, EnvParams, N_ACTIONS, sample_initial_state, scenarios_array, worst_case_reward
from .model import CabinState, flow_to_conductance
from .tiles import PolicyWeights, TileCoder, TileCoderConfig, cabin_tile_config

__all__ = [
    "LearningParams",
    "SparseTraces",
    "TrainingDivergenceError",
    "CurvePoint",
    "select_action",
    "sarsa_update",
    "learn_episode",
    "greedy_policy",
    "CabinKernel",
    "train",
]

log = logging.getLogger(__name__)

TRACE_FLOOR = 1e-8


class TrainingDivergenceError(ArithmeticError):
    """The TD error or the model state became non-finite."""


@dataclass(frozen=True)
class LearningParams:
    learning_rate: float = 0.01
    discount: float = 0.99
    exploration: float = 0.16
    exploration_cutoff_episode: int = 190_000
    trace_decay: float = 0.98
    episodes: int = 200_000
    seed: int = 0
    normalize_step: bool = False  # divide the learning rate by the number of tilings

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        for name in ("discount", "exploration", "trace_decay"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if self.episodes < 0 or self.exploration_cutoff_episode < 0:
            raise ValueError("episodes and exploration_cutoff_episode must be >= 0")

    def step_size(self, n_tilings: int) -> float:
        return self.learning_rate / n_tilings if self.normalize_step else self.learning_rate

    def with_budget(self, episodes: int) -> "LearningParams":
        """Same schedule at a different episode budget.

        The greedy tail (episodes after the exploration cutoff) keeps its
        length, capped at half the new budget.
        """
        tail = max(self.episodes - self.exploration_cutoff_episode, 0)
        tail = min(tail, episodes // 2)
        return replace(self, episodes=episodes, exploration_cutoff_episode=episodes - tail)

    def epsilon_at(self, episode: int) -> float:
        return self.exploration if episode < self.exploration_cutoff_episode else 0.0


class SparseTraces:
    """Replacing eligibility traces keyed by weight index."""

    def __init__(self, floor: float = TRACE_FLOOR):
        self.floor = floor
        self.e: dict[int, float] = {}

    def decay(self, factor: float) -> None:
        self.e = {i: v * factor for i, v in self.e.items() if v * factor >= self.floor}

    def replace(self, indices) -> None:
        for i in indices:
            self.e[int(i)] = 1.0

    def clear(self) -> None:
        self.e.clear()

    def __len__(self):
        return len(self.e)

    def values(self):
        return self.e.values()


def select_action(coder: TileCoder, theta: np.ndarray, state, eps: float, rng,
                  action_offsets: np.ndarray) -> int:
    """Epsilon-greedy choice; ties among maximisers broken uniformly.

    Always consumes exactly two uniforms, matching the compiled loop.
    """
    u0, u1 = rng.random(2)
    n = action_offsets.shape[0]
    if u0 < eps:
        return int(u1 * n)
    q = coder.q_values(theta, state, action_offsets)
    best = np.flatnonzero(q == q.max())
    return int(best[int(u1 * best.size)])


def sarsa_update(theta: np.ndarray, traces: SparseTraces, coder: TileCoder, s, a, r: float,
                 s2, a2, params: LearningParams, absorbed2: bool = False) -> float:
    """One Sarsa(lambda) step; mutates ``theta`` and ``traces``, returns the TD error.

    ``a`` and ``a2`` are action vectors.  No bootstrapping out of an
    absorbing next state.
    """
    idx = coder.active_tiles(s, a)
    q_sa = float(theta[idx].sum())
    q_next = 0.0 if absorbed2 else float(theta[coder.active_tiles(s2, a2)].sum())
    delta = r + params.discount * q_next - q_sa
    if not math.isfinite(delta):
        raise TrainingDivergenceError(f"non-finite TD error {delta!r} (r={r!r}, q_sa={q_sa!r})")
    traces.decay(params.discount * params.trace_decay)
    traces.replace(idx)
    step = params.step_size(coder.n_tilings) * delta
    for i, e in traces.e.items():
        theta[i] += step * e
    return delta


def learn_episode(coder: TileCoder, theta: np.ndarray, start, transition: Callable,
                  action_table: np.ndarray, n_steps: int, params: LearningParams, eps: float,
                  rng, traces: SparseTraces | None = None) -> float:
    """Reference learner for one episode; returns the undiscounted return.

    ``transition(state, action_index, absorbed) -> (next_state, reward, absorbed)``.
    """
    traces = traces if traces is not None else SparseTraces()
    traces.clear()
    offsets = coder.action_offsets(action_table)
    s, absorbed = start, False
    a = select_action(coder, theta, s, eps, rng, offsets)
    total = 0.0
    for _ in range(n_steps):
        s2, r, absorbed2 = transition(s, a, absorbed)
        a2 = select_action(coder, theta, s2, eps, rng, offsets)
        sarsa_update(theta, traces, coder, s, action_table[a], r, s2, action_table[a2], params, absorbed2)
        total += r
        s, a, absorbed = s2, a2, absorbed2
    return total


def greedy_policy(coder: TileCoder, weights: PolicyWeights,
                  action_table: np.ndarray = ACTION_TABLE) -> Callable:
    """Deterministic greedy policy (first maximiser wins) as ``state -> index``."""
    weights.check(coder.config)
    offsets = coder.action_offsets(action_table)
    theta = weights.theta

    def policy(state) -> int:
        vec = state.as_array() if isinstance(state, CabinState) else state
        return int(np.argmax(coder.q_values(theta, vec, offsets)))

    return policy


@dataclass
class CurvePoint:
    episode: int
    mean_reward: float
    comfort_fraction: float
    mean_hvac_power: float


class CabinKernel:
    """Packs env parameters and tile geometry into the arrays the kernel expects."""

    def __init__(self, params: EnvParams, coder: TileCoder):
        if coder.n_state != 3:
            raise ValueError("the cabin kernel needs exactly the three cabin state variables")
        self.params = params
        self.coder = coder
        ns = coder.n_state
        self.geo_f = np.ascontiguousarray(np.stack(
            [coder.lo[:, :ns], coder.hi[:, :ns], coder.width[:, :ns], coder.shift[:, :ns]]))
        self.geo_i = np.ascontiguousarray(np.stack([coder.intervals[:, :ns], coder.stride[:, :ns]]))
        self.block_start = coder.block_start.copy()
        self.act_off = np.ascontiguousarray(coder.action_offsets(ACTION_TABLE))
        m = params.model
        self.act_flow = np.array([a[1] for a in ACTION_TABLE])
        self.act_temp = np.array([a[0] for a in ACTION_TABLE])
        self.act_ifan = np.array([flow_to_conductance(v, m) for v in self.act_flow])
        self.act_iin = np.array([(1.0 - a[2]) * i for a, i in zip(ACTION_TABLE, self.act_ifan)])
        self.mp = np.array([m.solar_load, m.occupant_load, m.mass_conductance, m.cabin_conductance,
                            m.effective_cabin_capacitance, m.mass_capacitance, m.dt, m.substeps],
                           dtype=float)
        c = params.comfort
        self.cp = np.array([c.clothing_insulation, c.comfort_target, c.comfort_band, c.air_velocity_divisor])
        self.rp = np.array([params.reward.energy_weight, params.reward.fan_energy_coefficient])
        self.env = np.array(params.episode.envelope, dtype=float)
        self.r_min = worst_case_reward(params)
        self.max_steps = params.episode.max_steps

    def evaluate(self, theta: np.ndarray, starts: np.ndarray) -> np.ndarray:
        """Per-scenario sums ``(reward, comfort_steps, |q_h|, energy)`` under the greedy policy."""
        return _kernel.evaluate_greedy(
            theta, np.ascontiguousarray(starts, dtype=float), self.max_steps, self.geo_f, self.geo_i,
            self.block_start, self.act_off, self.act_flow, self.act_temp, self.act_ifan, self.act_iin,
            self.mp, self.cp, self.rp, self.env, self.r_min)

    def run(self, theta: np.ndarray, starts: np.ndarray, uniforms: np.ndarray, learning: LearningParams,
            eps: float, forced: np.ndarray | None = None) -> None:
        n = starts.shape[0]
        if forced is None:
            forced = np.full((n, self.max_steps + 1), -1, dtype=np.int64)
        diag = np.zeros(5)
        status = _kernel.train_episodes(
            theta, np.ascontiguousarray(starts, dtype=float), uniforms, forced, eps,
            learning.step_size(self.coder.n_tilings), learning.discount, learning.trace_decay, TRACE_FLOOR,
            self.max_steps, self.geo_f, self.geo_i, self.block_start, self.act_off,
            self.act_flow, self.act_temp, self.act_ifan, self.act_iin,
            self.mp, self.cp, self.rp, self.env, self.r_min, diag)
        if status != _kernel.OK:
            what = "TD error" if status == _kernel.DIVERGED_DELTA else "model state"
            raise TrainingDivergenceError(
                f"non-finite {what} in chunk episode {int(diag[0])}, step {int(diag[1])} "
                f"(delta={diag[2]!r}, T_c={diag[3]!r}, T_m={diag[4]!r})")


def curve_point(episode: int, sums: np.ndarray, max_steps: int) -> CurvePoint:
    steps = max(sums.shape[0] * max_steps, 1)
    return CurvePoint(episode, sums[:, 0].sum() / steps, sums[:, 1].sum() / steps, sums[:, 2].sum() / steps)


def train(params: EnvParams = EnvParams(), learning: LearningParams = LearningParams(),
          tiles: TileCoderConfig | None = None, scenarios=None, eval_every: int = 1000,
          hook: Callable[[int, np.ndarray], None] | None = None, chunk: int = 500,
          initial: PolicyWeights | None = None):
    """Train a cabin policy.

    Each episode draws its start state (``sample_initial_state``) and then
    its selection uniforms from one ``numpy`` generator seeded with
    ``learning.seed``, so a run is a pure function of its arguments and
    does not depend on ``chunk`` or ``eval_every``.  If ``scenarios`` is given the
    greedy policy is evaluated on it every ``eval_every`` episodes and after
    the last one; ``hook(episode, theta)`` is called at the same points.

    Returns ``(PolicyWeights, list[CurvePoint])``.
    """
    tiles = tiles or cabin_tile_config()
    coder = TileCoder(tiles)
    weights = initial if initial is not None else PolicyWeights.zeros(tiles)
    weights.check(tiles)
    theta = weights.theta
    kern = CabinKernel(params, coder)
    rng = np.random.default_rng(learning.seed)
    starts_eval = None if scenarios is None else scenarios_array(scenarios)
    curve: list[CurvePoint] = []

    # chunk boundaries: evaluation points and the exploration cutoff
    marks = {learning.episodes}
    if eval_every and (starts_eval is not None or hook is not None):
        marks |= set(range(eval_every, learning.episodes, eval_every))
    if 0 < learning.exploration_cutoff_episode < learning.episodes:
        marks.add(learning.exploration_cutoff_episode)
    t0 = time.perf_counter()
    done = 0
    for mark in sorted(marks):
        while done < mark:
            n = min(chunk, mark - done)
            # per-episode draws keep the stream independent of chunking
            starts = np.empty((n, 3))
            uniforms = np.empty((n, params.episode.max_steps + 1, 2))
            for e in range(n):
                starts[e] = sample_initial_state(rng, params.episode).as_array()
                uniforms[e] = rng.random((params.episode.max_steps + 1, 2))
            kern.run(theta, starts, uniforms, learning, learning.epsilon_at(done))
            done += n
        if done == 0:
            continue
        if starts_eval is not None and (eval_every and done % eval_every == 0 or done == learning.episodes):
            curve.append(curve_point(done, kern.evaluate(theta, starts_eval), params.episode.max_steps))
        if hook is not None:
            hook(done, theta)
    elapsed = time.perf_counter() - t0
    if learning.episodes:
        log.info("trained %d episodes in %.1f s (%.0f episodes/s)", learning.episodes, elapsed,
                 learning.episodes / max(elapsed, 1e-9))
    out = PolicyWeights(theta, tiles.fingerprint(), {"episodes": learning.episodes, "seed": learning.seed})
    return out, curve
