"""
Evaluation harness: the fixed test scenario set, controller evaluation,
learning-rate and energy-weight sweeps, and single-episode traces.

All CSV output uses 6 significant digits for floats.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .agent import CabinKernel, LearningParams, greedy_policy, train
from .env import (
    EnvParams,
    RewardParams,
    decode_action,
    read_scenarios,
    run_episode,
    sample_initial_state,
    scenarios_array,
    write_scenarios,
)
from .model import CabinState
from .tiles import PolicyWeights, TileCoder, TileCoderConfig, cabin_tile_config

__all__ = [
    "EvalMetrics",
    "SweepPoint",
    "SweepResult",
    "generate_test_set",
    "evaluate",
    "pareto_sweep",
    "alpha_sweep",
    "rollout_trace",
    "derive_seed",
    "params_hash",
    "fmt",
    "write_metrics_row",
    "write_trace",
    "DEFAULT_W_GRID",
]

log = logging.getLogger(__name__)

DEFAULT_W_GRID = tuple(round(3.0 + 0.1 * k, 1) for k in range(16))  # log10 w
DEFAULT_ALPHA_GRID = (1e-4, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.5)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def derive_seed(master: int, label: str) -> int:
    """Independent child seed for a named purpose (e.g. ``"train"``, ``"w-sweep/3"``)."""
    digest = hashlib.sha256(f"{int(master)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def params_hash(params: EnvParams) -> str:
    blob = json.dumps(asdict(params), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def scenario_hash(states: Sequence[CabinState]) -> str:
    return hashlib.sha256(write_scenarios(states).encode()).hexdigest()[:16]


@dataclass
class EvalMetrics:
    """Aggregates over every step of every scenario episode.

    ``per_scenario`` holds per-episode sums with columns
    ``(reward, comfort_steps, abs_q_h, energy)``.
    """

    mean_step_reward: float
    comfort_fraction: float
    mean_hvac_power: float  # W, heat pump only
    mean_energy: float  # W, heat pump + fan term
    per_scenario: np.ndarray = field(repr=False)
    steps_per_scenario: int = 0
    scenario_hash: str = ""
    params_hash: str = ""

    @classmethod
    def from_sums(cls, sums: np.ndarray, steps: int, scen_hash: str = "", p_hash: str = "") -> "EvalMetrics":
        n = max(sums.shape[0] * steps, 1)
        return cls(
            float(sums[:, 0].sum() / n),
            float(sums[:, 1].sum() / n),
            float(sums[:, 2].sum() / n),
            float(sums[:, 3].sum() / n),
            sums,
            steps,
            scen_hash,
            p_hash,
        )


def generate_test_set(seed: int, n: int = 200, path=None, params: EnvParams = EnvParams(),
                      comment: str | None = None) -> list[CabinState]:
    """Draw ``n`` start states from a dedicated generator; optionally persist as CSV."""
    if n < 1:
        raise ValueError(f"test set size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    states = [sample_initial_state(rng, params.episode) for _ in range(n)]
    if path is not None:
        write_scenarios(states, path, comment)
    return states


def _python_sums(policy: Callable, scenarios, params: EnvParams) -> np.ndarray:
    sums = np.zeros((len(scenarios), 4))
    for k, start in enumerate(scenarios):
        for tr in run_episode(policy, start, params):
            sums[k, 0] += tr.reward
            sums[k, 1] += tr.comfortable
            sums[k, 2] += abs(tr.q_h)
            sums[k, 3] += tr.energy
    return sums


def evaluate(controller, scenarios: Sequence[CabinState], params: EnvParams = EnvParams(),
             tiles: TileCoderConfig | None = None) -> EvalMetrics:
    """Run one episode per scenario and aggregate.

    ``controller`` is either learned ``PolicyWeights`` (evaluated greedily,
    with the compiled loop) or any ``state -> action index`` callable, such
    as a ``controllers.Controller``.
    """
    if len(scenarios) == 0:
        raise ValueError("cannot evaluate on an empty scenario set")
    if isinstance(controller, PolicyWeights):
        coder = TileCoder(tiles or cabin_tile_config())
        controller.check(coder.config)
        sums = CabinKernel(params, coder).evaluate(controller.theta, scenarios_array(scenarios))
    else:
        sums = _python_sums(controller, scenarios, params)
    return EvalMetrics.from_sums(sums, params.episode.max_steps, scenario_hash(scenarios), params_hash(params))


# --- sweeps -----------------------------------------------------------------

@dataclass
class SweepPoint:
    value: float  # log10 w for the energy sweep, alpha for the learning-rate sweep
    seed: int
    metrics: EvalMetrics | None = None
    window_reward: float = math.nan
    error: str = ""


@dataclass
class SweepResult:
    kind: str
    points: list[SweepPoint]

    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    def aggregate(self):
        """Per value: ``(value, n_ok, mean, ci_half_width)`` of the window reward (alpha sweep)."""
        rows = []
        for v in sorted({p.value for p in self.points}):
            r = np.array([p.window_reward for p in self.points if p.value == v and not p.error])
            n = r.size
            mean = float(r.mean()) if n else math.nan
            half = float(stats.t.ppf(0.975, n - 1) * r.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
            rows.append((v, n, mean, half))
        return rows


def _pareto_point(args):
    log_w, seed, params, learning, scenarios, tiles = args
    p = replace(params, reward=replace(params.reward, energy_weight=10.0 ** log_w))
    try:
        weights, _ = train(p, replace(learning, seed=seed), tiles)
        return SweepPoint(log_w, seed, evaluate(weights, scenarios, p, tiles))
    except (ArithmeticError, ValueError) as exc:
        log.warning("w-sweep point log10 w=%s failed: %s", log_w, exc)
        return SweepPoint(log_w, seed, error=str(exc))


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def pareto_sweep(scenarios: Sequence[CabinState], grid=DEFAULT_W_GRID, learning: LearningParams = LearningParams(),
                 params: EnvParams = EnvParams(), master_seed: int = 0, tiles: TileCoderConfig | None = None,
                 jobs: int = 1) -> SweepResult:
    """Train one policy per energy weight ``w = 10**g`` and evaluate each on ``scenarios``.

    Points are independent; a failing point is recorded, not raised.
    """
    items = [(float(g), derive_seed(master_seed, f"w-sweep/{k}"), params, learning, list(scenarios), tiles)
             for k, g in enumerate(grid)]
    points = _map(_pareto_point, items, jobs)
    return SweepResult("w", sorted(points, key=lambda p: p.value))


def _alpha_point(args):
    alpha, seed, params, learning, scenarios, tiles, window, eval_every = args
    lp = replace(learning, learning_rate=alpha, seed=seed, episodes=window[1])
    try:
        _, curve = train(params, lp, tiles, scenarios=scenarios, eval_every=eval_every)
        inside = [c.mean_reward for c in curve if window[0] <= c.episode <= window[1]]
        return SweepPoint(alpha, seed, window_reward=float(np.mean(inside)))
    except (ArithmeticError, ValueError) as exc:
        log.warning("alpha-sweep point alpha=%s seed=%s failed: %s", alpha, seed, exc)
        return SweepPoint(alpha, seed, error=str(exc))


def alpha_sweep(scenarios: Sequence[CabinState], grid=DEFAULT_ALPHA_GRID, seeds: int = 5,
                window=(1000, 2000), eval_every: int = 100, learning: LearningParams = LearningParams(),
                params: EnvParams = EnvParams(), master_seed: int = 0, tiles: TileCoderConfig | None = None,
                jobs: int = 1) -> SweepResult:
    """Mean test-set reward over an early episode window, per learning rate and seed."""
    if seeds < 1:
        raise ValueError("alpha sweep needs at least one seed")
    items = [(float(a), derive_seed(master_seed, f"alpha-sweep/{s}"), params, learning, list(scenarios),
              tiles, tuple(window), eval_every)
             for a in grid for s in range(seeds)]
    return SweepResult("alpha", _map(_alpha_point, items, jobs))


# --- traces -----------------------------------------------------------------

TRACE_HEADER = ("t_s", "T_c", "T_m", "T_amb", "T_e", "v_i", "T_i", "A_r", "Q_h_w", "reward")


def rollout_trace(controller, start: CabinState, params: EnvParams = EnvParams(),
                  tiles: TileCoderConfig | None = None) -> list[tuple]:
    """Per-step rows of one episode (state after the step, action taken during it)."""
    if isinstance(controller, PolicyWeights):
        controller = greedy_policy(TileCoder(tiles or cabin_tile_config()), controller)
    rows = []
    for k, tr in enumerate(run_episode(controller, start, params)):
        a = decode_action(tr.action_index)
        s = tr.next_state
        rows.append(((k + 1) * params.model.dt, s.T_c, s.T_m, s.T_amb, tr.t_e,
                     a.vent_flow, a.vent_temp, a.recirc, tr.q_h, tr.reward))
    return rows


def _csv_text(header, rows, comment: str | None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def write_trace(rows, path, comment: str | None = None) -> str:
    text = _csv_text(TRACE_HEADER, rows, comment)
    Path(path).write_text(text, encoding="utf-8")
    return text


METRICS_HEADER = ("name", "sensor", "mean_reward", "comfort_pct", "hvac_power_w")


def write_metrics_row(path, name: str, sensor: str, m: EvalMetrics, comment: str | None = None) -> None:
    """Append a controller row to ``metrics.csv``, creating it with header if absent."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", encoding="utf-8", newline="") as f:
        if new:
            if comment:
                f.write(f"# {comment}\n")
            csv.writer(f, lineterminator="\n").writerow(METRICS_HEADER)
        csv.writer(f, lineterminator="\n").writerow(
            [name, sensor, fmt(m.mean_step_reward), fmt(100.0 * m.comfort_fraction), fmt(m.mean_hvac_power)])


SWEEP_W_HEADER = ("log10_w", "w", "seed", "mean_reward", "comfort_pct", "hvac_power_w", "error")
SWEEP_ALPHA_HEADER = ("alpha", "seed", "mean_window_reward", "ci95_half_width", "n_seeds", "error")
CURVE_HEADER = ("episode", "mean_test_reward", "mean_comfort_pct", "mean_hvac_power_w")


def write_sweep(result: SweepResult, path, comment: str | None = None) -> str:
    """``sweep_w.csv`` / ``sweep_alpha.csv``; the alpha file adds one ``aggregate`` row per alpha."""
    if result.kind == "w":
        rows = []
        for p in result.points:
            m = p.metrics
            rows.append((p.value, 10.0 ** p.value, p.seed,
                         m.mean_step_reward if m else math.nan,
                         100.0 * m.comfort_fraction if m else math.nan,
                         m.mean_hvac_power if m else math.nan, p.error))
        header = SWEEP_W_HEADER
    else:
        rows = [(p.value, p.seed, p.window_reward, "", "", p.error) for p in result.points]
        rows += [(v, "aggregate", mean, half, n, "") for v, n, mean, half in result.aggregate()]
        header = SWEEP_ALPHA_HEADER
    text = _csv_text(header, rows, comment)
    Path(path).write_text(text, encoding="utf-8")
    return text


def write_curve(curve, path, comment: str | None = None) -> str:
    rows = [(c.episode, c.mean_reward, 100.0 * c.comfort_fraction, c.mean_hvac_power) for c in curve]
    text = _csv_text(CURVE_HEADER, rows, comment)
    Path(path).write_text(text, encoding="utf-8")
    return text
