"""
Dense tile coding over the joint state-action space.

Every tiling owns a contiguous block of the weight vector.  Within a block
the cell coordinates are laid out mixed-radix, first axis most significant.
Tiling ``t`` of a group with ``n`` tilings is shifted by ``t/n`` of a cell
along every axis; inputs are clamped to the axis range and bins are clamped
to ``[0, intervals - 1]`` so the block size stays ``prod(intervals)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TileAxis",
    "TilingGroup",
    "TileCoderConfig",
    "TileCoder",
    "PolicyWeights",
    "IncompatiblePolicyError",
    "cabin_tile_config",
    "save_policy",
    "load_policy",
]

POLICY_MAGIC = "cabinrl-policy"
POLICY_VERSION = 1


class IncompatiblePolicyError(ValueError):
    """Weights were produced under a different tile configuration."""


@dataclass(frozen=True)
class TileAxis:
    name: str
    lo: float
    hi: float
    intervals: int

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"axis {self.name}: hi must exceed lo")
        if int(self.intervals) != self.intervals or self.intervals < 1:
            raise ValueError(f"axis {self.name}: intervals must be a positive integer")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.intervals


@dataclass(frozen=True)
class TilingGroup:
    tilings: int
    axes: tuple[TileAxis, ...]

    @property
    def block_size(self) -> int:
        return int(np.prod([a.intervals for a in self.axes]))


@dataclass(frozen=True)
class TileCoderConfig:
    state_vars: tuple[str, ...]
    action_vars: tuple[str, ...]
    groups: tuple[TilingGroup, ...]

    def __post_init__(self):
        known = set(self.state_vars) | set(self.action_vars)
        if len(known) != len(self.state_vars) + len(self.action_vars):
            raise ValueError("state and action variable names must be distinct")
        for g in self.groups:
            if g.tilings < 1:
                raise ValueError("each group needs at least one tiling")
            for a in g.axes:
                if a.name not in known:
                    raise ValueError(f"tiling axis {a.name!r} is not a state or action variable")

    @property
    def n_tilings(self) -> int:
        return sum(g.tilings for g in self.groups)

    @property
    def total_weights(self) -> int:
        return sum(g.tilings * g.block_size for g in self.groups)

    def to_dict(self) -> dict:
        return {
            "state_vars": list(self.state_vars),
            "action_vars": list(self.action_vars),
            "groups": [
                {"tilings": g.tilings,
                 "axes": [[a.name, float(a.lo), float(a.hi), int(a.intervals)] for a in g.axes]}
                for g in self.groups
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TileCoderConfig":
        groups = tuple(
            TilingGroup(int(g["tilings"]),
                        tuple(TileAxis(str(n), float(lo), float(hi), int(k)) for n, lo, hi, k in g["axes"]))
            for g in d["groups"]
        )
        return cls(tuple(d["state_vars"]), tuple(d["action_vars"]), groups)

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def cabin_tile_config() -> TileCoderConfig:
    """The 30-tiling layout used for the cabin controller."""
    T_c = TileAxis("T_c", 0.0, 50.0, 26)
    T_m = TileAxis("T_m", 10.0, 40.0, 7)
    T_amb = TileAxis("T_amb", 0.0, 40.0, 7)
    T_i = TileAxis("T_i", 0.0, 60.0, 3)
    v_i = TileAxis("v_i", 1.0, 100.0, 3)
    A_r = TileAxis("A_r", 0.0, 1.0, 3)
    return TileCoderConfig(
        state_vars=("T_c", "T_m", "T_amb"),
        action_vars=("T_i", "v_i", "A_r"),
        groups=(
            TilingGroup(10, (T_c, T_m, T_amb, T_i, v_i, A_r)),
            TilingGroup(20, (T_c, T_i, v_i, A_r)),
        ),
    )


class TileCoder:
    """Maps (state, action) vectors to one active weight index per tiling.

    The per-tiling geometry is flattened into ``(n_tilings, n_vars)`` arrays
    so that the numba training kernel can share them exactly.  An axis that
    a group does not use has ``stride == 0``.
    """

    def __init__(self, config: TileCoderConfig):
        self.config = config
        names = config.state_vars + config.action_vars
        self.n_state = len(config.state_vars)
        self.n_vars = len(names)
        T = config.n_tilings
        self.lo = np.zeros((T, self.n_vars))
        self.hi = np.ones((T, self.n_vars))
        self.width = np.ones((T, self.n_vars))
        self.shift = np.zeros((T, self.n_vars))
        self.intervals = np.ones((T, self.n_vars), dtype=np.int64)
        self.stride = np.zeros((T, self.n_vars), dtype=np.int64)
        self.block_start = np.zeros(T, dtype=np.int64)
        t, start = 0, 0
        for g in config.groups:
            radix = 1
            strides = {}
            for a in reversed(g.axes):
                strides[a.name] = radix
                radix *= a.intervals
            for k in range(g.tilings):
                for a in g.axes:
                    j = names.index(a.name)
                    self.lo[t, j], self.hi[t, j] = a.lo, a.hi
                    self.width[t, j] = a.width
                    self.shift[t, j] = a.width * k / g.tilings
                    self.intervals[t, j] = a.intervals
                    self.stride[t, j] = strides[a.name]
                self.block_start[t] = start
                start += g.block_size
                t += 1
        self.n_tilings = T
        self.total_weights = start

    def _bins(self, values: np.ndarray) -> np.ndarray:
        x = np.clip(values, self.lo, self.hi)
        b = np.floor((x - self.lo + self.shift) / self.width).astype(np.int64)
        return np.clip(b, 0, self.intervals - 1)

    def state_part(self, state: np.ndarray) -> np.ndarray:
        """Per-tiling index contribution of the state variables (incl. block start)."""
        v = np.zeros(self.n_vars)
        v[: self.n_state] = state
        b = self._bins(v)[:, : self.n_state]
        return self.block_start + (b * self.stride[:, : self.n_state]).sum(axis=1)

    def action_part(self, action: np.ndarray) -> np.ndarray:
        v = np.zeros(self.n_vars)
        v[self.n_state:] = action
        b = self._bins(v)[:, self.n_state:]
        return (b * self.stride[:, self.n_state:]).sum(axis=1)

    def action_offsets(self, action_table: np.ndarray) -> np.ndarray:
        """``(n_actions, n_tilings)`` table of action contributions."""
        return np.array([self.action_part(a) for a in np.atleast_2d(action_table)], dtype=np.int64)

    def active_tiles(self, state, action) -> np.ndarray:
        """One weight index per tiling for the pair (state, action)."""
        return self.state_part(np.asarray(state, float)) + self.action_part(np.asarray(action, float))

    def q_values(self, theta: np.ndarray, state, action_offsets: np.ndarray) -> np.ndarray:
        """Q-hat for every action row of a precomputed offsets table."""
        idx = self.state_part(np.asarray(state, float))[None, :] + action_offsets
        return theta[idx].sum(axis=1)


@dataclass
class PolicyWeights:
    theta: np.ndarray
    fingerprint: str
    meta: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, config: TileCoderConfig) -> "PolicyWeights":
        return cls(np.zeros(config.total_weights), config.fingerprint())

    def check(self, config: TileCoderConfig) -> None:
        if self.fingerprint != config.fingerprint():
            raise IncompatiblePolicyError(
                f"policy fingerprint {self.fingerprint[:12]} does not match "
                f"tile config {config.fingerprint()[:12]}"
            )
        if self.theta.shape != (config.total_weights,):
            raise IncompatiblePolicyError(
                f"policy has {self.theta.size} weights, config needs {config.total_weights}"
            )

    def q_value(self, coder: TileCoder, state, action) -> float:
        self.check(coder.config)
        return float(self.theta[coder.active_tiles(state, action)].sum())


def save_policy(weights: PolicyWeights, path, comment: str | None = None) -> None:
    """Write the versioned policy file: text header, blank line, raw <f8 weights."""
    if not np.all(np.isfinite(weights.theta)):
        raise ValueError("refusing to save non-finite weights")
    header = []
    if comment:
        header.append(f"# {comment}")
    header += [
        f"magic={POLICY_MAGIC}",
        f"version={POLICY_VERSION}",
        f"config_fingerprint={weights.fingerprint}",
        f"weights={weights.theta.size}",
    ]
    blob = ("\n".join(header) + "\n\n").encode("utf-8")
    Path(path).write_bytes(blob + np.asarray(weights.theta, dtype="<f8").tobytes())


def load_policy(path, config: TileCoderConfig | None = None) -> PolicyWeights:
    data = Path(path).read_bytes()
    sep = data.find(b"\n\n")
    if sep < 0:
        raise ValueError(f"{path}: not a policy file (no header terminator)")
    fields = {}
    for line in data[:sep].decode("utf-8").splitlines():
        if line.startswith("#") or not line.strip():
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    if fields.get("magic") != POLICY_MAGIC:
        raise ValueError(f"{path}: bad magic {fields.get('magic')!r}")
    if fields.get("version") != str(POLICY_VERSION):
        raise ValueError(f"{path}: unsupported policy version {fields.get('version')!r}")
    n = int(fields["weights"])
    body = data[sep + 2:]
    if len(body) != 8 * n:
        raise ValueError(f"{path}: expected {n} weights, found {len(body) / 8:g}")
    theta = np.frombuffer(body, dtype="<f8").astype(float)
    w = PolicyWeights(theta, fields["config_fingerprint"])
    if config is not None:
        w.check(config)
    return w
