"""
Toolkit configuration: an INI file with one section per component.

Every key is optional; anything omitted takes the library default.  Example::

    [run]
    seed = 7

    [reward]
    energy_weight = 10000

    [learning]
    episodes = 20000
    exploration_cutoff_episode = 10000

    [episode]
    envelope = -5, 65

    [tiles]
    # full tile coder as JSON (see TileCoderConfig.to_dict)
    json = {...}

    [fuzzy]
    # rule cells: sensor_class.mass_class = vent_temp_level, flow_level
    neutral.cold = medium, low
    # trapezoid corners a, b, c, d for input / vent_temp / flow sets
    input.neutral = 22, 23, 25, 26
    flow.low = -inf, -inf, 30, 50
    resolution = 2001

    [paths]
    scenarios = scenarios.csv
    policy = policy.bin
    output_dir = out

Unknown sections or keys and unparsable values are all collected and
reported together by ``ConfigError``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, replace

from .agent import LearningParams
from .comfort import ComfortParams
from .controllers import CLASSES, FuzzyRuleTable, Membership
from .env import EnvParams, EpisodeConfig, RewardParams
from .harness import derive_seed
from .model import ModelParams
from .tiles import TileCoderConfig, cabin_tile_config

__all__ = ["ConfigError", "Paths", "ToolkitConfig", "load_config", "derive_seed"]


class ConfigError(ValueError):
    """One or more configuration problems; ``errors`` lists them all."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Paths:
    scenarios: str = "scenarios.csv"
    policy: str = "policy.bin"
    output_dir: str = "."


@dataclass(frozen=True)
class ToolkitConfig:
    model: ModelParams = field(default_factory=ModelParams)
    comfort: ComfortParams = field(default_factory=ComfortParams)
    reward: RewardParams = field(default_factory=RewardParams)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    tiles: TileCoderConfig = field(default_factory=cabin_tile_config)
    learning: LearningParams = field(default_factory=LearningParams)
    fuzzy: FuzzyRuleTable = field(default_factory=FuzzyRuleTable)
    paths: Paths = field(default_factory=Paths)
    seed: int = 0

    @property
    def env(self) -> EnvParams:
        return EnvParams(self.model, self.comfort, self.reward, self.episode)

    def child_seed(self, label: str) -> int:
        return derive_seed(self.seed, label)

    def canonical(self) -> str:
        """Stable JSON of the resolved configuration (paths excluded: they don't change results)."""
        d = {
            "model": dataclasses.asdict(self.model),
            "comfort": dataclasses.asdict(self.comfort),
            "reward": dataclasses.asdict(self.reward),
            "episode": dataclasses.asdict(self.episode),
            "tiles": self.tiles.to_dict(),
            "learning": dataclasses.asdict(self.learning),
            "fuzzy": {"rules": {f"{s}.{m}": list(v) for (s, m), v in sorted(self.fuzzy.rules.items())},
                      "sets": {kind: {k: repr(dataclasses.astuple(v)) for k, v in sorted(sets.items())}
                               for kind, sets in (("input", self.fuzzy.inputs),
                                                  ("vent_temp", self.fuzzy.vent_temp_sets),
                                                  ("flow", self.fuzzy.flow_sets))},
                      "resolution": self.fuzzy.resolution},
            "seed": self.seed,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _convert(text: str, default):
    if isinstance(default, bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(float(x) for x in text.split(","))
    return text.strip()


def _section(cp, name: str, cls, errors: list[str], exclude=()):
    """Build ``cls`` from section ``name``, appending problems to ``errors``."""
    default = cls()
    if not cp.has_section(name):
        return default
    known = {f.name: getattr(default, f.name) for f in fields(cls) if f.name not in exclude}
    kwargs = {}
    for key, raw in cp.items(name):
        if key in exclude:
            errors.append(f"[{name}] '{key}' is not settable here; seeds derive from [run] seed")
            continue
        if key not in known:
            errors.append(f"[{name}] unknown key '{key}'")
            continue
        try:
            kwargs[key] = _convert(raw, known[key])
        except ValueError as exc:
            errors.append(f"[{name}] {key}: {exc}")
    try:
        return replace(default, **kwargs)
    except (ValueError, TypeError) as exc:
        errors.append(f"[{name}] {exc}")
        return default


def _fuzzy(cp, errors: list[str]) -> FuzzyRuleTable:
    base = FuzzyRuleTable()
    if not cp.has_section("fuzzy"):
        return base
    rules = dict(base.rules)
    resolution = base.resolution
    sets = {"input": dict(base.inputs), "vent_temp": dict(base.vent_temp_sets), "flow": dict(base.flow_sets)}
    for key, raw in cp.items("fuzzy"):
        if key == "resolution":
            try:
                resolution = int(raw)
            except ValueError:
                errors.append(f"[fuzzy] resolution: not an integer: {raw!r}")
            continue
        kind, _, level = key.partition(".")
        if kind in sets:
            try:
                a, b, c, d = (float(x) for x in raw.split(","))
                if not a <= b <= c <= d:
                    raise ValueError("corners must be ordered a <= b <= c <= d")
                if level.upper() not in sets[kind]:
                    raise ValueError(f"unknown set {level!r}")
                sets[kind][level.upper()] = Membership(a, b, c, d)
            except ValueError as exc:
                errors.append(f"[fuzzy] {key}: {exc}")
            continue
        parts = key.upper().split(".")
        out = tuple(x.strip().upper() for x in raw.split(","))
        if len(parts) != 2 or not set(parts) <= set(CLASSES) or len(out) != 2:
            errors.append(f"[fuzzy] bad rule '{key} = {raw}' (expected 'sensor.mass = temp_level, flow_level')")
            continue
        rules[tuple(parts)] = out
    try:
        return replace(base, rules=rules, resolution=resolution, inputs=sets["input"],
                       vent_temp_sets=sets["vent_temp"], flow_sets=sets["flow"])
    except ValueError as exc:
        errors.append(f"[fuzzy] {exc}")
        return base


SECTIONS = ("run", "model", "comfort", "reward", "episode", "tiles", "learning", "fuzzy", "paths")


def load_config(path=None, text: str | None = None) -> ToolkitConfig:
    """Parse a config file (or ``text``); ``None`` for both gives the defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    cp.optionxform = str
    try:
        if path is not None:
            with open(path, encoding="utf-8") as f:
                cp.read_file(f)
        elif text is not None:
            cp.read_string(text)
    except (configparser.Error, OSError) as exc:
        raise ConfigError([str(exc)]) from exc

    errors: list[str] = [f"unknown section [{s}]" for s in cp.sections() if s not in SECTIONS]
    seed = 0
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            if key != "seed":
                errors.append(f"[run] unknown key '{key}'")
                continue
            try:
                seed = int(raw)
                if seed < 0:
                    raise ValueError
            except ValueError:
                errors.append(f"[run] seed: expected a non-negative integer, got {raw!r}")
    tiles = cabin_tile_config()
    if cp.has_section("tiles"):
        for key, raw in cp.items("tiles"):
            if key != "json":
                errors.append(f"[tiles] unknown key '{key}'")
                continue
            try:
                tiles = TileCoderConfig.from_dict(json.loads(raw))
            except (ValueError, KeyError, TypeError) as exc:
                errors.append(f"[tiles] json: {exc}")

    cfg = ToolkitConfig(
        model=_section(cp, "model", ModelParams, errors),
        comfort=_section(cp, "comfort", ComfortParams, errors),
        reward=_section(cp, "reward", RewardParams, errors),
        episode=_section(cp, "episode", EpisodeConfig, errors),
        tiles=tiles,
        learning=_section(cp, "learning", LearningParams, errors, exclude=("seed",)),
        fuzzy=_fuzzy(cp, errors),
        paths=_section(cp, "paths", Paths, errors),
        seed=seed,
    )
    if errors:
        raise ConfigError(errors)
    return cfg
