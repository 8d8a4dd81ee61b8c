"""
``cabinrl`` command line: scenario generation, training, evaluation,
sweeps and single-episode traces.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .agent import TrainingDivergenceError, train
from .config import ConfigError, ToolkitConfig, load_config
from .controllers import CONTROLLER_NAMES, SensorKind, make_controller
from .env import read_scenarios
from .harness import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_W_GRID,
    alpha_sweep,
    evaluate,
    generate_test_set,
    pareto_sweep,
    rollout_trace,
    write_curve,
    write_metrics_row,
    write_sweep,
    write_trace,
)
from .model import CabinState, ModelDivergenceError
from .tiles import IncompatiblePolicyError, PolicyWeights, load_policy, save_policy

log = logging.getLogger("cabinrl")

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def provenance(cfg: ToolkitConfig, seed: int) -> str:
    return f"cabinrl {__version__} config={cfg.hash()} seed={seed}"


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_start(text: str) -> CabinState:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected Tc,Tm,Tamb, got {text!r}")
    try:
        return CabinState(*(float(p) for p in parts))
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric value in {text!r}") from None


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _scenarios(cfg: ToolkitConfig, path):
    """Scenario file if it exists, else the default set regenerated in memory."""
    path = path or cfg.paths.scenarios
    if path and Path(path).exists():
        return read_scenarios(path)
    if path and path != cfg.paths.scenarios:
        raise UsageError(f"scenario file not found: {path}")
    log.info("no scenario file at %s; using the default set from the master seed", path)
    return generate_test_set(cfg.child_seed("scenarios"), 200, params=cfg.env)


def _controller(cfg: ToolkitConfig, args):
    if args.controller == "rl":
        if args.sensor is not None:
            raise UsageError("--sensor is not allowed with --controller rl (the learner sees the raw state)")
        if not args.policy:
            raise UsageError("--policy is required with --controller rl")
        return load_policy(args.policy, cfg.tiles), "rl", "state"
    if args.sensor is None:
        raise UsageError(f"--sensor is required with --controller {args.controller}")
    return make_controller(args.controller, args.sensor, cfg.comfort, cfg.fuzzy), args.controller, args.sensor


def cmd_gen_scenarios(cfg: ToolkitConfig, args) -> int:
    seed = cfg.child_seed("scenarios") if args.seed is None else args.seed
    out = args.out or cfg.paths.scenarios
    generate_test_set(seed, args.count, out, cfg.env, comment=provenance(cfg, seed))
    print(f"{out} sha256={file_hash(out)}")
    return 0


def cmd_train(cfg: ToolkitConfig, args) -> int:
    learning = cfg.learning
    if args.episodes is not None:
        learning = learning.with_budget(args.episodes)
    seed = cfg.child_seed("train")
    learning = replace(learning, seed=seed)
    scen = _scenarios(cfg, args.scenarios) if args.curve else None
    weights, curve = train(cfg.env, learning, cfg.tiles, scenarios=scen, eval_every=args.eval_every)
    tag = provenance(cfg, seed)
    out = args.out_policy or cfg.paths.policy
    save_policy(weights, out, tag)
    print(f"{out} sha256={file_hash(out)}")
    if args.curve:
        write_curve(curve, args.curve, tag)
    return 0


def cmd_eval(cfg: ToolkitConfig, args) -> int:
    ctrl, name, sensor = _controller(cfg, args)
    m = evaluate(ctrl, _scenarios(cfg, args.scenarios), cfg.env, cfg.tiles)
    write_metrics_row(args.out, name, sensor, m, provenance(cfg, cfg.seed))
    print(f"{name},{sensor},{m.mean_step_reward:.6g},{100 * m.comfort_fraction:.6g},{m.mean_hvac_power:.6g}")
    return 0


def cmd_sweep(cfg: ToolkitConfig, args) -> int:
    scen = _scenarios(cfg, args.scenarios)
    if args.kind == "w":
        learning = cfg.learning if args.episodes is None else cfg.learning.with_budget(args.episodes)
        result = pareto_sweep(scen, DEFAULT_W_GRID, learning, cfg.env, cfg.seed, cfg.tiles, args.jobs)
    else:
        result = alpha_sweep(scen, DEFAULT_ALPHA_GRID, args.seeds, learning=cfg.learning, params=cfg.env,
                             master_seed=cfg.seed, tiles=cfg.tiles, jobs=args.jobs)
    write_sweep(result, args.out, provenance(cfg, cfg.seed))
    failed = [p for p in result.points if p.error]
    for p in failed:
        print(f"point {p.value:g} seed {p.seed} failed: {p.error}", file=sys.stderr)
    return EXIT_NUMERIC if failed and len(failed) == len(result.points) else 0


def cmd_trace(cfg: ToolkitConfig, args) -> int:
    ctrl, _, _ = _controller(cfg, args)
    rows = rollout_trace(ctrl, args.start, cfg.env, cfg.tiles)
    write_trace(rows, args.out, provenance(cfg, cfg.seed))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cabinrl", description="Cabin HVAC control with tile-coded Sarsa(lambda).")
    p.add_argument("--version", action="version", version=f"cabinrl {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file (omitted keys take defaults)")
        return sp

    g = common(sub.add_parser("gen-scenarios", help="write the fixed test scenario set"))
    g.add_argument("--seed", type=nonneg_int, help="RNG seed (default: derived from the master seed)")
    g.add_argument("--count", type=positive_int, default=200)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_scenarios)

    t = common(sub.add_parser("train", help="train a policy"))
    t.add_argument("--episodes", type=nonneg_int)
    t.add_argument("--out-policy")
    t.add_argument("--curve", help="learning-curve CSV (evaluates on the scenario set)")
    t.add_argument("--scenarios")
    t.add_argument("--eval-every", type=positive_int, default=1000)
    t.set_defaults(func=cmd_train)

    def controller_args(sp):
        sp.add_argument("--controller", required=True, choices=("rl",) + CONTROLLER_NAMES)
        sp.add_argument("--sensor", choices=[s.value for s in SensorKind])
        sp.add_argument("--policy")

    e = common(sub.add_parser("eval", help="evaluate a controller and append to metrics.csv"))
    controller_args(e)
    e.add_argument("--scenarios")
    e.add_argument("--out", default="metrics.csv")
    e.set_defaults(func=cmd_eval)

    s = common(sub.add_parser("sweep", help="energy-weight or learning-rate sweep"))
    s.add_argument("--kind", required=True, choices=("w", "alpha"))
    s.add_argument("--out", required=True)
    s.add_argument("--episodes", type=nonneg_int, help="training budget per point (w sweep)")
    s.add_argument("--seeds", type=positive_int, default=5, help="seeds per alpha")
    s.add_argument("--scenarios")
    s.add_argument("--jobs", type=positive_int, default=1)
    s.set_defaults(func=cmd_sweep)

    r = common(sub.add_parser("trace", help="per-step CSV of one episode"))
    controller_args(r)
    r.add_argument("--start", required=True, type=parse_start, metavar="TC,TM,TAMB")
    r.add_argument("--out", default="trace.csv")
    r.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"cabinrl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cabinrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IncompatiblePolicyError, OSError, ValueError) as exc:
        print(f"cabinrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergenceError, ModelDivergenceError, ArithmeticError) as exc:
        print(f"cabinrl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
