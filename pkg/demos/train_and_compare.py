"""Train a policy at desk scale and compare it with the best baseline.

Usage: python demos/train_and_compare.py [episodes]   (default 20000, ~1 min)
"""

import sys
import time
from dataclasses import replace

from cabinrl.agent import train
from cabinrl.config import ToolkitConfig
from cabinrl.controllers import make_controller
from cabinrl.harness import evaluate, generate_test_set

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
cfg = ToolkitConfig()
scenarios = generate_test_set(cfg.child_seed("scenarios"), 200, params=cfg.env)
learning = replace(cfg.learning.with_budget(episodes), seed=cfg.child_seed("train"))

t0 = time.perf_counter()
weights, curve = train(cfg.env, learning, cfg.tiles, scenarios=scenarios, eval_every=max(episodes // 10, 1))
print(f"trained {episodes} episodes in {time.perf_counter() - t0:.0f}s")
for p in curve:
    print(f"  episode {p.episode:>6}: reward {p.mean_reward:7.3f}  comfort {100 * p.comfort_fraction:5.1f}%")

rl = evaluate(weights, scenarios, cfg.env, cfg.tiles)
bb = evaluate(make_controller("bang-bang", "avg"), scenarios, cfg.env)
for label, m in (("learned", rl), ("bang-bang/avg", bb)):
    print(f"{label:<14} reward {m.mean_step_reward:7.3f}  comfort {100 * m.comfort_fraction:5.1f}%  "
          f"power {m.mean_hvac_power:5.0f} W")
