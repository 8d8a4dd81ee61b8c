"""Evaluate all twelve controller/sensor pairs on the default test set."""

from cabinrl.config import ToolkitConfig
from cabinrl.controllers import CONTROLLER_NAMES, make_controller
from cabinrl.harness import evaluate, generate_test_set

cfg = ToolkitConfig()
scenarios = generate_test_set(cfg.child_seed("scenarios"), 200, params=cfg.env)

print(f"{'controller':<14}{'sensor':<8}{'reward':>9}{'comfort':>9}{'power W':>9}")
for name in CONTROLLER_NAMES:
    for sensor in ("air", "avg", "et"):
        m = evaluate(make_controller(name, sensor, cfg.comfort, cfg.fuzzy), scenarios, cfg.env)
        print(f"{name:<14}{sensor:<8}{m.mean_step_reward:9.3f}{100 * m.comfort_fraction:8.1f}%"
              f"{m.mean_hvac_power:9.0f}")
