import os
import time
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, settings

import acceptance_log

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=500, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DESK_EPISODES = 20_000


@pytest.fixture(scope="session")
def default_cfg():
    from cabinrl.config import ToolkitConfig

    return ToolkitConfig()


@pytest.fixture(scope="session")
def test_set(default_cfg):
    """The default 200-scenario set (seed derived from the master seed)."""
    from cabinrl.harness import generate_test_set

    return generate_test_set(default_cfg.child_seed("scenarios"), 200, params=default_cfg.env)


@pytest.fixture(scope="session")
def baseline_metrics(default_cfg, test_set):
    from cabinrl.controllers import CONTROLLER_NAMES, make_controller
    from cabinrl.harness import evaluate

    return {f"{n}-{s}": evaluate(make_controller(n, s, default_cfg.comfort, default_cfg.fuzzy), test_set,
                                 default_cfg.env)
            for n in CONTROLLER_NAMES for s in ("air", "avg", "et")}


@pytest.fixture(scope="session")
def desk_run(default_cfg, test_set):
    """One desk-scale training run with the default schedule: (weights, curve, seconds)."""
    from cabinrl.agent import train

    lp = replace(default_cfg.learning.with_budget(DESK_EPISODES), seed=default_cfg.child_seed("train"))
    t0 = time.perf_counter()
    weights, curve = train(default_cfg.env, lp, default_cfg.tiles, scenarios=test_set, eval_every=100)
    return weights, curve, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
