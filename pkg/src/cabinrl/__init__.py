"""Cabin climate control: RC thermal model, comfort metric, tile-coded Sarsa(lambda) and baselines."""

__version__ = "0.1.0"

from .agent import LearningParams, TrainingDivergenceError, greedy_policy, train
from .comfort import ComfortParams, equivalent_temperature, is_comfortable
from .controllers import Controller, make_controller
from .env import ACTIONS, EnvParams, EpisodeConfig, RewardParams, decode_action, encode_action, env_step, run_episode
from .harness import EvalMetrics, evaluate, generate_test_set
from .model import CabinState, HvacAction, ModelParams, step
from .tiles import PolicyWeights, TileCoder, cabin_tile_config, load_policy, save_policy

__all__ = [
    "ACTIONS",
    "CabinState",
    "ComfortParams",
    "Controller",
    "EnvParams",
    "EpisodeConfig",
    "EvalMetrics",
    "HvacAction",
    "LearningParams",
    "ModelParams",
    "PolicyWeights",
    "RewardParams",
    "TileCoder",
    "TrainingDivergenceError",
    "cabin_tile_config",
    "decode_action",
    "encode_action",
    "env_step",
    "equivalent_temperature",
    "evaluate",
    "generate_test_set",
    "greedy_policy",
    "is_comfortable",
    "load_policy",
    "make_controller",
    "run_episode",
    "save_policy",
    "step",
    "train",
]
