"""Constrained deep reinforcement learning stack.

Dense networks with hand-written reverse-mode gradients, Adam, a FIFO
replay buffer, a DDPG actor-critic with target networks, the dual-variable
ascent rule, and the slot-by-slot training loop tying them to the radar
environment.
"""

from .agent import DdpgAgent, DdpgConfig, actor_act, ddpg_update
from .buffer import ReplayBuffer, Transition
from .dual import DualVariable, dual_update
from .nets import AdamState, Mlp, adam_step
from .train import (
    ObsNormalizer,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    baseline_rollout,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "Mlp",
    "AdamState",
    "adam_step",
    "ReplayBuffer",
    "Transition",
    "DdpgAgent",
    "DdpgConfig",
    "actor_act",
    "ddpg_update",
    "DualVariable",
    "dual_update",
    "ObsNormalizer",
    "TrainConfig",
    "TrainingDiverged",
    "TrainResult",
    "train",
    "evaluate",
    "baseline_rollout",
    "save_checkpoint",
    "load_checkpoint",
]
