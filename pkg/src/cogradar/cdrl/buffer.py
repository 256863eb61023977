"""FIFO experience replay over preallocated ring arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import RngStream

__all__ = ["Transition", "ReplayBuffer"]


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Ring storage; once full, each insertion evicts the oldest entry."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.states = np.zeros((self.capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros((self.capacity, act_dim), dtype=np.float32)
        self.rewards = np.zeros(self.capacity, dtype=np.float32)
        self.next_states = np.zeros((self.capacity, obs_dim), dtype=np.float32)
        self.head = 0
        self.size = 0

    def add(self, tr: Transition) -> None:
        s = np.asarray(tr.state, dtype=np.float32)
        a = np.asarray(tr.action, dtype=np.float32)
        s2 = np.asarray(tr.next_state, dtype=np.float32)
        if s.shape != (self.obs_dim,) or s2.shape != (self.obs_dim,) or a.shape != (self.act_dim,):
            raise ValueError("transition shapes do not match the buffer")
        self.states[self.head] = s
        self.actions[self.head] = a
        self.rewards[self.head] = tr.reward
        self.next_states[self.head] = s2
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: RngStream):
        """Uniform with replacement; (states, actions, rewards, next_states)."""
        if self.size < 1:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch)
        return (
            self.states[idx].astype(float),
            self.actions[idx].astype(float),
            self.rewards[idx].astype(float),
            self.next_states[idx].astype(float),
        )
