"""DDPG actor-critic over the box action space [0, T0]^N.

The actor outputs unit dwells through a logistic squash, scaled by T0
only at the environment boundary; the critic scores (state, unit action)
pairs. Exploration adds Gaussian noise whose scale decays exponentially
from 20% to 2% of T0 over a configured number of slots, then holds.
Target copies of both networks trail the online ones through soft
updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import RngStream
from .buffer import ReplayBuffer
from .nets import AdamState, Mlp, adam_step

__all__ = ["DdpgConfig", "DdpgAgent", "actor_act", "ddpg_update", "critic_targets"]


@dataclass(frozen=True)
class DdpgConfig:
    obs_dim: int
    act_dim: int
    t0: float = 2.5
    actor_hidden: tuple = (256, 128)
    critic_hidden: tuple = (100, 100)
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    gamma: float = 0.9
    rho: float = 0.005  # target <- rho * online + (1 - rho) * target
    batch_size: int = 128
    noise_frac0: float = 0.2  # initial noise sigma as a fraction of t0
    noise_frac1: float = 0.02  # floor after decay
    noise_decay_slots: int = 3000
    final_init_scale: float = 3e-3
    # pre-squash bias on the actor output layer; sigmoid(-2) ~ 0.12 per
    # column starts the policy inside the budget instead of at half of T0
    # per column, which would hand the dual a huge violation to integrate
    # before the first useful gradient arrives
    actor_out_bias: float = -2.0
    # quadratic pull on output logits outside [-band, band]; inside the
    # band the policy is untouched, beyond it the sigmoid derivative is
    # below ~2e-2 and a column can freeze at a rail regardless of what
    # the critic wants, so runaway logits are drawn back to the edge
    logit_band: float = 4.0
    logit_decay: float = 1e-2

    def __post_init__(self):
        if self.obs_dim < 1 or self.act_dim < 1:
            raise ValueError("obs_dim and act_dim must be positive")
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must be in [0, 1]")
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.noise_frac0 < 0 or self.noise_frac1 < 0:
            raise ValueError("noise fractions must be nonnegative")
        if self.noise_decay_slots < 1:
            raise ValueError("noise_decay_slots must be positive")
        if self.logit_band < 0 or self.logit_decay < 0:
            raise ValueError("logit_band and logit_decay must be nonnegative")


class DdpgAgent:
    """Online and target networks plus their optimizer state."""

    def __init__(self, cfg: DdpgConfig, rng: RngStream):
        self.cfg = cfg
        self.actor = Mlp(
            [cfg.obs_dim, *cfg.actor_hidden, cfg.act_dim],
            out_act="sigmoid",
            rng=rng,
            final_scale=cfg.final_init_scale,
        )
        self.actor.biases[-1] += cfg.actor_out_bias
        self.critic = Mlp(
            [cfg.obs_dim + cfg.act_dim, *cfg.critic_hidden, 1],
            out_act="identity",
            rng=rng,
        )
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = AdamState.for_params(self.actor.parameters())
        self.critic_opt = AdamState.for_params(self.critic.parameters())

    def noise_sigma(self, slot: int) -> float:
        """Exploration noise scale in seconds at the given training slot."""
        cfg = self.cfg
        frac = min(1.0, max(0.0, slot / cfg.noise_decay_slots))
        sigma = cfg.noise_frac0 * (cfg.noise_frac1 / cfg.noise_frac0) ** frac
        return sigma * cfg.t0

    def soft_update(self) -> None:
        rho = self.cfg.rho
        for dst, src in (
            (self.target_actor, self.actor),
            (self.target_critic, self.critic),
        ):
            for pt, p in zip(dst.parameters(), src.parameters()):
                pt *= 1.0 - rho
                pt += rho * p


def actor_act(agent: DdpgAgent, obs, explore: bool, rng: RngStream, slot: int = 0) -> np.ndarray:
    """Physical dwell vector in [0, T0]; Gaussian noise only when exploring."""
    cfg = agent.cfg
    unit = agent.actor.forward(np.asarray(obs, dtype=float).reshape(1, -1))[0]
    action = cfg.t0 * unit
    if explore:
        action = action + rng.normals(0.0, agent.noise_sigma(slot), cfg.act_dim)
    return np.clip(action, 0.0, cfg.t0)


def critic_targets(agent: DdpgAgent, rewards: np.ndarray, next_states: np.ndarray) -> np.ndarray:
    """Bootstrap targets y = r + gamma * Q'(s', mu'(s')) from the target nets."""
    a2 = agent.target_actor.forward(next_states)
    q2 = agent.target_critic.forward(np.hstack([next_states, a2]))[:, 0]
    return rewards + agent.cfg.gamma * q2


def ddpg_update(agent: DdpgAgent, buffer: ReplayBuffer, rng: RngStream):
    """One mini-batch step of critic regression and actor ascent.

    Returns (critic_loss, actor_objective), or None while the buffer holds
    fewer than batch_size transitions.
    """
    cfg = agent.cfg
    if buffer.size < cfg.batch_size:
        return None
    s, a, r, s2 = buffer.sample(cfg.batch_size, rng)
    batch = float(cfg.batch_size)

    y = critic_targets(agent, r, s2)
    q = agent.critic.forward(np.hstack([s, a]))[:, 0]
    critic_loss = float(np.mean((q - y) ** 2))
    dout = (2.0 / batch) * (q - y)[:, None]
    grads, _ = agent.critic.backward(dout)
    adam_step(agent.critic.parameters(), grads, agent.critic_opt, cfg.critic_lr)

    a_pred = agent.actor.forward(s)
    q_pred = agent.critic.forward(np.hstack([s, a_pred]))[:, 0]
    actor_obj = float(np.mean(q_pred))
    _, dinput = agent.critic.backward(np.full((cfg.batch_size, 1), 1.0 / batch))
    dact = dinput[:, cfg.obs_dim :]
    z = agent.actor.out_preactivation()
    over = np.maximum(np.abs(z) - cfg.logit_band, 0.0)
    dz_out = -(2.0 * cfg.logit_decay / batch) * np.sign(z) * over
    actor_grads, _ = agent.actor.backward(dact, dz_out=dz_out)
    adam_step(agent.actor.parameters(), [-g for g in actor_grads], agent.actor_opt, cfg.actor_lr)

    agent.soft_update()
    return critic_loss, actor_obj
