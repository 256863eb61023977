"""Primal-dual training loop, evaluation rollouts, and checkpointing.

One training slot: act with exploration noise, advance the environment,
store the executed transition (normalized observations, unit dwells,
reward scaled by beta), run one DDPG mini-batch update, then ascend the
dual variable on the slot's budget usage. The dual value the environment
holds during a slot is the one that prices that slot's reward; the
ascent step installs the next slot's value afterwards.

Checkpoints capture everything the loop threads through time (network
and optimizer state, replay contents, dual variable, normalizer scale,
RNG states, the environment's full physical state, and the pending
observation) so a resumed run replays bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from ..env import RadarEnv, SlotReport, fixed_policy
from ..motion import TargetState
from ..numerics import RngStream
from ..sensing import Measurement
from ..tracking import Track
from ..trackinit import InitSlot
from .agent import DdpgAgent, actor_act, ddpg_update
from .buffer import ReplayBuffer, Transition
from .dual import DualVariable, dual_update

__all__ = [
    "ObsNormalizer",
    "TrainConfig",
    "TrainingDiverged",
    "train",
    "evaluate",
    "baseline_rollout",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """A loss became non-finite; training state was dumped for inspection."""


class ObsNormalizer:
    """Maps raw observations into network range.

    Cost entries combine a presence gap with log compression: an empty
    column stays exactly zero and any live track maps to at least
    cost_gap, with the remaining range log-scaled so the decades a
    starved track's cost climbs through stay resolvable. Without the gap
    a freshly tracked target (cost below 1) lands within noise of an
    empty column, and the critic's finite-difference view of "a track
    appeared here" bleeds into its view of "this column got cheaper",
    which was observed as a spurious positive cost slope in the empty
    corner of state space. What the policy needs from this entry is the
    ordering (how urgent is this column) plus the presence bit, and the
    gapped log preserves both at every scale.
    The dual entry is linear with a ceiling, min(lam, lam_cap) / lam_cap:
    the reward's action slope is -lam/T0 per dwell unit, so the critic
    has to represent a product of this entry with the action, which is
    bilinear only if the entry is linear in lam. A log map here was tried
    and failed softly: the critic systematically under-estimated the
    budget pressure at high lam (it would have had to exponentiate one
    input to recover the slope) and usage parked at the threshold while
    lam stayed inflated. A hard-saturating map with its knee at lambda0
    failed outright: above the knee the critic saw nothing at all and the
    dual ratcheted without effect. The cap sits well above any healthy
    operating point, so saturation only ever clips transients, and while
    clipped the represented slope stays maximal, which is the pressure
    that brings lam back inside the band. Dwells divide by T0.
    """

    def __init__(self, n: int, t0: float, lambda0: float, cost_ref: float = 1e4,
                 lam_cap: float | None = None, cost_gap: float = 0.25):
        if lambda0 <= 0:
            raise ValueError("lambda0 must be positive to normalize the dual entry")
        if cost_ref <= 0:
            raise ValueError("cost_ref must be positive")
        if not 0.0 <= cost_gap < 1.0:
            raise ValueError("cost_gap must be in [0, 1)")
        self.n = int(n)
        self.t0 = float(t0)
        self.lambda0 = float(lambda0)
        self.cost_ref = float(cost_ref)
        self.cost_gap = float(cost_gap)
        self.lam_cap = 20.0 * self.lambda0 if lam_cap is None else float(lam_cap)
        if self.lam_cap <= 0:
            raise ValueError("lam_cap must be positive")

    def normalize(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (2 * self.n + 1,):
            raise ValueError(f"observation must have length {2 * self.n + 1}")
        costs = np.maximum(obs[: self.n], 0.0)
        scaled = np.log1p(costs) / np.log1p(self.cost_ref)
        out = np.empty_like(obs)
        out[: self.n] = np.where(
            costs > 0.0, self.cost_gap + (1.0 - self.cost_gap) * scaled, 0.0
        )
        out[self.n : 2 * self.n] = obs[self.n : 2 * self.n] / self.t0
        out[-1] = min(max(obs[-1], 0.0), self.lam_cap) / self.lam_cap
        return out


@dataclass(frozen=True)
class TrainConfig:
    slots: int
    warmup: int = 200  # slots before gradient updates start; dual held fixed
    beta: float = 2e4  # critic-side reward scale
    buffer_capacity: int = 1_000_000
    explore_eps: float = 0.02  # per-slot chance of starting a global burst
    explore_eps_miss: float = 0.25  # scan-burst chance after a slot with misses
    explore_track: float = 0.2  # dwell-burst chance while any column holds a track
    checkpoint_every: int = 0  # slots; 0 disables periodic saving
    checkpoint_path: str | None = None
    diverge_dump_path: str | None = None

    def __post_init__(self):
        if self.slots < 0:
            raise ValueError("slots must be nonnegative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        for name in ("explore_eps", "explore_eps_miss", "explore_track"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.checkpoint_every and not self.checkpoint_path:
            raise ValueError("periodic checkpoints need a checkpoint_path")


@dataclass
class TrainResult:
    """Loop outputs plus the threaded state a caller needs to checkpoint."""

    reports: list
    dual: DualVariable
    buffer: ReplayBuffer
    normalizer: ObsNormalizer
    next_slot: int
    pending_obs: np.ndarray
    explore_state: tuple[int, int, int] = (0, 0, 0)


def train(env: RadarEnv, agent: DdpgAgent, dual: DualVariable, cfg: TrainConfig,
          rng: RngStream, writer=None, buffer: ReplayBuffer | None = None,
          normalizer: ObsNormalizer | None = None, start_slot: int = 0,
          pending_obs: np.ndarray | None = None,
          explore_state: tuple[int, int, int] = (0, 0, 0)) -> "TrainResult":
    """Run the slot loop for cfg.slots slots.

    Pass buffer/normalizer/start_slot/pending_obs/explore_state together
    when resuming from a checkpoint; fresh runs leave them at their
    defaults.
    """
    p = env.params
    if buffer is None:
        buffer = ReplayBuffer(cfg.buffer_capacity, agent.cfg.obs_dim, agent.cfg.act_dim)
    if normalizer is None:
        normalizer = ObsNormalizer(p.n_max, p.t0, p.lambda0)
    if pending_obs is None:
        obs_n = normalizer.normalize(env._observation())
    else:
        obs_n = np.asarray(pending_obs, dtype=float)
    burst_kind, burst_left, prev_miss = explore_state

    reports: list[SlotReport] = []
    for t in range(start_slot, start_slot + cfg.slots):
        sigma = agent.noise_sigma(t)
        from_burst = False
        if t < cfg.warmup:
            # buffer-filling phase, two sample families: the uniform box
            # covers total-budget extremes the critic must price, and the
            # concentrated draws (one hot column, the rest near zero) leave
            # scan time so confirmations and dwell-vs-cost experience exist
            # before learning starts; the trained policy lives in exactly
            # that concentrated corner
            if rng.random() < 0.5:
                action = rng.uniforms(0.0, p.t0, agent.cfg.act_dim)
            else:
                action = rng.uniforms(0.0, 0.1 * p.t0, agent.cfg.act_dim)
                hot = int(rng.integers(0, agent.cfg.act_dim))
                action[hot] = rng.uniform(0.0, p.t0)
        else:
            # exploration bursts on top of the Gaussian noise. The noise
            # only perturbs locally, so on its own the critic never sees
            # the reward on the far side of the budget threshold at the
            # current dual value and its extrapolated action slope there
            # is arbitrary (observed: inverted slope, then either a dual
            # runaway or usage parked at theta_max). Scan-only slots must
            # come in consecutive runs because confirmation takes K
            # consecutive hits and an unscanned slot clears pending
            # histories; isolated draws can never complete one. Two
            # triggers condition on where the learnable contrast actually
            # lives: a live track raises the chance of dwell-range draws
            # on exactly the live columns (the cost-vs-dwell slope exists
            # only in tracked slots), and misses in the previous slot
            # raise the chance of a scan burst (the miss-vs-usage slope
            # exists only while an unconfirmed target is pending, and the
            # observation cannot show that, so the critic must meet it in
            # the reward data).
            if burst_left == 0:
                live = obs_n[: agent.cfg.act_dim] > 0.0
                if live.any() and rng.random() < cfg.explore_track:
                    burst_kind, burst_left = 4, 2  # dwell range on live columns
                elif prev_miss > 0 and rng.random() < cfg.explore_eps_miss:
                    burst_kind, burst_left = 1, 8  # scan only
                elif rng.random() < cfg.explore_eps:
                    kind_draw = rng.random()
                    if kind_draw < 0.6:
                        burst_kind, burst_left = 1, 8  # scan only
                    elif kind_draw < 0.8:
                        burst_kind, burst_left = 2, 2  # one hot column
                    else:
                        burst_kind, burst_left = 3, 1  # full-range box
            if burst_left > 0:
                burst_left -= 1
                from_burst = True
                if burst_kind == 1:
                    action = np.zeros(agent.cfg.act_dim)
                elif burst_kind == 2:
                    action = rng.uniforms(0.0, 0.1 * p.t0, agent.cfg.act_dim)
                    hot = int(rng.integers(0, agent.cfg.act_dim))
                    action[hot] = rng.uniform(0.0, p.t0)
                elif burst_kind == 4:
                    action = rng.uniforms(0.0, 0.1 * p.t0, agent.cfg.act_dim)
                    for k in np.flatnonzero(obs_n[: agent.cfg.act_dim] > 0.0):
                        action[k] = rng.uniform(0.0, p.t0)
                else:
                    action = rng.uniforms(0.0, p.t0, agent.cfg.act_dim)
            else:
                action = actor_act(agent, obs_n, explore=True, rng=rng, slot=t)
        raw2, rep = env.step(action)
        obs2_n = normalizer.normalize(raw2)
        prev_miss = rep.n_miss
        # action is already inside [0, T0]; every component was executed
        buffer.add(Transition(obs_n, action / p.t0, rep.reward / cfg.beta, obs2_n))

        losses = ddpg_update(agent, buffer, rng) if t >= cfg.warmup else None
        if losses is not None:
            critic_loss, actor_obj = losses
            if not (np.isfinite(critic_loss) and np.isfinite(actor_obj)):
                dump = cfg.diverge_dump_path or "diverged.npz"
                save_checkpoint(dump, env, agent, dual, buffer, normalizer, rng,
                                next_slot=t + 1, pending_obs=obs2_n,
                                explore_state=(burst_kind, burst_left, prev_miss))
                raise TrainingDiverged(
                    f"non-finite loss at slot {t} "
                    f"(critic {critic_loss}, actor {actor_obj}); state in {dump}"
                )

        # the dual ascends only while the policy it prices is learning;
        # integrating the warm-fill policy's violation would send lam to
        # millions before the first gradient step. Burst slots are also
        # excluded: a scan burst alone would drain lam by alpha*theta_max
        # per slot, so the dual would track the exploration scaffolding
        # instead of the policy it is supposed to price.
        if t >= cfg.warmup and not from_burst:
            dual = dual_update(dual, rep.budget_usage)
            env.lam = dual.lam

        if writer is not None:
            writer.write(rep, extras={
                "critic_loss": None if losses is None else losses[0],
                "actor_obj": None if losses is None else losses[1],
                "noise_sigma": sigma,
            })
        reports.append(rep)
        obs_n = obs2_n

        if cfg.checkpoint_every and (t + 1 - start_slot) % cfg.checkpoint_every == 0:
            save_checkpoint(cfg.checkpoint_path, env, agent, dual, buffer, normalizer,
                            rng, next_slot=t + 1, pending_obs=obs_n,
                            explore_state=(burst_kind, burst_left, prev_miss))
    return TrainResult(reports=reports, dual=dual, buffer=buffer, normalizer=normalizer,
                       next_slot=start_slot + cfg.slots, pending_obs=obs_n,
                       explore_state=(burst_kind, burst_left, prev_miss))


def evaluate(env: RadarEnv, agent: DdpgAgent, normalizer: ObsNormalizer,
             slots: int, writer=None) -> list[SlotReport]:
    """Frozen-policy rollout: no exploration, no updates."""
    obs_n = normalizer.normalize(env._observation())
    reports = []
    for _ in range(slots):
        action = actor_act(agent, obs_n, explore=False, rng=None)
        _, rep = env.step(action)
        obs_n = normalizer.normalize(env._observation())
        if writer is not None:
            writer.write(rep)
        reports.append(rep)
    return reports


def baseline_rollout(env: RadarEnv, fraction: float, slots: int, writer=None) -> list[SlotReport]:
    """Fixed-fraction policy rollout on the same environment pipeline."""
    reports = []
    for _ in range(slots):
        action = fixed_policy(fraction, env.tracked_mask, env.params.t0)
        _, rep = env.step(action)
        if writer is not None:
            writer.write(rep)
        reports.append(rep)
    return reports


# -- checkpointing ------------------------------------------------------------


def _net_arrays(tag: str, net) -> dict:
    return {f"{tag}_{i}": p for i, p in enumerate(net.parameters())}


def _opt_arrays(tag: str, opt) -> dict:
    out = {}
    for i, (m, v) in enumerate(zip(opt.m, opt.v)):
        out[f"{tag}_m{i}"] = m
        out[f"{tag}_v{i}"] = v
    return out


def save_checkpoint(path, env: RadarEnv, agent: DdpgAgent, dual: DualVariable,
                    buffer: ReplayBuffer, normalizer: ObsNormalizer, rng: RngStream,
                    next_slot: int, pending_obs: np.ndarray,
                    explore_state: tuple[int, int, int] = (0, 0, 0)) -> None:
    """Full training-state dump; everything needed for bit-exact resume."""
    arrays: dict = {}
    arrays.update(_net_arrays("actor", agent.actor))
    arrays.update(_net_arrays("critic", agent.critic))
    arrays.update(_net_arrays("tactor", agent.target_actor))
    arrays.update(_net_arrays("tcritic", agent.target_critic))
    arrays.update(_opt_arrays("aopt", agent.actor_opt))
    arrays.update(_opt_arrays("copt", agent.critic_opt))

    rows = buffer.capacity if buffer.size == buffer.capacity else buffer.size
    arrays["buf_states"] = buffer.states[:rows]
    arrays["buf_actions"] = buffer.actions[:rows]
    arrays["buf_rewards"] = buffer.rewards[:rows]
    arrays["buf_next_states"] = buffer.next_states[:rows]

    arrays["env_targets"] = np.array(
        [[t.x, t.y, t.vx, t.vy, t.age, t.id] for t in env.targets], dtype=float
    ).reshape(len(env.targets), 6)
    n = env.params.n_max
    mask = np.array([tr is not None for tr in env.tracks])
    arrays["trk_mask"] = mask
    arrays["trk_est"] = np.stack(
        [tr.estimate if tr is not None else np.zeros(4) for tr in env.tracks]
    )
    arrays["trk_cov"] = np.stack(
        [tr.covariance if tr is not None else np.eye(4) for tr in env.tracks]
    )
    arrays["trk_cost"] = np.array([tr.cost if tr is not None else 0.0 for tr in env.tracks])
    arrays["trk_id"] = np.array([tr.target_id if tr is not None else -1 for tr in env.tracks])
    arrays["trk_dwell"] = np.array(
        [tr.dwell_last if tr is not None else 0.0 for tr in env.tracks]
    )
    arrays["bank_meta"] = np.array(
        [[s.slot_id, s.last_update_slot, len(s.history)] for s in env.bank.slots], dtype=int
    ).reshape(len(env.bank.slots), 3)
    hist = [
        [z.range, z.azimuth, z.origin] for s in env.bank.slots for z in s.history
    ]
    arrays["bank_hist"] = np.array(hist, dtype=float).reshape(len(hist), 3)
    arrays["prev_costs"] = env._prev_costs
    arrays["prev_dwells"] = env._prev_dwells
    arrays["pending_obs"] = np.asarray(pending_obs, dtype=float)

    manifest = {
        "version": CHECKPOINT_VERSION,
        "next_slot": int(next_slot),
        "explore": {"burst_kind": int(explore_state[0]),
                    "burst_left": int(explore_state[1]),
                    "prev_miss": int(explore_state[2])},
        "dual": {
            "lam": dual.lam,
            "alpha": dual.alpha,
            "theta_max": dual.theta_max,
            "window": dual.window,
            "recent": list(dual.recent),
        },
        "normalizer": {
            "n": normalizer.n,
            "t0": normalizer.t0,
            "lambda0": normalizer.lambda0,
            "cost_ref": normalizer.cost_ref,
            "lam_cap": normalizer.lam_cap,
            "cost_gap": normalizer.cost_gap,
        },
        "buffer": {"head": buffer.head, "size": buffer.size, "capacity": buffer.capacity},
        "adam": {"actor_t": agent.actor_opt.t, "critic_t": agent.critic_opt.t},
        "env": {
            "slot": env.slot,
            "lam": env.lam,
            "seed": env.seed,
            "next_target_id": env._next_target_id,
            "bank_next_slot_id": env.bank.next_slot_id,
            "n_max": n,
        },
        "rng": {
            "train": rng.get_state(),
            "motion": env._motion_rng.get_state(),
            "spawn": env._spawn_rng.get_state(),
            "meas": env._meas_rng.get_state(),
        },
        "sizes": {"actor": agent.actor.sizes, "critic": agent.critic.sizes},
    }
    arrays["manifest"] = np.array(json.dumps(manifest))
    np.savez_compressed(path, **arrays)


def _load_net(tag: str, net, data) -> None:
    for i, p in enumerate(net.parameters()):
        src = data[f"{tag}_{i}"]
        if src.shape != p.shape:
            raise ValueError(f"checkpoint {tag}[{i}] shape {src.shape} != {p.shape}")
        p[...] = src


def _load_opt(tag: str, opt, t: int, data) -> None:
    for i in range(len(opt.m)):
        opt.m[i][...] = data[f"{tag}_m{i}"]
        opt.v[i][...] = data[f"{tag}_v{i}"]
    opt.t = t


def load_checkpoint(path, env: RadarEnv | None, agent: DdpgAgent,
                    buffer: ReplayBuffer | None, rng: RngStream | None):
    """Restore a save_checkpoint dump in place.

    Returns (next_slot, dual, normalizer, pending_obs, explore_state); env, agent,
    buffer and rng are mutated to the saved state. env, buffer and rng may
    each be None to restore only the agent (frozen-policy evaluation needs
    neither the training environment nor the replay memory).
    """
    with np.load(path, allow_pickle=False) as data:
        manifest = json.loads(str(data["manifest"]))
        if manifest["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest['version']}")
        if manifest["sizes"]["actor"] != agent.actor.sizes:
            raise ValueError("actor layer sizes do not match the checkpoint")
        if manifest["sizes"]["critic"] != agent.critic.sizes:
            raise ValueError("critic layer sizes do not match the checkpoint")

        _load_net("actor", agent.actor, data)
        _load_net("critic", agent.critic, data)
        _load_net("tactor", agent.target_actor, data)
        _load_net("tcritic", agent.target_critic, data)
        _load_opt("aopt", agent.actor_opt, manifest["adam"]["actor_t"], data)
        _load_opt("copt", agent.critic_opt, manifest["adam"]["critic_t"], data)

        if buffer is not None:
            b = manifest["buffer"]
            if b["capacity"] != buffer.capacity:
                raise ValueError("buffer capacity does not match the checkpoint")
            rows = data["buf_states"].shape[0]
            buffer.states[:rows] = data["buf_states"]
            buffer.actions[:rows] = data["buf_actions"]
            buffer.rewards[:rows] = data["buf_rewards"]
            buffer.next_states[:rows] = data["buf_next_states"]
            buffer.head = b["head"]
            buffer.size = b["size"]

        if env is not None:
            e = manifest["env"]
            if e["n_max"] != env.params.n_max:
                raise ValueError("environment width does not match the checkpoint")
            env.slot = e["slot"]
            env.lam = e["lam"]
            env.seed = e["seed"]
            env._next_target_id = e["next_target_id"]
            env.targets = [
                TargetState(x=row[0], y=row[1], vx=row[2], vy=row[3],
                            age=int(row[4]), id=int(row[5]))
                for row in data["env_targets"]
            ]
            mask = data["trk_mask"]
            env.tracks = [
                Track(estimate=data["trk_est"][i].copy(), covariance=data["trk_cov"][i].copy(),
                      cost=float(data["trk_cost"][i]), target_id=int(data["trk_id"][i]),
                      dwell_last=float(data["trk_dwell"][i]))
                if mask[i] else None
                for i in range(env.params.n_max)
            ]
            env.bank.slots = []
            offset = 0
            for slot_id, last_update, h in data["bank_meta"]:
                history = [
                    Measurement(range=row[0], azimuth=row[1], origin=int(row[2]))
                    for row in data["bank_hist"][offset : offset + h]
                ]
                offset += h
                env.bank.slots.append(
                    InitSlot(slot_id=int(slot_id), history=history,
                             last_update_slot=int(last_update))
                )
            env.bank.next_slot_id = e["bank_next_slot_id"]
            env._prev_costs = data["prev_costs"].copy()
            env._prev_dwells = data["prev_dwells"].copy()
            env._motion_rng.set_state(manifest["rng"]["motion"])
            env._spawn_rng.set_state(manifest["rng"]["spawn"])
            env._meas_rng.set_state(manifest["rng"]["meas"])

        if rng is not None:
            rng.set_state(manifest["rng"]["train"])

        d = manifest["dual"]
        dual = DualVariable(lam=d["lam"], alpha=d["alpha"], theta_max=d["theta_max"],
                            window=d["window"], recent=tuple(d["recent"]))
        nm = manifest["normalizer"]
        normalizer = ObsNormalizer(nm["n"], nm["t0"], nm["lambda0"],
                                   cost_ref=nm["cost_ref"], lam_cap=nm["lam_cap"],
                                   cost_gap=nm["cost_gap"])
        pending = data["pending_obs"].copy()
        ex = manifest["explore"]
        explore_state = (ex["burst_kind"], ex["burst_left"], ex["prev_miss"])
        return manifest["next_slot"], dual, normalizer, pending, explore_state
