"""Time-slotted radar resource-allocation environment.

Each slot of length T0 is split between tracking (per-target dwells chosen
by the policy) and scanning (the residual time sweeps the region for new
targets). Targets spawn, fly NCV trajectories, and despawn independently
of the policy; confirmed tracks produce tracking costs, unconfirmed
targets count as misses, and the reward couples the resulting utility to
the time-budget constraint through the dual variable.

Budget accounting charges every commanded dwell component against the
slot, whether or not a track lives in that column: beam time is spent
either way. Tracking physics and the reported per-column dwells cover
only live tracks.

Randomness is split into three child streams (motion, spawning,
measurement) so the target truth is identical across policies for a given
seed; only the measurement stream depends on the actions taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .motion import MotionParams, TargetState, step_target
from .numerics import RngStream
from .sensing import ScanModel, SnrModel, beam_time, scan_pass
from .tracking import Track, TrackModels, track_step
from .trackinit import InitBank, confirm_to_track, process_scan

__all__ = [
    "SpawnConfig",
    "EnvParams",
    "SlotReport",
    "RadarEnv",
    "utility",
    "reward",
    "budget_usage",
    "fixed_policy",
]


@dataclass(frozen=True)
class SpawnConfig:
    """Target lifecycle rules.

    Initial speeds are small; the maneuvering-noise velocity random walk
    (about 10 m/s per slot) quickly dominates, so lifetime in the region
    is diffusion-limited to a few hundred slots. Slow starts keep early
    scan-to-scan hops well inside the association gate, making every
    fresh target confirmable.
    """

    period: int = 100  # spawn attempts on slots divisible by this
    prob: float = 0.05
    max_age: int = 3000  # slots; older targets leave
    region_radius: float = 20000.0  # meters; targets beyond this leave
    max_targets: int = 5
    radius_min: float = 2000.0  # spawn annulus
    radius_max: float = 18000.0
    speed_min: float = 2.0  # m/s, uniform with random heading
    speed_max: float = 10.0

    def __post_init__(self):
        if not 0 <= self.prob <= 1:
            raise ValueError("prob must be in [0, 1]")
        if self.period < 1 or self.max_age < 1 or self.max_targets < 1:
            raise ValueError("period, max_age, max_targets must be positive")
        if not 0 < self.radius_min <= self.radius_max <= self.region_radius:
            raise ValueError("spawn annulus must fit inside the region")


@dataclass(frozen=True)
class EnvParams:
    """Full physical and economic configuration of one environment."""

    motion: MotionParams
    snr: SnrModel
    scan: ScanModel
    track: TrackModels
    spawn: SpawnConfig
    n_max: int = 5  # action/observation width and track capacity
    t0: float = 2.5  # slot length, seconds
    beta: float = 2e4  # miss-count weight in the utility
    theta_max: float = 0.9  # budget threshold
    lambda0: float = 5000.0  # initial dual variable
    confirm_k: int = 3

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be positive")
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.theta_max <= 1:
            raise ValueError("theta_max must be in (0, 1]")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")


@dataclass
class SlotReport:
    """Everything observable about one completed slot."""

    slot_index: int
    n_targets: int
    n_tracked: int
    n_miss: int
    budget_usage: float
    lam: float
    utility: float
    reward: float
    costs: list  # per column; None where no track
    dwells: list  # executed dwell per column (0 where no track)
    dists: list  # true range per column; None where no track
    true_xy: list  # (x, y) of the bound truth per column; None where no track
    est_xy: list  # (x, y) of the estimate per column; None where no track
    confirmed_ids: list = field(default_factory=list)
    confirm_latencies: list = field(default_factory=list)  # slots from spawn


def utility(costs, n_miss: int, beta: float) -> float:
    """Joint performance metric: -sum(costs) - beta * n_miss."""
    total = 0.0
    for c in costs:
        if c is None:
            continue
        if c < 0:
            raise ValueError("tracking costs are nonnegative")
        total += c
    return -total - beta * n_miss


def budget_usage(action, t0: float) -> float:
    """Fraction of the slot spent tracking."""
    return float(np.sum(action)) / t0


def reward(u: float, usage: float, lam: float, theta_max: float) -> float:
    """Lagrangian reward: utility minus lam * (usage - theta_max).

    The penalty term is signed, so staying under the threshold earns a
    bonus proportional to the slack; nothing is clipped.
    """
    return u - lam * (usage - theta_max)


def fixed_policy(fraction: float, tracked_mask, t0: float) -> np.ndarray:
    """Baseline action: a fixed budget fraction split evenly over tracks."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    mask = np.asarray(tracked_mask, dtype=bool)
    a = np.zeros(mask.shape[0])
    n = int(mask.sum())
    if n:
        a[mask] = fraction * t0 / n
    return a


class RadarEnv:
    """Single-radar CMDP environment; one instance per seeded episode."""

    def __init__(self, params: EnvParams, seed: int = 0):
        self.params = params
        self.reset(seed)

    # -- lifecycle -----------------------------------------------------------

    def reset(self, seed: int) -> np.ndarray:
        root = RngStream(seed)
        self._motion_rng = root.child(0)
        self._spawn_rng = root.child(1)
        self._meas_rng = root.child(2)
        self.seed = int(seed)
        self.slot = 0
        self.lam = self.params.lambda0
        self.targets: list[TargetState] = []
        self.tracks: list[Track | None] = [None] * self.params.n_max
        self.bank = InitBank(
            capacity=self.params.n_max,
            threshold=self.params.scan.confirm_threshold,
            confirm_k=self.params.confirm_k,
        )
        self._next_target_id = 0
        self._prev_costs = np.zeros(self.params.n_max)
        self._prev_dwells = np.zeros(self.params.n_max)
        return self._observation()

    @property
    def tracked_mask(self) -> np.ndarray:
        return np.array([tr is not None for tr in self.tracks])

    def _observation(self) -> np.ndarray:
        return np.concatenate([self._prev_costs, self._prev_dwells, [self.lam]])

    # -- spawning ------------------------------------------------------------

    def _spawn_target(self) -> TargetState:
        sp = self.params.spawn
        rng = self._spawn_rng
        # uniform over the annulus area, uniform speed, random heading
        r = math.sqrt(rng.uniform(sp.radius_min**2, sp.radius_max**2))
        ang = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(sp.speed_min, sp.speed_max)
        heading = rng.uniform(-math.pi, math.pi)
        t = TargetState(
            x=r * math.cos(ang),
            y=r * math.sin(ang),
            vx=speed * math.cos(heading),
            vy=speed * math.sin(heading),
            age=0,
            id=self._next_target_id,
        )
        self._next_target_id += 1
        return t

    def _lifecycle(self) -> None:
        sp = self.params.spawn
        keep = [t for t in self.targets if t.age <= sp.max_age and t.range() <= sp.region_radius]
        gone = {t.id for t in self.targets} - {t.id for t in keep}
        self.targets = [step_target(t, self.params.motion, self._motion_rng) for t in keep]
        if self.slot % sp.period == 0:
            # drawn unconditionally so the stream's schedule is fixed
            roll = self._spawn_rng.random()
            if roll < sp.prob and len(self.targets) < sp.max_targets:
                self.targets.append(self._spawn_target())
        # tracks die with their targets
        for col, tr in enumerate(self.tracks):
            if tr is not None and tr.target_id in gone:
                self.tracks[col] = None

    # -- one slot --------------------------------------------------------------

    def step(self, action) -> tuple[np.ndarray, SlotReport]:
        p = self.params
        a = np.asarray(action, dtype=float)
        if a.shape != (p.n_max,):
            raise ValueError(f"action must have length {p.n_max}, got shape {a.shape}")
        if np.any(a < -1e-12) or np.any(a > p.t0 + 1e-12):
            raise ValueError("action components must lie in [0, t0]")

        self._lifecycle()
        by_id = {t.id: t for t in self.targets}

        # every commanded dwell consumes slot time, pointed at a live track
        # or not; only live tracks get tracking physics out of it
        clipped = np.clip(a, 0.0, p.t0)
        costs: list = [None] * p.n_max
        dwells = np.zeros(p.n_max)
        dists: list = [None] * p.n_max
        true_xy: list = [None] * p.n_max
        est_xy: list = [None] * p.n_max
        for col in range(p.n_max):
            tr = self.tracks[col]
            if tr is None:
                continue
            truth = by_id[tr.target_id]
            tau = float(clipped[col])
            tr = track_step(tr, truth, tau, p.track, self._meas_rng)
            self.tracks[col] = tr
            costs[col] = tr.cost
            dwells[col] = tau
            dists[col] = truth.range()
            true_xy[col] = (truth.x, truth.y)
            est_xy[col] = (float(tr.estimate[0]), float(tr.estimate[1]))

        n_tracked = sum(tr is not None for tr in self.tracks)
        usage = budget_usage(clipped, p.t0)

        # scanning phase: the residual slot time sweeps for new targets
        tracked_ids = {tr.target_id for tr in self.tracks if tr is not None}
        untracked = [t for t in self.targets if t.id not in tracked_ids]
        n_miss = len(untracked)
        tau_scan = max(0.0, p.t0 - float(clipped.sum()))
        tau_beam = beam_time(p.scan.phase_delay_deg, tau_scan)
        zs = scan_pass(untracked, p.scan, p.snr, tau_beam, self._meas_rng)
        histories = process_scan(self.bank, zs, self.slot, n_tracked=n_tracked)

        confirmed_ids: list[int] = []
        latencies: list[int] = []
        bound = set(tracked_ids)
        for hist in histories:
            tgt = self._bind_confirmation(hist, bound)
            if tgt is None:
                continue  # confirmation built on false alarms; nothing to track
            bound.add(tgt.id)
            # lowest free column; keeps the track population packed so the
            # same action dimensions carry tracks slot after slot
            col = next(c for c in range(p.n_max) if self.tracks[c] is None)
            self.tracks[col] = confirm_to_track(hist, target_id=tgt.id)
            confirmed_ids.append(tgt.id)
            latencies.append(tgt.age)

        u = utility(costs, n_miss, p.beta)
        r = reward(u, usage, self.lam, p.theta_max)

        report = SlotReport(
            slot_index=self.slot,
            n_targets=len(self.targets),
            n_tracked=n_tracked,
            n_miss=n_miss,
            budget_usage=usage,
            lam=self.lam,
            utility=u,
            reward=r,
            costs=costs,
            dwells=list(map(float, dwells)),
            dists=dists,
            true_xy=true_xy,
            est_xy=est_xy,
            confirmed_ids=confirmed_ids,
            confirm_latencies=latencies,
        )

        self._prev_costs = np.array([c if c is not None else 0.0 for c in costs])
        self._prev_dwells = dwells
        self.slot += 1
        return self._observation(), report

    def _bind_confirmation(self, history, bound_ids) -> TargetState | None:
        """Ground-truth bookkeeping: nearest unbound target to the last hit."""
        anchor = history[-1].cartesian()
        best = None
        for t in sorted(self.targets, key=lambda t: t.id):
            if t.id in bound_ids:
                continue
            d = math.hypot(t.x - anchor[0], t.y - anchor[1])
            if best is None or d < best[0]:
                best = (d, t)
        return None if best is None else best[1]
