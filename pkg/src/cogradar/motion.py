"""Ground-truth target kinematics: nearly-constant-velocity motion.

State is [x, y, vx, vy]. Over one revisit interval T the state propagates
through the constant-velocity transition matrix and picks up zero-mean
Gaussian maneuvering noise whose covariance follows the standard
white-acceleration discretization (T^4/4, T^3/2, T^2 blocks).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numerics import RngStream, sample_gaussian

__all__ = ["TargetState", "MotionParams", "transition_matrix", "process_noise_cov", "step_target"]


@dataclass
class TargetState:
    """True kinematic state of one target plus lifecycle metadata."""

    x: float
    y: float
    vx: float
    vy: float
    age: int = 0  # time slots since spawn
    id: int = -1

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])

    def range(self) -> float:
        return float(np.hypot(self.x, self.y))


@dataclass(frozen=True)
class MotionParams:
    revisit_interval: float  # seconds per slot; fixed for the whole run
    sigma_w2: float  # maneuvering acceleration noise variance, (m/s^2)^2

    def __post_init__(self):
        if self.revisit_interval <= 0:
            raise ValueError("revisit_interval must be positive")
        if self.sigma_w2 < 0:
            raise ValueError("sigma_w2 must be nonnegative")


def transition_matrix(T: float) -> np.ndarray:
    """Constant-velocity transition over an interval of T seconds."""
    if T < 0:
        raise ValueError("interval must be nonnegative")
    F = np.eye(4)
    F[0, 2] = T
    F[1, 3] = T
    return F


def process_noise_cov(T: float, sigma_w2: float) -> np.ndarray:
    """Maneuvering-noise covariance for one interval; symmetric PSD by construction."""
    if T < 0:
        raise ValueError("interval must be nonnegative")
    if sigma_w2 < 0:
        raise ValueError("sigma_w2 must be nonnegative")
    t2 = T * T
    t3 = t2 * T
    t4 = t3 * T
    return sigma_w2 * np.array(
        [
            [t4 / 4, 0.0, t3 / 2, 0.0],
            [0.0, t4 / 4, 0.0, t3 / 2],
            [t3 / 2, 0.0, t2, 0.0],
            [0.0, t3 / 2, 0.0, t2],
        ]
    )


def step_target(s: TargetState, p: MotionParams, rng: RngStream) -> TargetState:
    """Propagate one target through one slot; age increments, id is preserved."""
    F = transition_matrix(p.revisit_interval)
    Q = process_noise_cov(p.revisit_interval, p.sigma_w2)
    nxt = sample_gaussian(F @ s.vector(), Q, rng)
    return replace(s, x=nxt[0], y=nxt[1], vx=nxt[2], vy=nxt[3], age=s.age + 1)
