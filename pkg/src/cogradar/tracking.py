"""Per-target extended Kalman filtering on polar measurements.

The filter core (kf_predict / kf_update) is dimension-generic so the same
arithmetic serves both the 4-state radar tracks and the scalar reduction
used for verification. The radar-specific layer handles linearization of
the range-azimuth measurement, the dwell-dependent noise level, and the
position-variance cost metric.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .motion import MotionParams, TargetState, process_noise_cov, transition_matrix
from .numerics import RngStream, SingularMatrixError, as_mat, invert_spd
from .sensing import SnrModel, jacobian, meas_noise_cov, measure_fn, noisy_measurement, snr_track, wrap_angle

__all__ = [
    "Track",
    "TrackModels",
    "UpdateResult",
    "kf_predict",
    "kf_update",
    "ekf_predict",
    "ekf_update",
    "init_track",
    "tracking_cost",
    "track_step",
]

log = logging.getLogger(__name__)


@dataclass
class Track:
    """State estimate and covariance for one confirmed target."""

    estimate: np.ndarray  # [x, y, vx, vy]
    covariance: np.ndarray  # 4x4, kept symmetric
    cost: float  # position-variance trace of the last update
    target_id: int
    dwell_last: float = 0.0


@dataclass(frozen=True)
class TrackModels:
    """Everything track_step needs besides the track and the truth."""

    motion: MotionParams
    snr: SnrModel
    dwell_floor: float  # seconds; keeps the measurement noise finite at tau = 0
    nis_gate: float = 100.0  # chi^2(2) consistency gate; ~2 expected when healthy
    reset_speed_sigma: float = 300.0  # m/s; velocity std after a covariance restart

    def __post_init__(self):
        if self.dwell_floor <= 0:
            raise ValueError("dwell_floor must be positive")
        if self.nis_gate <= 0 or self.reset_speed_sigma <= 0:
            raise ValueError("nis_gate and reset_speed_sigma must be positive")


class UpdateResult(NamedTuple):
    estimate: np.ndarray
    covariance: np.ndarray
    used_measurement: bool
    nis: float = math.nan  # normalized innovation squared; nan when skipped


def _sym(p: np.ndarray) -> np.ndarray:
    return (p + p.T) / 2.0


def kf_predict(x, P, F, Q) -> tuple[np.ndarray, np.ndarray]:
    """Time update: x -> F x, P -> F P F^T + Q (symmetrized)."""
    x = np.asarray(x, dtype=float)
    F = as_mat(F)
    P = as_mat(P)
    Q = as_mat(Q)
    return F @ x, _sym(F @ P @ F.T + Q)


def kf_update(x_pred, P_pred, z, H, R, z_pred=None, wrap_mask=None) -> UpdateResult:
    """Measurement update with gain K = P H^T (H P H^T + R)^-1.

    z and z_pred are measurement-space vectors; z_pred defaults to
    H x_pred (the linear case). wrap_mask marks innovation components that
    are angles to be wrapped into (-pi, pi]. A singular innovation
    covariance skips the update and returns the prediction unchanged.
    """
    x_pred = np.asarray(x_pred, dtype=float)
    P_pred = as_mat(P_pred)
    H = as_mat(H)
    R = as_mat(R)
    z = np.asarray(z, dtype=float)
    if z_pred is None:
        z_pred = H @ x_pred
    nu = z - np.asarray(z_pred, dtype=float)
    if wrap_mask is not None:
        for i, wrap in enumerate(wrap_mask):
            if wrap:
                nu[i] = wrap_angle(nu[i])
    S = _sym(H @ P_pred @ H.T + R)
    try:
        S_inv = invert_spd(S)
    except SingularMatrixError:
        log.warning("singular innovation covariance; skipping measurement update")
        return UpdateResult(x_pred, _sym(P_pred), False)
    K = P_pred @ H.T @ S_inv
    x = x_pred + K @ nu
    P = _sym((np.eye(P_pred.shape[0]) - K @ H) @ P_pred)
    return UpdateResult(x, P, True, float(nu @ S_inv @ nu))


def ekf_predict(tr: Track, F, Q) -> tuple[np.ndarray, np.ndarray]:
    """Predict a track through one revisit interval."""
    return kf_predict(tr.estimate, tr.covariance, F, Q)


def ekf_update(x_pred, P_pred, z, H, R, z_pred=None) -> UpdateResult:
    """Polar-measurement update; innovation azimuth is wrapped."""
    return kf_update(x_pred, P_pred, z, H, R, z_pred=z_pred, wrap_mask=(False, True))


def init_track(target_id: int) -> Track:
    """Fresh track with no prior knowledge: zero state, identity covariance."""
    P = np.eye(4)
    return Track(estimate=np.zeros(4), covariance=P, cost=tracking_cost(P), target_id=target_id)


def tracking_cost(P) -> float:
    """Sum of the two position variances, P[0,0] + P[1,1]."""
    P = as_mat(P)
    if P.shape != (4, 4):
        raise ValueError(f"expected a 4x4 covariance, got {P.shape}")
    return float(P[0, 0] + P[1, 1])


def _state_at(vec: np.ndarray) -> TargetState:
    return TargetState(float(vec[0]), float(vec[1]), float(vec[2]), float(vec[3]))


def _measurement_anchor(x_pred: np.ndarray, z) -> np.ndarray:
    """x_pred with its position replaced by the measurement's position."""
    p = np.array(x_pred, dtype=float)
    r = max(z.range, 1e-3)
    p[0] = r * math.cos(z.azimuth)
    p[1] = r * math.sin(z.azimuth)
    return p


def _linearization_point(x_pred: np.ndarray, z) -> np.ndarray:
    """Point where h and its Jacobian are evaluated.

    Normally the predicted state; when the prediction sits essentially at
    the radar origin (a freshly initialized track) the bearing is
    undefined there, so we linearize at the measurement-implied position
    instead.
    """
    if math.hypot(x_pred[0], x_pred[1]) >= 1.0:
        return x_pred
    return _measurement_anchor(x_pred, z)


def _linearized_update(x_pred, P_pred, z, R, lin: np.ndarray) -> UpdateResult:
    """EKF update of a polar measurement linearized at the point lin.

    Uses the generalized predicted measurement h(lin) + H(lin)(x_pred -
    lin), which reduces to h(x_pred) when lin is the predicted state."""
    H = jacobian(_state_at(lin))
    h_lin = measure_fn(_state_at(lin))
    z_pred = np.asarray(h_lin) + H @ (x_pred - lin)
    return ekf_update(x_pred, P_pred, np.array([z.range, z.azimuth]), H, R, z_pred=z_pred)


def track_step(tr: Track, truth: TargetState, tau: float, models: TrackModels, rng: RngStream) -> Track:
    """One slot of tracking: predict, illuminate with dwell tau, update.

    The true target range sets the SNR (floored dwell keeps it positive);
    the measurement is generated from the truth and fed to the EKF
    linearized at the predicted state.
    """
    if tau < 0:
        raise ValueError("dwell must be nonnegative")
    F = transition_matrix(models.motion.revisit_interval)
    Q = process_noise_cov(models.motion.revisit_interval, models.motion.sigma_w2)
    x_pred, P_pred = ekf_predict(tr, F, Q)

    snr = snr_track(models.snr, max(tau, models.dwell_floor), truth.range())
    R = meas_noise_cov(models.snr, snr)
    z = noisy_measurement(truth, R, rng)

    res = _linearized_update(x_pred, P_pred, z, R, _linearization_point(x_pred, z))
    if res.used_measurement and res.nis > models.nis_gate:
        # The prior is wildly inconsistent with a trustworthy measurement.
        # This is the cold-start condition: the identity init covariance
        # claims meter-level certainty while the true error is kilometers,
        # and the motion-noise cross terms would dump the whole innovation
        # into velocity. Restart the covariance as an honest no-knowledge
        # diagonal anchored to the measurement and redo the update. The
        # gate is far outside chi^2(2) statistics, so a consistent filter
        # never trips it.
        anchor = _measurement_anchor(x_pred, z)
        gap = anchor[:2] - x_pred[:2]
        sp = max(float(gap @ gap), 1.0)
        sv = models.reset_speed_sigma**2
        res = _linearized_update(x_pred, np.diag([sp, sp, sv, sv]), z, R, anchor)
    return Track(
        estimate=res.estimate,
        covariance=res.covariance,
        cost=tracking_cost(res.covariance),
        target_id=tr.target_id,
        dwell_last=tau,
    )
