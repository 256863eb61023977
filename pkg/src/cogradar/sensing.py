"""Radar observation models: polar measurements, SNR laws, detection.

Tracking measurements are (range, azimuth) of the true state with Gaussian
noise whose variance shrinks as 1/SNR; SNR itself follows the dwell-linear,
range^-4 law around a reference point. Scanning uses the same noise scaling
but an aggregate radar-equation constant calibrated from configuration, and
maps SNR to detection probability with Shnidman's approximation for a
square-law detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .motion import TargetState
from .numerics import RngStream, sample_gaussian

__all__ = [
    "Measurement",
    "SnrModel",
    "ScanModel",
    "measure_fn",
    "jacobian",
    "snr_track",
    "meas_noise_cov",
    "noisy_measurement",
    "scan_time",
    "beam_time",
    "scan_snr",
    "scan_constant",
    "shnidman_required_snr",
    "detection_probability",
    "scan_pass",
    "wrap_angle",
    "OriginSingularityError",
]

FALSE_ALARM = -1  # origin tag for measurements not produced by a target


class OriginSingularityError(ValueError):
    """Bearing to a target at the radar origin is undefined."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class Measurement:
    """One (range, azimuth) return. origin is simulation-only ground truth:
    the emitting target id, or FALSE_ALARM; the tracker never reads it."""

    range: float
    azimuth: float
    origin: int = FALSE_ALARM

    def cartesian(self) -> np.ndarray:
        return np.array([self.range * math.cos(self.azimuth), self.range * math.sin(self.azimuth)])


@dataclass(frozen=True)
class SnrModel:
    """Reference point of the tracking SNR law and the reference noise variances."""

    snr0: float  # linear SNR at (tau0, r0)
    tau0: float  # reference dwell, s
    r0: float  # reference range, m
    sigma_r0_sq: float  # range variance at unit SNR, m^2
    sigma_th0_sq: float  # azimuth variance at unit SNR, rad^2

    def __post_init__(self):
        for name in ("snr0", "tau0", "r0", "sigma_r0_sq", "sigma_th0_sq"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ScanModel:
    """Scanning-phase geometry and detection parameters.

    scan_const aggregates every radar-equation factor (power, gains,
    wavelength, cross-section, losses, noise temperature) into the single
    constant C of SNR = C * tau_beam / r^4. forced_pd, when set, bypasses
    the SNR map entirely (idealized-detector test scenarios).
    """

    phase_delay_deg: float
    scan_const: float
    pfa: float
    region_radius: float
    confirm_threshold: float
    swerling_case: int = 0
    forced_pd: float | None = None

    def __post_init__(self):
        if not 0 < self.phase_delay_deg <= 360:
            raise ValueError("phase_delay_deg must be in (0, 360]")
        if not 0 <= self.pfa <= 1:
            raise ValueError("pfa must be in [0, 1]")
        if self.region_radius <= 0:
            raise ValueError("region_radius must be positive")
        if self.forced_pd is not None and not 0 <= self.forced_pd <= 1:
            raise ValueError("forced_pd must be in [0, 1]")


def measure_fn(s: TargetState) -> tuple[float, float]:
    """Noise-free (range, azimuth) of a target; azimuth = atan2(y, x) in (-pi, pi]."""
    r = math.hypot(s.x, s.y)
    if r == 0.0:
        raise OriginSingularityError("target at radar origin has no bearing")
    return r, math.atan2(s.y, s.x)


def jacobian(s: TargetState) -> np.ndarray:
    """2x4 Jacobian of the polar measurement at the given state.

    Row 0 is the unit radial direction, row 1 the tangential direction
    scaled by 1/r^2; velocity columns are zero.
    """
    r2 = s.x * s.x + s.y * s.y
    if r2 == 0.0:
        raise OriginSingularityError("measurement Jacobian undefined at the origin")
    r = math.sqrt(r2)
    return np.array(
        [
            [s.x / r, s.y / r, 0.0, 0.0],
            [-s.y / r2, s.x / r2, 0.0, 0.0],
        ]
    )


def snr_track(m: SnrModel, tau: float, r: float) -> float:
    """Tracking SNR: linear in dwell, falling with the fourth power of range."""
    if tau < 0:
        raise ValueError("dwell must be nonnegative")
    if r <= 0:
        raise ValueError("range must be positive")
    return m.snr0 * (tau / m.tau0) * (r / m.r0) ** -4


def meas_noise_cov(m: SnrModel, snr: float) -> np.ndarray:
    """Measurement covariance diag(sigma_r0^2, sigma_th0^2) / snr."""
    if snr <= 0:
        raise ValueError("snr must be positive; enforce a dwell floor upstream")
    return np.diag([m.sigma_r0_sq / snr, m.sigma_th0_sq / snr])


def noisy_measurement(s: TargetState, R: np.ndarray, rng: RngStream) -> Measurement:
    """Measure a target with additive Gaussian noise of covariance R."""
    r, az = measure_fn(s)
    z = sample_gaussian(np.array([r, az]), R, rng)
    return Measurement(range=abs(float(z[0])), azimuth=wrap_angle(float(z[1])), origin=s.id)


def scan_time(phase_delay_deg: float, tau_beam: float) -> float:
    """Total time for one full sweep: (360/phase_delay) beams of tau_beam each."""
    if phase_delay_deg <= 0 or tau_beam < 0:
        raise ValueError("phase delay must be positive and beam time nonnegative")
    return (360.0 / phase_delay_deg) * tau_beam


def beam_time(phase_delay_deg: float, scan_budget: float) -> float:
    """Per-beam duration that spends scan_budget on one full sweep."""
    if phase_delay_deg <= 0 or scan_budget < 0:
        raise ValueError("phase delay must be positive and budget nonnegative")
    return scan_budget * phase_delay_deg / 360.0


def scan_constant(ref_tau_beam: float, ref_range: float, ref_snr: float) -> float:
    """Aggregate radar constant C such that C * ref_tau_beam / ref_range^4 = ref_snr."""
    if ref_tau_beam <= 0 or ref_range <= 0 or ref_snr <= 0:
        raise ValueError("scan reference values must be positive")
    return ref_snr * ref_range**4 / ref_tau_beam


def scan_snr(sm: ScanModel, tau_beam: float, r: float) -> float:
    """Scanning SNR: C * tau_beam / r^4."""
    if tau_beam < 0:
        raise ValueError("beam time must be nonnegative")
    if r <= 0:
        raise ValueError("range must be positive")
    return sm.scan_const * tau_beam / r**4


_SWERLING_DOF = {1: 1.0, 2: None, 3: 2.0, 4: None}  # None: scales with pulse count


def shnidman_required_snr(pd: float, pfa: float, n_pulses: int = 1, swerling: int = 0) -> float:
    """Per-pulse linear SNR needed for a square-law detector to reach pd.

    Closed-form approximation; case 0 is the nonfluctuating target, cases
    1-4 apply a fluctuation-loss correction in dB. Vanishes as pd drops to
    pfa, so the induced pd(snr) curve passes through (0, pfa).
    """
    if not 0 < pfa < 1:
        raise ValueError("pfa must be in (0, 1)")
    if not pfa <= pd < 1:
        raise ValueError("pd must be in [pfa, 1)")
    if swerling not in (0, 1, 2, 3, 4):
        raise ValueError("swerling case must be 0..4")
    n = int(n_pulses)
    eta = math.sqrt(-0.8 * math.log(4.0 * pfa * (1.0 - pfa)))
    # 4 pd (1-pd) = 1 - (2 pd - 1)^2; the log1p form keeps the term
    # strictly monotone through pd = 0.5 where the direct product
    # rounds to 1.0 and would flatten the bisection landscape
    u = 2.0 * pd - 1.0
    arg = -0.8 * math.log1p(-u * u)
    eta += math.copysign(math.sqrt(arg), u)
    alpha = 0.25 if n >= 40 else 0.0
    x_inf = eta * (eta + 2.0 * math.sqrt(n / 2.0 + (alpha - 0.25)))
    if x_inf <= 0.0:
        return 0.0
    if swerling == 0:
        return x_inf / n
    k = _SWERLING_DOF[swerling]
    if k is None:
        k = float(n) if swerling == 2 else 2.0 * n
    c1 = (((17.7006 * pd - 18.4496) * pd + 14.5339) * pd - 3.525) / k
    c_db = c1
    if pd > 0.872:
        c2 = (math.exp(27.31 * pd - 25.14) + (pd - 0.8) * (0.7 * math.log(1e-5 / pfa) + (2.0 * n - 20.0) / 80.0)) / k
        c_db = c1 + c2
    return 10.0 ** (c_db / 10.0) * x_inf / n


def detection_probability(snr: float, pfa: float, swerling: int = 0, n_pulses: int = 1) -> float:
    """Detection probability at the given linear SNR, by inverting the
    required-SNR approximation with bisection on pd over [pfa, 1)."""
    if not 0 < pfa < 1:
        raise ValueError("pfa must be in (0, 1)")
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    if snr == 0.0:
        return pfa
    lo, hi = pfa, 1.0 - 1e-12
    if shnidman_required_snr(hi, pfa, n_pulses, swerling) <= snr:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if shnidman_required_snr(mid, pfa, n_pulses, swerling) <= snr:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def scan_pass(
    targets: list[TargetState],
    sm: ScanModel,
    snr_model: SnrModel,
    tau_beam: float,
    rng: RngStream,
) -> list[Measurement]:
    """One sweep over the untracked targets.

    Each target echoes with probability pd(scan SNR); a detection yields a
    noisy polar measurement whose covariance follows the 1/SNR law. With
    probability pfa one false alarm lands uniformly on the surveillance
    disk. tau_beam = 0 means no echo energy at all, so no target returns.
    """
    out: list[Measurement] = []
    for tgt in sorted(targets, key=lambda t: t.id):
        if tau_beam <= 0.0:
            continue
        snr = scan_snr(sm, tau_beam, tgt.range())
        if snr <= 0.0:
            continue
        if sm.forced_pd is not None:
            pd = sm.forced_pd
        elif sm.pfa <= 0.0:
            pd = 0.0  # zero false-alarm rate means an infinite threshold
        else:
            pd = detection_probability(snr, sm.pfa, sm.swerling_case)
        if rng.random() < pd:
            out.append(noisy_measurement(tgt, meas_noise_cov(snr_model, snr), rng))
    if sm.pfa > 0.0 and rng.random() < sm.pfa:
        r = sm.region_radius * math.sqrt(rng.random())
        az = wrap_angle(rng.uniform(-math.pi, math.pi))
        out.append(Measurement(range=r, azimuth=az, origin=FALSE_ALARM))
    return out
