"""Dual-variable ascent on the time-budget constraint.

The multiplier climbs when the slot's budget usage exceeds the threshold
and falls (floored at zero) when there is slack:

    lam <- max(0, lam + alpha * (usage - theta_max))

An optional moving-average window smooths the violation signal; the
default window of 1 reproduces the plain per-slot rule.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

__all__ = ["DualVariable", "dual_update"]


@dataclass(frozen=True)
class DualVariable:
    lam: float
    alpha: float = 5000.0
    theta_max: float = 0.9
    window: int = 1
    recent: tuple = ()  # last `window` usages, oldest first

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not 0 < self.theta_max <= 1:
            raise ValueError("theta_max must be in (0, 1]")
        if self.window < 1:
            raise ValueError("window must be >= 1")


def dual_update(dv: DualVariable, usage: float) -> DualVariable:
    """One ascent step on the averaged violation; projects onto lam >= 0."""
    if usage < 0:
        raise ValueError("usage must be nonnegative")
    recent = (dv.recent + (float(usage),))[-dv.window :]
    signal = sum(recent) / len(recent)
    lam = max(0.0, dv.lam + dv.alpha * (signal - dv.theta_max))
    return replace(dv, lam=lam, recent=recent)
