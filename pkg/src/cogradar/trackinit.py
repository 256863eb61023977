"""Scan-measurement association and K-consecutive-detection confirmation.

New targets enter tracking through a bank of tentative slots. Each scan's
measurements are matched to slots greedily in ascending Cartesian distance
(one measurement per slot, strict gate), unmatched measurements open new
slots while capacity lasts, slots that received nothing are cleared, and a
slot that accumulates K consecutive hits is promoted to a confirmed track.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .sensing import Measurement
from .tracking import Track, init_track

__all__ = ["InitSlot", "InitBank", "associate", "process_scan", "confirm_to_track"]


@dataclass
class InitSlot:
    slot_id: int
    history: list[Measurement] = field(default_factory=list)  # most recent last
    last_update_slot: int = -1

    @property
    def hit_count(self) -> int:
        return len(self.history)


@dataclass
class InitBank:
    capacity: int  # shared budget across tentative slots and confirmed tracks
    threshold: float  # gate distance T_d, meters
    confirm_k: int
    slots: list[InitSlot] = field(default_factory=list)
    next_slot_id: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.confirm_k < 1:
            raise ValueError("confirm_k must be at least 1")


def _distance(a: Measurement, b: Measurement) -> float:
    pa, pb = a.cartesian(), b.cartesian()
    return math.hypot(pa[0] - pb[0], pa[1] - pb[1])


def associate(bank: InitBank, z: Measurement) -> int | None:
    """Slot id whose latest measurement is nearest to z within the gate.

    Strict inequality against the threshold; ties go to the lowest slot id.
    """
    best: tuple[float, int] | None = None
    for slot in bank.slots:
        d = _distance(slot.history[-1], z)
        if d < bank.threshold and (best is None or (d, slot.slot_id) < best):
            best = (d, slot.slot_id)
    return None if best is None else best[1]


def process_scan(
    bank: InitBank,
    measurements: list[Measurement],
    slot_index: int,
    n_tracked: int = 0,
) -> list[list[Measurement]]:
    """Fold one scan's measurements into the bank; returns confirmed histories.

    Greedy one-to-one assignment in ascending distance order, deterministic
    tie-break by (distance, slot_id, measurement position in the input).
    Unassociated measurements open new slots while the shared capacity
    (tentative slots + n_tracked confirmed tracks) allows. Slots untouched
    this pass are cleared. A slot reaching confirm_k hits emits its history
    and leaves the bank.
    """
    pairs = []
    for mi, z in enumerate(measurements):
        for slot in bank.slots:
            d = _distance(slot.history[-1], z)
            if d < bank.threshold:
                pairs.append((d, slot.slot_id, mi))
    pairs.sort()

    by_id = {slot.slot_id: slot for slot in bank.slots}
    used_slots: set[int] = set()
    used_meas: set[int] = set()
    for d, sid, mi in pairs:
        if sid in used_slots or mi in used_meas:
            continue
        used_slots.add(sid)
        used_meas.add(mi)
        slot = by_id[sid]
        slot.history.append(measurements[mi])
        slot.last_update_slot = slot_index

    # leftover measurements open new slots while the shared budget lasts
    for mi, z in enumerate(measurements):
        if mi in used_meas:
            continue
        if len(bank.slots) + n_tracked >= bank.capacity:
            break
        slot = InitSlot(slot_id=bank.next_slot_id, history=[z], last_update_slot=slot_index)
        bank.next_slot_id += 1
        bank.slots.append(slot)
        used_slots.add(slot.slot_id)

    # clearing: a pre-existing slot that received nothing this pass dies
    bank.slots = [s for s in bank.slots if s.slot_id in used_slots]

    confirmed = [s.history for s in bank.slots if s.hit_count >= bank.confirm_k]
    bank.slots = [s for s in bank.slots if s.hit_count < bank.confirm_k]
    return confirmed


def confirm_to_track(history: list[Measurement], target_id: int = -1) -> Track:
    """Promote a confirmed history to a live track.

    The track state starts from scratch (zero estimate, identity
    covariance); the history itself only drove the confirmation decision.
    target_id is ground-truth bookkeeping supplied by the environment.
    """
    if not history:
        raise ValueError("confirmation needs a nonempty measurement history")
    return init_track(target_id)
