import itertools
import math

import numpy as np
import pytest

from cogradar.sensing import Measurement
from cogradar.trackinit import InitBank, InitSlot, associate, confirm_to_track, process_scan

GATE = 500.0


def meas(x, y):
    # axis-aligned constructions keep gate-boundary distances exact
    return Measurement(range=math.hypot(x, y), azimuth=math.atan2(y, x))


def make_bank(slot_positions, hits=None, capacity=5, k=3):
    bank = InitBank(capacity=capacity, threshold=GATE, confirm_k=k)
    for i, pos in enumerate(slot_positions):
        n = 1 if hits is None else hits[i]
        bank.slots.append(InitSlot(slot_id=i, history=[meas(*pos)] * n, last_update_slot=0))
    bank.next_slot_id = len(slot_positions)
    return bank


def cart(m):
    return tuple(m.cartesian())


# --- independent rule model -------------------------------------------------

def oracle_assignment(slot_states, meas_positions, gate):
    """Brute-force greedy-policy assignment for tiny scenarios.

    Enumerates every one-to-one gate-respecting assignment, keeps the
    maximal ones, and picks the one whose sorted (distance, slot_id,
    meas_index) key sequence is lexicographically smallest; that is the
    documented nearest-first policy stated declaratively.
    """
    pairs = {}
    for mi, mp in enumerate(meas_positions):
        for sid, sp, _ in slot_states:
            d = math.dist(mp, sp)
            if d < gate:
                pairs[(sid, mi)] = d
    candidates = []
    keys = list(pairs)
    for r in range(len(keys) + 1):
        for combo in itertools.combinations(keys, r):
            sids = [s for s, _ in combo]
            mis = [m for _, m in combo]
            if len(set(sids)) != len(sids) or len(set(mis)) != len(mis):
                continue
            maximal = all(
                (sid in sids or mi in mis) for sid, mi in keys if (sid, mi) not in combo
            )
            if maximal:
                candidates.append(sorted((pairs[(s, m)], s, m) for s, m in combo))
    best = min(candidates)
    return {(s, m): d for d, s, m in best}


def oracle_outcome(slot_states, meas_positions, gate, capacity, n_tracked, k):
    """Apply the bank rules declaratively: assign, open, clear, confirm."""
    assign = oracle_assignment(slot_states, meas_positions, gate)
    assigned_slots = {s for s, _ in assign}
    assigned_meas = {m for _, m in assign}
    surviving = {}
    for sid, _, hits in slot_states:
        if sid in assigned_slots:
            surviving[sid] = hits + 1
    n_slots = len(slot_states)  # cleared slots still occupy space during opening
    new_slots = []
    for mi in range(len(meas_positions)):
        if mi in assigned_meas:
            continue
        if n_slots + n_tracked >= capacity:
            break
        new_slots.append(mi)
        n_slots += 1
    confirmed = sorted(sid for sid, hits in surviving.items() if hits >= k)
    kept = {sid: hits for sid, hits in surviving.items() if hits < k}
    return assign, new_slots, kept, confirmed


def run_scenario(slot_states, meas_positions, capacity=5, n_tracked=0, k=3):
    bank = InitBank(capacity=capacity, threshold=GATE, confirm_k=k)
    for sid, pos, hits in slot_states:
        bank.slots.append(InitSlot(slot_id=sid, history=[meas(*pos)] * hits, last_update_slot=0))
    bank.next_slot_id = max([s[0] for s in slot_states], default=-1) + 1
    ms = [meas(*p) for p in meas_positions]
    confirmed = process_scan(bank, ms, slot_index=1, n_tracked=n_tracked)
    return bank, confirmed, ms


def test_exhaustive_two_by_two_against_oracle():
    # axis-aligned geometry grid, two slots and two measurements
    slot_xs = [(0.0, 600.0), (0.0, 1200.0), (300.0, 900.0)]
    offsets = [-600.0, -499.0, -250.0, 0.0, 250.0, 499.0, 500.0, 750.0]
    hit_cases = [(1, 1), (2, 1), (2, 2)]
    checked = 0
    for (s0x, s1x), hits in itertools.product(slot_xs, hit_cases):
        slot_states = [(0, (s0x, 0.0), hits[0]), (1, (s1x, 0.0), hits[1])]
        for m0 in offsets:
            for m1 in offsets:
                mpos = [(s0x + m0, 0.0), (s1x + m1, 0.0)]
                if any(math.hypot(*p) < 1e-9 for p in mpos):
                    continue  # the origin has no bearing
                bank, confirmed, ms = run_scenario(slot_states, mpos)
                assign, new_slots, kept, conf_ids = oracle_outcome(
                    slot_states, mpos, GATE, 5, 0, 3
                )
                # surviving tentative slots and their hit counts
                got = {s.slot_id: s.hit_count for s in bank.slots if s.slot_id < 2}
                assert got == kept, (slot_states, mpos)
                # association targets: slot's newest measurement matches
                for s in bank.slots:
                    if s.slot_id < 2 and (s.slot_id in {sid for sid, _ in assign}):
                        mi = next(m for sid, m in assign if sid == s.slot_id)
                        assert cart(s.history[-1]) == pytest.approx(cart(ms[mi]))
                # new slots carry exactly the unassigned measurements, in order
                fresh = [s for s in bank.slots if s.slot_id >= 2]
                assert [cart(s.history[0]) for s in fresh] == [
                    pytest.approx(cart(ms[mi])) for mi in new_slots
                ]
                # confirmations: histories whose pre-scan slot reached K
                assert len(confirmed) == len(conf_ids)
                checked += 1
    assert checked > 500


def test_associate_empty_bank():
    bank = InitBank(capacity=5, threshold=GATE, confirm_k=3)
    assert associate(bank, meas(1000.0, 0.0)) is None


def test_associate_inside_gate():
    bank = make_bank([(1000.0, 0.0)])
    assert associate(bank, meas(1000.0 + GATE / 2, 0.0)) == 0


def test_associate_boundary_is_exclusive():
    bank = make_bank([(1000.0, 0.0)])
    assert associate(bank, meas(1000.0 + GATE, 0.0)) is None
    assert associate(bank, meas(1000.0 + GATE - 1e-6, 0.0)) == 0


def test_associate_tie_breaks_low_slot_id():
    bank = make_bank([(1000.0, 0.0), (1400.0, 0.0)])
    assert associate(bank, meas(1200.0, 0.0)) == 0


def test_confirmation_after_k_hits():
    bank = make_bank([(3000.0, 0.0)], hits=[2])
    confirmed = process_scan(bank, [meas(3010.0, 0.0)], slot_index=1)
    assert len(confirmed) == 1
    assert len(confirmed[0]) == 3
    assert bank.slots == []


def test_untouched_slot_cleared():
    bank = make_bank([(3000.0, 0.0)], hits=[2])
    confirmed = process_scan(bank, [], slot_index=1)
    assert confirmed == []
    assert bank.slots == []


def test_nearest_wins_other_opens_new_slot():
    bank = make_bank([(3000.0, 0.0)])
    ms = [meas(3100.0, 0.0), meas(3050.0, 0.0)]  # second is nearer
    process_scan(bank, ms, slot_index=1)
    assert len(bank.slots) == 2
    winner = next(s for s in bank.slots if s.slot_id == 0)
    assert cart(winner.history[-1]) == pytest.approx(cart(ms[1]))
    fresh = next(s for s in bank.slots if s.slot_id == 1)
    assert cart(fresh.history[0]) == pytest.approx(cart(ms[0]))


def test_capacity_shared_with_confirmed_tracks():
    bank = InitBank(capacity=5, threshold=GATE, confirm_k=3)
    ms = [meas(2000.0 + 1200.0 * i, 0.0) for i in range(4)]
    process_scan(bank, ms, slot_index=0, n_tracked=3)
    assert len(bank.slots) == 2  # 3 tracked + 2 tentative hit the budget


def test_consecutive_detections_confirm_in_k_slots():
    bank = InitBank(capacity=5, threshold=GATE, confirm_k=3)
    confirmed = []
    for t in range(3):
        confirmed = process_scan(bank, [meas(5000.0 + 10 * t, 0.0)], slot_index=t)
    assert len(confirmed) == 1
    assert bank.slots == []


def test_miss_in_the_middle_resets_progress():
    bank = InitBank(capacity=5, threshold=GATE, confirm_k=3)
    process_scan(bank, [meas(5000.0, 0.0)], slot_index=0)
    process_scan(bank, [meas(5010.0, 0.0)], slot_index=1)
    process_scan(bank, [], slot_index=2)  # cleared here
    assert bank.slots == []
    for t in range(3, 6):
        confirmed = process_scan(bank, [meas(5000.0, 0.0)], slot_index=t)
    assert len(confirmed) == 1  # needs three fresh consecutive hits


def test_no_detections_keeps_bank_empty():
    bank = InitBank(capacity=5, threshold=GATE, confirm_k=3)
    for t in range(50):
        assert process_scan(bank, [], slot_index=t) == []
    assert bank.slots == []


def test_stored_hit_counts_stay_below_k():
    rng = np.random.default_rng(0)
    bank = InitBank(capacity=5, threshold=GATE, confirm_k=3)
    for t in range(200):
        ms = [meas(float(rng.uniform(1000, 15000)), 0.0) for _ in range(rng.integers(0, 4))]
        process_scan(bank, ms, slot_index=t)
        for s in bank.slots:
            assert s.hit_count <= 2
            assert s.hit_count == len(s.history)


def test_confirm_to_track_contract():
    history = [meas(4000.0, 0.0)] * 3
    tr = confirm_to_track(history, target_id=7)
    assert np.array_equal(tr.estimate, np.zeros(4))
    assert np.array_equal(tr.covariance, np.eye(4))
    assert tr.target_id == 7
    with pytest.raises(ValueError):
        confirm_to_track([])
