import numpy as np
import pytest

from _oracles import matmul_triple_loop, riccati_1d
from cogradar.motion import MotionParams, TargetState
from cogradar.numerics import RngStream
from cogradar.sensing import SnrModel, jacobian
from cogradar.tracking import (
    Track,
    TrackModels,
    ekf_predict,
    ekf_update,
    init_track,
    kf_predict,
    kf_update,
    track_step,
    tracking_cost,
)

SNR_MODEL = SnrModel(snr0=100.0, tau0=1.0, r0=3000.0, sigma_r0_sq=16.0, sigma_th0_sq=1e-6)
MODELS = TrackModels(motion=MotionParams(2.5, 16.0), snr=SNR_MODEL, dwell_floor=1e-4 * 2.5)


def random_spd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def make_track(x, P, tid=0):
    return Track(estimate=np.asarray(x, float), covariance=np.asarray(P, float), cost=tracking_cost(P), target_id=tid)


def test_predict_identity_no_noise():
    tr = make_track([1.0, 2.0, 3.0, 4.0], np.eye(4))
    x, P = ekf_predict(tr, np.eye(4), np.zeros((4, 4)))
    assert np.array_equal(x, tr.estimate)
    assert np.array_equal(P, np.eye(4))


def test_predict_zero_prior_gives_q():
    q = np.diag([1.0, 2.0, 3.0, 4.0])
    tr = make_track(np.zeros(4), np.zeros((4, 4)))
    _, P = ekf_predict(tr, np.eye(4), q)
    assert np.array_equal(P, q)


def test_predict_matches_triple_product_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        P = random_spd(rng, 4)
        F = rng.standard_normal((4, 4))
        Q = random_spd(rng, 4, 0.1)
        x = rng.standard_normal(4)
        xp, Pp = kf_predict(x, P, F, Q)
        expect = matmul_triple_loop(matmul_triple_loop(F, P), F.T) + Q
        expect = (expect + expect.T) / 2
        assert np.allclose(Pp, expect, rtol=1e-10, atol=1e-10)
        assert np.allclose(xp, F @ x, rtol=1e-12)


def test_update_uninformative_measurement():
    rng = np.random.default_rng(1)
    P = random_spd(rng, 4)
    x = rng.standard_normal(4)
    H = jacobian(TargetState(3000.0, 4000.0, 0.0, 0.0))
    res = ekf_update(x, P, np.array([5000.0, 0.9]), H, 1e12 * np.eye(2))
    assert res.used_measurement
    assert np.allclose(res.estimate, x, atol=1e-6)
    assert np.allclose(res.covariance, (P + P.T) / 2, rtol=1e-9)


def test_update_perfect_scalar_measurement():
    res = kf_update([3.0], [[4.0]], [7.5], [[1.0]], [[0.0]])
    assert res.estimate[0] == pytest.approx(7.5)
    assert res.covariance[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_scalar_kalman_matches_riccati_oracle():
    f, q, h, r = 1.0, 0.3, 1.0, 2.0
    oracle = riccati_1d(1.0, f, q, h, r, 50)
    x = np.array([0.0])
    P = np.array([[1.0]])
    rng = np.random.default_rng(2)
    for step in range(50):
        x, P = kf_predict(x, P, [[f]], [[q]])
        res = kf_update(x, P, [rng.standard_normal()], [[h]], [[r]])
        x, P = res.estimate, res.covariance
        assert abs(P[0, 0] - oracle[step]) < 1e-6
    # closed-form steady state of p = (p + q) r / (p + q + r)
    p_inf = (-q + np.sqrt(q * q + 4 * q * r)) / 2
    assert abs(P[0, 0] - p_inf) < 1e-6


def test_joseph_form_equivalence():
    rng = np.random.default_rng(3)
    for _ in range(100):
        P = random_spd(rng, 4)
        R = random_spd(rng, 2)
        x = rng.standard_normal(4)
        st = TargetState(*rng.uniform(2000, 10000, 2), 0.0, 0.0)
        H = jacobian(st)
        z = rng.standard_normal(2)
        res = kf_update(x, P, z, H, R)
        # independent route: gain by numpy solve, Joseph-stabilized covariance
        K = P @ H.T @ np.linalg.inv(H @ P @ H.T + R)
        ikh = np.eye(4) - K @ H
        joseph = ikh @ P @ ikh.T + K @ R @ K.T
        assert np.allclose(res.covariance, joseph, rtol=1e-6, atol=1e-9)


def test_update_monotone_cost_randomized():
    rng = np.random.default_rng(4)
    rs = RngStream(4)
    for _ in range(10000):
        P_pred = random_spd(rng, 4, 10 ** rng.uniform(-2, 2))
        st = TargetState(*rng.uniform(-15000, 15000, 2), 0.0, 0.0)
        if st.range() < 100:
            continue
        H = jacobian(st)
        R = np.diag([10 ** rng.uniform(-1, 3), 10 ** rng.uniform(-8, -4)])
        z = rng.standard_normal(2)
        res = kf_update(np.zeros(4), P_pred, z, H, R)
        assert tracking_cost(res.covariance) <= tracking_cost(P_pred) + 1e-9


def test_update_monotone_in_information():
    rng = np.random.default_rng(5)
    for _ in range(100):
        P = random_spd(rng, 4)
        st = TargetState(*rng.uniform(2000, 10000, 2), 0.0, 0.0)
        H = jacobian(st)
        R = np.diag([16.0, 1e-6])
        z = rng.standard_normal(2)
        c_full = tracking_cost(kf_update(np.zeros(4), P, z, H, R).covariance)
        c_half = tracking_cost(kf_update(np.zeros(4), P, z, H, R / 2).covariance)
        assert c_half <= c_full + 1e-12


def test_update_singular_innovation_falls_back():
    P = np.eye(4)
    H = np.zeros((2, 4))
    res = kf_update(np.ones(4), P, np.zeros(2), H, np.zeros((2, 2)))
    assert not res.used_measurement
    assert np.array_equal(res.estimate, np.ones(4))
    assert np.array_equal(res.covariance, P)


def test_init_track_contract():
    tr = init_track(9)
    assert np.array_equal(tr.estimate, np.zeros(4))
    assert np.array_equal(tr.covariance, np.eye(4))
    assert tr.cost == 2.0
    assert tr.target_id == 9
    other = init_track(10)
    other.covariance[0, 0] = 99.0
    assert tr.covariance[0, 0] == 1.0  # no shared storage


def test_tracking_cost_values():
    assert tracking_cost(np.eye(4)) == 2.0
    assert tracking_cost(np.diag([1.0, 2.0, 3.0, 4.0])) == 3.0
    with pytest.raises(ValueError):
        tracking_cost(np.eye(3))


def test_tracking_cost_matches_projection_oracle():
    rng = np.random.default_rng(6)
    E = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    for _ in range(50):
        P = random_spd(rng, 4)
        assert tracking_cost(P) == pytest.approx(np.trace(E @ P @ E.T), rel=1e-12)


def test_track_step_large_dwell_reduces_cost():
    truth = TargetState(2500.0, 1000.0, 20.0, -10.0, id=0)
    tr = init_track(0)
    rng = RngStream(7)
    for _ in range(10):
        tr = track_step(tr, truth, 2.5, MODELS, rng)
    assert tr.cost < 2.0
    assert tr.dwell_last == 2.5


def test_track_step_starved_dwell_cost_grows():
    truth = TargetState(12000.0, -12000.0, 0.0, 0.0, id=0)
    tr = init_track(0)
    rng = RngStream(8)
    for _ in range(20):
        tr = track_step(tr, truth, 0.0, MODELS, rng)
    # prior-dominated: position noise injects ~156 m^2 per axis per slot
    assert tr.cost > 100.0


def test_track_step_estimate_converges_to_truth():
    truth = TargetState(3000.0, -2000.0, 0.0, 0.0, id=0)
    tr = init_track(0)
    rng = RngStream(9)
    for _ in range(15):
        tr = track_step(tr, truth, 2.5, MODELS, rng)
    err = np.hypot(tr.estimate[0] - truth.x, tr.estimate[1] - truth.y)
    assert err < 200.0


def test_track_step_cold_start_anchors_to_measurement():
    # first update from the zero init must not catapult the velocity
    truth = TargetState(2500.0, 1000.0, 20.0, -10.0, id=0)
    tr = track_step(init_track(0), truth, 2.5, MODELS, RngStream(12))
    assert np.hypot(tr.estimate[0] - truth.x, tr.estimate[1] - truth.y) < 50.0
    assert np.hypot(tr.estimate[2], tr.estimate[3]) < 900.0  # within the reset prior


def test_track_step_consistent_filter_stays_consistent():
    from cogradar.motion import step_target

    truth = TargetState(4000.0, 3000.0, -30.0, 15.0, id=0)
    tr = init_track(0)
    rng, mrng = RngStream(13), RngStream(14)
    for _ in range(200):
        truth = step_target(truth, MODELS.motion, mrng)
        tr = track_step(tr, truth, 2.0, MODELS, rng)
        if truth.range() > 20000:
            break
    # near the 20 km region edge the cross-range sigma alone is ~60 m
    err = np.hypot(tr.estimate[0] - truth.x, tr.estimate[1] - truth.y)
    assert err < 300.0


def test_track_step_rejects_negative_dwell():
    with pytest.raises(ValueError):
        track_step(init_track(0), TargetState(3000.0, 0.0, 0.0, 0.0), -0.1, MODELS, RngStream(0))


def test_track_step_deterministic():
    truth = TargetState(5000.0, 5000.0, 50.0, 0.0, id=1)
    runs = []
    for _ in range(2):
        tr = init_track(1)
        rng = RngStream(10)
        states = []
        for _ in range(30):
            tr = track_step(tr, truth, 1.0, MODELS, rng)
            states.append(tr.estimate.copy())
        runs.append(np.array(states))
    assert np.array_equal(runs[0], runs[1])
