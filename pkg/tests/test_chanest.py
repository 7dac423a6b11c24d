import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfasync.chanest import (
    NumericalError,
    assign_pilots,
    build_stats,
    mmse_estimate,
    mmse_estimates,
    nmse,
    psi,
    q_matrix,
    qbar_matrix,
    received_pilot,
    sample_channels,
    sqrtm_psd,
)
from cfasync.phase import DelayPhases, PhaseParams, PhasePath

ZERO = PhaseParams(0.0, 0.0)


def random_psd(rng, N, scale=1.0):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    R = A @ A.conj().T
    return scale * N * R / np.trace(R).real


def test_round_robin_k4_tau2():
    plan = assign_pilots(4, 2)
    assert plan.t.tolist() == [1, 2, 1, 2]
    assert plan.members(0) == [0, 2]
    assert plan.lam == 3


def test_orthogonal_regime():
    plan = assign_pilots(5, 5)
    assert np.array_equal(plan.copilot, np.eye(5, dtype=bool))


def test_default_network_pairs():
    plan = assign_pilots(20, 10)
    assert np.all(plan.copilot.sum(axis=1) == 2)
    assert np.all(np.diag(plan.copilot))


def test_pilot_plan_rejects_bad_instants():
    from cfasync.chanest import PilotPlan

    with pytest.raises(ValueError):
        PilotPlan(2, np.array([1, 3]))
    with pytest.raises(ValueError):
        assign_pilots(3, 0)


def _static_phases(L, K, tau_c=3):
    return PhasePath(phi_ue=np.zeros((K, tau_c + 1)), phi_ap=np.zeros((L, tau_c + 1)))


def test_received_pilot_single_clean():
    plan = assign_pilots(1, 1)
    h = np.array([[[1 + 1j, 2.0]]])
    z = received_pilot(plan, h, _static_phases(1, 1), DelayPhases.synchronous(1, 1), 4.0, 1.0, None)
    assert np.allclose(z[0, 0], 2.0 * h[0, 0])


def test_received_pilot_two_copilot_linear():
    plan = assign_pilots(2, 1)
    rng = np.random.default_rng(0)
    h = rng.standard_normal((1, 2, 2)) + 1j * rng.standard_normal((1, 2, 2))
    ph = PhasePath(phi_ue=np.array([[0.0, 0.3, 0.5], [0.0, -1.1, 0.2]]), phi_ap=np.array([[0.0, 0.4, 0.9]]))
    th = np.exp(1j * np.array([[0.7, -2.0]]))
    z = received_pilot(plan, h, ph, DelayPhases(th), [1.0, 9.0], 1.0, None)
    v = np.exp(1j * (0.4 + np.array([0.3, -1.1])))
    expect = 1.0 * th[0, 0] * v[0] * h[0, 0] + 3.0 * th[0, 1] * v[1] * h[0, 1]
    assert np.allclose(z[0, 0], expect)


def test_received_pilot_uses_each_ues_own_slot():
    plan = assign_pilots(2, 2)
    h = np.ones((1, 2, 1), dtype=complex)
    ph = PhasePath(phi_ue=np.array([[0.0, 0.1, 0.2, 0.3], [0.0, 1.0, 2.0, 3.0]]), phi_ap=np.zeros((1, 4)))
    z = received_pilot(plan, h, ph, DelayPhases.synchronous(1, 2), 1.0, 1.0, None)
    assert np.allclose(z[0, :, 0], [np.exp(0.1j), np.exp(2.0j)])


def test_received_pilot_covariance():
    rng = np.random.default_rng(1)
    N, p, s2 = 2, [0.5, 1.5], 0.3
    R = np.stack([random_psd(rng, N), random_psd(rng, N, 2.0)])[None]
    plan = assign_pilots(2, 1)
    Rs = sqrtm_psd(R)
    ph = PhaseParams(0.05, 0.05)
    from cfasync.phase import sample_phase_paths

    T = 100000
    zs = np.empty((T, N), dtype=complex)
    d = DelayPhases.uniform_random(1, 2, rng)
    for t in range(T):
        h = sample_channels(Rs, rng)
        zs[t] = received_pilot(plan, h, sample_phase_paths(ph, 2, rng, 2, 1), d, p, s2, rng)[0, 0]
    C = zs.T @ zs.conj() / T
    target = p[0] * R[0, 0] + p[1] * R[0, 1] + s2 * np.eye(N)
    assert np.linalg.norm(C - target) / np.linalg.norm(target) < 0.02


def test_psi_scalar():
    R = np.full((1, 1, 1, 1), 3.0, dtype=complex)
    P = psi(assign_pilots(1, 1), R, 2.0, 0.5)
    assert math.isclose(P[0, 0, 0, 0].real, 1 / (6.5))


def test_psi_inverse_identity():
    rng = np.random.default_rng(2)
    R = np.stack([np.stack([random_psd(rng, 3) for _ in range(3)]) for _ in range(2)])
    plan = assign_pilots(3, 2)
    P = psi(plan, R, 1.0, 0.1)
    for l in range(2):
        for k in range(3):
            cov = sum(R[l, i] for i in plan.members(k)) + 0.1 * np.eye(3)
            assert np.allclose(P[l, k] @ cov, np.eye(3), atol=1e-10)


def test_psi_two_copilot_identity():
    R = np.stack([2.0 * np.eye(2), 5.0 * np.eye(2)]).astype(complex)[None]
    P = psi(assign_pilots(2, 1), R, [1.0, 3.0], 0.5)
    assert np.allclose(P[0, 0], np.eye(2) / (2 + 15 + 0.5))


def test_psi_singular_raises_with_location():
    R = np.zeros((1, 1, 2, 2), dtype=complex)
    R[0, 0] = np.diag([1e20, 0.0])
    with pytest.raises(NumericalError, match=r"k=0, l=0"):
        psi(assign_pilots(1, 1), R, 1.0, 1e-3)
    with pytest.raises(ValueError):
        psi(assign_pilots(1, 1), R, 1.0, 0.0)


def test_q_scalar_and_nmse_30db():
    R = np.full((1, 1, 1, 1), 1.0, dtype=complex)
    st_ = build_stats(R, assign_pilots(1, 1), 1000.0, 1.0, ZERO)
    assert math.isclose(st_.Q[0, 0, 0, 0].real, 1000 / 1001)
    assert math.isclose(float(nmse(R, st_.Q)[0, 0]), 1 - 1000 / 1001, rel_tol=1e-9)
    assert math.isclose(float(nmse(R, st_.Q)[0, 0]), 9.99e-4, rel_tol=1e-3)


def test_q_vanishes_with_huge_phase_noise():
    R = np.full((1, 2, 1, 1), 1.0, dtype=complex)
    st_ = build_stats(R, assign_pilots(2, 2), 1.0, 1.0, PhaseParams(500.0, 500.0))
    assert np.all(np.abs(st_.Q[0, 0]) < 1e-300)
    assert np.all(np.abs(st_.Q) < 1e-100)


def test_q_dominated_by_r_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(100):
        N = rng.integers(1, 5)
        R = np.stack([random_psd(rng, N, rng.uniform(0.1, 3)) for _ in range(3)])[None]
        st_ = build_stats(R, assign_pilots(3, 2), rng.uniform(0.1, 5, 3), rng.uniform(0.01, 1), PhaseParams(*rng.uniform(0, 0.1, 2)))
        for k in range(3):
            D = R[0, k] - st_.Q[0, k]
            assert np.linalg.eigvalsh(0.5 * (D + D.conj().T)).min() >= -1e-10 * np.trace(R[0, k]).real
            assert np.allclose(q_matrix(k, 0, st_, R), st_.Q[0, k])


def test_qbar_self_equals_q_exactly():
    rng = np.random.default_rng(4)
    R = np.stack([random_psd(rng, 2) for _ in range(4)])[None]
    st_ = build_stats(R, assign_pilots(4, 2), [1, 2, 3, 4], 0.2, PhaseParams(0.01, 0.02))
    for k in range(4):
        assert np.array_equal(qbar_matrix(k, k, 0, st_, R), st_.Q[0, k])
        assert st_.tr_qbar[0, k, k] == np.trace(st_.Q[0, k]).real
    with pytest.raises(ValueError):
        qbar_matrix(0, 1, 0, st_, R)


def test_qbar_zero_pilot_power():
    rng = np.random.default_rng(5)
    R = np.stack([random_psd(rng, 2) for _ in range(2)])[None]
    st_ = build_stats(R, assign_pilots(2, 1), [1.0, 0.0], 0.2, ZERO)
    assert np.array_equal(qbar_matrix(0, 1, 0, st_, R), np.zeros((2, 2)))
    assert st_.tr_qbar[0, 0, 1] == 0


def test_nmse_limits_and_errors():
    R = np.eye(2, dtype=complex)
    assert nmse(R, R) == 0.0
    assert nmse(R, np.zeros((2, 2))) == 1.0
    with pytest.raises(ValueError):
        nmse(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        nmse(R, 2 * R)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(1e-3, 10.0), st.integers(1, 4))
def test_nmse_bounded_and_monotone(s_lo, extra, snr, tau_p):
    R = np.stack([np.eye(2) * b for b in (1.0, 0.3, 2.0, 0.7)]).astype(complex)[None]
    plan = assign_pilots(4, tau_p)
    a = nmse(R, build_stats(R, plan, snr, 1.0, PhaseParams(s_lo, s_lo)).Q)
    b = nmse(R, build_stats(R, plan, snr, 1.0, PhaseParams(s_lo + extra, s_lo)).Q)
    assert np.all((a >= 0) & (a <= 1))
    assert np.all(b >= a - 1e-12)


def test_zero_observation_gives_zero_estimate():
    R = np.eye(2, dtype=complex)[None, None]
    st_ = build_stats(R, assign_pilots(1, 1), 1.0, 1.0, ZERO)
    assert np.array_equal(mmse_estimate(np.zeros((1, 2)), st_, 0, 0, 1.0, R), np.zeros(2))


def test_mmse_estimate_scalar_noiseless():
    R = np.full((1, 1, 1, 1), 2.0, dtype=complex)
    st_ = build_stats(R, assign_pilots(1, 1), 4.0, 1.0, ZERO)
    z = np.array([[2.0 * 0.5]])  # sqrt(p) h with h = 0.5
    est = mmse_estimate(z, st_, 0, 0, 1.0, R)
    assert math.isclose(est[0].real, 2.0 * 2.0 / (8.0 + 1.0) * 1.0)


def test_batched_estimates_match_single():
    rng = np.random.default_rng(9)
    L, K, N = 3, 4, 2
    R = np.stack([np.stack([random_psd(rng, N) for _ in range(K)]) for _ in range(L)])
    plan = assign_pilots(K, 2)
    st_ = build_stats(R, plan, 1.0, 0.1, PhaseParams(0.01, 0.01))
    d = DelayPhases.uniform_random(L, K, rng)
    z = rng.standard_normal((L, 2, N)) + 1j * rng.standard_normal((L, 2, N))
    allh = mmse_estimates(z, st_, d, R)
    for l in range(L):
        for k in range(K):
            assert np.allclose(allh[l, k], mmse_estimate(z[l], st_, k, l, d.theta[l, k], R))
