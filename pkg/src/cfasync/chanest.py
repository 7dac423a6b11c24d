"""Pilot assignment, phase-impaired pilot reception and MMSE channel estimation.

All second-order statistics consumed by the closed-form SE expressions live in
:class:`EstimationStats`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phase import DelayPhases, PhaseParams, PhasePath
from .rng import complex_normal


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class PilotPlan:
    tau_p: int
    t: np.ndarray  # (K,) pilot instants, 1-based

    def __post_init__(self):
        if self.tau_p < 1:
            raise ValueError("tau_p must be >= 1")
        if np.any(self.t < 1) or np.any(self.t > self.tau_p):
            raise ValueError("pilot instants must lie in 1..tau_p")

    @property
    def K(self) -> int:
        return len(self.t)

    @property
    def lam(self) -> int:
        return self.tau_p + 1

    @property
    def copilot(self) -> np.ndarray:
        """(K, K) boolean mask, ``copilot[k, i]`` iff UE i shares the pilot of UE k."""
        return self.t[:, None] == self.t[None, :]

    def members(self, k: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.t == self.t[k])]


def assign_pilots(K: int, tau_p: int) -> PilotPlan:
    """Round-robin pilot instants."""
    if tau_p < 1:
        raise ValueError("tau_p must be >= 1")
    return PilotPlan(tau_p=tau_p, t=np.arange(K) % tau_p + 1)


@dataclass(frozen=True, eq=False)
class EstimationStats:
    Psi: np.ndarray  # (L, K, N, N)
    Q: np.ndarray  # (L, K, N, N)
    tr_qbar: np.ndarray  # (L, K, K) complex, [l, k, i] = tr(Qbar_kil), zero off the co-pilot set
    decay: np.ndarray  # (K,) exp(-(lam - t_k)(s2_ap + s2_ue))
    lam: int
    pilot_powers: np.ndarray  # (K,)
    plan: PilotPlan
    sigma2: float  # pilot-phase receiver noise (W)

    @property
    def L(self) -> int:
        return self.Q.shape[0]

    @property
    def K(self) -> int:
        return self.Q.shape[1]

    @property
    def N(self) -> int:
        return self.Q.shape[-1]


def hermitian(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2).conj())


def psi(plan: PilotPlan, R: np.ndarray, p, sigma2: float) -> np.ndarray:
    """Inverse pilot-signal covariance per (l, k)."""
    if sigma2 <= 0:
        raise ValueError("noise variance must be > 0")
    L, K, N, _ = R.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    # C[l, k] = sum_{i in P_k} p_i R_il + sigma2 I
    cov = np.einsum("ki,i,liab->lkab", plan.copilot.astype(float), p, R) + sigma2 * np.eye(N)
    cond = np.linalg.cond(cov)
    bad = np.argwhere(cond > 1e14)
    if bad.size:
        l, k = bad[0]
        raise NumericalError(f"pilot covariance of (k={k}, l={l}) is numerically singular (cond={cond[l, k]:.3g})")
    return hermitian(np.linalg.inv(cov))


def decay_factors(plan: PilotPlan, phase: PhaseParams) -> np.ndarray:
    return np.exp(-(plan.lam - plan.t) * phase.total)


def build_stats(R: np.ndarray, plan: PilotPlan, p, sigma2: float, phase: PhaseParams) -> EstimationStats:
    L, K, N, _ = R.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,)).copy()
    Psi = psi(plan, R, p, sigma2)
    dec = decay_factors(plan, phase)
    RPsi = R @ Psi
    Q = hermitian((p * dec)[None, :, None, None] * (RPsi @ R))
    # tr(R_il Psi_kl R_kl) = sum_ab R_il[a, b] (Psi_kl R_kl)[b, a]
    PsiR = Psi @ R
    tr_raw = np.einsum("liab,lkba->lki", R, PsiR)
    scale = np.sqrt(np.outer(p, p)) * dec[:, None] * plan.copilot
    tr_qbar = tr_raw * scale[None, :, :]
    # i == k entries are the traces of Q itself
    kk = np.arange(K)
    tr_qbar[:, kk, kk] = np.trace(Q, axis1=-2, axis2=-1).real
    return EstimationStats(Psi=Psi, Q=Q, tr_qbar=tr_qbar, decay=dec, lam=plan.lam, pilot_powers=p, plan=plan, sigma2=sigma2)


def q_matrix(k: int, l: int, stats: EstimationStats, R: np.ndarray) -> np.ndarray:
    p = stats.pilot_powers[k]
    return hermitian(p * stats.decay[k] * R[l, k] @ stats.Psi[l, k] @ R[l, k])


def qbar_matrix(k: int, i: int, l: int, stats: EstimationStats, R: np.ndarray) -> np.ndarray:
    if not stats.plan.copilot[k, i]:
        raise ValueError(f"UE {i} does not share the pilot of UE {k}")
    if i == k:
        return stats.Q[l, k]
    p = stats.pilot_powers
    return np.sqrt(p[k] * p[i]) * stats.decay[k] * R[l, i] @ stats.Psi[l, k] @ R[l, k]


def nmse(R: np.ndarray, Q: np.ndarray):
    """trace(R - Q) / trace(R); works on single matrices or stacks."""
    trR = np.trace(R, axis1=-2, axis2=-1).real
    if np.any(trR <= 0):
        raise ValueError("trace(R) must be > 0")
    val = (trR - np.trace(Q, axis1=-2, axis2=-1).real) / trR
    if np.any(val < -1e-10) or np.any(val > 1 + 1e-10):
        raise ValueError("NMSE outside [0, 1]; Q is not dominated by R")
    return np.clip(val, 0.0, 1.0)


def sqrtm_psd(R: np.ndarray) -> np.ndarray:
    """Hermitian square root for a stack of PSD matrices."""
    vals, vecs = np.linalg.eigh(hermitian(R))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))[..., None, :]) @ np.swapaxes(vecs, -1, -2).conj()


def sample_channels(R_sqrt: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """h_kl ~ CN(0, R_kl), shape (L, K, N)."""
    L, K, N, _ = R_sqrt.shape
    e = complex_normal(rng, (L, K, N))
    return np.einsum("lkab,lkb->lka", R_sqrt, e)


def received_pilot(
    plan: PilotPlan,
    h: np.ndarray,
    phases: PhasePath,
    delays: DelayPhases,
    p,
    sigma2: float,
    noise_rng: np.random.Generator | None,
) -> np.ndarray:
    """Pilot observations z_l[t], shape (L, tau_p, N); slot ``t`` is stored at index ``t - 1``.

    ``noise_rng=None`` gives the noiseless observation.
    """
    L, K, N = h.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    kk = np.arange(K)
    # oscillator factor of link (l, k) at that UE's own pilot instant t_k
    vt = np.exp(1j * (phases.phi_ap[:, plan.t] + phases.phi_ue[kk, plan.t][None, :]))
    g = (delays.theta * vt)[:, :, None] * h
    z = np.zeros((L, plan.tau_p, N), dtype=complex)
    for k in range(K):
        z[:, plan.t[k] - 1] += np.sqrt(p[k]) * g[:, k]
    if noise_rng is not None:
        z += complex_normal(noise_rng, (L, plan.tau_p, N), sigma2)
    return z


def estimator_matrices(stats: EstimationStats, R: np.ndarray) -> np.ndarray:
    """sqrt(p_k) * exp(-(lam - t_k)(s2_ap + s2_ue)/2) * R_kl Psi_kl, shape (L, K, N, N)."""
    c = np.sqrt(stats.pilot_powers * stats.decay)
    return c[None, :, None, None] * (R @ stats.Psi)


def mmse_estimate(z_l: np.ndarray, stats: EstimationStats, k: int, l: int, theta_kl: complex, R: np.ndarray) -> np.ndarray:
    """Estimate of h_kl[lambda] from AP l's pilot observation ``z_l`` (tau_p, N) or z_l[t_k] (N,)."""
    z = np.asarray(z_l)
    if z.ndim == 2:
        z = z[stats.plan.t[k] - 1]
    c = np.sqrt(stats.pilot_powers[k] * stats.decay[k])
    return c * np.conj(theta_kl) * (R[l, k] @ (stats.Psi[l, k] @ z))


def mmse_estimates(z: np.ndarray, stats: EstimationStats, delays: DelayPhases, R: np.ndarray, W: np.ndarray | None = None) -> np.ndarray:
    """All estimates at once, shape (L, K, N)."""
    if W is None:
        W = estimator_matrices(stats, R)
    zk = z[:, stats.plan.t - 1, :]  # (L, K, N)
    return np.conj(delays.theta)[:, :, None] * np.einsum("lkab,lkb->lka", W, zk)
