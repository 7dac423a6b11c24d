"""Closed-form downlink SINR and SE with MR precoding under asynchronous reception.

Three evaluations are provided: coherent transmission with delay-used MR
(``coherent``/``du``), coherent with delay-forgotten MR (``coherent``/``df``)
and non-coherent transmission (``noncoherent``, identical for both precoders).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import kernels
from .chanest import EstimationStats, NumericalError
from .phase import DelayPhases, PhaseParams, eta

TRANSMISSIONS = ("coherent", "noncoherent")
PRECODERS = ("du", "df")


class DegenerateAPError(ValueError):
    pass


def mu_normalization(stats: EstimationStats, strict: bool = True) -> np.ndarray:
    """Per-AP power normalization 1 / sum_i tr(Q_il).

    APs whose estimates are all zero cannot be normalized; with ``strict`` they
    raise, otherwise they get ``mu = 0`` and drop out of every sum.
    """
    tot = np.trace(stats.Q, axis1=-2, axis2=-1).real.sum(axis=1)
    dead = tot <= 0
    if strict and np.any(dead):
        raise DegenerateAPError(f"APs {np.flatnonzero(dead).tolist()} have all-zero estimate statistics")
    mu = np.zeros_like(tot)
    mu[~dead] = 1.0 / tot[~dead]
    return mu


@dataclass(frozen=True, eq=False)
class ClosedFormTerms:
    """Trace quantities shared by all three SINR expressions."""

    trQ: np.ndarray  # (L, K)
    QR: np.ndarray  # (L, K, K), [l, i, k] = tr(Q_il R_kl)
    tr_qbar: np.ndarray  # (L, K, K), [l, k, i]
    mu: np.ndarray  # (L,)


@dataclass(frozen=True, eq=False)
class SEScenario:
    stats: EstimationStats
    R: np.ndarray
    delays: DelayPhases
    phase: PhaseParams
    p_d: float
    sigma2_d: float
    tau_c: int

    def __post_init__(self):
        if not self.p_d > 0:
            raise ValueError("p_d must be > 0")
        if not self.sigma2_d > 0:
            raise ValueError("sigma2_d must be > 0")
        if self.lam > self.tau_c:
            raise ValueError(f"lambda={self.lam} exceeds tau_c={self.tau_c}")

    @property
    def lam(self) -> int:
        return self.stats.lam

    @property
    def L(self) -> int:
        return self.stats.L

    @property
    def K(self) -> int:
        return self.stats.K

    @property
    def instants(self) -> np.ndarray:
        return np.arange(self.lam, self.tau_c + 1)

    @cached_property
    def terms(self) -> ClosedFormTerms:
        trQ = np.trace(self.stats.Q, axis1=-2, axis2=-1).real
        return ClosedFormTerms(
            trQ=trQ,
            QR=kernels.pair_traces(self.stats.Q, self.R),
            tr_qbar=self.stats.tr_qbar,
            mu=mu_normalization(self.stats, strict=False),
        )

    def with_delays(self, delays: DelayPhases) -> "SEScenario":
        new = replace(self, delays=delays)
        # delay phases do not enter the trace terms
        new.__dict__["terms"] = self.terms
        return new

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.stats.Q, self.stats.tr_qbar, self.R, self.delays.theta):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr((self.phase.sigma2_ap, self.phase.sigma2_ue, self.p_d, self.sigma2_d, self.tau_c, self.lam)).encode())
        return h.hexdigest()[:16]


def _relative_weights(theta: np.ndarray) -> np.ndarray:
    """Conjugate delay phases referenced to AP 0 of each UE column.

    A common unit-modulus factor does not change |sum_l theta*_il x_l|, and the
    reference makes the weights exactly 1 when all phases are 1 or L == 1.
    """
    ang = np.angle(theta)
    return np.exp(-1j * (ang - ang[:1, :]))


def _check_instants(scenario: SEScenario, instants) -> np.ndarray:
    n = scenario.instants if instants is None else np.atleast_1d(np.asarray(instants, dtype=int))
    if np.any(n < scenario.lam) or np.any(n > scenario.tau_c):
        raise ValueError(f"instants must lie in [{scenario.lam}, {scenario.tau_c}]")
    return n


def sinr_matrix(
    scenario: SEScenario,
    transmission: str = "coherent",
    precoder: str = "du",
    instants=None,
    drift_corrected: bool = False,
) -> np.ndarray:
    """SINR of every UE at every requested instant, shape (K, len(instants)).

    Parameters
    ----------
    drift_corrected
        The default expressions treat the estimate as a Gaussian vector
        independent of its error. With ``True`` the fourth-order terms keep the
        oscillator drift between each pilot slot and ``lambda``: the
        estimate-power term is scaled by ``exp((lambda - t_k)(s2_ap + s2_ue))``
        and the cross-AP co-pilot term by ``exp((lambda - t_k) s2_ue)``. Both
        factors are 1 without phase noise.
    """
    if transmission not in TRANSMISSIONS:
        raise ValueError(f"unknown transmission {transmission!r}")
    if precoder not in PRECODERS:
        raise ValueError(f"unknown precoder {precoder!r}")
    n = _check_instants(scenario, instants)
    t = scenario.terms
    p_d, s2 = scenario.p_d, scenario.sigma2_d
    sq = np.sqrt(t.mu)

    x = sq[:, None] * t.trQ  # (L, K)
    y = sq[:, None, None] * t.tr_qbar  # (L, K, I)
    S1 = np.einsum("l,lik->k", t.mu, t.QR)
    S2 = (y.real * y.real + y.imag * y.imag).sum(axis=0).sum(axis=1)
    f_all = np.ones(scenario.K)
    f_ue = np.ones(scenario.K)
    if drift_corrected:
        g = scenario.lam - scenario.stats.plan.t
        f_all = np.exp(g * scenario.phase.total)
        f_ue = np.exp(g * scenario.phase.sigma2_ue)

    gap = n - scenario.lam
    e_ap = eta(gap, scenario.phase.sigma2_ap)[None, :]
    e_ue = eta(gap, scenario.phase.sigma2_ue)[None, :]

    base = p_d * S1 + p_d * (f_all * S2)
    if transmission == "noncoherent":
        desired = (x * x).sum(axis=0)
        num = e_ap * e_ue * p_d * desired[:, None]
        den = base[:, None] - num + s2
    else:
        if precoder == "du":
            w = np.ones(t.trQ.shape, dtype=complex)
        else:
            w = _relative_weights(scenario.delays.theta)
        a = (w * x).sum(axis=0)
        A2 = a.real * a.real + a.imag * a.imag
        b = (w[:, None, :] * y).sum(axis=0)  # (K, I)
        S3 = (b.real * b.real + b.imag * b.imag).sum(axis=1)
        num = e_ap * e_ue * p_d * A2[:, None]
        den = (base[:, None] + e_ap * (f_ue * p_d * (S3 - S2))[:, None]) - num + s2

    xi = den - s2
    lead = np.maximum(base, np.finfo(float).tiny)[:, None]
    if np.any(xi < -1e-9 * lead):
        raise NumericalError("interference term became negative beyond round-off")
    return num / den


def coherent_interference(scenario: SEScenario, precoder: str = "du", instants=None) -> np.ndarray:
    """Per-interferer terms E|sum_l g_kl^H sqrt(mu_l) v_il|^2, shape (K, I, len(instants)).

    Summing over ``i`` gives the coherent denominator before the desired-signal
    subtraction and the noise, divided by ``p_d``.
    """
    if precoder not in PRECODERS:
        raise ValueError(f"unknown precoder {precoder!r}")
    n = _check_instants(scenario, instants)
    t = scenario.terms
    sq = np.sqrt(t.mu)
    y = sq[:, None, None] * t.tr_qbar  # (L, K, I)
    w = np.ones(t.trQ.shape, dtype=complex) if precoder == "du" else _relative_weights(scenario.delays.theta)
    per_ap = (np.abs(y) ** 2).sum(axis=0)  # (K, I)
    coh = np.abs((w[:, None, :] * y).sum(axis=0)) ** 2
    base = np.einsum("l,lik->ki", t.mu, t.QR)
    e_ap = eta(n - scenario.lam, scenario.phase.sigma2_ap)
    return (base + per_ap)[:, :, None] + e_ap[None, None, :] * (coh - per_ap)[:, :, None]


def sinr_coherent_du(k: int, n: int, scenario: SEScenario) -> float:
    return float(sinr_matrix(scenario, "coherent", "du", [n])[k, 0])


def sinr_coherent_df(k: int, n: int, scenario: SEScenario) -> float:
    return float(sinr_matrix(scenario, "coherent", "df", [n])[k, 0])


def sinr_noncoherent(k: int, n: int, scenario: SEScenario) -> float:
    return float(sinr_matrix(scenario, "noncoherent", "du", [n])[k, 0])


def se_from_sinr(sinr_path, tau_c: int, lam: int) -> np.ndarray:
    """(1 / tau_c) * sum_{n=lam}^{tau_c} log2(1 + SINR[n]) along the last axis."""
    s = np.asarray(sinr_path, dtype=float)
    if s.shape[-1] != tau_c - lam + 1:
        raise ValueError(f"expected {tau_c - lam + 1} instants, got {s.shape[-1]}")
    if np.any(s < 0):
        raise ValueError("SINR must be nonnegative")
    return np.log2(1.0 + s).sum(axis=-1) / tau_c


def asymptotic_sinr(n, phase: PhaseParams, lam: int, a: float):
    """Large-array SINR keeping only oscillator phase: 1 / (1/(eta_ap eta_ue) + 1/eta_ue + a)."""
    if a < 0:
        raise ValueError("a must be >= 0")
    gap = np.asarray(n) - lam
    e_ap = eta(gap, phase.sigma2_ap)
    e_ue = eta(gap, phase.sigma2_ue)
    return 1.0 / (1.0 / (e_ap * e_ue) + 1.0 / e_ue + a)


@dataclass(frozen=True, eq=False)
class SEResult:
    se: np.ndarray  # (K,)
    sinr: np.ndarray  # (K, len(instants))
    instants: np.ndarray
    transmission: str
    precoder: str
    scenario_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.transmission

    def rows(self):
        """CSV rows ``ue, mode, precoder, n, sinr, se``."""
        for k in range(self.sinr.shape[0]):
            for j, n in enumerate(self.instants):
                yield (k, self.transmission, self.precoder, int(n), float(self.sinr[k, j]), float(self.se[k]))


def evaluate(scenario: SEScenario, transmission: str = "coherent", precoder: str = "du", drift_corrected: bool = False) -> SEResult:
    sinr = sinr_matrix(scenario, transmission, precoder, drift_corrected=drift_corrected)
    return SEResult(
        se=se_from_sinr(sinr, scenario.tau_c, scenario.lam),
        sinr=sinr,
        instants=scenario.instants,
        transmission=transmission,
        precoder=precoder,
        scenario_hash=scenario.fingerprint(),
        extra={"drift_corrected": drift_corrected},
    )


def sum_se(scenario: SEScenario, transmission: str = "coherent", precoder: str = "du") -> float:
    return float(se_from_sinr(sinr_matrix(scenario, transmission, precoder), scenario.tau_c, scenario.lam).sum())
