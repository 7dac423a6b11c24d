"""Delay phases and discrete-time Wiener oscillator phase noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import db_to_variance


def variance_from_oscillator(c_i: float, f_c: float, T_s: float) -> float:
    """Per-instant phase-increment variance (rad^2) of a free-running oscillator."""
    if c_i < 0 or f_c < 0 or T_s < 0:
        raise ValueError("oscillator constant, carrier and symbol time must be >= 0")
    return 4.0 * math.pi**2 * f_c**2 * c_i * T_s


@dataclass(frozen=True)
class PhaseParams:
    sigma2_ap: float = 0.0
    sigma2_ue: float = 0.0
    f_c: float = 2e9
    T_s: float = 5e-8
    c_ap: float | None = None
    c_ue: float | None = None

    def __post_init__(self):
        if self.sigma2_ap < 0 or self.sigma2_ue < 0:
            raise ValueError("phase-increment variances must be >= 0")
        if self.T_s <= 0:
            raise ValueError("symbol duration must be > 0")
        for c, s2, name in ((self.c_ap, self.sigma2_ap, "ap"), (self.c_ue, self.sigma2_ue, "ue")):
            if c is not None and not math.isclose(variance_from_oscillator(c, self.f_c, self.T_s), s2, rel_tol=1e-9, abs_tol=1e-300):
                raise ValueError(f"sigma2_{name} inconsistent with oscillator constant c_{name}")

    @classmethod
    def from_db(cls, sigma2_ap_db: float, sigma2_ue_db: float, **kw) -> "PhaseParams":
        return cls(float(db_to_variance(sigma2_ap_db)), float(db_to_variance(sigma2_ue_db)), **kw)

    @classmethod
    def from_oscillator(cls, c_ap: float, c_ue: float, f_c: float, T_s: float) -> "PhaseParams":
        return cls(
            variance_from_oscillator(c_ap, f_c, T_s),
            variance_from_oscillator(c_ue, f_c, T_s),
            f_c=f_c,
            T_s=T_s,
            c_ap=c_ap,
            c_ue=c_ue,
        )

    @property
    def total(self) -> float:
        return self.sigma2_ap + self.sigma2_ue


@dataclass(frozen=True, eq=False)
class DelayPhases:
    theta: np.ndarray  # (L, K) unit-modulus

    def __post_init__(self):
        if not np.allclose(np.abs(self.theta), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("delay phases must have unit modulus")

    @classmethod
    def synchronous(cls, L: int, K: int) -> "DelayPhases":
        return cls(np.ones((L, K), dtype=complex))

    @classmethod
    def from_offsets(cls, delta_t, T_s: float, scale: float = 1.0) -> "DelayPhases":
        return cls(delay_phase(scale * np.asarray(delta_t, dtype=float), T_s))

    @classmethod
    def uniform_random(cls, L: int, K: int, rng: np.random.Generator) -> "DelayPhases":
        return cls(np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=(L, K))))


@dataclass(frozen=True, eq=False)
class PhasePath:
    phi_ue: np.ndarray  # (K, tau_c + 1), column n is instant n; column 0 the initial phase
    phi_ap: np.ndarray  # (L, tau_c + 1)

    @property
    def tau_c(self) -> int:
        return self.phi_ue.shape[1] - 1

    def vartheta(self, n) -> np.ndarray:
        """Oscillator phase factor exp(j(phi_k[n] + phi_l[n])), shape (L, K) or (L, K, len(n))."""
        return np.exp(1j * (self.phi_ap[:, None, n] + self.phi_ue[None, :, n]))


def delay_phase(delta_t, T_s: float):
    """exp(-j 2 pi dt / T_s), reduced modulo one symbol before exponentiation."""
    if T_s <= 0:
        raise ValueError("T_s must be > 0")
    frac = np.mod(np.asarray(delta_t, dtype=float) / T_s, 1.0)
    out = np.exp(-2j * np.pi * frac)
    return out[()] if out.ndim == 0 else out


def sample_phase_paths(params: PhaseParams, tau_c: int, rng: np.random.Generator, n_ue: int, n_ap: int) -> PhasePath:
    """Independent Wiener walks for every UE and AP oscillator over one block.

    Increments are real Gaussian; initial phases are uniform on [0, 2 pi).
    """
    if tau_c < 1:
        raise ValueError("tau_c must be >= 1")
    init = rng.uniform(0.0, 2 * np.pi, size=n_ue + n_ap)
    steps = rng.standard_normal(size=(n_ue + n_ap, tau_c))
    scale = np.concatenate([np.full(n_ue, math.sqrt(params.sigma2_ue)), np.full(n_ap, math.sqrt(params.sigma2_ap))])
    walk = np.empty((n_ue + n_ap, tau_c + 1))
    walk[:, 0] = init
    walk[:, 1:] = init[:, None] + np.cumsum(scale[:, None] * steps, axis=1)
    return PhasePath(phi_ue=walk[:n_ue], phi_ap=walk[n_ue:])


def theta_mean(gap, params: PhaseParams):
    """Mean of the combined phase rotation accumulated over ``gap`` instants."""
    gap = np.asarray(gap)
    if np.any(gap < 0):
        raise ValueError("gap must be >= 0")
    return np.exp(-0.5 * gap * params.total)


def eta(gap, sigma2: float):
    gap = np.asarray(gap)
    if np.any(gap < 0):
        raise ValueError("gap must be >= 0")
    return np.exp(-gap * sigma2)


def effective_channel(h, theta, phase_ue, phase_ap):
    return theta * np.exp(1j * (phase_ue + phase_ap)) * np.asarray(h)
