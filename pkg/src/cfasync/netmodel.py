"""Network layout, three-slope large-scale fading, spatial correlation and delay offsets.

Axis convention used across the package: AP index first, UE index second,
so ``beta[l, k]`` and ``R[l, k]`` refer to the link between AP ``l`` and UE ``k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .units import SPEED_OF_LIGHT


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` holds the dotted path of the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def cost231_hata_loss(f_c_hz: float, h_ap_m: float = 15.0, h_ue_m: float = 1.65) -> float:
    """Reference loss (dB) of the COST-231 Hata model, frequency in MHz internally."""
    f = f_c_hz / 1e6
    lf = math.log10(f)
    return (
        46.3
        + 33.9 * lf
        - 13.82 * math.log10(h_ap_m)
        - (1.1 * lf - 0.7) * h_ue_m
        + (1.56 * lf - 0.8)
    )


@dataclass(frozen=True)
class PathLossParams:
    d0_m: float = 10.0
    d1_m: float = 50.0
    ref_loss_db: float | None = None
    shadow_std_db: float = 0.0
    f_c_hz: float = 2e9
    h_ap_m: float = 15.0
    h_ue_m: float = 1.65
    min_distance_m: float = 1.0

    @property
    def reference_loss_db(self) -> float:
        if self.ref_loss_db is not None:
            return float(self.ref_loss_db)
        return cost231_hata_loss(self.f_c_hz, self.h_ap_m, self.h_ue_m)

    def validate(self, prefix: str = "pathloss") -> None:
        if not 0.0 < self.d0_m < self.d1_m:
            raise ConfigError(f"{prefix}.d0_m", f"need 0 < d0_m < d1_m, got {self.d0_m}, {self.d1_m}")
        if self.shadow_std_db < 0:
            raise ConfigError(f"{prefix}.shadow_std_db", "must be >= 0")
        if self.min_distance_m <= 0:
            raise ConfigError(f"{prefix}.min_distance_m", "must be > 0")
        if self.f_c_hz <= 0:
            raise ConfigError(f"{prefix}.f_c_hz", "must be > 0")


@dataclass(frozen=True)
class CorrelationModel:
    kind: str = "identity"  # "identity" | "local_scattering"
    angular_std_deg: float = 10.0
    quad_nodes: int = 64

    def validate(self, prefix: str = "correlation") -> None:
        if self.kind not in ("identity", "local_scattering"):
            raise ConfigError(f"{prefix}.kind", f"unknown correlation model {self.kind!r}")
        if self.angular_std_deg < 0:
            raise ConfigError(f"{prefix}.angular_std_deg", "must be >= 0")


@dataclass(frozen=True)
class SceneConfig:
    L: int = 100
    K: int = 20
    N: int = 2
    side_m: float = 500.0
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    correlation: CorrelationModel = field(default_factory=CorrelationModel)
    wrap_around: bool = False

    def validate(self) -> None:
        for name in ("L", "K", "N"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"scene.{name}", f"must be an integer >= 1, got {v!r}")
        if not self.side_m > 0:
            raise ConfigError("scene.side_m", f"must be > 0, got {self.side_m}")
        self.pathloss.validate("scene.pathloss")
        self.correlation.validate("scene.correlation")


@dataclass(frozen=True, eq=False)
class NetworkScene:
    ap_pos: np.ndarray  # (L, 2) metres
    ue_pos: np.ndarray  # (K, 2) metres
    dist: np.ndarray  # (L, K) metres, floored at the minimum distance
    beta: np.ndarray  # (L, K) linear gain
    R: np.ndarray  # (L, K, N, N) complex
    delta_t: np.ndarray  # (L, K) seconds

    @property
    def L(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]

    @property
    def N(self) -> int:
        return self.R.shape[-1]

    def to_dict(self) -> dict:
        return {
            "ap_pos": self.ap_pos.tolist(),
            "ue_pos": self.ue_pos.tolist(),
            "dist": self.dist.tolist(),
            "beta": self.beta.tolist(),
            "R_real": self.R.real.tolist(),
            "R_imag": self.R.imag.tolist(),
            "delta_t": self.delta_t.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkScene":
        return cls(
            ap_pos=np.asarray(d["ap_pos"], dtype=float),
            ue_pos=np.asarray(d["ue_pos"], dtype=float),
            dist=np.asarray(d["dist"], dtype=float),
            beta=np.asarray(d["beta"], dtype=float),
            R=np.asarray(d["R_real"], dtype=float) + 1j * np.asarray(d["R_imag"], dtype=float),
            delta_t=np.asarray(d["delta_t"], dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "NetworkScene":
        return cls.from_dict(json.loads(s))


def three_slope_pathloss_db(d_m, params: PathLossParams) -> np.ndarray:
    """Three-slope path loss as a (negative) gain in dB.

    Slope 0 below ``d0``, 20 dB/decade between ``d0`` and ``d1``, 35 dB/decade
    beyond ``d1``; the constants are placed so that the curve is continuous.
    """
    d_km = np.maximum(np.asarray(d_m, dtype=float), params.min_distance_m) / 1000.0
    d0 = params.d0_m / 1000.0
    d1 = params.d1_m / 1000.0
    ref = params.reference_loss_db
    far = -ref - 35.0 * np.log10(d_km)
    mid = -ref - 15.0 * math.log10(d1) - 20.0 * np.log10(d_km)
    near = -ref - 15.0 * math.log10(d1) - 20.0 * math.log10(d0)
    return np.where(d_km > d1, far, np.where(d_km > d0, mid, near))


def three_slope_beta(d_m, params: PathLossParams, rng: np.random.Generator | None = None) -> np.ndarray:
    """Linear large-scale gain; log-normal shadowing applies beyond ``d1`` when enabled."""
    pl = three_slope_pathloss_db(d_m, params)
    if params.shadow_std_db > 0:
        if rng is None:
            raise ValueError("shadow fading requires an rng")
        far = np.asarray(d_m) > params.d1_m
        pl = pl + np.where(far, params.shadow_std_db * rng.standard_normal(np.shape(pl)), 0.0)
    return 10.0 ** (pl / 10.0)


def steering_vector(N: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response."""
    return np.exp(1j * np.pi * np.arange(N) * np.sin(angle))


def _local_scattering(beta: float, N: int, angle: float, std_rad: float, nodes: int) -> np.ndarray:
    if std_rad == 0.0:
        a = steering_vector(N, angle)
        return beta * np.outer(a, a.conj())
    # Gauss-Hermite over the Gaussian angular deviation
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    m = np.arange(N)
    diff = m[:, None] - m[None, :]
    phases = np.exp(1j * np.pi * diff[None, :, :] * np.sin(angle + std_rad * x)[:, None, None])
    return beta * np.tensordot(w, phases, axes=1)


def project_psd(A: np.ndarray, target_trace: float) -> np.ndarray:
    A = 0.5 * (A + A.conj().T)
    vals, vecs = np.linalg.eigh(A)
    vals = np.clip(vals, 0.0, None)
    A = (vecs * vals) @ vecs.conj().T
    A = 0.5 * (A + A.conj().T)
    return A * (target_trace / np.trace(A).real)


def correlation_matrix(beta: float, N: int, model: CorrelationModel | None = None, angle: float = 0.0) -> np.ndarray:
    """N x N spatial correlation with ``trace == N * beta``."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    model = model or CorrelationModel()
    if model.kind == "identity":
        return beta * np.eye(N, dtype=complex)
    R = _local_scattering(beta, N, angle, math.radians(model.angular_std_deg), model.quad_nodes)
    R = project_psd(R, N * beta)
    if np.linalg.eigvalsh(R).min() < -1e-12 * beta:
        raise RuntimeError("local-scattering correlation is not PSD after projection")
    return R


def delay_offsets(dist) -> np.ndarray:
    """Per-link timing offsets relative to the first-arriving AP of each UE."""
    d = np.asarray(dist, dtype=float)
    return (d - d.min(axis=0, keepdims=True)) / SPEED_OF_LIGHT


def _pairwise(ap: np.ndarray, ue: np.ndarray, side: float, wrap: bool) -> tuple[np.ndarray, np.ndarray]:
    diff = ue[None, :, :] - ap[:, None, :]
    if wrap:
        diff = (diff + side / 2.0) % side - side / 2.0
    return np.hypot(diff[..., 0], diff[..., 1]), np.arctan2(diff[..., 1], diff[..., 0])


def generate_scene(cfg: SceneConfig, rng: np.random.Generator) -> NetworkScene:
    cfg.validate()
    ap = rng.uniform(0.0, cfg.side_m, size=(cfg.L, 2))
    ue = rng.uniform(0.0, cfg.side_m, size=(cfg.K, 2))
    return scene_from_positions(cfg, ap, ue, rng)


def scene_from_positions(cfg: SceneConfig, ap_pos, ue_pos, rng: np.random.Generator | None = None) -> NetworkScene:
    ap = np.asarray(ap_pos, dtype=float).reshape(-1, 2)
    ue = np.asarray(ue_pos, dtype=float).reshape(-1, 2)
    raw, angle = _pairwise(ap, ue, cfg.side_m, cfg.wrap_around)
    dist = np.maximum(raw, cfg.pathloss.min_distance_m)
    beta = three_slope_beta(dist, cfg.pathloss, rng)
    L, K = dist.shape
    N = cfg.N
    if cfg.correlation.kind == "identity":
        R = beta[:, :, None, None] * np.eye(N, dtype=complex)
    else:
        R = np.empty((L, K, N, N), dtype=complex)
        for l in range(L):
            for k in range(K):
                R[l, k] = correlation_matrix(beta[l, k], N, cfg.correlation, angle[l, k])
    return NetworkScene(ap_pos=ap, ue_pos=ue, dist=dist, beta=beta, R=R, delta_t=delay_offsets(dist))


def config_to_dict(cfg: SceneConfig) -> dict:
    return asdict(cfg)
