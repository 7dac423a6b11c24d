"""Experiment configuration: schema, defaults per experiment, YAML loading.

The config file is YAML with nested sections. Unknown keys are rejected with
the full dotted path of the offending key.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..netmodel import ConfigError, CorrelationModel, PathLossParams, SceneConfig
from ..phase import PhaseParams
from ..units import db_to_variance, dbm_to_watt

SCHEMA_VERSION = 1
EXPERIMENTS = ("fig1", "fig2", "fig3", "fig4", "validate")


@dataclass
class PathLossSection:
    d0_m: float = 10.0
    d1_m: float = 50.0
    ref_loss_db: float | None = None
    shadow_std_db: float = 0.0
    h_ap_m: float = 15.0
    h_ue_m: float = 1.65
    min_distance_m: float = 1.0


@dataclass
class CorrelationSection:
    kind: str = "identity"
    angular_std_deg: float = 10.0


@dataclass
class SceneSection:
    L: int = 100
    K: int = 20
    N: int = 2
    side_m: float = 500.0
    wrap_around: bool = False
    pathloss: PathLossSection = field(default_factory=PathLossSection)
    correlation: CorrelationSection = field(default_factory=CorrelationSection)


@dataclass
class PhaseSection:
    # either variances in dB or oscillator constants, never both
    sigma2_ap_db: float | None = -30.0
    sigma2_ue_db: float | None = -30.0
    c_ap: float | None = None
    c_ue: float | None = None


@dataclass
class RadioSection:
    f_c_hz: float = 2e9
    bandwidth_hz: float = 20e6
    delay_scale: float = 1.0


@dataclass
class PilotSection:
    tau_p: int = 10


@dataclass
class PowerSection:
    p_dbm: float = 23.0
    p_d_dbm: float = 23.0


@dataclass
class NoiseSection:
    sigma2_dbm: float = -96.0
    sigma2_d_dbm: float = -96.0


@dataclass
class BlockSection:
    tau_c: int = 200


@dataclass
class McSection:
    trials: int = 20000
    instants: list | None = None
    batch_size: int = 256
    groups: int = 20
    tol_rel: float = 0.03
    max_rel_stderr: float = 0.05
    scenes: int = 1


@dataclass
class SweepSection:
    sigma2_db: list = field(default_factory=lambda: [-50.0, -45.0, -40.0, -35.0, -30.0, -25.0, -20.0])
    tau_p: list = field(default_factory=lambda: [10, 20, 40])
    fixed_snr_db: float | None = 30.0
    grid_db: list = field(default_factory=lambda: [-50.0, -45.0, -40.0, -35.0, -30.0, -25.0, -20.0])
    antenna_settings: list = field(default_factory=lambda: [[100, 2], [200, 4]])
    oscillator_sigma2_db: float = -30.0
    workers: int = 1


@dataclass
class ExperimentConfig:
    experiment: str = "fig3"
    seed: int = 1
    num_scenes: int = 10
    out_dir: str = "out"
    scene: SceneSection = field(default_factory=SceneSection)
    phase: PhaseSection = field(default_factory=PhaseSection)
    radio: RadioSection = field(default_factory=RadioSection)
    pilot: PilotSection = field(default_factory=PilotSection)
    powers: PowerSection = field(default_factory=PowerSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    block: BlockSection = field(default_factory=BlockSection)
    mc: McSection = field(default_factory=McSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # derived quantities, always in linear units
    @property
    def p(self) -> float:
        return float(dbm_to_watt(self.powers.p_dbm))

    @property
    def p_d(self) -> float:
        return float(dbm_to_watt(self.powers.p_d_dbm))

    @property
    def sigma2(self) -> float:
        return float(dbm_to_watt(self.noise.sigma2_dbm))

    @property
    def sigma2_d(self) -> float:
        return float(dbm_to_watt(self.noise.sigma2_d_dbm))

    @property
    def T_s(self) -> float:
        return 1.0 / self.radio.bandwidth_hz

    def scene_config(self, L: int | None = None, N: int | None = None) -> SceneConfig:
        s = self.scene
        pl = s.pathloss
        return SceneConfig(
            L=s.L if L is None else L,
            K=s.K,
            N=s.N if N is None else N,
            side_m=s.side_m,
            wrap_around=s.wrap_around,
            pathloss=PathLossParams(
                d0_m=pl.d0_m,
                d1_m=pl.d1_m,
                ref_loss_db=pl.ref_loss_db,
                shadow_std_db=pl.shadow_std_db,
                f_c_hz=self.radio.f_c_hz,
                h_ap_m=pl.h_ap_m,
                h_ue_m=pl.h_ue_m,
                min_distance_m=pl.min_distance_m,
            ),
            correlation=CorrelationModel(kind=s.correlation.kind, angular_std_deg=s.correlation.angular_std_deg),
        )

    def phase_params(self, sigma2_ap_db=None, sigma2_ue_db=None) -> PhaseParams:
        """Phase parameters from the config, optionally overriding the dB variances."""
        ph = self.phase
        kw = dict(f_c=self.radio.f_c_hz, T_s=self.T_s)
        if sigma2_ap_db is not None or sigma2_ue_db is not None:
            return PhaseParams(float(db_to_variance(sigma2_ap_db)), float(db_to_variance(sigma2_ue_db)), **kw)
        if ph.c_ap is not None:
            return PhaseParams.from_oscillator(ph.c_ap, ph.c_ue, self.radio.f_c_hz, self.T_s)
        return PhaseParams(float(db_to_variance(ph.sigma2_ap_db)), float(db_to_variance(ph.sigma2_ue_db)), **kw)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if self.num_scenes < 1:
            raise ConfigError("num_scenes", "must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        self.scene_config().validate()
        ph = self.phase
        has_db = ph.sigma2_ap_db is not None or ph.sigma2_ue_db is not None
        has_osc = ph.c_ap is not None or ph.c_ue is not None
        if has_db and has_osc:
            raise ConfigError("phase", "give either sigma2_*_db or c_ap/c_ue, not both")
        if has_osc and (ph.c_ap is None or ph.c_ue is None or ph.c_ap < 0 or ph.c_ue < 0):
            raise ConfigError("phase.c_ap", "both oscillator constants are required and must be >= 0")
        if has_db and (ph.sigma2_ap_db is None or ph.sigma2_ue_db is None):
            raise ConfigError("phase.sigma2_ap_db", "both dB variances are required")
        if not has_db and not has_osc:
            raise ConfigError("phase", "no phase-noise parameters given")
        if self.radio.bandwidth_hz <= 0:
            raise ConfigError("radio.bandwidth_hz", "must be > 0")
        if self.radio.f_c_hz <= 0:
            raise ConfigError("radio.f_c_hz", "must be > 0")
        if self.pilot.tau_p < 1:
            raise ConfigError("pilot.tau_p", "must be >= 1")
        if not self.pilot.tau_p < self.block.tau_c:
            raise ConfigError("block.tau_c", f"tau_p={self.pilot.tau_p} must be < tau_c={self.block.tau_c}")
        if self.mc.trials < 2:
            raise ConfigError("mc.trials", "must be >= 2")
        if self.mc.groups < 2:
            raise ConfigError("mc.groups", "must be >= 2")
        if not 0 < self.mc.tol_rel < 1:
            raise ConfigError("mc.tol_rel", "must lie in (0, 1)")
        if not self.mc.max_rel_stderr > 0:
            raise ConfigError("mc.max_rel_stderr", "must be > 0")
        if self.mc.instants is not None:
            lam = self.pilot.tau_p + 1
            for n in self.mc.instants:
                if not lam <= int(n) <= self.block.tau_c:
                    raise ConfigError("mc.instants", f"instant {n} outside [{lam}, {self.block.tau_c}]")
        if self.sweep.workers < 1:
            raise ConfigError("sweep.workers", "must be >= 1")
        for i, pair in enumerate(self.sweep.antenna_settings):
            if len(pair) != 2 or min(pair) < 1:
                raise ConfigError(f"sweep.antenna_settings[{i}]", "expected [L, N] with positive entries")

    def to_dict(self) -> dict:
        # the output location does not affect results, so it stays out of sidecars and the hash
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _defaults(experiment: str) -> ExperimentConfig:
    cfg = ExperimentConfig(experiment=experiment)
    if experiment == "fig1":
        cfg.num_scenes = 1
        cfg.sweep.sigma2_db = [float(x) for x in range(-50, 1, 5)]
    elif experiment == "fig2":
        cfg.num_scenes = 20
        cfg.mc.trials = 2000
        cfg.mc.scenes = 1
        cfg.mc.instants = [11, 50, 100, 150, 200]
        cfg.mc.batch_size = 32
    elif experiment == "fig3":
        cfg.num_scenes = 10
    elif experiment == "fig4":
        cfg.num_scenes = 50
    elif experiment == "validate":
        cfg.num_scenes = 1
        cfg.scene.L, cfg.scene.K, cfg.scene.N = 10, 4, 2
        cfg.pilot.tau_p = 2
        cfg.block.tau_c = 50
        cfg.mc.trials = 20000
        cfg.mc.instants = [3, 13, 50]
    return cfg


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    return _defaults(experiment)


def _merge(obj, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, val in data.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in fields:
            raise ConfigError(where, "unknown key")
        cur = getattr(obj, key)
        if dataclasses.is_dataclass(cur):
            _merge(cur, val, where)
        else:
            setattr(obj, key, _coerce(cur, val, where))


def _coerce(cur: Any, val: Any, where: str):
    if val is None:
        return None
    if isinstance(cur, bool):
        if not isinstance(val, bool):
            raise ConfigError(where, f"expected a boolean, got {val!r}")
        return val
    if isinstance(cur, int) and not isinstance(cur, bool):
        if isinstance(val, bool) or not (isinstance(val, int) or (isinstance(val, float) and float(val).is_integer())):
            raise ConfigError(where, f"expected an integer, got {val!r}")
        return int(val)
    if isinstance(cur, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(where, f"expected a number, got {val!r}")
        return float(val)
    if isinstance(cur, list):
        if not isinstance(val, list):
            raise ConfigError(where, f"expected a list, got {val!r}")
        return val
    if isinstance(cur, str):
        if not isinstance(val, str):
            raise ConfigError(where, f"expected a string, got {val!r}")
        return val
    # fields whose default is None accept numbers or lists
    if isinstance(val, (int, float, list, str)) and not isinstance(val, bool):
        return val
    raise ConfigError(where, f"unsupported value {val!r}")


def config_from_mapping(data: dict | None, experiment: str | None = None) -> ExperimentConfig:
    if data is not None and not isinstance(data, dict):
        raise ConfigError("<root>", f"expected a mapping, got {type(data).__name__}")
    data = dict(data or {})
    exp = data.get("experiment", experiment or "fig3")
    if experiment is not None and exp != experiment:
        raise ConfigError("experiment", f"config is for {exp!r} but {experiment!r} was requested")
    cfg = default_config(exp)
    _merge(cfg, data, "")
    cfg.validate()
    return cfg


def load_config(path: str | Path | None, experiment: str | None = None) -> ExperimentConfig:
    if path is None:
        return config_from_mapping({}, experiment)
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from exc
    if isinstance(data, dict) and "schema_version" in data and "config" in data:
        # a JSON sidecar written by a previous run
        data = data["config"]
    return config_from_mapping(data, experiment)


def np_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")
