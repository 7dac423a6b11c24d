"""Experiment drivers producing tabular figure data."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .. import __version__, kernels
from ..chanest import assign_pilots, build_stats, nmse
from ..mcsim import McConfig, ValidationReport, estimate_sinr, run_monte_carlo, validate
from ..netmodel import NetworkScene, correlation_matrix, generate_scene
from ..phase import DelayPhases, PhaseParams
from ..rng import SCENE, substream
from ..sedf import SEResult, SEScenario, asymptotic_sinr, evaluate, se_from_sinr, sinr_matrix, sum_se
from ..units import db_to_lin
from .config import SCHEMA_VERSION, ExperimentConfig

COLUMNS = {
    "fig1": ("sigma2_db", "tau_p", "nmse_mean", "nmse_p05", "nmse_p95"),
    "fig2": ("case", "source", "se", "cdf"),
    "fig3": ("sigma2_db", "mode", "precoder", "sum_se", "sum_se_std"),
    "fig4": ("L", "N", "sigma2_ap_db", "sigma2_ue_db", "sum_se", "sum_se_std"),
    "validate": ("ue", "instant", "mode", "closed", "mc", "stderr", "rel_err", "pass", "inconclusive"),
}

# (transmission, precoder, label used in CSV rows)
MODES = (("coherent", "du", "du"), ("coherent", "df", "df"), ("noncoherent", "du", "na"))


@dataclass
class FigureData:
    name: str
    columns: tuple
    rows: list
    config: ExperimentConfig
    summary: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.name,
            "columns": list(self.columns),
            "seed": self.config.seed,
            "config_hash": self.config.hash(),
            "code_version": __version__,
            "kernel_backend": kernels.BACKEND,
            "summary": self.summary,
            "config": self.config.to_dict(),
        }


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def make_scene(cfg: ExperimentConfig, index: int, L: int | None = None, N: int | None = None) -> NetworkScene:
    """Layout ``index``; the stream depends on (seed, L, N) so settings never share draws by accident."""
    sc = cfg.scene_config(L, N)
    return generate_scene(sc, substream(cfg.seed, SCENE, index, sc.L, sc.N))


def geometric_delays(cfg: ExperimentConfig, scene: NetworkScene) -> DelayPhases:
    return DelayPhases.from_offsets(scene.delta_t, cfg.T_s, cfg.radio.delay_scale)


def make_scenario(cfg: ExperimentConfig, scene: NetworkScene, phase: PhaseParams, delays: DelayPhases | None = None, tau_p=None) -> SEScenario:
    plan = assign_pilots(scene.K, cfg.pilot.tau_p if tau_p is None else tau_p)
    stats = build_stats(scene.R, plan, cfg.p, cfg.sigma2, phase)
    if delays is None:
        delays = geometric_delays(cfg, scene)
    return SEScenario(stats, scene.R, delays, phase, cfg.p_d, cfg.sigma2_d, cfg.block.tau_c)


# ---------------------------------------------------------------- fig1

def _fixed_snr_channels(cfg: ExperimentConfig, index: int) -> np.ndarray:
    """Geometry-free covariances with p tr(R) / (N sigma2) fixed for every link."""
    s = cfg.scene
    beta = db_to_lin(cfg.sweep.fixed_snr_db) * cfg.sigma2 / cfg.p
    model = cfg.scene_config().correlation
    if model.kind == "identity":
        return np.broadcast_to(beta * np.eye(s.N, dtype=complex), (s.L, s.K, s.N, s.N)).copy()
    angles = substream(cfg.seed, SCENE, index, 0).uniform(-np.pi, np.pi, size=(s.L, s.K))
    R = np.empty((s.L, s.K, s.N, s.N), dtype=complex)
    for l in range(s.L):
        for k in range(s.K):
            R[l, k] = correlation_matrix(beta, s.N, model, angles[l, k])
    return R


def run_nmse_sweep(cfg: ExperimentConfig) -> FigureData:
    """NMSE statistics over links (and layouts) versus sigma2_ap = sigma2_ue."""
    if cfg.sweep.fixed_snr_db is not None:
        Rs = [_fixed_snr_channels(cfg, s) for s in range(cfg.num_scenes)]
    else:
        Rs = [make_scene(cfg, s).R for s in range(cfg.num_scenes)]
    tau_ps = [int(t) for t in cfg.sweep.tau_p]

    def point(s2db):
        ph = cfg.phase_params(s2db, s2db)
        out = []
        for tp in tau_ps:
            plan = assign_pilots(cfg.scene.K, tp)
            vals = np.concatenate([nmse(R, build_stats(R, plan, cfg.p, cfg.sigma2, ph).Q).ravel() for R in Rs])
            out.append((float(s2db), tp, float(vals.mean()), float(np.quantile(vals, 0.05)), float(np.quantile(vals, 0.95))))
        return out

    rows = [r for chunk in _pmap(point, cfg.sweep.sigma2_db, cfg.sweep.workers) for r in chunk]
    return FigureData("fig1", COLUMNS["fig1"], rows, cfg, {"crossings": _nmse_crossings(rows, tau_ps)})


def _nmse_crossings(rows, tau_ps) -> list:
    """First sweep point where a smaller tau_p beats a larger one, per pair."""
    table = {}
    for s2, tp, m, *_ in rows:
        table.setdefault(tp, []).append((s2, m))
    found = []
    for i, a in enumerate(tau_ps):
        for b in tau_ps[i + 1:]:
            lo, hi = sorted((a, b))
            hit = next((s2 for (s2, ml), (_, mh) in zip(table[lo], table[hi]) if ml < mh), None)
            found.append({"tau_p_small": lo, "tau_p_large": hi, "sigma2_db": hit})
    return found


# ---------------------------------------------------------------- fig2

FIG2_CASES = ("ideal", "oscillator", "delay")


def _fig2_scenario(cfg: ExperimentConfig, scene: NetworkScene, case: str) -> SEScenario:
    if case == "ideal":
        return make_scenario(cfg, scene, cfg.phase_params(-math.inf, -math.inf), DelayPhases.synchronous(scene.L, scene.K))
    if case == "oscillator":
        s2 = cfg.sweep.oscillator_sigma2_db
        return make_scenario(cfg, scene, cfg.phase_params(s2, s2), DelayPhases.synchronous(scene.L, scene.K))
    return make_scenario(cfg, scene, cfg.phase_params(-math.inf, -math.inf))


def _mc_se(scen: SEScenario, cfg: ExperimentConfig, seed: int) -> tuple[np.ndarray, ValidationReport, ValidationReport]:
    """MC per-UE SE with SINR linearly interpolated between the simulated instants.

    Also returns the SINR comparison against the default and the drift-corrected
    closed forms.
    """
    inst = np.array(sorted({int(n) for n in (cfg.mc.instants or [scen.lam, scen.tau_c])} | {scen.lam, scen.tau_c}))
    mcc = McConfig(trials=cfg.mc.trials, seed=seed, instants=tuple(inst), batch_size=cfg.mc.batch_size, groups=cfg.mc.groups)
    est = estimate_sinr(run_monte_carlo(scen, mcc, precoders=("du",)), "coherent", "du")
    full = scen.instants
    path = np.stack([np.interp(full, inst, est.sinr[k]) for k in range(scen.K)])
    kw = dict(tol_rel=cfg.mc.tol_rel, max_rel_stderr=cfg.mc.max_rel_stderr)
    rep = validate(evaluate(scen, "coherent", "du"), est, **kw)
    rep_dc = validate(evaluate(scen, "coherent", "du", drift_corrected=True), est, **kw)
    return se_from_sinr(np.maximum(path, 0.0), scen.tau_c, scen.lam), rep, rep_dc


def run_se_cdf(cfg: ExperimentConfig) -> FigureData:
    """Empirical CDFs of per-UE SE (coherent, DU) for the three impairment cases."""
    scenes = [make_scene(cfg, s) for s in range(cfg.num_scenes)]

    def closed_case(case):
        return np.concatenate([evaluate(_fig2_scenario(cfg, sc, case)).se for sc in scenes])

    closed = dict(zip(FIG2_CASES, _pmap(closed_case, FIG2_CASES, cfg.sweep.workers)))
    n_mc = min(cfg.mc.scenes, len(scenes))
    jobs = [(case, s) for case in FIG2_CASES for s in range(n_mc)]

    def mc_job(job):
        case, s = job
        return _mc_se(_fig2_scenario(cfg, scenes[s], case), cfg, cfg.seed + 7919 * s)

    mc_out = _pmap(mc_job, jobs, cfg.sweep.workers)
    rows, summary = [], {}
    for case in FIG2_CASES:
        rows += _cdf_rows(case, "closed", closed[case])
        parts = [out for (c, _), out in zip(jobs, mc_out) if c == case]
        if parts:
            se = np.concatenate([p[0] for p in parts])
            rows += _cdf_rows(case, "mc", se)
            rep, rep_dc = parts[0][1], parts[0][2]
            for p in parts[1:]:
                rep, rep_dc = rep.merged(p[1]), rep_dc.merged(p[2])
            ref = np.concatenate([evaluate(_fig2_scenario(cfg, scenes[s], case)).se for s in range(n_mc)])
            summary[case] = {
                "mc_status": rep.status,
                "mc_max_rel_err_sinr": rep.max_rel_err,
                "mc_status_drift_corrected": rep_dc.status,
                "mc_max_rel_err_sinr_drift_corrected": rep_dc.max_rel_err,
                "mc_max_rel_err_se": float(np.max(np.abs(se - ref) / ref)),
            }
        summary.setdefault(case, {})["median_se"] = float(np.median(closed[case]))
    return FigureData("fig2", COLUMNS["fig2"], rows, cfg, summary)


def _cdf_rows(case: str, source: str, se: np.ndarray) -> list:
    s = np.sort(se)
    n = len(s)
    return [(case, source, float(v), (i + 1) / n) for i, v in enumerate(s)]


# ---------------------------------------------------------------- fig3

def run_sum_se_sweep(cfg: ExperimentConfig) -> FigureData:
    """Layout-averaged sum SE of co-DU, co-DF and nc versus sigma2 = sigma2_ap = sigma2_ue."""
    scenes = [make_scene(cfg, s) for s in range(cfg.num_scenes)]

    def point(s2db):
        ph = cfg.phase_params(s2db, s2db)
        vals = np.zeros((len(MODES), len(scenes)))
        for j, sc in enumerate(scenes):
            scen = make_scenario(cfg, sc, ph)
            for i, (tr, pc, _) in enumerate(MODES):
                vals[i, j] = sum_se(scen, tr, pc)
        std = vals.std(axis=1, ddof=1) if len(scenes) > 1 else np.zeros(len(MODES))
        return [(float(s2db), tr, lab, float(vals[i].mean()), float(std[i])) for i, (tr, _, lab) in enumerate(MODES)]

    rows = [r for chunk in _pmap(point, cfg.sweep.sigma2_db, cfg.sweep.workers) for r in chunk]
    return FigureData("fig3", COLUMNS["fig3"], rows, cfg, _fig3_summary(rows))


def _fig3_summary(rows) -> dict:
    curves = {}
    for s2, tr, lab, m, _ in rows:
        curves.setdefault(f"{tr}-{lab}", []).append((s2, m))
    out = {}
    for key, pts in curves.items():
        x, y = np.array(pts).T
        out[key] = {"drop": float(y[0] - y[-1]), "min_slope": float(np.min(np.diff(y) / np.diff(x))) if len(x) > 1 else 0.0}
    return out


# ---------------------------------------------------------------- fig4

def run_phase_grid(cfg: ExperimentConfig) -> FigureData:
    """co-DU sum SE on a (sigma2_ap, sigma2_ue) grid for each antenna setting."""
    grid = [float(g) for g in cfg.sweep.grid_db]
    settings = [(int(L), int(N)) for L, N in cfg.sweep.antenna_settings]
    rows = []
    table = {}
    for L, N in settings:
        scenes = [make_scene(cfg, s, L, N) for s in range(cfg.num_scenes)]
        delays = [geometric_delays(cfg, sc) for sc in scenes]
        pairs = [(a, u) for a in grid for u in grid]

        def point(pair, scenes=scenes, delays=delays):
            ph = cfg.phase_params(*pair)
            return np.array([sum_se(make_scenario(cfg, sc, ph, d)) for sc, d in zip(scenes, delays)])

        for (a, u), v in zip(pairs, _pmap(point, pairs, cfg.sweep.workers)):
            std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
            rows.append((L, N, a, u, float(v.mean()), std))
            table[(L, N, a, u)] = float(v.mean())
    return FigureData("fig4", COLUMNS["fig4"], rows, cfg, _fig4_summary(cfg, table, grid, settings))


def _fig4_summary(cfg: ExperimentConfig, table: dict, grid: list, settings: list) -> dict:
    lo, hi = min(grid), max(grid)
    out = {"settings": {}}
    for L, N in settings:
        ref = table[(L, N, lo, lo)]
        out["settings"][f"L{L}_N{N}"] = {
            "ap_loss": 1.0 - table[(L, N, hi, lo)] / ref,
            "ue_loss": 1.0 - table[(L, N, lo, hi)] / ref,
            "asymmetry_ratio": table[(L, N, lo, hi)] / table[(L, N, hi, lo)],
            "asymptote": _fit_asymptote(cfg, table, grid, L, N),
        }
    if len(settings) >= 2:
        (L1, N1), (L2, N2) = settings[:2]
        out["gain_ue_dominant"] = table[(L2, N2, lo, hi)] / table[(L1, N1, lo, hi)] - 1.0
        out["gain_ap_dominant"] = table[(L2, N2, hi, lo)] / table[(L1, N1, hi, lo)] - 1.0
    return out


def _fit_asymptote(cfg: ExperimentConfig, table: dict, grid: list, L: int, N: int) -> dict:
    """Fit the large-array SINR constant to the shape of the grid.

    Both surfaces are normalized by their value at the least impaired corner,
    since the large-array form is only meaningful up to scale here. Reports the
    fitted constant, the worst normalized deviation and the asymmetry ratio
    SE(lo, hi) / SE(hi, lo) the fitted form predicts.
    """
    lam, tau_c = cfg.pilot.tau_p + 1, cfg.block.tau_c
    n = np.arange(lam, tau_c + 1)
    lo, hi = min(grid), max(grid)
    ref = table[(L, N, lo, lo)]
    pts = [((a, u), table[(L, N, a, u)] / ref) for a in grid for u in grid]

    def se_asym(a, pair):
        return float(np.log2(1.0 + asymptotic_sinr(n, cfg.phase_params(*pair), lam, a)).sum())

    def shape(a, pair):
        return se_asym(a, pair) / se_asym(a, (lo, lo))

    def loss(log_a):
        a = math.exp(log_a)
        return sum((shape(a, pair) - y) ** 2 for pair, y in pts)

    res = minimize_scalar(loss, bounds=(-12.0, 8.0), method="bounded")
    a = math.exp(res.x)
    return {
        "a": a,
        "max_abs_dev": max(abs(shape(a, pair) - y) for pair, y in pts),
        "asymmetry_ratio": se_asym(a, (lo, hi)) / se_asym(a, (hi, lo)),
    }


# ---------------------------------------------------------------- validation

def validation_seed(seed: int, scene_index: int) -> int:
    return int(np.random.SeedSequence([seed, scene_index]).generate_state(1, np.uint64)[0])


def run_validation(cfg: ExperimentConfig, corrupt: str | None = None) -> tuple[ValidationReport, FigureData]:
    """Closed form versus Monte Carlo for co-DU, co-DF and nc on the configured scenario(s).

    ``corrupt="numerator"`` scales every closed-form SINR by 1.5 and must make the
    comparison fail; it exists to check that the suite can detect errors.
    """
    report = ValidationReport(entries=[], tol_rel=cfg.mc.tol_rel)
    for s in range(cfg.num_scenes):
        scene = make_scene(cfg, s)
        scen = make_scenario(cfg, scene, cfg.phase_params())
        inst = tuple(int(n) for n in (cfg.mc.instants or (scen.lam, min(scen.lam + 10, scen.tau_c), scen.tau_c)))
        mcc = McConfig(
            trials=cfg.mc.trials,
            seed=validation_seed(cfg.seed, s),
            instants=inst,
            batch_size=cfg.mc.batch_size,
            groups=cfg.mc.groups,
            workers=cfg.sweep.workers,
        )
        samples = run_monte_carlo(scen, mcc)
        for tr, pc, lab in MODES:
            sinr = sinr_matrix(scen, tr, pc, inst)
            if corrupt == "numerator":
                sinr = 1.5 * sinr
            closed = SEResult(se=np.zeros(scen.K), sinr=sinr, instants=np.array(inst), transmission=tr, precoder=pc, scenario_hash=scen.fingerprint())
            mode = f"{tr}-{lab}" if cfg.num_scenes == 1 else f"{tr}-{lab}-s{s}"
            report = report.merged(validate(closed, estimate_sinr(samples, tr, pc), cfg.mc.tol_rel, mode=mode, max_rel_stderr=cfg.mc.max_rel_stderr))
    rows = [tuple(e[c] for c in COLUMNS["validate"]) for e in report.entries]
    summary = {"status": report.status, "max_rel_err": report.max_rel_err, "n_fail": report.n_fail, "n_inconclusive": report.n_inconclusive}
    return report, FigureData("validate", COLUMNS["validate"], rows, cfg, summary)


RUNNERS = {
    "fig1": run_nmse_sweep,
    "fig2": run_se_cdf,
    "fig3": run_sum_se_sweep,
    "fig4": run_phase_grid,
}
