"""Monte Carlo estimator of the use-and-then-forget downlink SINR.

Every expectation in the bound (desired signal per AP, interference power per
UE) is replaced by a sample average over independent realizations of the
channels, oscillator phase walks and pilot noise. Nothing here reuses the
closed-form expressions except the MMSE estimator itself, whose statistics
are what the estimator uses in practice.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chanest import estimator_matrices, sqrtm_psd
from .phase import PhaseParams
from .rng import MONTE_CARLO, _philox_key, trial_stream
from .sedf import SEResult, SEScenario

PRECODERS = ("du", "df")


@dataclass(frozen=True)
class McConfig:
    trials: int = 20000
    seed: int = 0
    instants: tuple | None = None
    batch_size: int = 256
    groups: int = 20
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.groups < 2:
            raise ValueError("at least two groups are needed for standard errors")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True, eq=False)
class TrialDraws:
    """Raw random inputs of a batch of trials."""

    h: np.ndarray  # (B, L, K, N)
    phi_ue: np.ndarray  # (B, K, tau_c + 1)
    phi_ap: np.ndarray  # (B, L, tau_c + 1)
    noise: np.ndarray  # (B, L, tau_p, N) unit-variance CN


class _Prepared:
    """Per-scenario constants of the sampler."""

    def __init__(self, scenario: SEScenario):
        self.scenario = scenario
        st = scenario.stats
        self.L, self.K, self.N = st.L, st.K, st.N
        self.tau_p = st.plan.tau_p
        self.t = st.plan.t
        self.R_sqrt = sqrtm_psd(scenario.R)
        self.W = estimator_matrices(st, scenario.R)
        self.theta = scenario.delays.theta
        self.mu = scenario.terms.mu
        self.sqrt_p = np.sqrt(st.pilot_powers)
        self.sigma = math.sqrt(st.sigma2)
        self.onehot = (self.t[:, None] == np.arange(1, self.tau_p + 1)[None, :]).astype(float)  # (K, tau_p)

    @property
    def _sizes(self) -> tuple[int, int, int]:
        L, K, N = self.L, self.K, self.N
        return 2 * L * K * N, 2 * L * self.tau_p * N, (K + L) * self.scenario.tau_c

    def _raw(self, rng: np.random.Generator, z: np.ndarray, init: np.ndarray) -> None:
        """Fill one trial's raw draws in a fixed order: one normal block, then initial phases."""
        rng.standard_normal(out=z)
        init[:] = rng.uniform(0.0, 2 * np.pi, size=init.shape[0])

    def _transform(self, z: np.ndarray, init: np.ndarray) -> TrialDraws:
        """Map raw draws of a batch to channels, pilot noise and phase walks."""
        B = z.shape[0]
        L, K, N, tau_c = self.L, self.K, self.N, self.scenario.tau_c
        n_h, n_w, _ = self._sizes
        ph = self.scenario.phase
        e = z[:, :n_h].reshape(B, 2, L, K, N)
        w = z[:, n_h : n_h + n_w].reshape(B, 2, L, self.tau_p, N)
        steps = z[:, n_h + n_w :].reshape(B, K + L, tau_c)
        scale = np.concatenate([np.full(K, math.sqrt(ph.sigma2_ue)), np.full(L, math.sqrt(ph.sigma2_ap))])
        walk = np.empty((B, K + L, tau_c + 1))
        walk[:, :, 0] = init
        walk[:, :, 1:] = init[:, :, None] + np.cumsum(scale[None, :, None] * steps, axis=2)
        h = np.einsum("lkab,xlkb->xlka", self.R_sqrt, (e[:, 0] + 1j * e[:, 1]) * math.sqrt(0.5))
        noise = (w[:, 0] + 1j * w[:, 1]) * math.sqrt(0.5)
        return TrialDraws(h, walk[:, :K], walk[:, K:], noise)

    def draw(self, rng: np.random.Generator) -> tuple:
        """Draws of one trial: channel, UE walks, AP walks, unit pilot noise."""
        z = np.empty((1, sum(self._sizes)))
        init = np.empty((1, self.K + self.L))
        self._raw(rng, z[0], init[0])
        d = self._transform(z, init)
        return d.h[0], d.phi_ue[0], d.phi_ap[0], d.noise[0]

    def draw_batch(self, seed: int, trials: range) -> TrialDraws:
        key = _philox_key(seed, MONTE_CARLO)
        z = np.empty((len(trials), sum(self._sizes)))
        init = np.empty((len(trials), self.K + self.L))
        for j, t in enumerate(trials):
            self._raw(trial_stream(seed, t, MONTE_CARLO, key=key), z[j], init[j])
        return self._transform(z, init)

    def inner_products(self, d: TrialDraws, instants: np.ndarray, precoder: str):
        """Return (G, c, hhat) with g_kl^H[n] sqrt(mu_l) v_il = c[b, l, k, m] * G[b, l, k, i]."""
        kidx = np.arange(self.K)
        # oscillator factor at each UE's pilot instant, (B, L, K)
        vt_pilot = np.exp(1j * (d.phi_ap[:, :, self.t] + d.phi_ue[:, kidx, self.t][:, None, :]))
        g_pilot = (self.theta[None] * vt_pilot)[..., None] * d.h
        z = np.einsum("k,kt,blkx->bltx", self.sqrt_p, self.onehot, g_pilot) + self.sigma * d.noise
        zk = z[:, :, self.t - 1, :]  # (B, L, K, N)
        hhat = np.conj(self.theta)[None, :, :, None] * np.einsum("lkxy,blky->blkx", self.W, zk)
        v = self.theta[None, :, :, None] * hhat if precoder == "du" else hhat
        G = np.conj(d.h) @ np.swapaxes(v, -1, -2)  # (B, L, K, K)
        vt_data = np.exp(1j * (d.phi_ap[:, :, None, instants] + d.phi_ue[:, None, :, instants]))  # (B, L, K, M)
        c = np.conj(self.theta[None, :, :, None] * vt_data) * np.sqrt(self.mu)[None, :, None, None]
        return G, c, hhat


@dataclass(frozen=True, eq=False)
class Realization:
    inner: np.ndarray  # (K, K, L, M): g_kl^H[n] sqrt(mu_l) v_il
    h: np.ndarray  # (L, K, N)
    hhat: np.ndarray  # (L, K, N)
    instants: np.ndarray


def simulate_realization(scenario: SEScenario, rng: np.random.Generator, instants=None, precoder: str = "du") -> Realization:
    """One realization of every per-AP inner product used by the bound."""
    prep = _Prepared(scenario)
    n = scenario.instants if instants is None else np.asarray(instants, dtype=int)
    h, pu, pa, w = prep.draw(rng)
    d = TrialDraws(h[None], pu[None], pa[None], w[None])
    G, c, hhat = prep.inner_products(d, n, precoder)
    inner = np.einsum("lkm,lki->kilm", c[0], G[0])
    return Realization(inner=inner, h=h, hhat=hhat[0], instants=n)


@dataclass(frozen=True, eq=False)
class McSamples:
    """Per-group sums of the per-trial moments, one entry per precoder."""

    ds: dict  # precoder -> (G, K, L, M) complex
    coh: dict  # precoder -> (G, K, K, M)
    ups1: dict  # precoder -> (G, K, K, L)
    counts: np.ndarray  # (G,) trials per group
    instants: np.ndarray
    p_d: float
    sigma2_d: float
    scenario_hash: str

    @property
    def trials(self) -> int:
        return int(self.counts.sum())


def _group_sums(prep: _Prepared, seed: int, trials: range, instants, precoders, batch_size: int, backend):
    K, L, M = prep.K, prep.L, len(instants)
    out = {}
    for pc in precoders:
        out[pc] = (np.zeros((K, L, M), complex), np.zeros((K, K, M)), np.zeros((K, K, L)))
    for start in range(trials.start, trials.stop, batch_size):
        chunk = range(start, min(start + batch_size, trials.stop))
        d = prep.draw_batch(seed, chunk)
        for pc in precoders:
            G, c, _ = prep.inner_products(d, instants, pc)
            kernels.accumulate_inner(G, c, prep.mu, *out[pc], backend=backend)
    return out


def run_monte_carlo(scenario: SEScenario, cfg: McConfig, precoders=PRECODERS, backend: str | None = None) -> McSamples:
    """Accumulate moment sums over ``cfg.trials`` realizations.

    Trials are split into ``cfg.groups`` contiguous groups (used for jackknife
    standard errors); groups may run on worker threads but are reduced in
    group order, so results depend only on the seed.
    """
    prep = _Prepared(scenario)
    n = scenario.instants if cfg.instants is None else np.asarray(cfg.instants, dtype=int)
    if np.any(n < scenario.lam) or np.any(n > scenario.tau_c):
        raise ValueError("Monte Carlo instants outside [lambda, tau_c]")
    G = min(cfg.groups, cfg.trials)
    if G < 2:
        raise ValueError("need at least two trials")
    edges = np.linspace(0, cfg.trials, G + 1).astype(int)
    ranges = [range(edges[g], edges[g + 1]) for g in range(G)]

    def work(r):
        return _group_sums(prep, cfg.seed, r, n, precoders, cfg.batch_size, backend)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(work, ranges))
    else:
        parts = [work(r) for r in ranges]

    ds, coh, ups1 = {}, {}, {}
    for pc in precoders:
        ds[pc] = np.stack([p[pc][0] for p in parts])
        coh[pc] = np.stack([p[pc][1] for p in parts])
        ups1[pc] = np.stack([p[pc][2] for p in parts])
    return McSamples(
        ds=ds,
        coh=coh,
        ups1=ups1,
        counts=np.diff(edges),
        instants=n,
        p_d=scenario.p_d,
        sigma2_d=scenario.sigma2_d,
        scenario_hash=scenario.fingerprint(),
    )


@dataclass(frozen=True, eq=False)
class McEstimate:
    ds_mean: np.ndarray  # (K, L, M) complex
    int_mean: np.ndarray  # (K, K, M): coherent INT_i, or per-UE sum of per-AP powers for non-coherent
    sinr: np.ndarray  # (K, M)
    sinr_stderr: np.ndarray  # (K, M)
    ds_stderr: np.ndarray  # (K, L, M)
    int_stderr: np.ndarray  # (K, K, M)
    ups1_mean: np.ndarray  # (K, K, L)
    flagged: np.ndarray  # (K, M) bool; denominator not positive
    instants: np.ndarray
    trials: int
    transmission: str
    precoder: str
    scenario_hash: str


def _sinr_from_sums(ds, coh, ups1, T, p_d, s2, transmission):
    dsm = ds / T
    if transmission == "coherent":
        a = dsm.sum(axis=1)  # (K, M)
        num = p_d * (a.real**2 + a.imag**2)
        den = p_d * (coh / T).sum(axis=1) - num + s2
        intm = coh / T
    else:
        num = p_d * (dsm.real**2 + dsm.imag**2).sum(axis=1)
        per_ue = (ups1 / T).sum(axis=2)  # (K, I)
        den = p_d * per_ue.sum(axis=1)[:, None] - num + s2
        intm = np.repeat(per_ue[:, :, None], ds.shape[-1], axis=2)
    return num, den, dsm, intm


def estimate_sinr(samples: McSamples, transmission: str = "coherent", precoder: str = "du") -> McEstimate:
    """Sample-average SINR with delete-one-group jackknife standard errors."""
    if transmission not in ("coherent", "noncoherent"):
        raise ValueError(f"unknown transmission {transmission!r}")
    ds_g, coh_g, ups_g = samples.ds[precoder], samples.coh[precoder], samples.ups1[precoder]
    cnt = samples.counts
    T = cnt.sum()
    G = len(cnt)
    args = (samples.p_d, samples.sigma2_d, transmission)
    num, den, dsm, intm = _sinr_from_sums(ds_g.sum(0), coh_g.sum(0), ups_g.sum(0), T, *args)
    sinr = num / den
    flagged = den <= 0

    loo = []
    for g in range(G):
        n_, d_, _, _ = _sinr_from_sums(ds_g.sum(0) - ds_g[g], coh_g.sum(0) - coh_g[g], ups_g.sum(0) - ups_g[g], T - cnt[g], *args)
        loo.append(n_ / d_)
    loo = np.array(loo)
    se = np.sqrt((G - 1) / G * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    se = np.where(flagged, np.inf, se)

    gm_ds = ds_g / cnt[:, None, None, None]
    if transmission == "coherent":
        gm_int = coh_g / cnt[:, None, None, None]
    else:
        per = ups_g.sum(axis=3) / cnt[:, None, None]
        gm_int = np.repeat(per[..., None], ds_g.shape[-1], axis=3)
    return McEstimate(
        ds_mean=dsm,
        int_mean=intm,
        sinr=sinr,
        sinr_stderr=se,
        ds_stderr=gm_ds.std(axis=0, ddof=1) / math.sqrt(G),
        int_stderr=gm_int.std(axis=0, ddof=1) / math.sqrt(G),
        ups1_mean=ups_g.sum(0) / T,
        flagged=flagged,
        instants=samples.instants,
        trials=int(T),
        transmission=transmission,
        precoder=precoder,
        scenario_hash=samples.scenario_hash,
    )


@dataclass(frozen=True, eq=False)
class ValidationReport:
    entries: list = field(default_factory=list)
    tol_rel: float = 0.03

    @property
    def n_fail(self) -> int:
        return sum(not e["pass"] for e in self.entries)

    @property
    def n_inconclusive(self) -> int:
        return sum(e.get("inconclusive", False) for e in self.entries)

    @property
    def passed(self) -> bool:
        return self.n_fail == 0

    @property
    def status(self) -> str:
        if self.n_fail:
            return "fail"
        if self.n_inconclusive:
            return "inconclusive"
        return "pass"

    @property
    def max_rel_err(self) -> float:
        return max((e["rel_err"] for e in self.entries), default=0.0)

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(entries=self.entries + other.entries, tol_rel=self.tol_rel)

    def to_json(self, **kw) -> str:
        return json.dumps(
            {"status": self.status, "tol_rel": self.tol_rel, "max_rel_err": self.max_rel_err, "entries": self.entries},
            **kw,
        )


def validate(
    closed: SEResult,
    mc: McEstimate,
    tol_rel: float = 0.03,
    mode: str | None = None,
    max_rel_stderr: float = 0.05,
) -> ValidationReport:
    """Compare closed-form SINR with the Monte Carlo estimate entry by entry.

    An entry fails when |closed - mc| > tol_rel * closed + 3 * stderr. It is
    marked inconclusive when the estimate is flagged (nonpositive denominator)
    or its relative standard error exceeds ``max_rel_stderr``, i.e. the run is
    too short to resolve the tolerance.
    """
    if closed.scenario_hash and mc.scenario_hash and closed.scenario_hash != mc.scenario_hash:
        raise ValueError("closed-form result and Monte Carlo estimate come from different scenarios")
    pos = {int(n): j for j, n in enumerate(closed.instants)}
    missing = [int(n) for n in mc.instants if int(n) not in pos]
    if missing:
        raise ValueError(f"closed-form result lacks instants {missing}")
    mode = mode or f"{closed.transmission}-{closed.precoder}"
    entries = []
    for k in range(mc.sinr.shape[0]):
        for m, n in enumerate(mc.instants):
            cval = float(closed.sinr[k, pos[int(n)]])
            mval = float(mc.sinr[k, m])
            se = float(mc.sinr_stderr[k, m])
            err = abs(cval - mval)
            rel = err / abs(cval) if cval != 0 else math.inf
            ok = bool(err <= tol_rel * abs(cval) + 3.0 * se)
            inconclusive = bool(mc.flagged[k, m] or se > max_rel_stderr * abs(cval))
            entries.append(
                {
                    "ue": k,
                    "instant": int(n),
                    "mode": mode,
                    "closed": cval,
                    "mc": mval,
                    "stderr": se,
                    "rel_err": rel,
                    "pass": ok,
                    "inconclusive": inconclusive,
                }
            )
    return ValidationReport(entries=entries, tol_rel=tol_rel)


def upsilon3_empirical(phase: PhaseParams, gap: int, trials: int, seed: int = 0) -> complex:
    """Sample mean of Theta_kl Theta*_km over ``gap`` instants for two distinct APs and one UE."""
    rng = np.random.default_rng(seed)
    s_ue = rng.standard_normal((trials, gap)).sum(axis=1) * math.sqrt(phase.sigma2_ue)
    s_l = rng.standard_normal((trials, gap)).sum(axis=1) * math.sqrt(phase.sigma2_ap)
    s_m = rng.standard_normal((trials, gap)).sum(axis=1) * math.sqrt(phase.sigma2_ap)
    return complex(np.mean(np.exp(1j * (s_ue + s_l)) * np.exp(-1j * (s_ue + s_m))))
