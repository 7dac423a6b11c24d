import numpy as np
import pytest

from cfasync.chanest import assign_pilots, build_stats
from cfasync.expcli.config import default_config
from cfasync.expcli.experiments import make_scenario, make_scene
from cfasync.netmodel import CorrelationModel, correlation_matrix
from cfasync.phase import DelayPhases, PhaseParams
from cfasync.sedf import SEScenario


def desk_scenario(sigma2_db: float = -30.0, seed: int = 1) -> SEScenario:
    """The default validation scene (L=10, K=4, N=2, tau_p=2, tau_c=50)."""
    cfg = default_config("validate")
    cfg.seed = seed
    return make_scenario(cfg, make_scene(cfg, 0), cfg.phase_params(sigma2_db, sigma2_db))


def random_scenario(rng, L=4, K=3, N=2, tau_p=2, tau_c=30, s2=(1e-3, 2e-3), correlated=True, delays=None) -> SEScenario:
    """Small synthetic scenario with random gains, correlation and delay phases."""
    beta = 10 ** rng.uniform(-11, -8, size=(L, K))
    model = CorrelationModel("local_scattering", 12.0) if correlated else CorrelationModel()
    R = np.empty((L, K, N, N), dtype=complex)
    for l in range(L):
        for k in range(K):
            R[l, k] = correlation_matrix(beta[l, k], N, model, rng.uniform(-np.pi, np.pi))
    phase = PhaseParams(*s2)
    stats = build_stats(R, assign_pilots(K, tau_p), 0.2, 1e-13, phase)
    if delays is None:
        delays = DelayPhases.uniform_random(L, K, rng)
    return SEScenario(stats, R, delays, phase, 0.2, 1e-13, tau_c)


@pytest.fixture(scope="session")
def desk():
    return desk_scenario()
