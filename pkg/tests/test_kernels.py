import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfasync import kernels
from cfasync.kernels import _pykernels

needs_ext = pytest.mark.skipif("cython" not in kernels.available_backends(), reason="compiled kernels not built")


def _inputs(rng, B, L, K, M):
    G = rng.standard_normal((B, L, K, K)) + 1j * rng.standard_normal((B, L, K, K))
    c = rng.standard_normal((B, L, K, M)) + 1j * rng.standard_normal((B, L, K, M))
    mu = rng.uniform(0.1, 2.0, L)
    return G, c, mu


def _reference(G, c, mu):
    B, L, K, _ = G.shape
    M = c.shape[-1]
    ds = np.zeros((K, L, M), complex)
    coh = np.zeros((K, K, M))
    ups = np.zeros((K, K, L))
    for b in range(B):
        for k in range(K):
            for m in range(M):
                ds[k, :, m] += c[b, :, k, m] * G[b, :, k, k]
                for i in range(K):
                    coh[k, i, m] += abs(np.sum(c[b, :, k, m] * G[b, :, k, i])) ** 2
            for i in range(K):
                ups[k, i, :] += mu * np.abs(G[b, :, k, i]) ** 2
    return ds, coh, ups


def _run(backend, G, c, mu):
    K, L, M = G.shape[2], G.shape[1], c.shape[-1]
    out = (np.zeros((K, L, M), complex), np.zeros((K, K, M)), np.zeros((K, K, L)))
    kernels.accumulate_inner(G, c, mu, *out, backend=backend)
    return out


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_accumulate_matches_loop_reference(backend):
    G, c, mu = _inputs(np.random.default_rng(0), 3, 4, 3, 2)
    for got, ref in zip(_run(backend, G, c, mu), _reference(G, c, mu)):
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**31))
def test_backends_agree(B, L, K, M, seed):
    G, c, mu = _inputs(np.random.default_rng(seed), B, L, K, M)
    for a, b in zip(_run("python", G, c, mu), _run("cython", G, c, mu)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13)


@needs_ext
def test_pair_traces_backends_agree():
    rng = np.random.default_rng(1)
    Q = rng.standard_normal((5, 4, 3, 3)) + 1j * rng.standard_normal((5, 4, 3, 3))
    R = rng.standard_normal((5, 4, 3, 3)) + 1j * rng.standard_normal((5, 4, 3, 3))
    assert np.allclose(kernels.pair_traces(Q, R, "python"), kernels.pair_traces(Q, R, "cython"), rtol=1e-12)


def test_pair_traces_definition():
    rng = np.random.default_rng(2)
    Q = rng.standard_normal((2, 3, 2, 2)) + 1j * rng.standard_normal((2, 3, 2, 2))
    R = rng.standard_normal((2, 3, 2, 2)) + 1j * rng.standard_normal((2, 3, 2, 2))
    out = kernels.pair_traces(Q, R)
    for l in range(2):
        for i in range(3):
            for k in range(3):
                assert np.isclose(out[l, i, k], np.trace(Q[l, i] @ R[l, k]).real)


def test_accumulation_is_additive_across_calls():
    G, c, mu = _inputs(np.random.default_rng(3), 4, 3, 2, 2)
    whole = _run(None, G, c, mu)
    K, L, M = 2, 3, 2
    parts = (np.zeros((K, L, M), complex), np.zeros((K, K, M)), np.zeros((K, K, L)))
    kernels.accumulate_inner(G[:2], c[:2], mu, *parts)
    kernels.accumulate_inner(G[2:], c[2:], mu, *parts)
    for a, b in zip(whole, parts):
        assert np.allclose(a, b, rtol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.pair_traces(np.zeros((1, 1, 1, 1)), np.zeros((1, 1, 1, 1)), backend="fortran")


def test_env_forces_fallback():
    env = dict(os.environ, CFASYNC_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import cfasync.kernels as k; print(k.BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "python"


def test_fallback_module_is_importable_standalone():
    assert callable(_pykernels.accumulate_inner) and callable(_pykernels.pair_traces)
