"""Hot kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it imports; set ``CFASYNC_PURE_PYTHON=1``
to force the NumPy implementations.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CFASYNC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def pair_traces(Q, R, backend: str | None = None):
    impl = _select(backend)
    return impl.pair_traces(np.ascontiguousarray(Q, dtype=complex), np.ascontiguousarray(R, dtype=complex))


def accumulate_inner(G, c, mu, ds, coh, ups1, backend: str | None = None):
    impl = _select(backend)
    impl.accumulate_inner(
        np.ascontiguousarray(G, dtype=complex),
        np.ascontiguousarray(c, dtype=complex),
        np.ascontiguousarray(mu, dtype=float),
        ds,
        coh,
        ups1,
    )


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {backend!r}")


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        out.append("cython")
    except ImportError:
        pass
    return out
