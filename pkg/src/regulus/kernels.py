"""Backend selection for the hot numerical kernels.

The compiled extension is preferred; the numpy implementation is used when
the extension is missing or when ``REGULUS_BACKEND=python`` is set.
"""

import os

from regulus import _fallback

BACKEND = "python"
_compiled = None

if os.environ.get("REGULUS_BACKEND", "").lower() != "python":
    try:
        from regulus import _kernels as _compiled
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None


def jacobi_svd_batch(mats, tol=1e-14, max_sweeps=60, backend=None):
    """Dispatch the batched Jacobi SVD to the selected backend.

    Parameters
    ----------
    mats : ndarray, shape (n, d, d)
    tol : float
    max_sweeps : int
    backend : {"cython", "python"}, optional
        Override the import-time choice (used by the benchmark and tests).
    """
    which = backend or BACKEND
    if which == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled.jacobi_svd_batch(mats, tol, max_sweeps)
    return _fallback.jacobi_svd_batch(mats, tol, max_sweeps)


def compiled_available():
    """Return True when the Cython extension imported successfully."""
    return _compiled is not None
