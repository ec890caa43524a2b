"""Pure-Python (numpy) implementation of the batched Jacobi kernel.

Used when the compiled extension is unavailable. The rotation schedule and
stopping rule match ``_kernels.pyx`` so the two backends agree to rounding.
"""

import numpy as np

LN2 = 0.6931471805599453
TINY = 1e-280


def jacobi_svd_batch(mats, tol=1e-14, max_sweeps=60):
    """Batched one-sided Jacobi SVD of square matrices.

    Parameters
    ----------
    mats : ndarray, shape (n, d, d)
        Input matrices. They are copied, never modified.
    tol : float
        Stop once every normalized column inner product is below ``tol``.
    max_sweeps : int
        Sweep cap.

    Returns
    -------
    left, sing_log, right, ok
        Same layout as the compiled kernel.
    """
    src = np.array(mats, dtype=np.float64, copy=True)
    n, d, _ = src.shape
    big = np.abs(src).reshape(n, -1).max(axis=1)
    _, exponent = np.frexp(big)
    a = np.ldexp(src, -exponent[:, None, None])
    v = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    active = np.ones(n, dtype=bool)
    for _ in range(max_sweeps):
        if not active.any():
            break
        off = np.zeros(n)
        for i in range(d - 1):
            for j in range(i + 1, d):
                ai = a[:, :, i]
                aj = a[:, :, j]
                alpha = np.einsum("nr,nr->n", ai, ai)
                beta = np.einsum("nr,nr->n", aj, aj)
                gamma = np.einsum("nr,nr->n", ai, aj)
                # columns at the underflow edge carry no usable direction
                valid = (gamma != 0.0) & (alpha >= TINY) & (beta >= TINY)
                nrm = np.sqrt(alpha) * np.sqrt(beta)
                ratio = np.zeros(n)
                ratio[valid] = np.abs(gamma[valid]) / nrm[valid]
                off = np.maximum(off, ratio)
                rot = valid & (ratio > tol) & active
                if not rot.any():
                    continue
                g = gamma[rot]
                zeta = (beta[rot] - alpha[rot]) / (2.0 * g)
                sign = np.where(zeta >= 0, 1.0, -1.0)
                t = sign / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for arr in (a, v):
                    xi = arr[rot, :, i].copy()
                    xj = arr[rot, :, j].copy()
                    arr[rot, :, i] = c[:, None] * xi - s[:, None] * xj
                    arr[rot, :, j] = s[:, None] * xi + c[:, None] * xj
        active &= off > tol
    ok = ~active
    norms = np.sqrt(np.einsum("nrj,nrj->nj", a, a))
    order = np.argsort(-norms, axis=1, kind="stable")
    norms = np.take_along_axis(norms, order, axis=1)
    a = np.take_along_axis(a, order[:, None, :], axis=2)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        sing_log = np.log(norms) + exponent[:, None] * LN2
        u = np.where(norms[:, None, :] > 0, a / norms[:, None, :], 0.0)
    return u, sing_log, v, ok
