"""Independent reference computations used only by the tests.

Nothing here calls into the library's singular value code, so agreement
with it is evidence rather than a tautology.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def charpoly(m):
    """Characteristic polynomial coefficients by the Faddeev-LeVerrier recursion.

    Returns the coefficients of ``det(x I - m)`` from the leading one down.
    """
    n = m.rows
    coeffs = [mp.mpf(1)]
    acc = mp.zeros(n, n)
    eye = mp.eye(n)
    for k in range(1, n + 1):
        acc = m * acc + coeffs[-1] * eye
        c = -mp.fsum((m * acc)[i, i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs


def kappa_oracle(g):
    """Half log-eigenvalues of ``g^T g`` from the roots of its characteristic polynomial."""
    a = mp.matrix(np.asarray(g, dtype=float).tolist())
    sym = a.T * a
    roots = mp.polyroots(charpoly(sym), maxsteps=400, extraprec=200)
    vals = sorted((float(0.5 * mp.log(mp.re(r))) for r in roots), reverse=True)
    return np.array(vals)


def simplex_distance(x, y, vertices):
    """Hilbert distance in a simplex from barycentric-coordinate ratios."""
    verts = np.asarray(vertices, dtype=float)
    d = verts.shape[1]
    lift = np.vstack([verts.T, np.ones(len(verts))])
    bx = np.linalg.solve(lift, np.append(x, 1.0))
    by = np.linalg.solve(lift, np.append(y, 1.0))
    r = np.log(bx / by)
    return 0.5 * float(r.max() - r.min()) if d else 0.0


def disk_distance(x, y):
    """Klein-model distance on the unit disk via the hyperboloid inner product."""
    x = np.append(np.asarray(x, dtype=float), 1.0)
    y = np.append(np.asarray(y, dtype=float), 1.0)

    def form(u, v):
        return u[-1] * v[-1] - u[:-1] @ v[:-1]

    c = form(x, y) / np.sqrt(form(x, x) * form(y, y))
    return float(np.arccosh(max(c, 1.0)))


def grid_cone_distance(x, tip, frame, span=6.0, steps=200):
    """Brute-force minimum of ``d_X(x, tip F exp(H))`` over a grid of the closed dominant cone in SL(3).

    ``H`` runs over ``u, v`` in ``[0, span]`` with ``u = H1 - H2`` and ``v = H2 - H3``.
    """
    u, v = np.meshgrid(np.linspace(0.0, span, steps), np.linspace(0.0, span, steps))
    u, v = u.ravel(), v.ravel()
    H = np.column_stack([(2 * u + v) / 3, (v - u) / 3, -(u + 2 * v) / 3])
    rel = np.linalg.inv(np.asarray(tip, dtype=float)) @ np.asarray(x, dtype=float)
    # exp(-H) F^T tip^-1 x for every grid point at once
    pts = np.exp(-H)[:, :, None] * (np.asarray(frame).T @ rel)[None]
    s = np.linalg.svd(pts, compute_uv=False)
    return float(np.linalg.norm(np.log(s), axis=1).min())
