"""Reference sequences in SL(3) with known classifier behaviour.

Every element carries an exact inverse, so the two-sided Cartan projections
used by the classifiers stay accurate far out along each sequence.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from regulus.matrixcore import GroupElement

# unit vectors in the diagonal Cartan subalgebra of sl(3)
REGULAR_DIRECTION = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
WALL_DIRECTION = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)
DRIFT_DIRECTION = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)


def diagonal_element(v) -> GroupElement:
    """``exp(diag(v))`` with its exact inverse."""
    v = np.asarray(v, dtype=float)
    return GroupElement(np.diag(np.exp(v)), inverse=np.diag(np.exp(-v)))


def rotation(angle: float, i: int, j: int, d: int = 3) -> np.ndarray:
    r = np.eye(d)
    c, s = np.cos(angle), np.sin(angle)
    r[i, i] = r[j, j] = c
    r[i, j] = -s
    r[j, i] = s
    return r


def flat_ray(n: int, direction=REGULAR_DIRECTION) -> list:
    """``exp(k H)`` for ``k = 0..n-1``."""
    h = np.asarray(direction, dtype=float)
    return [diagonal_element(k * h) for k in range(n)]


def wall_ray(n: int) -> list:
    """Flat ray along a wall of the Weyl chamber (one simple root vanishes)."""
    return flat_ray(n, WALL_DIRECTION)


def detour_sequence(n: int, off_flat: float | None = None) -> list:
    """Regular flat ray with a detour of size ``sqrt(k)`` after each square index ``k``.

    The base points are ``exp(k H)``. After ``k = j^2`` an extra point
    ``exp(k H + j W)`` is inserted, with ``W`` a wall direction. The detours
    grow like the square root of the distance travelled and are sparse enough
    that the concatenated path stays quasi-geodesic.

    Parameters
    ----------
    n : int
        Number of elements returned.
    off_flat : float, optional
        If given, the detour is ``exp(k H) exp(j Z)`` with ``Z`` the wall
        direction conjugated by a rotation of this angle in the ``e1, e3``
        plane, so the detour leaves the flat.
    """
    h, w = REGULAR_DIRECTION, WALL_DIRECTION
    if off_flat is not None:
        q = rotation(off_flat, 0, 2)
        z = q @ np.diag(w) @ q.T
    out, k = [], 0
    while len(out) < n:
        out.append(diagonal_element(k * h))
        j = int(round(np.sqrt(k)))
        if k >= 1 and j * j == k and len(out) < n:
            if off_flat is None:
                out.append(diagonal_element(k * h + j * w))
            else:
                out.append(diagonal_element(k * h) @ GroupElement(expm(j * z), inverse=expm(-j * z)))
        k += 1
    return out


JORDAN = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])


def unipotent_powers(n: int, block=None) -> list:
    """``u^k`` for ``k = 0..n-1`` with integer-exact inverses.

    ``block`` defaults to the 3 x 3 Jordan block. Displacement grows only
    logarithmically while consecutive steps have constant length.
    """
    u = JORDAN if block is None else np.asarray(block, dtype=float)
    ui = np.round(np.linalg.inv(u))
    out, m, mi = [], np.eye(len(u)), np.eye(len(u))
    for _ in range(n):
        out.append(GroupElement(m.copy(), inverse=mi.copy()))
        m = m @ u
        mi = ui @ mi
    return out


def paired_jordan_block() -> np.ndarray:
    """Two 2 x 2 Jordan blocks in SL(4); powers have vanishing first and third gaps."""
    u = np.eye(4)
    u[0, 1] = u[2, 3] = 1.0
    return u


def wall_control(n: int) -> list:
    """Near-wall sequence whose Weyl cones drift.

    ``x_k = R_k exp(k W + log(1 + k) Y)`` with ``R_k`` a rotation by
    ``1/(k+1)`` in the ``e2, e3`` plane and ``Y`` transverse to the wall. The
    small gap ``log(1 + k)`` keeps the second subspace defined but lets it
    converge only polynomially, so cone distances grow linearly.
    """
    out = []
    for k in range(n):
        r = rotation(1.0 / (k + 1), 1, 2)
        v = k * WALL_DIRECTION + np.log1p(k) * DRIFT_DIRECTION
        out.append(GroupElement(r @ np.diag(np.exp(v)), inverse=np.diag(np.exp(-v)) @ r.T))
    return out


CONTROLS = {
    "flat": flat_ray,
    "detour": detour_sequence,
    "unipotent": unipotent_powers,
    "wall": wall_ray,
    "wall-drift": wall_control,
}
