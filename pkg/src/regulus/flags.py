"""Partial flags attached to group elements.

``u_theta(g)`` collects the spans of the leading left singular vectors of
``g`` at the indices of ``theta``. The module also provides the flag metric
(maximum of Grassmannian sine distances), a transversality test with a
numerical margin, the singular-value gap contraction estimate, and a
detector for convergence of flag sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from regulus.cartan import Theta, kappa, simple_root
from regulus.errors import Divergent, NoGap, ThetaMismatch, TooShort
from regulus.matrixcore import (TWO_SIDED_SPREAD, GroupElement, Subspace,
                                as_element, grassmann_distance, relative,
                                svd_batch)

GAP_FLOOR = 1e-8
TRANSVERSE_TOL = 1e-10
NEST_TOL = 1e-8
# successive flag distances at or below this are treated as settled
SETTLED_FLOOR = 1e-13


@dataclass(frozen=True)
class Flag:
    """Nested subspaces with dimensions ``theta.indices``."""

    theta: Theta
    parts: tuple

    @property
    def dim(self) -> int:
        return self.theta.d

    def part(self, k: int) -> Subspace:
        """The constituent subspace of dimension ``k``."""
        return self.parts[self.theta.indices.index(k)]

    def nesting_defect(self) -> float:
        """Largest ``||(I - P_next) frame||`` over consecutive parts."""
        worst = 0.0
        for small, big in zip(self.parts, self.parts[1:]):
            resid = small.frame - big.frame @ (big.frame.T @ small.frame)
            worst = max(worst, float(np.abs(resid).max()))
        return worst

    def frames(self) -> list:
        return [p.frame for p in self.parts]


@dataclass(frozen=True)
class Transversality:
    """Outcome of :func:`transverse`; truthy when transverse."""

    transverse: bool
    margin: float

    def __bool__(self) -> bool:
        return self.transverse


def _left_frames(g: GroupElement):
    """Left singular frames of ``g`` and, for wide spectra, of ``g^-T``."""
    u, s, _ = svd_batch(g.matrix[None])
    u, s = u[0], s[0]
    if s[0] - s[-1] <= TWO_SIDED_SPREAD or not g.inverse_trusted:
        return u, s, None
    ui, si, _ = svd_batch(g.inverse_matrix().T[None])
    return u, s, (ui[0], si[0])


def _leading_span(u, v, inv, k: int, d: int) -> np.ndarray:
    """Orthonormal frame of the top-``k`` left singular directions.

    ``v`` is the (two-sided) Cartan projection used to pick the accurate side.
    """
    if inv is None:
        return u[:, :k].copy()
    # pick the side on which the requested gap sits nearer the top
    cost_direct = v[0] - v[k - 1]
    cost_inv = v[k] - v[d - 1]
    if cost_direct <= cost_inv:
        return u[:, :k].copy()
    ui = inv[0]
    # span of the top-k of g equals the complement of the top-(d-k) of g^-T
    return ui[:, d - k:][:, ::-1].copy()


def u_theta(g, theta: Theta, gap_floor: float = GAP_FLOOR) -> Flag:
    """Flag spanned by the leading left singular vectors of ``g``.

    Parameters
    ----------
    g : GroupElement or array_like
    theta : Theta
    gap_floor : float
        Minimal simple root required at each index of ``theta``.

    Returns
    -------
    Flag

    Raises
    ------
    NoGap
        If ``alpha_k(kappa(g)) <= gap_floor`` for some ``k`` in ``theta``.
    """
    g = as_element(g)
    d = g.dim
    if theta.d != d:
        raise ThetaMismatch(f"theta for d={theta.d} used with d={d}")
    v = kappa(g)
    for k in theta.indices:
        gap = simple_root(k, v)
        if gap <= gap_floor:
            raise NoGap(k, float(gap))
    u, s, inv = _left_frames(g)
    parts = tuple(Subspace(_leading_span(u, v.coords, inv, k, d)) for k in theta.indices)
    return Flag(theta, parts)


def flag_from_frame(frame, theta: Theta) -> Flag:
    """Flag whose parts are spans of the leading columns of an orthogonal ``frame``."""
    f = np.asarray(frame, dtype=float)
    return Flag(theta, tuple(Subspace(f[:, :k].copy()) for k in theta.indices))


def _check_theta(f1: Flag, f2: Flag) -> None:
    if f1.theta != f2.theta:
        raise ThetaMismatch(f"{f1.theta.indices} vs {f2.theta.indices}")


def flag_distance(f1: Flag, f2: Flag) -> float:
    """Maximum over parts of the sine of the largest principal angle."""
    _check_theta(f1, f2)
    return max(grassmann_distance(a, b) for a, b in zip(f1.parts, f2.parts))


def transverse(f1: Flag, f2: Flag, tol: float = TRANSVERSE_TOL) -> Transversality:
    """Test whether ``part_k(f1) + part_{d-k}(f2) = R^d`` for every ``k`` in theta.

    The margin is the smallest singular value of the concatenated frames,
    minimized over ``k``; the flags count as transverse when it exceeds ``tol``.
    """
    _check_theta(f1, f2)
    d = f1.dim
    stacks = [np.hstack([f1.part(k).frame, f2.part(d - k).frame]) for k in f1.theta.indices]
    _, s, _ = svd_batch(np.stack(stacks))
    margin = float(np.exp(s[:, -1]).min()) if np.all(np.isfinite(s)) else 0.0
    return Transversality(margin > tol, margin)


def gap_ratio_bound(a, b, k: int):
    """Both sides of the contraction estimate for ``U_k``.

    Parameters
    ----------
    a, b : GroupElement
        ``a`` and ``a b`` must both have a gap of index ``k``.
    k : int

    Returns
    -------
    lhs : float
        Grassmannian distance between ``U_k(a)`` and ``U_k(a b)``.
    rhs : float
        ``(s_1/s_d)(b^-1) * (s_{k+1}/s_k)(a)``.
    """
    a = as_element(a)
    b = as_element(b)
    theta_k = _single_index_theta(k, a.dim)
    ab = a @ b
    fa = u_theta(a, theta_k)
    fab = u_theta(ab, theta_k)
    lhs = grassmann_distance(fa.part(k), fab.part(k))
    kb = kappa(b.inv())
    rhs = float(np.exp(kb[0] - kb[-1]) * np.exp(-simple_root(k, kappa(a))))
    return lhs, rhs


def _single_index_theta(k: int, d: int) -> Theta:
    return Theta((k, d - k), d)


# ---------------------------------------------------------------------------
# convergence of flag sequences

@dataclass(frozen=True)
class FlagLimit:
    """Detected limit flag with the envelope that certified it."""

    flag: Flag
    family: str
    rate: float
    tail_bound: float
    distances: tuple


def _fit_log_envelope(x: np.ndarray, logd: np.ndarray):
    """Least-squares slope of ``logd`` on ``x`` and the upper-envelope offset."""
    xm = x.mean()
    denom = ((x - xm) ** 2).sum()
    slope = float(((x - xm) * (logd - logd.mean())).sum() / denom) if denom > 0 else 0.0
    offset = float((logd - slope * x).max())
    resid = logd - (logd.mean() + slope * (x - xm))
    return slope, offset, float(resid.max())


def _tail_sum(family: str, slope: float, offset: float, j_last: float) -> float:
    """Upper bound on the sum of the envelope beyond ``j_last``."""
    if family == "geometric":
        r = np.exp(slope)
        return float(np.exp(offset + slope * (j_last + 1)) / (1 - r))
    if family == "stretched":
        # sum_{j > J} exp(offset + slope sqrt(j)) <= integral from J
        c = -slope
        root = np.sqrt(j_last)
        return float(np.exp(offset) * 2 * (root / c + 1 / c ** 2) * np.exp(-c * root))
    p = -slope
    return float(np.exp(offset) * j_last ** (1 - p) / (p - 1))


def detect_flag_limit(seq: Sequence, theta: Theta, tail: int,
                      max_log_residual: float = np.log(100.0)) -> FlagLimit:
    """Decide whether ``U_theta(g_n)`` settles along the tail of ``seq``.

    Successive distances over the last ``tail`` elements must sit below a
    decaying summable envelope: geometric ``A r^n``, stretched exponential
    ``A exp(-c sqrt(n))``, or polynomial ``A n^-p`` with ``p > 1``. Distances
    at the rounding floor count as settled.

    Parameters
    ----------
    seq : sequence of GroupElement
    theta : Theta
    tail : int
        Number of trailing elements examined (at least 2).
    max_log_residual : float
        Largest allowed excess of a log-distance over its fitted trend.

    Returns
    -------
    FlagLimit
        ``flag`` is ``u_theta`` of the last element.

    Raises
    ------
    NoGap
        Forwarded with the offending sequence position.
    Divergent
        When no envelope fits; ``index`` is the worst position.
    """
    n = len(seq)
    if tail < 2 or n < tail:
        raise TooShort(f"need len(seq) >= tail >= 2, got {n}, {tail}")
    start = n - tail
    flags = []
    for pos in range(start, n):
        try:
            flags.append(u_theta(seq[pos], theta))
        except NoGap as exc:
            raise NoGap(exc.k, exc.value, position=pos) from None
    dists = np.array([flag_distance(flags[i], flags[i + 1]) for i in range(tail - 1)])
    positions = np.arange(start + 1, n, dtype=float)
    last = flags[-1]
    if dists.max() <= SETTLED_FLOOR:
        return FlagLimit(last, "settled", 0.0, float(dists.max()), tuple(dists))
    live = dists > SETTLED_FLOOR
    half = len(dists) // 2
    if not live[half:].any():
        return FlagLimit(last, "settled", 0.0, SETTLED_FLOOR, tuple(dists))
    # fit on the stretch before the distances hit the rounding floor
    cut = int(np.flatnonzero(live)[-1]) + 1
    x = positions[:cut]
    logd = np.log(np.maximum(dists[:cut], SETTLED_FLOOR))
    settled_after = cut < len(dists)
    best = None
    if cut >= 2:
        for family, basis in (("geometric", x), ("stretched", np.sqrt(x)),
                              ("polynomial", np.log(x))):
            slope, offset, resid = _fit_log_envelope(basis, logd)
            if resid > max_log_residual:
                continue
            span = basis[-1] - basis[0]
            if family == "polynomial":
                ok = slope < -1.0
            else:
                ok = slope < 0 and -slope * span >= 1.0
            if not ok:
                continue
            bound = 0.0 if settled_after else _tail_sum(family, slope, offset, x[-1])
            if best is None or bound < best[3]:
                best = (family, slope, offset, bound)
    if best is None:
        if settled_after and cut < half:
            return FlagLimit(last, "settled", 0.0, SETTLED_FLOOR, tuple(dists))
        worst = int(np.argmax(dists[half:])) + half
        raise Divergent(int(positions[worst]),
                        f"successive flag distance {dists[worst]:.3e} not under a summable envelope")
    family, slope, _, bound = best
    return FlagLimit(last, family, float(slope), float(bound), tuple(dists))
