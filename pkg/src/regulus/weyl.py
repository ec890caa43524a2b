"""Weyl cones, diamonds and distance-to-cone bounds.

A cone is described by a tip ``g`` and a partial flag ``zeta``. Its points
are ``g F exp(H) K`` where ``F`` is an orthogonal frame whose leading
columns span the parts of ``zeta`` and ``H`` is theta-dominant: every
coordinate of a block precedes (is at least) every coordinate of the next
block. Using one fixed frame gives a subset of the cone, so distances to it
are upper bounds on distances to the cone.

The distance ``d_X(x, g F exp(H))`` is convex along straight lines in ``H``
(the flat is totally geodesic), which justifies a coordinate-wise
golden-section descent.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from regulus._parallel import map_chunks
from regulus.cartan import Theta, kappa
from regulus.errors import NoGap, ThetaMismatch
from regulus.flags import Flag, FlagLimit, detect_flag_limit, flag_distance, transverse, u_theta
from regulus.matrixcore import (GroupElement, as_element, complete_frame, extend_frame,
                                relative, sing_log_arrays)
from regulus.sublinear import P_MAX, RATIO_CUTOFF, EnvelopeFit, fit_envelope, tail_times

MEMBER_TOL = 1e-6
STEP_TOL = 1e-8
MAX_ITER = 200
DEFAULT_STARTS = 9
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def frame_for_flag(flag: Flag) -> np.ndarray:
    """Orthogonal frame whose leading ``k`` columns span ``flag.part(k)`` for each ``k``."""
    cols: list = []
    for k, part in zip(flag.theta.indices, flag.parts):
        cols = extend_frame(cols, part.frame, k - len(cols))
    return complete_frame(np.column_stack(cols))


@dataclass(frozen=True)
class WeylCone:
    """Cone with tip ``tip`` toward the flag ``flag``, parametrized with ``frame``."""

    tip: GroupElement
    flag: Flag
    frame: np.ndarray

    @classmethod
    def from_flag(cls, tip, flag: Flag) -> "WeylCone":
        tip = as_element(tip)
        if tip.dim != flag.dim:
            raise ThetaMismatch(f"flag in dimension {flag.dim}, tip in {tip.dim}")
        return cls(tip, flag, frame_for_flag(flag))

    @property
    def theta(self) -> Theta:
        return self.flag.theta

    def point(self, H) -> GroupElement:
        """The cone point ``tip F exp(H)``."""
        h = np.asarray(H, dtype=float)
        m = self.frame * np.exp(h)[None, :]
        mi = np.exp(-h)[:, None] * self.frame.T
        return self.tip @ GroupElement(m, inverse=mi)


@dataclass(frozen=True)
class Membership:
    """Outcome of :func:`cone_member`; truthy when the point is in the cone."""

    member: bool
    distance: float
    reason: str

    def __bool__(self) -> bool:
        return self.member


def cone_member(h, cone: WeylCone, tol: float = MEMBER_TOL) -> Membership:
    """Whether ``U_theta(tip^-1 h)`` exists and lies within ``tol`` of the cone's flag."""
    rel = relative(cone.tip, as_element(h))
    try:
        f = u_theta(rel, cone.theta)
    except NoGap as exc:
        return Membership(False, float("inf"), f"no gap at index {exc.k}")
    dist = flag_distance(f, cone.flag)
    if dist <= tol:
        return Membership(True, dist, "flag matches")
    return Membership(False, dist, "flag differs")


# ---------------------------------------------------------------------------
# distance to a cone

def _blocks(theta: Theta) -> list:
    edges = [0] + list(theta.indices) + [theta.d]
    return [(edges[b], edges[b + 1]) for b in range(len(edges) - 1)]


class _Objective:
    """Batched ``H -> d_X(x_r, tip F exp(H))`` for rows ``r``."""

    def __init__(self, y: np.ndarray, yinv: np.ndarray, trusted: np.ndarray, threads: int):
        self.y = y
        self.yinv = yinv
        self.trusted = trusted
        self.threads = threads

    def __call__(self, rows: np.ndarray, H: np.ndarray) -> np.ndarray:
        y = self.y[rows]
        yi = self.yinv[rows]
        tr = self.trusted[rows]
        m = np.exp(-H)[:, :, None] * y
        mi = yi * np.exp(H)[:, None, :]

        def work(lo, hi):
            return sing_log_arrays(m[lo:hi], mi[lo:hi], tr[lo:hi])

        kap = np.concatenate(map_chunks(work, len(rows), self.threads), axis=0)
        return np.linalg.norm(kap, axis=1)


def _intervals(V: np.ndarray, i: int, blocks: list):
    """Feasible range for coordinate ``i`` given the others (block order constraint)."""
    b = next(k for k, (lo, hi) in enumerate(blocks) if lo <= i < hi)
    n = V.shape[0]
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    if b + 1 < len(blocks):
        lo, hi = blocks[b + 1]
        lower = V[:, lo:hi].max(axis=1)
    if b > 0:
        lo, hi = blocks[b - 1]
        upper = V[:, lo:hi].min(axis=1)
    return lower, upper


def _centered(V: np.ndarray) -> np.ndarray:
    return V - V.mean(axis=1, keepdims=True)


def _golden_line(f, rows, V, i, a, b, fcur):
    """Vectorized golden-section search of coordinate ``i`` on ``[a, b]`` per row."""
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)

    def at(x, sel):
        W = V[sel].copy()
        W[:, i] = x[sel]
        return f(rows[sel], _centered(W))

    everything = np.ones(len(rows), dtype=bool)
    f1 = at(x1, everything)
    f2 = at(x2, everything)
    for _ in range(MAX_ITER):
        live = (b - a) > STEP_TOL
        if not live.any():
            break
        left = live & (f1 <= f2)
        right = live & ~left
        # shrink toward the better interior point
        b = np.where(left, x2, b)
        a = np.where(right, x1, a)
        nx1 = np.where(left, b - GOLDEN * (b - a), x2)
        nx2 = np.where(right, a + GOLDEN * (b - a), x1)
        nf1 = np.where(left, 0.0, f2)
        nf2 = np.where(right, 0.0, f1)
        if left.any():
            nf1[left] = at(np.where(left, nx1, 0.0), left)
        if right.any():
            nf2[right] = at(np.where(right, nx2, 0.0), right)
        x1, x2, f1, f2 = nx1, nx2, nf1, nf2
    xbest = np.where(f1 <= f2, x1, x2)
    fbest = np.minimum(f1, f2)
    improve = fbest < fcur
    return np.where(improve, xbest, V[:, i]), np.where(improve, fbest, fcur)


def _descend(f, rows: np.ndarray, V: np.ndarray, blocks: list):
    """Coordinate descent from the starting coordinates ``V`` (one row per start)."""
    d = V.shape[1]
    span = np.sqrt(1.0 - 1.0 / d)
    fcur = f(rows, _centered(V))
    active = np.ones(len(rows), dtype=bool)
    for _ in range(MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Va = V[idx]
        fa = fcur[idx]
        moved = np.zeros(len(idx))
        for i in range(d):
            lower, upper = _intervals(Va, i, blocks)
            # the minimizer is within 2 f of the current point in the flat
            reach = 2.0 * fa / span + STEP_TOL
            a = np.maximum(lower, Va[:, i] - reach)
            b = np.minimum(upper, Va[:, i] + reach)
            b = np.maximum(a, b)
            new, fa = _golden_line(f, rows[idx], Va, i, a, b, fa)
            moved = np.maximum(moved, np.abs(new - Va[:, i]))
            Va[:, i] = new
        V[idx] = Va
        fcur[idx] = fa
        active[idx] = moved > STEP_TOL
    return V, fcur


def _start_points(base: np.ndarray, starts: int, seed: int) -> np.ndarray:
    """Projection start plus seeded jitters; start ``j`` never depends on ``starts``."""
    scale = 0.1 * (1.0 + np.linalg.norm(base))
    out = [base]
    for j in range(1, starts):
        rng = np.random.default_rng([seed, j])
        out.append(base + scale * rng.standard_normal(base.shape))
    return np.stack(out)


def _project(v: np.ndarray, blocks: list) -> np.ndarray:
    """A feasible point near ``v``: sort descending (feasible for every theta)."""
    return -np.sort(-v)


def _bounds_batch(rels: Sequence[GroupElement], cone: WeylCone, starts: int, seed: int,
                  threads: int):
    frame = cone.frame
    n = len(rels)
    d = frame.shape[0]
    y = np.stack([frame.T @ r.matrix for r in rels])
    trusted = np.array([r.inverse_trusted for r in rels])
    yinv = np.stack([(r.inverse_matrix() @ frame) if t else np.full((d, d), np.nan)
                     for r, t in zip(rels, trusted)])
    yinv = np.nan_to_num(yinv)
    f = _Objective(y, yinv, trusted, threads)
    blocks = _blocks(cone.theta)
    base = [_project(kappa(r).coords, blocks) for r in rels]
    starts_v = np.concatenate([_start_points(b, starts, seed) for b in base])
    starts_v = np.stack([_project(v, blocks) for v in starts_v])
    rows = np.repeat(np.arange(n), starts)
    V, fval = _descend(f, rows, starts_v, blocks)
    zero = f(np.arange(n), np.zeros((n, d)))
    fval = fval.reshape(n, starts)
    V = _centered(V).reshape(n, starts, d)
    k = np.argmin(fval, axis=1)
    best = fval[np.arange(n), k]
    H = V[np.arange(n), k]
    use_zero = zero <= best
    best = np.where(use_zero, zero, best)
    H[use_zero] = 0.0
    return best, H


def cone_distance_upper(x, cone: WeylCone, starts: int = DEFAULT_STARTS, seed: int = 0):
    """Upper bound on the distance from ``x`` to the cone.

    Parameters
    ----------
    x : GroupElement
    cone : WeylCone
    starts : int
        Number of descent starts: the Cartan projection of ``tip^-1 x`` and
        ``starts - 1`` seeded jitters around it. The tip (``H = 0``) is always
        compared as well.
    seed : int

    Returns
    -------
    bound : float
    H : ndarray
        Cone coordinates attaining the bound.
    """
    if starts < 1:
        raise ValueError("starts must be at least 1")
    rel = relative(cone.tip, as_element(x))
    best, H = _bounds_batch([rel], cone, starts, seed, 1)
    return float(best[0]), H[0]


# ---------------------------------------------------------------------------
# diamonds

def diamond_member(z, x, y, theta: Theta, tol: float = 1e-10) -> bool:
    """Whether ``U_theta(z^-1 x)`` and ``U_theta(z^-1 y)`` exist and are transverse.

    Raises
    ------
    NoGap
        If ``x^-1 y`` itself lacks a theta-gap (the diamond is undefined).
    """
    z, x, y = as_element(z), as_element(x), as_element(y)
    u_theta(relative(x, y), theta)
    try:
        fx = u_theta(relative(z, x), theta)
        fy = u_theta(relative(z, y), theta)
    except NoGap:
        return False
    return bool(transverse(fx, fy, tol))


# ---------------------------------------------------------------------------
# verification along a sequence

@dataclass(frozen=True)
class WeylConfig:
    """Parameters of :func:`verify_morse_lemma`.

    ``tail`` is the window handed to the flag-limit detector (default: the
    last third of the sequence, at least 2).
    """

    tail: int | None = None
    starts: int = DEFAULT_STARTS
    seed: int = 0
    threads: int = 1
    ratio_cutoff: float = RATIO_CUTOFF
    p_max: float = P_MAX


@dataclass(frozen=True)
class ConeDistanceReport:
    """Per-element distance bounds to the cone and the fitted envelope.

    ``rows`` holds ``(index, distance to tip, bound, H)``; ``tail_ratio`` is
    the largest ``bound / distance`` over the last third of the distances.
    """

    rows: tuple = field(repr=False)
    envelope: EnvelopeFit
    verdict: bool
    tail_ratio: float
    limit: FlagLimit = field(repr=False)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "tail_ratio": float(self.tail_ratio),
                "envelope": self.envelope.to_dict(), "limit_family": self.limit.family,
                "points": [{"index": int(i), "dist_to_tip": float(r), "bound": float(b),
                            "H": [float(h) for h in H]} for i, r, b, H in self.rows]}

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "dist_to_tip", "bound"])
        for i, r, b, _ in self.rows:
            w.writerow([int(i), repr(float(r)), repr(float(b))])
        return buf.getvalue()


def tail_ratio(dist: np.ndarray, bound: np.ndarray) -> float:
    """Largest ``bound / dist`` among points whose distance lies in the tail third."""
    tail = tail_times(dist)
    if tail.size == 0:
        return 0.0
    sel = dist >= tail[0]
    sel &= dist > 0
    return float(np.max(bound[sel] / dist[sel]))


def verify_morse_lemma(seq: Sequence, theta: Theta,
                       cfg: WeylConfig | None = None) -> ConeDistanceReport:
    """Measure how far a sequence strays from the cone at ``g_0`` toward its limit flag.

    Raises
    ------
    Divergent, NoGap
        Forwarded from the flag-limit detector.
    """
    cfg = cfg or WeylConfig()
    els = [as_element(g) for g in seq]
    tail = cfg.tail or max(2, len(els) // 3)
    limit = detect_flag_limit(els, theta, tail)
    cone = WeylCone.from_flag(els[0], limit.flag)
    rels = [relative(els[0], g) for g in els]
    dist = np.array([kappa(r).norm() for r in rels])
    bound, H = _bounds_batch(rels, cone, cfg.starts, cfg.seed, cfg.threads)
    bound = np.maximum(bound, 0.0)
    env = fit_envelope(np.column_stack([dist, bound]), p_max=cfg.p_max)
    rows = tuple((k, dist[k], bound[k], H[k]) for k in range(len(els)))
    return ConeDistanceReport(rows, env, env.sublinear(cfg.ratio_cutoff),
                              tail_ratio(dist, bound), limit)
