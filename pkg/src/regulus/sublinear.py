"""Sublinear envelope models and the sublinear-ray check.

A finite sample can never certify ``eta(t)/t -> 0``. The decidable surrogate
used throughout is membership in a fixed family (``a t^p + b`` with
``p <= p_max < 1``, or ``a log(1 + t) + b``) together with a tail ratio
score: the largest value of ``eta(t)/t`` over the last third of the sampled
``t`` values. Callers compare that score against a cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from regulus.errors import EmptyInput

P_MAX = 0.9
DEFAULT_P_GRID = tuple(round(0.1 * i, 1) for i in range(10))
RATIO_CUTOFF = 0.2
TAIL_FRACTION = 1.0 / 3.0
HEAD_FRACTION = 0.1
PAIR_SAMPLE_LIMIT = 500
RAY_TOL = 1e-9


@dataclass(frozen=True)
class SublinearModel:
    """``a t^p + b`` (family ``power``) or ``a log(1 + t) + b`` (family ``log``)."""

    family: str
    a: float
    p: float
    b: float

    def __post_init__(self):
        if self.family not in ("power", "log"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.a < 0 or self.b < 0:
            raise ValueError("coefficients must be non-negative")
        if self.family == "power" and not 0 <= self.p < 1:
            raise ValueError("power exponent must lie in [0, 1)")

    def basis(self, t):
        return _basis(self.family, self.p, t)

    def __call__(self, t):
        return eval_model(self, t)

    def to_dict(self) -> dict:
        return {"family": self.family, "a": float(self.a),
                "p": float(self.p) if self.family == "power" else None,
                "b": float(self.b)}


ZERO = SublinearModel("power", 0.0, 0.0, 0.0)


def constant(b: float) -> SublinearModel:
    return SublinearModel("power", 0.0, 0.0, float(b))


def _basis(family: str, p: float, t):
    t = np.asarray(t, dtype=float)
    if family == "log":
        return np.log1p(t)
    if p == 0:
        return np.ones_like(t)
    return np.power(t, p)


def eval_model(m: SublinearModel, t):
    """Evaluate the model; monotone non-decreasing in ``t >= 0``."""
    val = m.a * _basis(m.family, m.p, t) + m.b
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class EnvelopeFit:
    """A fitted envelope with its feasibility and tail ratio diagnostics.

    ``max_residual`` is ``max(y_i - eta(t_i))`` (non-positive when every point
    is covered) and ``ratio_score`` is ``max eta(t)/t`` over the tail third.
    """

    model: SublinearModel
    max_residual: float
    ratio_score: float

    def sublinear(self, cutoff: float = RATIO_CUTOFF) -> bool:
        return self.ratio_score <= cutoff

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out["max_residual"] = float(self.max_residual)
        out["ratio_score"] = float(self.ratio_score)
        return out


def tail_times(t: np.ndarray, fraction: float = TAIL_FRACTION) -> np.ndarray:
    """Sampled ``t`` values in the last ``fraction`` of the sorted sample, excluding 0."""
    ts = np.sort(np.asarray(t, dtype=float))
    start = int(np.floor(len(ts) * (1.0 - fraction)))
    tail = ts[min(start, len(ts) - 1):]
    return tail[tail > 0]


def ratio_score(m: SublinearModel, t: np.ndarray, fraction: float = TAIL_FRACTION) -> float:
    """``max eta(t)/t`` over the tail of the sampled times (0 if no positive tail)."""
    tail = tail_times(t, fraction)
    if tail.size == 0:
        return 0.0
    return float(np.max(eval_model(m, tail) / tail))


def default_b_cap(t: np.ndarray, y: np.ndarray) -> float:
    """Largest ``y`` over the first 10% of samples ordered by ``t``."""
    order = np.argsort(t, kind="stable")
    head = max(1, int(np.ceil(HEAD_FRACTION * len(t))))
    return float(np.max(y[order[:head]]))


def fit_envelope(points: Sequence, p_grid: Sequence[float] | None = None,
                 b_cap: float | None = None, t_small: float | None = None,
                 p_max: float = P_MAX) -> EnvelopeFit:
    """Smallest-ratio envelope from the power and log families covering the points.

    For each candidate the constant is ``b = min(b_cap, max y over t <= t_small)``
    and the slope ``a = max (y - b) / basis(t)`` clamped at zero, so every point
    lies on or below the model. Among candidates the one with the lowest
    :func:`ratio_score` wins; ties go to the earlier candidate in the order
    ``power p_grid..., log``.

    Parameters
    ----------
    points : sequence of (t, y)
        ``t >= 0`` and ``y >= 0``.
    p_grid : sequence of float, optional
        Power exponents; defaults to ``0, 0.1, ..., 0.9``. Exponents above
        ``p_max`` are dropped.
    b_cap : float, optional
        Upper bound on the constant; defaults to :func:`default_b_cap`.
    t_small : float, optional
        Head threshold for the constant; defaults to the smallest sampled ``t``,
        so ``b`` is the value seen where the data starts.
    p_max : float

    Returns
    -------
    EnvelopeFit

    Raises
    ------
    EmptyInput
        If ``points`` is empty.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise EmptyInput("no points to fit")
    t = pts[:, 0]
    y = np.maximum(pts[:, 1], 0.0)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    grid = DEFAULT_P_GRID if p_grid is None else tuple(p_grid)
    grid = tuple(p for p in grid if 0 <= p <= p_max and p < 1)
    if b_cap is None:
        b_cap = default_b_cap(t, y)
    if t_small is None:
        t_small = float(t.min())
    head_max = float(np.max(y[t <= t_small])) if np.any(t <= t_small) else 0.0
    b0 = max(0.0, min(float(b_cap), head_max))
    candidates = [("power", p) for p in grid] + [("log", 0.0)]
    best = None
    for family, p in candidates:
        basis = _basis(family, p, t)
        b = b0
        flat = basis <= 0
        if np.any(flat):
            b = max(b, float(np.max(y[flat])))
        live = ~flat
        with np.errstate(over="ignore"):
            a = float(np.max((y[live] - b) / basis[live])) if np.any(live) else 0.0
        a = max(a, 0.0)
        # subnormal times can overflow the slope; such a candidate covers nothing
        if not np.isfinite(a) and best is not None:
            continue
        model = SublinearModel(family, a, p if family == "power" else 0.0, b)
        with np.errstate(invalid="ignore", over="ignore"):
            resid = float(np.max(y - eval_model(model, t)))
            score = ratio_score(model, t)
        if best is None or not np.isfinite(best.ratio_score) or score < best.ratio_score - 1e-12:
            best = EnvelopeFit(model, resid, score)
    return best


# ---------------------------------------------------------------------------
# sublinear rays

@dataclass(frozen=True)
class RayVerdict:
    """Outcome of :func:`check_sublinear_ray`.

    ``worst_violation`` is the largest amount by which either inequality fails
    (negative when every pair passes with room); ``worst_pair`` holds the
    sample indices attaining it and ``side`` says which bound was binding.
    """

    passed: bool
    worst_pair: tuple
    worst_violation: float
    side: str
    pairs_checked: int
    exhaustive: bool


def sample_pairs(n: int, limit: int = PAIR_SAMPLE_LIMIT, seed: int = 0,
                 always: Sequence[tuple] = ()):
    """Index pairs ``i < j``: all of them for ``n <= limit``, else a seeded draw.

    The draw has ``limit**2`` pairs (with replacement, deduplicated, sorted)
    plus every pair listed in ``always``.
    """
    if n <= limit:
        i, j = np.triu_indices(n, k=1)
        return i, j, True
    rng = np.random.default_rng(seed)
    m = limit * limit
    i = rng.integers(0, n, size=m)
    j = rng.integers(0, n, size=m)
    if len(always):
        extra = np.asarray(always, dtype=int).reshape(-1, 2)
        i = np.concatenate([i, extra[:, 0]])
        j = np.concatenate([j, extra[:, 1]])
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    keep = lo < hi
    key = np.unique(lo[keep] * n + hi[keep])
    return key // n, key % n, False


def ray_violations(s: np.ndarray, dist: np.ndarray, C: float, m: SublinearModel):
    """Violations of the two ray inequalities for paired parameters and distances.

    Returns
    -------
    lower, upper : ndarray
        ``(1/C)|s-t| - eta(max) - d`` and ``d - C|s-t| - eta(max)``; a pair
        passes when both are ``<= 0``.
    """
    s = np.asarray(s, dtype=float)
    gap = np.abs(s[..., 0] - s[..., 1])
    eta = eval_model(m, np.maximum(s[..., 0], s[..., 1]))
    lower = gap / C - eta - dist
    upper = dist - C * gap - eta
    return lower, upper


def check_sublinear_ray(params: Sequence, C: float, m: SublinearModel,
                        distance: Callable | np.ndarray, seed: int = 0,
                        limit: int = PAIR_SAMPLE_LIMIT, tol: float = RAY_TOL) -> RayVerdict:
    """Check the (C, eta) sublinear-ray inequalities on sampled pairs.

    Parameters
    ----------
    params : sequence of (s, point)
        Samples sorted by ``s``.
    C : float
        Multiplicative constant, ``C >= 1``.
    m : SublinearModel
    distance : callable or ndarray
        ``distance(p, q)``; alternatively a precomputed ``n x n`` matrix of
        distances between samples.
    seed : int
        Seed for the pair draw when there are more than ``limit`` samples.
    limit : int
    tol : float
        Slack allowed for rounding.

    Returns
    -------
    RayVerdict
    """
    if C < 1:
        raise ValueError("C must be at least 1")
    n = len(params)
    if n < 2:
        return RayVerdict(True, (0, 0), -np.inf, "none", 0, True)
    s = np.array([float(p[0]) for p in params])
    i, j, exhaustive = sample_pairs(n, limit, seed)
    if isinstance(distance, np.ndarray):
        dist = distance[i, j]
    else:
        pts = [p[1] for p in params]
        dist = np.array([distance(pts[a], pts[b]) for a, b in zip(i, j)])
    lower, upper = ray_violations(np.stack([s[i], s[j]], axis=-1), dist, C, m)
    worst = np.maximum(lower, upper)
    k = int(np.argmax(worst))
    side = "lower" if lower[k] >= upper[k] else "upper"
    return RayVerdict(bool(worst[k] <= tol), (int(i[k]), int(j[k])), float(worst[k]),
                      side, int(len(i)), exhaustive)


def min_constant_for_ray(s: np.ndarray, dist: np.ndarray, C: float) -> float:
    """Smallest additive constant making a (C, constant) ray on the given pairs."""
    lower, upper = ray_violations(s, dist, C, ZERO)
    return float(max(0.0, np.max(lower), np.max(upper)))
