"""Classifiers for sublinearly Morse sequences, uniform regularity and paths.

A sequence ``g_0, g_1, ...`` is tested on three conditions:

1. jumps ``d_X(g_n, g_{n+1})`` sit under a sublinear envelope of
   ``d_X(g_0, g_n)``;
2. the broken geodesic through the ``g_n`` is a ``(C, eta_bar)`` sublinear ray;
3. every theta-gap of ``g_n^-1 g_{n+i}`` grows at least like
   ``a d_X(g_n, g_{n+i})`` up to a sublinear error in ``d_X(g_0, g_{n+i})``.

Every "there exists a sublinear function" is decided by fitting the
families of :mod:`regulus.sublinear` and comparing the tail ratio with a
cutoff. Slopes ``a`` and ``q`` are searched on a fixed grid.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from regulus._parallel import map_chunks
from regulus.cartan import Theta, theta_gap
from regulus.errors import DuplicateElements, EmptyInput, ThetaMismatch, TooShort
from regulus.matrixcore import (GroupElement, as_element, find_duplicate, relative,
                                sing_log_arrays, sing_log_batch, svd_batch)
from regulus.sublinear import (P_MAX, RATIO_CUTOFF, EnvelopeFit, eval_model, fit_envelope,
                               sample_pairs, tail_times)

SLOPE_GRID = tuple(round(0.01 * i, 2) for i in range(1, 101))
C_GRID = (1.0, 1.25, 1.5, 2.0, 3.0, 5.0)
ETA_RATIO_MAX = 1e3
# eta values below this are treated as this when forming eta ratios
ETA_FLOOR = 1e-9


@dataclass(frozen=True)
class MorseConfig:
    """Tuning knobs shared by the classifiers.

    Attributes
    ----------
    p_max : float
        Largest power exponent accepted as sublinear.
    ratio_cutoff : float
        Tail ratio ``eta(t)/t`` at or below which an envelope counts as sublinear.
    pair_budget : int
        Sequences (or path samples) up to this length are swept over all
        pairs; longer ones use a seeded sample that keeps consecutive pairs.
    C_grid : tuple of float
        Candidate multiplicative constants for the ray condition.
    slope_grid : tuple of float
        Candidate slopes ``a`` (and ``q``); searched from the largest down.
    eta_ratio_max : float
        Bound on ``eta_bar/eta`` and ``eta'/eta`` over the tail.
    seed : int
    threads : int
    """

    p_max: float = P_MAX
    ratio_cutoff: float = RATIO_CUTOFF
    pair_budget: int = 500
    C_grid: tuple = C_GRID
    slope_grid: tuple = SLOPE_GRID
    eta_ratio_max: float = ETA_RATIO_MAX
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class Witness:
    """Indices exhibiting a violation and its size."""

    condition: str
    indices: tuple
    magnitude: float

    def to_dict(self) -> dict:
        return {"condition": self.condition, "indices": list(self.indices),
                "magnitude": float(self.magnitude)}


@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one condition; ``constant`` is ``C`` or ``a`` where relevant."""

    passed: bool
    fit: EnvelopeFit
    constant: float | None = None
    eta_ratio: float | None = None
    witnesses: tuple = ()

    def to_dict(self) -> dict:
        return {"passed": self.passed, "fit": self.fit.to_dict(),
                "constant": None if self.constant is None else float(self.constant),
                "eta_ratio": None if self.eta_ratio is None else float(self.eta_ratio),
                "witnesses": [w.to_dict() for w in self.witnesses]}


@dataclass(frozen=True)
class MorseVerdict:
    """Verdict of :func:`classify_morse` with per-index diagnostics."""

    cond1: ConditionResult
    cond2: ConditionResult
    cond3: ConditionResult
    exhaustive: bool
    rows: tuple = field(default=(), repr=False)

    @property
    def overall(self) -> bool:
        return self.cond1.passed and self.cond2.passed and self.cond3.passed

    @property
    def witnesses(self) -> tuple:
        return self.cond1.witnesses + self.cond2.witnesses + self.cond3.witnesses

    def to_dict(self) -> dict:
        return {"overall": self.overall, "exhaustive": self.exhaustive,
                "cond1": self.cond1.to_dict(), "cond2": self.cond2.to_dict(),
                "cond3": self.cond3.to_dict()}

    def csv_text(self) -> str:
        """Rows ``n, d_X(g_0, g_n), min root gap of g_0^-1 g_n, deficit``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "dist_from_start", "min_root_gap", "deficit"])
        for n, r, gap, deficit in self.rows:
            w.writerow([n, repr(float(r)), repr(float(gap)), repr(float(deficit))])
        return buf.getvalue()


@dataclass(frozen=True)
class URVerdict:
    """Verdict of :func:`classify_uniform_regular`.

    ``worst_segment`` is ``(m, n, ratio)`` for the pair with the smallest
    ratio of theta-gap to distance among those checked.
    """

    D: int
    c: float
    passed: bool
    worst_segment: tuple
    pairs_checked: int
    exhaustive: bool

    def to_dict(self) -> dict:
        m, n, r = self.worst_segment
        return {"D": self.D, "c": float(self.c), "passed": self.passed,
                "worst_segment": [int(m), int(n), float(r)],
                "pairs_checked": self.pairs_checked, "exhaustive": self.exhaustive}


@dataclass(frozen=True)
class PathVerdict:
    """Verdict of :func:`classify_morse_path`; ``q`` is None when no slope works."""

    passed: bool
    q: float | None
    chi: EnvelopeFit
    witness: Witness | None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "q": self.q, "chi": self.chi.to_dict(),
                "witness": None if self.witness is None else self.witness.to_dict()}


# ---------------------------------------------------------------------------
# pair data

class _PairTable:
    """Relative elements ``g_i^-1 g_j`` and their Cartan projections."""

    def __init__(self, seq: Sequence[GroupElement], threads: int):
        self.seq = seq
        self.threads = threads
        self.rel: dict = {}

    def ensure(self, i: np.ndarray, j: np.ndarray) -> None:
        todo = sorted({(int(a), int(b)) for a, b in zip(i, j)
                       if a != b and (int(a), int(b)) not in self.rel})
        seq = self.seq

        def work(lo, hi):
            return [relative(seq[a], seq[b]) for a, b in todo[lo:hi]]

        blocks = map_chunks(work, len(todo), self.threads)
        for key, r in zip(todo, (r for b in blocks for r in b)):
            self.rel[key] = r

    def arrays(self, i: np.ndarray, j: np.ndarray):
        """Stacked matrices, inverses and trust flags for the pairs (identity if i == j)."""
        self.ensure(i, j)
        d = self.seq[0].dim
        m = len(i)
        mats = np.empty((m, d, d))
        invs = np.empty((m, d, d))
        trusted = np.ones(m, dtype=bool)
        eye = np.eye(d)
        for k, (a, b) in enumerate(zip(i, j)):
            if a == b:
                mats[k] = eye
                invs[k] = eye
                continue
            r = self.rel[(int(a), int(b))]
            mats[k] = r.matrix
            trusted[k] = r.inverse_trusted
            invs[k] = r.inverse_matrix() if trusted[k] else np.nan
        return mats, invs, trusted

    def kappas(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        mats, invs, trusted = self.arrays(i, j)
        return _batched_kappa(mats, invs, trusted, self.threads)


def _batched_kappa(mats, invs, trusted, threads: int) -> np.ndarray:
    def work(lo, hi):
        return sing_log_arrays(mats[lo:hi], invs[lo:hi], trusted[lo:hi])

    blocks = map_chunks(work, len(mats), threads)
    if not blocks:
        return np.zeros((0, mats.shape[-1]))
    return np.concatenate(blocks, axis=0)


def _validate(seq: Sequence, theta: Theta, minimum: int) -> list:
    els = [as_element(g) for g in seq]
    if len(els) < minimum:
        raise TooShort(f"need at least {minimum} elements, got {len(els)}")
    for e in els:
        if e.dim != theta.d:
            raise ThetaMismatch(f"theta for d={theta.d} used with d={e.dim}")
    return els


def _max_by_index(idx: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    np.maximum.at(out, idx, values)
    return out


def _eta_ratio(num: EnvelopeFit, den: EnvelopeFit, t: np.ndarray) -> float:
    """Largest ``num(t)/den(t)`` over the tail of the sampled times."""
    tail = tail_times(t)
    if tail.size == 0:
        return 0.0
    top = eval_model(num.model, tail)
    bottom = np.maximum(eval_model(den.model, tail), ETA_FLOOR)
    return float(np.max(top / bottom))


def _at_boundary(fit: EnvelopeFit, cfg: MorseConfig) -> bool:
    m = fit.model
    return m.family == "power" and m.a > 0 and m.p >= cfg.p_max - 1e-12


def _slope_feasible(fit: EnvelopeFit, cfg: MorseConfig) -> bool:
    """Deficits must fit below the cutoff with an exponent short of ``p_max``.

    Deficits of a slope slightly too large grow linearly with a small
    coefficient, which the ratio cutoff alone would accept; the best fit
    then sits at the largest allowed exponent, so that case is rejected.
    """
    return fit.sublinear(cfg.ratio_cutoff) and not _at_boundary(fit, cfg)


def _slope_sweep(later: np.ndarray, arg: np.ndarray, gaps: np.ndarray, dists: np.ndarray,
                 grid: Sequence[float], cfg: MorseConfig, eta: EnvelopeFit | None,
                 eta_times: np.ndarray | None):
    """Largest slope on the grid whose deficits admit a sublinear envelope.

    Deficits ``slope * dist - gap`` are attributed to the later sample and
    fitted against ``arg``, the sample's distance from the start.

    Returns
    -------
    slope or None, fit, eta ratio, witness pair index into the pair arrays
    """
    n = len(arg)
    best_fail = None
    for slope in sorted(grid, reverse=True):
        deficit = slope * dists - gaps
        req = _max_by_index(later, deficit, n)
        fit = fit_envelope(np.column_stack([arg, req]), p_max=cfg.p_max)
        ratio = 0.0 if eta is None else _eta_ratio(fit, eta, eta_times)
        if _slope_feasible(fit, cfg) and ratio <= cfg.eta_ratio_max:
            return slope, fit, ratio, None
        best_fail = (fit, ratio, int(np.argmax(deficit)))
    fit, ratio, worst = best_fail
    return None, fit, ratio, worst


# ---------------------------------------------------------------------------
# sublinearly Morse sequences

def _path_samples(table: _PairTable, n: int, jumps_kappa: np.ndarray):
    """Vertices and segment midpoints of the broken geodesic.

    Each sample is ``(segment index, local factor, inverse factor)`` standing
    for the point ``g_index * factor * K``. Midpoints use the decomposition
    ``g_n^-1 g_{n+1} = U exp(kappa) V^T`` and the factor ``U exp(kappa / 2)``.
    """
    d = table.seq[0].dim
    i = np.arange(n - 1)
    mats, _, _ = table.arrays(i, i + 1)
    u, _, _ = svd_batch(mats)
    eye = np.eye(d)
    index, factor, inv_factor, s = [], [], [], []
    pos = 0.0
    for k in range(n - 1):
        length = float(np.linalg.norm(jumps_kappa[k]))
        half = np.exp(jumps_kappa[k] / 2.0)
        index += [k, k]
        factor += [eye, u[k] * half[None, :]]
        inv_factor += [eye, (u[k] / half[None, :]).T]
        s += [pos, pos + length / 2.0]
        pos += length
    index.append(n - 1)
    factor.append(eye)
    inv_factor.append(eye)
    s.append(pos)
    return (np.array(index), np.stack(factor), np.stack(inv_factor), np.array(s))


def _path_distances(table: _PairTable, samples, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    index, factor, inv_factor, _ = samples
    a, b = index[p], index[q]
    mats, invs, trusted = table.arrays(a, b)
    m = np.einsum("nij,njk,nkl->nil", inv_factor[p], mats, factor[q])
    mi = np.einsum("nij,njk,nkl->nil", inv_factor[q], np.nan_to_num(invs), factor[p])
    kap = _batched_kappa(m, mi, trusted, table.threads)
    return np.linalg.norm(kap, axis=1)


def _condition_two(table: _PairTable, n: int, jumps_kappa: np.ndarray, cfg: MorseConfig,
                   eta: EnvelopeFit, path_exhaustive: list) -> ConditionResult:
    samples = _path_samples(table, n, jumps_kappa)
    s = samples[3]
    m = len(s)
    consecutive = [(k, k + 1) for k in range(m - 1)] + [(0, k) for k in range(1, m)]
    p, q, exhaustive = sample_pairs(m, cfg.pair_budget, cfg.seed, always=consecutive)
    path_exhaustive.append(exhaustive)
    dist = _path_distances(table, samples, p, q)
    gap = np.abs(s[q] - s[p])
    best = None
    for C in cfg.C_grid:
        req = np.maximum(np.maximum(gap / C - dist, dist - C * gap), 0.0)
        per_sample = _max_by_index(q, req, m)
        fit = fit_envelope(np.column_stack([s, per_sample]), p_max=cfg.p_max)
        ratio = _eta_ratio(fit, eta, s)
        # the error must be small against the linear term |s - t| / C
        ok = fit.ratio_score * C <= cfg.ratio_cutoff and ratio <= cfg.eta_ratio_max
        if ok:
            return ConditionResult(True, fit, float(C), ratio)
        if best is None or fit.ratio_score < best[1].ratio_score:
            k = int(np.argmax(req / np.maximum(s[q], 1.0)))
            best = (C, fit, ratio, Witness("cond2", (int(p[k]), int(q[k])), float(req[k])))
    C, fit, ratio, witness = best
    return ConditionResult(False, fit, float(C), ratio, (witness,))


def classify_morse(seq: Sequence, theta: Theta, cfg: MorseConfig | None = None) -> MorseVerdict:
    """Test the three sublinearly Morse conditions on a finite sequence.

    Parameters
    ----------
    seq : sequence of GroupElement
        At least three pairwise distinct elements.
    theta : Theta
    cfg : MorseConfig, optional

    Returns
    -------
    MorseVerdict

    Raises
    ------
    TooShort
        Fewer than three elements.
    DuplicateElements
        Two elements coincide.
    """
    cfg = cfg or MorseConfig()
    els = _validate(seq, theta, 3)
    dup = find_duplicate(els)
    if dup is not None:
        raise DuplicateElements(*dup)
    n = len(els)
    table = _PairTable(els, cfg.threads)
    always = [(k, k + 1) for k in range(n - 1)] + [(0, k) for k in range(2, n)]
    i, j, exhaustive = sample_pairs(n, cfg.pair_budget, cfg.seed, always=always)
    kap = table.kappas(i, j)
    dists = np.linalg.norm(kap, axis=1)
    gaps = theta_gap(kap, theta)

    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(i, j))}
    start = np.zeros(n)
    start_gap = np.zeros(n)
    for b in range(1, n):
        k = lookup[(0, b)]
        start[b] = dists[k]
        start_gap[b] = gaps[k]
    consecutive = np.array([lookup[(k, k + 1)] for k in range(n - 1)])
    jumps = dists[consecutive]

    # condition 1
    eta = fit_envelope(np.column_stack([start[:-1], jumps]), p_max=cfg.p_max)
    ok1 = eta.sublinear(cfg.ratio_cutoff)
    w1 = ()
    if not ok1:
        k = int(np.argmax(jumps / np.maximum(start[:-1], 1.0)))
        w1 = (Witness("cond1", (k, k + 1), float(jumps[k])),)
    cond1 = ConditionResult(ok1, eta, witnesses=w1)

    # condition 2
    path_exhaustive: list = []
    cond2 = _condition_two(table, n, kap[consecutive], cfg, eta, path_exhaustive)

    # condition 3
    slope, fit3, ratio3, worst = _slope_sweep(j, start, gaps, dists, cfg.slope_grid, cfg,
                                              eta, start)
    if slope is None:
        floor = min(cfg.slope_grid)
        deficit = floor * dists[worst] - gaps[worst]
        w3 = (Witness("cond3", (int(i[worst]), int(j[worst])), float(deficit)),)
        cond3 = ConditionResult(False, fit3, None, ratio3, w3)
        used = floor
    else:
        cond3 = ConditionResult(True, fit3, float(slope), ratio3)
        used = slope
    per_index = _max_by_index(j, used * dists - gaps, n)
    rows = tuple((b, start[b], start_gap[b], per_index[b]) for b in range(n))
    return MorseVerdict(cond1, cond2, cond3, exhaustive and all(path_exhaustive), rows)


# ---------------------------------------------------------------------------
# uniform regularity, paths, growth diagnostic

def classify_uniform_regular(seq: Sequence, theta: Theta, c: float, D: int,
                             pair_budget: int = 500, seed: int = 0,
                             threads: int = 1) -> URVerdict:
    """Check ``min_k alpha_k(kappa(g_m^-1 g_n)) >= c d_X(g_m, g_n)`` for ``n - m >= D``.

    Raises
    ------
    TooShort
        Fewer than ``D + 1`` elements.
    ValueError
        If ``c <= 0`` or ``D < 1``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if D < 1:
        raise ValueError("D must be at least 1")
    els = _validate(seq, theta, D + 1)
    n = len(els)
    always = [(k, k + D) for k in range(n - D)]
    i, j, exhaustive = sample_pairs(n, pair_budget, seed, always=always)
    keep = (j - i) >= D
    i, j = i[keep], j[keep]
    table = _PairTable(els, threads)
    kap = table.kappas(i, j)
    dists = np.linalg.norm(kap, axis=1)
    gaps = theta_gap(kap, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dists > 1e-12, gaps / dists, np.inf)
    k = int(np.argmin(ratio))
    worst = (int(i[k]), int(j[k]), float(ratio[k]))
    return URVerdict(int(D), float(c), bool(ratio[k] >= c), worst, int(len(i)), exhaustive)


def classify_morse_path(samples: Sequence, theta: Theta,
                        cfg: MorseConfig | None = None) -> PathVerdict:
    """Largest grid slope ``q`` with ``alpha(kappa(c(s)^-1 c(t))) >= q d - chi(...)``.

    Parameters
    ----------
    samples : sequence of (s, GroupElement)
        Path points sorted by the parameter ``s``.
    theta : Theta
    cfg : MorseConfig, optional

    Returns
    -------
    PathVerdict
        ``chi`` is fitted against ``max(d_X(c(0), c(s)), d_X(c(0), c(t)))``.

    Raises
    ------
    TooShort
        Fewer than two samples.
    """
    cfg = cfg or MorseConfig()
    params = [float(s) for s, _ in samples]
    if any(b < a for a, b in zip(params, params[1:])):
        raise ValueError("samples must be sorted by parameter")
    els = _validate([g for _, g in samples], theta, 2)
    n = len(els)
    always = [(k, k + 1) for k in range(n - 1)] + [(0, k) for k in range(2, n)]
    i, j, _ = sample_pairs(n, cfg.pair_budget, cfg.seed, always=always)
    table = _PairTable(els, cfg.threads)
    kap = table.kappas(i, j)
    dists = np.linalg.norm(kap, axis=1)
    gaps = theta_gap(kap, theta)
    start = np.zeros(n)
    first = i == 0
    start[j[first]] = dists[first]
    # chi's argument is the larger distance from c(0); that is the later
    # sample's unless the path doubles back, so attribute to the farther one
    later = np.where(start[j] >= start[i], j, i)
    q, fit, _, worst = _slope_sweep(later, start, gaps, dists, cfg.slope_grid, cfg, None, None)
    if q is None:
        floor = min(cfg.slope_grid)
        w = Witness("path", (int(i[worst]), int(j[worst])),
                    float(floor * dists[worst] - gaps[worst]))
        return PathVerdict(False, None, fit, w)
    return PathVerdict(True, float(q), fit, None)


@dataclass(frozen=True)
class GrowthDiagnostic:
    """Slope and offset of the linear lower bound on theta-gaps in word length."""

    a_hat: float
    b_hat: float
    min_margin: float
    at_floor: bool

    def to_dict(self) -> dict:
        return {"a_hat": float(self.a_hat), "b_hat": float(self.b_hat),
                "min_margin": float(self.min_margin), "at_floor": self.at_floor}


def anosov_diagnostic(elements: Sequence, theta: Theta, b_budget: float = 1.0,
                      grid: Sequence[float] = SLOPE_GRID) -> GrowthDiagnostic:
    """Fit ``alpha(kappa(gamma)) >= a |gamma| - b`` over group elements.

    ``a_hat`` is the largest grid slope whose required offset
    ``b = max(0, max(a |gamma| - alpha(kappa(gamma))))`` stays within
    ``b_budget``; if even the smallest slope fails, ``a_hat`` is the smallest
    slope and ``at_floor`` is set. With only the identity every slope works
    and the largest is returned with ``b_hat = 0``.

    Parameters
    ----------
    elements : sequence of (GroupElement, int)
        Elements with their word lengths.
    theta : Theta
    b_budget : float
    grid : sequence of float

    Returns
    -------
    GrowthDiagnostic

    Raises
    ------
    EmptyInput
    """
    if not len(elements):
        raise EmptyInput("no elements")
    els = [as_element(g) for g, _ in elements]
    lengths = np.array([float(n) for _, n in elements])
    if np.any(lengths < 0):
        raise ValueError("word lengths must be non-negative")
    gaps = theta_gap(sing_log_batch(els), theta)
    chosen = None
    for a in sorted(grid, reverse=True):
        b = max(0.0, float(np.max(a * lengths - gaps)))
        if b <= b_budget:
            chosen = (a, b, False)
            break
    if chosen is None:
        a = min(grid)
        chosen = (a, max(0.0, float(np.max(a * lengths - gaps))), True)
    a, b, floor = chosen
    margin = float(np.min(gaps - a * lengths)) + b
    return GrowthDiagnostic(float(a), float(b), margin, floor)
