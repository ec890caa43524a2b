"""Finitely generated matrix groups: word balls, rays, Poincare sums, growth.

Generators carry single lower-case labels; upper case denotes the inverse.
Balls are enumerated breadth first over freely reduced words, and elements
keep their words so later distance computations can cancel common prefixes
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from regulus.cartan import LinearFunctional
from regulus.errors import EmptyInput, ExplosionGuard, NotReduced
from regulus.matrixcore import (Alphabet, GroupElement, identity, invert_matrix, is_reduced,
                                matrix_key, same_matrix, sing_log_batch)

NODE_CAP = 2_000_000
DEDUP_TOL = 1e-8
INVERSE_TOL = 1e-10


class GeneratorSet:
    """Generators with labels and verified inverses.

    Parameters
    ----------
    matrices : dict
        Label (one lower-case letter) to matrix. May be empty for the
        trivial group, in which case ``dim`` must be given.
    inverses : dict, optional
        Exact inverses; others are computed.
    hint : {"free", "unknown"}
        Whether the generators are believed to generate a free group.
    semigroup : bool
        Enumerate positive words only.
    name : str
    dim : int, optional

    Raises
    ------
    ValueError
        If a supplied inverse is off by more than ``1e-10``.
    """

    def __init__(self, matrices: dict, inverses: dict | None = None, hint: str = "unknown",
                 semigroup: bool = False, name: str = "", dim: int | None = None):
        if hint not in ("free", "unknown"):
            raise ValueError(f"hint must be 'free' or 'unknown', got {hint!r}")
        self.hint = hint
        self.semigroup = semigroup
        self.name = name
        self.alphabet = Alphabet(matrices, inverses) if matrices else None
        if self.alphabet is None:
            if dim is None:
                raise ValueError("an empty generator set needs dim")
            self.dim = int(dim)
        else:
            self.dim = self.alphabet.dim
        for x in self.labels:
            m = self.alphabet.matrix(x)
            prod = m @ self.alphabet.matrix(x.upper())
            scale = max(1.0, float(np.abs(m).max()) * float(np.abs(self.alphabet.matrix(x.upper())).max()))
            if np.abs(prod - np.eye(self.dim)).max() > INVERSE_TOL * scale:
                raise ValueError(f"inverse of generator {x!r} is inaccurate")

    @property
    def labels(self) -> tuple:
        return () if self.alphabet is None else self.alphabet.letters

    def letters(self) -> tuple:
        """Letters used in words: labels, plus inverses unless a semigroup."""
        if self.semigroup:
            return self.labels
        out = []
        for x in self.labels:
            out += [x, x.upper()]
        return tuple(out)

    def element(self, word: str) -> GroupElement:
        if self.alphabet is None:
            if word:
                raise KeyError("the trivial group has no letters")
            return identity(self.dim)
        return self.alphabet.element(word)

    def to_dict(self) -> dict:
        return {"name": self.name, "hint": self.hint, "semigroup": self.semigroup,
                "labels": list(self.labels),
                "matrices": [self.alphabet.matrix(x).tolist() for x in self.labels]}


@dataclass(frozen=True)
class WordNode:
    """A ball element with its word, length and Cartan projection."""

    word: str
    element: GroupElement = field(repr=False)
    length: int
    kappa: np.ndarray = field(repr=False, default=None)


def word_ball(gens: GeneratorSet, radius: int, dedup_tol: float = DEDUP_TOL,
              cap: int = NODE_CAP) -> list:
    """All elements of word length at most ``radius``.

    Words are extended letter by letter without immediate backtracking. A new
    element whose matrix matches an earlier one (quantized hash at
    ``dedup_tol``, then an exact check) is dropped; since words are visited
    in ``(length, word)`` order, the survivor is the shortest, then
    lexicographically first, word.

    Returns
    -------
    list of WordNode
        Sorted by ``(length, word)``.

    Raises
    ------
    ExplosionGuard
        If more than ``cap`` nodes would be produced.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    start = gens.element("")
    nodes = [("", start.matrix)]
    table: dict = {matrix_key(start.matrix, dedup_tol): [start.matrix]}
    frontier = [""]
    mats = {"": start.matrix}
    letters = sorted(gens.letters())
    for length in range(1, radius + 1):
        new_frontier = []
        for w in frontier:
            base = mats[w]
            for x in letters:
                if w and w[-1] == x.swapcase():
                    continue
                m = base @ gens.alphabet.matrix(x)
                key = matrix_key(m, dedup_tol)
                bucket = table.setdefault(key, [])
                if any(same_matrix(m, other) for other in bucket):
                    continue
                bucket.append(m)
                nw = w + x
                mats[nw] = m
                nodes.append((nw, m))
                new_frontier.append(nw)
                if len(nodes) > cap:
                    raise ExplosionGuard(f"word ball exceeded {cap} nodes at length {length}")
        # previous frontier matrices are no longer needed for extension
        for w in frontier:
            if w:
                del mats[w]
        frontier = sorted(new_frontier)
    nodes.sort(key=lambda t: (len(t[0]), t[0]))
    els = [GroupElement(m, word=w, alphabet=gens.alphabet) if w else start for w, m in nodes]
    kap = sing_log_batch(els)
    return [WordNode(w, e, len(w), kap[k]) for k, ((w, _), e) in enumerate(zip(nodes, els))]


def geodesic_ray_words(gens: GeneratorSet, pattern, n: int) -> list:
    """First ``n`` prefix products of an eventually periodic reduced word.

    Parameters
    ----------
    gens : GeneratorSet
    pattern : str or (str, str)
        A period ``p`` (the word ``p p p ...``) or a pair ``(prefix, period)``.
    n : int

    Raises
    ------
    NotReduced
        If the infinite word has a cancelling pair.
    """
    prefix, period = ("", pattern) if isinstance(pattern, str) else pattern
    if not period:
        raise ValueError("period must be non-empty")
    probe = prefix + period + period
    if not is_reduced(probe):
        raise NotReduced(f"pattern {prefix!r} + ({period!r})^inf is not reduced")
    for ch in probe:
        if ch.lower() not in gens.labels:
            raise KeyError(f"unknown letter {ch!r}")
    reps = (max(0, n - len(prefix)) // len(period)) + 1
    word = (prefix + period * reps)[:n]
    return [gens.element(word[:k]) for k in range(1, n + 1)]


def phi_values(ball: Sequence[WordNode], phi: LinearFunctional) -> np.ndarray:
    kap = np.stack([node.kappa for node in ball])
    return np.asarray(phi(kap), dtype=float)


def poincare_partial(ball: Sequence[WordNode], phi: LinearFunctional, s: float) -> float:
    """``sum exp(-s phi(kappa(gamma)))`` over the ball; ``s >= 0``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if not len(ball):
        return 0.0
    vals = phi_values(ball, phi)
    # sorted summation keeps the result independent of ball order
    return float(np.sum(np.sort(np.exp(-s * vals))))


@dataclass(frozen=True)
class ExponentBracket:
    """Growth-rate bracket from annulus regression.

    ``low <= estimate <= high``; ``slack`` is the regression standard error,
    used when comparing brackets across radius extensions.
    """

    low: float
    high: float
    estimate: float
    slack: float
    annuli: tuple = field(repr=False, default=())

    @property
    def width(self) -> float:
        return self.high - self.low

    def to_dict(self) -> dict:
        return {"low": self.low, "high": self.high, "estimate": self.estimate,
                "slack": self.slack,
                "annuli": [{"lengths": [int(a), int(b)], "count": int(c), "scale": float(sc)}
                           for a, b, c, sc in self.annuli]}


def critical_exponent_estimate(gens: GeneratorSet, phi: LinearFunctional,
                               radii: Sequence[int], cap: int = NODE_CAP,
                               ball: Sequence[WordNode] | None = None) -> ExponentBracket:
    """Bracket the growth exponent of the group with respect to ``phi``.

    Consecutive radii delimit annuli ``r_{i-1} < |gamma| <= r_i``. Each annulus
    gives a count ``N_i`` and a scale ``S_i`` (the mean of ``phi(kappa)``).
    Over the last half of the annuli (at least two) the slope of ``log N_i``
    against ``S_i`` is fitted by least squares; the bracket is the range of
    that slope and of the consecutive slopes, widened by one standard error.

    Raises
    ------
    ValueError
        If ``radii`` is not increasing or has fewer than three entries.
    ExplosionGuard
        Forwarded from the ball enumeration.
    """
    radii = [int(r) for r in radii]
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing with at least three entries")
    if ball is None:
        ball = word_ball(gens, radii[-1], cap=cap)
    lengths = np.array([node.length for node in ball])
    vals = phi_values(ball, phi)
    annuli = []
    for lo, hi in zip(radii, radii[1:]):
        sel = (lengths > lo) & (lengths <= hi)
        if sel.any():
            annuli.append((lo, hi, int(sel.sum()), float(vals[sel].mean())))
    if len(annuli) < 2:
        raise EmptyInput("fewer than two non-empty annuli")
    keep = annuli[len(annuli) // 2:] if len(annuli) >= 4 else annuli[-2:]
    x = np.array([a[3] for a in keep])
    y = np.log([a[2] for a in keep])
    slopes = []
    for k in range(len(keep) - 1):
        dx = x[k + 1] - x[k]
        slopes.append((y[k + 1] - y[k]) / dx if abs(dx) > 1e-12 else 0.0)
    if len(keep) >= 3:
        xm = x.mean()
        sxx = float(((x - xm) ** 2).sum())
        slope = float(((x - xm) * (y - y.mean())).sum() / sxx) if sxx > 0 else 0.0
        resid = y - (y.mean() + slope * (x - xm))
        se = float(np.sqrt((resid ** 2).sum() / (len(keep) - 2) / sxx)) if sxx > 0 else 0.0
    else:
        slope, se = float(slopes[0]), 0.0
    low = min(slopes + [slope]) - se
    high = max(slopes + [slope]) + se
    return ExponentBracket(float(low), float(high), slope, se, tuple(annuli))


def divergence_audit(ball: Sequence[WordNode], theta_indices: Sequence[int]) -> tuple:
    """Minimum theta-gap over each word-length annulus (lengths 1, 2, ...).

    Returns the tuple of minima; a ball passes when it is strictly increasing.
    """
    by_len: dict = {}
    for node in ball:
        if node.length == 0:
            continue
        gaps = node.kappa[:-1] - node.kappa[1:]
        g = min(gaps[k - 1] for k in theta_indices)
        by_len[node.length] = min(by_len.get(node.length, np.inf), g)
    return tuple(float(by_len[k]) for k in sorted(by_len))


# ---------------------------------------------------------------------------
# gallery

def _rotation(d: int, i: int, j: int, angle: float) -> np.ndarray:
    r = np.eye(d)
    c, s = np.cos(angle), np.sin(angle)
    r[i, i] = r[j, j] = c
    r[i, j] = -s
    r[j, i] = s
    return r


def diagonal_schottky(contraction: float = 3.0, mix: float = 0.9) -> GeneratorSet:
    """Two conjugated diagonal elements of SL(3) in general position.

    ``a = diag(e^c, 1, e^-c)`` and ``b = k a k^-1`` for a fixed rotation ``k``
    that moves the attracting and repelling flags of ``a`` away from each
    other; larger ``contraction`` makes the ping-pong stronger.
    """
    c = float(contraction)
    a = np.diag([np.exp(c), 1.0, np.exp(-c)])
    ai = np.diag([np.exp(-c), 1.0, np.exp(c)])
    k = _rotation(3, 0, 2, mix) @ _rotation(3, 0, 1, mix / 2) @ _rotation(3, 1, 2, mix / 3)
    return GeneratorSet({"a": a, "b": k @ a @ k.T}, {"a": ai, "b": k @ ai @ k.T},
                        hint="free", name=f"diagonal-schottky-{c:g}")


def boost(axis: int, length: float) -> np.ndarray:
    """Hyperbolic translation of the Klein disk along a coordinate axis.

    Acts on ``R^3`` preserving ``x^2 + y^2 - z^2``; ``axis`` is 0 or 1.
    """
    m = np.eye(3)
    ch, sh = np.cosh(length), np.sinh(length)
    m[axis, axis] = m[2, 2] = ch
    m[axis, 2] = m[2, axis] = sh
    return m


# translation lengths below 2 arcsinh(1) let the ping-pong half-planes meet
KLEIN_PING_PONG_MIN = 2.0 * np.arcsinh(1.0)


def klein_schottky(length: float = 2.0) -> GeneratorSet:
    """Two translations of the Klein disk along perpendicular axes through the center."""
    if length <= KLEIN_PING_PONG_MIN:
        raise ValueError(f"translation length must exceed {KLEIN_PING_PONG_MIN:.4f}")
    return GeneratorSet({"a": boost(0, length), "b": boost(1, length)},
                        {"a": boost(0, -length), "b": boost(1, -length)},
                        hint="free", name=f"klein-schottky-{length:g}")


def principal_image(g) -> np.ndarray:
    """Image of ``g`` in SL(2) under the irreducible representation into SL(3).

    Uses the orthonormal basis ``x^2, sqrt(2) x y, y^2`` of binary quadratic
    forms, so rotations go to rotations.
    """
    (a, b), (c, d) = np.asarray(g, dtype=float)
    r = np.sqrt(2.0)
    return np.array([[a * a, r * a * b, b * b],
                     [r * a * c, a * d + b * c, r * b * d],
                     [c * c, r * c * d, d * d]])


def principal_parabolic() -> GeneratorSet:
    """Principal images of a parabolic and a hyperbolic element of a free lattice.

    ``p = [[1, 2], [0, 1]]`` and ``h = [[5, 2], [2, 1]]`` generate a free
    subgroup of SL(2, Z) with a cusp, so the image contains unipotents.
    """
    p = np.array([[1.0, 2.0], [0.0, 1.0]])
    h = np.array([[5.0, 2.0], [2.0, 1.0]])
    pi = np.array([[1.0, -2.0], [0.0, 1.0]])
    hi = np.array([[1.0, -2.0], [-2.0, 5.0]])
    return GeneratorSet({"a": principal_image(p), "b": principal_image(h)},
                        {"a": principal_image(pi), "b": principal_image(hi)},
                        hint="free", name="principal-parabolic")


def reducible_blocks(length: float = 2.5) -> GeneratorSet:
    """Block-diagonal SL(2) Schottky group in SL(4), trivial in the second block.

    Gaps at indices 1 and 3 grow, while index 2 stays at zero (a wall).
    """
    def hyp(t, angle):
        r = _rotation(2, 0, 1, angle)
        return r @ np.diag([np.exp(t), np.exp(-t)]) @ r.T

    mats, invs = {}, {}
    for label, angle in (("a", 0.0), ("b", np.pi / 4)):
        m = np.eye(4)
        mi = np.eye(4)
        m[:2, :2] = hyp(length, angle)
        mi[:2, :2] = hyp(-length, angle)
        mats[label], invs[label] = m, mi
    return GeneratorSet(mats, invs, hint="free", name="reducible-blocks")


def cyclic_diagonal() -> GeneratorSet:
    """The cyclic group generated by ``diag(e, 1, e^-1)``."""
    return GeneratorSet({"a": np.diag([np.e, 1.0, 1.0 / np.e])},
                        {"a": np.diag([1.0 / np.e, 1.0, np.e])},
                        hint="free", name="cyclic-diagonal")


def unipotent_cyclic() -> GeneratorSet:
    """The cyclic group generated by a single 3 x 3 Jordan block."""
    u = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    ui = np.array([[1.0, -1.0, 1.0], [0.0, 1.0, -1.0], [0.0, 0.0, 1.0]])
    return GeneratorSet({"a": u}, {"a": ui}, hint="free", name="unipotent-cyclic")


def trivial_group(d: int = 3) -> GeneratorSet:
    return GeneratorSet({}, dim=d, name="trivial")


def proximal_semigroup(contraction: float = 2.0) -> GeneratorSet:
    """Free semigroup on two proximal upper-triangular elements.

    ``a = diag(e^c, 1, e^-c)`` and ``b = a u`` with ``u`` a unipotent Jordan
    block. Their action on the top-left affine chart consists of two
    contractions with disjoint images, so positive words are distinct, and a
    word of length ``R`` has ``phi(kappa) = R phi(kappa(a)) + O(1)``.
    """
    c = float(contraction)
    a = np.diag([np.exp(c), 1.0, np.exp(-c)])
    ai = np.diag([np.exp(-c), 1.0, np.exp(c)])
    u = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    ui = np.array([[1.0, -1.0, 1.0], [0.0, 1.0, -1.0], [0.0, 0.0, 1.0]])
    return GeneratorSet({"a": a, "b": a @ u}, {"a": ai, "b": ui @ ai},
                        hint="free", semigroup=True, name=f"proximal-semigroup-{c:g}")


def with_torsion(contraction: float = 3.0) -> GeneratorSet:
    """A Schottky generator paired with an order-three rotation (hidden relation ``b^3``)."""
    gs = diagonal_schottky(contraction)
    r = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return GeneratorSet({"a": gs.alphabet.matrix("a"), "b": r},
                        {"a": gs.alphabet.matrix("A"), "b": r.T},
                        hint="unknown", name="schottky-with-torsion")


GALLERY = {
    "diagonal-schottky": diagonal_schottky,
    "klein-schottky": klein_schottky,
    "principal-parabolic": principal_parabolic,
    "reducible-blocks": reducible_blocks,
    "cyclic-diagonal": cyclic_diagonal,
    "unipotent-cyclic": unipotent_cyclic,
    "proximal-semigroup": proximal_semigroup,
    "schottky-with-torsion": with_torsion,
    "trivial": trivial_group,
}


def gallery_group(name: str) -> GeneratorSet:
    """Built-in generator set by name (see ``GALLERY``)."""
    try:
        return GALLERY[name]()
    except KeyError:
        raise KeyError(f"unknown gallery group {name!r}; choose from {sorted(GALLERY)}") from None


def inverse_check(gens: GeneratorSet) -> float:
    """Largest entry of ``g g^-1 - I`` over generators (diagnostic)."""
    worst = 0.0
    for x in gens.labels:
        m = gens.alphabet.matrix(x)
        worst = max(worst, float(np.abs(m @ invert_matrix(m) - np.eye(gens.dim)).max()))
    return worst
