"""Hilbert geometry of ellipsoids and polytopes in an affine chart.

Points are chart coordinates ``x`` in ``R^n``, identified with the
homogeneous vector ``(x, 1)``; group elements act on homogeneous vectors.
Distances use the cross ratio of the chord through two points.

Chart coordinates cannot resolve points whose distance to the boundary is
below rounding (Hilbert distance beyond roughly 17 from the base point). Rays
along the axis of a generator are therefore handled in a structured way: the
ray is ``A(t) o`` for a one-parameter group with ``A(l) = a``, and an orbit
point ``a^k h o`` is compared with ``A(t) o`` through ``A(k l - t) h o``, which
stays near the base point for the parameters that matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from regulus.errors import (DimensionMismatch, EmptyIntersection, NotAutomorphism,
                            OutsideDomain)
from regulus.matrixcore import GroupElement, as_element, relative, sing_log_batch

BOUNDARY_TOL = 1e-10
FORM_TOL = 1e-8
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SEARCH_TOL = 1e-10
BISECT_ITER = 100
SCAN_STEP = 1e-4


# ---------------------------------------------------------------------------
# domains

class ConvexDomain:
    """A bounded convex domain in an affine chart.

    Parameters
    ----------
    kind : {"ellipsoid", "polytope"}
    form : array_like, shape (n+1, n+1), optional
        For ellipsoids: symmetric form of signature ``(n, 1)``; the domain is
        ``{x : (x, 1)^T J (x, 1) < 0}``.
    vertices : array_like, shape (m, n), optional
        For polytopes: the vertex list (its convex hull is the domain).
    base_point : array_like, optional
        Defaults to the centre (ellipsoid) or vertex centroid (polytope).
    """

    def __init__(self, kind: str, form=None, vertices=None, base_point=None):
        if kind == "ellipsoid":
            j = np.asarray(form, dtype=float)
            if j.ndim != 2 or j.shape[0] != j.shape[1] or not np.allclose(j, j.T):
                raise ValueError("form must be a symmetric square matrix")
            ev = np.linalg.eigvalsh(j)
            if np.sum(ev < 0) != 1 or np.any(np.abs(ev) < 1e-12):
                raise ValueError("form must have signature (n, 1)")
            self.form = j
            self.n = j.shape[0] - 1
            # the domain is the side of the cone whose chart is bounded
            a = j[:-1, :-1]
            if np.any(np.linalg.eigvalsh(a) <= 0):
                raise ValueError("form does not give a bounded domain in this chart")
            centre = -np.linalg.solve(a, j[:-1, -1])
            default = centre
        elif kind == "polytope":
            v = np.asarray(vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] <= v.shape[1]:
                raise ValueError("need at least n + 1 vertices in R^n")
            self.vertices = v
            self.n = v.shape[1]
            self.normals, self.offsets = _facets(v)
            default = v.mean(axis=0)
        else:
            raise ValueError(f"unknown domain kind {kind!r}")
        self.kind = kind
        self.base_point = np.asarray(default if base_point is None else base_point, dtype=float)
        if not self.contains(self.base_point):
            raise OutsideDomain("base point is not inside the domain")

    @classmethod
    def unit_ball(cls, n: int = 2, base_point=None) -> "ConvexDomain":
        j = np.eye(n + 1)
        j[-1, -1] = -1.0
        return cls("ellipsoid", form=j, base_point=base_point)

    @classmethod
    def simplex(cls, n: int = 2, base_point=None) -> "ConvexDomain":
        v = np.vstack([np.zeros(n), np.eye(n)])
        return cls("polytope", vertices=v, base_point=base_point)

    def level(self, x) -> np.ndarray:
        """Negative inside: the form value (ellipsoid) or the largest facet value."""
        x = np.asarray(x, dtype=float)
        if self.kind == "ellipsoid":
            h = homogeneous(x)
            return np.einsum("...i,ij,...j->...", h, self.form, h)
        return np.max(x @ self.normals.T + self.offsets, axis=-1)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.shape[-1] == self.n and np.all(self.level(x) < 0))

    def chord(self, x, direction) -> tuple:
        """Parameters ``(lo, hi)`` with ``x + lo u`` and ``x + hi u`` on the boundary."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(direction, dtype=float)
        if self.kind == "ellipsoid":
            v = homogeneous(x)
            w = np.append(u, 0.0)
            qa = w @ self.form @ w
            qb = v @ self.form @ w
            qc = v @ self.form @ v
            if qc >= 0:
                raise OutsideDomain("point is not inside the domain")
            disc = np.sqrt(qb * qb - qa * qc)
            # stable roots of qa l^2 + 2 qb l + qc
            big = -(qb + np.copysign(disc, qb)) if qb != 0 else disc
            r1, r2 = (big / qa, qc / big) if big != 0 else (np.sqrt(-qc / qa), -np.sqrt(-qc / qa))
            return min(r1, r2), max(r1, r2)
        val = self.normals @ x + self.offsets
        if np.any(val >= 0):
            raise OutsideDomain("point is not inside the domain")
        rate = self.normals @ u
        pos = rate > 0
        neg = rate < 0
        hi = float(np.min(-val[pos] / rate[pos])) if pos.any() else np.inf
        lo = float(np.max(-val[neg] / rate[neg])) if neg.any() else -np.inf
        return lo, hi

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "base_point": self.base_point.tolist()}
        if self.kind == "ellipsoid":
            out["form"] = self.form.tolist()
        else:
            out["vertices"] = self.vertices.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexDomain":
        return cls(data["kind"], form=data.get("form"), vertices=data.get("vertices"),
                   base_point=data.get("base_point"))


def _facets(vertices: np.ndarray):
    """Outward facet normals and offsets (``n . x + c <= 0`` inside)."""
    n = vertices.shape[1]
    if n == 1:
        lo, hi = vertices.min(), vertices.max()
        return np.array([[1.0], [-1.0]]), np.array([-hi, lo])
    from scipy.spatial import ConvexHull

    hull = ConvexHull(vertices)
    eq = np.unique(np.round(hull.equations, 12), axis=0)
    return eq[:, :-1], eq[:, -1]


def homogeneous(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)


def chart(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[..., :-1] / v[..., -1:]


def act(g, x) -> np.ndarray:
    """Chart image of ``x`` under the projective action of ``g``."""
    m = as_element(g).matrix if not isinstance(g, np.ndarray) else g
    return chart(homogeneous(x) @ m.T)


# ---------------------------------------------------------------------------
# distance

@dataclass(frozen=True)
class ChordPoint:
    """``point`` with the boundary endpoints ``a, b`` of a chord through it.

    The order along the line is ``a, point, ..., b``.
    """

    point: np.ndarray
    a: np.ndarray
    b: np.ndarray


def chord_through(x, y, dom: ConvexDomain) -> tuple:
    """Boundary points ``a, b`` with ``a, x, y, b`` in order on the line."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(y, dtype=float) - x
    lo, hi = dom.chord(x, u)
    return ChordPoint(x, x + lo * u, x + hi * u), ChordPoint(np.asarray(y, dtype=float), x + lo * u, x + hi * u)


def hilbert_distance(x, y, dom: ConvexDomain) -> float:
    """``1/2 log(|b - x| |y - a| / (|b - y| |a - x|))`` for the chord ``a, x, y, b``.

    Raises
    ------
    OutsideDomain
        If either point is not strictly inside.
    DimensionMismatch
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (dom.n,) or y.shape != (dom.n,):
        raise DimensionMismatch(f"points must have {dom.n} coordinates")
    u = y - x
    if not np.any(u):
        if not dom.contains(x):
            raise OutsideDomain("point is not inside the domain")
        return 0.0
    lo, hi = dom.chord(x, u)
    # x sits at parameter 0 and y at 1 on the chord [lo, hi]
    if not hi > 1.0:
        raise OutsideDomain("point is not inside the domain")
    if not np.isfinite(hi) or not np.isfinite(lo):
        raise OutsideDomain("chord is unbounded")
    return 0.5 * float(np.log((hi / (hi - 1.0)) * ((1.0 - lo) / (-lo))))


def hilbert_distance_or_inf(x, y, dom: ConvexDomain) -> float:
    """Like :func:`hilbert_distance` but ``inf`` for points lost to rounding."""
    try:
        return hilbert_distance(x, y, dom)
    except OutsideDomain:
        return np.inf


def arclength(points: Sequence, dom: ConvexDomain) -> float:
    """Length of the polygonal path through ``points``."""
    return float(sum(hilbert_distance(p, q, dom) for p, q in zip(points, points[1:])))


# ---------------------------------------------------------------------------
# automorphisms

def automorphism_check(g, dom: ConvexDomain, samples: int = 20, seed: int = 0,
                       tol: float = FORM_TOL) -> bool:
    """Whether ``g`` maps the domain onto itself.

    Ellipsoids: ``g^T J g`` must equal a positive multiple of ``J`` (relative
    to the squared size of the entries of ``g``).
    Polytopes: ``g`` must permute the vertices. In both cases distance
    invariance is spot-checked on ``samples`` seeded random pairs.

    Raises
    ------
    DimensionMismatch
    """
    m = as_element(g).matrix
    if m.shape != (dom.n + 1, dom.n + 1):
        raise DimensionMismatch(f"expected a {dom.n + 1} x {dom.n + 1} matrix")
    if dom.kind == "ellipsoid":
        img = m.T @ dom.form @ m
        # g^T J g = s J forces |det g|^2 = s^(n+1); this avoids reading s off
        # entries that cancel for long words
        scale = float(np.exp(2.0 * np.linalg.slogdet(m)[1] / (dom.n + 1)))
        # rounding in g^T J g grows with the square of the entries
        slack = tol * max(1.0, scale) * max(1.0, float(np.abs(m).max())) ** 2
        if np.abs(img - scale * dom.form).max() > slack:
            return False
    else:
        img = act(m, dom.vertices)
        hit = np.abs(img[:, None, :] - dom.vertices[None, :, :]).max(axis=2) <= tol
        if not (np.all(hit.sum(axis=1) == 1) and np.all(hit.sum(axis=0) == 1)):
            return False
    rng = np.random.default_rng(seed)
    pts = sample_points(dom, 2 * samples, rng)
    for p, q in zip(pts[::2], pts[1::2]):
        d0 = hilbert_distance(p, q, dom)
        try:
            d1 = hilbert_distance(act(m, p), act(m, q), dom)
        except OutsideDomain:
            return False
        if abs(d1 - d0) > tol * max(1.0, d0):
            return False
    return True


def sample_points(dom: ConvexDomain, count: int, rng: np.random.Generator,
                  spread: float = 0.9) -> np.ndarray:
    """Points drawn uniformly on chords from the base point (seeded)."""
    out = np.empty((count, dom.n))
    o = dom.base_point
    for k in range(count):
        u = rng.standard_normal(dom.n)
        u /= np.linalg.norm(u)
        lo, hi = dom.chord(o, u)
        out[k] = o + spread * rng.uniform(lo, hi) * u
    return out


@dataclass(frozen=True)
class FactRow:
    index: int
    hilbert: float
    half_log_ratio: float

    @property
    def deviation(self) -> float:
        return abs(self.hilbert - self.half_log_ratio)


def fact_singular_value_gap(orbit: Sequence, o, dom: ConvexDomain, check: bool = True):
    """Compare ``d_H(g o, o)`` with half the log of the extreme singular value ratio.

    Returns
    -------
    sup_dev : float
    rows : list of FactRow

    Raises
    ------
    NotAutomorphism
        With the index of the first element failing the form check.
    """
    o = np.asarray(o, dtype=float)
    if check:
        for k, g in enumerate(orbit):
            if not automorphism_check(g, dom, samples=0):
                raise NotAutomorphism(k)
    kap = sing_log_batch(list(orbit))
    rows = []
    for k, g in enumerate(orbit):
        d = hilbert_distance(o, act(as_element(g).matrix, o), dom)
        rows.append(FactRow(k, d, 0.5 * float(kap[k, 0] - kap[k, -1])))
    sup = max((r.deviation for r in rows), default=0.0)
    return sup, rows


# ---------------------------------------------------------------------------
# rays

class AxisFlow:
    """One-parameter group ``A(s)`` of domain automorphisms with ``A(l) = a``.

    ``a`` must be diagonalizable with positive eigenvalues; ``s`` is measured
    in units of Hilbert arclength along the axis of ``a``.
    """

    def __init__(self, a: np.ndarray, length: float):
        w, p = np.linalg.eig(np.asarray(a, dtype=float))
        if np.any(np.abs(w.imag) > 1e-12) or np.any(w.real <= 0):
            raise ValueError("axis generator must have positive real eigenvalues")
        self.rates = np.log(w.real) / length
        self.p = p.real
        self.pinv = np.linalg.inv(self.p)
        self.length = float(length)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        e = np.exp(s[..., None] * self.rates)
        return np.einsum("ij,...j,jk->...ik", self.p, e, self.pinv)


class RayTrace:
    """Hilbert geodesic ray from ``base`` toward the boundary point ``target``.

    Parameters
    ----------
    dom : ConvexDomain
    base : array_like
    target : array_like
        A boundary point.
    flow : AxisFlow, optional
        If the ray is the axis of a group element, its one-parameter group.
    axis_letter : str, optional
        Generator label of the axis; orbit elements whose words start with a
        power of it are compared in the structured way.
    """

    def __init__(self, dom: ConvexDomain, base, target, flow: AxisFlow | None = None,
                 axis_letter: str | None = None):
        self.dom = dom
        self.base = np.asarray(base, dtype=float)
        self.target = np.asarray(target, dtype=float)
        if not dom.contains(self.base):
            raise OutsideDomain("ray base is not inside the domain")
        lo, hi = dom.chord(self.base, self.target - self.base)
        if abs(hi - 1.0) > 1e-8:
            raise ValueError("ray target is not a boundary point")
        self._lo = lo
        self.flow = flow
        self.axis_letter = axis_letter
        # base = alpha A + beta B with A, B the chord ends (last coordinate 1)
        self.origin_end = self.base + lo * (self.target - self.base)
        self._beta = -lo / (1.0 - lo)
        self._alpha = 1.0 - self._beta
        a_h, b_h = homogeneous(self.origin_end), homogeneous(self.target)
        if dom.kind == "ellipsoid":
            self._pair = float(a_h @ dom.form @ b_h)
        else:
            self._fa = dom.normals @ self.origin_end + dom.offsets
            fb = dom.normals @ self.target + dom.offsets
            # facets through the target must vanish exactly there
            self._fb = np.where(np.abs(fb) <= 1e-12, 0.0, fb)

    def point(self, t) -> np.ndarray:
        """Chart point at arclength ``t`` (closed-form projective parameter)."""
        t = np.asarray(t, dtype=float)
        w = np.exp(-2.0 * t)[..., None]
        return ((w * self._alpha) * self.origin_end + self._beta * self.target) / (w * self._alpha + self._beta)

    def distance_from(self, p, t: float) -> float:
        """``d_H(p, ray(t))`` from homogeneous coordinates, accurate for large ``t``.

        The ray point is ``e^-2t alpha A + beta B``; its form value (or facet
        values) are assembled from those of the chord ends, so they do not
        suffer cancellation when the point is close to the boundary.
        """
        dom = self.dom
        w = float(np.exp(-2.0 * t)) * self._alpha
        ph = homogeneous(np.asarray(p, dtype=float))
        xh = w * homogeneous(self.origin_end) + self._beta * homogeneous(self.target)
        if dom.kind == "ellipsoid":
            qp = float(ph @ dom.form @ ph)
            qx = 2.0 * w * self._beta * self._pair
            if qp >= 0:
                raise OutsideDomain("point is not inside the domain")
            bpx = float(ph @ dom.form @ xh)
            disc = max(bpx * bpx - qp * qx, 0.0)
            big = bpx + np.copysign(np.sqrt(disc), bpx)
            # roots big/qx and qp/big; their ratio is big^2 / (qp qx)
            return 0.5 * abs(2.0 * np.log(abs(big)) - np.log(-qp) - np.log(-qx))
        fp = dom.normals @ np.asarray(p, dtype=float) + dom.offsets
        if np.any(fp >= 0):
            raise OutsideDomain("point is not inside the domain")
        fx = w * self._fa + self._beta * self._fb
        ratio = fp / fx
        return 0.5 * float(np.log(ratio.max() / ratio.min()))

    def samples(self, ts) -> list:
        ts = np.asarray(ts, dtype=float)
        if np.any(np.diff(ts) <= 0):
            raise ValueError("sample parameters must be strictly increasing")
        return list(zip(ts.tolist(), self.point(ts)))

    def distance_function(self, item) -> Callable:
        """``t -> d_H(ray(t), item)`` for a chart point or group element."""
        dom = self.dom
        if isinstance(item, GroupElement):
            if self.flow is not None and item.word is not None:
                k, rest = _split_axis(item.word, self.axis_letter)
                h = item.alphabet.product(rest) if rest else np.eye(dom.n + 1)
                o = self.base
                shift = k * self.flow.length

                def f(t):
                    return hilbert_distance_or_inf(o, act(self.flow(shift - t) @ h, o), dom)
                return f
            item = act(item.matrix, self.base)
        p = np.asarray(item, dtype=float)

        def g(t):
            try:
                return self.distance_from(p, t)
            except OutsideDomain:
                return np.inf
        return g


def _split_axis(word: str, letter: str | None) -> tuple:
    """``(k, rest)`` with ``word = letter^k rest`` (negative ``k`` for inverses)."""
    if not letter:
        return 0, word
    k = 0
    for ch in word:
        if ch == letter and k >= 0:
            k += 1
        elif ch == letter.upper() and k <= 0:
            k -= 1
        else:
            break
    return k, word[abs(k):]


def axis_ray(dom: ConvexDomain, alphabet, letter: str, base=None) -> RayTrace:
    """Ray from the base point along the attracting axis of a generator.

    Raises
    ------
    ValueError
        If the base point is not on the axis.
    """
    a = alphabet.matrix(letter)
    o = dom.base_point if base is None else np.asarray(base, dtype=float)
    w, vecs = np.linalg.eig(a)
    order = np.argsort(-np.abs(w))
    top = vecs[:, order[0]].real
    lam = np.abs(w[order])
    length = 0.5 * float(np.log(lam[0] / lam[-1]))
    moved = hilbert_distance(o, act(a, o), dom)
    if abs(moved - length) > 1e-8 * max(1.0, length):
        raise ValueError("base point is not on the axis of the generator")
    return RayTrace(dom, o, chart(top), flow=AxisFlow(a, length), axis_letter=letter)


# ---------------------------------------------------------------------------
# compact part

def _golden_min(f: Callable, lo: float, hi: float, tol: float = SEARCH_TOL) -> tuple:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    cand = [(f(lo), lo), (fc, c), (fd, d), (f(hi), hi)]
    val, arg = min(cand, key=lambda z: (z[0], z[1]))
    return arg, val


def _crossing(f: Callable, inside: float, outside: float, r: float) -> float:
    """Bisection for ``f = r`` between a point inside and one outside the ball."""
    a, b = inside, outside
    for _ in range(BISECT_ITER):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        if f(m) <= r:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _unimodal(values: np.ndarray) -> bool:
    k = int(np.argmin(values))
    tol = 1e-9
    return bool(np.all(np.diff(values[:k + 1]) <= tol) and np.all(np.diff(values[k:]) >= -tol))


def ball_interval(f: Callable, r: float, T: float, probe: int = 33):
    """Parameter interval in ``[0, T]`` where ``f <= r``, or None.

    ``f`` is expected to be unimodal; if a coarse probe shows otherwise, the
    set is found by a scan with step ``1e-4`` and the hull of the hits is
    returned.
    """
    grid = np.linspace(0.0, T, probe)
    vals = np.array([f(t) for t in grid])
    if not _unimodal(np.where(np.isfinite(vals), vals, 1e300)):
        ts = np.arange(0.0, T + SCAN_STEP, SCAN_STEP)
        hit = ts[np.array([f(t) for t in ts]) <= r]
        return (float(hit[0]), float(hit[-1]), float(hit[0])) if hit.size else None
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, probe - 1)]
    t0, v0 = _golden_min(f, lo, hi)
    if v0 > r:
        return None
    a = 0.0 if f(0.0) <= r else _crossing(f, t0, 0.0, r)
    b = T if f(T) <= r else _crossing(f, t0, T, r)
    return a, b, t0


def union_measure(intervals: Sequence) -> tuple:
    """Measure of a union of closed intervals and the merged list (sorted)."""
    merged = []
    for a, b in sorted((float(a), float(b)) for a, b in intervals):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return float(sum(b - a for a, b in merged)), [tuple(m) for m in merged]


def compact_part(ray: RayTrace, orbit_points: Sequence, r: float, T: float) -> tuple:
    """Measure of the times in ``[0, T]`` at which the ray is within ``r`` of an orbit point.

    Parameters
    ----------
    ray : RayTrace
    orbit_points : sequence
        Chart points, or group elements (acting on the ray's base point).
    r, T : float
        Positive ball radius and horizon.

    Returns
    -------
    measure : float
    intervals : list of (float, float)
        The merged intervals.
    """
    if r <= 0 or T <= 0:
        raise ValueError("r and T must be positive")
    found = []
    for item in orbit_points:
        iv = ball_interval(ray.distance_function(item), r, T)
        if iv is not None:
            found.append(iv[:2])
    return union_measure(found)


# ---------------------------------------------------------------------------
# orbit sequences along a ray

@dataclass(frozen=True)
class Extraction:
    """Orbit elements met by the ray and their greedy separated subsequence.

    ``entries`` hold ``(t_g, element)`` for the met elements in order;
    ``chosen`` indexes the separated subsequence within ``entries``.
    """

    entries: tuple
    chosen: tuple
    intervals: tuple = field(default=())

    @property
    def a_gamma(self) -> list:
        return [e for _, e in self.entries]

    @property
    def a_gamma_c(self) -> list:
        return [self.entries[k][1] for k in self.chosen]


def _tie_key(g: GroupElement) -> tuple:
    return tuple(np.round(g.matrix.ravel(), 12).tolist())


def pair_distance(g: GroupElement, h: GroupElement, o, dom: ConvexDomain) -> float:
    """``d_H(g o, h o)`` through ``g^-1 h`` so shared prefixes cancel."""
    rel = relative(g, h)
    return hilbert_distance_or_inf(o, act(rel.matrix, o), dom)


def extract_sequence(ray: RayTrace, orbit: Sequence, r: float, C: float, T: float) -> Extraction:
    """Orbit elements whose ``r``-ball meets ``ray([0, T])``, and a ``C``-separated subsequence.

    Elements are ordered by the smallest parameter of their nearest point on
    the ray, ties broken by matrix entries. The subsequence starts at the
    first element and repeatedly takes the next element at distance at least
    ``C`` from the last one taken.

    Raises
    ------
    EmptyIntersection
        If no ball meets the ray.
    """
    if r <= 0 or C <= 0:
        raise ValueError("r and C must be positive")
    orbit = [as_element(g) for g in orbit]
    met = []
    for g in orbit:
        iv = ball_interval(ray.distance_function(g), r, T)
        if iv is not None:
            met.append((iv[2], iv[:2], g))
    if not met:
        raise EmptyIntersection("no orbit ball meets the ray")
    met.sort(key=lambda z: (round(z[0], 9), _tie_key(z[2])))
    chosen = [0]
    for k in range(1, len(met)):
        if pair_distance(met[chosen[-1]][2], met[k][2], ray.base, ray.dom) >= C:
            chosen.append(k)
    return Extraction(tuple((t, g) for t, _, g in met), tuple(chosen),
                      tuple(iv for _, iv, _ in met))


@dataclass(frozen=True)
class AxisOrbit:
    """Candidate orbit elements ``a^k h`` near the axis of ``a``.

    ``saturated`` is False when some tail of the maximal length still comes
    within ``r`` of the axis, in which case longer tails may be missing.
    """

    elements: tuple
    tails: tuple
    saturated: bool


def axis_orbit(gens, letter: str, T: float, r: float, tail_length: int = 3,
               margin: float = 1.0) -> AxisOrbit:
    """Orbit elements ``a^k h`` whose ``r``-ball can meet the axis ray up to ``T``.

    ``h`` runs over reduced words of length at most ``tail_length`` that do not
    start with ``a`` or its inverse and whose orbit point lies within ``r`` of
    the full axis of ``a``; ``k`` runs over the exponents whose translate lies
    within ``r + margin`` of ``[0, T]``.
    """
    from regulus.groups import word_ball

    dom_ray = gens_axis_ray(gens, letter)
    length = dom_ray.flow.length
    k_lo = int(np.floor(-(r + margin) / length))
    k_hi = int(np.ceil((T + r + margin) / length))
    keep, saturated = [], True
    for node in word_ball(gens, tail_length):
        h = node.word
        if h and h[0].lower() == letter:
            continue
        # distance from h o to the axis, over a window that contains the foot
        f = dom_ray.distance_function(node.element)
        _, v = _golden_min(f, -4.0 * (tail_length + 1) * length, 4.0 * (tail_length + 1) * length)
        if v <= r:
            keep.append(h)
            saturated = saturated and len(h) < tail_length
    out, tail_of = [], []
    for k in range(k_lo, k_hi + 1):
        head = letter * k if k >= 0 else letter.upper() * (-k)
        for h in keep:
            if h and k and h[0] == (letter.upper() if k > 0 else letter):
                continue
            out.append(gens.element(head + h))
            tail_of.append(h)
    return AxisOrbit(tuple(out), tuple(tail_of), saturated)


def gens_axis_ray(gens, letter: str, dom: "ConvexDomain | None" = None) -> RayTrace:
    """Axis ray of a generator in the Klein disk (or ``dom``)."""
    return axis_ray(dom or ConvexDomain.unit_ball(gens.dim - 1), gens.alphabet, letter)


def axis_ray_length(a: np.ndarray) -> float:
    lam = np.sort(np.abs(np.linalg.eigvals(a)))
    return 0.5 * float(np.log(lam[-1] / lam[0]))


# ---------------------------------------------------------------------------
# horofunctions

def horofunction(x_far, a, b, dom: ConvexDomain) -> float:
    """``d_H(a, x) - d_H(b, x)``."""
    return hilbert_distance(a, x_far, dom) - hilbert_distance(b, x_far, dom)


@dataclass(frozen=True)
class HoroValue:
    value: float
    cauchy_gap: float
    t_cut: float


def boundary_horofunction(ray: RayTrace, a, b, t_cut: float = 20.0, step: float = 1.0) -> HoroValue:
    """Approximate the horofunction of the ray's endpoint at ``(a, b)``.

    Evaluates ``d_H(a, x) - d_H(b, x)`` at ``x = ray(t_cut)`` and reports the
    change from ``ray(t_cut - step)`` as the Cauchy gap.
    """
    def at(t):
        return ray.distance_from(a, t) - ray.distance_from(b, t)

    v1 = at(t_cut)
    return HoroValue(v1, abs(v1 - at(t_cut - step)), t_cut)


def in_horoball(ray: RayTrace, x, y, t_cut: float = 20.0) -> bool:
    """``y`` lies in the open horoball through ``x`` centred at the ray's endpoint."""
    return boundary_horofunction(ray, x, y, t_cut).value > 0


# ---------------------------------------------------------------------------
# Hausdorff distance between segments

def _segment_points(p, q, dom: ConvexDomain, count: int, length: float | None):
    """Points at equal Hilbert spacing from ``p`` toward ``q`` (boundary ``q`` needs ``length``)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    lo, hi = dom.chord(p, q - p)
    if hi > 1.0 + 1e-12:
        total = hilbert_distance(p, q, dom)
        ray = RayTrace(dom, p, p + hi * (q - p))
    else:
        if length is None:
            raise ValueError("a boundary endpoint needs a truncation length")
        total = length
        ray = RayTrace(dom, p, p + hi * (q - p))
    ts = np.linspace(0.0, total, count)
    return ray, ts, total


def _point_to_path(x, ray: RayTrace, t_max: float, dom: ConvexDomain) -> float:
    f = lambda t: hilbert_distance_or_inf(ray.point(t), x, dom)
    grid = np.linspace(0.0, t_max, 33)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmin(vals))
    _, v = _golden_min(f, grid[max(k - 1, 0)], grid[min(k + 1, 32)])
    return float(v)


def hausdorff_geodesic_bound(p1, q1, p2, q2, dom: ConvexDomain, count: int = 200,
                             length: float = 10.0) -> tuple:
    """Sampled Hausdorff distance of ``[p1, q1]`` and ``[p2, q2]`` against the bound.

    Endpoints ``q1, q2`` may both lie on the boundary, in which case the
    segments are rays truncated at arclength ``length``; each sample is
    compared with the other ray up to ``length + d_H(p1, p2)`` so truncation
    does not inflate the result.

    Returns
    -------
    lhs : float
        Sampled Hausdorff distance.
    rhs : float
        ``max(d_H(p1, p2), d_H(q1, q2))``, or ``d_H(p1, p2)`` for rays.
    """
    r1, t1, L1 = _segment_points(p1, q1, dom, count, length)
    r2, t2, L2 = _segment_points(p2, q2, dom, count, length)
    dp = hilbert_distance(p1, p2, dom)
    rays = dom.level(q1) >= -1e-12 and dom.level(q2) >= -1e-12
    if rays:
        rhs = dp
        ext1 = ext2 = length + dp
    else:
        rhs = max(dp, hilbert_distance(q1, q2, dom))
        ext1, ext2 = L1, L2
    lhs = 0.0
    for t in t1:
        lhs = max(lhs, _point_to_path(r1.point(t), r2, ext2, dom))
    for t in t2:
        lhs = max(lhs, _point_to_path(r2.point(t), r1, ext1, dom))
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# pipeline

@dataclass(frozen=True)
class PipelineReport:
    """Compact fraction, extracted sequence and Morse verdict for one ray."""

    fraction: float
    trend: tuple
    intervals: tuple
    extraction: Extraction
    verdict: object
    status: str
    saturated: bool

    def to_dict(self) -> dict:
        ex = self.extraction
        return {
            "status": self.status,
            "compact_fraction": self.fraction,
            "fraction_trend": [{"T": t, "fraction": f} for t, f in self.trend],
            "intervals": [list(iv) for iv in self.intervals],
            "a_gamma": [{"t": t, "word": g.word} for t, g in ex.entries],
            "a_gamma_c": [ex.entries[k][1].word for k in ex.chosen],
            "tails_saturated": self.saturated,
            "verdict": None if self.verdict is None else self.verdict.to_dict(),
        }


def _measure_upto(merged: Sequence, T: float) -> float:
    return float(sum(max(0.0, min(b, T) - a) for a, b in merged if a < T))


def run_pipeline(gens, dom: ConvexDomain, ray_spec: str, r: float, C: float, T: float,
                 radius: int = 6, tail_length: int = 3, cfg=None) -> PipelineReport:
    """Compact part, extraction and Morse classification along a ray.

    Parameters
    ----------
    gens : GeneratorSet
        Generators acting on ``dom`` (homogeneous coordinates).
    dom : ConvexDomain
    ray_spec : str
        ``"axis:<letter>"`` for the attracting axis of a generator through
        the base point (orbit enumerated structurally, any ``T``), or
        ``"toward:x1,...,xn"`` for the ray from the base point in that chart
        direction (orbit is the word ball of ``radius``; keep ``T`` moderate).
    r, C, T : float
    radius, tail_length : int
    cfg : MorseConfig, optional

    Raises
    ------
    EmptyIntersection
        If no orbit ball meets the ray.
    ValueError
        For non-positive ``r``, ``C`` or ``T`` or a malformed ray spec.
    """
    from regulus.cartan import Theta
    from regulus.errors import TooShort
    from regulus.groups import word_ball
    from regulus.morse import classify_morse

    if r <= 0 or C <= 0 or T <= 0:
        raise ValueError("r, C and T must be positive")
    kind, _, arg = ray_spec.partition(":")
    saturated = True
    if kind == "axis":
        ray = axis_ray(dom, gens.alphabet, arg)
        orb = axis_orbit(gens, arg, T, r, tail_length=tail_length)
        elements, saturated = list(orb.elements), orb.saturated
    elif kind == "toward":
        u = np.array([float(v) for v in arg.split(",")])
        if u.shape != (dom.n,) or not np.any(u):
            raise ValueError(f"direction must have {dom.n} coordinates, not all zero")
        _, hi = dom.chord(dom.base_point, u)
        ray = RayTrace(dom, dom.base_point, dom.base_point + hi * u)
        elements = [node.element for node in word_ball(gens, radius)]
    else:
        raise ValueError(f"ray spec must start with 'axis:' or 'toward:', got {ray_spec!r}")
    ex = extract_sequence(ray, elements, r, C, T)
    measure, merged = union_measure(ex.intervals)
    trend = tuple((T * q, _measure_upto(merged, T * q) / (T * q)) for q in (0.25, 0.5, 1.0))
    theta = Theta.full(dom.n + 1) if dom.n + 1 <= 3 else Theta((1, dom.n), dom.n + 1)
    try:
        verdict = classify_morse(ex.a_gamma_c, theta, cfg)
        status = "pass" if verdict.overall else "fail"
    except TooShort:
        verdict, status = None, "short-input"
    return PipelineReport(measure / T, trend, tuple(merged), ex, verdict, status, saturated)
