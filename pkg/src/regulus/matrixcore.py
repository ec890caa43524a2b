"""Dense linear algebra for unimodular matrices.

Group elements are stored as plain ``d x d`` arrays. Elements built from a
generating alphabet also remember their word, which lets
:func:`relative` form ``x^-1 y`` by free reduction instead of multiplying two
large matrices whose product nearly cancels. Without this, log singular
values of far-apart orbit points are lost to rounding once the spread
``log(s_1/s_d)`` exceeds roughly 36.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from regulus import kernels
from regulus.errors import ConvergenceFailure, DimensionMismatch, SingularInput

SVD_TOL = 1e-14
MAX_SWEEPS = 60
DET_FLOOR = 1e-300
# above this spread the small singular values are read off the inverse
TWO_SIDED_SPREAD = 8.0
# beyond this distance from the top a Jacobi singular value loses digits
RESOLVE_SPREAD = 12.0


# ---------------------------------------------------------------------------
# words

def invert_word(word: str) -> str:
    """Formal inverse of a word written in lower/upper case letters."""
    return word[::-1].swapcase()


def reduce_word(word: str) -> str:
    """Freely reduce a word (cancel ``xX`` and ``Xx``)."""
    out: list[str] = []
    for ch in word:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def is_reduced(word: str) -> bool:
    """True when no letter is followed by its inverse."""
    return all(a != b.swapcase() for a, b in zip(word, word[1:]))


class Alphabet:
    """Generator matrices keyed by single lower-case letters.

    Upper-case letters denote inverses. Products are evaluated left to right
    with a cache of letter powers, so long runs such as ``aaaa...`` cost one
    multiplication per new exponent.

    Parameters
    ----------
    matrices : dict
        Mapping from lower-case letter to a unimodular matrix.
    inverses : dict, optional
        Exact inverses, when known in closed form. Missing entries are
        computed with :func:`invert_matrix`.
    """

    def __init__(self, matrices: dict, inverses: dict | None = None):
        if not matrices:
            raise ValueError("alphabet needs at least one generator")
        self.letters = tuple(sorted(matrices))
        for x in self.letters:
            if len(x) != 1 or not x.islower():
                raise ValueError(f"generator label {x!r} must be one lower-case letter")
        dims = {np.asarray(m).shape for m in matrices.values()}
        if len(dims) != 1:
            raise DimensionMismatch("generators have different shapes")
        self.dim = next(iter(dims))[0]
        self._mats: dict[str, np.ndarray] = {}
        inverses = inverses or {}
        for x in self.letters:
            m = np.array(matrices[x], dtype=float)
            inv = inverses.get(x)
            inv = invert_matrix(m) if inv is None else np.array(inv, dtype=float)
            m.setflags(write=False)
            inv.setflags(write=False)
            self._mats[x] = m
            self._mats[x.upper()] = inv
        self._powers: dict[tuple[str, int], np.ndarray] = {}

    def matrix(self, letter: str) -> np.ndarray:
        return self._mats[letter]

    def power(self, letter: str, k: int) -> np.ndarray:
        """``letter**k`` for ``k >= 1``, cached."""
        if k == 1:
            return self._mats[letter]
        hit = self._powers.get((letter, k))
        if hit is not None:
            return hit
        j = k - 1
        while j > 1 and (letter, j) not in self._powers:
            j -= 1
        m = self.power(letter, j)
        for e in range(j + 1, k + 1):
            m = m @ self._mats[letter]
            m.setflags(write=False)
            self._powers[(letter, e)] = m
        return m

    def product(self, word: str) -> np.ndarray:
        """Matrix of a word; the empty word is the identity."""
        out = np.eye(self.dim)
        i = 0
        n = len(word)
        while i < n:
            j = i
            while j < n and word[j] == word[i]:
                j += 1
            out = out @ self.power(word[i], j - i)
            i = j
        return out

    def element(self, word: str) -> "GroupElement":
        """Group element for a (not necessarily reduced) word."""
        w = reduce_word(word)
        for ch in w:
            if ch not in self._mats:
                raise KeyError(f"unknown letter {ch!r}")
        return GroupElement(self.product(w), word=w, alphabet=self)


# ---------------------------------------------------------------------------
# elements

class GroupElement:
    """A point of ``SL^pm(d, R)``, optionally tagged with a word.

    Parameters
    ----------
    matrix : array_like, shape (d, d)
        Entries; assumed unimodular (use :func:`normalize` for raw input).
    word : str, optional
        Reduced word in ``alphabet`` that evaluates to ``matrix``.
    alphabet : Alphabet, optional
    inverse : array_like, optional
        Accurately known inverse matrix.
    """

    __slots__ = ("matrix", "word", "alphabet", "_inverse", "_trusted")

    def __init__(self, matrix, word: str | None = None,
                 alphabet: Alphabet | None = None, inverse=None):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise DimensionMismatch(f"expected a square matrix of size >= 2, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise SingularInput("matrix has non-finite entries")
        m.setflags(write=False)
        self.matrix = m
        self.word = word
        self.alphabet = alphabet if word is not None else None
        if inverse is not None:
            inverse = np.array(inverse, dtype=float)
            inverse.setflags(write=False)
        self._inverse = inverse
        # an inverse is trusted when supplied or evaluated from the word
        self._trusted = inverse is not None or word is not None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def inverse_trusted(self) -> bool:
        """True when the inverse did not come from inverting ``matrix`` itself."""
        return self._trusted

    def inverse_matrix(self) -> np.ndarray:
        """Inverse, from the word when available."""
        if self._inverse is None:
            if self.word is not None:
                inv = self.alphabet.product(invert_word(self.word))
            else:
                inv = invert_matrix(self.matrix)
            inv.setflags(write=False)
            self._inverse = inv
        return self._inverse

    def inv(self) -> "GroupElement":
        w = None if self.word is None else invert_word(self.word)
        out = GroupElement(self.inverse_matrix(), word=w, alphabet=self.alphabet,
                           inverse=self.matrix)
        out._trusted = self._trusted
        return out

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        if self.dim != other.dim:
            raise DimensionMismatch("cannot multiply elements of different dimension")
        if _same_alphabet(self, other):
            return self.alphabet.element(self.word + other.word)
        inv = None
        if self._trusted and other._trusted:
            inv = other.inverse_matrix() @ self.inverse_matrix()
        return GroupElement(self.matrix @ other.matrix, inverse=inv)

    def __repr__(self) -> str:
        tag = f" word={self.word!r}" if self.word is not None else ""
        return f"GroupElement(d={self.dim}{tag})"


def _same_alphabet(x: GroupElement, y: GroupElement) -> bool:
    return (x.word is not None and y.word is not None
            and x.alphabet is y.alphabet)


def as_element(x) -> GroupElement:
    """Coerce arrays to :class:`GroupElement`; elements pass through."""
    if isinstance(x, GroupElement):
        return x
    return GroupElement(x)


def relative(x: GroupElement, y: GroupElement) -> GroupElement:
    """``x^-1 y``, by free reduction when both carry words of one alphabet."""
    x = as_element(x)
    y = as_element(y)
    if x.dim != y.dim:
        raise DimensionMismatch("elements have different dimension")
    if _same_alphabet(x, y):
        return x.alphabet.element(invert_word(x.word) + y.word)
    inv = None
    if x.inverse_trusted and y.inverse_trusted:
        inv = y.inverse_matrix() @ x.matrix
    return GroupElement(x.inverse_matrix() @ y.matrix, inverse=inv)


DEDUP_QUANTUM = 1e-8
DEDUP_TOL = 1e-10


def matrix_key(m: np.ndarray, quantum: float = DEDUP_QUANTUM) -> bytes:
    """Hash key of a matrix rounded to ``quantum`` (relative to its largest entry)."""
    scale = max(1.0, float(np.abs(m).max()))
    return np.round(m / (scale * quantum)).astype(np.int64).tobytes()


def same_matrix(a: np.ndarray, b: np.ndarray, tol: float = DEDUP_TOL) -> bool:
    scale = max(1.0, float(np.abs(a).max()))
    return bool(np.abs(a - b).max() <= tol * scale)


def find_duplicate(elements: Sequence):
    """First pair ``(i, j)``, ``i < j``, of coinciding matrices, or None.

    Candidates are bucketed by a quantized hash and confirmed with an exact
    comparison; neighbouring buckets are not probed, so matrices straddling a
    rounding boundary can slip through (acceptable for exact repeats).
    """
    seen: dict = {}
    for j, e in enumerate(elements):
        m = as_element(e).matrix
        key = matrix_key(m)
        for i in seen.get(key, ()):
            if same_matrix(as_element(elements[i]).matrix, m):
                return i, j
        seen.setdefault(key, []).append(j)
    return None


def identity(d: int) -> GroupElement:
    return GroupElement(np.eye(d), inverse=np.eye(d))


def normalize(raw) -> GroupElement:
    """Scale a nonsingular matrix so that ``|det| = 1``.

    Parameters
    ----------
    raw : array_like, shape (d, d)

    Returns
    -------
    GroupElement
        ``raw / |det(raw)|**(1/d)``.

    Raises
    ------
    SingularInput
        If an entry is not finite or ``|det| < 1e-300``.
    """
    m = np.array(raw, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise DimensionMismatch(f"expected a square matrix of size >= 2, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise SingularInput("matrix has non-finite entries")
    sign, logdet = np.linalg.slogdet(m)
    if sign == 0 or logdet < np.log(DET_FLOOR):
        raise SingularInput("matrix is singular to working precision")
    return GroupElement(m * np.exp(-logdet / m.shape[0]))


# ---------------------------------------------------------------------------
# inversion

def _det(m: np.ndarray) -> float:
    d = m.shape[0]
    if d == 1:
        return float(m[0, 0])
    if d == 2:
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    total = 0.0
    for j in range(d):
        minor = np.delete(m[1:], j, axis=1)
        total += (-1) ** j * m[0, j] * _det(minor)
    return total


def _adjugate(m: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    cof = np.empty_like(m)
    for i in range(d):
        rows = np.delete(m, i, axis=0)
        for j in range(d):
            cof[i, j] = (-1) ** (i + j) * _det(np.delete(rows, j, axis=1))
    return cof.T


def _gauss_jordan(m: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    aug = np.hstack([m.astype(float), np.eye(d)])
    for col in range(d):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if aug[piv, col] == 0.0:
            raise SingularInput("matrix is singular")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for r in range(d):
            if r != col and aug[r, col] != 0.0:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, d:]


def invert_matrix(m) -> np.ndarray:
    """Inverse via the adjugate for ``d <= 4``, pivoted elimination otherwise."""
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    if d <= 4:
        det = _det(m)
        if det == 0.0 or not np.isfinite(det):
            raise SingularInput("matrix is singular")
        return _adjugate(m) / det
    return _gauss_jordan(m)


def inverse(g: GroupElement) -> GroupElement:
    """Inverse element (word-aware)."""
    return as_element(g).inv()


# ---------------------------------------------------------------------------
# singular values

@dataclass(frozen=True)
class SvdResult:
    """``g = left @ diag(exp(sing_log)) @ right.T`` with descending ``sing_log``."""

    left_frame: np.ndarray
    sing_log: np.ndarray
    right_frame: np.ndarray


def _complete_columns(u: np.ndarray, sing_log: np.ndarray) -> np.ndarray:
    """Replace columns belonging to zero singular values by an orthonormal completion."""
    bad = ~np.isfinite(sing_log)
    if not bad.any():
        return u
    good = u[:, ~bad]
    q, _ = np.linalg.qr(np.hstack([good, np.eye(u.shape[0])]))
    out = u.copy()
    out[:, bad] = q[:, good.shape[1]:good.shape[1] + int(bad.sum())]
    return out


def svd_batch(mats, backend: str | None = None):
    """Jacobi SVD of a stack of matrices.

    Parameters
    ----------
    mats : array_like, shape (n, d, d)

    Returns
    -------
    left, sing_log, right : ndarrays
        Shapes (n, d, d), (n, d), (n, d, d).

    Raises
    ------
    ConvergenceFailure
        If any matrix exhausts the sweep cap.
    """
    arr = np.ascontiguousarray(mats, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatch(f"expected a stack of square matrices, got {arr.shape}")
    if arr.shape[0] == 0:
        d = arr.shape[1]
        return np.zeros((0, d, d)), np.zeros((0, d)), np.zeros((0, d, d))
    u, s, v, ok = kernels.jacobi_svd_batch(arr, SVD_TOL, MAX_SWEEPS, backend=backend)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise ConvergenceFailure(f"Jacobi sweeps exhausted on matrix {bad}")
    for i in np.flatnonzero(~np.all(np.isfinite(s), axis=1)):
        u[i] = _complete_columns(u[i], s[i])
    return u, s, v


def svd(g) -> SvdResult:
    """Singular value decomposition by one-sided Jacobi rotations.

    Parameters
    ----------
    g : GroupElement or array_like

    Returns
    -------
    SvdResult
        Frames are orthogonal and ``sing_log`` is non-increasing.
    """
    m = as_element(g).matrix
    u, s, v = svd_batch(m[None])
    return SvdResult(u[0], s[0], v[0])


def sing_log_batch(elements: Sequence, backend: str | None = None) -> np.ndarray:
    """Log singular values for many elements, read two-sidedly.

    When the spectrum is wide and the element knows its inverse accurately
    (from a word or supplied by the caller), each index is read from whichever
    of ``g`` and ``g^-1`` keeps it nearer the top of the spectrum, where
    Jacobi is accurate. For ``d = 3`` the middle value is then recovered from
    the unimodular constraint if neither side resolves it.
    """
    els = [as_element(e) for e in elements]
    if not els:
        return np.zeros((0, 0))
    mats = np.stack([e.matrix for e in els])
    trusted = np.array([e.inverse_trusted for e in els])
    return sing_log_arrays(mats, lambda idx: np.stack([els[i].inverse_matrix() for i in idx]),
                           trusted, backend=backend)


def sing_log_arrays(mats: np.ndarray, inverses=None, trusted=None,
                    backend: str | None = None) -> np.ndarray:
    """Array form of :func:`sing_log_batch`.

    Parameters
    ----------
    mats : ndarray, shape (n, d, d)
    inverses : ndarray or callable, optional
        Accurate inverses, either as an array aligned with ``mats`` or as a
        callable mapping an index array to the stacked inverses.
    trusted : ndarray of bool, optional
        Which inverses may be used; defaults to all when ``inverses`` is given.
    """
    mats = np.asarray(mats, dtype=float)
    _, s, _ = svd_batch(mats, backend=backend)
    if inverses is None:
        return s
    if trusted is None:
        trusted = np.ones(len(mats), dtype=bool)
    wide = np.flatnonzero((s[:, 0] - s[:, -1] > TWO_SIDED_SPREAD) & trusted)
    if wide.size == 0:
        return s
    invs = inverses(wide) if callable(inverses) else np.asarray(inverses, dtype=float)[wide]
    _, s_inv, _ = svd_batch(invs, backend=backend)
    alt = -s_inv[:, ::-1]
    direct = s[wide]
    # log-distance of index i from the top of each spectrum
    cost_direct = direct[:, :1] - direct
    cost_alt = alt - alt[:, -1:]
    merged = np.where(cost_direct <= cost_alt, direct, alt)
    cost = np.minimum(cost_direct, cost_alt)
    d = s.shape[1]
    if d == 3:
        middle = -(merged[:, 0] + merged[:, 2])
        use = cost[:, 1] > RESOLVE_SPREAD
        merged[use, 1] = middle[use]
    merged = -np.sort(-merged, axis=1)
    out = s.copy()
    out[wide] = merged
    return out


# ---------------------------------------------------------------------------
# subspaces

@dataclass(frozen=True)
class Subspace:
    """Column span of an orthonormal ``d x k`` frame."""

    frame: np.ndarray

    @property
    def k(self) -> int:
        return self.frame.shape[1]

    @property
    def ambient(self) -> int:
        return self.frame.shape[0]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T


def orthonormalize(mat) -> np.ndarray:
    """Orthonormal basis of the column span (modified Gram-Schmidt, two passes)."""
    a = np.array(mat, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    q = np.zeros_like(a)
    for j in range(a.shape[1]):
        col = a[:, j].copy()
        for _ in range(2):
            for i in range(j):
                col -= (q[:, i] @ col) * q[:, i]
        nrm = np.linalg.norm(col)
        if nrm == 0.0:
            raise SingularInput("columns are linearly dependent")
        q[:, j] = col / nrm
    return q


def subspace(mat) -> Subspace:
    """Subspace spanned by the columns of ``mat``."""
    return Subspace(orthonormalize(mat))


def extend_frame(cols: list, candidates: np.ndarray, count: int) -> list:
    """Append ``count`` orthonormal vectors drawn greedily from the candidate columns.

    Each step projects every candidate off the current columns (two passes)
    and keeps the one with the largest residual.
    """
    cols = list(cols)
    cand = [candidates[:, j].astype(float) for j in range(candidates.shape[1])]
    for _ in range(count):
        best, best_norm = None, -1.0
        for v in cand:
            r = v.copy()
            for _ in range(2):
                for c in cols:
                    r -= (c @ r) * c
            nrm = float(np.linalg.norm(r))
            if nrm > best_norm:
                best, best_norm = r, nrm
        if best is None or best_norm <= 1e-12:
            raise SingularInput("candidates do not span enough directions")
        cols.append(best / best_norm)
    return cols


def complete_frame(frame) -> np.ndarray:
    """Extend an orthonormal ``d x k`` frame to an orthogonal ``d x d`` matrix."""
    f = np.asarray(frame, dtype=float)
    d, k = f.shape
    cols = extend_frame([f[:, j] for j in range(k)], np.eye(d), d - k)
    return np.column_stack(cols)


def _padded_singular_values(mat: np.ndarray) -> np.ndarray:
    """Singular values of a tall ``d x k`` matrix, descending (zero-padded Jacobi)."""
    d, k = mat.shape
    sq = np.zeros((d, d))
    sq[:, :k] = mat
    _, s, _ = svd_batch(sq[None])
    vals = np.exp(s[0][:k])
    return np.where(np.isfinite(vals), vals, 0.0)


def principal_angles(u: Subspace, v: Subspace) -> np.ndarray:
    """Principal angles between equal-dimensional subspaces, descending.

    Cosines come from ``u^T v`` and sines from the residual of ``v`` against
    ``u``; each angle is read from whichever is better conditioned.

    Raises
    ------
    DimensionMismatch
        If the subspaces differ in dimension or ambient space.
    """
    if u.k != v.k or u.ambient != v.ambient:
        raise DimensionMismatch(f"subspaces of dims {u.k}, {v.k} in R^{u.ambient}, R^{v.ambient}")
    k = u.k
    cross = u.frame.T @ v.frame
    _, s, _ = svd_batch(cross[None])
    cos = np.exp(s[0])
    cos = np.where(np.isfinite(cos), cos, 0.0)  # ascending angle order
    resid = v.frame - u.frame @ cross
    sin = _padded_singular_values(resid)[::-1]  # ascending angle order
    angles = np.empty(k)
    for i in range(k):
        if sin[i] < np.sqrt(0.5):
            angles[i] = np.arcsin(min(sin[i], 1.0))
        else:
            angles[i] = np.arccos(min(cos[i], 1.0))
    return np.clip(angles, 0.0, np.pi / 2)[::-1]


def grassmann_distance(u: Subspace, v: Subspace) -> float:
    """Sine of the largest principal angle, i.e. ``||(I - P_u) P_v||``."""
    if u.k != v.k or u.ambient != v.ambient:
        raise DimensionMismatch("subspaces differ in dimension")
    resid = v.frame - u.frame @ (u.frame.T @ v.frame)
    return float(min(_padded_singular_values(resid)[0], 1.0))


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_sl(d: int, rng: np.random.Generator, scale: float = 1.0) -> GroupElement:
    """Random element of ``SL(d, R)``: ``I + scale * Gaussian``, normalized, det fixed to +1."""
    while True:
        m = np.eye(d) + scale * rng.standard_normal((d, d))
        try:
            g = normalize(m)
        except SingularInput:
            continue
        if np.linalg.det(g.matrix) < 0:
            flipped = g.matrix.copy()
            flipped[:, 0] = -flipped[:, 0]
            g = GroupElement(flipped)
        return g
