"""Cartan projection and the root data of ``SL(d, R)``.

The Cartan projection of ``g`` is the descending vector of log singular
values. Simple roots and fundamental weights are the usual type-A functionals
on that vector; the W-invariant norm is the Euclidean one, so the symmetric
distance ``d_X`` is the Euclidean length of the vector-valued distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from regulus.errors import DimensionMismatch, IndexOutOfRange, InvalidTheta
from regulus.matrixcore import GroupElement, as_element, relative, sing_log_batch


@dataclass(frozen=True)
class CartanVector:
    """Point of the closed positive Weyl chamber: non-increasing, summing to zero."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def to_list(self) -> list[float]:
        return [float(x) for x in self.coords]

    def __getitem__(self, k):
        return self.coords[k]


@dataclass(frozen=True)
class Theta:
    """Symmetric set of simple-root indices in ``1..d-1``.

    Parameters
    ----------
    indices : iterable of int
    d : int
        Matrix size.

    Raises
    ------
    InvalidTheta
        If the set is empty, out of range, or not closed under ``k -> d - k``.
    """

    indices: tuple
    d: int

    def __post_init__(self):
        idx = tuple(sorted(set(int(k) for k in self.indices)))
        if not idx:
            raise InvalidTheta("theta must be non-empty")
        if idx[0] < 1 or idx[-1] > self.d - 1:
            raise InvalidTheta(f"indices {idx} outside 1..{self.d - 1}")
        for k in idx:
            if self.d - k not in idx:
                raise InvalidTheta(f"theta {idx} is not symmetric (missing {self.d - k})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, d: int) -> "Theta":
        return cls(tuple(range(1, d)), d)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def to_list(self) -> list[int]:
        return list(self.indices)


@dataclass(frozen=True)
class LinearFunctional:
    """Functional ``sum_k weights[k-1] * omega_k`` on the Cartan subspace."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0] + 1

    def support(self) -> tuple:
        return tuple(int(k) + 1 for k in np.flatnonzero(self.weights))

    def supported_in(self, theta: Theta) -> bool:
        return set(self.support()) <= set(theta.indices)

    def __call__(self, v) -> float:
        c = _coords(v)
        if c.shape[-1] != self.dim:
            raise DimensionMismatch(f"functional on R^{self.dim} applied to R^{c.shape[-1]}")
        partial = np.cumsum(c, axis=-1)[..., :-1]
        return partial @ self.weights

    def to_list(self) -> list[float]:
        return [float(x) for x in self.weights]


def _coords(v) -> np.ndarray:
    if isinstance(v, CartanVector):
        return v.coords
    return np.asarray(v, dtype=float)


def _check_index(k: int, d: int) -> None:
    if not 1 <= k <= d - 1:
        raise IndexOutOfRange(f"index {k} outside 1..{d - 1}")


def kappa(g) -> CartanVector:
    """Cartan projection: descending log singular values of ``g``."""
    return CartanVector(sing_log_batch([as_element(g)])[0])


def kappa_batch(elements: Sequence) -> np.ndarray:
    """Cartan projections of many elements, shape (n, d)."""
    return sing_log_batch(list(elements))


def simple_root(k: int, v) -> float:
    """``alpha_k(v) = v_k - v_{k+1}`` (1-based)."""
    c = _coords(v)
    _check_index(k, c.shape[-1])
    return c[..., k - 1] - c[..., k]


def simple_roots(v) -> np.ndarray:
    """All simple roots, shape (..., d-1)."""
    c = _coords(v)
    return c[..., :-1] - c[..., 1:]


def fundamental_weight(k: int, v) -> float:
    """``omega_k(v) = v_1 + ... + v_k`` (1-based)."""
    c = _coords(v)
    _check_index(k, c.shape[-1])
    return c[..., :k].sum(axis=-1)


def fundamental_weights(v) -> np.ndarray:
    """All fundamental weights, shape (..., d-1)."""
    c = _coords(v)
    return np.cumsum(c, axis=-1)[..., :-1]


def opposite_involution(v) -> CartanVector:
    """``iota(v) = (-v_d, ..., -v_1)``; equals ``kappa(g^-1)`` when ``v = kappa(g)``."""
    c = _coords(v)
    return CartanVector(-c[::-1])


def theta_gap(v, theta: Theta) -> float:
    """Smallest simple root over ``theta``."""
    roots = simple_roots(v)
    return roots[..., [k - 1 for k in theta.indices]].min(axis=-1)


def vector_distance(x, y) -> CartanVector:
    """Vector-valued distance ``kappa(y^-1 x)``."""
    return kappa(relative(as_element(y), as_element(x)))


def sym_distance(x, y) -> float:
    """Euclidean length of :func:`vector_distance`."""
    return vector_distance(x, y).norm()


def pair_kappas(elements: Sequence[GroupElement], pairs: Iterable) -> np.ndarray:
    """``kappa(g_i^-1 g_j)`` for each ``(i, j)`` in ``pairs``, shape (m, d)."""
    rel = [relative(elements[i], elements[j]) for i, j in pairs]
    if not rel:
        d = elements[0].dim if len(elements) else 0
        return np.zeros((0, d))
    return sing_log_batch(rel)
