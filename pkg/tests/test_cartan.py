import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import kappa_oracle
from regulus.cartan import (CartanVector, LinearFunctional, Theta, fundamental_weight,
                            fundamental_weights, kappa, kappa_batch, opposite_involution,
                            pair_kappas, simple_root, simple_roots, sym_distance, theta_gap,
                            vector_distance)
from regulus.errors import IndexOutOfRange, InvalidTheta
from regulus.matrixcore import random_orthogonal, random_sl

seeds = st.integers(min_value=0, max_value=2**32 - 1)
V = CartanVector([2.0, -1.0, -1.0])


def test_kappa_identity():
    assert np.allclose(kappa(np.eye(3)).coords, 0)


def test_kappa_diagonal():
    assert np.allclose(kappa(np.diag(np.exp([2.0, -1.0, -1.0]))).coords, [2, -1, -1], atol=1e-12)


def test_kappa_matches_oracle(rng):
    for _ in range(20):
        g = random_sl(3, rng)
        assert np.allclose(kappa(g).coords, kappa_oracle(g.matrix), atol=1e-8)


def test_kappa_batch_matches_single(rng):
    gs = [random_sl(4, rng) for _ in range(5)]
    assert np.allclose(kappa_batch(gs), [kappa(g).coords for g in gs])


@pytest.mark.parametrize("k, expected", [(1, 3.0), (2, 0.0)])
def test_simple_root(k, expected):
    assert simple_root(k, V) == expected


@pytest.mark.parametrize("k, expected", [(1, 2.0), (2, 1.0)])
def test_fundamental_weight(k, expected):
    assert fundamental_weight(k, V) == expected


@pytest.mark.parametrize("k", [0, 3])
def test_index_out_of_range(k):
    with pytest.raises(IndexOutOfRange):
        simple_root(k, V)
    with pytest.raises(IndexOutOfRange):
        fundamental_weight(k, V)


def test_simple_root_grows_along_powers():
    # proximal g with |lambda1 / lambda2| = e^1.5: alpha_1(kappa(g^n)) has slope 1.5
    q = random_orthogonal(3, np.random.default_rng(3))
    p = q + 0.3 * np.triu(np.ones((3, 3)), 1)
    lam = np.diag(np.exp([1.0, -0.5, -0.5]))
    g = p @ lam @ np.linalg.inv(p)
    vals = [simple_root(1, kappa(np.linalg.matrix_power(g, n))) for n in (10, 20)]
    assert abs((vals[1] - vals[0]) / 10 - 1.5) < 1e-6


def test_opposite_involution_examples():
    assert np.allclose(opposite_involution([0.0, 0.0, 0.0]).coords, 0)
    assert np.allclose(opposite_involution(V).coords, [1, 1, -2])


@given(seeds)
def test_weight_involution_identity(seed):
    r = np.random.default_rng(seed)
    v = -np.sort(-r.standard_normal(5))
    v -= v.mean()
    iv = opposite_involution(v)
    for k in range(1, 5):
        assert abs(fundamental_weight(k, iv) - fundamental_weight(5 - k, v)) < 1e-12


@given(seeds)
def test_kappa_inverse_is_involution(seed):
    g = random_sl(4, np.random.default_rng(seed), 1.5)
    assert np.allclose(kappa(g.inv()).coords, opposite_involution(kappa(g)).coords, atol=1e-8)


@given(seeds)
def test_roots_nonnegative(seed):
    g = random_sl(4, np.random.default_rng(seed), 2.0)
    assert np.all(simple_roots(kappa(g)) >= 0)


@given(seeds)
def test_k_bi_invariance(seed):
    r = np.random.default_rng(seed)
    g = random_sl(3, r)
    k1, k2 = random_orthogonal(3, r), random_orthogonal(3, r)
    assert np.allclose(kappa(k1 @ g.matrix @ k2).coords, kappa(g).coords, atol=1e-8)


def test_vector_distance_examples():
    x = np.diag(np.exp([1.0, 0.0, -1.0]))
    assert np.allclose(vector_distance(x, x).coords, 0, atol=1e-12)
    assert np.allclose(vector_distance(x, np.eye(3)).coords, [1, 0, -1])
    assert abs(sym_distance(x, np.eye(3)) - np.sqrt(2)) < 1e-12
    assert sym_distance(x, x) < 1e-12


@given(seeds)
def test_vector_distance_swap(seed):
    r = np.random.default_rng(seed)
    x, y = random_sl(3, r), random_sl(3, r)
    lhs = vector_distance(x, y).coords
    rhs = opposite_involution(vector_distance(y, x)).coords
    assert np.linalg.norm(lhs - rhs) < 1e-9


@given(seeds)
def test_sym_distance_pseudometric(seed):
    r = np.random.default_rng(seed)
    x, y, z = (random_sl(3, r, 1.5) for _ in range(3))
    assert abs(sym_distance(x, y) - sym_distance(y, x)) < 1e-9
    assert sym_distance(x, z) <= sym_distance(x, y) + sym_distance(y, z) + 1e-9


@given(seeds)
def test_vector_distance_triangle(seed):
    r = np.random.default_rng(seed)
    x, y, y2 = (random_sl(4, r, 1.5) for _ in range(3))
    diff = abs(vector_distance(x, y).norm() - vector_distance(x, y2).norm())
    assert diff <= sym_distance(y, y2) + 1e-9


def test_pair_kappas(rng):
    gs = [random_sl(3, rng) for _ in range(4)]
    out = pair_kappas(gs, [(0, 1), (2, 3)])
    assert np.allclose(out[1], vector_distance(gs[3], gs[2]).coords, atol=1e-10)


def test_theta_validation():
    assert Theta.full(4).indices == (1, 2, 3)
    assert Theta((3, 1), 4).indices == (1, 3)
    for bad in [(), (1,), (0, 4)]:
        with pytest.raises(InvalidTheta):
            Theta(bad, 4)


def test_theta_gap():
    assert theta_gap([3.0, 1.0, -4.0], Theta.full(3)) == 2.0


def test_linear_functional():
    phi = LinearFunctional([1.0, 0.0])
    assert phi(V) == 2.0
    assert phi.support() == (1,)
    assert phi.dim == 3
    assert LinearFunctional([1.0, 1.0]).supported_in(Theta.full(3))
