import json
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_spectra.features import (
    Dictionary,
    KernelSpec,
    delay_embed,
    evaluate_dictionary,
    gram,
    save_features_csv,
)
from toeplitz_spectra.toeplitz import center


def test_delay_embed():
    x = np.arange(5.0)
    E = delay_embed(x, 2)
    assert E.shape == (4, 2) and np.array_equal(E, np.c_[x[:-1], x[1:]])
    X = np.arange(10.0).reshape(5, 2)
    assert np.array_equal(delay_embed(X, 1), X)
    assert np.array_equal(delay_embed(X, 5), X.reshape(1, -1))
    with pytest.raises(ValueError):
        delay_embed(X, 6)


def test_dictionary_small():
    D = Dictionary(2, max_degree=2)
    assert D.m == 5
    assert D.labels() == ["x0", "x1", "x0^2", "x0*x1", "x1^2"]
    X = np.array([[2.0, 3.0], [1.0, -1.0]])
    Z = evaluate_dictionary(D, X)
    assert np.allclose(Z[:, 0], [2, 3, 4, 6, 9])
    D1 = Dictionary(3)
    X = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(evaluate_dictionary(D1, X), X.T)


def _enumerate(d, w, p, cross):
    # brute-force exponent enumeration
    import itertools

    D = d * w
    out = set()
    for e in itertools.product(range(p + 1), repeat=D):
        deg = sum(e)
        if not 1 <= deg <= p:
            continue
        lags = {k // d for k, v in enumerate(e) if v}
        if cross or len(lags) == 1:
            out.add(e)
    return out


@pytest.mark.parametrize("d, w, p, cross", [(2, 3, 2, False), (2, 2, 3, True), (1, 4, 3, False),
                                            (2, 3, 4, False)])
def test_dictionary_count(d, w, p, cross):
    D = Dictionary(d, window=w, max_degree=p, include_cross=cross)
    assert D.m == D.full_count == len(_enumerate(d, w, p, cross))
    assert set(map(tuple, D.exponents)) == _enumerate(d, w, p, cross)


def test_duffing_recipe_size():
    D = Dictionary(2, window=10, max_degree=4)
    assert D.m == 10 * (comb(6, 4) - 1) == 140
    assert Dictionary(2, window=10, max_degree=4, max_features=100).m == 100
    assert np.all(D.exponents.sum(axis=1) >= 1)  # no constant


def test_dictionary_errors_and_json():
    with pytest.raises(ValueError):
        Dictionary(2, max_degree=0)
    with pytest.raises(ValueError):
        Dictionary(2, basis="legendre")
    D = Dictionary(2, window=3, max_degree=2)
    with pytest.raises(ValueError):
        evaluate_dictionary(D, np.zeros((4, 5)))
    assert Dictionary.from_dict(json.loads(D.to_json())) == D


def test_hermite_basis():
    D = Dictionary(1, max_degree=3, basis="hermite")
    x = np.array([0.5, -1.0, 2.0])
    Z = evaluate_dictionary(D, x)
    assert np.allclose(Z, [x, x ** 2 - 1, x ** 3 - 3 * x])


def test_gram():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((30, 3))
    B = rng.standard_normal((7, 3))
    k = KernelSpec("gaussian", 0.8)
    K = gram(k, A)
    assert np.allclose(np.diag(K), 1)
    assert np.abs(K - K.T).max() <= 1e-14
    assert np.linalg.eigvalsh(K).min() >= -1e-10
    ref = np.exp(-((A[:, None, :] - B[None, :, :]) ** 2).sum(-1) / (2 * 0.8 ** 2))
    assert np.allclose(gram(k, A, B), ref)
    D = Dictionary(3, max_degree=2)
    kl = KernelSpec("linear", dictionary=D)
    assert np.allclose(gram(kl, A, B), evaluate_dictionary(D, A).T @ evaluate_dictionary(D, B))
    for bad in [dict(kind="gaussian", lengthscale=0.0), dict(kind="linear"), dict(kind="poly")]:
        with pytest.raises(ValueError):
            KernelSpec(**bad)
    with pytest.raises(ValueError):
        gram(k, A, B[:, :2])


def test_linear_kernel_bridge():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((50, 2))
    D = Dictionary(2, max_degree=3)
    Z = evaluate_dictionary(D, X)
    K = gram(KernelSpec("linear", dictionary=D), X)
    Zc = center(Z)
    assert np.abs(center(K, "gram") - Zc.T @ Zc / 50).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_shift_equivariance(d, w, p, seed):
    rng = np.random.default_rng(seed)
    traj = rng.standard_normal((12, d))
    D = Dictionary(d, window=w, max_degree=p)
    Z = evaluate_dictionary(D, delay_embed(traj, w))
    Z_shift = evaluate_dictionary(D, delay_embed(traj[1:], w))
    assert np.array_equal(Z_shift, Z[:, 1:])


def test_save_features_csv(tmp_path):
    D = Dictionary(2, max_degree=2)
    Z = evaluate_dictionary(D, np.ones((3, 2)))
    save_features_csv(tmp_path / "f.csv", D, Z)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,x0^2,x0*x1,x1^2" and len(lines) == 4
