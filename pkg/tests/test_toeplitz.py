import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_spectra.symbols import ToeplitzSymbol, builtin_symbol, symmetrize, transfer_resolvent_symbol
from toeplitz_spectra.toeplitz import apply_right, apply_sandwich, build_banded, center, use_fft


def dense_oracle(symbol, n):
    T = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(-symbol.ell, symbol.ell + 1):
            if 0 <= i + j < n:
                T[i, i + j] = n * symbol.a(j) / (n - abs(j))
    return T


def test_build_banded_entries():
    T = build_banded(ToeplitzSymbol([0, 0, 0, 0, 1]), 10)
    assert T.dense()[0, 2] == 1.25 and T.dense()[7, 9] == 1.25
    T = build_banded(builtin_symbol("identity"), 5)
    D = T.dense()
    assert np.allclose(np.diag(D, 1), 5 / 4) and np.count_nonzero(D) == 4
    sym = transfer_resolvent_symbol(0.2 + 0.4j, 6)
    assert np.allclose(build_banded(sym, 20).dense(), dense_oracle(sym, 20))


def test_build_banded_limits():
    with pytest.raises(ValueError):
        build_banded(ToeplitzSymbol(np.ones(7)), 5)
    with pytest.warns(RuntimeWarning):
        build_banded(ToeplitzSymbol(np.ones(13)), 10)


def test_structure_preserved():
    herm = build_banded(symmetrize(transfer_resolvent_symbol(0.3, 5)), 30).dense()
    assert np.array_equal(herm, herm.conj().T)
    skew = build_banded(builtin_symbol("sinh"), 30).dense()
    assert np.array_equal(skew, -skew.conj().T)


def test_shift_structure():
    n = 12
    T = build_banded(builtin_symbol("identity"), n)
    M = np.eye(n)[:4]
    out = apply_right(M, T)
    assert np.allclose(out[:, 1:], n / (n - 1) * M[:, :-1])
    assert np.all(out[:, 0] == 0)
    x = np.arange(n, dtype=float)[None, :] ** 2
    out = apply_right(x, T)
    assert np.allclose(out[0, 1:], n / (n - 1) * x[0, :-1])


def test_zero_symbol():
    T = build_banded(ToeplitzSymbol(np.zeros(5)), 20)
    M = np.random.default_rng(0).standard_normal((3, 20))
    for method in ("band", "fft", "dense"):
        assert not np.any(apply_right(M, T, method=method))
    assert not np.any(apply_sandwich(np.eye(20), T))


def test_apply_right_fft_vs_dense():
    rng = np.random.default_rng(1)
    sym = ToeplitzSymbol(rng.standard_normal(5))
    T = build_banded(sym, 64)
    M = rng.standard_normal((4, 64))
    ref = M @ dense_oracle(sym, 64)
    assert np.abs(apply_right(M, T, method="fft") - ref).max() <= 1e-10 * np.abs(ref).max()
    assert np.allclose(apply_right(M[0], T), ref[0])
    with pytest.raises(ValueError):
        apply_right(M[:, :10], T)
    with pytest.raises(ValueError):
        apply_right(M, T, method="magic")


def test_dispatch_threshold():
    assert not use_fft(1024, 10) and use_fft(1024, 11)
    assert use_fft(1024, 3, threshold=2)


@settings(max_examples=40, deadline=None)
@given(st.integers(64, 4096), st.floats(0, 1), st.booleans(), st.integers(0, 2**32 - 1))
def test_band_fft_agree(n, frac, cplx, seed):
    rng = np.random.default_rng(seed)
    ell = max(1, int(frac * n / 4))
    c = rng.standard_normal(2 * ell + 1) + (1j * rng.standard_normal(2 * ell + 1) if cplx else 0)
    T = build_banded(ToeplitzSymbol(c), n)
    M = rng.standard_normal((2, n))
    a = apply_right(M, T, method="band")
    b = apply_right(M, T, method="fft")
    assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


def test_sandwich():
    n = 20
    T = build_banded(builtin_symbol("identity"), n)
    S = apply_sandwich(np.eye(n), T)
    expected = np.diag(np.r_[np.full(n - 1, (n / (n - 1)) ** 2), 0.0])
    assert np.allclose(S, expected)
    rng = np.random.default_rng(2)
    A = rng.standard_normal((n, 5))
    K = A @ A.T
    T = build_banded(builtin_symbol("sinh"), n)
    S = apply_sandwich(K, T)
    D = dense_oracle(builtin_symbol("sinh"), n)
    assert np.allclose(S, D @ K @ D.conj().T, atol=1e-12)
    assert np.abs(S - S.conj().T).max() <= 1e-12
    assert np.linalg.eigvalsh(S).min() >= -1e-10
    with pytest.raises(ValueError):
        apply_sandwich(np.eye(n - 1), T)


def test_center_examples():
    M = np.tile([[1.0], [2.0]], (1, 7))
    assert not np.any(center(M))
    e = np.ones((6, 6))
    assert np.allclose(center(e, "gram"), 0)
    rng = np.random.default_rng(3)
    M = rng.standard_normal((3, 8))
    C = center(M)
    assert np.allclose(C.sum(axis=1), 0)
    with pytest.raises(ValueError):
        center(M, "rows")
    with pytest.raises(ValueError):
        center(M, "gram")


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_center_idempotent(n, p, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((p, n)) * 10
    assert np.abs(center(center(M)) - center(M)).max() <= 1e-13
    K = M.T @ M
    once = center(K, "gram")
    assert np.abs(center(once * n, "gram") - once).max() <= 1e-12 * max(1, np.abs(once).max())
    assert np.allclose(once, once.T)


def test_to_csv(tmp_path):
    T = build_banded(builtin_symbol("cosh"), 6)
    T.to_csv(tmp_path / "t.csv")
    assert np.allclose(np.loadtxt(tmp_path / "t.csv", delimiter=","), T.dense().real)
    T = build_banded(transfer_resolvent_symbol(0.2 + 0.3j, 2), 6)
    T.to_csv(tmp_path / "c.csv")
    back = np.loadtxt(tmp_path / "c.csv", delimiter=",")
    assert np.allclose(back[:, :6] + 1j * back[:, 6:], T.dense())
