"""Banded Toeplitz matrices on trajectory indices and their fast application.

The matrix ``T_n`` has entries ``(T_n)[i, i+j] = n a_j / (n - |j|)`` for
``|j| <= ell``, so that ``(1/n) Z J T_n J Z^T`` is the ``a``-weighted sum of
empirical lagged cross-covariances. ``T_n`` is never formed densely outside
of :meth:`BandedToeplitz.dense`.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

__all__ = [
    "BandedToeplitz",
    "build_banded",
    "apply_right",
    "apply_sandwich",
    "center",
    "use_fft",
]


@dataclass(frozen=True, eq=False)
class BandedToeplitz:
    coeffs_rescaled: np.ndarray  # j = -ell..ell
    n: int

    @property
    def ell(self):
        return (self.coeffs_rescaled.size - 1) // 2

    @property
    def H(self):
        """Conjugate transpose, again banded Toeplitz."""
        return BandedToeplitz(np.conj(self.coeffs_rescaled[::-1]), self.n)

    def diagonal(self, j):
        return self.coeffs_rescaled[j + self.ell] if abs(j) <= self.ell else 0j

    def dense(self):
        T = np.zeros((self.n, self.n), dtype=complex)
        for j in range(-self.ell, self.ell + 1):
            T += self.diagonal(j) * np.eye(self.n, k=j)
        return T

    def to_csv(self, path):
        """Dump the dense matrix (real and imaginary blocks) for inspection."""
        T = self.dense()
        if np.all(T.imag == 0):
            np.savetxt(path, T.real, delimiter=",")
        else:
            np.savetxt(path, np.hstack([T.real, T.imag]), delimiter=",",
                       header=f"real block then imaginary block, n={self.n}")


def build_banded(symbol, n):
    """Rescaled banded Toeplitz matrix of ``symbol`` for a length-``n`` trajectory."""
    n = int(n)
    ell = symbol.ell
    if ell >= n - 2:
        raise ValueError(f"bandwidth {ell} too large for n={n} (need ell < n - 2)")
    if ell > n / 2:
        warnings.warn(
            f"ell={ell} > n/2: lag rescaling n/(n-|j|) exceeds 2 and inflates variance",
            RuntimeWarning, stacklevel=2,
        )
    j = symbol.offsets
    coeffs = n * symbol.coeffs / (n - np.abs(j))
    coeffs.setflags(write=False)
    return BandedToeplitz(coeffs, n)


def use_fft(n, ell, threshold=None):
    """Default dispatch: band product when ``ell <= log2(n)``, FFT otherwise."""
    limit = np.log2(n) if threshold is None else threshold
    return ell > limit


def _kernel(T):
    c = T.coeffs_rescaled
    return c.real if np.all(c.imag == 0) else c


def _apply_band(M, T):
    n = T.n
    kernel = _kernel(T)
    out = np.zeros(M.shape, dtype=np.result_type(M.dtype, kernel.dtype))
    for j in range(-T.ell, T.ell + 1):
        a = kernel[j + T.ell]
        if a == 0:
            continue
        if j >= 0:
            out[:, j:] += a * M[:, : n - j]
        else:
            out[:, : n + j] += a * M[:, -j:]
    return out


def _apply_fft(M, T, workers=None):
    # row-wise linear convolution with the band, via zero-padded (circulant) FFT
    n, ell = T.n, T.ell
    length = scipy.fft.next_fast_len(n + 2 * ell)
    kernel = _kernel(T)
    if np.isrealobj(M) and np.isrealobj(kernel):
        fk = scipy.fft.rfft(kernel, length)
        fm = scipy.fft.rfft(M, length, axis=1, workers=workers)
        full = scipy.fft.irfft(fm * fk, length, axis=1, workers=workers)
    else:
        fk = scipy.fft.fft(kernel, length)
        fm = scipy.fft.fft(M, length, axis=1, workers=workers)
        full = scipy.fft.ifft(fm * fk, length, axis=1, workers=workers)
    return full[:, ell: ell + n]


def apply_right(M, T, method="auto", threshold=None, workers=None):
    """Return ``M @ T_n`` for a ``p x n`` matrix ``M``.

    ``method`` is ``"auto"``, ``"band"``, ``"fft"`` or ``"dense"`` (test oracle).
    """
    M = np.asarray(M)
    squeeze = M.ndim == 1
    M = np.atleast_2d(M)
    if M.shape[1] != T.n:
        raise ValueError(f"column count {M.shape[1]} does not match T.n={T.n}")
    if method == "auto":
        method = "fft" if use_fft(T.n, T.ell, threshold) else "band"
    if method == "band":
        out = _apply_band(M, T)
    elif method == "fft":
        out = _apply_fft(M, T, workers)
    elif method == "dense":
        out = M @ T.dense()
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[0] if squeeze else out


def apply_sandwich(K, T, method="auto", threshold=None):
    """Return the Hermitian matrix ``T_n K T_n^H`` for Hermitian ``K``."""
    K = np.asarray(K)
    if K.shape != (T.n, T.n):
        raise ValueError(f"K must be {T.n}x{T.n}, got {K.shape}")
    TH = T.H
    Y = apply_right(K, TH, method, threshold)  # K T^H
    out = apply_right(Y.conj().T, TH, method, threshold).conj().T  # T K T^H
    return 0.5 * (out + out.conj().T)


def center(M, mode="columns"):
    """Apply the centering projector ``J_n = I - ee^T/n``.

    ``columns``: ``M J_n`` (subtract each row's mean over the ``n`` columns).
    ``gram``: ``(1/n) J_n M J_n`` for an ``n x n`` Gram matrix.
    """
    M = np.asarray(M)
    if mode == "columns":
        return M - M.mean(axis=1, keepdims=True)
    if mode == "gram":
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError("gram centering needs a square matrix")
        Mc = M - M.mean(axis=0, keepdims=True)
        Mc = Mc - Mc.mean(axis=1, keepdims=True)
        return Mc / n
    raise ValueError(f"unknown centering mode {mode!r}")
