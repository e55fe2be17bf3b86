"""Reduced-rank Toeplitz regression in feature (primal) and kernel (dual) form.

Both estimators fit a rank-``r`` operator ``G`` approximating ``F(L)`` where
``F`` is the function realized by a Toeplitz symbol, and return its
eigentriplets ``(nu_i, g_i, h_i)``.

Function representations
------------------------
primal: ``f(x) = c^T (z(x) - mean_z)`` over the ``m`` dictionary features,
        inner product ``<f_a, f_b> = a^H b``.
dual:   ``f(x) = n^{-1/2} sum_k c_k kc(x_k, x)`` with the centered kernel
        ``kc``, inner product ``<f_a, f_b> = a^H Kbar b``.

Left coefficients are scaled so that ``<g_i, h_j> = delta_ij``.
"""

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .symbols import ToeplitzSymbol, symbol_from_dict
from .toeplitz import apply_right, apply_sandwich, build_banded, center

__all__ = [
    "EstimatorConfig",
    "SpectralDecomposition",
    "DefectiveError",
    "PrimalFactor",
    "DualFactor",
    "solve_spd_gep",
    "eig_small",
    "prepare_primal",
    "prepare_dual",
    "fit_primal",
    "fit_dual",
    "fit",
    "whitened_norm",
]

DEFECT_COND = 1e12
TIE_RTOL = 1e-9
NU_ZERO_RTOL = 1e-12


class DefectiveError(np.linalg.LinAlgError):
    """The reduced matrix is (numerically) defective, so no eigenbasis exists."""


@dataclass(frozen=True)
class EstimatorConfig:
    gamma: float
    rank: int
    symbol: ToeplitzSymbol
    mode: str = "primal"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if int(self.rank) != self.rank or self.rank < 1:
            raise ValueError(f"rank must be a positive integer, got {self.rank}")
        if self.mode not in ("primal", "dual"):
            raise ValueError(f"mode must be 'primal' or 'dual', got {self.mode!r}")


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    left_coeffs: np.ndarray   # columns are g_i
    right_coeffs: np.ndarray  # columns are h_i
    singular_values: np.ndarray
    mode: str
    symbol: ToeplitzSymbol
    gamma: float
    rank: int
    n: int
    m: int
    usable: np.ndarray
    left_scaling: np.ndarray  # raw factor each left vector was divided by
    factor: object = field(default=None, repr=False)
    featurizer: object = field(default=None, repr=False)

    @property
    def requested_rank(self):
        return self.rank

    @property
    def effective_rank(self):
        return self.eigenvalues.size

    @property
    def gram(self):
        """Inner-product matrix of the coefficient representation."""
        return None if self.mode == "primal" else self.factor.Kbar

    def inner(self, a, b):
        """``<f_a, f_b>`` for coefficient arrays (vectors or column stacks)."""
        a = np.asarray(a)
        b = np.asarray(b)
        if self.mode == "primal":
            return a.conj().T @ b
        return a.conj().T @ (self.factor.Kbar @ b)

    def basis(self, x):
        """Centered basis evaluations ``B`` so that ``f_c(x) = c^T B``.

        ``x`` is passed through ``featurizer`` when one is attached (states),
        otherwise it must already be raw dictionary features ``m x q``
        (primal) or a cross-Gram ``K(x_train, x)`` of shape ``n x q`` (dual).
        """
        raw = self.featurizer(x) if self.featurizer is not None else np.asarray(x)
        squeeze = raw.ndim == 1
        raw = raw[:, None] if squeeze else raw
        B = self.factor.center_new(raw)
        return B[:, 0] if squeeze else B

    def training_basis(self):
        return self.factor.training_basis()

    def eval_right(self, x):
        return self.right_coeffs.T @ self.basis(x)

    def eval_left(self, x):
        return self.left_coeffs.T @ self.basis(x)

    def with_featurizer(self, fn):
        return replace(self, featurizer=fn)

    def to_dict(self):
        def cpx(a):
            a = np.asarray(a, dtype=complex)
            return np.stack([a.real, a.imag], axis=-1).tolist()

        return {
            "mode": self.mode,
            "symbol": self.symbol.to_dict(),
            "eigenvalues": cpx(self.eigenvalues),
            "singular_values": np.asarray(self.singular_values, dtype=float).tolist(),
            "left_coeffs": cpx(self.left_coeffs),
            "right_coeffs": cpx(self.right_coeffs),
            "n": self.n,
            "m": self.m,
            "gamma": self.gamma,
            "rank": self.rank,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data):
        """Rebuild the spectral data (no training factor; basis evaluation unavailable)."""

        def cpx(a):
            a = np.asarray(a, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        nu = cpx(data["eigenvalues"])
        return cls(
            eigenvalues=nu, left_coeffs=cpx(data["left_coeffs"]),
            right_coeffs=cpx(data["right_coeffs"]),
            singular_values=np.asarray(data["singular_values"]), mode=data["mode"],
            symbol=symbol_from_dict(data["symbol"]), gamma=data["gamma"], rank=data["rank"],
            n=data["n"], m=data["m"], usable=_usable_mask(nu), left_scaling=np.conj(nu),
        )


def solve_spd_gep(Mleft, Mright, r=None, chol=None):
    """Top-``r`` pairs of ``Mleft v = s2 Mright v`` with ``v^H Mright v = 1``.

    ``Mright`` is reduced by its Cholesky factor ``R`` (``Mright = R^H R``);
    pass ``chol=R`` to reuse a factorization. ``s2`` is returned descending.
    """
    Mleft = np.asarray(Mleft)
    N = Mleft.shape[0]
    r = N if r is None else int(r)
    if not 1 <= r <= N:
        raise ValueError(f"r must be between 1 and {N}")
    if chol is None:
        try:
            chol = scipy.linalg.cholesky(Mright, lower=False)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "right-hand matrix is not positive definite; increase gamma"
            ) from exc
    X = scipy.linalg.solve_triangular(chol, Mleft, trans="C", lower=False)
    A = scipy.linalg.solve_triangular(chol, X.conj().T, trans="C", lower=False).conj().T
    A = 0.5 * (A + A.conj().T)
    s2, Y = scipy.linalg.eigh(A, subset_by_index=[N - r, N - 1])
    s2 = s2[::-1]
    Y = Y[:, ::-1]
    V = scipy.linalg.solve_triangular(chol, Y, lower=False)
    return s2, V


def eig_small(M, structure=None):
    """Eigentriplets ``(nu, Wl, Wr)`` of a small square matrix with ``Wl^H Wr = I``.

    ``structure="hermitian"`` or ``"skew"`` uses a unitary eigensolver, which
    makes the eigenvalues exactly real or imaginary. Otherwise a general
    dense solver is used and defectiveness is detected via the condition
    number of the (unit-column) right eigenvector matrix.
    Triplets are sorted by decreasing ``|nu|``.
    """
    M = np.asarray(M)
    if structure == "hermitian":
        nu, Q = scipy.linalg.eigh(0.5 * (M + M.conj().T))
        nu = nu.astype(complex)
        Wl = Wr = Q.astype(complex)
    elif structure == "skew":
        H = 0.5j * (M - M.conj().T)  # i M is Hermitian
        mu, Q = scipy.linalg.eigh(H)
        nu = -1j * mu
        Wl = Wr = Q.astype(complex)
    elif structure is None:
        nu, Wl, Wr = scipy.linalg.eig(M, left=True, right=True)
        nu = nu.astype(complex)
        Wl = Wl.astype(complex)
        Wr = Wr.astype(complex) / np.linalg.norm(Wr, axis=0)
        cond = np.linalg.cond(Wr)
        if not np.isfinite(cond) or cond > DEFECT_COND:
            raise DefectiveError(
                f"reduced matrix is numerically defective (eigenvector condition {cond:.3g}); "
                "the estimator assumes a diagonalizable operator"
            )
        pair = np.einsum("ij,ij->j", Wl.conj(), Wr)
        Wl = Wl / pair.conj()
    else:
        raise ValueError(f"unknown structure {structure!r}")
    order = np.lexsort((-nu.imag, -nu.real, -np.round(np.abs(nu), 12)))
    return nu[order], Wl[:, order], Wr[:, order]


def _structure(symbol):
    return {"hermitian": "hermitian", "skew": "skew"}.get(symbol.symmetry)


def _impose(M, structure):
    if structure == "hermitian":
        return 0.5 * (M + M.conj().T)
    if structure == "skew":
        return 0.5 * (M - M.conj().T)
    return M


def _effective_rank(s2, r):
    # extend r over a tie at the cut so the kept subspace is well defined
    scale = max(abs(s2[0]), np.finfo(float).tiny)
    while r < s2.size and abs(s2[r - 1] - s2[r]) <= TIE_RTOL * scale:
        r += 1
    return r


def _usable_mask(nu):
    if nu.size == 0:
        return np.zeros(0, bool)
    return np.abs(nu) >= NU_ZERO_RTOL * np.abs(nu).max()


def _safe_div(X, d, usable):
    out = np.zeros(X.shape, dtype=complex)
    out[:, usable] = X[:, usable] / d[usable]
    return out


# ---------------------------------------------------------------- primal


@dataclass(frozen=True, eq=False)
class PrimalFactor:
    """Centered features and the Cholesky factor of ``C_gamma`` (reusable across symbols)."""

    Zc: np.ndarray
    mean: np.ndarray
    C: np.ndarray
    gamma: float
    chol: np.ndarray

    @property
    def n(self):
        return self.Zc.shape[1]

    @property
    def m(self):
        return self.Zc.shape[0]

    def center_new(self, Z):
        return Z - self.mean[:, None]

    def training_basis(self):
        return self.Zc


def prepare_primal(Z, gamma):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("Z must be an m x n feature matrix")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    m, n = Z.shape
    if n <= m:
        warnings.warn(f"n={n} <= m={m}: covariance estimate is rank deficient", RuntimeWarning,
                      stacklevel=2)
    mean = Z.mean(axis=1)
    Zc = Z - mean[:, None]
    C = Zc @ Zc.T / n
    C = 0.5 * (C + C.T)
    try:
        chol = scipy.linalg.cholesky(C + gamma * np.eye(m), lower=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("C + gamma I is not positive definite") from exc
    for a in (Zc, mean, C, chol):
        a.setflags(write=False)
    return PrimalFactor(Zc, mean, C, float(gamma), chol)


def primal_core(factor, symbol, rank, method="auto"):
    """Whitened rank-``r`` pieces ``(W, s2, V_r)`` of the primal estimator ``G = V_r V_r^H W``."""
    n, m = factor.n, factor.m
    if rank > m:
        raise ValueError(f"rank {rank} exceeds the number of features {m}")
    T = build_banded(symbol, n)
    W = apply_right(factor.Zc, T, method=method) @ factor.Zc.T / n
    W = _impose(W, _structure(symbol))
    s2, V = solve_spd_gep(W @ W.conj().T, None, r=min(m, rank + 8) if rank < m else m,
                          chol=factor.chol)
    r = _effective_rank(s2, rank)
    if r > s2.size:  # tie spills past the probed block: redo with the full spectrum
        s2, V = solve_spd_gep(W @ W.conj().T, None, r=m, chol=factor.chol)
        r = _effective_rank(s2, rank)
    return W, np.clip(s2[:r], 0.0, None), V[:, :r]


def fit_primal(Z, cfg, factor=None, method="auto"):
    """Primal reduced-rank fit from an ``m x n`` feature matrix ``Z``."""
    if cfg.mode != "primal":
        raise ValueError("fit_primal needs cfg.mode == 'primal'")
    if factor is None:
        factor = prepare_primal(Z, cfg.gamma)
    elif factor.gamma != cfg.gamma:
        raise ValueError("cached factor was built for a different gamma")
    W, s2, V = primal_core(factor, cfg.symbol, cfg.rank, method)
    structure = _structure(cfg.symbol)
    M = _impose(V.conj().T @ W @ V, structure)
    nu, wl, wr = eig_small(M, structure)
    usable = _usable_mask(nu)
    right = V @ wr
    left = _safe_div(W.conj().T @ V @ wl, nu.conj(), usable)
    return SpectralDecomposition(
        eigenvalues=nu, left_coeffs=left, right_coeffs=right, singular_values=np.sqrt(s2),
        mode="primal", symbol=cfg.symbol, gamma=cfg.gamma, rank=cfg.rank, n=factor.n,
        m=factor.m, usable=usable, left_scaling=nu.conj(), factor=factor,
    )


# ---------------------------------------------------------------- dual


@dataclass(frozen=True, eq=False)
class DualFactor:
    """Centered Gram ``Kbar = J K J / n`` with its positive eigenbasis.

    The kernel-space problem is solved in the eigenbasis of ``Kbar`` (which
    is shared by ``Kbar`` and ``Kbar + gamma I``), so this factor is reused
    across all symbols with the same data and ``gamma``.
    """

    Kbar: np.ndarray
    Q: np.ndarray        # n x p, eigenvectors with positive eigenvalue
    lam: np.ndarray      # p positive eigenvalues
    gamma: float
    col_mean: np.ndarray  # mean over training points of K(x_k, .)
    total_mean: float

    @property
    def n(self):
        return self.Kbar.shape[0]

    def center_new(self, Kx):
        # Kx[k, q] = k(x_k, y_q); returns n^{-1/2} kc(x_k, y_q)
        Kx = np.asarray(Kx)
        if Kx.shape[0] != self.n:
            raise ValueError(f"cross-Gram must have {self.n} rows")
        Kc = Kx - Kx.mean(axis=0, keepdims=True) - self.col_mean[:, None] + self.total_mean
        return Kc / np.sqrt(self.n)

    def training_basis(self):
        return np.sqrt(self.n) * self.Kbar


def prepare_dual(K, gamma):
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n):
        raise ValueError("K must be a square Gram matrix")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    K = 0.5 * (K + K.T)
    col_mean = K.mean(axis=1)
    total_mean = float(K.mean())
    Kbar = center(K, mode="gram")
    Kbar = 0.5 * (Kbar + Kbar.T)
    lam, Q = scipy.linalg.eigh(Kbar)
    keep = lam > max(lam[-1], 0.0) * n * np.finfo(float).eps * 10
    lam, Q = lam[keep], Q[:, keep]
    for a in (Kbar, Q, lam, col_mean):
        a.setflags(write=False)
    return DualFactor(Kbar, Q, lam, float(gamma), col_mean, total_mean)


def dual_core(factor, symbol, rank, method="auto"):
    """Pieces ``(T, s2, U_r, V_r)`` of the dual estimator, ``V_r = Kbar U_r``."""
    n = factor.n
    if rank > n:
        raise ValueError(f"rank {rank} exceeds the number of samples {n}")
    T = build_banded(symbol, n)
    TKT = apply_sandwich(factor.Kbar, T, method=method)
    root = np.sqrt(factor.lam)
    QS = factor.Q * root  # Q Lam^{1/2}
    Mleft = QS.conj().T @ TKT @ QS
    Mleft = 0.5 * (Mleft + Mleft.conj().T)
    p = root.size
    r0 = min(rank, p)
    s2, Y = solve_spd_gep(Mleft, None, r=min(p, r0 + 8), chol=np.diag(np.sqrt(factor.lam + factor.gamma)))
    r = _effective_rank(s2, r0)
    if r > s2.size:
        s2, Y = solve_spd_gep(Mleft, None, r=p, chol=np.diag(np.sqrt(factor.lam + factor.gamma)))
        r = _effective_rank(s2, r0)
    Y = Y[:, :r]
    U = factor.Q @ (Y / root[:, None])
    V = QS @ Y
    return T, np.clip(s2[:r], 0.0, None), U, V


def fit_dual(K, cfg, factor=None, method="auto"):
    """Dual (kernel) reduced-rank fit from an ``n x n`` Gram matrix ``K``."""
    if cfg.mode != "dual":
        raise ValueError("fit_dual needs cfg.mode == 'dual'")
    if factor is None:
        factor = prepare_dual(K, cfg.gamma)
    elif factor.gamma != cfg.gamma:
        raise ValueError("cached factor was built for a different gamma")
    T, s2, U, V = dual_core(factor, cfg.symbol, cfg.rank, method)
    structure = _structure(cfg.symbol)
    TV = apply_right(V.conj().T, T.H, method=method).conj().T  # T V
    M = _impose(V.conj().T @ TV, structure)
    nu, wl, wr = eig_small(M, structure)
    usable = _usable_mask(nu)
    if not np.all(usable):
        warnings.warn(f"{np.count_nonzero(~usable)} eigenvalue(s) near zero flagged unusable",
                      RuntimeWarning, stacklevel=2)
    right = U @ wr
    TH_V = apply_right((V @ wl).conj().T, T, method=method).conj().T  # T^H V w
    left = _safe_div(TH_V, nu.conj(), usable)
    return SpectralDecomposition(
        eigenvalues=nu, left_coeffs=left, right_coeffs=right, singular_values=np.sqrt(s2),
        mode="dual", symbol=cfg.symbol, gamma=cfg.gamma, rank=cfg.rank, n=factor.n,
        m=factor.n, usable=usable, left_scaling=nu.conj(), factor=factor,
    )


def whitened_norm(factor, symbol, method="auto"):
    """Spectral norm of ``C_gamma^{-1/2} W C_gamma^{-1/2}``.

    This is the L2 operator norm of the (full-rank) estimated ``T(A)`` on the
    span of the centered features; unlike the RRR singular values it does not
    depend on how the features are scaled.
    """
    if isinstance(factor, PrimalFactor):
        T = build_banded(symbol, factor.n)
        W = apply_right(factor.Zc, T, method=method) @ factor.Zc.T / factor.n
        X = scipy.linalg.solve_triangular(factor.chol, W, trans="C", lower=False)
        X = scipy.linalg.solve_triangular(factor.chol, X.conj().T, trans="C", lower=False).conj().T
    else:
        T = build_banded(symbol, factor.n)
        d = np.sqrt(factor.lam / (factor.lam + factor.gamma))
        QT = apply_right(factor.Q.T, T, method=method)  # Q^T T
        X = d[:, None] * (QT @ factor.Q) * d[None, :]
    return float(np.linalg.norm(X, 2))


def fit(data, cfg, factor=None, method="auto"):
    """Dispatch on ``cfg.mode``: ``data`` is ``Z`` (primal) or ``K`` (dual)."""
    if cfg.mode == "primal":
        return fit_primal(data, cfg, factor, method)
    return fit_dual(data, cfg, factor, method)


def prepare(data, gamma, mode):
    return prepare_primal(data, gamma) if mode == "primal" else prepare_dual(data, gamma)
