"""Feature maps: delay embedding, polynomial dictionaries and kernel Gram matrices."""

import json
from dataclasses import asdict, dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from math import comb

import numpy as np
from numpy.polynomial import hermite_e
from scipy.spatial.distance import cdist

__all__ = [
    "Dictionary",
    "KernelSpec",
    "delay_embed",
    "evaluate_dictionary",
    "gram",
    "save_features_csv",
]


def delay_embed(traj, w):
    """Hankel embedding: row ``i`` concatenates states ``x_i, ..., x_{i+w-1}``."""
    traj = np.asarray(traj, dtype=float)
    if traj.ndim == 1:
        traj = traj[:, None]
    n, d = traj.shape
    w = int(w)
    if w < 1 or w > n:
        raise ValueError(f"window {w} must be between 1 and the trajectory length {n}")
    windows = np.lib.stride_tricks.sliding_window_view(traj, (w, d))[:, 0]
    return windows.reshape(n - w + 1, w * d).copy()


def _exponents(nvars, degree):
    # lex-descending exponent tuples of a fixed total degree
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    return out


@dataclass(frozen=True)
class Dictionary:
    """Polynomial dictionary on (optionally delay-embedded) states.

    Features are ordered graded-lexicographically: by total degree, then by
    lag, then lexicographically within a lag. The constant is excluded since
    centering already removes it. With ``include_cross=False`` each monomial
    involves the coordinates of a single lag only.
    """

    d: int
    window: int = 1
    max_degree: int = 1
    include_cross: bool = False
    basis: str = "monomial"
    max_features: int = None

    def __post_init__(self):
        if self.max_degree < 1:
            raise ValueError("max_degree must be >= 1")
        if self.d < 1 or self.window < 1:
            raise ValueError("d and window must be positive")
        if self.basis not in ("monomial", "hermite"):
            raise ValueError(f"unknown basis {self.basis!r}")

    @property
    def input_dim(self):
        return self.d * self.window

    @property
    def full_count(self):
        """Number of features before ``max_features`` truncation."""
        p = self.max_degree
        if self.include_cross:
            return comb(self.input_dim + p, p) - 1
        return self.window * (comb(self.d + p, p) - 1)

    @cached_property
    def exponents(self):
        D = self.input_dim
        rows = []
        for deg in range(1, self.max_degree + 1):
            if self.include_cross:
                rows.extend(_exponents(D, deg))
            else:
                for lag in range(self.window):
                    for e in _exponents(self.d, deg):
                        full = [0] * D
                        full[lag * self.d:(lag + 1) * self.d] = e
                        rows.append(tuple(full))
        if self.max_features is not None:
            rows = rows[: self.max_features]
        return np.array(rows, dtype=int).reshape(len(rows), D)

    @property
    def m(self):
        return self.exponents.shape[0]

    def labels(self):
        names = []
        for e in self.exponents:
            parts = [f"x{c}" if k == 1 else f"x{c}^{k}" for c, k in enumerate(e) if k]
            names.append("*".join(parts))
        return names

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def evaluate_dictionary(dictionary, points):
    """Feature matrix ``Z`` of shape ``m x q``; column ``k`` is ``z(points[k])``."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != dictionary.input_dim:
        raise ValueError(
            f"points have dimension {X.shape[1]}, dictionary expects {dictionary.input_dim}"
        )
    E = dictionary.exponents
    p = dictionary.max_degree
    # per-coordinate univariate basis values, shape (p+1, q, D)
    if dictionary.basis == "monomial":
        table = X[None, :, :] ** np.arange(p + 1)[:, None, None]
    else:
        table = np.stack([hermite_e.hermeval(X, np.eye(p + 1)[k]) for k in range(p + 1)])
    Z = np.ones((E.shape[0], X.shape[0]))
    cols = np.arange(X.shape[1])
    for i, e in enumerate(E):
        nz = cols[e > 0]
        for c in nz:
            Z[i] *= table[e[c], :, c]
    return Z


def save_features_csv(path, dictionary, Z):
    """Write ``Z`` (one sample per row) with monomial labels as the header."""
    np.savetxt(path, np.asarray(Z).T, delimiter=",", header=",".join(dictionary.labels()),
               comments="")


@dataclass(frozen=True)
class KernelSpec:
    """``gaussian`` kernel ``exp(-|x-x'|^2 / (2 s^2))`` or ``linear`` kernel ``z(x)^T z(x')``."""

    kind: str = "gaussian"
    lengthscale: float = 1.0
    dictionary: Dictionary = None

    def __post_init__(self):
        if self.kind == "gaussian" and not self.lengthscale > 0:
            raise ValueError("gaussian lengthscale must be positive")
        if self.kind == "linear" and self.dictionary is None:
            raise ValueError("linear kernel needs a dictionary")
        if self.kind not in ("gaussian", "linear"):
            raise ValueError(f"unknown kernel {self.kind!r}")


def gram(kspec, A, B=None):
    """Kernel matrix ``[k(a_i, b_j)]`` between rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("A and B must have the same number of columns")
    if kspec.kind == "gaussian":
        sq = cdist(A, B, "sqeuclidean")
        return np.exp(-sq / (2.0 * kspec.lengthscale ** 2))
    ZA = evaluate_dictionary(kspec.dictionary, A)
    ZB = ZA if B is A else evaluate_dictionary(kspec.dictionary, B)
    return ZA.T @ ZB
