"""Toeplitz symbols T(z) = sum_j a_j z^j defining generator transforms F(L).

A symbol is stored as its truncated Laurent coefficients ``a_{-l}, ..., a_l``.
Evaluating the symbol at ``z = exp(dt * lam)`` gives the value of the
transform ``F`` at a generator eigenvalue ``lam``; the constructors below
cover the transfer operator (plain, Hermitian and skew parts), both resolvents,
the band-limited inverse and generic trigonometric/Chebyshev filters.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .special import sine_integral

__all__ = [
    "ToeplitzSymbol",
    "UnmappableError",
    "builtin_symbol",
    "transfer_resolvent_symbol",
    "generator_resolvent_symbol",
    "symmetrize",
    "sine_integral",
    "jackson_factors",
    "bandpass_inverse_symbol",
    "trig_symbol",
    "chebyshev_symbol",
    "eval_symbol",
    "truncation_error_bound",
    "inverse_spectral_map",
    "has_inverse",
    "symbol_from_dict",
    "symbol_from_json",
]

KINDS = (
    "identity",
    "cosh",
    "sinh",
    "transfer_resolvent",
    "generator_resolvent",
    "bandpass_inverse",
    "trig",
    "chebyshev",
    "custom",
)
_DISK_TOL = 1e-12
_SYM_RTOL = 1e-13


class UnmappableError(ValueError):
    """Raised when an estimated eigenvalue has no preimage under the transform."""


def _classify(coeffs):
    ell = (len(coeffs) - 1) // 2
    pos = coeffs[ell:]
    neg = coeffs[ell::-1]
    scale = max(np.abs(coeffs).max(), 1e-300)
    tol = _SYM_RTOL * scale
    if np.all(np.abs(neg - np.conj(pos)) <= tol):
        return "hermitian"
    if np.all(np.abs(neg + np.conj(pos)) <= tol):
        return "skew"
    return "general"


@dataclass(frozen=True, eq=False)
class ToeplitzSymbol:
    """Truncated Toeplitz symbol with coefficients ordered ``j = -ell..ell``.

    ``symmetry`` is inferred from the coefficients when not given. ``params``
    carries the construction parameters needed to invert the transform
    (``mu``, ``dt``, band edges, ...).
    """

    coeffs: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    symmetry: str = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size % 2 == 0:
            raise ValueError("coeffs must have odd length 2*ell+1")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        if self.kind not in KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "params", dict(self.params))
        if self.symmetry is None:
            object.__setattr__(self, "symmetry", _classify(c))
        elif self.symmetry not in ("general", "hermitian", "skew"):
            raise ValueError(f"unknown symmetry {self.symmetry!r}")

    @property
    def ell(self):
        return (self.coeffs.size - 1) // 2

    @property
    def offsets(self):
        return np.arange(-self.ell, self.ell + 1)

    def a(self, j):
        """Coefficient ``a_j`` (zero outside the band)."""
        if abs(j) > self.ell:
            return 0j
        return self.coeffs[j + self.ell]

    @property
    def dt(self):
        return self.params.get("dt")

    def is_one_sided(self):
        return not np.any(self.coeffs[: self.ell])

    def to_dict(self):
        params = {}
        for key, val in self.params.items():
            if isinstance(val, (complex, np.complexfloating)):
                params[key] = [float(np.real(val)), float(np.imag(val))]
            elif isinstance(val, (np.floating, np.integer, np.bool_)):
                params[key] = val.item()
            else:
                params[key] = val
        return {
            "kind": self.kind,
            "ell": int(self.ell),
            "symmetry": self.symmetry,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
            "params": params,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def __repr__(self):
        return (
            f"ToeplitzSymbol(kind={self.kind!r}, ell={self.ell}, "
            f"symmetry={self.symmetry!r})"
        )


def symbol_from_dict(data):
    coeffs = np.array([complex(re, im) for re, im in data["coeffs"]])
    if "ell" in data and coeffs.size != 2 * int(data["ell"]) + 1:
        raise ValueError("coeffs length does not match ell")
    params = dict(data.get("params", {}))
    if isinstance(params.get("mu"), (list, tuple)):
        params["mu"] = complex(*params["mu"])
    return ToeplitzSymbol(
        coeffs, kind=data.get("kind", "custom"), params=params,
        symmetry=data.get("symmetry"),
    )


def symbol_from_json(text):
    return symbol_from_dict(json.loads(text))


def _from_one_sided(a, kind, params, symmetry=None):
    # a holds a_0..a_ell, negative lags are zero
    a = np.asarray(a, dtype=complex)
    coeffs = np.concatenate([np.zeros(a.size - 1, dtype=complex), a])
    return ToeplitzSymbol(coeffs, kind=kind, params=params, symmetry=symmetry)


def builtin_symbol(kind, dt=None):
    """Transfer-operator symbols: ``identity`` (z), ``cosh`` and ``sinh``.

    ``cosh`` is the Hermitian part ``(z + 1/z)/2`` and ``sinh`` the skew part
    ``(z - 1/z)/2`` of the identity symbol.
    """
    table = {
        "identity": ([0.0, 0.0, 1.0], "general"),
        "cosh": ([0.5, 0.0, 0.5], "hermitian"),
        "sinh": ([-0.5, 0.0, 0.5], "skew"),
    }
    if kind not in table:
        raise ValueError(f"builtin symbol must be one of {sorted(table)}")
    coeffs, sym = table[kind]
    params = {} if dt is None else {"dt": float(dt)}
    return ToeplitzSymbol(np.array(coeffs), kind=kind, params=params, symmetry=sym)


def transfer_resolvent_symbol(mu, ell, dt=None):
    """Truncated Neumann series of ``(e^mu - z)^{-1}``: ``a_j = e^{-(j+1) mu}``."""
    mu = complex(mu)
    if mu.real <= 0:
        raise ValueError("transfer resolvent needs Re(mu) > 0")
    ell = int(ell)
    if ell < 0:
        raise ValueError("ell must be non-negative")
    j = np.arange(ell + 1)
    params = {"mu": mu}
    if dt is not None:
        params["dt"] = float(dt)
    return _from_one_sided(np.exp(-(j + 1) * mu), "transfer_resolvent", params)


def generator_resolvent_symbol(mu, dt, ell):
    """Trapezoid-rule discretization of ``int_0^{ell dt} e^{-mu t} A_t dt``."""
    mu = complex(mu)
    ell = int(ell)
    if ell < 1:
        raise ValueError("generator resolvent needs ell >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if mu.real < 0:
        raise ValueError("generator resolvent needs Re(mu) >= 0")
    if mu.real == 0:
        warnings.warn(
            "Re(mu) = 0: the Laplace integral converges only through the "
            "truncation window", RuntimeWarning, stacklevel=2,
        )
    t = np.arange(ell + 1) * dt
    a = dt * np.exp(-mu * t)
    a[0] *= 0.5
    a[-1] *= 0.5
    return _from_one_sided(a, "generator_resolvent", {"mu": mu, "dt": float(dt)})


def symmetrize(symbol):
    """Even extension ``b_0 = a_0``, ``b_{+-j} = a_j / 2`` of a one-sided real symbol."""
    if not symbol.is_one_sided():
        raise ValueError("symmetrize expects a one-sided symbol (a_j = 0 for j < 0)")
    a = symbol.coeffs[symbol.ell:]
    if np.any(a.imag != 0):
        raise ValueError("symmetrize needs real coefficients")
    b = 0.5 * a.real
    b[0] = a[0].real
    coeffs = np.concatenate([b[:0:-1], b])
    params = dict(symbol.params, symmetric=True)
    return ToeplitzSymbol(coeffs, kind=symbol.kind, params=params, symmetry="hermitian")


def jackson_factors(ell):
    """Damping weights ``s_j = 1 - (|j|/(ell+1))^2`` for ``j = -ell..ell``."""
    j = np.arange(-ell, ell + 1)
    return 1.0 - (np.abs(j) / (ell + 1.0)) ** 2


def bandpass_inverse_symbol(omega_min, omega_max, ell, jackson=True):
    """Fourier coefficients of ``-i 1{omega_min <= |w| <= omega_max} / w``.

    Band edges are in radians per sample. With ``jackson`` the coefficients
    are damped by :func:`jackson_factors` to suppress Gibbs oscillations.
    """
    omega_min = float(omega_min)
    omega_max = float(omega_max)
    ell = int(ell)
    if not 0.0 <= omega_min < omega_max <= np.pi:
        raise ValueError("need 0 <= omega_min < omega_max <= pi")
    if ell < 1:
        raise ValueError("ell must be >= 1")
    j = np.arange(1, ell + 1)
    a = -(sine_integral(j * omega_max) - sine_integral(j * omega_min)) / np.pi
    coeffs = np.concatenate([-a[::-1], [0.0], a])
    if jackson:
        coeffs = coeffs * jackson_factors(ell)
    params = {"omega_min": omega_min, "omega_max": omega_max, "jackson": bool(jackson)}
    return ToeplitzSymbol(coeffs.astype(complex), kind="bandpass_inverse",
                          params=params, symmetry="skew")


def trig_symbol(alpha, beta, dt=None):
    """Laurent coefficients of ``alpha_0 + sum_k alpha_k cos(k w) + beta_k sin(k w)``."""
    alpha = np.asarray(alpha, dtype=complex).ravel()
    beta = np.asarray(beta, dtype=complex).ravel()
    if alpha.size == 0:
        alpha = np.zeros(1, dtype=complex)
    ell = max(alpha.size - 1, beta.size)
    al = np.zeros(ell + 1, dtype=complex)
    be = np.zeros(ell + 1, dtype=complex)
    al[: alpha.size] = alpha
    be[1: beta.size + 1] = beta
    if not (np.all(np.isfinite(al)) and np.all(np.isfinite(be))):
        raise ValueError("alpha and beta must be finite")
    pos = 0.5 * al[1:] + be[1:] / 2j
    neg = 0.5 * al[1:] - be[1:] / 2j
    coeffs = np.concatenate([neg[::-1], [al[0]], pos])
    params = {} if dt is None else {"dt": float(dt)}
    return ToeplitzSymbol(coeffs, kind="trig", params=params)


def _laurent_mul(p, q):
    # centered Laurent arrays of odd length
    return np.convolve(p, q)


def _laurent_add(p, q):
    n = max(p.size, q.size)
    out = np.zeros(n, dtype=p.dtype)
    out[(n - p.size) // 2:(n + p.size) // 2] += p
    out[(n - q.size) // 2:(n + q.size) // 2] += q
    return out


def chebyshev_symbol(b, c, dt=None):
    """Chebyshev filter ``sum b_k T_k(B) + S sum c_m U_m(B)`` as a Laurent symbol.

    Here ``B = (z + 1/z)/2`` and ``S = (z - 1/z)/(2i)``; the polynomials are
    generated by their three-term recurrences on Laurent coefficient arrays,
    each multiplication by ``B`` widening the band by one.
    """
    b = np.asarray(b, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValueError("b and c must be finite")
    ell = max(b.size - 1, c.size, 0)
    B2 = np.array([1.0, 0.0, 1.0])  # 2B
    S = np.array([-1.0, 0.0, 1.0]) / 2j
    total = np.zeros(2 * ell + 1, dtype=complex)

    t_prev, t_cur = np.array([1.0]), np.array([0.5, 0.0, 0.5])
    for k in range(b.size):
        if k == 0:
            term = t_prev
        elif k == 1:
            term = t_cur
        else:
            t_prev, t_cur = t_cur, _laurent_add(_laurent_mul(B2, t_cur), -t_prev)
            term = t_cur
        total = _laurent_add(total, b[k] * term)

    if c.size:
        u_prev, u_cur = np.array([1.0]), B2.copy()
        acc = np.zeros(1, dtype=complex)
        for m in range(c.size):
            if m == 0:
                term = u_prev
            elif m == 1:
                term = u_cur
            else:
                u_prev, u_cur = u_cur, _laurent_add(_laurent_mul(B2, u_cur), -u_prev)
                term = u_cur
            acc = _laurent_add(acc, c[m] * term)
        total = _laurent_add(total, _laurent_mul(S, acc))
    params = {} if dt is None else {"dt": float(dt)}
    return ToeplitzSymbol(total, kind="chebyshev", params=params)


def eval_symbol(symbol, z):
    """Evaluate ``a_0 + sum_j (a_j z^j + a_{-j} conj(z)^j)`` for ``|z| <= 1``."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 + _DISK_TOL):
        raise ValueError("symbol evaluation requires |z| <= 1")
    ell = symbol.ell
    out = np.full(z.shape, symbol.coeffs[ell], dtype=complex)
    zc = np.conj(z)
    zp = np.ones_like(z)
    zm = np.ones_like(z)
    for j in range(1, ell + 1):
        zp = zp * z
        zm = zm * zc
        out = out + symbol.coeffs[ell + j] * zp + symbol.coeffs[ell - j] * zm
    return out[()] if out.ndim == 0 else out


def truncation_error_bound(symbol, target, region_samples, normal=True, dt=None):
    """Sup over generator-spectrum samples of ``|F(w) - T_l(e^{dt w})|``.

    For non-normal generators the bound is inflated by the Crouzeix constant
    ``1 + sqrt(2)``, in which case the samples should cover the numerical range.
    """
    w = np.atleast_1d(np.asarray(region_samples, dtype=complex))
    if w.size == 0:
        raise ValueError("region_samples is empty")
    if np.any(w.real > 0):
        raise ValueError("region samples must lie in the closed left half-plane")
    dt = _require_dt(symbol, dt)
    err = np.abs(np.asarray(target(w), dtype=complex) - eval_symbol(symbol, np.exp(dt * w)))
    bound = float(err.max())
    return bound if normal else (1.0 + np.sqrt(2.0)) * bound


def _require_dt(symbol, dt):
    dt = symbol.params.get("dt") if dt is None else dt
    if dt is None:
        raise ValueError(f"{symbol.kind} symbol needs a time step dt")
    return float(dt)


def _wrap_nyquist(lam, dt):
    # imaginary part into (-pi/dt, pi/dt]
    band = np.pi / dt
    im = lam.imag
    wrapped = band - np.mod(band - im, 2 * band)
    return lam.real + 1j * wrapped


def has_inverse(symbol):
    return symbol.kind in (
        "identity", "cosh", "sinh", "transfer_resolvent",
        "generator_resolvent", "bandpass_inverse",
    )


def inverse_spectral_map(symbol, nu, dt=None, branch=None):
    """Generator eigenvalue ``lam`` with ``F(lam) = nu`` for registered symbol kinds.

    ``branch`` selects the preimage for ``cosh`` symbols: ``"real"`` reads
    ``nu = e^{dt lam}`` (self-adjoint generators), ``"imag"`` reads
    ``nu = cos(dt w)`` and returns ``lam = i w`` with ``w >= 0``.

    Array input returns NaN where ``nu`` has no preimage on the branch;
    scalar input raises :class:`UnmappableError` instead.
    """
    if not has_inverse(symbol):
        raise ValueError(f"no inverse registered for {symbol.kind} symbols")
    scalar = np.ndim(nu) == 0
    nu = np.atleast_1d(np.asarray(nu, dtype=complex))
    kind = symbol.kind
    dt = _require_dt(symbol, dt)
    lam = np.full(nu.shape, np.nan + 1j * np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "identity":
            ok = nu != 0
            lam[ok] = np.log(nu[ok]) / dt
        elif kind == "cosh":
            if branch not in ("real", "imag"):
                raise ValueError("cosh inverse needs branch='real' or branch='imag'")
            if branch == "real":
                ok = (nu.real > 0) & np.isclose(nu.imag, 0.0, atol=1e-12 * np.abs(nu).max())
                lam[ok] = np.log(nu[ok].real) / dt
            else:
                ok = (np.abs(nu.real) <= 1.0) & np.isclose(
                    nu.imag, 0.0, atol=1e-12 * max(np.abs(nu).max(), 1.0))
                lam[ok] = 1j * np.arccos(nu[ok].real) / dt
        elif kind == "sinh":
            ok = np.abs(nu.imag) <= 1.0
            lam[ok] = 1j * np.arcsin(nu[ok].imag) / dt
        elif kind == "transfer_resolvent":
            mu = complex(symbol.params["mu"])
            ok = nu != 0
            arg = np.exp(mu) - 1.0 / nu[ok]
            ok_idx = np.flatnonzero(ok)
            good = arg != 0
            lam[ok_idx[good]] = np.log(arg[good]) / dt
            ok = np.zeros(nu.shape, bool)
            ok[ok_idx[good]] = True
        elif kind == "generator_resolvent":
            mu = complex(symbol.params["mu"])
            ok = nu != 0
            lam[ok] = mu - 1.0 / nu[ok]
        elif kind == "bandpass_inverse":
            # nu = 1 / (dt lam), lam = i w, |w dt| inside the pass band
            ok = nu != 0
            cand = 1.0 / (dt * nu[ok])
            wdt = np.abs(cand.imag) * dt
            inband = (wdt >= symbol.params["omega_min"]) & (wdt <= symbol.params["omega_max"])
            ok_idx = np.flatnonzero(ok)
            lam[ok_idx[inband]] = cand[inband]
            ok = np.zeros(nu.shape, bool)
            ok[ok_idx[inband]] = True
    lam = np.where(np.isnan(lam), lam, _wrap_nyquist(lam, dt))
    if scalar:
        if np.isnan(lam[0]):
            raise UnmappableError(f"{nu[0]} has no preimage under the {kind} transform")
        return complex(lam[0])
    return lam
