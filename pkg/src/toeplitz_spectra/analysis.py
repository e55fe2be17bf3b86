"""Downstream use of a fitted decomposition: amplitudes, forecasts, resolvent
response curves and Kreiss-constant estimates."""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimators import dual_core, prepare, primal_core, whitened_norm
from .toeplitz import apply_right
from .symbols import (
    generator_resolvent_symbol,
    inverse_spectral_map,
    transfer_resolvent_symbol,
)

__all__ = [
    "Observable",
    "ResponseCurve",
    "mode_amplitudes",
    "filter_power",
    "generator_eigenvalues",
    "predict_expectation",
    "forecast",
    "resolvent_response",
    "kreiss_profile",
    "kreiss_estimate",
    "save_spectrum_csv",
    "save_forecast_csv",
]


@dataclass(frozen=True, eq=False)
class Observable:
    """Observable in the coefficient representation of a decomposition's mode.

    ``offset`` is a constant added back when the uncentered value is wanted.
    """

    coeffs: np.ndarray
    mode: str = "primal"
    name: str = "f"
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("observable coefficients must be a finite vector")
        if self.mode not in ("primal", "dual"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def feature(cls, m, index, name=None):
        """The ``index``-th dictionary feature itself (e.g. a state coordinate)."""
        c = np.zeros(m)
        c[index] = 1.0
        return cls(c, "primal", name or f"z{index}")

    @classmethod
    def from_samples(cls, dec, values, reg=1e-8, name="f"):
        """Ridge fit of the observable to its values on the training points."""
        values = np.asarray(values, dtype=float)
        B = dec.training_basis()
        n = B.shape[1]
        if values.shape != (n,):
            raise ValueError(f"need one value per training sample ({n})")
        offset = values.mean()
        y = values - offset
        G = B @ B.T / n
        c = np.linalg.solve(G + reg * np.eye(G.shape[0]), B @ y / n)
        if dec.mode == "primal":
            offset -= c @ dec.factor.mean  # value = c^T z(x) + offset
        return cls(c, dec.mode, name, float(offset))


def _check(dec, h):
    if h.mode != dec.mode:
        raise ValueError(f"{h.mode} observable cannot pair with a {dec.mode} decomposition")
    if h.coeffs.size != dec.left_coeffs.shape[0]:
        raise ValueError(
            f"observable has {h.coeffs.size} coefficients, decomposition expects "
            f"{dec.left_coeffs.shape[0]}"
        )


def mode_amplitudes(dec, h):
    """``<g_i, h>`` for every retained triplet."""
    _check(dec, h)
    return dec.inner(dec.left_coeffs, h.coeffs)


def filter_power(dec, h, s, x):
    """``sum_i nu_i^s <g_i, h> h_i(x)``."""
    if int(s) != s or s < 0:
        raise ValueError("s must be a non-negative integer")
    amp = mode_amplitudes(dec, h)
    return (dec.eigenvalues ** s * amp) @ dec.eval_right(x)


def generator_eigenvalues(dec, branch=None, dt=None):
    """Preimages of the fitted eigenvalues under the symbol's function (NaN if unmappable)."""
    lam = inverse_spectral_map(dec.symbol, dec.eigenvalues, dt=dt, branch=branch)
    lam = np.where(dec.usable, lam, np.nan)
    return lam


def _mean_term(dec, h):
    if dec.mode == "primal":
        return h.offset + float(np.real(h.coeffs @ dec.factor.mean))
    return h.offset


def predict_expectation(dec, h, x, t, include_mean=False, branch=None, dt=None):
    """``sum_i exp(lam_i t) <g_i, h> h_i(x)`` over mappable triplets.

    ``t`` may be a scalar or an array of times; ``x`` a single state or a
    batch. Returns real values when the imaginary residual is negligible.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) and dec.symbol.symmetry != "skew":
        raise ValueError("negative times need a skew (time-reversible) fit")
    lam = generator_eigenvalues(dec, branch, dt)
    ok = ~np.isnan(lam)
    if not np.any(ok):
        raise ValueError("no eigenvalue could be mapped back to the generator")
    if not np.all(ok):
        warnings.warn(f"dropped {np.count_nonzero(~ok)} unmappable triplet(s)", RuntimeWarning,
                      stacklevel=2)
    amp = mode_amplitudes(dec, h)[ok]
    H = dec.eval_right(x)[ok]  # k x q (or k)
    growth = np.exp(np.multiply.outer(t, lam[ok]))  # (*t, k)
    out = (growth * amp) @ H
    scale = max(np.abs(out).max(initial=0.0), np.finfo(float).tiny)
    if np.isrealobj(h.coeffs) and np.abs(np.imag(out)).max(initial=0.0) <= 1e-8 * scale:
        out = np.real(out)
    if include_mean:
        out = out + _mean_term(dec, h)
    return out[()] if np.ndim(out) == 0 else out


def forecast(dec, observables, x0, times, branch=None, dt=None):
    """Forecast several observables from one initial state; rows are times."""
    cols = []
    for h in observables:
        v = predict_expectation(dec, h, x0, times, include_mean=True, branch=branch, dt=dt)
        cols.append(np.real(v))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    theta: np.ndarray
    values: np.ndarray
    mu: float
    observable: str = "f"
    sigma1: np.ndarray = None

    def __post_init__(self):
        if np.shape(self.theta) != np.shape(self.values):
            raise ValueError("theta and values must have the same length")
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("response values are norms and must be non-negative")

    def peaks(self):
        """Indices of interior local maxima."""
        v = self.values
        return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1

    def to_csv(self, path):
        cols = [self.theta, self.values]
        header = "theta,value"
        if self.sigma1 is not None:
            cols.append(self.sigma1)
            header += ",sigma1"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="",
                   fmt="%.17g")


def _rank_image_norm(factor, mode, symbol, rank, f, method):
    """Empirical L2 norm of ``G f`` for the rank-``r`` estimate of ``symbol``, and ``sigma_1``."""
    if mode == "primal":
        W, s2, V = primal_core(factor, symbol, rank, method)
        x = V @ (V.conj().T @ (W @ f))
        sq = np.real(x.conj() @ (factor.C @ x))
    else:
        T, s2, U, V = dual_core(factor, symbol, rank, method)
        Kf = factor.Kbar @ f
        TKf = apply_right(Kf.conj()[None, :], T.H, method=method)[0].conj()  # T Kbar f
        x = U @ (V.conj().T @ TKf)
        Kx = factor.Kbar @ x
        sq = np.real(Kx.conj() @ Kx)
    return np.sqrt(max(sq, 0.0)), np.sqrt(s2[0])


def _map(fn, items, jobs):
    if jobs is None or jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def resolvent_response(data, cfg, f, mu, theta_grid, dt, ell, factor=None, jobs=None,
                       method="auto"):
    """Estimated ``theta -> |(mu + 2 pi i theta - L)^{-1} f|`` on a frequency grid.

    Each grid point fits the trapezoid resolvent symbol at the shifted point
    ``mu + 2 pi i theta`` sharing one right-hand factorization, then takes the
    empirical L2 norm (training samples) of the rank-``r`` image of ``f``.
    ``cfg`` supplies ``gamma``, ``rank`` and ``mode``; its symbol is ignored.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    theta = np.asarray(theta_grid, dtype=float)
    if np.any(np.abs(2 * np.pi * theta) > np.pi / dt * (1 + 1e-12)):
        raise ValueError("theta grid leaves the Nyquist band |2 pi theta| <= pi/dt")
    if f.mode != cfg.mode:
        raise ValueError("observable mode does not match the estimator mode")
    if factor is None:
        factor = prepare(data, cfg.gamma, cfg.mode)
    coeffs = np.asarray(f.coeffs, dtype=complex)

    def one(th):
        sym = generator_resolvent_symbol(mu + 2j * np.pi * th, dt, ell)
        return _rank_image_norm(factor, cfg.mode, sym, cfg.rank, coeffs, method)

    res = _map(one, theta, jobs)
    values = np.array([v for v, _ in res])
    sig = np.array([s for _, s in res])
    return ResponseCurve(theta, values, float(mu), f.name, sig)


def kreiss_profile(data, cfg, mu_grid, ell, factor=None, jobs=None, method="auto"):
    """``|R(mu)| (e^{Re mu} - 1)`` at each grid point.

    ``|R(mu)|`` is the whitened operator norm of the fitted transfer resolvent
    ``(e^mu - A)^{-1}`` on the feature span.
    """
    mu_grid = np.atleast_1d(np.asarray(mu_grid, dtype=complex))
    if mu_grid.size == 0:
        raise ValueError("empty mu grid")
    if np.any(mu_grid.real <= 0):
        raise ValueError("all grid points need Re(mu) > 0")
    if factor is None:
        factor = prepare(data, cfg.gamma, cfg.mode)

    def one(mu):
        sym = transfer_resolvent_symbol(mu, ell)
        return whitened_norm(factor, sym, method) * np.expm1(mu.real)

    return np.array(_map(one, mu_grid, jobs))


def kreiss_estimate(data, cfg, mu_grid, ell, factor=None, jobs=None, method="auto"):
    """Grid lower bound of the Kreiss constant (max of :func:`kreiss_profile`)."""
    return float(kreiss_profile(data, cfg, mu_grid, ell, factor, jobs, method).max())


def save_spectrum_csv(path, dec, lam=None):
    """Columns ``re,im,sigma,nu_re,nu_im``: generator eigenvalue, singular value, raw eigenvalue."""
    nu = dec.eigenvalues
    if lam is None:
        lam = np.full(nu.shape, np.nan + 0j)
    sig = np.resize(dec.singular_values, nu.shape) if dec.singular_values.size else np.zeros(nu.shape)
    data = np.column_stack([lam.real, lam.imag, sig, nu.real, nu.imag])
    np.savetxt(path, data, delimiter=",", header="re,im,sigma,nu_re,nu_im", comments="",
               fmt="%.17g")


def save_forecast_csv(path, t, pred, truth=None):
    pred = np.atleast_2d(np.asarray(pred).T).T
    d = pred.shape[1]
    cols = [t, pred]
    names = ["t"] + [f"pred_{i + 1}" for i in range(d)]
    if truth is not None:
        truth = np.atleast_2d(np.asarray(truth).T).T
        cols.append(truth)
        names += [f"true_{i + 1}" for i in range(truth.shape[1])]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names), comments="",
               fmt="%.17g")
