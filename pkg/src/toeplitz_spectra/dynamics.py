"""Trajectory generators for the example systems, with CSV/JSON persistence.

All random draws come from a Philox (counter-based) generator seeded by the
caller, so trajectories are reproducible for a given seed.
"""

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "TrajectoryDataset",
    "SimulationError",
    "make_rng",
    "simulate_duffing",
    "simulate_ou",
    "simulate_langevin",
    "solve_lyapunov",
    "add_observation_noise",
    "load_trajectory",
]


class SimulationError(RuntimeError):
    """Non-finite state encountered; ``last_valid`` is the last good sample index."""

    def __init__(self, message, last_valid):
        super().__init__(message)
        self.last_valid = last_valid


def make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class TrajectoryDataset:
    points: np.ndarray
    dt: float
    system: str = "custom"
    seed: int = None
    noise_sigma: float = 0.0
    burn_in: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 2:
            raise ValueError("a trajectory needs at least two samples")
        if not np.all(np.isfinite(pts)):
            raise ValueError("trajectory contains non-finite values")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def times(self):
        return self.burn_in + self.dt * np.arange(self.n)

    def metadata(self):
        return {
            "system": self.system,
            "params": self.params,
            "dt": self.dt,
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "burn_in": self.burn_in,
        }

    def save(self, path):
        """Write ``path`` (CSV ``t,x1..xd``) and a ``.json`` metadata sidecar."""
        path = Path(path)
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(self.d)])
        data = np.column_stack([self.times, self.points])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
        path.with_suffix(".json").write_text(json.dumps(self.metadata(), indent=2, default=_jsonable))
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


def load_trajectory(path):
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta_path = path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    dt = meta.get("dt", float(data[1, 0] - data[0, 0]))
    return TrajectoryDataset(
        data[:, 1:], dt, system=meta.get("system", "custom"), seed=meta.get("seed"),
        noise_sigma=meta.get("noise_sigma", 0.0), burn_in=meta.get("burn_in", float(data[0, 0])),
        params=meta.get("params", {}),
    )


def simulate_duffing(alpha, beta, gamma, delta, omega, x0=(1.0, 0.0), dt=0.1, n=1000,
                     burn_in=100.0, substeps=10):
    """Forced Duffing oscillator ``x'' + delta x' + alpha x + beta x^3 = gamma cos(omega t)``.

    Classical RK4 on the autonomous extension ``(x, y, phase)`` with step
    ``dt / substeps``; samples every ``dt`` after discarding ``burn_in`` seconds.
    """
    if not dt > 0 or substeps < 1:
        raise ValueError("need dt > 0 and substeps >= 1")
    h = dt / substeps
    n_burn = int(round(burn_in / dt))

    def rhs(x, y, ph):
        return y, -delta * y - alpha * x - beta * x ** 3 + gamma * np.cos(ph), omega

    x, y = float(x0[0]), float(x0[1])
    ph = 0.0
    out = np.empty((n, 2))
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is checked below
        for k in range(n_burn + n):
            if k >= n_burn:
                out[k - n_burn] = x, y
            for _ in range(substeps):
                k1 = rhs(x, y, ph)
                k2 = rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], ph + 0.5 * h * k1[2])
                k3 = rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], ph + 0.5 * h * k2[2])
                k4 = rhs(x + h * k3[0], y + h * k3[1], ph + h * k3[2])
                x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                ph += h * omega
            if not (np.isfinite(x) and np.isfinite(y)):
                raise SimulationError("Duffing integration blew up", last_valid=k - n_burn)
    params = dict(alpha=alpha, beta=beta, gamma=gamma, delta=delta, omega=omega,
                  x0=list(map(float, x0)), substeps=substeps)
    return TrajectoryDataset(out, dt, system="duffing", burn_in=n_burn * dt, params=params)


def _euler_maruyama(drift, noise_matrix, x0, dt, n, burn_in, seed, substeps, system, params):
    x = np.array(x0, dtype=float).ravel()
    d = x.size
    h = dt / substeps
    n_burn = int(round(burn_in / dt))
    total = (n_burn + n) * substeps
    rng = make_rng(seed)
    noise = None
    if noise_matrix is not None:
        p = noise_matrix.shape[1]
        noise = (rng.standard_normal((total, p)) * np.sqrt(h)) @ noise_matrix.T
    out = np.empty((n, d))
    step = 0
    for k in range(n_burn + n):
        if k >= n_burn:
            out[k - n_burn] = x
        for _ in range(substeps):
            x = x + h * drift(x)
            if noise is not None:
                x = x + noise[step]
            step += 1
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"{system} integration blew up", last_valid=k - n_burn)
    return TrajectoryDataset(out, dt, system=system, seed=seed, burn_in=n_burn * dt,
                             params=params)


def simulate_ou(A, B, x0, dt, n, burn_in=0.0, seed=0, substeps=10):
    """Ornstein-Uhlenbeck process ``dX = A X dt + B dW`` by Euler-Maruyama."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if np.any(np.linalg.eigvals(A).real >= 0):
        warnings.warn("drift matrix is not Hurwitz; no stationary law", RuntimeWarning,
                      stacklevel=2)
    noise_matrix = None if not np.any(B) else B
    params = {"A": A.tolist(), "B": B.tolist(), "substeps": substeps}
    return _euler_maruyama(lambda x: A @ x, noise_matrix, x0, dt, n, burn_in, seed,
                           substeps, "ou", params)


def simulate_langevin(grad_potential, friction, kT, x0, dt, n, burn_in=0.0, seed=0,
                      substeps=10):
    """Overdamped Langevin ``dX = -grad V / friction dt + sqrt(2 kT / friction) dW``."""
    if not friction > 0 or kT < 0:
        raise ValueError("need friction > 0 and kT >= 0")
    d = np.atleast_1d(x0).size
    noise_matrix = np.sqrt(2.0 * kT / friction) * np.eye(d) if kT > 0 else None
    params = {"friction": friction, "kT": kT, "substeps": substeps}
    return _euler_maruyama(lambda x: -np.asarray(grad_potential(x)) / friction, noise_matrix,
                           x0, dt, n, burn_in, seed, substeps, "langevin", params)


def solve_lyapunov(A, B):
    """Stationary covariance solving ``A S + S A^T = -B B^T`` by a Kronecker solve."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d = A.shape[0]
    Q = B @ B.T
    eye = np.eye(d)
    kron = np.kron(eye, A) + np.kron(A, eye)
    try:
        vec = np.linalg.solve(kron, -Q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular Lyapunov operator: A is not Hurwitz") from exc
    if np.linalg.cond(kron) > 1e14:
        raise np.linalg.LinAlgError("singular Lyapunov operator: A is not Hurwitz")
    S = vec.reshape(d, d, order="F")
    return 0.5 * (S + S.T)


def add_observation_noise(ds, sigma, seed=0):
    """Add i.i.d. ``N(0, sigma^2)`` perturbations to every coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return ds
    rng = make_rng(seed)
    noisy = ds.points + sigma * rng.standard_normal(ds.points.shape)
    params = dict(ds.params, noise_seed=seed)
    return replace(ds, points=noisy, noise_sigma=float(sigma), params=params)
