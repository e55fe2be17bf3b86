"""Config-driven experiment pipeline: simulate -> featurize -> fit -> task.

Configs are JSON documents validated against ``configs/schema.json``. Every
run writes its artifacts atomically and leaves a ``manifest.json`` behind,
including when a task fails.
"""

import hashlib
import json
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import metadata, resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .analysis import (
    Observable,
    forecast,
    generator_eigenvalues,
    kreiss_profile,
    resolvent_response,
    save_spectrum_csv,
)
from .dynamics import (
    add_observation_noise,
    load_trajectory,
    make_rng,
    simulate_duffing,
    simulate_langevin,
    simulate_ou,
)
from .estimators import EstimatorConfig, fit, fit_primal, prepare_dual, prepare_primal
from .features import Dictionary, KernelSpec, delay_embed, evaluate_dictionary, gram
from .symbols import (
    bandpass_inverse_symbol,
    builtin_symbol,
    chebyshev_symbol,
    generator_resolvent_symbol,
    symmetrize,
    transfer_resolvent_symbol,
    trig_symbol,
)
from .toeplitz import apply_right, build_banded, use_fft

SEED_ENV = "TOEPLITZ_SPECTRA_SEED"


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# ------------------------------------------------------------------ config


def schema():
    return json.loads(resources.files(__package__).joinpath("configs/schema.json").read_text())


def bundled_configs():
    root = resources.files(__package__).joinpath("configs")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json")
                  and p.name != "schema.json")


def read_config(path):
    """Load a config from ``path`` or, failing that, from the bundled configs."""
    p = Path(path)
    if p.exists():
        text = p.read_text()
    else:
        name = p.name if p.suffix == ".json" else p.name + ".json"
        if name not in bundled_configs():
            raise ConfigError(f"config {path} not found (bundled: {', '.join(bundled_configs())})")
        text = resources.files(__package__).joinpath("configs", name).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(cfg)


def validate_config(cfg):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = [f"  {'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("config failed validation:\n" + "\n".join(lines))
    feats, est = cfg["features"], cfg["estimator"]
    mode = est.get("mode", "primal")
    if feats["kind"] == "kernel" and mode != "dual":
        raise ConfigError("kernel features need estimator.mode = 'dual'")
    if feats["kind"] == "dictionary" and mode == "dual":
        raise ConfigError("dual mode needs kernel features")
    if cfg["system"]["kind"] == "csv" and "path" not in cfg["system"]:
        raise ConfigError("csv system needs a 'path'")
    task = cfg["task"]
    if task["kind"] == "response" and not {"mu", "ell"} <= task.keys():
        raise ConfigError("response task needs 'mu' and 'ell'")
    if task["kind"] == "kreiss" and not {"mu_re", "ell"} <= task.keys():
        raise ConfigError("kreiss task needs 'mu_re' and 'ell'")
    return cfg


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def base_seed(cfg):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return int(cfg["system"].get("seed", 0))


def trial_seeds(cfg):
    s = base_seed(cfg)
    return [s + k for k in range(cfg.get("trials", 1))]


def symbol_from_config(spec, dt):
    kind = spec["kind"]
    if kind in ("identity", "cosh", "sinh"):
        sym = builtin_symbol(kind, dt=dt)
    elif kind == "transfer_resolvent":
        sym = transfer_resolvent_symbol(_complex(spec["mu"]), spec["ell"], dt=dt)
    elif kind == "generator_resolvent":
        sym = generator_resolvent_symbol(_complex(spec["mu"]), dt, spec["ell"])
    elif kind == "bandpass_inverse":
        sym = bandpass_inverse_symbol(spec["omega_min"], spec["omega_max"], spec["ell"],
                                      jackson=spec.get("jackson", True))
    elif kind == "trig":
        sym = trig_symbol(_carr(spec["alpha"]), _carr(spec.get("beta", [])), dt=dt)
    elif kind == "chebyshev":
        sym = chebyshev_symbol(_carr(spec["b"]), _carr(spec.get("c", [])), dt=dt)
    else:
        raise ConfigError(f"unknown symbol kind {kind!r}")
    return symmetrize(sym) if spec.get("symmetrize") else sym


def _complex(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _carr(values):
    return np.array([_complex(v) for v in values])


@dataclass(frozen=True)
class Plan:
    """Resolved, validated experiment ready to execute."""

    cfg: dict
    seeds: list
    output: Path

    def describe(self):
        c = self.cfg
        sysb, fb, eb, tb = c["system"], c["features"], c["estimator"], c["task"]
        lines = [
            f"experiment: {c.get('name', 'unnamed')} (hash {config_hash(c)[:12]})",
            f"system: {sysb['kind']} n={sysb['n']} dt={sysb['dt']} "
            f"noise_sigma={sysb.get('noise_sigma', 0.0)}",
            f"features: {fb['kind']} " + ", ".join(f"{k}={v}" for k, v in fb.items() if k != "kind"),
            f"estimator: {eb.get('mode', 'primal')} symbol={eb['symbol']['kind']} "
            f"gamma={eb['gamma']} rank={eb['rank']}",
            f"task: {tb['kind']}",
            f"trials: {len(self.seeds)} seeds={self.seeds} vary={c.get('trial_vary', 'noise')}",
            f"output: {self.output}",
        ]
        if fb["kind"] == "dictionary":
            lines.insert(3, f"  dictionary size m={make_dictionary(c, sysb_dim(c)).m}")
        return "\n".join(lines)


def sysb_dim(cfg):
    s = cfg["system"]
    p = s.get("params", {})
    if s["kind"] == "duffing":
        return 2
    if s["kind"] == "ou":
        return len(p.get("A", [[-1.0]]))
    if s["kind"] == "double_well":
        return len(p.get("x0", [1.0]))
    return p.get("dim", 1)


def make_plan(cfg, output=None):
    out = Path(output or cfg.get("output") or f"results/{cfg.get('name', 'experiment')}")
    dt = cfg["system"]["dt"]
    try:
        symbol_from_config(cfg["estimator"]["symbol"], dt)
        EstimatorConfig(cfg["estimator"]["gamma"], cfg["estimator"]["rank"],
                        builtin_symbol("identity"), cfg["estimator"].get("mode", "primal"))
        if cfg["features"]["kind"] == "dictionary":
            make_dictionary(cfg, sysb_dim(cfg))
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return Plan(cfg, trial_seeds(cfg), out)


# ------------------------------------------------------------------ stages


def simulate(cfg, seed, extra=0):
    """Clean trajectory of ``n + window - 1 + extra`` samples."""
    s = cfg["system"]
    p = dict(s.get("params", {}))
    window = cfg["features"].get("window", 1)
    total = s["n"] + window - 1 + extra
    dt, burn = s["dt"], s.get("burn_in", 0.0)
    sub = s.get("substeps", 10)
    vary_traj = cfg.get("trial_vary", "noise") == "trajectory"
    if s["kind"] == "duffing":
        x0 = np.array(p.pop("x0", [1.0, 0.0]), dtype=float)
        if vary_traj:
            x0 = x0 + 0.1 * make_rng(seed).standard_normal(2)
        return simulate_duffing(p.get("alpha", 0.5), p.get("beta", 0.625), p.get("gamma", 2.0),
                                p.get("delta", 1.5), p.get("omega", 1.0), x0=x0, dt=dt, n=total,
                                burn_in=burn, substeps=sub)
    sim_seed = seed if vary_traj else int(s.get("seed", 0))
    if s["kind"] == "ou":
        A = np.atleast_2d(p.get("A", [[-1.0]]))
        B = np.atleast_2d(p.get("B", [[np.sqrt(2.0)]]))
        x0 = p.get("x0", [0.0] * A.shape[0])
        return simulate_ou(A, B, x0, dt, total, burn_in=burn, seed=sim_seed, substeps=sub)
    if s["kind"] == "double_well":
        # V(x) = (x^2 - 1)^2 per coordinate
        return simulate_langevin(lambda x: 4.0 * x * (x * x - 1.0), p.get("friction", 1.0),
                                 p.get("kT", 0.5), p.get("x0", [1.0]), dt, total, burn_in=burn,
                                 seed=sim_seed, substeps=sub)
    if s["kind"] == "csv":
        ds = load_trajectory(s["path"])
        if ds.n < total:
            raise ConfigError(f"{s['path']} has {ds.n} samples, need {total}")
        return ds
    raise ConfigError(f"unknown system {s['kind']!r}")


def observe(cfg, clean, seed):
    sigma = cfg["system"].get("noise_sigma", 0.0)
    return add_observation_noise(clean, sigma, seed=seed) if sigma > 0 else clean


def make_dictionary(cfg, d):
    f = cfg["features"]
    return Dictionary(d, window=f.get("window", 1), max_degree=f.get("max_degree", 1),
                      include_cross=f.get("include_cross", False),
                      basis=f.get("basis", "monomial"), max_features=f.get("max_features"))


def featurize(cfg, points):
    """Return ``(data, featurizer, dictionary_or_kernel, embedded)`` for the estimator."""
    f = cfg["features"]
    E = delay_embed(points, f.get("window", 1))
    n = cfg["system"]["n"]
    train = E[:n]
    if f["kind"] == "dictionary":
        D = make_dictionary(cfg, points.shape[1])

        def featurizer(X):
            X = np.asarray(X)
            return evaluate_dictionary(D, X) if X.ndim == 2 else evaluate_dictionary(D, X[None, :])[:, 0]

        return evaluate_dictionary(D, train), featurizer, D, E
    kspec = KernelSpec(f.get("kernel", "gaussian"), f.get("lengthscale", 1.0),
                       make_dictionary(cfg, points.shape[1]) if f.get("kernel") == "linear" else None)

    def featurizer(X):
        X = np.asarray(X)
        return gram(kspec, train, X) if X.ndim == 2 else gram(kspec, train, X[None, :])[:, 0]

    return gram(kspec, train), featurizer, kspec, E


def estimator_config(cfg):
    e = cfg["estimator"]
    sym = symbol_from_config(e["symbol"], cfg["system"]["dt"])
    return EstimatorConfig(e["gamma"], e["rank"], sym, e.get("mode", "primal"))


def state_observables(cfg, d):
    """Latest-lag coordinates as observables (degree-1 features come first)."""
    w = cfg["features"].get("window", 1)
    idx = cfg["task"].get("observables", list(range(d)))
    return [(w - 1) * d + i for i in idx]


# ------------------------------------------------------------------ tasks


def run_trial(cfg, seed, outdir):
    """Execute one trial and write its artifacts to ``outdir``; returns a summary dict."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    task = cfg["task"]
    kind = task["kind"]
    if kind == "bench":
        rows = bench(task.get("n_list", [1024, 8192]), task.get("ell_list", [1, 64, 512]),
                     task.get("m", 20), seed=seed)
        atomic_write(outdir / "bench.csv", lambda fh: _write_bench(fh, rows))
        return {"rows": len(rows)}
    dt = cfg["system"]["dt"]
    n = cfg["system"]["n"]
    horizon = task.get("horizon", 500) if kind == "forecast" else 0
    clean = simulate(cfg, seed, extra=horizon + 1 if horizon else 0)
    obs = observe(cfg, clean, seed)
    atomic_write(outdir / "trajectory.csv", lambda fh: _write_traj(fh, obs))
    data, featurizer, feat, E = featurize(cfg, obs.points)
    ecfg = estimator_config(cfg)
    d = obs.d
    summary = {}
    if kind in ("fit-spectrum", "forecast"):
        dec = fit(data, ecfg).with_featurizer(featurizer)
        branch = cfg["estimator"].get("branch")
        lam = generator_eigenvalues(dec, branch=branch, dt=dt)
        atomic_write(outdir / "spectrum.csv", lambda fh: save_spectrum_csv(fh, dec, lam))
        atomic_write(outdir / "decomposition.json", lambda fh: fh.write(dec.to_json()))
        freqs = np.abs(lam.imag[np.isfinite(lam)]) / (2 * np.pi)
        freqs = np.sort(freqs[freqs > 1e-6])
        summary["frequencies"] = freqs.tolist()
        summary["base_frequency"] = float(freqs[0]) if freqs.size else None
        if kind == "forecast":
            if ecfg.mode != "primal":
                x0 = E[n]
                obsv = [Observable.from_samples(dec, obs.points[cfg["features"].get("window", 1) - 1:][:n, i],
                                                name=f"x{i + 1}") for i in range(d)]
                idx = list(range(d))
            else:
                idx = state_observables(cfg, d)
                obsv = [Observable.feature(dec.m, i) for i in idx]
                x0 = E[n]
            t = dt * np.arange(1, horizon + 1)
            pred = forecast(dec, obsv, x0, t, branch=branch, dt=dt)
            w = cfg["features"].get("window", 1)
            truth = clean.points[n + w - 1 + 1: n + w - 1 + 1 + horizon]
            cols = cfg["task"].get("observables", list(range(d)))
            truth = truth[:, cols] if ecfg.mode == "primal" else truth
            atomic_write(outdir / "forecast.csv", lambda fh: _write_forecast(fh, t, pred, truth))
            summary["rmse"] = float(np.sqrt(np.mean((pred - truth) ** 2)))
    elif kind == "response":
        if ecfg.mode == "primal":
            fobs = Observable.feature(data.shape[0], state_observables(
                {**cfg, "task": {**task, "observables": [task.get("observable", d - 1)]}}, d)[0])
        else:
            w = cfg["features"].get("window", 1)
            vals = obs.points[w - 1:][:n, task.get("observable", d - 1)]
            factor = prepare_dual(data, ecfg.gamma)
            fobs = _dual_observable(factor, vals)
        theta = np.linspace(task.get("theta_min", 0.005), task.get("theta_max", 1.0),
                            task.get("num", 200))
        curve = resolvent_response(data, ecfg, fobs, task["mu"], theta, dt, task["ell"],
                                   jobs=task.get("jobs"))
        atomic_write(outdir / "response.csv", lambda fh: curve.to_csv(fh))
        pk = curve.peaks()
        summary["peaks_omega"] = (2 * np.pi * curve.theta[pk]).tolist()
        summary["peak_values"] = curve.values[pk].tolist()
        summary["argmax_omega"] = float(2 * np.pi * curve.theta[np.argmax(curve.values)])
    elif kind == "kreiss":
        mu_im = task.get("mu_im", [0.0])
        grid = np.array([complex(a, b) for a in task["mu_re"] for b in mu_im])
        prof = kreiss_profile(data, ecfg, grid, task["ell"], jobs=task.get("jobs"))
        atomic_write(outdir / "kreiss.csv", lambda fh: _write_kreiss(fh, grid, prof))
        summary["kreiss_estimate"] = float(prof.max())
    return summary


def _dual_observable(factor, values):
    n = factor.n
    y = values - values.mean()
    B = factor.training_basis()
    c = np.linalg.solve(B @ B.T / n + 1e-8 * np.eye(n), B @ y / n)
    return Observable(c, "dual", "observable", float(values.mean()))


# ------------------------------------------------------------------ bench


def bench(n_list, ell_list, m=20, seed=0, repeats=3):
    """Time both product paths (after checking they agree); rows ``(n, ell, path, seconds)``."""
    rng = make_rng(seed)
    rows = []
    for n in n_list:
        M = rng.standard_normal((m, n))
        for ell in ell_list:
            sym = transfer_resolvent_symbol(0.1, ell)
            T = build_banded(sym, n)
            ref = apply_right(M, T, method="band")
            alt = apply_right(M, T, method="fft")
            err = np.abs(ref - alt).max() / max(np.abs(ref).max(), 1e-300)
            if err > 1e-10:
                raise ArithmeticError(f"band and FFT paths disagree ({err:.2e}) at n={n}, ell={ell}")
            for path in ("band", "fft"):
                best = np.inf
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    apply_right(M, T, method=path)
                    best = min(best, time.perf_counter() - t0)
                rows.append((n, ell, path, best))
    return rows


def bench_fit(n, ell, m, seed=0):
    """Wall time of an end-to-end primal fit on random data."""
    Z = make_rng(seed).standard_normal((m, n))
    cfg = EstimatorConfig(1e-3, min(10, m), transfer_resolvent_symbol(0.1, ell), "primal")
    t0 = time.perf_counter()
    fit_primal(Z, cfg, factor=prepare_primal(Z, cfg.gamma))
    return time.perf_counter() - t0


def default_path(n, ell):
    return "fft" if use_fft(n, ell) else "band"


# ------------------------------------------------------------------ io


def atomic_write(path, writer, mode="w"):
    """Write through ``writer(fh)`` into a temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _savetxt(fh, header, data):
    np.savetxt(fh, data, delimiter=",", header=header, comments="", fmt="%.17g")


def _write_traj(fh, ds):
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(ds.d)])
    _savetxt(fh, header, np.column_stack([ds.times, ds.points]))


def _write_forecast(fh, t, pred, truth):
    d = pred.shape[1]
    names = ["t"] + [f"pred_{i + 1}" for i in range(d)] + [f"true_{i + 1}" for i in range(d)]
    _savetxt(fh, ",".join(names), np.column_stack([t, pred, truth]))


def _write_kreiss(fh, grid, prof):
    _savetxt(fh, "mu_re,mu_im,value", np.column_stack([grid.real, grid.imag, prof]))


def _write_bench(fh, rows):
    fh.write("n,ell,path,seconds\n")
    for n, ell, path, sec in rows:
        fh.write(f"{n},{ell},{path},{sec:.6e}\n")


def _write_band(fh, header, x, stack):
    stack = np.asarray(stack, dtype=float)
    mean = np.nanmean(stack, axis=0)
    lo, hi = np.nanpercentile(stack, [2.5, 97.5], axis=0)
    _savetxt(fh, header, np.column_stack([x, mean, lo, hi]))


def versions():
    return {"toeplitz_spectra": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "jsonschema": metadata.version("jsonschema")}


def _trial_entry(args):
    cfg, seed, outdir = args
    t0 = time.perf_counter()
    try:
        summary = run_trial(cfg, seed, outdir)
        return {"seed": seed, "status": "ok", "seconds": time.perf_counter() - t0,
                "summary": summary}
    except Exception as exc:  # recorded in the manifest, re-raised by the caller
        return {"seed": seed, "status": "error", "seconds": time.perf_counter() - t0,
                "error": f"{type(exc).__name__}: {exc}", "error_type": type(exc).__name__}


def summarize(plan, results):
    """Mean and 2.5/97.5 percentile bands across trials for the task's main output."""
    kind = plan.cfg["task"]["kind"]
    out = plan.output
    ok = [k for k, r in enumerate(results) if r["status"] == "ok"]
    if not ok:
        return {}
    dirs = [out / f"trial_{k:03d}" for k in ok]
    if kind == "forecast":
        tables = [np.loadtxt(d / "forecast.csv", delimiter=",", skiprows=1, ndmin=2) for d in dirs]
        t = tables[0][:, 0]
        dd = (tables[0].shape[1] - 1) // 2
        for i in range(dd):
            stack = [tb[:, 1 + i] for tb in tables]
            atomic_write(out / f"forecast_summary_{i + 1}.csv",
                         lambda fh, s=stack: _write_band(fh, "t,mean,lo,hi", t, s))
        mean_pred = np.mean([tb[:, 1:1 + dd] for tb in tables], axis=0)
        truth = tables[0][:, 1 + dd:]
        rmses = [results[k]["summary"]["rmse"] for k in ok]
        return {"mean_forecast_rmse": float(np.sqrt(np.mean((mean_pred - truth) ** 2))),
                "trial_rmse_mean": float(np.mean(rmses)),
                "base_frequencies": [results[k]["summary"]["base_frequency"] for k in ok]}
    if kind == "response":
        tables = [np.loadtxt(d / "response.csv", delimiter=",", skiprows=1, ndmin=2) for d in dirs]
        stack = [tb[:, 1] for tb in tables]
        atomic_write(out / "response_summary.csv",
                     lambda fh: _write_band(fh, "theta,mean,lo,hi", tables[0][:, 0], stack))
        return {"argmax_omega": [results[k]["summary"]["argmax_omega"] for k in ok]}
    if kind in ("fit-spectrum",):
        base = np.array([results[k]["summary"]["base_frequency"] or np.nan for k in ok], float)
        kmax = min(len(results[k]["summary"]["frequencies"]) for k in ok)
        if kmax:
            stack = [results[k]["summary"]["frequencies"][:kmax] for k in ok]
            atomic_write(out / "spectrum_summary.csv",
                         lambda fh: _write_band(fh, "order,mean,lo,hi", np.arange(kmax), stack))
        if np.all(np.isnan(base)):  # no oscillatory mode in any trial
            return {"base_frequency_mean": None, "base_frequency_band": None}
        return {"base_frequency_mean": float(np.nanmean(base)),
                "base_frequency_band": np.nanpercentile(base, [2.5, 97.5]).tolist()}
    if kind == "kreiss":
        vals = [results[k]["summary"]["kreiss_estimate"] for k in ok]
        return {"kreiss_mean": float(np.mean(vals)),
                "kreiss_band": np.percentile(vals, [2.5, 97.5]).tolist()}
    return {}


def run_plan(plan, jobs=1):
    """Run all trials, write summaries and the manifest; returns the manifest dict."""
    out = plan.output
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {
        "name": plan.cfg.get("name"),
        "config_hash": config_hash(plan.cfg),
        "config": plan.cfg,
        "seeds": plan.seeds,
        "seed_source": SEED_ENV if os.environ.get(SEED_ENV) is not None else "config",
        "versions": versions(),
        "status": "running",
    }
    args = [(plan.cfg, s, out / f"trial_{k:03d}") for k, s in enumerate(plan.seeds)]
    try:
        if jobs and jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_trial_entry, args))
        else:
            results = [_trial_entry(a) for a in args]
        manifest["trials"] = results
        manifest["summary"] = summarize(plan, results)
        failed = [r for r in results if r["status"] != "ok"]
        manifest["status"] = "error" if failed else "ok"
        if failed:
            manifest["error"] = failed[0]["error"]
    except Exception as exc:
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["wall_seconds"] = time.perf_counter() - t0
        atomic_write(out / "manifest.json",
                     lambda fh: json.dump(manifest, fh, indent=2, default=_json_default))
    return manifest


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj)}")
