"""Command line front-end: ``toeplitz-spectra <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiment as ex
from .analysis import generator_eigenvalues, save_spectrum_csv
from .dynamics import SimulationError
from .estimators import fit
from .symbols import UnmappableError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (np.linalg.LinAlgError, SimulationError, UnmappableError, ArithmeticError)


def _load(args):
    cfg = ex.read_config(args.config)
    if getattr(args, "trials", None):
        cfg["trials"] = args.trials
    return cfg


def cmd_run(args):
    cfg = _load(args)
    plan = ex.make_plan(cfg, args.output)
    if args.dry_run:
        print(plan.describe())
        return EXIT_OK
    manifest = ex.run_plan(plan, jobs=args.jobs)
    for k, tr in enumerate(manifest["trials"]):
        line = f"trial {k} seed={tr['seed']} {tr['status']} {tr['seconds']:.2f}s"
        if tr["status"] != "ok":
            line += f" ({tr['error']})"
        print(line)
    if manifest.get("summary"):
        print(json.dumps(manifest["summary"], indent=2))
    print(f"artifacts written to {plan.output}")
    if manifest["status"] != "ok":
        failed = [t for t in manifest["trials"] if t["status"] != "ok"]
        print(f"error: {failed[0]['error']}", file=sys.stderr)
        if failed[0].get("error_type") == "ConfigError":
            return EXIT_CONFIG
        return EXIT_NUMERIC
    return EXIT_OK


def _single(args, kind):
    cfg = _load(args)
    cfg["task"] = {**cfg["task"], "kind": kind}
    ex.validate_config(cfg)
    ex.make_plan(cfg)
    return cfg


def cmd_simulate(args):
    cfg = _load(args)
    seed = ex.base_seed(cfg)
    clean = ex.simulate(cfg, seed)
    ds = ex.observe(cfg, clean, seed)
    out = Path(args.output)
    ex.atomic_write(out, lambda fh: ex._write_traj(fh, ds))
    ex.atomic_write(out.with_suffix(".json"),
                    lambda fh: json.dump(ds.metadata(), fh, indent=2, default=ex._json_default))
    print(f"wrote {ds.n} samples to {out}")
    return EXIT_OK


def _fit_from_args(args):
    cfg = _load(args)
    if args.data:
        cfg["system"] = {**cfg["system"], "kind": "csv", "path": args.data, "noise_sigma": 0.0}
    ex.make_plan(cfg)
    seed = ex.base_seed(cfg)
    ds = ex.observe(cfg, ex.simulate(cfg, seed), seed)
    data, featurizer, _, _ = ex.featurize(cfg, ds.points)
    return cfg, fit(data, ex.estimator_config(cfg)).with_featurizer(featurizer)


def cmd_fit(args):
    cfg, dec = _fit_from_args(args)
    ex.atomic_write(Path(args.output), lambda fh: fh.write(dec.to_json(indent=1)))
    print(f"fitted rank {dec.effective_rank} {dec.mode} model -> {args.output}")
    return EXIT_OK


def cmd_spectrum(args):
    cfg, dec = _fit_from_args(args)
    lam = generator_eigenvalues(dec, branch=cfg["estimator"].get("branch"), dt=cfg["system"]["dt"])
    ex.atomic_write(Path(args.output), lambda fh: save_spectrum_csv(fh, dec, lam))
    freqs = np.abs(lam.imag[np.isfinite(lam)]) / (2 * np.pi)
    freqs = np.sort(freqs[freqs > 1e-6])
    if freqs.size:
        print(f"smallest positive frequency: {freqs[0]:.4f}")
    print(f"spectrum -> {args.output}")
    return EXIT_OK


def _task_cmd(kind, filename):
    def cmd(args):
        cfg = _single(args, kind)
        outdir = Path(args.output)
        summary = ex.run_trial(cfg, ex.base_seed(cfg), outdir)
        print(json.dumps(summary, indent=2, default=ex._json_default))
        print(f"{filename} -> {outdir / filename}")
        return EXIT_OK

    return cmd


def cmd_bench(args):
    rows = ex.bench(args.n, args.ell, args.m, seed=args.seed)
    ex.atomic_write(Path(args.output), lambda fh: ex._write_bench(fh, rows))
    for n, ell, path, sec in rows:
        mark = "*" if path == ex.default_path(n, ell) else " "
        print(f"n={n:>7} ell={ell:>5} {path:>4}{mark} {sec:.3e}s")
    if args.fit:
        for n in args.n:
            for ell in args.ell:
                if ell < n - 2:
                    print(f"fit n={n} ell={ell} m={args.m}: {ex.bench_fit(n, ell, args.m):.3e}s")
    print("(* = default dispatch)")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="toeplitz-spectra", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a full experiment from a JSON config")
    r.add_argument("config", help="config path or bundled config name")
    r.add_argument("--jobs", type=int, default=1, help="parallel trial processes")
    r.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
    r.add_argument("--output", help="override the output directory")
    r.add_argument("--trials", type=int, help="override the number of trials")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="simulate the config's system to CSV")
    s.add_argument("config")
    s.add_argument("-o", "--output", default="trajectory.csv")
    s.set_defaults(func=cmd_simulate)

    for name, func, default, helptext in [
        ("fit", cmd_fit, "decomposition.json", "fit and save the decomposition as JSON"),
        ("spectrum", cmd_spectrum, "spectrum.csv", "fit and export the estimated spectrum"),
    ]:
        q = sub.add_parser(name, help=helptext)
        q.add_argument("config")
        q.add_argument("--data", help="trajectory CSV instead of simulating")
        q.add_argument("-o", "--output", default=default)
        q.set_defaults(func=func)

    for name, kind, filename in [("forecast", "forecast", "forecast.csv"),
                                 ("response", "response", "response.csv"),
                                 ("kreiss", "kreiss", "kreiss.csv")]:
        q = sub.add_parser(name, help=f"single-trial {name} task")
        q.add_argument("config")
        q.add_argument("-o", "--output", default=f"{name}_out", help="output directory")
        q.set_defaults(func=_task_cmd(kind, filename))

    b = sub.add_parser("bench", help="time the band and FFT Toeplitz products")
    b.add_argument("--n", type=int, nargs="+", default=[1024, 8192])
    b.add_argument("--ell", type=int, nargs="+", default=[1, 16, 512])
    b.add_argument("--m", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--fit", action="store_true", help="also time end-to-end primal fits")
    b.add_argument("-o", "--output", default="bench.csv")
    b.set_defaults(func=cmd_bench)

    sub.add_parser("list-configs", help="list bundled configs").set_defaults(
        func=lambda a: print("\n".join(ex.bundled_configs())) or EXIT_OK)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
