"""Command-line front end: ``maxcond {simulate,posterior,condition,cdf,validate}``.

Every output file starts with a comment line carrying the config hash and the
seed.  Replicates are generated in fixed chunks with one random stream per
chunk, so ``--threads`` never changes the output.

Exit codes: 0 success, 1 validation failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from maxcond.config import config_hash, load_model_spec, read_observations, read_points
from maxcond.errors import (CapacityError, ConfigError, InconsistentObservation, MaxCondError,
                            ModelError)
from maxcond.kernels import conditional_cdf, scenario_posterior
from maxcond.models import LogGaussianModel
from maxcond.oracle import BandSpec, reject_condition
from maxcond.rng import chunk_sizes, stream
from maxcond.samplers import decompose, sample_conditional, simulate_fields, simulate_realizations

CHUNK = 10_000


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _write_csv(path: Path, header: str, columns: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _header(args, text: str, command: str) -> str:
    return f"config_hash={config_hash(text)} seed={args.seed} command={command}"


def _site_rows(grid, fields):
    coords = grid.coords
    two = coords.shape[1] == 2
    for r, row in enumerate(fields):
        for sid, v in enumerate(row):
            yield (r, sid, coords[sid, 0], coords[sid, 1] if two else "", v)


def _chunked(args, fn, n: int):
    """Run ``fn(rng, size)`` per fixed chunk, concatenating in chunk order."""
    sizes = chunk_sizes(n, CHUNK)
    work = lambda c: fn(stream(args.seed, c), sizes[c])
    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as ex:
            return list(ex.map(work, range(len(sizes))))
    return [work(c) for c in range(len(sizes))]


def _load(args):
    spec = load_model_spec(args.config)
    if args.tol is not None and isinstance(spec.model, LogGaussianModel):
        spec.model.mvn_rtol = args.tol
    obs = spec.obs
    text = spec.text
    if getattr(args, "obs", None):
        obs = read_observations(args.obs, spec.model.grid)
        text += Path(args.obs).read_text()
    return spec, obs, text


def _need_obs(obs, args):
    if obs is None:
        raise ConfigError("no observations: pass --obs or add 'observations' to the config",
                          None, args.config)
    return obs


def cmd_simulate(args) -> int:
    spec, _, text = _load(args)
    model = spec.model
    out = Path(args.out)
    head = _header(args, text, "simulate")
    if args.decompose:
        K = [int(v) for v in args.decompose.split(",")]
        for k in K:
            if not 0 <= k < model.m:
                raise ConfigError(f"decompose site {k} outside grid", None, args.config)
        parts = _chunked(args, lambda rng, n: simulate_realizations(model, rng, n), args.n)
        reals = [r for p in parts for r in p[0]]
        fields = np.concatenate([p[1] for p in parts])

        def atom_rows():
            for r, real in enumerate(reals):
                dec = decompose(real, K)
                ext = {id(a) for a in dec.extremal.atoms}
                for a_id, atom in enumerate(real.atoms):
                    flag = int(id(atom) in ext)
                    for sid, v in enumerate(atom.values):
                        yield (r, a_id, sid, v, flag)

        _write_csv(out / "atoms.csv", head + f" K={args.decompose}",
                   ["replicate", "atom_id", "site_id", "value", "extremal_flag"], atom_rows())
    else:
        parts = _chunked(args, lambda rng, n: simulate_fields(model, rng, n)[0], args.n)
        fields = np.concatenate(parts)
    _write_csv(out / "fields.csv", head, ["replicate", "site_id", "x", "y", "value"],
               _site_rows(model.grid, fields))
    if args.plot:
        from maxcond.plotting import plot_fields

        plot_fields(model.grid.coords, fields, out / "fields.png", title="unconditional fields")
    return 0


def cmd_posterior(args) -> int:
    spec, obs, text = _load(args)
    obs = _need_obs(obs, args)
    law = scenario_posterior(spec.model, obs)
    out = Path(args.out)
    _write_csv(out / "posterior.csv", _header(args, text, "posterior"),
               ["rgs_string", "log_weight", "pi"], law.table())
    if args.plot:
        from maxcond.plotting import plot_posterior

        plot_posterior(law.table(), out / "posterior.png")
    return 0


def cmd_condition(args) -> int:
    spec, obs, text = _load(args)
    obs = _need_obs(obs, args)
    model = spec.model
    law = scenario_posterior(model, obs)
    out = Path(args.out)
    head = _header(args, text, "condition")
    parts = _chunked(args, lambda rng, n: sample_conditional(model, obs, rng, n, law=law), args.n)
    fields = np.concatenate(parts)
    _write_csv(out / "samples.csv", head, ["replicate", "site_id", "x", "y", "value"],
               _site_rows(model.grid, fields))
    if args.band is not None:
        res = reject_condition(model, obs, BandSpec(obs.y, args.band), args.raw,
                               seed=args.seed, threads=args.threads)
        _write_csv(out / "oracle_samples.csv", head + f" band={args.band} raw={args.raw}",
                   ["replicate", "site_id", "x", "y", "value"], _site_rows(model.grid, res.fields))
    if args.plot:
        from maxcond.plotting import plot_fields

        plot_fields(model.grid.coords, fields, out / "samples.png", obs=obs,
                    title="conditional samples")
    return 0


def cmd_cdf(args) -> int:
    spec, obs, text = _load(args)
    obs = _need_obs(obs, args)
    if not args.points:
        raise ConfigError("--points is required for cdf", None, args.config)
    points = read_points(args.points, spec.model.grid)
    text += Path(args.points).read_text()
    law = scenario_posterior(spec.model, obs)
    coords = spec.model.grid.coords
    rows = []
    for sid, z in points:
        p, se = conditional_cdf(spec.model, obs, [sid], [z], law=law)
        rows.append((sid, z, p, se))
    out = Path(args.out)
    two = coords.shape[1] == 2
    _write_csv(out / "cdf.csv", _header(args, text, "cdf"), ["site_id", "x", "y", "z", "cdf", "se"],
               [(s, coords[s, 0], coords[s, 1] if two else "", z, p, se) for s, z, p, se in rows])
    if args.plot:
        from maxcond.plotting import plot_cdf

        plot_cdf(rows, out / "cdf.png")
    return 0


def cmd_validate(args) -> int:
    from maxcond.validation import Context, load_plan, report_lines, run_validation, summarize

    plan = load_plan(args.config)
    ctx = Context(plan, args.seed, scale=args.scale, threads=args.threads)
    only = None if not args.only else {int(v) for v in args.only.split(",")}
    results = run_validation(ctx, only)
    out = Path(args.out)
    (out / "report.jsonl").write_text("\n".join(report_lines(ctx, results)) + "\n")
    summary = summarize(results)
    for c in sorted(summary):
        print(f"criterion {c}: {'PASS' if summary[c] else 'FAIL'}")
    if args.plot:
        from maxcond.plotting import plot_validation_curves

        plot_validation_curves(ctx.curves, out)
    return 0 if all(summary.values()) else 1


COMMANDS = {"simulate": cmd_simulate, "posterior": cmd_posterior, "condition": cmd_condition,
            "cdf": cmd_cdf, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxcond",
                                description="Conditional sampling of max-i.d. random fields.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="model YAML (validation plan for 'validate')")
        s.add_argument("--seed", type=int, required=True)
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--tol", type=float, default=None, help="relative accuracy of MVN integrals")
        s.add_argument("--plot", action="store_true", help="also write PNG figures")
        if name in ("simulate", "condition"):
            s.add_argument("--n", type=int, default=100, help="number of replicates")
        if name in ("posterior", "condition", "cdf"):
            s.add_argument("--obs", help="CSV with site_id,value")
        if name == "simulate":
            s.add_argument("--decompose", help="comma-separated site ids K; dump atoms with extremal flags")
        if name == "condition":
            s.add_argument("--band", type=float, default=None,
                           help="also write band-rejection samples with this relative half-width")
            s.add_argument("--raw", type=int, default=1_000_000, help="raw draws for --band")
        if name == "cdf":
            s.add_argument("--points", help="CSV of query points: coordinates then z")
        if name == "validate":
            s.add_argument("--scale", type=float, default=1.0, help="multiplier on sample sizes")
            s.add_argument("--only", help="comma-separated criterion numbers")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    if getattr(args, "n", 1) is not None and getattr(args, "n", 1) < 1:
        print("error: --n must be positive", file=sys.stderr)
        return 2
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        print(f"error: {out} is not a directory", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InconsistentObservation, ModelError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MaxCondError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
