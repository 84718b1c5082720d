"""Command-line entry point: ``otfpca simulate | fit | predict | ot``.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dense import fit_dense, predict_dense_path
from .errors import (
    ConfigurationError,
    DomainError,
    IncompatibleGridError,
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    ParseError,
)
from .frechet import center_panel, default_bandwidth
from .grid import unit_grid
from .io import PanelSchema, export_model, ingest_panel, load_config, load_model, read_quantile_file, write_rows
from .measures import wasserstein_distance
from .simulation import RNG_NAME, SimConfig, run_study, sweep
from .sparse import fit_sparse, predict_sparse_path
from .transport import optimal_transport

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

RESULT_COLUMNS = ["n", "N", "m", "design", "reps", "imse_mean", "imse_sd", "failures", "seed"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    return repr(float(x))


# simulate -------------------------------------------------------------------


def _simulation_configs(doc: dict, seed, reps) -> list:
    doc = dict(doc)
    axes = doc.pop("sweep", {}) or {}
    if not isinstance(axes, dict):
        raise ConfigurationError("'sweep' must map setting names to lists of values")
    if seed is not None:
        doc["seed"] = seed
    if reps is not None:
        doc["reps"] = reps
    if doc.get("m") in ("exact", "none"):
        doc["m"] = None
    base = SimConfig.from_mapping(doc)
    for name, values in axes.items():
        if name not in SimConfig.__dataclass_fields__ or not isinstance(values, list) or not values:
            raise ConfigurationError(f"invalid sweep axis {name!r}")
    configs = sweep(base, **axes)
    return configs


def cmd_simulate(args) -> int:
    doc = load_config(args.config)
    configs = _simulation_configs(doc, args.seed, args.reps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, details = [], []
    for cfg in configs:
        res = run_study(cfg)
        rows.append([cfg.n, cfg.N, "exact" if cfg.m is None else cfg.m, cfg.design, cfg.reps,
                     _fmt(res.mean), _fmt(res.sd), res.failures, cfg.seed])
        details.append({
            "config": res.config,
            "imse_mean": res.mean,
            "imse_sd": res.sd,
            "values": list(res.values),
            "failures": res.failures,
            "failure_messages": list(res.failure_messages),
            "wall_time_seconds": res.wall_time,
        })
        print(f"n={cfg.n} N={cfg.N} m={cfg.m} design={cfg.design}: IMSE {res.mean:.6g} ({res.sd:.3g})")
    write_rows(out / "results.csv", RESULT_COLUMNS, rows)
    sidecar = {"rng": RNG_NAME, "source_config": doc, "version": __version__, "studies": details}
    (out / "results.json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# fit ------------------------------------------------------------------------


def cmd_fit(args) -> int:
    if args.mode == "dense" and args.norm_t0 is not None:
        raise UsageError("--norm-t0 applies to --mode sparse; use --kappa for dense fits")
    if args.mode == "sparse" and args.kappa is not None:
        raise UsageError("--kappa applies to --mode dense; use --norm-t0 for sparse fits")
    schema = PanelSchema.load(args.schema)
    if args.grid is not None:
        schema = replace(schema, grid_size=args.grid)
    panel = ingest_panel(args.input, schema)
    M = args.grid or schema.grid_size
    h = args.bandwidth if args.bandwidth is not None else default_bandwidth(panel.counts)
    centered = center_panel(panel, h=h, M=M, G=args.time_grid)
    if args.mode == "dense":
        model = fit_dense(centered, kappa=1.0 if args.kappa is None else args.kappa, h=h, G=args.time_grid, J=args.ncomp)
    else:
        model = fit_sparse(centered, norm_T0=args.norm_t0, link=args.link, h=h, G=args.time_grid, J=args.ncomp)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    out = export_model(model, args.out, panel=centered, config=config, timestamp=stamp)
    print(f"{args.mode} model with J={model.J} components written to {out}")
    return EXIT_OK


# predict --------------------------------------------------------------------


def _parse_times(text: str) -> np.ndarray:
    text = text.strip()
    if text.startswith("grid:"):
        try:
            G = int(text[5:])
        except ValueError:
            raise UsageError(f"bad grid specification {text!r}") from None
        if G < 2:
            raise UsageError("grid:G needs G >= 2")
        return unit_grid(G)
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"bad time list {text!r}") from None


def cmd_predict(args) -> int:
    model = load_model(args.model)
    times = _parse_times(args.times)
    if times.size == 0:
        raise UsageError("no prediction times given")
    if np.any((times < 0) | (times > 1)):
        raise InvalidParameterError("prediction times must lie in [0, 1] (model time units)")
    try:
        if hasattr(model, "kappa"):
            paths = predict_dense_path(model, args.subject, times)
        else:
            paths = predict_sparse_path(model, args.subject, times)
    except KeyError as exc:
        raise InvalidInputError(str(exc.args[0])) from None
    u = unit_grid(model.grid_size)
    rows = [[_fmt(t), _fmt(x), _fmt(y)] for t, row in zip(times, paths) for x, y in zip(u, row)]
    _emit(["t", "u", "T"], rows, args.out)
    return EXIT_OK


def _emit(header, rows, out):
    if out:
        write_rows(out, header, rows)
    else:
        sys.stdout.write(",".join(header) + "\n")
        for r in rows:
            sys.stdout.write(",".join(str(v) for v in r) + "\n")


# ot -------------------------------------------------------------------------


def cmd_ot(args) -> int:
    source = read_quantile_file(args.source)
    target = read_quantile_file(args.target, source.grid_size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        T = optimal_transport(source, target)
    d = wasserstein_distance(source, target, p=args.p)
    rows = [[_fmt(x), _fmt(y)] for x, y in zip(T.grid, T.tvals)]
    _emit(["u", "T"], rows, args.out)
    print(f"d_W{args.p:g} = {d!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otfpca", description="Transport-based FPCA for distribution-valued trajectories.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a Monte Carlo study")
    p.add_argument("--config", required=True, help="JSON or TOML simulation settings")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a dense or sparse model to a panel CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True, help="JSON or TOML panel schema")
    p.add_argument("--mode", choices=["dense", "sparse"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--norm-t0", type=float, dest="norm_t0")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--link", choices=["arctan", "algebraic", "logistic"], default="arctan")
    p.add_argument("--ncomp", type=int)
    p.add_argument("--grid", type=int, help="quantile grid size M")
    p.add_argument("--time-grid", type=int, default=51, dest="time_grid", help="covariance grid size G")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict transports for one subject")
    p.add_argument("--model", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--times", required=True, help="comma list or grid:G")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ot", help="optimal transport between two quantile files")
    p.add_argument("--from", required=True, dest="source")
    p.add_argument("--to", required=True, dest="target")
    p.add_argument("-p", type=float, default=2.0, choices=[1.0, 2.0])
    p.add_argument("--out")
    p.set_defaults(func=cmd_ot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except (UsageError, ConfigurationError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, InvalidInputError, DomainError, IncompatibleGridError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
