"""Command-line entry point.

Exit codes: 0 success, 2 config or parse error, 3 statistical degeneracy,
4 insufficient (or degenerate) data file.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, JobConfig, load_config, parse_config
from .exceptions import DegenerateDataError, DomainError, InputError, InsufficientDataError
from .procedures import PROCEDURES
from .simulation import (
    COMPARE_COLUMNS,
    LEMMA_COLUMNS,
    TruthPoint,
    compare_rows,
    lemma_rows,
    monte_carlo,
    reports_to_csv,
    reports_to_json,
    write_csv,
)
from .sources import FileSource

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_DATA = 0, 2, 3, 4

DESIGN_COLUMNS = (
    "mu0", "mu1", "mu_lo", "mu_hi", "var_lo", "var_hi", "eps",
    "a0", "a1", "c_frac", "b_const", "mu2", "n_bar", "m", "n1", "rho_n1",
    "n_mu_lo_var_lo", "n_mu_lo_var_hi", "n_mu_hi_var_lo", "n_mu_hi_var_hi",
)
TRACE_COLUMNS = ("n", "lam0", "lam1", "mean", "var")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _rows_artifact(rows, columns, fmt: str) -> str:
    if fmt == "json":
        return _json([{c: r[c] for c in columns} for r in rows])
    return write_csv(rows, columns)


def cmd_design(cfg: JobConfig, design, fmt: str) -> str:
    row = design.summary()
    for key, value in design.corner_surfaces().items():
        mu_name, var_name = key.split("/")
        row[f"n_{mu_name}_{var_name}"] = value
    return _rows_artifact([row], DESIGN_COLUMNS, fmt)


def _truths(cfg: JobConfig) -> list[TruthPoint]:
    truths = cfg.truth.truth_points()
    if not truths:
        raise ConfigError("truth: at least one truth point (points or grid) is required")
    return truths


def cmd_simulate(cfg: JobConfig, design, fmt: str) -> str:
    plan = cfg.replication_plan()
    reports = [monte_carlo(design, t, plan, proc) for t in _truths(cfg) for proc in cfg.procedures]
    return reports_to_json(reports) if fmt == "json" else reports_to_csv(reports)


def cmd_compare(cfg: JobConfig, design, fmt: str) -> str:
    rows = compare_rows(design, _truths(cfg), cfg.replication_plan(), cfg.compare.alpha_var_grid)
    return _rows_artifact(rows, COMPARE_COLUMNS, fmt)


def cmd_lemma_check(cfg: JobConfig, design, fmt: str) -> str:
    lem = cfg.lemma
    truth = TruthPoint(lem.truth.mu, lem.truth.var) if lem.truth else _truths(cfg)[0]
    rows = lemma_rows(design, truth, lem.k0, lem.b, lem.horizon, cfg.replication_plan())
    return _rows_artifact(rows, LEMMA_COLUMNS, fmt)


def cmd_run_file(cfg: JobConfig, design, fmt: str) -> str:
    if not cfg.run.data_file:
        raise ConfigError("run.data_file: required for run-file")
    source = FileSource(cfg.run.data_file)
    outcome = PROCEDURES[cfg.run.procedure](design, source, trace=cfg.run.trace)
    if fmt == "json":
        return _json({"procedure": cfg.run.procedure, **outcome.as_dict()})
    head = outcome.as_dict()
    head.pop("trace", None)
    lines = [f"# {k}={'' if v is None else v}" for k, v in
             [("procedure", cfg.run.procedure), *head.items()]]
    trace = [s._asdict() for s in outcome.trace or ()]
    return "\n".join(lines) + "\n" + write_csv(trace, TRACE_COLUMNS)


COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "lemma-check": cmd_lemma_check,
    "run-file": cmd_run_file,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threestage",
        description="Three-stage and fully-sequential GLR t-tests: design, simulation, comparison.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML job configuration")
    parser.add_argument("--out", help="directory for artifacts (default: print to stdout)")
    parser.add_argument("--format", choices=("csv", "json"), help="overrides output.format")
    parser.add_argument("--seed", type=int, help="overrides plan.seed")
    parser.add_argument("--workers", type=int, help="overrides plan.workers")
    return parser


def _apply_overrides(cfg: JobConfig, args) -> JobConfig:
    data = cfg.model_dump()
    if args.seed is not None:
        data["plan"]["seed"] = args.seed
    if args.workers is not None:
        data["plan"]["workers"] = args.workers
    if args.format is not None:
        data["output"]["format"] = args.format
    if args.out is not None:
        data["output"]["dir"] = args.out
    return parse_config(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        design = cfg.make_design()
        cfg = cfg.effective(design)
        fmt = cfg.output.format
        text = COMMANDS[args.command](cfg, design, fmt)
    except (ConfigError, DomainError) as err:
        print(f"config error:\n{err}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as err:
        print(f"insufficient data: {err}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateDataError as err:
        print(f"degenerate data: {err}", file=sys.stderr)
        return EXIT_DATA if args.command == "run-file" else EXIT_DEGENERATE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    if cfg.output.dir:
        out = Path(cfg.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        name = args.command.replace("-", "_")
        (out / f"{name}.{fmt}").write_text(text, encoding="utf-8", newline="\n")
        (out / "effective_config.yaml").write_text(cfg.to_yaml(), encoding="utf-8", newline="\n")
        print(out / f"{name}.{fmt}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
