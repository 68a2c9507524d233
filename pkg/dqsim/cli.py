#!/usr/bin/env python
# PYTHON_ARGCOMPLETE_OK
"""
dqsim command line.

    dqsim simulate --config run.json --out row.csv
    dqsim verify --suite all
    dqsim cost --model nn --gamma 8 --alpha 1 --t 4 --epsilon 1e-2 --p 2
    dqsim sweep --config run.json --param r --values 4,8,16,32 --fit
"""
import argparse
import logging
import sys
from typing import List, Optional

import argcomplete
import sentry_sdk

from dqsim.config import load_config, parse_values, rows_to_dataframe, run_config, sweep
from dqsim.costs import MODELS, REQUIRED, cost_table, cost_tables, params_from_hamiltonian
from dqsim.errors import ConfigError, DqsimError
from dqsim.pauli import cluster
from dqsim.utils.args import LOG_LEVELS, add_common_arguments, setup_common
from dqsim.utils.file import save_dataframe
from dqsim.verify import SUITES, run_suite

COST_PARAMS = sorted({name for names in REQUIRED.values() for name in names})


def get_default_argumentparser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Desk-scale distributed quantum simulation lab")
    add_common_arguments(parser)
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Run one configured protocol and emit its result row")
    simulate.add_argument("--config", required=True, help="JSON run configuration")
    simulate.add_argument("--out", help="Output CSV file (default: config 'output', else stdout)")
    simulate.set_defaults(func=simulate_command)

    verify = commands.add_parser("verify", help="Run verification suites and print a pass/fail table")
    verify.add_argument("--suite", default="all", choices=list(SUITES) + ["all"], help="Suite to run")
    verify.add_argument("--out", help="Also save the table as CSV")
    verify.set_defaults(func=verify_command)

    cost = commands.add_parser("cost", help="Leading-order communication cost table")
    cost.add_argument("--model", required=True, choices=list(MODELS) + ["all"], help="Hamiltonian model")
    cost.add_argument("--config", help="Measure the model parameters on the Hamiltonian of this run config")
    for name in COST_PARAMS:
        kind = int if name in ("gamma", "edges", "k", "p") else float
        cost.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, help=f"Model parameter {name}")
    cost.add_argument("--out", help="Also save the table as CSV")
    cost.set_defaults(func=cost_command)

    sweep_parser = commands.add_parser("sweep", help="Run a config once per parameter value")
    sweep_parser.add_argument("--config", required=True, help="JSON run configuration")
    sweep_parser.add_argument("--param", required=True, help="Top level config key to vary")
    sweep_parser.add_argument("--values", required=True, help="Comma separated values, e.g. 4,8,16,32")
    sweep_parser.add_argument("--fit", action="store_true", help="Append a log-log slope row")
    sweep_parser.add_argument("--out", help="Output CSV file (default stdout)")
    sweep_parser.set_defaults(func=sweep_command)
    return parser


def parse_args(parser: argparse.ArgumentParser, argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Call argcomplete.autocomplete(), set up logging, Sentry and the qubit cap and return parsed args."""
    argcomplete.autocomplete(parser)
    args = parser.parse_args(argv)
    if args.log not in LOG_LEVELS:
        parser.error(f"LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got '{args.log}'")
    setup_common(args)
    return args


def simulate_command(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    df = rows_to_dataframe([run_config(cfg)])
    text = save_dataframe(df, args.out or cfg.output)
    if not (args.out or cfg.output):
        print(text, end="")
    return 0


def verify_command(args: argparse.Namespace) -> int:
    table = run_suite(args.suite)
    print(table.to_string(index=False))
    save_dataframe(table, args.out)
    failed = table[~table["passed"]]
    if len(failed):
        logging.error(f"{len(failed)} verification checks failed: {', '.join(failed['check'])}")
        return 4
    return 0


def cost_command(args: argparse.Namespace) -> int:
    params = {name: getattr(args, name) for name in COST_PARAMS}
    if args.config:
        cfg = load_config(args.config)
        if cfg.hamiltonian is None:
            raise ConfigError(f"Config {args.config} has no Hamiltonian to measure")
        measured = params_from_hamiltonian(cluster(cfg.hamiltonian, cfg.partition), cfg.t, cfg.epsilon, cfg.p)
        params = {**measured, **{k: v for k, v in params.items() if v is not None}}
    if args.model == "all":
        table = cost_tables(MODELS, params)
    else:
        table = cost_table(args.model, params)
    print(table.to_string(index=False))
    save_dataframe(table, args.out)
    return 0


def sweep_command(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    df = sweep(cfg, args.param, parse_values(args.values), fit=args.fit)
    text = save_dataframe(df, args.out)
    if not args.out:
        print(text, end="")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(get_default_argumentparser(), argv)
    try:
        return args.func(args)
    except DqsimError as err:
        logging.error(f"{type(err).__name__}: {err}")
        sentry_sdk.capture_exception(err)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
