import argparse
import datetime
import logging
import os

import sentry_sdk

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
LOG_FORMAT = "%(asctime)s %(levelname)-8s %(message)s"


class UtcFormatter(logging.Formatter):
    """ISO8601 UTC timestamps with milliseconds"""

    def formatTime(self, record, datefmt=None):
        stamp = datetime.datetime.fromtimestamp(record.created, datetime.timezone.utc)
        return stamp.isoformat(sep="T", timespec="milliseconds")


def sample_rate(value: str) -> float:
    rate = float(value)
    if not 0.0 <= rate <= 1.0:
        raise argparse.ArgumentTypeError(f"sample rate must be within [0, 1], got {value}")
    return rate


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return number


def add_common_arguments(parser: argparse.ArgumentParser):
    """Logging, Sentry and resource cap options shared by every subcommand"""
    group = parser.add_argument_group("runtime")
    group.add_argument(
        "--log",
        type=str.upper,
        choices=LOG_LEVELS,
        default=os.getenv("LOG_LEVEL", "INFO").upper(),
        help="Logging level (env LOG_LEVEL)",
    )
    group.add_argument("--sentry-dsn", default=os.getenv("SENTRY_DSN"), help="Sentry DSN URI (env SENTRY_DSN)")
    group.add_argument("--sentry-traces", default=0.0, type=sample_rate, help="Sentry traces sample rate (0.0-1.0)")
    group.add_argument(
        "--qubit-cap",
        type=positive_int,
        default=None,
        help="Largest register layout allowed (default 24, env DQSIM_QUBIT_CAP)",
    )


def setup_logging(args: argparse.Namespace):
    handler = logging.StreamHandler()
    handler.setFormatter(UtcFormatter(LOG_FORMAT))
    logging.basicConfig(level=getattr(logging, args.log), handlers=[handler])


def setup_sentry(args: argparse.Namespace):
    if args.sentry_dsn:
        sentry_sdk.init(dsn=args.sentry_dsn, traces_sample_rate=args.sentry_traces)
        logging.info(f"Sentry initialized with traces sample rate {args.sentry_traces}")


def setup_qubit_cap(args: argparse.Namespace):
    """Export --qubit-cap so every cap check reads the same value"""
    if args.qubit_cap is not None:
        os.environ["DQSIM_QUBIT_CAP"] = str(args.qubit_cap)
        logging.debug(f"Qubit cap set to {args.qubit_cap}")


def setup_common(args: argparse.Namespace):
    setup_logging(args)
    setup_sentry(args)
    setup_qubit_cap(args)
