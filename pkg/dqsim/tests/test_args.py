import argparse
import logging
import os

import pytest

from dqsim.cli import get_default_argumentparser, parse_args
from dqsim.utils.args import UtcFormatter, add_common_arguments, setup_qubit_cap


def common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser()
    add_common_arguments(parser)
    return parser


def test_log_level_from_env(monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "debug")
    assert common_parser().parse_args([]).log == "DEBUG"
    assert common_parser().parse_args(["--log", "warning"]).log == "WARNING"
    monkeypatch.delenv("LOG_LEVEL")
    assert common_parser().parse_args([]).log == "INFO"


def test_bad_log_level_env_is_rejected(monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "chatty")
    with pytest.raises(SystemExit) as exc:
        parse_args(get_default_argumentparser(), ["verify"])
    assert exc.value.code == 2


def test_sentry_and_cap_ranges(monkeypatch):
    monkeypatch.setenv("SENTRY_DSN", "https://key@sentry.example/1")
    args = common_parser().parse_args(["--sentry-traces", "0.25"])
    assert args.sentry_dsn == "https://key@sentry.example/1"
    assert args.sentry_traces == 0.25
    with pytest.raises(SystemExit):
        common_parser().parse_args(["--sentry-traces", "1.5"])
    with pytest.raises(SystemExit):
        common_parser().parse_args(["--qubit-cap", "0"])


def test_qubit_cap_is_exported(monkeypatch):
    monkeypatch.setenv("DQSIM_QUBIT_CAP", "24")
    setup_qubit_cap(common_parser().parse_args(["--qubit-cap", "10"]))
    assert os.environ["DQSIM_QUBIT_CAP"] == "10"
    setup_qubit_cap(common_parser().parse_args([]))
    assert os.environ["DQSIM_QUBIT_CAP"] == "10"


def test_utc_formatter():
    record = logging.LogRecord("dqsim", logging.INFO, __file__, 1, "hello", None, None)
    record.created = 0.0
    assert UtcFormatter("%(asctime)s %(message)s").format(record) == "1970-01-01T00:00:00.000+00:00 hello"
