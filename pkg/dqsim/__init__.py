"""Desk-scale laboratory for distributed quantum simulation protocols."""
from dqsim.__version__ import __version__  # noqa: F401
