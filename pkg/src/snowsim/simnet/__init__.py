"""Deterministic synchronous network simulator and invariant monitors."""

from .config import ConfigError, SimConfig
from .engine import ViolationError, run
from .monitors import check_all
from .trace import Metrics, Trace, metrics_csv, parse_jsonl

__all__ = ["SimConfig", "ConfigError", "run", "ViolationError", "check_all",
           "Trace", "Metrics", "metrics_csv", "parse_jsonl"]
