"""Simulation configuration: schema validation plus semantic checks."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

import jsonschema

__all__ = ["SimConfig", "ConfigError", "load_schema"]

# Analytical guarantees are stated for populations of at least this size.
PAPER_SCALE_N = 500


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    ref = resources.files("snowsim") / "schemas" / "simconfig.schema.json"
    return json.loads(ref.read_text())


_DEFAULT_PARAMS = {"alpha3": 48, "gamma": 300, "rules": None}


@dataclass(frozen=True)
class SimConfig:
    n: int
    f: int
    protocol: str
    params: dict
    seed: int
    max_timeslots: int = 10000
    delta: int = 1
    mode: str = "tally"
    inputs: Union[str, dict] = "split"
    adversary: dict = field(default_factory=lambda: {"name": "none"})
    block_gen: dict = field(default_factory=lambda: {"policy": "silent"})
    label_bits: int = 32
    trace_rounds: bool = False
    halt_on_violation: bool = False

    @staticmethod
    def from_dict(doc: dict) -> "SimConfig":
        schema = load_schema()
        try:
            jsonschema.validate(doc, schema)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config field {path}: {exc.message}") from exc
        cfg = SimConfig(**doc)
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        return {
            "n": self.n, "f": self.f, "protocol": self.protocol,
            "params": dict(self.params), "seed": self.seed,
            "max_timeslots": self.max_timeslots, "delta": self.delta,
            "mode": self.mode, "inputs": self.inputs,
            "adversary": dict(self.adversary), "block_gen": dict(self.block_gen),
            "label_bits": self.label_bits, "trace_rounds": self.trace_rounds,
            "halt_on_violation": self.halt_on_violation,
        }

    def check(self) -> None:
        if self.n < 2:
            raise ConfigError("population must have at least 2 processors")
        if not 0 <= self.f < self.n:
            raise ConfigError("need 0 <= f < n")
        p = self.params
        if not (p["k"] >= 1 and p["k"] <= self.n):
            raise ConfigError("need 1 <= k <= n")
        if not p["alpha1"] > p["k"] / 2:
            raise ConfigError("alpha1 must exceed k/2")
        if not (p["alpha1"] <= p["alpha2"] <= p["k"]):
            raise ConfigError("need alpha1 <= alpha2 <= k")
        if self.protocol == "frosty":
            if "alpha3" not in p or "gamma" not in p:
                raise ConfigError("frosty requires alpha3 and gamma")
            if p["alpha3"] > p["k"]:
                raise ConfigError("alpha3 must be <= k")
        if self.protocol != "snowflake" and p.get("rules"):
            raise ConfigError("multi-rule decision schedules apply to snowflake only")
        if isinstance(self.inputs, dict) and self.inputs["ones"] > self.n - self.f:
            raise ConfigError("more unit inputs than correct processors")
        if self.n < PAPER_SCALE_N:
            warnings.warn(
                f"n={self.n} is below the analyzed scale ({PAPER_SCALE_N}); "
                "failure-probability guarantees do not apply", stacklevel=2)

    # -- derived -------------------------------------------------------------

    @property
    def slots_per_round(self) -> int:
        return 3 * self.delta if self.protocol == "frosty" else 2 * self.delta

    @property
    def max_rounds(self) -> int:
        return max(1, self.max_timeslots // self.slots_per_round)

    @property
    def correct(self) -> int:
        return self.n - self.f

    def byzantine_ids(self) -> range:
        """Corrupted processors occupy the top id range (static corruption)."""
        return range(self.n - self.f, self.n)

    def initial_ones(self) -> int:
        """Number of correct processors whose input bit is 1."""
        u = self.correct
        if self.inputs == "unanimous-1":
            return u
        if self.inputs == "unanimous-0":
            return 0
        if self.inputs == "split":
            return (u + 1) // 2
        return self.inputs["ones"]
