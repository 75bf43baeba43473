"""Trace and metrics containers with stable serialized forms.

Traces serialize to JSON lines with sorted keys, so identical runs yield
identical bytes; metrics serialize to CSV with a fixed header.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

__all__ = ["Trace", "Metrics", "metrics_csv", "parse_jsonl"]


class Trace:
    """Append-only event log; every event carries its timeslot."""

    def __init__(self):
        self.events: list[dict] = []

    def append(self, t: int, ev: str, **fields) -> None:
        rec = {"t": t, "ev": ev}
        rec.update(fields)
        self.events.append(rec)

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def select(self, ev: str) -> list[dict]:
        return [e for e in self.events if e["ev"] == ev]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n"
                       for e in self.events)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def parse_jsonl(text: str) -> Trace:
    tr = Trace()
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"trace line {line_no} is not valid JSON") from exc
        if not isinstance(rec, dict) or "t" not in rec or "ev" not in rec:
            raise ValueError(f"trace line {line_no} lacks required fields")
        tr.events.append(rec)
    return tr


METRICS_FIELDS = [
    "seed", "protocol", "n", "f", "rounds_run", "decided_count",
    "first_decision_round", "last_decision_round", "final_len_min",
    "final_len_max", "epoch_changes", "violations",
]


@dataclass
class Metrics:
    seed: int
    protocol: str
    n: int
    f: int
    rounds_run: int = 0
    decided_count: int = 0
    first_decision_round: int = -1
    last_decision_round: int = -1
    final_len_min: int = 0
    final_len_max: int = 0
    epoch_changes: int = 0
    violations: int = 0

    def row(self) -> str:
        d = asdict(self)
        return ",".join(str(d[k]) for k in METRICS_FIELDS)


def metrics_csv(items: Iterable[Metrics]) -> str:
    lines = [",".join(METRICS_FIELDS)]
    lines.extend(m.row() for m in items)
    return "\n".join(lines) + "\n"
