"""State machine replication over hash-chain strings.

One bit of the concatenated label string H(b0)*H(b1)*... is agreed at a
time: each round a processor samples k preferred chains, then walks its
current string from `final` outward, running one flip/confidence step per
bit against the sampled responses.  `final` advances a bit once that bit
has shown alpha2-strong support for beta consecutive rounds.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .blocks import Block, BlockStore, chain_of, hash_chain, last_block, reduct

__all__ = ["SnowmanParams", "SnowmanState", "count_extending"]


@dataclass(frozen=True)
class SnowmanParams:
    k: int
    alpha1: int
    alpha2: int
    beta: int

    def __post_init__(self) -> None:
        if not self.alpha1 > self.k / 2:
            raise ValueError("alpha1 must exceed k/2")
        if not (self.alpha1 <= self.alpha2 <= self.k):
            raise ValueError("need alpha1 <= alpha2 <= k")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")


def count_extending(tally: Mapping[str, int], sigma: str) -> int:
    """How many sampled response strings extend sigma."""
    return sum(c for s, c in tally.items() if s.startswith(sigma))


class SnowmanState:
    """Per-processor replicated-state-machine state."""

    def __init__(self, params: SnowmanParams, store: BlockStore):
        self.params = params
        self.store = store
        self.pref: str = store.genesis.label
        self.final: str = store.genesis.label
        self.val: dict[str, int] = {}
        self.count: dict[str, int] = {}
        self.round: int = 0

    # -- query side ---------------------------------------------------------

    def report_preference(self) -> list[Block]:
        """The preferred chain sent to any sampler."""
        return chain_of(self.pref, self.store)

    def record_responses(self, raw: Sequence[Optional[list[Block]]]) -> list[str]:
        """Convert raw replies into response strings, admitting any blocks
        they carry.  Missing or malformed replies map to the genesis label."""
        out = []
        for reply in raw:
            if reply is None:
                out.append(self.store.genesis.label)
                continue
            self.store.add_all(b for b in reply if b.parent is not None)
            h = hash_chain(reply)
            out.append(h if h else self.store.genesis.label)
        return out

    # -- round update -------------------------------------------------------

    def _zero_counts_from(self, sigma: str) -> None:
        for key in [s for s in self.count if s.startswith(sigma)]:
            del self.count[key]

    def _candidate_children(self) -> list[Block]:
        base = last_block(self.pref, self.store)
        red = reduct(self.pref, self.store)
        return [b for b in self.store.children(base.id)
                if (red + b.label).startswith(self.pref)]

    def end_round(self, rpref: Sequence[str]) -> None:
        if len(rpref) != self.params.k:
            raise ValueError(f"expected {self.params.k} responses, got {len(rpref)}")
        self.end_round_tally(Counter(rpref))

    def end_round_tally(self, tally: Mapping[str, int]) -> None:
        """One round, given response strings as a multiset.

        Only extension counts matter to the update, so a counter carries the
        same information as the raw response list.
        """
        p = self.params
        self.pref = self.final
        while True:
            candidates = self._candidate_children()
            if not candidates:
                break
            if self.pref not in self.val:
                first = min(candidates, key=lambda b: self.store.seq(b.id))
                joined = reduct(self.pref, self.store) + first.label
                self.val[self.pref] = int(joined[len(self.pref)])
            v = self.val[self.pref]
            if count_extending(tally, self.pref + str(1 - v)) >= p.alpha1:
                v = 1 - v
                self.val[self.pref] = v
                self._zero_counts_from(self.pref)
            supporting = count_extending(tally, self.pref + str(v))
            if supporting < p.alpha2:
                self._zero_counts_from(self.pref)
            else:
                self.count[self.pref] = self.count.get(self.pref, 0) + 1
            if self.count.get(self.pref, 0) >= p.beta:
                self.final = self.pref + str(v)
            self.pref = self.pref + str(v)
        self.round += 1

    # -- introspection ------------------------------------------------------

    def snapshot(self) -> dict:
        """A stable JSON-shaped view of the state for traces and debugging."""
        return {
            "pref": self.pref,
            "final": self.final,
            "round": self.round,
            "val": dict(sorted(self.val.items())),
            "count": dict(sorted(self.count.items())),
            "blocks": [
                {"id": b.id, "parent": b.parent, "height": b.height, "label": b.label}
                for b in self.store.in_insertion_order()
            ],
        }
