"""Background block generation policies.

Blocks appear as children of the current consensus frontier and are
gossiped to every processor within one delivery bound.  "forking" emits two
children per tick (an equivocating producer), "single-chain" one, "silent"
none.
"""

from __future__ import annotations

from ..blocks import Block, label_for

__all__ = ["BlockGenerator", "POLICIES"]

POLICIES = ("silent", "single-chain", "forking")


class BlockGenerator:
    def __init__(self, policy: str, label_bits: int, period: int = 1,
                 start_round: int = 0, max_blocks: int = 10 ** 9):
        if policy not in POLICIES:
            raise ValueError(f"unknown block policy {policy!r}")
        self.policy = policy
        self.label_bits = label_bits
        self.period = period
        self.start_round = start_round
        self.max_blocks = max_blocks
        self.emitted = 0
        self._next_id = 1  # 0 is genesis

    def _new_block(self, parent: Block) -> Block:
        b = Block(id=self._next_id, parent=parent.id, height=parent.height + 1,
                  label=label_for(self._next_id, self.label_bits))
        self._next_id += 1
        self.emitted += 1
        return b

    def tick(self, round_no: int, tip: Block) -> list[Block]:
        """Blocks produced at this round, as children of the given frontier
        block (the last block of the lowest correct finalized chain)."""
        if self.policy == "silent" or round_no < self.start_round:
            return []
        if (round_no - self.start_round) % self.period != 0:
            return []
        want = 1 if self.policy == "single-chain" else 2
        out = []
        for _ in range(want):
            if self.emitted >= self.max_blocks:
                break
            out.append(self._new_block(tip))
        return out
