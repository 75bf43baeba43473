"""Byzantine strategies.

Strategies are pure decision rules over the rushing adversary's view (the
correct processors' current state, since corrupted replies may depend on
everything in flight).  The engine applies them either per query or in
aggregate; both routes call the functions here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

__all__ = ["AdversaryView", "adversary_step", "snowflake_reply",
           "minority_bit", "chain_byz_weights", "STRATEGIES"]

STRATEGIES = ("none", "crash", "split-keeper", "opposite", "equivocator")


def minority_bit(ones: int, zeros: int) -> int:
    """The bit held by fewer correct processors; ties count as 1 so a
    balanced population stays contested."""
    return 1 if ones <= zeros else 0


def snowflake_reply(name: str, querier_val: int, ones: int, zeros: int) -> Optional[int]:
    """A corrupted processor's reply to one binary-agreement query."""
    if name == "crash":
        return None
    if name == "split-keeper":
        return minority_bit(ones, zeros)
    if name == "opposite":
        return 1 - querier_val
    raise ValueError(f"strategy {name!r} does not answer binary queries")


def chain_byz_weights(name: str, branches: list[str],
                      correct_tally: Mapping[str, int], fallback: str,
                      split: float = 0.8) -> dict[str, float]:
    """How corrupted responders distribute their chain replies.

    `branches` are the chain strings of the frontier children (one per fork
    branch).  The split-keeper piles onto the branch fewest correct
    processors extend, starving every branch of an alpha2 supermajority; the
    equivocator splits split : 1-split between the two strongest branches,
    keeping the fork contested but resolvable.  With no fork in sight both
    fall back to echoing the frontier chain.
    """
    if name not in ("split-keeper", "opposite", "equivocator"):
        raise ValueError(f"strategy {name!r} does not answer chain queries")
    if not branches:
        return {fallback: 1.0}
    support = {b: sum(c for r, c in correct_tally.items() if r.startswith(b))
               for b in branches}
    ranked = sorted(support.items(), key=lambda kv: (-kv[1], kv[0]))
    if name == "equivocator":
        if len(ranked) == 1:
            return {ranked[0][0]: 1.0}
        return {ranked[0][0]: split, ranked[1][0]: 1.0 - split}
    weakest = min(support.items(), key=lambda kv: (kv[1], kv[0]))
    return {weakest[0]: 1.0}


@dataclass(frozen=True)
class AdversaryView:
    """What a rushing adversary sees before corrupted processors act."""
    round: int
    correct_ones: int
    correct_zeros: int
    querier_vals: tuple[int, ...]      # current value of each pending querier
    chain_tally: Optional[dict] = None


def adversary_step(view: AdversaryView, strategy: str) -> list[Optional[int]]:
    """One reply per pending query, chosen by the strategy.

    Delivery timing is not chosen here: the engine delivers corrupted replies
    at the same slot bound as correct traffic, which is always legal.
    """
    if strategy == "none":
        raise ValueError("the empty strategy has no corrupted processors")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    return [snowflake_reply(strategy, v, view.correct_ones, view.correct_zeros)
            for v in view.querier_vals]
