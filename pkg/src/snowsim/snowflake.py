"""Binary Byzantine agreement by repeated peer sampling.

A processor keeps a current bit `val`.  Each round it samples k peers; at
least alpha1 opposite responses flip `val`, and a rule (alpha2, beta) decides
once beta consecutive rounds each showed at least alpha2 matching responses.
The error-driven variant runs several (alpha2, beta) rules side by side, one
confidence counter per rule.

Everything here is a pure state machine: the same (state, sample) always
yields the same successor state.  Sampling, networking and adversaries live
in :mod:`snowsim.simnet`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import rng

__all__ = ["SnowflakeParams", "SnowflakeState", "RoundSample", "init",
           "answer_query", "draw_sample", "end_round"]


@dataclass(frozen=True)
class SnowflakeParams:
    k: int
    alpha1: int
    alpha2: int
    beta: int
    # Optional error-driven mode: several (alpha2_j, beta_j) decision rules
    # evaluated simultaneously, each with its own counter.
    rules: Optional[tuple[tuple[int, int], ...]] = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.alpha1 > self.k / 2:
            raise ValueError(f"alpha1 must exceed k/2 (k={self.k}, alpha1={self.alpha1})")
        if self.alpha2 < self.alpha1:
            raise ValueError("alpha2 must be >= alpha1")
        if self.alpha2 > self.k:
            raise ValueError("alpha2 must be <= k")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.rules is not None:
            if not self.rules:
                raise ValueError("rules must be non-empty when given")
            object.__setattr__(self, "rules", tuple((int(a), int(b)) for a, b in self.rules))
            for a2, b in self.rules:
                if a2 > self.k:
                    raise ValueError(f"rule alpha2={a2} exceeds k={self.k}")
                if b < 1:
                    raise ValueError("rule beta must be >= 1")

    @property
    def decision_rules(self) -> tuple[tuple[int, int], ...]:
        """The active (alpha2, beta) rules; single-rule mode uses (alpha2, beta)."""
        return self.rules if self.rules is not None else ((self.alpha2, self.beta),)


@dataclass(frozen=True)
class SnowflakeState:
    val: int
    counts: tuple[int, ...]  # one confidence counter per decision rule
    round: int = 0
    decided: Optional[int] = None

    @property
    def count(self) -> int:
        """Confidence of the first rule (the only one in single-rule mode)."""
        return self.counts[0]


@dataclass(frozen=True)
class RoundSample:
    """The k responses of one round: 1, 0, or None for no reply."""
    responses: tuple[Optional[int], ...]

    def __post_init__(self) -> None:
        for r in self.responses:
            if r not in (0, 1, None):
                raise ValueError(f"responses must be 0, 1 or None, got {r!r}")


def init(input_bit: int, params: SnowflakeParams) -> SnowflakeState:
    if input_bit not in (0, 1):
        raise ValueError("input must be 0 or 1")
    return SnowflakeState(val=input_bit, counts=(0,) * len(params.decision_rules))


def answer_query(state: SnowflakeState) -> int:
    """The bit reported to any sampler; decided processors keep answering."""
    return state.val


def draw_sample(seed: int, processor: int, round_no: int, n: int, k: int) -> list[int]:
    """The round's sample sequence: k uniform draws with replacement."""
    return rng.sample_indices(seed, processor, round_no, n, k)


def end_round(state: SnowflakeState, sample: RoundSample, params: SnowflakeParams) -> SnowflakeState:
    """Apply one round's responses.

    Order matters: the alpha1 flip happens first (zeroing every counter),
    then each rule resets or increments its counter against the possibly new
    value, then any counter reaching its beta decides.  Missing responses
    count toward neither bit.
    """
    if state.decided is not None:
        raise ValueError("end_round on a decided state")
    if len(sample.responses) != params.k:
        raise ValueError(f"expected {params.k} responses, got {len(sample.responses)}")

    ones = sum(1 for r in sample.responses if r == 1)
    zeros = sum(1 for r in sample.responses if r == 0)

    val = state.val
    counts = list(state.counts)
    opposite = zeros if val == 1 else ones
    if opposite >= params.alpha1:
        val = 1 - val
        counts = [0] * len(counts)

    matching = ones if val == 1 else zeros
    decided = None
    for j, (alpha2_j, beta_j) in enumerate(params.decision_rules):
        if matching < alpha2_j:
            counts[j] = 0
        else:
            counts[j] += 1
        if counts[j] >= beta_j:
            decided = val
    return replace(state, val=val, counts=tuple(counts), round=state.round + 1,
                   decided=decided)


def tally(responses: Sequence[Optional[int]]) -> tuple[int, int, int]:
    """(ones, zeros, missing) counts of a response sequence."""
    ones = sum(1 for r in responses if r == 1)
    zeros = sum(1 for r in responses if r == 0)
    return ones, zeros, len(responses) - ones - zeros
