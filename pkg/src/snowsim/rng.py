"""Deterministic, counter-based random sampling.

Peer sampling uses a splitmix64-style mixing function over
(run seed, processor, round, slot) counters, so every draw is a pure
function of its coordinates: streams for distinct (processor, round) pairs
occupy disjoint counter positions by construction, runs replay exactly, and
the same values can be produced scalar-at-a-time or as numpy blocks.

Bulk simulation paths that do not need per-index draws use a numpy
Generator seeded through :func:`run_generator`.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(z: int) -> int:
    """One splitmix64 output step for the given 64-bit state."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Fold any number of integer coordinates into one 64-bit word."""
    h = 0
    for p in parts:
        h = splitmix64(h ^ (p & _MASK))
    return h


def sample_word(seed: int, processor: int, round_no: int, slot: int) -> int:
    """The raw 64-bit word backing one sample slot."""
    return mix64(seed, processor, round_no, slot)


def sample_indices(seed: int, processor: int, round_no: int, n: int, k: int) -> list[int]:
    """k processor indices drawn uniformly (with replacement) from [0, n).

    Pure in all arguments; the (processor, round) pair selects a dedicated
    stream of counter positions.
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    return [sample_word(seed, processor, round_no, slot) % n for slot in range(k)]


def _splitmix64_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def sample_indices_block(
    seed: int, processors: np.ndarray, round_no: int, n: int, k: int
) -> np.ndarray:
    """Vectorized :func:`sample_indices` for many processors at once.

    Returns an int64 array of shape (len(processors), k), identical
    entry-for-entry to the scalar function.
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    with np.errstate(over="ignore"):
        h = np.full(len(processors), splitmix64(seed), dtype=np.uint64)
        h = _splitmix64_np(h ^ processors.astype(np.uint64))
        h = _splitmix64_np(h ^ np.uint64(round_no & _MASK))
        slots = np.arange(k, dtype=np.uint64)
        words = _splitmix64_np(h[:, None] ^ slots[None, :])
    return (words % np.uint64(n)).astype(np.int64)


def run_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """A numpy Generator dedicated to one (run seed, stream tag) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & _MASK, stream])))


def shuffled(seq: list, seed: int, *coords: int) -> list:
    """Deterministically permute a list using the mixing function.

    Used for per-processor arrival order of same-round gossiped blocks.
    """
    c0 = coords[0] if coords else 0
    c1 = coords[1] if len(coords) > 1 else 0
    keyed = sorted(enumerate(seq), key=lambda iv: (sample_word(seed, c0, c1, iv[0]), iv[0]))
    return [v for _, v in keyed]
