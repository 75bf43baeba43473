"""Deterministic simulator and exact analysis engine for sampling-based
Byzantine consensus: binary agreement, chain replication, and an epoch
fallback for liveness, plus big-rational tail-bound and parameter tooling.
"""

__version__ = "0.1.0"

from . import analysis, blocks, frosty, kernels, rng, snowflake, snowman

__all__ = ["analysis", "blocks", "frosty", "kernels", "rng",
           "snowflake", "snowman", "__version__"]
