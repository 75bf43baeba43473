"""Round-loop kernels: compiled extension if built, numpy fallback otherwise.

Both implementations draw the same tallies from the same bit stream, so
which one is active never changes results. `IMPL` names the active one.
"""

from . import fallback

try:
    from . import _core as _active
    IMPL = "compiled"
except ImportError:
    _active = fallback
    IMPL = "fallback"

ADVERSARIES = fallback.ADVERSARIES
run_snowflake_tally = _active.run_snowflake_tally

__all__ = ["IMPL", "ADVERSARIES", "run_snowflake_tally", "fallback"]
