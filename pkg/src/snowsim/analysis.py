"""Exact-arithmetic binomial tail analysis for sampling-based consensus.

Everything in this module is computed with exact rationals
(:class:`fractions.Fraction`), because the interesting bounds live around
1e-20 where binary floating point cannot be trusted.  Decimal literals such
as "0.9555" are parsed as exact decimals (9555/10000) so that comparisons
against published constants are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

__all__ = [
    "AnalysisError",
    "TailQuery",
    "ParameterRow",
    "ErrorBudget",
    "exact",
    "to_decimal_string",
    "binomial_tail",
    "tail_query",
    "population_tail",
    "beta_for",
    "error_budget",
    "REFERENCE_BETA_SCHEDULE",
    "BETA_SCHEDULE_EPSILONS",
    "beta_schedule",
    "QUOTED_BOUNDS",
    "check_quoted_bounds",
    "DEPLOYMENT_HORIZON",
    "horizon_rounds",
    "deployment_budget_report",
    "fallback_progress_constants",
]


class AnalysisError(ValueError):
    """Raised for malformed tail queries or degenerate parameters."""


def exact(value: int | str | Fraction) -> Fraction:
    """Convert a value to an exact rational.

    Accepts ints, Fractions, and strings such as "3/5", "0.9555" or
    "1.18e-20".  Binary floats are rejected: passing 0.9555 as a float would
    silently change the question being asked.
    """
    if isinstance(value, bool):
        raise AnalysisError(f"not a number: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as err:
            raise AnalysisError(f"cannot parse {value!r} as an exact rational") from err
    if isinstance(value, float):
        raise AnalysisError(
            f"refusing float {value!r}; pass a decimal string or Fraction instead"
        )
    raise AnalysisError(f"cannot interpret {value!r} as an exact rational")


def to_decimal_string(x: Fraction, significant_digits: int = 30) -> str:
    """Render an exact rational as a decimal string with the given number of
    significant digits.  Rounds half away from zero on the last digit."""
    if significant_digits < 1:
        raise AnalysisError("significant_digits must be >= 1")
    if x == 0:
        return "0"
    sign = "-" if x < 0 else ""
    x = abs(x)
    # Find the decimal exponent e with 10^e <= x < 10^(e+1).
    e = 0
    if x >= 1:
        while x >= 10**(e + 1):
            e += 1
    else:
        while x < 10**e:
            e -= 1
    # Scale so that we keep `significant_digits` digits.
    shift = significant_digits - 1 - e
    scaled = x * Fraction(10) ** shift
    digits = int(scaled + Fraction(1, 2))
    if digits >= 10**significant_digits:  # rounding carried over
        digits //= 10
        e += 1
    ds = str(digits)
    if 0 <= e < significant_digits:
        intpart = ds[: e + 1]
        frac = ds[e + 1 :].rstrip("0")
        return sign + (f"{intpart}.{frac}" if frac else intpart)
    if -4 <= e < 0:
        frac = ("0" * (-e - 1) + ds).rstrip("0")
        return f"{sign}0.{frac}"
    mantissa = ds[0] + ("." + ds[1:].rstrip("0") if ds[1:].rstrip("0") else "")
    return f"{sign}{mantissa}e{e:+03d}"


# ---------------------------------------------------------------------------
# Tail probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailQuery:
    """A binomial tail question: out of `k` i.i.d. trials with success
    probability `x`, the probability that the success count compares to the
    threshold `m` in the given direction."""

    k: int
    x: Fraction
    m: int
    direction: str = ">="

    def __post_init__(self) -> None:
        if self.k < 0:
            raise AnalysisError(f"k must be >= 0, got {self.k}")
        if not (0 <= self.m <= self.k):
            raise AnalysisError(f"m must lie in [0, k]: m={self.m}, k={self.k}")
        if not isinstance(self.x, Fraction):
            object.__setattr__(self, "x", exact(self.x))
        if not (0 <= self.x <= 1):
            raise AnalysisError(f"x must lie in [0, 1], got {self.x}")
        if self.direction not in (">=", "<="):
            raise AnalysisError(f"direction must be '>=' or '<=', got {self.direction!r}")


def binomial_tail(k: int, x: int | str | Fraction, m: int, direction: str = ">=") -> Fraction:
    """Exact tail of Binomial(k, x) against threshold m.

    direction ">=" sums j in [m, k]; "<=" sums j in [0, m].
    """
    return tail_query(TailQuery(k, exact(x), m, direction))


def tail_query(q: TailQuery) -> Fraction:
    x, y = q.x, 1 - q.x
    if q.direction == ">=":
        js: Iterable[int] = range(q.m, q.k + 1)
    else:
        js = range(0, q.m + 1)
    return sum(
        (Fraction(comb(q.k, j)) * x**j * y ** (q.k - j) for j in js),
        start=Fraction(0),
    )


def population_tail(
    n: int,
    x: int | str | Fraction,
    fraction_threshold: int | str | Fraction,
    direction: str = "<=",
) -> Fraction:
    """Binomial tail over a population of n independent trials against a
    fractional threshold.

    The count threshold is floor(fraction * n) for direction "<=" (at most
    that many successes) and ceil(fraction * n) for ">=".
    """
    if n < 1:
        raise AnalysisError(f"population size must be >= 1, got {n}")
    frac = exact(fraction_threshold)
    scaled = frac * n
    if direction == "<=":
        m = scaled.numerator // scaled.denominator
    elif direction == ">=":
        m = -((-scaled.numerator) // scaled.denominator)
    else:
        raise AnalysisError(f"direction must be '>=' or '<=', got {direction!r}")
    m = max(0, min(n, m))
    return binomial_tail(n, exact(x), m, direction)


# ---------------------------------------------------------------------------
# Consecutive-round requirements (beta schedules)
# ---------------------------------------------------------------------------

# Fraction of correct processors assumed, in the worst case, to already hold
# the sampled color when bounding spurious confidence runs.
DEFAULT_TIPPING_FRACTION = Fraction(3, 4)


@dataclass(frozen=True)
class ParameterRow:
    alpha2: int
    beta: int
    epsilon: Fraction
    per_round_probability: Fraction = field(compare=False, default=Fraction(0))


def beta_for(
    k: int,
    alpha2: int,
    byz_fraction: int | str | Fraction,
    epsilon: int | str | Fraction,
    tipping_fraction: int | str | Fraction = DEFAULT_TIPPING_FRACTION,
) -> int:
    """Least beta >= 1 such that p**beta < epsilon, where p is the chance of
    sampling at least alpha2 matching values in one round when at most
    `tipping_fraction` of correct processors match and every Byzantine
    response matches."""
    if not (0 <= alpha2 <= k):
        raise AnalysisError(f"alpha2 must lie in [0, k]: alpha2={alpha2}, k={k}")
    byz = exact(byz_fraction)
    eps = exact(epsilon)
    if eps <= 0:
        raise AnalysisError("epsilon must be positive")
    tip = exact(tipping_fraction)
    p = binomial_tail(k, byz + (1 - byz) * tip, alpha2, ">=")
    if p >= 1:
        raise AnalysisError(
            f"per-round probability is {p} >= 1 (alpha2={alpha2}); "
            "no finite beta satisfies the target"
        )
    beta = 1
    acc = p
    while acc >= eps:
        beta += 1
        acc *= p
    return beta


BETA_SCHEDULE_EPSILONS: tuple[Fraction, ...] = (
    Fraction(1, 10**22),
    Fraction(1, 10**14),
    Fraction(1, 10**6),
)

# Reference beta schedule for k=80, byz < 1/5, alpha2 from 80 down to 65,
# columns for the three target error bounds above.
REFERENCE_BETA_SCHEDULE: dict[int, tuple[int, int, int]] = {
    80: (3, 2, 1),
    79: (4, 3, 1),
    78: (5, 3, 2),
    77: (5, 4, 2),
    76: (6, 4, 2),
    75: (7, 5, 2),
    74: (9, 6, 3),
    73: (10, 7, 3),
    72: (12, 8, 4),
    71: (15, 10, 4),
    70: (18, 12, 5),
    69: (23, 15, 7),
    68: (29, 18, 8),
    67: (37, 24, 10),
    66: (48, 31, 14),
    65: (65, 41, 18),
}


def beta_schedule(
    k: int = 80,
    byz_fraction: int | str | Fraction = Fraction(1, 5),
    epsilons: Sequence[Fraction] = BETA_SCHEDULE_EPSILONS,
    alpha2_values: Sequence[int] | None = None,
) -> dict[int, tuple[int, ...]]:
    """Compute the full (alpha2 -> betas) schedule for the given error targets."""
    if alpha2_values is None:
        alpha2_values = sorted(REFERENCE_BETA_SCHEDULE, reverse=True)
    return {
        a2: tuple(beta_for(k, a2, byz_fraction, eps) for eps in epsilons)
        for a2 in alpha2_values
    }


# ---------------------------------------------------------------------------
# Union-bound deployment budgets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorBudget:
    per_event_probability: Fraction
    processors: int
    rounds: int
    per_processor: bool
    cumulative_bound: Fraction

    def below(self, target: int | str | Fraction) -> bool:
        return self.cumulative_bound < exact(target)


def error_budget(
    per_event: int | str | Fraction,
    rounds: int,
    processors: int = 1,
    per_processor: bool = False,
) -> ErrorBudget:
    """Union-bound accumulation: per_event times the number of opportunities
    (rounds, additionally scaled by processors when per_processor is set)."""
    if rounds <= 0 or processors <= 0:
        raise AnalysisError("rounds and processors must be positive")
    p = exact(per_event)
    if p < 0:
        raise AnalysisError("per-event probability must be >= 0")
    total = p * rounds * (processors if per_processor else 1)
    return ErrorBudget(p, processors, rounds, per_processor, total)


@dataclass(frozen=True)
class DeploymentHorizon:
    processors: int
    years: int
    rounds_per_second: int
    rounds: int  # conservative round-count bound used in the budgets


def horizon_rounds(years: int, rounds_per_second: int) -> int:
    """Exact number of rounds over the horizon (365.25-day years)."""
    seconds = years * 365 * 86400 + (years // 4) * 86400
    return seconds * rounds_per_second


# Canonical deployment horizon used throughout: 10^4 processors running for
# 1000 years at 5 rounds per second, rounded up to 1.6e11 rounds.
DEPLOYMENT_HORIZON = DeploymentHorizon(
    processors=10_000, years=1000, rounds_per_second=5, rounds=16 * 10**10
)


def deployment_budget_report(
    horizon: DeploymentHorizon = DEPLOYMENT_HORIZON,
) -> list[tuple[str, ErrorBudget, Fraction, bool]]:
    """The three union-bound budgets for the default agreement analysis plus
    their combined total, each with its target, as (name, budget, target, ok).
    """
    drift = error_budget(
        population_tail(400, "0.9555", Fraction(5, 6), "<="), horizon.rounds
    )
    spurious_flip = error_budget(
        binomial_tail(80, Fraction(2, 5), 72, ">="),
        horizon.rounds,
        horizon.processors,
        per_processor=True,
    )
    premature_decide = error_budget(
        Fraction(1, 10**22), horizon.rounds, horizon.processors, per_processor=True
    )
    rows = [
        ("supermajority-drift", drift, exact("3e-9")),
        ("spurious-opposite-sample", spurious_flip, exact("2e-5")),
        ("premature-decision", premature_decide, exact("2e-7")),
    ]
    total = sum((b.cumulative_bound for _, b, _ in rows), start=Fraction(0))
    report = [(name, b, tgt, b.cumulative_bound < tgt) for name, b, tgt in rows]
    combined = ErrorBudget(total, horizon.processors, horizon.rounds, True, total)
    report.append(("combined", combined, exact("3e-5"), total < exact("3e-5")))
    return report


# ---------------------------------------------------------------------------
# Quoted inequalities
# ---------------------------------------------------------------------------

def _quoted_bounds() -> list[tuple[str, Fraction, str, Fraction]]:
    p_confirm = binomial_tail(80, Fraction(4, 5), 72, ">=")
    return [
        ("adoption-after-tipping",
         binomial_tail(80, Fraction(3, 5), 41, ">="), ">", exact("0.9555")),
        ("opposite-supermajority-sample",
         binomial_tail(80, Fraction(2, 5), 72, ">="), "<", exact("1.18e-20")),
        ("pre-tipping-confirmation", p_confirm, "<", exact("0.0131")),
        ("pre-tipping-confirmation-run", exact("0.0131") ** 12, "<", exact("1e-22")),
        ("population-drift",
         population_tail(400, "0.9555", Fraction(5, 6), "<="), "<", exact("1.59e-20")),
        ("byzantine-supermajority-sample",
         binomial_tail(80, Fraction(1, 5), 48, ">="), "<", exact("1e-14")),
        # Supporting inequalities for the fork-split case analysis.
        ("minority-branch-confirmation",
         binomial_tail(80, Fraction(3, 5), 72, ">="), "<", exact("3e-9")),
        ("pre-tipping-confirmation-tight", p_confirm, "<", exact("0.01309")),
        # Strengthened population bound used when the confidence requirement
        # is raised from 12 to 14 consecutive rounds.
        ("population-drift-11-12",
         population_tail(400, binomial_tail(80, Fraction(2, 3), 41, ">="),
                         Fraction(11, 12), "<="),
         "<", exact("2e-47")),
    ]


QUOTED_BOUNDS = _quoted_bounds()


def check_quoted_bounds() -> list[tuple[str, Fraction, str, Fraction, bool]]:
    out = []
    for name, value, op, bound in QUOTED_BOUNDS:
        ok = value > bound if op == ">" else value < bound
        out.append((name, value, op, bound, ok))
    return out


def fallback_progress_constants() -> dict[str, Fraction]:
    """Exact constants behind the epoch-fallback progress argument.

    `pair_success` is the chance that one round's sampled finalized values
    give at least 48 of 80 extending the leading branch when more than 3/5
    of the population reports it; finalization needs two such rounds in a
    row.  Two failure bounds over 150 round pairs are reported: one from the
    exact pair-failure probability and one from the looser 0.71 constant.
    Both sit comfortably below 1e-22, so nothing downstream depends on which
    is used.
    """
    q = binomial_tail(80, Fraction(3, 5), 48, ">=")
    pair = q * q
    return {
        "round_success": q,
        "pair_success": pair,
        "pair_failure": 1 - pair,
        "exact_failure_150_pairs": (1 - pair) ** 150,
        "loose_failure_150_pairs": exact("0.71") ** 150,
    }
