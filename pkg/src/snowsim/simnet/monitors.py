"""Invariant monitors over run traces.

Monitors are pure functions of the event stream, so replaying a stored
trace reproduces the original verdicts byte for byte.  Each violation is a
structured record naming the monitor, the offending timeslot, and the
processors involved.
"""

from __future__ import annotations

from collections import defaultdict

from .trace import Trace

__all__ = ["check_all", "monitor_agreement", "monitor_validity",
           "monitor_consistency", "monitor_delivery", "monitor_frosty_claims",
           "monitor_quorum"]


def _violation(monitor: str, t: int, detail: str, procs=()) -> dict:
    return {"monitor": monitor, "t": t, "detail": detail,
            "procs": sorted(procs)}


def _comparable(a: str, b: str) -> bool:
    return a.startswith(b) or b.startswith(a)


def monitor_agreement(trace: Trace) -> list[dict]:
    """No two correct processors decide different values."""
    out = []
    first = None
    for e in trace.select("decide"):
        if first is None:
            first = e
        elif e["value"] != first["value"]:
            out.append(_violation(
                "agreement", e["t"],
                f"processor {e['proc']} decided {e['value']}, "
                f"processor {first['proc']} decided {first['value']}",
                [e["proc"], first["proc"]]))
    return out


def monitor_validity(trace: Trace) -> list[dict]:
    """With unanimous inputs, only the common input may be decided."""
    meta = _meta(trace)
    inputs = meta.get("inputs")
    if inputs not in ("unanimous-0", "unanimous-1"):
        return []
    expect = int(inputs[-1])
    return [
        _violation("validity", e["t"],
                   f"processor {e['proc']} decided {e['value']} despite "
                   f"unanimous input {expect}", [e["proc"]])
        for e in trace.select("decide") if e["value"] != expect
    ]


def monitor_consistency(trace: Trace) -> list[dict]:
    """(i) per-processor finals only ever extend; (ii) any two finals held by
    correct processors are prefix-comparable.

    For (ii) it suffices to compare each new final against the longest seen
    so far: the longest only grows by self-extension, so every final on a
    clean trace is a prefix of the ultimate longest, and any two prefixes of
    one string are comparable.
    """
    meta = _meta(trace)
    genesis = meta.get("genesis_label", "")
    out = []
    current: dict[int, str] = {}
    longest = genesis
    for e in trace.events:
        if e["ev"] != "final":
            continue
        proc, sigma = e["proc"], e["value"]
        prev = current.get(proc, genesis)
        if not sigma.startswith(prev):
            out.append(_violation(
                "consistency-i", e["t"],
                f"processor {proc} final went {prev!r} -> {sigma!r}", [proc]))
        if not _comparable(sigma, longest):
            out.append(_violation(
                "consistency-ii", e["t"],
                f"final {sigma!r} of processor {proc} incomparable with "
                f"{longest!r}", [proc]))
        current[proc] = sigma
        if len(sigma) > len(longest):
            longest = sigma
    return out


def monitor_delivery(trace: Trace) -> list[dict]:
    """Correct-to-correct traffic arrives within the delivery bound."""
    delta = _meta(trace).get("delta", 1)
    return [
        _violation("delivery", e["t"],
                   f"{e.get('kind', 'message')} delivered after "
                   f"{e['deliver'] - e['t']} > {delta} slots", [e.get("src", -1)])
        for e in trace.select("send")
        if e["deliver"] - e["t"] > delta or e["deliver"] < e["t"]
    ]


def monitor_quorum(trace: Trace) -> list[dict]:
    """At most one proposal per round can gather a stage-1 quorum, and one
    odd epoch confirms at most one value."""
    out = []
    by_round: dict[tuple[int, int], dict] = {}
    for e in trace.select("qc"):
        if e["stage"] != 1:
            continue
        key = (e["e"], e["r"])
        prev = by_round.setdefault(key, e)
        if prev["pid"] != e["pid"]:
            out.append(_violation(
                "quorum", e["t"],
                f"two stage-1 QCs in epoch {e['e']} round {e['r']}: "
                f"{prev['pid']} and {e['pid']}"))
    confirmed: dict[int, dict] = {}
    for e in trace.select("confirm"):
        prev = confirmed.setdefault(e["e"], e)
        if prev["value"] != e["value"]:
            out.append(_violation(
                "quorum", e["t"],
                f"epoch {e['e']} confirmed both {prev['value']!r} and "
                f"{e['value']!r}", [e["proc"], prev["proc"]]))
    return out


def monitor_frosty_claims(trace: Trace) -> list[dict]:
    """Liveness and cross-epoch safety of the fallback path.

    For each stuck condition at slot t0: within 6*delta*gamma slots the stuck
    processor's final must properly extend, or every correct processor must
    have entered the next (odd) epoch.  Every entered odd epoch must confirm
    within 3*delta*(f+2) slots of first entry, and every confirmed value must
    extend all finals held earlier by correct processors.
    """
    meta = _meta(trace)
    n, f = meta["n"], meta["f"]
    delta = meta.get("delta", 1)
    gamma = meta.get("gamma", 300)
    genesis = meta.get("genesis_label", "")
    horizon = meta.get("max_timeslots", 0)
    out = []

    finals_by_proc: dict[int, list[tuple[int, str]]] = defaultdict(list)
    for e in trace.select("final"):
        finals_by_proc[e["proc"]].append((e["t"], e["value"]))
    entries: dict[int, dict[int, int]] = defaultdict(dict)  # epoch -> proc -> t
    for e in trace.select("epoch"):
        entries[e["e"]].setdefault(e["proc"], e["t"])
    confirms = trace.select("confirm")

    # Claim on confirmed values: extend every earlier correct final.
    longest, li = genesis, 0
    final_events = sorted(trace.select("final"), key=lambda e: e["t"])
    for c in confirms:
        while li < len(final_events) and final_events[li]["t"] < c["t"]:
            v = final_events[li]["value"]
            if len(v) > len(longest):
                longest = v
            li += 1
        if not c["value"].startswith(longest):
            out.append(_violation(
                "frosty-claim-extends", c["t"],
                f"confirmed value {c['value']!r} does not extend prior final "
                f"{longest!r}", [c["proc"]]))

    # Liveness window per stuck condition.
    window = 6 * delta * gamma
    correct = set(range(n - f))
    for s in trace.select("stuck_condition"):
        t0, proc, sigma0, epoch = s["t"], s["proc"], s["value"], s["e"]
        deadline = t0 + window
        extended = any(t <= deadline and v != sigma0 and v.startswith(sigma0)
                       for t, v in finals_by_proc.get(proc, []))
        entered = entries.get(epoch + 1, {})
        all_entered = all(p in entered and entered[p] <= deadline
                          for p in correct)
        if extended or all_entered:
            continue
        if deadline > horizon:
            continue  # ran out of simulated time before the window closed
        out.append(_violation(
            "frosty-claim-liveness", t0,
            f"final of processor {proc} neither extended nor did all "
            f"correct processors enter epoch {epoch + 1} within "
            f"{window} slots", [proc]))

    # Odd-epoch duration bound after first correct entry.
    bound = 3 * delta * (f + 2)
    for epoch, procs in entries.items():
        if epoch % 2 == 0 or not procs:
            continue
        t_enter = min(procs.values())
        ok = any(c["e"] == epoch and c["t"] <= t_enter + bound for c in confirms)
        if not ok and t_enter + bound <= horizon:
            out.append(_violation(
                "frosty-claim-duration", t_enter,
                f"odd epoch {epoch} did not confirm within {bound} slots"))
    return out


def _meta(trace: Trace) -> dict:
    for e in trace.events:
        if e["ev"] == "run_start":
            return e
    return {}


def check_all(trace: Trace) -> list[dict]:
    """Every monitor applicable to the trace's protocol."""
    meta = _meta(trace)
    protocol = meta.get("protocol", "")
    out = []
    out.extend(monitor_delivery(trace))
    if protocol == "snowflake":
        out.extend(monitor_agreement(trace))
        out.extend(monitor_validity(trace))
    else:
        out.extend(monitor_consistency(trace))
    if protocol == "frosty":
        out.extend(monitor_quorum(trace))
        out.extend(monitor_frosty_claims(trace))
    return out
