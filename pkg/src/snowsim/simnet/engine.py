"""The deterministic simulation driver.

One run is a strictly sequential timeslot loop over pure per-processor
state machines.  Peer samples come from the counter-based mixing function,
so every draw is a pure function of (seed, processor, round, slot) and a
run replays bit for bit.  Corrupted processors occupy the top id range and
act through the registered strategy before correct processors update
(rushing adversary).

Binary agreement additionally offers a "tally" mode for large seed sweeps:
per-round response tallies are drawn from their exact aggregate
distribution through the kernels package instead of per peer index.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter

import numpy as np

from .. import rng
from ..blocks import BlockStore, last_block, make_genesis, reduct
from ..frosty import FrostyParams, FrostyState, lead
from ..kernels import run_snowflake_tally
from ..snowflake import SnowflakeParams
from ..snowman import SnowmanParams, SnowmanState
from . import adversary as adv
from .blockgen import BlockGenerator
from .config import SimConfig
from .monitors import check_all
from .trace import Metrics, Trace

__all__ = ["run", "ViolationError", "proposal_pid"]


class ViolationError(RuntimeError):
    def __init__(self, violations: list[dict]):
        super().__init__(f"{len(violations)} monitor violation(s); first: "
                         f"{violations[0]['detail']}")
        self.violations = violations


def run(config: SimConfig) -> tuple[Trace, Metrics]:
    config.check()
    trace = Trace()
    genesis_label = ""
    if config.protocol != "snowflake":
        genesis_label = make_genesis(config.label_bits).label
    trace.append(
        0, "run_start", protocol=config.protocol, n=config.n, f=config.f,
        seed=config.seed, inputs=config.inputs, delta=config.delta,
        gamma=config.params.get("gamma", 300), genesis_label=genesis_label,
        max_timeslots=config.max_timeslots,
        adversary=config.adversary["name"], mode=config.mode)

    if config.protocol == "snowflake":
        rounds_run = _run_snowflake(config, trace)
    elif config.protocol == "snowman":
        rounds_run = _run_snowman(config, trace)
    else:
        rounds_run = _run_frosty(config, trace)
    trace.append(rounds_run * config.slots_per_round, "run_end",
                 rounds_run=rounds_run)

    violations = check_all(trace)
    metrics = _metrics_from_trace(config, trace, rounds_run, len(violations))
    if config.halt_on_violation and violations:
        raise ViolationError(violations)
    return trace, metrics


def _metrics_from_trace(config, trace, rounds_run, violations) -> Metrics:
    m = Metrics(seed=config.seed, protocol=config.protocol, n=config.n,
                f=config.f, rounds_run=rounds_run, violations=violations)
    decides = trace.select("decide")
    if decides:
        m.decided_count = len(decides)
        m.first_decision_round = min(e["round"] for e in decides)
        m.last_decision_round = max(e["round"] for e in decides)
    finals: dict[int, str] = {}
    for e in trace.select("final"):
        finals[e["proc"]] = e["value"]
    if finals:
        lens = [len(v) for v in finals.values()]
        m.final_len_min, m.final_len_max = min(lens), max(lens)
    m.epoch_changes = len({(e["proc"], e["e"])
                           for e in trace.select("epoch") if e["e"] > 0})
    return m


# ---------------------------------------------------------------------------
# Binary agreement
# ---------------------------------------------------------------------------

def _snowflake_params(config) -> SnowflakeParams:
    p = config.params
    rules = p.get("rules")
    return SnowflakeParams(k=p["k"], alpha1=p["alpha1"], alpha2=p["alpha2"],
                           beta=p["beta"],
                           rules=tuple(map(tuple, rules)) if rules else None)


_KERNEL_NAMES = {"none": "none", "crash": "crash", "split-keeper": "split",
                 "opposite": "opposite"}


def _run_snowflake(config: SimConfig, trace: Trace) -> int:
    params = _snowflake_params(config)
    name = config.adversary["name"]
    if name not in _KERNEL_NAMES:
        raise ValueError(f"strategy {name!r} is not a binary-agreement strategy")
    u = config.correct
    init_vals = np.zeros(u, dtype=np.int8)
    init_vals[: config.initial_ones()] = 1
    a2s = np.array([a for a, _ in params.decision_rules], dtype=np.int64)
    betas = np.array([b for _, b in params.decision_rules], dtype=np.int64)

    if config.mode == "tally":
        gen = rng.run_generator(config.seed)
        res = run_snowflake_tally(gen, config.n, config.f, params.k,
                                  params.alpha1, a2s, betas,
                                  config.max_rounds, init_vals,
                                  _KERNEL_NAMES[name])
        decided_round, decided_val = res["decided_round"], res["decided_val"]
        rounds_run = int(res["rounds_run"])
    else:
        decided_round, decided_val, rounds_run = _snowflake_indexed(
            config, params, init_vals, a2s, betas, name)

    order = np.argsort(decided_round, kind="stable")
    for i in order:
        if decided_round[i] < 0:
            continue
        s = int(decided_round[i])
        trace.append(config.slots_per_round * s, "decide", proc=int(i),
                     round=s, value=int(decided_val[i]))
    return rounds_run


def _snowflake_indexed(config, params, init_vals, a2s, betas, name):
    """Per-peer-index sampling, vectorized over processors."""
    n, f, u = config.n, config.f, config.correct
    k, alpha1 = params.k, params.alpha1
    vals = init_vals.copy()
    counts = np.zeros((u, len(a2s)), dtype=np.int64)
    decided_round = np.full(u, -1, dtype=np.int64)
    decided_val = np.full(u, -1, dtype=np.int8)
    rounds_run = 0
    for s in range(1, config.max_rounds + 1):
        active = np.nonzero(decided_round < 0)[0]
        if active.size == 0:
            break
        rounds_run = s
        m = int(vals.sum())
        idx = rng.sample_indices_block(config.seed, active, s, n, k)
        is_byz = idx >= u
        resp = vals[np.minimum(idx, u - 1)].astype(np.int64)
        av = vals[active].astype(np.int64)
        b = is_byz.sum(axis=1)
        correct_ones = np.where(is_byz, 0, resp).sum(axis=1)
        if name == "none":
            ones_t = correct_ones
            zeros_t = k - b - correct_ones
        elif name == "crash":
            ones_t = correct_ones
            zeros_t = (k - b) - correct_ones
        elif name == "split-keeper":
            bit = adv.minority_bit(m, u - m)
            ones_t = correct_ones + (b if bit == 1 else 0)
            zeros_t = (k - b) - correct_ones + (b if bit == 0 else 0)
        else:  # opposite
            ones_t = correct_ones + np.where(av == 0, b, 0)
            zeros_t = (k - b) - correct_ones + np.where(av == 1, b, 0)

        opp = np.where(av == 1, zeros_t, ones_t)
        flip = opp >= alpha1
        av = np.where(flip, 1 - av, av)
        cnt = counts[active]
        cnt[flip] = 0
        match = np.where(av == 1, ones_t, zeros_t)
        cnt = np.where(match[:, None] >= a2s[None, :], cnt + 1, 0)
        dec = (cnt >= betas[None, :]).any(axis=1)
        vals[active] = av.astype(np.int8)
        counts[active] = cnt
        newly = active[dec]
        decided_round[newly] = s
        decided_val[newly] = av[dec].astype(np.int8)
    return decided_round, decided_val, rounds_run


# ---------------------------------------------------------------------------
# Shared chain-sampling plumbing
# ---------------------------------------------------------------------------

def _apportion(weights: dict[str, float], total: int) -> dict[str, int]:
    """Deterministic largest-remainder split of `total` responders."""
    items = sorted(weights.items())
    raw = [w * total for _, w in items]
    base = [math.floor(r) for r in raw]
    leftover = total - sum(base)
    order = sorted(range(len(items)), key=lambda i: (base[i] - raw[i], items[i][0]))
    for i in order[:leftover]:
        base[i] += 1
    return {items[i][0]: base[i] for i in range(len(items)) if base[i]}


def _category_counts(seed, round_no, u, n, k, cat_of_proc, n_cats):
    """Per-querier sample tallies over response categories, from per-index
    peer draws."""
    idx = rng.sample_indices_block(seed, np.arange(u, dtype=np.int64),
                                   round_no, n, k)
    cats = cat_of_proc[idx]
    flat = cats + n_cats * np.arange(u, dtype=np.int64)[:, None]
    return np.bincount(flat.ravel(), minlength=u * n_cats).reshape(u, n_cats)


def _lowest_final_tip(states, store):
    low = min((st.final for st in states), key=lambda s: (len(s), s))
    return last_block(low, store)


def _frontier_branches(states, store):
    """(branch chain strings, frontier chain string) at the fork point the
    adversary cares about: the last block of the lowest correct final."""
    tip = _lowest_final_tip(states, store)
    base = "".join(b.label for b in _chain_to(tip, store))
    return [base + c.label for c in store.children(tip.id)], base


def _chain_to(tip, store):
    chain = [tip]
    while chain[0].parent is not None:
        chain.insert(0, store.get(chain[0].parent))
    return chain


# ---------------------------------------------------------------------------
# Chain replication
# ---------------------------------------------------------------------------

def _run_snowman(config: SimConfig, trace: Trace) -> int:
    p = config.params
    params = SnowmanParams(k=p["k"], alpha1=p["alpha1"], alpha2=p["alpha2"],
                           beta=p["beta"])
    name = config.adversary["name"]
    u, n = config.correct, config.n
    genesis = make_genesis(config.label_bits)
    store = BlockStore(genesis)
    gen_blocks = BlockGenerator(config.block_gen["policy"], config.label_bits,
                                period=config.block_gen.get("period", 1),
                                start_round=config.block_gen.get("start_round", 0),
                                max_blocks=config.block_gen.get("max_blocks", 10 ** 9))
    states = [SnowmanState(params, store) for _ in range(u)]
    split = config.adversary.get("split", 0.8)

    rounds_run = 0
    for s in range(1, config.max_rounds + 1):
        rounds_run = s
        t = config.slots_per_round * s
        for b in gen_blocks.tick(s, _lowest_final_tip(states, store)):
            store.add(b)
            trace.append(t, "block", id=b.id, parent=b.parent,
                         height=b.height, label=b.label)

        # Response category of every processor this round.
        red_cache: dict[str, str] = {}
        correct_resp = []
        for st in states:
            r = red_cache.get(st.pref)
            if r is None:
                r = red_cache[st.pref] = reduct(st.pref, store)
            correct_resp.append(r)
        correct_tally = Counter(correct_resp)
        if config.f > 0:
            if name == "crash":
                byz_counts = {genesis.label: config.f}
            else:
                branches, base = _frontier_branches(states, store)
                weights = adv.chain_byz_weights(name, branches, correct_tally,
                                                base, split)
                byz_counts = _apportion(weights, config.f)
        else:
            byz_counts = {}
        cats = sorted(set(correct_tally) | set(byz_counts))
        cat_index = {c: i for i, c in enumerate(cats)}
        cat_of_proc = np.empty(n, dtype=np.int64)
        for i, r in enumerate(correct_resp):
            cat_of_proc[i] = cat_index[r]
        pos = u
        for c, cnt in sorted(byz_counts.items()):
            cat_of_proc[pos: pos + cnt] = cat_index[c]
            pos += cnt

        counts = _category_counts(config.seed, s, u, n, params.k,
                                  cat_of_proc, len(cats))
        for i, st in enumerate(states):
            tally = {cats[c]: int(counts[i, c])
                     for c in np.nonzero(counts[i])[0]}
            before = st.final
            st.end_round_tally(tally)
            if st.final != before:
                trace.append(t, "final", proc=i, round=s, value=st.final)
    return rounds_run


# ---------------------------------------------------------------------------
# Epoch fallback
# ---------------------------------------------------------------------------

def proposal_pid(p) -> str:
    """Stable content-derived proposal identifier for traces."""
    if p is None:
        return "empty"
    raw = f"{p.r}/{p.e}/{p.signer}/{p.final}/{proposal_pid(p.par)}"
    return hashlib.sha1(raw.encode()).hexdigest()[:12]


def _run_frosty(config: SimConfig, trace: Trace) -> int:
    p = config.params
    params = FrostyParams(k=p["k"], alpha1=p["alpha1"], alpha2=p["alpha2"],
                          alpha3=p["alpha3"], beta=p["beta"], gamma=p["gamma"])
    name = config.adversary["name"]
    u, n, delta = config.correct, config.n, config.delta
    genesis = make_genesis(config.label_bits)
    store = BlockStore(genesis)
    gen_blocks = BlockGenerator(config.block_gen["policy"], config.label_bits,
                                period=config.block_gen.get("period", 1),
                                start_round=config.block_gen.get("start_round", 0),
                                max_blocks=config.block_gen.get("max_blocks", 10 ** 9))
    states = [FrostyState(params, store, n, i) for i in range(u)]
    for i, st in enumerate(states):
        st.init_even_epoch()
        trace.append(0, "epoch", proc=i, e=0)

    pool: list[tuple[int, object]] = []   # (deliver_time, broadcast payload)
    stuck_sent: set[tuple[int, int, str]] = set()
    qc_seen: set = set()
    last_epoch = [0] * u

    def broadcast(t, msg, kind):
        pool.append((t + delta, msg))
        trace.append(t, "send", kind=kind, src=getattr(msg, "signer", -1),
                     deliver=t + delta)

    def note_transitions(t):
        for i, st in enumerate(states):
            while last_epoch[i] < st.e:
                last_epoch[i] += 1
                trace.append(t, "epoch", proc=i, e=last_epoch[i])
        for qc in states[0].view.all_qcs():
            key = (proposal_pid(qc.proposal), qc.stage)
            if key not in qc_seen:
                qc_seen.add(key)
                trace.append(t, "qc", stage=qc.stage, r=qc.proposal.r,
                             e=qc.proposal.e, pid=key[0],
                             value=qc.proposal.final)

    for t in range(config.max_timeslots):
        s, phase = divmod(t, 3 * delta)
        if phase % delta:
            continue
        phase //= delta

        # Deliver everything due, identically, to every correct processor.
        due = [m for dt, m in pool if dt <= t]
        pool = [(dt, m) for dt, m in pool if dt > t]
        for m in due:
            for st in states:
                st.receive(m)

        # Slot-independent transitions: epoch certificates, confirmations.
        for i, st in enumerate(states):
            ec = st.try_enter_odd_epoch()
            if ec is not None:
                broadcast(t, ec, "ec")
            if st.e % 2 == 1 and not st.ready.get(st.e):
                sv = st.activate_odd_epoch()
                broadcast(t, sv, "starting_vote")
            confirmed = st.check_confirmed()
            if confirmed is not None:
                trace.append(t, "confirm", proc=i, e=confirmed.e,
                             value=confirmed.final, pid=proposal_pid(confirmed))
                trace.append(t, "final", proc=i, round=s, value=st.final)
            if st.e % 2 == 0 and not st.ready.get(st.e):
                st.init_even_epoch()
        note_transitions(t)

        even_ready = [(i, st) for i, st in enumerate(states)
                      if st.e % 2 == 0 and st.ready.get(st.e)]
        odd_ready = [(i, st) for i, st in enumerate(states)
                     if st.e % 2 == 1 and st.ready.get(st.e)]

        if phase == 0:
            if even_ready:
                for b in gen_blocks.tick(s, _lowest_final_tip(states, store)):
                    store.add(b)
                    trace.append(t, "block", id=b.id, parent=b.parent,
                                 height=b.height, label=b.label)
                _frosty_even_round(config, params, trace, even_ready,
                                   store, genesis, name, s, t,
                                   stuck_sent, broadcast)
            for i, st in odd_ready:
                if lead(s, n) == i:
                    prop = st.make_proposal(s)
                    if prop is not None:
                        st.receive(prop)
                        broadcast(t, prop, "proposal")
        elif phase == 1:
            for i, st in odd_ready:
                vote = st.stage1_phase(s)
                if vote is not None:
                    broadcast(t, vote, "vote1")
        else:
            for i, st in odd_ready:
                vote = st.stage2_phase(s)
                if vote is not None:
                    broadcast(t, vote, "vote2")
        note_transitions(t)
    return config.max_timeslots // (3 * delta)


def _frosty_even_round(config, params, trace, even_ready, store,
                       genesis, name, s, t, stuck_sent, broadcast):
    u, n = config.correct, config.n
    red_cache: dict[str, str] = {}

    def red(sigma):
        r = red_cache.get(sigma)
        if r is None:
            r = red_cache[sigma] = reduct(sigma, store)
        return r

    resp = {i: (red(st.pref), red(st.final)) for i, st in even_ready}
    correct_pairs = Counter(resp.values())
    pref_tally_correct = Counter(pr for pr, _ in resp.values())
    pairs = set(correct_pairs)
    byz_counts: dict[tuple[str, str], int] = {}
    if config.f > 0:
        if name == "crash" or not pref_tally_correct:
            byz_counts = {(genesis.label, genesis.label): config.f}
        else:
            branches, base = _frontier_branches([st for _, st in even_ready],
                                                store)
            weights = adv.chain_byz_weights(name, branches,
                                            pref_tally_correct, base)
            # The adversary never admits to any finalized progress.
            byz_counts = {(pr, genesis.label): c
                          for pr, c in _apportion(weights, config.f).items()}
    pairs |= set(byz_counts)
    # Processors past their even epoch answer nothing; samplers record the
    # genesis chain for them.
    idle = (genesis.label, genesis.label)
    pairs.add(idle)
    cats = sorted(pairs)
    cat_index = {c: i for i, c in enumerate(cats)}
    cat_of_proc = np.full(n, cat_index[idle], dtype=np.int64)
    for i, pair in resp.items():
        cat_of_proc[i] = cat_index[pair]
    pos = u
    for pair, cnt in sorted(byz_counts.items()):
        cat_of_proc[pos: pos + cnt] = cat_index[pair]
        pos += cnt

    counts = _category_counts(config.seed, s, u, n, params.k,
                              cat_of_proc, len(cats))
    for i, st in even_ready:
        pref_tally: dict[str, int] = {}
        final_tally: dict[str, int] = {}
        for c in np.nonzero(counts[i])[0]:
            pr, fi = cats[c]
            cnt = int(counts[i, c])
            pref_tally[pr] = pref_tally.get(pr, 0) + cnt
            final_tally[fi] = final_tally.get(fi, 0) + cnt
        before = st.final
        stuck = st.even_round_tally(pref_tally, final_tally)
        if st.final != before:
            trace.append(t, "final", proc=i, round=s, value=st.final)
        for msg in stuck:
            key = (msg.signer, msg.epoch, msg.final)
            if key not in stuck_sent:
                stuck_sent.add(key)
                trace.append(t, "stuck_condition", proc=i, e=st.e,
                             round=s, value=msg.final)
                broadcast(t, msg, "stuck")
