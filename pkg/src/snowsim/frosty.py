"""Epoch-based liveness fallback layered over chain-string replication.

Even epochs run the sampling protocol with two additions: a fast
finalization rule (two consecutive rounds in which at least alpha3 sampled
finalized values extend a string finalize it) and stuck detection (gamma
consecutive rounds without `final` moving trigger a signed stuck message).
Enough identical stuck messages form an epoch certificate, moving everyone
to the next, odd epoch.

Odd epochs finalize exactly one value through a two-stage quorum protocol
with rotating leaders and locking, seeded by a starting certificate whose
majority prefix bounds what may be proposed.  Confirmation returns the
system to sampling in the following even epoch.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .blocks import Block, BlockStore, chain_of, find_chain_extending, last_block, reduct
from .snowman import SnowmanState, count_extending

__all__ = [
    "FrostyParams", "FrostyState", "MessageView",
    "StuckMessage", "EpochCertificate", "StartingVote", "StartingCertificate",
    "Proposal", "Vote", "QuorumCertificate",
    "f_star", "quorum_size", "ec_threshold", "sc_threshold",
    "lead", "pref_star", "proposal_round", "is_starting_certificate",
]


# ---------------------------------------------------------------------------
# Thresholds and leaders
# ---------------------------------------------------------------------------

def f_star(n: int) -> int:
    """Greatest integer strictly below n/3."""
    return (n - 1) // 3


def quorum_size(n: int) -> int:
    return n - f_star(n)


def ec_threshold(n: int) -> int:
    """Distinct identical stuck messages needed: at least n/5."""
    return -(-n // 5)


def sc_threshold(n: int) -> int:
    """Distinct starting votes needed: at least 2n/3."""
    return -(-(2 * n) // 3)


def lead(s: int, n: int) -> int:
    """Leader of fallback round s."""
    return s % n


# ---------------------------------------------------------------------------
# Wire objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StuckMessage:
    epoch: int          # the (even) epoch the signer wants to leave
    final: str
    signer: int


@dataclass(frozen=True)
class EpochCertificate:
    epoch: int          # the stuck epoch; the certificate enters epoch + 1
    final: str
    signers: frozenset[int]

    @property
    def enters(self) -> int:
        return self.epoch + 1


@dataclass(frozen=True)
class StartingVote:
    epoch: int
    pref: str
    signer: int


@dataclass(frozen=True)
class StartingCertificate:
    epoch: int
    votes: tuple[StartingVote, ...]


def is_starting_certificate(sc: StartingCertificate, n: int) -> bool:
    signers = {v.signer for v in sc.votes}
    return (len(signers) == len(sc.votes)
            and len(sc.votes) >= sc_threshold(n)
            and all(v.epoch == sc.epoch for v in sc.votes))


def pref_star(sc: StartingCertificate, n: int) -> str:
    """Longest string extended by strictly more than half of the votes.

    Well defined because two strings each extended by a strict majority are
    necessarily prefix-comparable, so a greedy bit-by-bit walk finds it.
    """
    if not is_starting_certificate(sc, n):
        raise ValueError("not a valid starting certificate")
    prefs = [v.pref for v in sc.votes]
    half = len(prefs)
    cur = ""
    while True:
        for bit in "01":
            if 2 * sum(1 for p in prefs if p.startswith(cur + bit)) > half:
                cur += bit
                break
        else:
            return cur


@dataclass(frozen=True)
class Proposal:
    """A fallback-round proposal.  par=None stands for the empty proposal,
    whose round is 0 and which is its own stage-1 certificate."""
    r: int
    e: int
    signer: int
    final: str
    par: Optional["Proposal"]
    qcprev: Optional["QuorumCertificate"]  # None only when par is None
    sc: StartingCertificate

    def __hash__(self) -> int:
        # Proposals key several hot dict paths and embed whole certificates;
        # hash the structure once instead of on every lookup.
        h = getattr(self, "_hash", None)
        if h is None:
            h = hash((self.r, self.e, self.signer, self.final,
                      self.par, self.qcprev, self.sc))
            object.__setattr__(self, "_hash", h)
        return h

    def ancestors(self) -> Iterable["Proposal"]:
        cur: Optional[Proposal] = self
        while cur is not None:
            yield cur
            cur = cur.par


def proposal_round(p: Optional[Proposal]) -> int:
    return 0 if p is None else p.r


@dataclass(frozen=True)
class Vote:
    proposal: Proposal
    stage: int  # 1 or 2
    signer: int


@dataclass(frozen=True)
class QuorumCertificate:
    proposal: Proposal
    stage: int
    signers: frozenset[int]

    @property
    def r(self) -> int:
        return self.proposal.r


def qc_round(qc: Optional[QuorumCertificate]) -> int:
    return 0 if qc is None else qc.r


def _qc_shape_ok(qc: QuorumCertificate, n: int) -> bool:
    return qc.stage in (1, 2) and len(qc.signers) >= quorum_size(n)


# ---------------------------------------------------------------------------
# Received-message bookkeeping
# ---------------------------------------------------------------------------

class MessageView:
    """Everything a processor has received, indexed for the protocol's
    "first seen" tie-breaks: certificates are frozen the moment their
    threshold is first met and never replaced."""

    def __init__(self, n: int):
        self.n = n
        self._arrival = 0
        self.proposals: dict[Proposal, int] = {}
        self.proposals_by_round: dict[int, list[Proposal]] = {}
        self._votes: dict[tuple[Proposal, int], dict[int, int]] = {}
        self._qcs: dict[tuple[Proposal, int], QuorumCertificate] = {}
        self._stuck: dict[tuple[int, str], dict[int, int]] = {}
        self._ecs: dict[int, EpochCertificate] = {}          # keyed by entered epoch
        self._starting: dict[int, dict[int, StartingVote]] = {}
        self._scs: dict[int, StartingCertificate] = {}

    def _next(self) -> int:
        self._arrival += 1
        return self._arrival

    def add_proposal(self, p: Proposal) -> None:
        if p not in self.proposals:
            self.proposals[p] = self._next()
            self.proposals_by_round.setdefault(p.r, []).append(p)

    def add_vote(self, v: Vote) -> None:
        key = (v.proposal, v.stage)
        sigs = self._votes.setdefault(key, {})
        if v.signer not in sigs:
            sigs[v.signer] = self._next()
        if key not in self._qcs and len(sigs) >= quorum_size(self.n):
            first = sorted(sigs, key=sigs.__getitem__)[: quorum_size(self.n)]
            self._qcs[key] = QuorumCertificate(v.proposal, v.stage, frozenset(first))

    def add_qc(self, qc: QuorumCertificate) -> None:
        if not _qc_shape_ok(qc, self.n):
            return
        self._qcs.setdefault((qc.proposal, qc.stage), qc)
        self.add_proposal(qc.proposal)

    def qc_for(self, p: Proposal, stage: int) -> Optional[QuorumCertificate]:
        return self._qcs.get((p, stage))

    def stage1_qcs(self) -> list[tuple[Proposal, QuorumCertificate]]:
        return [(p, qc) for (p, st), qc in self._qcs.items() if st == 1]

    def all_qcs(self) -> list[QuorumCertificate]:
        return list(self._qcs.values())

    def add_stuck(self, m: StuckMessage) -> None:
        sigs = self._stuck.setdefault((m.epoch, m.final), {})
        if m.signer not in sigs:
            sigs[m.signer] = self._next()
        if m.epoch + 1 not in self._ecs and len(sigs) >= ec_threshold(self.n):
            first = sorted(sigs, key=sigs.__getitem__)[: ec_threshold(self.n)]
            self._ecs[m.epoch + 1] = EpochCertificate(m.epoch, m.final, frozenset(first))

    def add_ec(self, ec: EpochCertificate) -> None:
        if len(ec.signers) >= ec_threshold(self.n):
            self._ecs.setdefault(ec.enters, ec)

    def ec_entering(self, epoch: int) -> Optional[EpochCertificate]:
        return self._ecs.get(epoch)

    def add_starting_vote(self, v: StartingVote) -> None:
        votes = self._starting.setdefault(v.epoch, {})
        if v.signer not in votes:
            votes[v.signer] = v
        if v.epoch not in self._scs and len(votes) >= sc_threshold(self.n):
            self._scs[v.epoch] = StartingCertificate(
                v.epoch, tuple(votes[s] for s in sorted(votes)))

    def add_sc(self, sc: StartingCertificate) -> None:
        if is_starting_certificate(sc, self.n):
            self._scs.setdefault(sc.epoch, sc)

    def sc_for(self, epoch: int) -> Optional[StartingCertificate]:
        return self._scs.get(epoch)


# ---------------------------------------------------------------------------
# Parameters and per-processor state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrostyParams:
    k: int
    alpha1: int
    alpha2: int
    alpha3: int
    beta: int = 14
    gamma: int = 300

    def __post_init__(self) -> None:
        if not self.alpha1 > self.k / 2:
            raise ValueError("alpha1 must exceed k/2")
        if not (self.alpha1 <= self.alpha2 <= self.k):
            raise ValueError("need alpha1 <= alpha2 <= k")
        if not (0 < self.alpha3 <= self.k):
            raise ValueError("need 0 < alpha3 <= k")
        if self.beta < 1 or self.gamma < 1:
            raise ValueError("beta and gamma must be >= 1")


class FrostyState(SnowmanState):
    """One processor's full protocol state across epochs."""

    def __init__(self, params: FrostyParams, store: BlockStore, n: int, me: int):
        super().__init__(params, store)
        self.n = n
        self.me = me
        self.e = 0
        self.stuckcount = 0
        self.primed: dict[str, int] = {}
        self.ready: dict[int, bool] = {}
        self.qplus: Optional[QuorumCertificate] = None  # None = empty proposal's QC
        self.vote_target: Optional[Proposal] = None     # the pseudocode's P
        self.view = MessageView(n)
        self._forwarded_ecs: set[int] = set()
        self._stage1_rounds: set[int] = set()
        self._stage2_rounds: set[int] = set()
        self._mvalid_cache: dict[Proposal, bool] = {}

    # -- message intake -----------------------------------------------------

    def receive(self, msg) -> None:
        if isinstance(msg, Block):
            self.store.add(msg)
        elif isinstance(msg, StuckMessage):
            self.view.add_stuck(msg)
        elif isinstance(msg, EpochCertificate):
            self.view.add_ec(msg)
        elif isinstance(msg, StartingVote):
            self.view.add_starting_vote(msg)
        elif isinstance(msg, StartingCertificate):
            self.view.add_sc(msg)
        elif isinstance(msg, Proposal):
            self.view.add_proposal(msg)
        elif isinstance(msg, Vote):
            self.view.add_vote(msg)
        elif isinstance(msg, QuorumCertificate):
            self.view.add_qc(msg)
        else:
            raise TypeError(f"unknown message {msg!r}")

    # -- epoch transitions ----------------------------------------------------

    def init_even_epoch(self) -> None:
        """Run once on first activation of an even epoch."""
        assert self.e % 2 == 0
        self.pref = self.final
        self.stuckcount = 0
        self.count.clear()
        self.primed.clear()
        self.val.clear()
        self.ready[self.e] = True

    def activate_odd_epoch(self) -> StartingVote:
        """Run once on first activation of an odd epoch; returns the starting
        vote to broadcast."""
        assert self.e % 2 == 1
        self.qplus = None
        self.ready[self.e] = True
        return StartingVote(self.e, self.pref, self.me)

    def try_enter_odd_epoch(self) -> Optional[EpochCertificate]:
        """Move to e+1 if an epoch certificate is available; returns the EC
        to forward (only on the first activation)."""
        if self.e % 2 != 0:
            return None
        ec = self.view.ec_entering(self.e + 1)
        if ec is None:
            return None
        self.e += 1
        if ec.enters not in self._forwarded_ecs:
            self._forwarded_ecs.add(ec.enters)
            return ec
        return None

    def check_confirmed(self) -> Optional[Proposal]:
        """Odd-epoch exit: finalize a confirmed proposal and enter e+1."""
        if self.e % 2 != 1:
            return None
        for p in self.view.proposals:
            if p.e == self.e and self.m_confirmed(p):
                self.final = p.final
                self.e += 1
                return p
        return None

    # -- even-epoch round ------------------------------------------------------

    def report_final(self) -> list[Block]:
        """The finalized chain sent to any sampler."""
        return chain_of(self.final, self.store)

    def even_round(self, rpref: Sequence[str], rfinal: Sequence[str]) -> list[StuckMessage]:
        if len(rpref) != self.params.k or len(rfinal) != self.params.k:
            raise ValueError(f"expected {self.params.k} responses")
        return self.even_round_tally(Counter(rpref), Counter(rfinal))

    def even_round_tally(self, rpref_tally: Mapping[str, int],
                         final_tally: Mapping[str, int]) -> list[StuckMessage]:
        """One even-epoch round against sampled (preferred, finalized) chain
        strings; returns any stuck message to broadcast."""
        if self.e % 2 != 0 or not self.ready.get(self.e):
            raise ValueError("even_round requires an even, initialized epoch")
        p: FrostyParams = self.params
        if self.store.children(last_block(self.final, self.store).id):
            self.stuckcount += 1
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
            if count_extending(rpref_tally, self.pref + str(1 - v)) >= p.alpha1:
                v = 1 - v
                self.val[self.pref] = v
                self._zero_counts_from(self.pref)
            supporting = count_extending(rpref_tally, self.pref + str(v))
            if supporting < p.alpha2:
                self._zero_counts_from(self.pref)
            else:
                self.count[self.pref] = self.count.get(self.pref, 0) + 1
            if self.count.get(self.pref, 0) >= p.beta:
                self.final = self.pref + str(v)
                self.stuckcount = 0
            else:
                # Fast decision rule: two consecutive alpha3-strong rounds of
                # sampled finalized values finalize the extension directly.
                for x in ("0", "1"):
                    sx = self.pref + x
                    if count_extending(final_tally, sx) >= p.alpha3:
                        if self.primed.get(sx) == 1:
                            self.final = sx
                            self.stuckcount = 0
                        else:
                            self.primed[sx] = 1
                    else:
                        self.primed[sx] = 0
            self.pref = self.pref + str(v)
        self.round += 1
        if self.stuckcount >= p.gamma:
            return [StuckMessage(self.e, self.final, self.me)]
        return []

    # -- proposal validity -----------------------------------------------------

    def m_valid(self, p: Optional[Proposal]) -> bool:
        if p is None:
            return True
        if p in self._mvalid_cache:
            return self._mvalid_cache[p]
        ok = self._m_valid_uncached(p)
        self._mvalid_cache[p] = ok
        return ok

    def _m_valid_uncached(self, p: Proposal) -> bool:
        if p not in self.view.proposals:
            return False
        if not self.m_valid(p.par):
            return False
        if p.par is not None:
            if p.e != p.par.e or p.final != p.par.final:
                return False
            if (p.qcprev is None or p.qcprev.stage != 1
                    or p.qcprev.proposal != p.par
                    or not _qc_shape_ok(p.qcprev, self.n)):
                return False
        elif p.qcprev is not None:
            return False
        if not is_starting_certificate(p.sc, self.n) or p.sc.epoch != p.e:
            return False
        return p.final.startswith(pref_star(p.sc, self.n))

    def valid_proposal_for_round(self, p: Proposal, s: int) -> bool:
        return (self.m_valid(p)
                and p.r == s
                and p.signer == lead(s, self.n)
                and p.e == self.e
                and self._fully_stored(p.final))

    def _fully_stored(self, sigma: str) -> bool:
        chain = chain_of(sigma, self.store)
        return "".join(b.label for b in chain) == sigma

    def m_confirmed(self, p: Proposal) -> bool:
        """Some M-valid descendant of p carries a stage-2 quorum certificate."""
        for p2 in list(self.view.proposals):
            if p in p2.ancestors() and self.m_valid(p2) \
                    and self.view.qc_for(p2, 2) is not None:
                return True
        return False

    # -- odd-epoch round -------------------------------------------------------

    def make_proposal(self, s: int) -> Optional[Proposal]:
        """Leader action at the start of fallback round s."""
        assert self.e % 2 == 1
        sc = self.view.sc_for(self.e)
        if sc is None:
            return None
        best: Optional[Proposal] = None
        best_qc: Optional[QuorumCertificate] = None
        for cand, qc in self.view.stage1_qcs():
            if cand.e == self.e and self.m_valid(cand) \
                    and (best is None or cand.r > best.r):
                best, best_qc = cand, qc
        if best is None:
            chain = find_chain_extending(pref_star(sc, self.n), self.store)
            if chain is None:
                return None
            final = "".join(b.label for b in chain)
            return Proposal(r=s, e=self.e, signer=self.me, final=final,
                            par=None, qcprev=None, sc=sc)
        return Proposal(r=s, e=self.e, signer=self.me, final=best.final,
                        par=best, qcprev=best_qc, sc=best.sc)

    def stage1_phase(self, s: int) -> Optional[Vote]:
        """At 3s+1: adopt the first valid proposal for s not conflicting with
        the lock, and emit a stage-1 vote."""
        assert self.e % 2 == 1
        self.vote_target = None
        if s in self._stage1_rounds:
            return None
        for p in self.view.proposals_by_round.get(s, []):
            if self.valid_proposal_for_round(p, s) \
                    and qc_round(p.qcprev) >= qc_round(self.qplus):
                self.vote_target = p
                self._stage1_rounds.add(s)
                return Vote(p, 1, self.me)
        return None

    def stage2_phase(self, s: int) -> Optional[Vote]:
        """At 3s+2: lock on the first stage-1 certificate for the adopted
        proposal and emit a stage-2 vote."""
        assert self.e % 2 == 1
        if self.vote_target is None or s in self._stage2_rounds:
            return None
        qc = self.view.qc_for(self.vote_target, 1)
        if qc is None:
            return None
        self.qplus = qc
        self._stage2_rounds.add(s)
        return Vote(self.vote_target, 2, self.me)
