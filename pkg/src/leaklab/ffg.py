"""Per-branch checkpoint finality with inactivity-leak accounting.

A :class:`BranchView` is one branch's view of the chain: its checkpoints,
which of them are justified or finalized, and its own copy of the validator
registry (stakes and inactivity scores differ between branches once they
diverge). Validators with identical behaviour are aggregated into
:class:`ValidatorCohort` objects.

One epoch on a branch runs, in order: collect votes, tally and justify,
finalize, recompute the leak flag, apply penalties with the scores from the
previous epoch, update scores, eject. :meth:`BranchView.step` does exactly
that.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

PENALTY_SCALE = 2**26
SCORE_BIAS = 4          # added per inactive epoch
SCORE_RECOVERY = 1      # removed per active epoch
SCORE_RECOVERY_NO_LEAK = 16
LEAK_AFTER = 4          # epochs without finalization before the leak starts
MAX_STAKE = 32.0
EJECTION_THRESHOLD = 16.75
SLASH_FRACTION = 1.0 / 32.0

EVENT_KINDS = ("justified", "finalized", "ejected", "slashed", "leak_start", "leak_end")


class ProtocolError(Exception):
    """Input that the protocol would reject outright."""


# -- array kernels shared by cohort and per-validator simulations ------------

def next_scores(scores, active, leak: bool):
    """Inactivity scores after one epoch.

    Active validators lose 1 (floored at 0), inactive ones gain 4. Outside
    the leak every score additionally drops by 16, floored at 0.
    """
    scores = np.asarray(scores)
    out = np.where(active, np.maximum(scores - SCORE_RECOVERY, 0), scores + SCORE_BIAS)
    if not leak:
        out = np.maximum(out - SCORE_RECOVERY_NO_LEAK, 0)
    return out


def penalized(stake, scores, penalty_scale: float = PENALTY_SCALE):
    """Stake after one leak-epoch penalty ``s * I / penalty_scale``."""
    return np.maximum(np.asarray(stake) * (1.0 - np.asarray(scores) / penalty_scale), 0.0)


def supermajority(weight: float, total: float) -> bool:
    """Strictly more than two thirds; integer-safe comparison ``3w > 2T``."""
    return 3.0 * weight > 2.0 * total


# -- protocol objects ---------------------------------------------------------

@dataclass(frozen=True)
class Checkpoint:
    branch_id: str
    epoch: int
    block_id: str


GENESIS = Checkpoint("genesis", 0, "genesis")


@dataclass(frozen=True)
class CheckpointVote:
    voter: str
    epoch: int
    source: Checkpoint
    target: Checkpoint
    weight: float

    def __post_init__(self):
        if not self.source.epoch < self.target.epoch:
            raise ProtocolError("vote source must precede its target")
        if self.target.epoch != self.epoch:
            raise ProtocolError("vote target must be the checkpoint of the vote's epoch")


@dataclass
class ValidatorCohort:
    id: str
    count: int
    stake: float = MAX_STAKE
    inactivity_score: int = 0
    is_byzantine: bool = False
    ejected: bool = False
    slashed: bool = False

    @property
    def weight(self) -> float:
        """Total stake carried by the cohort (0 once ejected)."""
        return 0.0 if self.ejected else self.count * self.stake


@dataclass
class Event:
    epoch: int
    branch: str | None
    event: str
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"epoch": self.epoch, "branch": self.branch,
                           "event": self.event, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"))


@dataclass
class BranchView:
    branch_id: str
    cohorts: dict[str, ValidatorCohort]
    checkpoints: list[Checkpoint] = field(default_factory=lambda: [GENESIS])
    justified: set[int] = field(default_factory=lambda: {0})
    finalized_epoch: int = 0
    last_finalization_epoch: int = 0
    leak_active: bool = False
    current_epoch: int = 0
    # target epoch -> source epoch of the link that justified it
    justification_sources: dict[int, int] = field(default_factory=dict)
    leak_started_at: int | None = None
    penalty_scale: float = PENALTY_SCALE
    _fresh_links: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._by_epoch = {cp.epoch: cp for cp in self.checkpoints}

    # -- views ----------------------------------------------------------------

    def checkpoint_at(self, epoch: int) -> Checkpoint | None:
        return self._by_epoch.get(epoch)

    @property
    def finalized(self) -> set[int]:
        return {e for e in self.justified if e <= self.finalized_epoch}

    def finalized_chain(self) -> list[Checkpoint]:
        return [cp for cp in self.checkpoints if cp.epoch <= self.finalized_epoch]

    def last_justified(self) -> Checkpoint:
        return self.checkpoint_at(max(self.justified))

    def total_stake(self) -> float:
        return sum(c.weight for c in self.cohorts.values())

    def stake_of(self, cohort_ids: Iterable[str]) -> float:
        return sum(self.cohorts[c].weight for c in cohort_ids)

    def byzantine_stake(self) -> float:
        return sum(c.weight for c in self.cohorts.values() if c.is_byzantine)

    def live_cohorts(self) -> list[ValidatorCohort]:
        return [c for c in self.cohorts.values() if not c.ejected]

    # -- epoch machinery ------------------------------------------------------

    def open_epoch(self, epoch: int) -> Checkpoint:
        """Append this branch's checkpoint for ``epoch``."""
        if epoch <= self.checkpoints[-1].epoch:
            raise ProtocolError(f"epoch {epoch} already opened on {self.branch_id}")
        cp = Checkpoint(self.branch_id, epoch, f"{self.branch_id}:{epoch}")
        self.checkpoints.append(cp)
        self._by_epoch[epoch] = cp
        self.current_epoch = epoch
        return cp

    def make_votes(self, cohort_ids: Iterable[str], epoch: int) -> list[CheckpointVote]:
        """Votes of ``cohort_ids`` for this branch's checkpoint at ``epoch``."""
        target = self.checkpoint_at(epoch)
        if target is None:
            raise ProtocolError(f"no checkpoint at epoch {epoch} on {self.branch_id}")
        source = self.last_justified()
        votes = []
        for cid in sorted(cohort_ids):
            cohort = self._cohort(cid)
            if cohort.ejected:
                continue
            votes.append(CheckpointVote(cid, epoch, source, target, cohort.weight))
        return votes

    def _cohort(self, cid: str) -> ValidatorCohort:
        try:
            return self.cohorts[cid]
        except KeyError:
            raise ProtocolError(f"unknown cohort {cid!r} on branch {self.branch_id}") from None

    def tally_and_justify(self, votes: Iterable[CheckpointVote], epoch: int) -> list[Event]:
        """Justify every target backed by more than 2/3 of the branch's stake."""
        seen: set[str] = set()
        links: dict[tuple[Checkpoint, Checkpoint], float] = defaultdict(float)
        for vote in votes:
            if vote.epoch != epoch:
                raise ProtocolError(f"vote for epoch {vote.epoch} tallied at {epoch}")
            if vote.voter in seen:
                raise ProtocolError(f"{vote.voter} voted twice in epoch {epoch} "
                                    f"on {self.branch_id}")
            seen.add(vote.voter)
            if vote.target.branch_id != self.branch_id:
                continue  # wrong target from this branch's point of view
            if vote.source.epoch not in self.justified:
                continue
            links[(vote.source, vote.target)] += vote.weight

        events = []
        total = self.total_stake()
        for (source, target), weight in sorted(links.items(), key=lambda kv: kv[0][1].epoch):
            if target.epoch in self.justified or not supermajority(weight, total):
                continue
            self.justified.add(target.epoch)
            self.justification_sources[target.epoch] = source.epoch
            self._fresh_links.append(target.epoch)
            events.append(Event(epoch, self.branch_id, "justified",
                                {"target": target.epoch, "source": source.epoch,
                                 "weight": weight, "total": total}))
        return events

    def finalize(self, epoch: int) -> list[Event]:
        """Finalize ``e`` when ``e`` and ``e+1`` are justified by the link e -> e+1."""
        events = []
        fresh, self._fresh_links = sorted(self._fresh_links), []
        for target in fresh:
            source = self.justification_sources[target]
            if source == target - 1 and source in self.justified and source > self.finalized_epoch:
                self.finalized_epoch = source
                self.last_finalization_epoch = epoch
                events.append(Event(epoch, self.branch_id, "finalized",
                                    {"checkpoint": source, "block": self.checkpoint_at(source).block_id}))
        return events

    def refresh_leak(self, epoch: int) -> list[Event]:
        leak = epoch - self.last_finalization_epoch > LEAK_AFTER
        events = []
        if leak and not self.leak_active:
            self.leak_started_at = epoch
            events.append(Event(epoch, self.branch_id, "leak_start", {}))
        elif self.leak_active and not leak:
            events.append(Event(epoch, self.branch_id, "leak_end", {}))
        self.leak_active = leak
        return events

    def apply_penalties(self) -> None:
        """Charge ``stake * score / 2**26`` to every live cohort (leak only)."""
        if not self.leak_active:
            raise ProtocolError("penalties apply only during the inactivity leak")
        for c in self.live_cohorts():
            c.stake = float(penalized(c.stake, c.inactivity_score, self.penalty_scale))

    def update_inactivity_scores(self, active_cohorts: Iterable[str], leak: bool) -> None:
        active = set(active_cohorts)
        for cid in active:
            if self._cohort(cid).ejected:
                raise ProtocolError(f"ejected cohort {cid!r} cannot be active")
        for c in self.live_cohorts():
            c.inactivity_score = int(next_scores(c.inactivity_score, c.id in active, leak))

    def eject(self, threshold: float, epoch: int | None = None) -> list[Event]:
        events = []
        for c in self.live_cohorts():
            if c.stake <= threshold:
                c.ejected = True
                events.append(Event(self.current_epoch if epoch is None else epoch,
                                    self.branch_id, "ejected",
                                    {"cohort": c.id, "stake": c.stake}))
        return events

    def apply_slashing(self, offenders: Iterable[str], evidence_epoch: int,
                       slash_fraction: float = SLASH_FRACTION) -> list[Event]:
        """Burn ``slash_fraction`` of each offender's stake and expel it."""
        events = []
        for cid in sorted(offenders):
            c = self.cohorts.get(cid)
            if c is None or c.slashed:
                continue
            burned = c.stake * slash_fraction
            c.stake -= burned
            c.slashed = True
            c.ejected = True
            events.append(Event(evidence_epoch, self.branch_id, "slashed",
                                {"cohort": cid, "burned_per_validator": burned}))
        return events

    def step(self, epoch: int, active_cohorts: Iterable[str],
             ejection_threshold: float = EJECTION_THRESHOLD,
             extra_votes: Iterable[CheckpointVote] = ()) -> tuple[list[CheckpointVote], list[Event]]:
        """Run one full epoch with ``active_cohorts`` voting for this branch.

        Returns the votes cast (for the slashing archive) and the events.
        """
        active = [cid for cid in sorted(set(active_cohorts)) if not self._cohort(cid).ejected]
        if self.checkpoints[-1].epoch != epoch:
            self.open_epoch(epoch)
        votes = self.make_votes(active, epoch) + list(extra_votes)
        events = self.tally_and_justify(votes, epoch)
        events += self.finalize(epoch)
        events += self.refresh_leak(epoch)
        if self.leak_active:
            self.apply_penalties()
        self.update_inactivity_scores(active, self.leak_active)
        events += self.eject(ejection_threshold, epoch)
        return votes, events


# -- slashing -----------------------------------------------------------------

@dataclass
class VoteArchive:
    """Append-only record of checkpoint votes, keyed by the branch they hit."""

    records: list[tuple[str, CheckpointVote]] = field(default_factory=list)

    def add(self, branch_id: str, votes: Iterable[CheckpointVote]) -> None:
        self.records.extend((branch_id, v) for v in votes)

    def merged(self, other: "VoteArchive") -> "VoteArchive":
        return VoteArchive(self.records + other.records)

    def visible_to(self, branch_ids: Iterable[str]) -> list[CheckpointVote]:
        wanted = set(branch_ids)
        return [v for b, v in self.records if b in wanted]


def detect_slashing(votes: Iterable[CheckpointVote]) -> dict[str, list[int]]:
    """Voters with two different targets in one epoch, and those epochs."""
    targets: dict[tuple[str, int], set[Checkpoint]] = defaultdict(set)
    for v in votes:
        targets[(v.voter, v.epoch)].add(v.target)
    offenders: dict[str, list[int]] = defaultdict(list)
    for (voter, epoch), ts in sorted(targets.items()):
        if len(ts) > 1:
            offenders[voter].append(epoch)
    return dict(offenders)
