"""Partition and attack scenarios driven epoch by epoch.

Two branches, ``"1"`` and ``"2"``, fork right after the genesis checkpoint
(epoch 0, finalized). Honest validators are split ``p0`` / ``1 - p0`` between
them; Byzantine validators see both branches and follow a strategy.

Scenarios 1-4 run in cohort mode: every group of identical validators is one
:class:`~leaklab.ffg.ValidatorCohort`, which is exact and independent of
the validator count. The probabilistic bouncing attack needs per-validator
state, so it runs on arrays (optionally a batch of independent runs at once)
using the same score and penalty kernels.

Epochs are wall epochs counted from the fork. ``leak_time`` counts epochs
since the first leak epoch, which is how the analytic model measures time.
"""

from __future__ import annotations

import copy
import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import ffg, rng
from .bounce_stats import p0_bounds
from .ffg import BranchView, Checkpoint, Event, ValidatorCohort, VoteArchive
from .leak_math import DEFAULT_PARAMS, ONE_THIRD, TWO_THIRDS

BRANCHES = ("1", "2")
HONEST_1, HONEST_2, BYZANTINE = "honest_1", "honest_2", "byzantine"
DEFAULT_COHORT_RESOLUTION = 1_000_000
DEFAULT_BOUNCING_VALIDATORS = 10_000


class ScenarioKind(str, enum.Enum):
    HONEST_PARTITION = "HonestPartition"
    BYZ_DUAL_ACTIVE = "ByzDualActive"
    BYZ_SEMI_ACTIVE_FINALIZE = "ByzSemiActiveFinalize"
    BYZ_SEMI_ACTIVE_DELAY = "ByzSemiActiveDelay"
    PROBABILISTIC_BOUNCING = "ProbabilisticBouncing"


class ConfigError(ValueError):
    """Invalid scenario configuration; ``errors`` holds (field path, reason)."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in errors))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_kind: ScenarioKind
    p0: float = 0.5
    beta0: float = 0.0
    gst_epoch: int | None = None
    horizon: int = 5000
    j: int = 8
    seed: int = 0
    cohort_resolution: int | None = None
    ejection_threshold: float | None = None
    slash_fraction: float = ffg.SLASH_FRACTION
    finalize_at: int | None = None
    proposer_sampling: bool = False
    snapshot_epochs: tuple[int, ...] = ()

    # -- derived settings -----------------------------------------------------

    @property
    def threshold(self) -> float:
        """Ejection threshold; defaults to the one implied by epoch 4685."""
        if self.ejection_threshold is not None:
            return self.ejection_threshold
        return DEFAULT_PARAMS.calibrated_threshold()

    @property
    def resolution(self) -> int:
        if self.cohort_resolution is not None:
            return self.cohort_resolution
        if self.scenario_kind is ScenarioKind.PROBABILISTIC_BOUNCING:
            return DEFAULT_BOUNCING_VALIDATORS
        return DEFAULT_COHORT_RESOLUTION

    # -- validation and (de)serialization ------------------------------------

    def problems(self) -> list[tuple[str, str]]:
        errs = []
        kind = self.scenario_kind
        if not 0 < self.p0 < 1:
            errs.append(("p0", "must lie in (0, 1)"))
        beta_max = ONE_THIRD if kind is ScenarioKind.PROBABILISTIC_BOUNCING else ONE_THIRD - 1e-15
        if not 0 <= self.beta0 <= beta_max:
            errs.append(("beta0", "must lie in [0, 1/3)"))
        if kind is ScenarioKind.HONEST_PARTITION and self.beta0 != 0:
            errs.append(("beta0", "HonestPartition requires beta0 = 0"))
        if kind is ScenarioKind.PROBABILISTIC_BOUNCING and 0 <= self.beta0 <= ONE_THIRD:
            lo, hi = p0_bounds(self.beta0)
            if not lo < self.p0 < hi:
                errs.append(("p0", f"bouncing needs {lo:.6g} < p0 < {hi:.6g} for beta0={self.beta0}"))
        if self.horizon < 1:
            errs.append(("horizon", "must be >= 1"))
        if self.j < 1:
            errs.append(("j", "must be >= 1"))
        if self.cohort_resolution is not None and self.cohort_resolution < 1:
            errs.append(("cohort_resolution", "must be >= 1"))
        if self.ejection_threshold is not None and not 0 < self.ejection_threshold < ffg.MAX_STAKE:
            errs.append(("ejection_threshold", "must lie in (0, 32)"))
        if not 0 <= self.slash_fraction <= 1:
            errs.append(("slash_fraction", "must lie in [0, 1]"))
        if self.gst_epoch is not None and self.gst_epoch < 0:
            errs.append(("gst_epoch", "must be >= 0"))
        if self.finalize_at is not None and kind is not ScenarioKind.BYZ_SEMI_ACTIVE_FINALIZE:
            errs.append(("finalize_at", "only meaningful for ByzSemiActiveFinalize"))
        if not 0 <= self.seed < 2**64:
            errs.append(("seed", "must be a 64-bit unsigned integer"))
        if any(e < 0 for e in self.snapshot_epochs):
            errs.append(("snapshot_epochs", "epochs must be >= 0"))
        return errs

    def validate(self) -> "ScenarioConfig":
        errs = self.problems()
        if errs:
            raise ConfigError(errs)
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["scenario_kind"] = self.scenario_kind.value
        d["snapshot_epochs"] = list(self.snapshot_epochs)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        """Build and validate a config; errors name the offending field."""
        if not isinstance(data, dict):
            raise ConfigError([("$", "scenario document must be a JSON object")])
        known = {f.name: f for f in dataclasses.fields(cls)}
        errs = [(k, "unknown field") for k in data if k not in known]
        if "scenario_kind" not in data:
            errs.append(("scenario_kind", "required"))
        kwargs: dict[str, Any] = {}
        for name, value in data.items():
            if name not in known:
                continue
            try:
                kwargs[name] = _coerce(name, value)
            except (TypeError, ValueError) as exc:
                errs.append((name, str(exc)))
        if errs:
            raise ConfigError(errs)
        return cls(**kwargs).validate()

    def with_overrides(self, **changes) -> "ScenarioConfig":
        data = self.to_dict()
        data.update(changes)
        return ScenarioConfig.from_dict(data)


_INT_FIELDS = {"horizon", "j", "seed", "cohort_resolution", "gst_epoch", "finalize_at"}
_FLOAT_FIELDS = {"p0", "beta0", "ejection_threshold", "slash_fraction"}


def _coerce(name: str, value: Any) -> Any:
    if name == "scenario_kind":
        try:
            return ScenarioKind(value)
        except ValueError:
            choices = ", ".join(k.value for k in ScenarioKind)
            raise ValueError(f"expected one of {choices}") from None
    if value is None and name in {"gst_epoch", "cohort_resolution", "ejection_threshold", "finalize_at"}:
        return None
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise TypeError("expected an integer")
        return int(value)
    if name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if name == "proposer_sampling":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if name == "snapshot_epochs":
        if not isinstance(value, (list, tuple)) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise TypeError("expected a list of integers")
        return tuple(value)
    return value


# -- results ------------------------------------------------------------------

@dataclass
class BranchMetrics:
    active_stake_ratio: float
    byz_stake_share: float
    justified: bool
    finalized: bool


@dataclass
class EpochMetrics:
    epoch: int
    leak_time: int | None
    branches: dict[str, BranchMetrics]
    safety_violated: bool
    byz_over_third: bool


@dataclass
class SafetyVerdict:
    violated: bool = False
    witness: tuple[Checkpoint, Checkpoint] | None = None
    epoch_of_violation: int | None = None
    leak_time_of_violation: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "violated": self.violated,
            "witness": None if self.witness is None else [dataclasses.asdict(c) for c in self.witness],
            "epoch_of_violation": self.epoch_of_violation,
            "leak_time_of_violation": self.leak_time_of_violation,
        }


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    metrics: list[EpochMetrics]
    verdict: SafetyVerdict
    events: list[Event]
    leak_start: int | None = None
    byz_over_third_epoch: int | None = None
    peak_byz_share: float = 0.0
    halted_at: int | None = None
    slashing_evidence: dict[str, dict[str, list[int]]] = field(default_factory=dict)
    # epoch -> branch -> stake per cohort (cohort mode) or per honest validator
    snapshots: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def byz_over_third(self) -> bool:
        return self.byz_over_third_epoch is not None

    @property
    def exit_code(self) -> int:
        """0 safe, 10 conflicting finalization, 11 Byzantine share > 1/3, 12 both."""
        if self.verdict.violated and self.byz_over_third:
            return 12
        if self.verdict.violated:
            return 10
        if self.byz_over_third:
            return 11
        return 0

    def leak_time(self, epoch: int | None) -> int | None:
        if epoch is None or self.leak_start is None:
            return None
        return epoch - self.leak_start

    def summary(self) -> dict[str, Any]:
        return {
            "scenario_kind": self.config.scenario_kind.value,
            "verdict": self.verdict.to_dict(),
            "byz_over_third": self.byz_over_third,
            "byz_over_third_epoch": self.byz_over_third_epoch,
            "byz_over_third_leak_time": self.leak_time(self.byz_over_third_epoch),
            "peak_byz_share": self.peak_byz_share,
            "leak_start": self.leak_start,
            "halted_at": self.halted_at,
            "slashing_evidence": self.slashing_evidence,
            "exit_code": self.exit_code,
        }


# -- safety -------------------------------------------------------------------

def check_safety(branches: list[BranchView] | dict[str, BranchView]) -> SafetyVerdict:
    """Conflicting finalization: two finalized chains, neither a prefix of the other."""
    views = list(branches.values()) if isinstance(branches, dict) else list(branches)
    if len(views) < 2:
        raise ValueError("need at least two branches")
    for i, a in enumerate(views):
        for b in views[i + 1:]:
            chain_a = [cp.block_id for cp in a.finalized_chain()]
            chain_b = [cp.block_id for cp in b.finalized_chain()]
            short, long_ = sorted((chain_a, chain_b), key=len)
            if long_[:len(short)] != short:
                witness = (a.finalized_chain()[-1], b.finalized_chain()[-1])
                return SafetyVerdict(True, witness)
    return SafetyVerdict(False)


# -- strategies ---------------------------------------------------------------

def strategy_honest_partitioned(cohort_id: str, epoch: int, healed: bool,
                                ejected: bool = False) -> set[str]:
    """Branches on which an honest cohort is active.

    Home branch while partitioned; after the heal everyone adopts branch 1.
    """
    if ejected:
        return set()
    if healed:
        return {"1"}
    return {"1"} if cohort_id == HONEST_1 else {"2"}


def strategy_byz_dual_active(epoch: int) -> set[str]:
    """Vote on both branches every epoch (slashable)."""
    return set(BRANCHES)


def strategy_byz_semi_active(epoch: int, finalize_at: int | None = None) -> set[str]:
    """Alternate branches: branch 1 on even epochs, branch 2 on odd ones.

    From ``finalize_at`` on, stay two epochs on branch 1 and then two on
    branch 2 so that both branches finalize, then resume alternating.
    """
    if finalize_at is not None and finalize_at <= epoch < finalize_at + 4:
        return {"1"} if epoch - finalize_at < 2 else {"2"}
    return {"1"} if epoch % 2 == 0 else {"2"}


# -- cohort-mode engine -------------------------------------------------------

def _cohorts(config: ScenarioConfig) -> dict[str, ValidatorCohort]:
    n = config.resolution
    n_byz = round(config.beta0 * n)
    n_honest = n - n_byz
    n_1 = round(config.p0 * n_honest)
    cohorts = {
        HONEST_1: ValidatorCohort(HONEST_1, n_1),
        HONEST_2: ValidatorCohort(HONEST_2, n_honest - n_1),
    }
    if n_byz:
        cohorts[BYZANTINE] = ValidatorCohort(BYZANTINE, n_byz, is_byzantine=True)
    return cohorts


def _would_justify(view: BranchView, active: set[str]) -> bool:
    return ffg.supermajority(view.stake_of(a for a in active if a in view.cohorts),
                             view.total_stake())


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    config.validate()
    if config.scenario_kind is ScenarioKind.PROBABILISTIC_BOUNCING:
        return run_bouncing(config)
    return _run_cohort_scenario(config)


def _run_cohort_scenario(config: ScenarioConfig) -> ScenarioResult:
    kind = config.scenario_kind
    base = _cohorts(config)
    views = {b: BranchView(b, copy.deepcopy(base)) for b in BRANCHES}
    archive = VoteArchive()
    scanned_backlog = False
    gst = config.gst_epoch
    finalize_at = config.finalize_at
    threshold = config.threshold

    result = ScenarioResult(config, [], SafetyVerdict(), [])
    wanted = set(config.snapshot_epochs)
    flagged: dict[str, set[str]] = {b: set() for b in BRANCHES}

    for epoch in range(1, config.horizon + 1):
        healed = gst is not None and epoch > gst

        # adaptive finalization: start once Byzantine votes would justify both branches
        if (kind is ScenarioKind.BYZ_SEMI_ACTIVE_FINALIZE and finalize_at is None
                and BYZANTINE in base and not healed):
            ready = all(
                _would_justify(views[b], {BYZANTINE} | {
                    c for c in (HONEST_1, HONEST_2)
                    if b in strategy_honest_partitioned(c, epoch, healed)})
                for b in BRANCHES)
            if ready:
                finalize_at = epoch

        active: dict[str, set[str]] = {b: set() for b in BRANCHES}
        for cid in (HONEST_1, HONEST_2):
            for b in strategy_honest_partitioned(cid, epoch, healed):
                active[b].add(cid)
        if BYZANTINE in base:
            if kind is ScenarioKind.BYZ_DUAL_ACTIVE:
                byz_on = strategy_byz_dual_active(epoch)
            elif kind is ScenarioKind.BYZ_SEMI_ACTIVE_FINALIZE:
                byz_on = strategy_byz_semi_active(epoch, finalize_at)
            else:
                byz_on = strategy_byz_semi_active(epoch, None)
            for b in byz_on:
                active[b].add(BYZANTINE)

        snapshot = {}
        this_epoch: list[tuple[str, ffg.CheckpointVote]] = []
        for b in BRANCHES:
            view = views[b]
            live_active = {c for c in active[b] if not view.cohorts[c].ejected}
            total = view.total_stake()
            ratio = view.stake_of(live_active) / total if total else 0.0
            finalized_before = view.finalized_epoch
            votes, events = view.step(epoch, live_active, threshold)
            archive.add(b, votes)
            this_epoch.extend((b, v) for v in votes)
            result.events.extend(events)
            # the Byzantine share is read at the end of the epoch, after
            # penalties and ejections
            total = view.total_stake()
            snapshot[b] = (ratio, view.byzantine_stake() / total if total else 0.0,
                           any(e.event == "justified" for e in events),
                           view.finalized_epoch > finalized_before)
            if view.leak_started_at is not None and result.leak_start is None:
                result.leak_start = view.leak_started_at

        # slashing: a branch-local archive never holds a double vote, since a
        # cohort votes at most once per epoch on one branch. Once the partition
        # heals every vote becomes visible; scan the backlog once, then only
        # the epoch's new votes.
        if healed:
            fresh = archive.records if not scanned_backlog else this_epoch
            scanned_backlog = True
            evidence = ffg.detect_slashing(v for _, v in fresh)
            for voter, epochs in evidence.items():
                for b in BRANCHES:
                    known = result.slashing_evidence.setdefault(b, {}).setdefault(voter, [])
                    known.extend(e for e in epochs if e not in known)
            new = set(evidence)
            for b in BRANCHES:
                fresh_offenders = new - flagged[b]
                if fresh_offenders:
                    result.events.extend(views[b].apply_slashing(fresh_offenders, epoch, config.slash_fraction))
                    flagged[b] |= fresh_offenders

        if epoch in wanted:
            result.snapshots[epoch] = {b: np.array([c.weight for c in views[b].cohorts.values()])
                                       for b in BRANCHES}

        verdict = check_safety(views)
        if verdict.violated and not result.verdict.violated:
            verdict.epoch_of_violation = epoch
            verdict.leak_time_of_violation = result.leak_time(epoch)
            result.verdict = verdict
            result.events.append(Event(epoch, None, "safety_violation", {
                "witness": [c.block_id for c in verdict.witness]}))
        byz_shares = [snapshot[b][1] for b in BRANCHES]
        over = any(s > ONE_THIRD for s in byz_shares)
        result.peak_byz_share = max(result.peak_byz_share, *byz_shares)
        if over and result.byz_over_third_epoch is None:
            result.byz_over_third_epoch = epoch
            result.events.append(Event(epoch, None, "byz_over_third", {
                "shares": {b: snapshot[b][1] for b in BRANCHES}}))
        result.metrics.append(EpochMetrics(
            epoch=epoch,
            leak_time=result.leak_time(epoch),
            branches={b: BranchMetrics(*snapshot[b]) for b in BRANCHES},
            safety_violated=result.verdict.violated,
            byz_over_third=result.byz_over_third,
        ))
    return result


# -- probabilistic bouncing ---------------------------------------------------

@dataclass
class BouncingBatch:
    """Per-epoch arrays of a batch of independent bouncing runs.

    Arrays indexed ``[epoch - 1, run, branch]`` unless noted.
    """

    seeds: np.ndarray
    byz_over_third_epoch: np.ndarray  # (runs,), -1 when never
    halted_at: np.ndarray             # (runs,), -1 when never
    active_ratio: np.ndarray
    byz_share: np.ndarray
    justified: np.ndarray
    finalized: np.ndarray
    leak: np.ndarray
    honest_ejected: np.ndarray        # validators ejected during the epoch
    byz_ejected: np.ndarray
    snapshots: dict[int, np.ndarray]  # epoch -> (runs, branch, honest validator)
    leak_start: int

    def over_third_by(self, epoch: int) -> np.ndarray:
        hit = self.byz_over_third_epoch
        return (hit >= 0) & (hit <= epoch)

    def chosen_branch(self, epoch: int) -> int:
        return 0 if epoch % 2 == 1 else 1


def _bouncing_counts(config: ScenarioConfig) -> tuple[int, int]:
    n_honest = config.resolution
    n_byz = round(config.beta0 / (1.0 - config.beta0) * n_honest)
    return n_honest, n_byz


def simulate_bouncing(config: ScenarioConfig, seeds) -> BouncingBatch:
    """Run the bouncing attack for every seed in ``seeds`` at once.

    The attacker targets branch 1 on odd epochs and branch 2 on even ones;
    each honest validator independently lands on the targeted branch with
    probability ``p0`` (draw ``epoch - 1`` of SplitMix64 stream ``i`` of the
    run seed for validator ``i``). Withheld Byzantine votes are released on
    the targeted branch only. With proposer sampling, stream ``n_honest``
    decides each epoch whether the attack continues; a halted run is frozen.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    runs = seeds.size
    n_h, n_b = _bouncing_counts(config)
    threshold = config.threshold
    p0 = config.p0
    keys = np.stack([rng.stream_keys(int(s), np.arange(n_h + 1)) for s in seeds])
    honest_keys, halt_keys = keys[:, :n_h], keys[:, n_h]
    cont = 1.0 - math.exp(config.j * math.log1p(-config.beta0))

    stake = np.full((runs, 2, n_h), ffg.MAX_STAKE)
    score = np.zeros((runs, 2, n_h), dtype=np.int64)
    gone = np.zeros((runs, 2, n_h), dtype=bool)
    b_stake = np.full((runs, 2), ffg.MAX_STAKE)
    b_score = np.zeros((runs, 2), dtype=np.int64)
    b_gone = np.zeros((runs, 2), dtype=bool)
    justified_prev = np.zeros((runs, 2), dtype=bool)
    last_final = np.zeros((runs, 2), dtype=np.int64)
    running = np.ones(runs, dtype=bool)
    over_at = np.full(runs, -1, dtype=np.int64)
    halted = np.full(runs, -1, dtype=np.int64)

    shape = (config.horizon, runs, 2)
    rec = {name: np.zeros(shape, dtype=dt) for name, dt in (
        ("active_ratio", float), ("byz_share", float), ("justified", bool),
        ("finalized", bool), ("leak", bool), ("honest_ejected", np.int64),
        ("byz_ejected", bool))}
    snaps: dict[int, np.ndarray] = {}
    wanted = set(config.snapshot_epochs)

    for epoch in range(1, config.horizon + 1):
        row = epoch - 1
        if config.proposer_sampling:
            stop = running & (rng.uniforms(halt_keys, row) >= cont)
            halted[stop] = epoch
            running &= ~stop
        live = running[:, None]
        chosen = 0 if epoch % 2 == 1 else 1
        on_chosen = rng.uniforms(honest_keys, row) < p0
        on_branch = np.stack([on_chosen, ~on_chosen] if chosen == 0 else [~on_chosen, on_chosen], axis=1)
        h_active = on_branch & ~gone
        b_active = np.zeros((runs, 2), dtype=bool)
        b_active[:, chosen] = True
        b_active &= ~b_gone

        byz_weight = np.where(b_gone, 0.0, n_b * b_stake)
        total = np.where(gone, 0.0, stake).sum(axis=2) + byz_weight
        active_w = np.where(h_active, stake, 0.0).sum(axis=2) + np.where(b_active, byz_weight, 0.0)
        rec["active_ratio"][row] = np.divide(active_w, total, out=np.zeros_like(total), where=total > 0)

        # the only vote source ever cited is the last justified checkpoint, so
        # a justified epoch following a justified epoch is an e -> e+1 link
        justified = ffg.supermajority(active_w, total) & live
        finalized = justified & justified_prev
        rec["justified"][row] = justified
        rec["finalized"][row] = finalized
        last_final = np.where(finalized, epoch, last_final)
        justified_prev = np.where(live, justified, justified_prev)
        leak = (epoch - last_final) > ffg.LEAK_AFTER
        rec["leak"][row] = leak

        leak3 = leak[:, :, None]
        live3 = running[:, None, None]
        stake = np.where(leak3 & live3, ffg.penalized(stake, score), stake)
        b_stake = np.where(leak & live, ffg.penalized(b_stake, b_score), b_stake)
        new_score = np.where(leak3, ffg.next_scores(score, h_active, True),
                             ffg.next_scores(score, h_active, False))
        new_b = np.where(leak, ffg.next_scores(b_score, b_active, True),
                         ffg.next_scores(b_score, b_active, False))
        score = np.where(live3, new_score, score)
        b_score = np.where(live, new_b, b_score)
        newly_gone = ~gone & (stake <= threshold)
        gone |= newly_gone
        rec["honest_ejected"][row] = newly_gone.sum(axis=2)
        b_new = ~b_gone & (b_stake <= threshold)
        b_gone |= b_new
        rec["byz_ejected"][row] = b_new

        # Byzantine share at the end of the epoch
        byz_weight = np.where(b_gone, 0.0, n_b * b_stake)
        total = np.where(gone, 0.0, stake).sum(axis=2) + byz_weight
        share = np.divide(byz_weight, total, out=np.zeros_like(total), where=total > 0)
        rec["byz_share"][row] = share
        newly_over = (over_at < 0) & (share > ONE_THIRD).any(axis=1)
        over_at[newly_over] = epoch
        if epoch in wanted:
            snaps[epoch] = np.where(gone, 0.0, stake)

    return BouncingBatch(seeds, over_at, halted, snapshots=snaps,
                         leak_start=ffg.LEAK_AFTER + 1, **rec)


def run_bouncing(config: ScenarioConfig) -> ScenarioResult:
    """Single bouncing run, reported like the cohort scenarios."""
    batch = simulate_bouncing(config, [config.seed])
    result = ScenarioResult(config, [], SafetyVerdict(), [], leak_start=batch.leak_start)
    halted = int(batch.halted_at[0])
    result.halted_at = halted if halted >= 0 else None
    over = int(batch.byz_over_third_epoch[0])
    result.byz_over_third_epoch = over if over >= 0 else None
    result.peak_byz_share = float(batch.byz_share[:, 0, :].max())
    result.snapshots = {e: {b: arr[0, i] for i, b in enumerate(BRANCHES)}
                        for e, arr in sorted(batch.snapshots.items())}
    leak_prev = [False, False]
    for epoch in range(1, config.horizon + 1):
        row = epoch - 1
        if result.halted_at == epoch:
            result.events.append(Event(epoch, None, "attack_halted", {}))
        branches = {}
        for i, b in enumerate(BRANCHES):
            just = bool(batch.justified[row, 0, i])
            fin = bool(batch.finalized[row, 0, i])
            leak = bool(batch.leak[row, 0, i])
            branches[b] = BranchMetrics(float(batch.active_ratio[row, 0, i]),
                                        float(batch.byz_share[row, 0, i]), just, fin)
            if just:
                result.events.append(Event(epoch, b, "justified", {"target": epoch}))
            if fin:
                result.events.append(Event(epoch, b, "finalized", {"checkpoint": epoch - 1}))
            if leak != leak_prev[i]:
                result.events.append(Event(epoch, b, "leak_start" if leak else "leak_end", {}))
                leak_prev[i] = leak
            n_out = int(batch.honest_ejected[row, 0, i])
            if n_out:
                result.events.append(Event(epoch, b, "ejected", {"cohort": "honest", "count": n_out}))
            if batch.byz_ejected[row, 0, i]:
                result.events.append(Event(epoch, b, "ejected", {"cohort": BYZANTINE}))
        if result.byz_over_third_epoch == epoch:
            result.events.append(Event(epoch, None, "byz_over_third", {
                "shares": {b: branches[b].byz_stake_share for b in BRANCHES}}))
        result.metrics.append(EpochMetrics(
            epoch, result.leak_time(epoch) if epoch >= batch.leak_start else None, branches,
            False, result.byz_over_third_epoch is not None and epoch >= result.byz_over_third_epoch))
    return result
