"""Dataset generators for every table and figure target.

Each target writes ``<name>.csv`` and ``<name>.json`` (the parameters used)
into the output directory and returns a list of :class:`Check` rows that
compare computed anchors with the embedded reference values.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import bounce_stats as bs
from . import leak_math as lm
from .export import write_csv, write_json
from .scenarios import ScenarioConfig, ScenarioKind, run_scenario

P0 = 0.5
TABLE_BETAS = (0.0, 0.1, 0.15, 0.2, 0.33)


class ReproductionTarget(str, enum.Enum):
    TABLE2 = "Table2"
    TABLE3 = "Table3"
    FIG_STAKE_TRAJECTORIES = "FigStakeTrajectories"
    FIG_HONEST_RATIO = "FigHonestRatio"
    FIG_FINALIZATION_TIMES = "FigFinalizationTimes"
    FIG_BETA_REGION = "FigBetaRegion"
    FIG_TRUNCATED_LAW = "FigTruncatedLaw"
    FIG_CROSSING_PROBABILITY = "FigCrossingProbability"


def load_reference() -> dict:
    text = resources.files("leaklab").joinpath("data/reference_values.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Check:
    """One computed-vs-reference comparison; ``ok`` is None for info rows."""

    name: str
    computed: float
    reference: float | None = None
    tolerance: str = ""
    ok: bool | None = None
    note: str = ""

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "INFO"}[self.ok]
        ref = "" if self.reference is None else f" reference={self.reference:.6g} ({self.tolerance})"
        note = f"  # {self.note}" if self.note else ""
        return f"[{status}] {self.name}: computed={self.computed:.10g}{ref}{note}"


def check_anchor(name: str, computed: float, anchor: dict, note: str = "") -> Check:
    ref = anchor["value"]
    if "rel_tol" in anchor:
        tol = anchor["rel_tol"]
        ok = abs(computed - ref) <= tol * abs(ref)
        return Check(name, computed, ref, f"rel {tol:g}", ok, note)
    tol = anchor["abs_tol"]
    return Check(name, computed, ref, f"abs {tol:g}", abs(computed - ref) <= tol, note)


def _table_checks(label: str, anchor: dict, times: dict[float, float]) -> list[Check]:
    rows = anchor["rows"]
    tol = anchor["abs_tol"]
    out = []
    for beta, t in times.items():
        ref = rows[f"{beta:g}"]
        out.append(Check(f"{label} beta0={beta:g}", t, ref, f"abs {tol:g} after rounding",
                         abs(round(t) - ref) <= tol))
    return out


def _sidecar(out: Path, name: str, params: dict) -> None:
    write_json(out / f"{name}.json", {"target": name, "reference_version": load_reference()["version"],
                                      **params})


# -- tables -------------------------------------------------------------------

def table2(out: Path) -> list[Check]:
    ref = load_reference()["anchors"]
    times = {b: lm.time_to_finalize_slashable(lm.PartitionSplit(P0, b)) for b in TABLE_BETAS}
    write_csv(out / "Table2.csv", ("beta0", "t", "t_rounded"),
              ((b, t, round(t)) for b, t in times.items()))
    _sidecar(out, "Table2", {"p0": P0, "beta0": list(TABLE_BETAS), "method": "closed form",
                             "cap": lm.DEFAULT_PARAMS.inactive_ejection_epoch})
    return _table_checks("Table2", ref["table2"], times)


def table3(out: Path) -> list[Check]:
    ref = load_reference()["anchors"]
    crossings = {b: lm.time_to_finalize_semi_active(lm.PartitionSplit(P0, b)) for b in TABLE_BETAS}
    write_csv(out / "Table3.csv", ("beta0", "t", "t_rounded", "capped"),
              ((b, c.t, round(c.t), int(c.capped)) for b, c in crossings.items()))
    _sidecar(out, "Table3", {"p0": P0, "beta0": list(TABLE_BETAS), "method": "bisection",
                             "tolerance": lm.BISECTION_TOL,
                             "cap": lm.DEFAULT_PARAMS.inactive_ejection_epoch})
    checks = _table_checks("Table3", ref["table3"], {b: c.t for b, c in crossings.items()})
    checks.append(check_anchor("Table3 root beta0=0.33", crossings[0.33].t, ref["semi_active_root_033"]))
    return checks


# -- figures ------------------------------------------------------------------

def fig_stake_trajectories(out: Path, t_max: int = 8000, step: int = 10) -> list[Check]:
    ref = load_reference()["anchors"]
    params = lm.DEFAULT_PARAMS
    kinds = (lm.BehaviorKind.ACTIVE, lm.BehaviorKind.SEMI_ACTIVE, lm.BehaviorKind.INACTIVE)
    ts = range(0, t_max + 1, step)
    write_csv(out / "FigStakeTrajectories.csv", ("t", "active", "semi_active", "inactive"),
              ((t, *(lm.stake_at(k, t, params) for k in kinds)) for t in ts))
    _sidecar(out, "FigStakeTrajectories", {"t_max": t_max, "step": step,
                                           "ejection_threshold": params.ejection_threshold})
    implied = params.calibrated_threshold()
    calibrated = lm.LeakParams(ejection_threshold=implied)
    return [
        check_anchor("inactive ejection epoch, threshold 16.75",
                     lm.ejection_epoch(lm.BehaviorKind.INACTIVE, params), ref["inactive_ejection_epoch"]),
        check_anchor("semi-active ejection epoch, threshold 16.75",
                     lm.ejection_epoch(lm.BehaviorKind.SEMI_ACTIVE, params), ref["semi_active_ejection_epoch"]),
        Check("threshold implied by the reference inactive ejection epoch", implied),
        Check("inactive ejection epoch, implied threshold",
              lm.ejection_epoch(lm.BehaviorKind.INACTIVE, calibrated)),
        Check("semi-active ejection epoch, implied threshold",
              lm.ejection_epoch(lm.BehaviorKind.SEMI_ACTIVE, calibrated)),
    ]


HONEST_P0S = (0.5, 0.55, 0.6, 0.65)


def fig_honest_ratio(out: Path, t_max: int = 5000, step: int = 10) -> list[Check]:
    ref = load_reference()["anchors"]
    ts = range(0, t_max + 1, step)
    write_csv(out / "FigHonestRatio.csv", ("t", *(f"p0={p:g}" for p in HONEST_P0S)),
              ((t, *(lm.active_ratio_honest(p, t) for p in HONEST_P0S)) for t in ts))
    config = ScenarioConfig(ScenarioKind.HONEST_PARTITION, p0=P0, horizon=4800)
    result = run_scenario(config)
    _sidecar(out, "FigHonestRatio", {"p0": list(HONEST_P0S), "t_max": t_max, "step": step,
                                     "scenario": config.to_dict()})
    violation = result.verdict.leak_time_of_violation
    return [
        Check("closed-form 2/3 crossing, p0=0.5 (capped at ejection)", lm.time_to_finalize_honest(P0)),
        check_anchor("simulated conflicting finalization, p0=0.5",
                     math.nan if violation is None else violation, ref["honest_partition_violation"]),
    ]


def fig_finalization_times(out: Path, step: float = 0.01) -> list[Check]:
    betas = np.round(np.arange(0.0, 0.33 + step / 2, step), 10)
    rows = []
    for b in betas:
        split = lm.PartitionSplit(P0, float(b))
        semi = lm.time_to_finalize_semi_active(split)
        rows.append((float(b), lm.time_to_finalize_slashable(split), semi.t, int(semi.capped)))
    write_csv(out / "FigFinalizationTimes.csv", ("beta0", "t_slashable", "t_semi_active", "semi_capped"), rows)
    _sidecar(out, "FigFinalizationTimes", {"p0": P0, "beta0_step": step})
    return [Check("slashable minus semi-active at beta0=0.33", rows[-1][1] - rows[-1][2])]


def fig_beta_region(out: Path, step: float = 0.01) -> list[Check]:
    ref = load_reference()["anchors"]
    p0s = np.round(np.arange(step, 1.0, step), 10)
    betas = np.round(np.arange(0.0, 1 / 3, step), 10)
    rows = []
    for p in p0s:
        for b in betas:
            beta_max = lm.byz_max_proportion(lm.PartitionSplit(float(p), float(b)))
            rows.append((float(p), float(b), beta_max, int(beta_max >= lm.ONE_THIRD)))
    write_csv(out / "FigBetaRegion.csv", ("p0", "beta0", "beta_max", "over_third"), rows)
    write_csv(out / "FigBetaRegionBoundary.csv", ("p0", "min_beta0"),
              ((float(p), lm.min_beta_for_threshold(float(p))) for p in p0s))
    _sidecar(out, "FigBetaRegion", {"step": step})
    b_min = lm.min_beta_for_threshold(P0)
    return [
        check_anchor("min beta0 for a 1/3 share, p0=0.5", b_min, ref["min_beta_for_threshold"]),
        Check("max share at the boundary, p0=0.5", lm.byz_max_proportion(lm.PartitionSplit(P0, b_min)),
              lm.ONE_THIRD, "abs 0.001",
              abs(lm.byz_max_proportion(lm.PartitionSplit(P0, b_min)) - lm.ONE_THIRD) <= 1e-3),
    ]


# Diffusion large enough to make the three parts of the law visible on a plot;
# with the physical value the continuous part is a spike.
EXAGGERATED_DIFFUSION = 4000.0
LAW_TIMES = (500, 2000, 4024)


def fig_truncated_law(out: Path, points: int = 400) -> list[Check]:
    rows, checks = [], []
    variants = {"physical": bs.BounceParams(P0),
                "exaggerated": bs.BounceParams(P0, diffusion=EXAGGERATED_DIFFUSION)}
    for label, params in variants.items():
        xs = np.linspace(0.0, params.cap, points + 1)
        for t in LAW_TIMES:
            law = bs.truncated_stake_law(t, params)
            dens = law.density(xs)
            cdf = bs.truncated_stake_cdf(xs, t, params)
            rows.extend((label, t, float(x), float(d), float(c), law.mass_at_zero, law.mass_at_b)
                        for x, d, c in zip(xs, dens, cdf))
            total = law.total_mass()
            checks.append(Check(f"{label} law total mass at t={t}", total, 1.0, "abs 1e-9",
                                abs(total - 1.0) <= 1e-9))
    write_csv(out / "FigTruncatedLaw.csv",
              ("variant", "t", "x", "density", "cdf", "mass_at_zero", "mass_at_b"), rows)
    _sidecar(out, "FigTruncatedLaw", {"p0": P0, "t": list(LAW_TIMES), "points": points,
                                      "diffusion": {k: v.D for k, v in variants.items()}})
    return checks


CROSSING_BETAS = (0.25, 0.3, 0.33, 1 / 3)


def fig_crossing_probability(out: Path, t_max: int = 7000, step: int = 50) -> list[Check]:
    ref = load_reference()["anchors"]
    ts = range(step, t_max + 1, step)
    rows = []
    for b in CROSSING_BETAS:
        params = bs.BounceParams(P0, b)
        for t in ts:
            rows.append((b, t, bs.prob_byz_over_third(b, t, params),
                         bs.prob_byz_over_third_doubled(b, t, params)))
    write_csv(out / "FigCrossingProbability.csv", ("beta0", "t", "prob", "prob_doubled"), rows)
    _sidecar(out, "FigCrossingProbability", {"p0": P0, "beta0": list(CROSSING_BETAS),
                                             "t_max": t_max, "step": step})
    cont = bs.continuation_probability(lm.ONE_THIRD, 8, 7000)
    params = bs.BounceParams(P0, lm.ONE_THIRD)
    window = [bs.prob_byz_over_third(lm.ONE_THIRD, t, params) for t in range(200, 3001, 100)]
    worst = max(window, key=lambda p: abs(p - 0.5))
    return [
        check_anchor("continuation probability, beta0=1/3, j=8, 7000 epochs", cont.value,
                     ref["continuation_probability"]),
        check_anchor("worst prob_byz_over_third(1/3, t) over t in [200, 3000]", worst,
                     ref["prob_byz_over_third_one_third"]),
    ]


GENERATORS: dict[ReproductionTarget, Callable[[Path], list[Check]]] = {
    ReproductionTarget.TABLE2: table2,
    ReproductionTarget.TABLE3: table3,
    ReproductionTarget.FIG_STAKE_TRAJECTORIES: fig_stake_trajectories,
    ReproductionTarget.FIG_HONEST_RATIO: fig_honest_ratio,
    ReproductionTarget.FIG_FINALIZATION_TIMES: fig_finalization_times,
    ReproductionTarget.FIG_BETA_REGION: fig_beta_region,
    ReproductionTarget.FIG_TRUNCATED_LAW: fig_truncated_law,
    ReproductionTarget.FIG_CROSSING_PROBABILITY: fig_crossing_probability,
}


def reproduce(target: ReproductionTarget | str, out_dir: Path) -> list[Check]:
    target = ReproductionTarget(target)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return GENERATORS[target](out)
