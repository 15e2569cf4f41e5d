"""Writers for scenario results.

Floats are written with 17 significant digits so a value survives a round
trip exactly; keys are sorted and line endings are ``\\n`` so identical runs
give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable

from .scenarios import BRANCHES, ScenarioResult

METRIC_COLUMNS = ("epoch", "branch", "active_ratio", "byz_share", "justified",
                  "finalized", "leak_active", "safety_violated", "byz_over_third")


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _plain(value: Any) -> Any:
    """JSON-ready copy with floats rounded through the 17-digit format."""
    if isinstance(value, float):
        return float(fmt_float(value)) if math.isfinite(value) else fmt_float(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):  # numpy scalar
        return _plain(value.item())
    return value


def dumps(value: Any) -> str:
    return json.dumps(_plain(value), sort_keys=True, separators=(",", ":"))


def write_json(path: Path, value: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(value), sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable[Any]]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(fmt_float(v) if isinstance(v, float) else v for v in row)
    return path


def _leak_flags(result: ScenarioResult) -> dict[tuple[int, str], bool]:
    """Leak state per (epoch, branch), rebuilt from leak_start/leak_end events."""
    changes: dict[str, list[tuple[int, bool]]] = {b: [] for b in BRANCHES}
    for ev in result.events:
        if ev.event in ("leak_start", "leak_end") and ev.branch in changes:
            changes[ev.branch].append((ev.epoch, ev.event == "leak_start"))
    flags = {}
    for b in BRANCHES:
        state, pending = False, iter(changes[b])
        nxt = next(pending, None)
        for m in result.metrics:
            while nxt is not None and nxt[0] <= m.epoch:
                state = nxt[1]
                nxt = next(pending, None)
            flags[(m.epoch, b)] = state
    return flags


def metric_rows(result: ScenarioResult, sample_every: int = 1):
    leak = _leak_flags(result)
    for m in result.metrics:
        if sample_every > 1 and m.epoch % sample_every and m.epoch != result.config.horizon:
            continue
        for b in BRANCHES:
            bm = m.branches[b]
            yield (m.epoch, b, bm.active_stake_ratio, bm.byz_stake_share, int(bm.justified),
                   int(bm.finalized), int(leak[(m.epoch, b)]), int(m.safety_violated),
                   int(m.byz_over_third))


def write_result(result: ScenarioResult, out_dir: Path, sample_every: int = 1) -> dict[str, Path]:
    """Write metrics.csv, events.jsonl, verdict.json and config.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": write_csv(out / "metrics.csv", METRIC_COLUMNS, metric_rows(result, sample_every)),
        "verdict": write_json(out / "verdict.json", result.summary()),
        "config": write_json(out / "config.json", result.config.to_dict()),
    }
    events = out / "events.jsonl"
    with events.open("w", newline="") as fh:
        for ev in result.events:
            fh.write(dumps({"epoch": ev.epoch, "branch": ev.branch, "event": ev.event,
                            "payload": ev.payload}) + "\n")
    paths["events"] = events
    return paths
