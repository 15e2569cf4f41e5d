"""``leaklab`` command line: reproduce, simulate and sweep."""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import export, rng
from .reproduce import ReproductionTarget, reproduce
from .scenarios import ConfigError, ScenarioConfig, run_scenario

EXIT_USAGE = 2
DEFAULT_MAX_CELLS = 1_000_000


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_assignment(text: str) -> tuple[str, Any]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), _parse_value(value.strip())


def parse_axis(text: str) -> tuple[str, list[Any]]:
    """``key=start:stop:step`` (stop inclusive) or ``key=v1,v2,...``."""
    key, sep, rng_text = text.partition("=")
    if not sep or not key or not rng_text:
        raise argparse.ArgumentTypeError(f"expected key=start:stop:step or key=v1,v2, got {text!r}")
    if ":" in rng_text:
        parts = rng_text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {rng_text!r}")
        nums = [_parse_value(p) for p in parts]
        if not all(isinstance(n, (int, float)) and not isinstance(n, bool) for n in nums):
            raise argparse.ArgumentTypeError(f"range bounds must be numbers, got {rng_text!r}")
        start, stop, step = nums
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"need step > 0 and stop >= start in {rng_text!r}")
        count = math.floor((stop - start) / step + 1e-9) + 1
        if count > DEFAULT_MAX_CELLS:
            raise argparse.ArgumentTypeError(f"axis {key} has {count} values")
        if all(isinstance(n, int) for n in nums):
            values = [start + i * step for i in range(count)]
        else:
            values = [round(start + i * step, 12) for i in range(count)]
    else:
        values = [_parse_value(v) for v in rng_text.split(",")]
    return key.strip(), values


def _load_config(path: Path, overrides: dict[str, Any]) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([("$", f"cannot read {path}: {exc.strerror}")]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([("$", f"invalid JSON: {exc}")]) from None
    if isinstance(data, dict):
        data.update(overrides)
    return ScenarioConfig.from_dict(data)


def _report_config_error(exc: ConfigError) -> int:
    for path, msg in exc.errors:
        print(f"error: {path}: {msg}", file=sys.stderr)
    return EXIT_USAGE


# -- subcommands --------------------------------------------------------------

def cmd_reproduce(args) -> int:
    targets = list(ReproductionTarget) if args.target == "all" else [ReproductionTarget(args.target)]
    failed = 0
    for target in targets:
        try:
            checks = reproduce(target, args.out)
        except OSError as exc:
            print(f"error: cannot write to {args.out}: {exc.strerror}", file=sys.stderr)
            return 1
        print(f"== {target.value}")
        for c in checks:
            print(c.line())
            failed += c.ok is False
    print(f"{failed} reference check(s) outside tolerance")
    return 0


def cmd_simulate(args) -> int:
    overrides = dict(args.set or [])
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        config = _load_config(args.file, overrides)
    except ConfigError as exc:
        return _report_config_error(exc)
    result = run_scenario(config)
    export.write_result(result, args.out, sample_every=args.sample_every)
    print(export.dumps(result.summary()))
    return result.exit_code


def _run_cell(payload: tuple[int, dict[str, Any], int]) -> tuple[int, dict, list[tuple]]:
    index, data, sample_every = payload
    result = run_scenario(ScenarioConfig.from_dict(data))
    return index, result.summary(), list(export.metric_rows(result, sample_every))


def _threads() -> int:
    raw = os.environ.get("LEAKLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_sweep(args) -> int:
    try:
        template = _load_config(args.template, {})
    except ConfigError as exc:
        return _report_config_error(exc)
    axes = args.axis
    keys = [k for k, _ in axes]
    if len(set(keys)) != len(keys):
        print("error: an axis is given twice", file=sys.stderr)
        return EXIT_USAGE
    n_cells = math.prod(len(v) for _, v in axes)
    if n_cells > args.max_cells:
        print(f"error: sweep has {n_cells} cells, more than the cap of {args.max_cells}", file=sys.stderr)
        return EXIT_USAGE
    root = template.seed if args.seed is None else args.seed

    cells = []
    errors = []
    for index, combo in enumerate(itertools.product(*(v for _, v in axes))):
        data = template.to_dict()
        data.update(zip(keys, combo))
        data["seed"] = rng.derive_seed(root, index)
        try:
            ScenarioConfig.from_dict(data)
        except ConfigError as exc:
            errors.extend((f"cell {index} ({', '.join(f'{k}={v}' for k, v in zip(keys, combo))}): {p}", m)
                          for p, m in exc.errors)
        cells.append((index, combo, data))
    if errors:
        for path, msg in errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payloads = [(i, d, args.sample_every) for i, _, d in cells]
    workers = min(_threads(), len(payloads))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, payloads))
    else:
        results = [_run_cell(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    export.write_csv(
        out / "sweep.csv", ("cell", *keys, "seed", *export.METRIC_COLUMNS),
        ((i, *combo, data["seed"], *row)
         for (i, combo, data), (_, _, rows) in zip(cells, results) for row in rows))
    export.write_csv(
        out / "cells.csv",
        ("cell", *keys, "seed", "exit_code", "violation_epoch", "violation_leak_time",
         "byz_over_third_epoch", "peak_byz_share"),
        ((i, *combo, data["seed"], s["exit_code"], s["verdict"]["epoch_of_violation"] or "",
          s["verdict"]["leak_time_of_violation"] if s["verdict"]["leak_time_of_violation"] is not None else "",
          s["byz_over_third_epoch"] or "", s["peak_byz_share"])
         for (i, combo, data), (_, s, _) in zip(cells, results)))
    export.write_json(out / "sweep.json", {"template": template.to_dict(), "root_seed": root,
                                           "axes": {k: v for k, v in axes}, "cells": n_cells,
                                           "sample_every": args.sample_every})
    print(f"{n_cells} cell(s) written to {out}")
    return 0


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leaklab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    rep = sub.add_parser("reproduce", help="write a table or figure dataset")
    rep.add_argument("target", choices=[t.value for t in ReproductionTarget] + ["all"])
    rep.add_argument("--out", type=Path, required=True)
    rep.set_defaults(func=cmd_reproduce)

    sim = sub.add_parser("simulate", help="run one scenario file")
    sim.add_argument("file", type=Path)
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--set", type=parse_assignment, action="append", metavar="KEY=VALUE")
    sim.add_argument("--sample-every", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="cartesian parameter sweep over a scenario template")
    sw.add_argument("--axis", type=parse_axis, action="append", required=True,
                    metavar="KEY=START:STOP:STEP|KEY=V1,V2")
    sw.add_argument("--template", type=Path, required=True)
    sw.add_argument("--out", type=Path, required=True)
    sw.add_argument("--seed", type=int, help="root seed (default: the template's seed)")
    sw.add_argument("--sample-every", type=int, default=1)
    sw.add_argument("--max-cells", type=int, default=DEFAULT_MAX_CELLS)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "sample_every", 1) < 1:
        print("error: --sample-every must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
