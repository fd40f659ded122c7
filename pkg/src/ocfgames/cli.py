"""Command line entry point: ``ocf example|hetnet|sensing|certify``.

Scenario commands read a YAML config::

    scenario:            # fields of HetNetConfig / SensingConfig (seed excluded)
      n_sbs: 20
    solver:
      max_iterations: 100000
      improvement: first   # or best
    seeds: [0, 1, 2]
    sweep:               # optional; one run per value, crossed with the seeds
      n_sbs: [10, 20, 30]

and write CSV rows ``scenario,seed,strategy,metric,welfare,iterations,wall_ms``.
Exit codes: 0 success, 1 outcome not stable (certify), 2 bad input,
3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import logging
import os
import sys
import tempfile
from pathlib import Path

import yaml

from .baselines import solve_nonoverlapping
from .core import Deviation, InvariantViolation, apply_deviation, is_profitable
from .cover import EnumerationCapExceeded
from .fixtures import company_cf_outcome, company_ocf_outcome, software_company_game
from .scenarios.hetnet import HetNetConfig, run_hetnet
from .scenarios.sensing import SensingConfig, run_sensing
from .serialization import InstanceError, dump_instance, load_instance
from .solver import Improvement, SolverConfig, certify_o_stable, solve

log = logging.getLogger("ocfgames")

CSV_HEADER = ("scenario", "seed", "strategy", "metric", "welfare", "iterations", "wall_ms")

EXIT_OK = 0
EXIT_UNSTABLE = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------


def parse_seeds(text: str) -> list[int]:
    """``"0-4"``, ``"1,3,5"`` or a mix like ``"0-2,7"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(x) for x in part.split("-", 1))
            if hi < lo:
                raise ConfigError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"bad seed list {text!r}")
    return seeds


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - {"scenario", "solver", "seeds", "sweep"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _solver_config(doc: dict, args) -> SolverConfig:
    raw = doc.get("solver") or {}
    if not isinstance(raw, dict):
        raise ConfigError("solver must be a mapping")
    raw = dict(raw)
    if getattr(args, "improvement", None):
        raw["improvement"] = args.improvement
    allowed = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    try:
        return SolverConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver config: {exc}") from exc


def _scenario_runs(cls, doc: dict):
    """(label, base kwargs) for every sweep point."""
    base = doc.get("scenario") or {}
    sweep = doc.get("sweep") or {}
    if not isinstance(base, dict) or not isinstance(sweep, dict):
        raise ConfigError("scenario and sweep must be mappings")
    base = dict(base)
    allowed = {f.name for f in dataclasses.fields(cls)} - {"seed"}
    unknown = (set(base) | set(sweep)) - allowed
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    if not sweep:
        return [("", base)]
    keys = sorted(sweep)
    values = []
    for k in keys:
        v = sweep[k]
        if not isinstance(v, list) or not v:
            raise ConfigError(f"sweep values for {k!r} must be a non-empty list")
        values.append(v)
    runs = []
    for combo in itertools.product(*values):
        label = "[" + ",".join(f"{k}={v}" for k, v in zip(keys, combo)) + "]"
        runs.append((label, {**base, **dict(zip(keys, combo))}))
    return runs


def _seeds(doc: dict, args) -> list[int]:
    if args.seeds:
        return parse_seeds(args.seeds)
    seeds = doc.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of integers")
    return seeds


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv_atomic(path: str | None, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    data = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(data)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _print_outcome(title: str, outcome, n: int, out) -> None:
    names = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    print(title, file=out)
    for c, v in zip(outcome.structure, outcome.values()):
        who = "".join(names[i] if i < len(names) else f"<{i}>" for i in c.members)
        print(f"  {who:<4} r={list(c.resources)} value={v:g}", file=out)
    pay = ", ".join(f"{p:g}" for p in outcome.payoffs(n))
    print(f"  payoffs=({pay}) welfare={outcome.welfare():g}", file=out)


def cmd_example(args, out=None) -> int:
    out = out or sys.stdout
    spec = software_company_game(division=args.division or "proportional", arbitration=args.arbitration or "optimistic")
    cfg = _solver_config({}, args)
    cf = company_cf_outcome(spec)
    ocf = company_ocf_outcome(spec)
    _print_outcome("non-overlapping outcome {{A,B}: big project, {C}: small project}", cf, 3, out)
    _print_outcome("overlapping outcome {(8,4,0), (0,4,8)}", ocf, 3, out)

    grand = Deviation((0, 1, 2), {}, ocf.structure)
    check = is_profitable(spec, cf, grand)
    moved = apply_deviation(spec, cf, grand)
    print(f"grand deviation from the non-overlapping outcome: {check.lhs:g} < {check.rhs:g} is {check.profitable}", file=out)

    baseline = solve_nonoverlapping(spec)
    _print_outcome(f"greedy non-overlapping baseline, partition {list(baseline.partition)}", baseline.outcome, 3, out)
    final, report = solve(spec, None, cfg)
    _print_outcome(
        f"solver from the all-idle start ({report.iterations} deviations, {report.terminated.value})", final, 3, out
    )
    print("welfare trace: " + " ".join(f"{w:g}" for w in report.welfare_trace), file=out)
    if report.welfare_drops:
        print(f"welfare did not increase on {report.welfare_drops} accepted deviations", file=out)
    print(f"welfare {cf.welfare():g} -> {final.welfare():g}", file=out)

    def close(a, b):
        return all(abs(x - y) <= 1e-9 * max(1.0, abs(y)) for x, y in zip(a, b))

    ok = close([cf.welfare(), ocf.welfare(), moved.welfare()], [3400.0, 4800.0, 4800.0])
    ok &= close([baseline.welfare()], [3400.0])
    if spec.division.value == "proportional":
        ok &= close(cf.payoffs(3), (1200.0, 1200.0, 1000.0))
        ok &= close(ocf.payoffs(3), (1600.0, 1600.0, 1600.0))
        ok &= close(moved.payoffs(3), (1600.0, 1600.0, 1600.0))
        ok &= close(baseline.payoffs(3), (1200.0, 1200.0, 1000.0))
    if spec.arbitration.value == "optimistic":
        ok &= close([final.welfare()], [4800.0])
        if spec.division.value == "proportional":
            ok &= close(final.payoffs(3), (1600.0, 1600.0, 1600.0))
    if args.dump:
        d = Path(args.dump)
        d.mkdir(parents=True, exist_ok=True)
        (d / "fig1a.json").write_text(dump_instance(spec, cf))
        (d / "fig1b.json").write_text(dump_instance(spec, ocf))
    print("check: " + ("ok" if ok else "MISMATCH"), file=out)
    return EXIT_OK if ok else EXIT_UNSTABLE


def _run_scenario(name: str, cls, runner, args) -> int:
    doc = load_config(args.config)
    cfg = _solver_config(doc, args)
    seeds = _seeds(doc, args)
    rows = []
    for label, kwargs in _scenario_runs(cls, doc):
        for seed in seeds:
            try:
                scenario_cfg = cls(**kwargs, seed=seed)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad {name} config: {exc}") from exc
            options = {k: v for k, v in (("division", args.division), ("arbitration", args.arbitration)) if v}
            metrics = runner(scenario_cfg, cfg, **options)
            for r in metrics.results:
                wall = r.wall_ms if args.timing else 0.0
                rows.append(
                    (name + label, seed, r.strategy, _fmt(r.metric), _fmt(r.welfare), r.iterations, f"{wall:.3f}")
                )
            if metrics.report is not None and metrics.report.rejected:
                log.info("%s seed %d: %d candidates lowered realized welfare", name + label, seed, metrics.report.rejected)
    write_csv_atomic(args.out, rows)
    return EXIT_OK


def cmd_hetnet(args) -> int:
    return _run_scenario("hetnet", HetNetConfig, run_hetnet, args)


def cmd_sensing(args) -> int:
    return _run_scenario("sensing", SensingConfig, run_sensing, args)


def _describe(dev: Deviation, n: int) -> str:
    parts = [f"deviators={list(dev.deviators)}"]
    for k, d in sorted(dev.withdrawals.items()):
        parts.append(f"withdraw {list(d)} from coalition #{k}")
    rep = ", ".join(str(list(c.resources)) + (f"@task{c.task}" if c.task is not None else "") for c in dev.replacement)
    parts.append(f"replacement=[{rep}]")
    return "; ".join(parts)


def cmd_certify(args, out=None) -> int:
    out = out or sys.stdout
    if not args.instance:
        raise ConfigError("certify needs an instance file")
    p = Path(args.instance)
    if not p.is_file():
        raise ConfigError(f"instance file not found: {args.instance}")
    try:
        spec, outcome = load_instance(p.read_text())
    except InstanceError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        cert = certify_o_stable(spec, outcome)
    except EnumerationCapExceeded as exc:
        raise ConfigError(f"instance too large to certify: {exc}") from exc
    if cert.stable:
        print(f"o-stable: no profitable deviation among {cert.checked} checked", file=out)
        return EXIT_OK
    print(f"not o-stable: {_describe(cert.witness, spec.n_players)} (gain {cert.gain:g})", file=out)
    return EXIT_UNSTABLE


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--seeds", help="seed list, e.g. 0-19 or 1,2,3 (overrides the config)")
    common.add_argument("--division", choices=["proportional", "equal"])
    common.add_argument("--arbitration", choices=["conservative", "refined", "optimistic"])
    common.add_argument("--improvement", choices=[i.value for i in Improvement])
    common.add_argument("--timing", action="store_true", help="record wall-clock times (makes output non-reproducible)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ocf", description="Overlapping coalition formation solver")
    sub = parser.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("example", parents=[common], help="three-developer software company")
    ex.add_argument("--dump", help="directory to write the two example outcomes as instance files")
    sub.add_parser("hetnet", parents=[common], help="small-cell interference coordination sweep")
    sub.add_parser("sensing", parents=[common], help="cooperative spectrum sensing sweep")
    cert = sub.add_parser("certify", parents=[common], help="exhaustive stability check of an instance file")
    cert.add_argument("instance", nargs="?", help="instance JSON (or pass --config)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "example":
            return cmd_example(args)
        if args.command == "hetnet":
            return cmd_hetnet(args)
        if args.command == "sensing":
            return cmd_sensing(args)
        if args.command == "certify":
            if args.instance is None:
                args.instance = args.config
            return cmd_certify(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
