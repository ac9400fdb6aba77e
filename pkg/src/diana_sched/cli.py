"""``diana-sched``: validate scenarios, run them, and compare schedulers.

Exit status: 0 on success, 2 on bad usage, 3 when the scenario is invalid,
4 when a simulation fails and 5 on file-system errors.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import DianaError, ScenarioError, ScenarioParseError
from .metrics import Table, compute_metrics, series
from .scenario import read_scenario_dict, scenario_from_dict, tomllib
from .simulation import Scenario, run, scenario_digest

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_SIMULATION = 4
EXIT_IO = 5

FORMATS = ("csv", "json")
OUT_ENV = "DIANA_SCHED_OUT"
FIG4 = "local_vs_migrated_over_time"
FIG5 = "exec_time_vs_job_count"

log = logging.getLogger("diana_sched")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class Sweep:
    path: str
    values: list

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        if "=" not in text:
            raise CliError(f"--sweep {text!r}: expected PATH=V1,V2,...", EXIT_USAGE)
        path, _, rhs = text.partition("=")
        path = path.strip()
        values = [_scalar(v.strip()) for v in rhs.split(",") if v.strip()]
        if not path or not values:
            raise CliError(f"--sweep {text!r}: expected PATH=V1,V2,...", EXIT_USAGE)
        return cls(path, values)


@dataclass
class RunConfig:
    scenario: Path
    out: Path
    formats: tuple = FORMATS
    seed: Optional[int] = None
    sweeps: list = field(default_factory=list)
    overwrite: bool = False
    verbosity: int = 1  # 0 quiet, 1 normal, 2 verbose


def _scalar(text: str):
    """Interpret a sweep value the way TOML would, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


_STEP = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)")


def set_path(raw: dict, path: str, value) -> None:
    """Assign ``value`` at a dotted path such as ``sites[0].processors``."""
    keys = []
    for part in path.split("."):
        m = _STEP.fullmatch(part)
        if not m:
            raise CliError(f"bad parameter path {path!r}", EXIT_USAGE)
        keys.append(m.group(1))
        keys += [int(i) for i in re.findall(r"\d+", m.group(2))]
    node = raw
    for key in keys[:-1]:
        try:
            if isinstance(key, str) and isinstance(node, dict) and key not in node:
                node[key] = {}
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise CliError(f"parameter path {path!r} does not exist in the scenario",
                           EXIT_USAGE) from None
    try:
        node[keys[-1]] = value
    except (IndexError, TypeError):
        raise CliError(f"parameter path {path!r} does not exist in the scenario",
                       EXIT_USAGE) from None


# -- loading ------------------------------------------------------------

def _load_raw(path: Path) -> dict:
    if not path.is_file():
        raise CliError(f"{path}: no such file", EXIT_IO)
    try:
        return read_scenario_dict(path)
    except ScenarioParseError as exc:
        code = EXIT_IO if "cannot read" in str(exc) else EXIT_INVALID
        raise CliError(str(exc), code) from exc


def _build(raw: dict, where: str = "") -> Scenario:
    try:
        return scenario_from_dict(raw)
    except ScenarioError as exc:
        lines = [f"{where}{d}" for d in exc.diagnostics]
        raise CliError("\n".join(lines), EXIT_INVALID) from exc


def _simulate(scenario: Scenario, label: str = ""):
    try:
        return run(scenario)
    except DianaError as exc:
        name = f" for variant {label}" if label else ""
        raise CliError(f"simulation failed{name}: {type(exc).__name__}: {exc}",
                       EXIT_SIMULATION) from exc


# -- output -------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def summary_table(summary) -> Table:
    d = summary.as_dict()
    util = d.pop("cpu_utilization")
    cols = list(d) + [f"cpu_utilization.{sid}" for sid in sorted(util)]
    return Table(cols, [tuple(d.values()) + tuple(util[s] for s in sorted(util))])


def _bucket(scenario: Scenario) -> float:
    if scenario.series_bucket is not None:
        return scenario.series_bucket
    return scenario.policy.time_threshold


class _Writer:
    """Collects output files, then writes them all or none."""

    def __init__(self, out: Path, overwrite: bool):
        self.out = out
        self.overwrite = overwrite
        self.files: dict[Path, str] = {}

    def add(self, name: str, text: str):
        self.files[self.out / name] = text

    def commit(self) -> list:
        if not self.overwrite:
            for path in self.files:
                if path.exists():
                    raise CliError(f"{path}: already exists (use --overwrite)", EXIT_IO)
        try:
            for path, text in self.files.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", newline="\n") as fh:
                    fh.write(text)
        except OSError as exc:
            raise CliError(f"{exc.filename or self.out}: {exc.strerror}", EXIT_IO) from exc
        return sorted(self.files)


def run_outputs(writer: _Writer, scenario: Scenario, event_log, formats, prefix=""):
    """Queue the event log, summary and series files of one run."""
    digest = scenario_digest(scenario)
    summary = compute_metrics(event_log)
    bucket = _bucket(scenario)
    tables = {FIG4: series(event_log, FIG4, bucket),
              FIG5: series(event_log, FIG5, max(1, len(event_log.of_kind("arrival")) // 10))}
    if "csv" in formats:
        writer.add(prefix + "events.csv", event_log.to_csv())
        writer.add(prefix + "summary.csv", summary_table(summary).to_csv())
        for kind, table in tables.items():
            writer.add(f"{prefix}{kind}.csv", table.to_csv())
    if "json" in formats:
        writer.add(prefix + "events.json",
                   _dumps({"scenario_digest": digest, **event_log.to_json_obj()}))
        writer.add(prefix + "run.json", _dumps({
            "scenario_digest": digest,
            "summary": summary.as_dict(),
            "series": {kind: table.as_dict() for kind, table in tables.items()},
        }))
    return summary


def _print_summary(summary, title=""):
    if title:
        print(title)
    for key, value in summary.as_dict().items():
        if isinstance(value, dict):
            value = ", ".join(f"{k}={v:.3f}" for k, v in sorted(value.items()))
        elif isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {key:<18} {value}")


# -- commands -----------------------------------------------------------

def cmd_validate(path) -> list:
    """Diagnostics for the scenario at ``path`` (empty when valid)."""
    raw = _load_raw(Path(path))
    try:
        scenario_from_dict(raw)
    except ScenarioError as exc:
        return list(exc.diagnostics)
    return []


def cmd_run(cfg: RunConfig) -> list:
    raw = _load_raw(cfg.scenario)
    if cfg.seed is not None:
        raw["seed"] = cfg.seed
    scenario = _build(raw)
    log.info("running %s (%s, seed %d)", cfg.scenario, scenario.scheduler_kind, scenario.seed)
    event_log = _simulate(scenario)
    writer = _Writer(cfg.out, cfg.overwrite)
    summary = run_outputs(writer, scenario, event_log, cfg.formats)
    written = writer.commit()
    if cfg.verbosity > 0:
        _print_summary(summary, f"{scenario.scheduler_kind} seed={scenario.seed}")
    for path in written:
        log.info("wrote %s", path)
    return written


def _slug(assign: dict) -> str:
    text = "_".join(f"{k}-{v}" for k, v in assign.items())
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text)


def _column_label(scenario: Scenario, assign: dict) -> str:
    # Workload size and seed vary along the rows / get averaged; anything
    # else swept becomes part of the column name.
    parts = [scenario.scheduler_kind]
    parts += [f"{k}={v}" for k, v in assign.items()
              if k not in ("scheduler_kind", "seed") and not k.startswith("workload.")]
    return " ".join(parts)


def cmd_compare(cfg: RunConfig) -> list:
    if not cfg.sweeps:
        raise CliError("compare needs at least one --sweep PATH=V1,V2,...", EXIT_USAGE)
    base = _load_raw(cfg.scenario)
    if cfg.seed is not None:
        base["seed"] = cfg.seed
    variants = []
    for combo in itertools.product(*(s.values for s in cfg.sweeps)):
        assign = {s.path: v for s, v in zip(cfg.sweeps, combo)}
        raw = copy.deepcopy(base)
        for path, value in assign.items():
            set_path(raw, path, value)
        name = ", ".join(f"{k}={v}" for k, v in assign.items())
        variants.append((assign, name, _build(raw, f"[{name}] ")))

    writer = _Writer(cfg.out, cfg.overwrite)
    logs, labels, rows = [], [], []
    single = len(variants) == 1
    for assign, name, scenario in variants:
        log.info("variant %s", name)
        event_log = _simulate(scenario, name)
        prefix = "" if single else f"runs/{_slug(assign)}/"
        summary = run_outputs(writer, scenario, event_log, cfg.formats, prefix)
        logs.append(event_log)
        labels.append(_column_label(scenario, assign))
        rows.append((name, len(event_log.of_kind("arrival")), summary.mean_turnaround,
                     summary.makespan, summary.mean_waiting, summary.jobs_migrated))
    runs = Table(["variant", "jobs", "mean_turnaround", "makespan", "mean_waiting",
                  "jobs_migrated"], rows)
    fig5 = {m: series(logs, FIG5, labels=labels, measure=m)
            for m in ("mean_turnaround", "makespan")}
    if "csv" in cfg.formats:
        writer.add("compare.csv", runs.to_csv())
        for measure, table in fig5.items():
            writer.add(f"fig5_{measure}.csv", table.to_csv())
    if "json" in cfg.formats:
        writer.add("compare.json", _dumps({
            "scenario_digest": scenario_digest(_build(base)),
            "summary": runs.as_dict(),
            "series": {f"fig5_{m}": t.as_dict() for m, t in fig5.items()},
        }))
    written = writer.commit()
    if cfg.verbosity > 0:
        print(fig5["mean_turnaround"].to_csv(), end="")
    return written


# -- entry point --------------------------------------------------------

def _formats(values) -> tuple:
    chosen = []
    for v in values or ["csv,json"]:
        for f in v.split(","):
            f = f.strip()
            if f not in FORMATS:
                raise CliError(f"--format {f!r}: choose from {', '.join(FORMATS)}", EXIT_USAGE)
            if f not in chosen:
                chosen.append(f)
    return tuple(chosen)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diana-sched",
                                description="Cost-based grid meta-scheduling simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, outputs=True):
        sp.add_argument("--scenario", required=True, type=Path, help="scenario TOML file")
        loud = sp.add_mutually_exclusive_group()
        loud.add_argument("-q", "--quiet", action="store_true")
        loud.add_argument("-v", "--verbose", action="store_true")
        if outputs:
            sp.add_argument("--out", type=Path, default=None,
                            help=f"output directory (default: ${OUT_ENV} or ./out)")
            sp.add_argument("--format", action="append", metavar="FMT",
                            help="csv, json or both (comma separated or repeated)")
            sp.add_argument("--seed", type=int, help="override the scenario seed")
            sp.add_argument("--overwrite", action="store_true",
                            help="replace existing output files")

    common(sub.add_parser("validate", help="check a scenario file"), outputs=False)
    common(sub.add_parser("run", help="simulate one scenario"))
    cmp = sub.add_parser("compare", help="run scenario variants and tabulate them")
    common(cmp)
    cmp.add_argument("--sweep", action="append", default=[], metavar="PATH=V1,V2",
                     help="parameter to vary; repeat for a cartesian product")
    return p


def _config(args) -> RunConfig:
    out = args.out or Path(os.environ.get(OUT_ENV) or "out")
    return RunConfig(
        scenario=args.scenario,
        out=out,
        formats=_formats(args.format),
        seed=args.seed,
        sweeps=[Sweep.parse(s) for s in getattr(args, "sweep", [])],
        overwrite=args.overwrite,
        verbosity=0 if args.quiet else 2 if args.verbose else 1,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "validate":
            diags = cmd_validate(args.scenario)
            if diags:
                for d in diags:
                    print(d)
                return EXIT_INVALID
            if not args.quiet:
                print("OK")
            return EXIT_OK
        cfg = _config(args)
        if args.command == "run":
            cmd_run(cfg)
        else:
            cmd_compare(cfg)
        return EXIT_OK
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
