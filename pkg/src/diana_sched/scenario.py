"""Scenario files: TOML in, validated :class:`Scenario` out.

Validation never stops at the first problem; every violation is reported
with the dotted path of the offending field, e.g. ``topology[2].bandwidth``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .costs import CostWeights, NetworkLink, SiteState
from .errors import ScenarioError, ScenarioParseError
from .queues import PriorityPolicy
from .simulation import SCHEDULER_KINDS, Scenario
from .workload import DIST_KINDS, DataPlacement, Dist, WorkloadSpec


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


_TOP = {"sites", "topology", "weights", "policy", "workload", "scheduler_kind", "duration",
        "seed", "aging_tick", "estimate_window", "overload_factor", "export_enabled",
        "min_loss", "drain", "series_bucket"}
_WORKLOAD_DISTS = ("burst_size", "inter_arrival", "compute_demand", "processors_required",
                   "input_bytes", "output_bytes", "executable_bytes")
_INT_DISTS = ("burst_size", "processors_required")


class _Checker:
    def __init__(self):
        self.diags: list[Diagnostic] = []

    def bad(self, path, message):
        self.diags.append(Diagnostic(path, message))

    def table(self, obj, key, path, required=False):
        if key not in obj:
            if required:
                self.bad(path, "missing required table")
            return {}
        v = obj[key]
        if not isinstance(v, dict):
            self.bad(path, "expected a table")
            return {}
        return v

    def unknown(self, obj, allowed, path):
        for k in obj:
            if k not in allowed:
                self.bad(f"{path}.{k}" if path else k, "unknown field")

    def number(self, obj, key, path, default=None, *, integer=False, gt=None, ge=None, le=None):
        if key not in obj:
            if default is None:
                self.bad(path, "missing required field")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.bad(path, f"expected a number, got {v!r}")
            return default
        if integer and not isinstance(v, int):
            self.bad(path, f"expected an integer, got {v!r}")
            return default
        if not math.isfinite(v):
            self.bad(path, f"must be finite, got {v!r}")
            return default
        if gt is not None and not v > gt:
            self.bad(path, f"must be > {gt}, got {v!r}")
        elif ge is not None and not v >= ge:
            self.bad(path, f"must be >= {ge}, got {v!r}")
        elif le is not None and not v <= le:
            self.bad(path, f"must be <= {le}, got {v!r}")
        return v

    def flag(self, obj, key, path, default):
        v = obj.get(key, default)
        if not isinstance(v, bool):
            self.bad(path, f"expected true/false, got {v!r}")
            return default
        return v

    def string(self, obj, key, path, choices=None, default=None):
        if key not in obj:
            if default is None:
                self.bad(path, "missing required field")
            return default
        v = obj[key]
        if not isinstance(v, str):
            self.bad(path, f"expected a string, got {v!r}")
            return default
        if choices is not None and v not in choices:
            self.bad(path, f"must be one of {list(choices)}, got {v!r}")
            return default
        return v


def _dist(c: _Checker, obj, key, path, default: Dist, integer=False) -> Dist:
    if key not in obj:
        return default
    d = obj[key]
    if isinstance(d, (int, float)) and not isinstance(d, bool):
        d = {"kind": "constant", "value": d}
    if not isinstance(d, dict):
        c.bad(path, "expected a distribution table or a number")
        return default
    kind = c.string(d, "kind", f"{path}.kind", DIST_KINDS, default="constant")
    if kind == "constant":
        c.unknown(d, {"kind", "value"}, path)
        v = c.number(d, "value", f"{path}.value", 1, gt=0 if integer else None, ge=None if integer else 0)
        return Dist.constant(v)
    if kind == "uniform":
        c.unknown(d, {"kind", "lo", "hi"}, path)
        lo = c.number(d, "lo", f"{path}.lo", 0, ge=0 if not integer else 1, integer=integer)
        hi = c.number(d, "hi", f"{path}.hi", 0, ge=0, integer=integer)
        if lo is not None and hi is not None and hi < lo:
            c.bad(f"{path}.hi", f"must be >= lo ({lo}), got {hi}")
        return Dist.uniform(lo, hi)
    c.unknown(d, {"kind", "mean"}, path)
    return Dist.exponential(c.number(d, "mean", f"{path}.mean", 1.0, gt=0))


def scenario_from_dict(raw: dict) -> Scenario:
    """Validate plain data (as read from TOML) and build a :class:`Scenario`."""
    c = _Checker()
    c.unknown(raw, _TOP, "")

    sites = []
    raw_sites = raw.get("sites")
    if not isinstance(raw_sites, list) or not raw_sites:
        c.bad("sites", "expected a non-empty array of site tables")
        raw_sites = []
    seen = set()
    declared = []  # every well-formed id, even if the rest of the site is invalid
    for i, s in enumerate(raw_sites):
        p = f"sites[{i}]"
        if not isinstance(s, dict):
            c.bad(p, "expected a table")
            continue
        c.unknown(s, {"id", "capability", "processors", "hosted_data"}, p)
        sid = c.string(s, "id", f"{p}.id")
        if sid is not None and sid in seen:
            c.bad(f"{p}.id", f"duplicate site id {sid!r}")
        seen.add(sid)
        if sid is not None and sid not in declared:
            declared.append(sid)
        cap = c.number(s, "capability", f"{p}.capability", gt=0)
        procs = c.number(s, "processors", f"{p}.processors", 1, integer=True, ge=1)
        hosted = s.get("hosted_data", [])
        if not isinstance(hosted, list) or not all(isinstance(h, str) for h in hosted):
            c.bad(f"{p}.hosted_data", "expected an array of dataset ids")
            hosted = []
        if sid is not None and cap is not None and procs is not None:
            sites.append(SiteState(id=sid, capability=float(cap), processors=procs,
                                   hosted_data=frozenset(hosted)))
    site_ids = declared

    min_loss = c.number(raw, "min_loss", "min_loss", 1e-6, gt=0, le=1)
    topology = {}
    mentioned = set()
    raw_topo = raw.get("topology", [])
    if not isinstance(raw_topo, list):
        c.bad("topology", "expected an array of link tables")
        raw_topo = []
    for i, ln in enumerate(raw_topo):
        p = f"topology[{i}]"
        if not isinstance(ln, dict):
            c.bad(p, "expected a table")
            continue
        c.unknown(ln, {"src", "dst", "bandwidth", "loss_prob", "rtt", "mss"}, p)
        src = c.string(ln, "src", f"{p}.src", choices=declared or None)
        dst = c.string(ln, "dst", f"{p}.dst", choices=declared or None)
        bw = c.number(ln, "bandwidth", f"{p}.bandwidth", gt=0)
        loss = c.number(ln, "loss_prob", f"{p}.loss_prob", ge=0, le=1)
        rtt = c.number(ln, "rtt", f"{p}.rtt", gt=0)
        mss = c.number(ln, "mss", f"{p}.mss", 1460, integer=True, gt=0)
        if src is not None and src == dst:
            c.bad(p, "self-links are implicit and must not be listed")
            continue
        if (src, dst) in mentioned and None not in (src, dst):
            c.bad(p, f"duplicate link {src}->{dst}")
        mentioned.add((src, dst))
        if None not in (src, dst, bw, loss, rtt, mss) and bw > 0 and rtt > 0 and 0 <= loss <= 1:
            topology[(src, dst)] = NetworkLink(src, dst, float(bw), float(loss), float(rtt), mss)
    for a in declared:
        for b in declared:
            if a != b and (a, b) not in mentioned:
                c.bad("topology", f"missing link {a}->{b}")

    w = c.table(raw, "weights", "weights")
    c.unknown(w, {"w5", "w6", "w7", "alpha", "beta", "gamma", "b_ref"}, "weights")
    wd = CostWeights()
    wvals = {k: c.number(w, k, f"weights.{k}", getattr(wd, k), ge=0)
             for k in ("w5", "w6", "w7", "alpha", "beta", "gamma")}
    wvals["b_ref"] = c.number(w, "b_ref", "weights.b_ref", wd.b_ref, gt=0)
    if all(wvals.get(k) == 0 for k in ("alpha", "beta", "gamma")):
        c.bad("weights", "at least one of alpha, beta, gamma must be > 0")

    pol = c.table(raw, "policy", "policy")
    c.unknown(pol, {"num_levels", "base_level", "job_threshold", "time_threshold",
                    "decay_per_excess_job", "aging_step", "sjf"}, "policy")
    pd = PriorityPolicy()
    levels = c.number(pol, "num_levels", "policy.num_levels", pd.num_levels, integer=True, ge=2)
    base = c.number(pol, "base_level", "policy.base_level", pd.base_level, integer=True, ge=0)
    if levels is not None and base is not None and base >= levels:
        c.bad("policy.base_level", f"must be < num_levels ({levels}), got {base}")
    pvals = dict(
        num_levels=levels, base_level=base,
        job_threshold=c.number(pol, "job_threshold", "policy.job_threshold", pd.job_threshold,
                               integer=True, gt=0),
        time_threshold=c.number(pol, "time_threshold", "policy.time_threshold",
                                pd.time_threshold, gt=0),
        decay_per_excess_job=c.number(pol, "decay_per_excess_job", "policy.decay_per_excess_job",
                                      pd.decay_per_excess_job, ge=0),
        aging_step=c.number(pol, "aging_step", "policy.aging_step", pd.aging_step, ge=0),
        sjf=c.flag(pol, "sjf", "policy.sjf", pd.sjf),
    )

    wl = c.table(raw, "workload", "workload")
    c.unknown(wl, set(WorkloadSpec.__dataclass_fields__), "workload")
    wdef = WorkloadSpec()
    dists = {k: _dist(c, wl, k, f"workload.{k}", getattr(wdef, k), integer=k in _INT_DISTS)
             for k in _WORKLOAD_DISTS}
    dp_raw = c.table(wl, "data_placement", "workload.data_placement")
    c.unknown(dp_raw, {"kind", "k", "site_weights"}, "workload.data_placement")
    dp_kind = c.string(dp_raw, "kind", "workload.data_placement.kind",
                       ("single-home", "replicated"), default="single-home")
    dp_k = c.number(dp_raw, "k", "workload.data_placement.k", 1, integer=True, ge=1)
    if dp_k is not None and site_ids and dp_k > len(site_ids):
        c.bad("workload.data_placement.k", f"must be <= number of sites ({len(site_ids)})")
    weights_raw = dp_raw.get("site_weights")
    if weights_raw is not None:
        ok = (isinstance(weights_raw, list) and len(weights_raw) == len(site_ids)
              and all(isinstance(x, (int, float)) and not isinstance(x, bool) and x >= 0
                      for x in weights_raw) and sum(weights_raw) > 0)
        if not ok:
            c.bad("workload.data_placement.site_weights",
                  f"expected {len(site_ids)} non-negative numbers with a positive sum")
            weights_raw = None
    user_sites = wl.get("user_sites")
    if user_sites is not None:
        if (not isinstance(user_sites, list) or not user_sites
                or any(u not in site_ids for u in user_sites)):
            c.bad("workload.user_sites", "expected a non-empty array of known site ids")
            user_sites = None
    datasets = wl.get("datasets")
    if datasets is not None:
        datasets = c.number(wl, "datasets", "workload.datasets", 1, integer=True, ge=1)
    workload_vals = dict(
        users=c.number(wl, "users", "workload.users", wdef.users, integer=True, ge=0),
        bursts_per_user=c.number(wl, "bursts_per_user", "workload.bursts_per_user",
                                 wdef.bursts_per_user, integer=True, ge=0),
        start_time=c.number(wl, "start_time", "workload.start_time", 0.0, ge=0),
        demand_per_processor=c.flag(wl, "demand_per_processor", "workload.demand_per_processor",
                                    False),
    )

    kind = c.string(raw, "scheduler_kind", "scheduler_kind", SCHEDULER_KINDS, default="diana")
    duration = c.number(raw, "duration", "duration", gt=0)
    seed = c.number(raw, "seed", "seed", 0, integer=True, ge=0)
    if isinstance(seed, int) and seed >= 2 ** 64:
        c.bad("seed", "must fit in 64 bits")
    opt = {}
    for key in ("aging_tick", "estimate_window", "series_bucket"):
        opt[key] = c.number(raw, key, key, None, gt=0) if key in raw else None
    overload = c.number(raw, "overload_factor", "overload_factor", 5.0, gt=0)
    export = c.flag(raw, "export_enabled", "export_enabled", True)
    drain = c.flag(raw, "drain", "drain", True)

    if c.diags:
        raise ScenarioError(c.diags)
    return Scenario(
        sites=sites,
        topology=topology,
        weights=CostWeights(**{k: float(v) for k, v in wvals.items()}),
        policy=PriorityPolicy(**pvals),
        workload=WorkloadSpec(
            **dists, **workload_vals,
            data_placement=DataPlacement(dp_kind, dp_k,
                                         tuple(weights_raw) if weights_raw else None),
            datasets=datasets,
            user_sites=tuple(user_sites) if user_sites else None,
        ),
        scheduler_kind=kind,
        duration=float(duration),
        seed=seed,
        aging_tick=opt["aging_tick"],
        estimate_window=opt["estimate_window"],
        overload_factor=float(overload),
        export_enabled=export,
        min_loss=float(min_loss),
        drain=drain,
        series_bucket=opt["series_bucket"],
    )


def read_scenario_dict(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc


def load_scenario(path) -> Scenario:
    return scenario_from_dict(read_scenario_dict(path))


def validate(raw: dict) -> list:
    """All diagnostics for ``raw``; an empty list means it is valid."""
    try:
        scenario_from_dict(raw)
    except ScenarioError as exc:
        return exc.diagnostics
    return []
