"""Timestamped simulation events and the log that collects them."""

from __future__ import annotations

import bisect
import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

EVENT_KINDS = (
    "arrival", "enqueue", "placement", "transfer_start", "transfer_end",
    "exec_start", "exec_end", "promotion", "demotion", "export", "warning",
)

CSV_COLUMNS = ("time", "seq", "kind", "job", "site", "payload")


@dataclass(frozen=True)
class SimEvent:
    time: float
    seq: int
    kind: str
    job: Optional[int] = None
    site: Optional[str] = None
    payload: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"time": self.time, "seq": self.seq, "kind": self.kind,
                "job": self.job, "site": self.site, "payload": self.payload}


@dataclass
class EventLog:
    """Ordered events plus run metadata (site shapes, scheduler, start/end)."""

    meta: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    def append(self, time, kind, job=None, site=None, payload=None) -> SimEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        ev = SimEvent(time, len(self.events), kind, job, site, payload or {})
        self.events.append(ev)
        return ev

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def between(self, t0: float, t1: float):
        """Events with ``t0 < time <= t1``."""
        lo = bisect.bisect_right(self.events, t0, key=lambda e: e.time)
        hi = bisect.bisect_right(self.events, t1, key=lambda e: e.time)
        return self.events[lo:hi]

    def of_kind(self, kind: str):
        return [e for e in self.events if e.kind == kind]

    def to_json_obj(self) -> dict:
        return {"meta": self.meta, "events": [e.as_dict() for e in self.events]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EventLog":
        log = cls(meta=dict(obj.get("meta", {})))
        for e in obj["events"]:
            log.events.append(SimEvent(e["time"], e["seq"], e["kind"], e.get("job"),
                                       e.get("site"), e.get("payload") or {}))
        return log

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for e in self.events:
            w.writerow([repr(e.time), e.seq, e.kind, "" if e.job is None else e.job,
                        "" if e.site is None else e.site,
                        json.dumps(e.payload, sort_keys=True, separators=(",", ":"))])
        return buf.getvalue()
