"""Placement cost model: network, computation and data-transfer costs.

Every function here is pure. Sizes are bytes, rates are bits/second and
times are seconds. A *topology* is a mapping ``(src, dst) -> NetworkLink``;
links from a site to itself are implicit and free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import InvalidLink, InvalidSite, UnknownRoute

MATHIS_C = math.sqrt(1.5)
DEFAULT_MSS = 1460
DEFAULT_B_REF = 1e8


@dataclass(frozen=True)
class NetworkLink:
    src: str
    dst: str
    bandwidth: float  # bits/s
    loss_prob: float
    rtt: float  # s
    mss: int = DEFAULT_MSS  # bytes

    @property
    def is_self(self) -> bool:
        return self.src == self.dst


@dataclass(frozen=True)
class SiteState:
    id: str
    capability: float  # work units/s
    queue_length: int = 0
    load: float = 0.0
    processors: int = 1
    hosted_data: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class CostWeights:
    w5: float = 0.5
    w6: float = 0.5
    w7: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    b_ref: float = DEFAULT_B_REF

    def __post_init__(self):
        for name in ("w5", "w6", "w7", "alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"weight {name} must be finite and >= 0, got {v!r}")
        if self.alpha == 0 and self.beta == 0 and self.gamma == 0:
            raise ValueError("at least one of alpha, beta, gamma must be > 0")
        if not (math.isfinite(self.b_ref) and self.b_ref > 0):
            raise ValueError(f"b_ref must be finite and > 0, got {self.b_ref!r}")


@dataclass(frozen=True)
class JobDataSpec:
    input_bytes: float
    output_bytes: float
    executable_bytes: float
    input_source: str
    output_sink: str
    executable_source: str


@dataclass(frozen=True)
class CostBreakdown:
    network: float
    compute: float
    dtc: float
    total: float

    def as_dict(self) -> dict:
        return {"network": self.network, "compute": self.compute,
                "dtc": self.dtc, "total": self.total}


def _check_link(link: NetworkLink) -> None:
    bad = []
    if not (math.isfinite(link.bandwidth) and link.bandwidth > 0):
        bad.append(f"bandwidth={link.bandwidth!r}")
    if not (math.isfinite(link.rtt) and link.rtt > 0):
        bad.append(f"rtt={link.rtt!r}")
    if not (math.isfinite(link.loss_prob) and 0 < link.loss_prob <= 1):
        bad.append(f"loss_prob={link.loss_prob!r}")
    if not link.mss > 0:
        bad.append(f"mss={link.mss!r}")
    if bad:
        raise InvalidLink(f"invalid link {link.src}->{link.dst}: " + ", ".join(bad))


def tcp_throughput(link: NetworkLink) -> float:
    """Achievable TCP rate in bits/s, capped at the link bandwidth.

    Uses the Mathis et al. steady-state relation
    ``MSS * C / (RTT * sqrt(p))`` with ``C = sqrt(3/2)``.
    """
    _check_link(link)
    mathis = (link.mss * 8 * MATHIS_C) / (link.rtt * math.sqrt(link.loss_prob))
    return min(link.bandwidth, mathis)


def network_cost(link: NetworkLink, b_ref: float = DEFAULT_B_REF) -> float:
    """Loss over bandwidth, scaled by ``b_ref`` into a dimensionless penalty."""
    if link.is_self:
        return 0.0
    _check_link(link)
    return link.loss_prob / link.bandwidth * b_ref


def compute_cost(site: SiteState, w: CostWeights) -> float:
    # The queue/capability term appears twice with separate weights, as published.
    if not (math.isfinite(site.capability) and site.capability > 0):
        raise InvalidSite(f"site {site.id}: capability must be > 0, got {site.capability!r}")
    if site.queue_length < 0 or not 0 <= site.load <= 1:
        raise InvalidSite(f"site {site.id}: queue_length={site.queue_length}, load={site.load}")
    qp = site.queue_length / site.capability
    return qp * w.w5 + qp * w.w6 + site.load * w.w7


def route(topology: Mapping, src: str, dst: str) -> NetworkLink | None:
    """Look up the link ``src -> dst``; ``None`` means a free self-link."""
    if src == dst:
        return None
    try:
        return topology[(src, dst)]
    except KeyError:
        raise UnknownRoute(src, dst) from None


def transfer_time(nbytes: float, link: NetworkLink | None) -> float:
    if nbytes < 0 or not math.isfinite(nbytes):
        raise ValueError(f"byte count must be finite and >= 0, got {nbytes!r}")
    if link is None or link.is_self or nbytes == 0:
        return 0.0
    return nbytes * 8 / tcp_throughput(link)


def transfer_legs(job: JobDataSpec, candidate: str, topology: Mapping) -> tuple[float, float, float]:
    """Seconds for the (input, output, executable) legs if run at ``candidate``."""
    t_in = transfer_time(job.input_bytes, route(topology, job.input_source, candidate))
    t_out = transfer_time(job.output_bytes, route(topology, candidate, job.output_sink))
    t_exe = transfer_time(job.executable_bytes, route(topology, job.executable_source, candidate))
    return t_in, t_out, t_exe


def data_transfer_cost(job: JobDataSpec, candidate: str, topology: Mapping) -> float:
    t_in, t_out, t_exe = transfer_legs(job, candidate, topology)
    return t_in + t_out + t_exe


def total_cost(job: JobDataSpec, site: SiteState, topology: Mapping,
               w: CostWeights) -> CostBreakdown:
    """Combine the three cost terms for running ``job`` at ``site``.

    The network term is taken on the input-data link, the dominant transfer.
    Errors from a component are re-raised with the component named.
    """
    try:
        link = route(topology, job.input_source, site.id)
        net = 0.0 if link is None else network_cost(link, w.b_ref)
    except (InvalidLink, UnknownRoute) as exc:
        raise _tagged(exc, "network cost") from exc
    try:
        comp = compute_cost(site, w)
    except InvalidSite as exc:
        raise _tagged(exc, "compute cost") from exc
    try:
        dtc = data_transfer_cost(job, site.id, topology)
    except (InvalidLink, UnknownRoute) as exc:
        raise _tagged(exc, "data transfer cost") from exc
    total = w.alpha * net + w.beta * comp + w.gamma * dtc
    return CostBreakdown(network=net, compute=comp, dtc=dtc, total=total)


def _tagged(exc, component):
    if isinstance(exc, UnknownRoute):
        return UnknownRoute(exc.src, exc.dst, component)
    return type(exc)(f"{component}: {exc}")
