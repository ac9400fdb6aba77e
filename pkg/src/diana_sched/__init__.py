"""Data-intensive, network-aware grid meta-scheduling and its simulator."""

from .costs import (CostBreakdown, CostWeights, JobDataSpec, NetworkLink, SiteState,
                    compute_cost, data_transfer_cost, network_cost, tcp_throughput,
                    total_cost, transfer_time)
from .events import EventLog, SimEvent
from .metrics import MetricsSummary, compute_metrics, littles_residual, series
from .queues import FeedbackQueues, Job, PriorityPolicy, UserStats, effective_priority
from .scenario import load_scenario, scenario_from_dict
from .scheduler import (GridView, LittleEstimate, Placement, estimate_arrivals, export_jobs,
                        littles_formula, select_site, should_export)
from .simulation import Scenario, run
from .workload import DataPlacement, Dist, WorkloadSpec, generate_workload

__version__ = "0.1.0"
