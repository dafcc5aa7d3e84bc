"""Per-run counters and the report the harness emits.

``scheduling_stall_cycles`` counts cycles a ready memory operation was held
back from starting execution by an in-flight ordering instruction, plus any
cycles the issue stage spent draining for a version-counter reset.  The
baseline accumulates the former; the versioned mode only ever pays the
latter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class RunCounters:
    """Mutable counters filled in while a machine runs."""

    retired: int = 0
    fence_count: int = 0
    fence_residency_sum: int = 0
    store_count: int = 0
    store_latency_sum: int = 0
    scheduling_stall_cycles: int = 0
    sb_full_stall_cycles: int = 0
    issue_stall_cycles: int = 0
    squash_count: int = 0
    avoided_squash_count: int = 0
    version_resets: int = 0
    invalidations_delivered: int = 0
    min_register_checks: int = 0


@dataclass
class StatsReport:
    mode: str
    seed: int
    cycles: int
    instructions: int
    ipc: float
    fence_count: int
    fence_rob_residency: float | None
    scheduling_stall_cycles: int
    store_count: int
    store_latency: float | None
    squash_count: int
    avoided_squash_count: int
    sb_full_stall_cycles: int
    issue_stall_cycles: int
    version_resets: int
    invalidations_delivered: int
    min_register_checks: int
    config: dict = field(default_factory=dict)

    @classmethod
    def from_counters(cls, c: RunCounters, mode: str, seed: int, cycles: int, config: dict) -> "StatsReport":
        return cls(
            mode=mode,
            seed=seed,
            cycles=cycles,
            instructions=c.retired,
            ipc=(c.retired / cycles) if cycles else 0.0,
            fence_count=c.fence_count,
            fence_rob_residency=(c.fence_residency_sum / c.fence_count) if c.fence_count else None,
            scheduling_stall_cycles=c.scheduling_stall_cycles,
            store_count=c.store_count,
            store_latency=(c.store_latency_sum / c.store_count) if c.store_count else None,
            squash_count=c.squash_count,
            avoided_squash_count=c.avoided_squash_count,
            sb_full_stall_cycles=c.sb_full_stall_cycles,
            issue_stall_cycles=c.issue_stall_cycles,
            version_resets=c.version_resets,
            invalidations_delivered=c.invalidations_delivered,
            min_register_checks=c.min_register_checks,
            config=config,
        )

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["config"] = dict(self.config)
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


CSV_COLUMNS = [
    "mode", "seed", "cycles", "instructions", "ipc", "fence_count",
    "fence_rob_residency", "scheduling_stall_cycles", "store_count",
    "store_latency", "squash_count", "avoided_squash_count",
    "sb_full_stall_cycles", "issue_stall_cycles", "version_resets",
]


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def csv_row(report: StatsReport) -> str:
    d = report.to_dict()

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    return ",".join(fmt(d[c]) for c in CSV_COLUMNS)


def mean_of(reports: list[StatsReport], attr: str) -> float | None:
    vals = [getattr(r, attr) for r in reports if getattr(r, attr) is not None]
    if not vals:
        return None
    return sum(vals) / len(vals)
