"""Cycle-level multicore simulator for versioned release-consistency fences,
with an exhaustive axiomatic oracle for cross-checking outcomes."""

from .config import SimConfig, parse_config
from .harness import (
    LitmusResult,
    SyntheticWorkloadSpec,
    benchmark_deltas,
    build_workload,
    random_program,
    run_benchmark,
    run_benchmark_suite,
    run_equivalence_corpus,
    run_litmus,
    run_litmus_test,
)
from .oracle import (
    EquivalenceReport,
    OracleBoundError,
    assign_thread_versions,
    check_rcsc,
    check_vsr,
    derive_outcome,
    enumerate_outcomes,
    equivalence_report,
)
from .program import (
    Instruction,
    LitmusParseError,
    LitmusTest,
    MemOpKind,
    Outcome,
    OutcomePredicate,
    Program,
    parse_litmus,
    serialize_litmus,
    validate,
)
from .simulator import DeadlockError, Machine, RunResult, SimulationLimitError, run_program
from .stats import StatsReport
from .versioning import VersionOverflowError, VersionState

__version__ = "0.1.0"

__all__ = [
    "SimConfig",
    "parse_config",
    "LitmusResult",
    "SyntheticWorkloadSpec",
    "benchmark_deltas",
    "build_workload",
    "random_program",
    "run_benchmark",
    "run_benchmark_suite",
    "run_equivalence_corpus",
    "run_litmus",
    "run_litmus_test",
    "EquivalenceReport",
    "OracleBoundError",
    "assign_thread_versions",
    "check_rcsc",
    "check_vsr",
    "derive_outcome",
    "enumerate_outcomes",
    "equivalence_report",
    "Instruction",
    "LitmusParseError",
    "LitmusTest",
    "MemOpKind",
    "Outcome",
    "OutcomePredicate",
    "Program",
    "parse_litmus",
    "serialize_litmus",
    "validate",
    "DeadlockError",
    "Machine",
    "RunResult",
    "SimulationLimitError",
    "run_program",
    "StatsReport",
    "VersionOverflowError",
    "VersionState",
]
