"""Whole-machine simulation: cores stepped round-robin through a fixed
intra-cycle phase order (deliver invalidations, execute/satisfy, retire,
complete one store, issue).  Deterministic for a given (program, config,
seed); idle stretches are skipped by jumping to the next pending event, which
cannot change observable behavior because a cycle with no state change has no
effect besides advancing time.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .config import SimConfig
from .memory import MemorySystem
from .pipeline import Core
from .program import Outcome, Program, validate
from .stats import RunCounters, StatsReport


class DeadlockError(RuntimeError):
    """No core can make progress and no event is pending: a simulator bug."""


class SimulationLimitError(RuntimeError):
    """The run exceeded the configured cycle budget."""


@dataclass
class RunResult:
    outcome: Outcome
    stats: StatsReport
    cycles: int
    events: list[tuple[int, int, str, str]] | None
    committed: list[tuple[int, int]]

    def events_csv(self) -> str:
        if self.events is None:
            raise ValueError("run was not traced; set config.trace")
        lines = ["cycle,core,event,detail"]
        lines += [f"{c},{k},{e},{d}" for c, k, e, d in self.events]
        return "\n".join(lines) + "\n"


class Machine:
    def __init__(self, program: Program, config: SimConfig | None = None, seed: int | None = None):
        problems = validate(program)
        if problems:
            raise ValueError("invalid program: " + "; ".join(problems))
        self.program = program
        self.config = config or SimConfig()
        self.seed = self.config.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.memory = MemorySystem(self.config, program.initial_memory, len(program.threads), self.rng)
        self.counters = RunCounters()
        self.events: list[tuple[int, int, str, str]] | None = [] if self.config.trace else None
        self.committed: list[tuple[int, int]] = []
        self.active = False
        self.cores = [
            Core(cid, thread, self.config, self.memory, self.counters, self)
            for cid, thread in enumerate(program.threads)
        ]
        self.cycles = 0

    def emit(self, cycle: int, core: int, event: str, detail: str) -> None:
        if self.events is not None:
            self.events.append((cycle, core, event, detail))

    def warm(self, cid: int, locs) -> None:
        """Pre-install lines in a core's cache (scenario setup)."""
        self.memory.warm(cid, locs)

    def _done(self) -> bool:
        return (
            all(not c.busy() for c in self.cores)
            and self.memory.pending_delivery_cycle() is None
        )

    def step(self, cycle: int) -> None:
        self.active = False
        for core_id, line in self.memory.pop_due(cycle):
            self.active = True  # consuming a message is progress
            self.cores[core_id].snoop_invalidation(line, cycle)
        for c in self.cores:
            c.execute(cycle)
        for c in self.cores:
            c.retire(cycle)
        for c in self.cores:
            c.complete(cycle)
        for c in self.cores:
            c.issue(cycle)
        if self.config.assert_min_registers:
            for c in self.cores:
                c.check_min_registers()
            self.counters.min_register_checks += 1

    def _next_event(self, cycle: int) -> int | None:
        cands: list[int] = []
        mp = self.memory.pending_delivery_cycle()
        if mp is not None and mp > cycle:
            cands.append(mp)
        for c in self.cores:
            c.next_event_cycles(cycle, cands)
        return min(cands) if cands else None

    def run(self, max_cycles: int | None = None) -> RunResult:
        limit = self.config.max_cycles if max_cycles is None else max_cycles
        cycle = 0
        last = -1
        while not self._done():
            if cycle > limit:
                raise SimulationLimitError(f"exceeded {limit} cycles")
            self.step(cycle)
            last = cycle
            if self.active:
                cycle += 1
                continue
            nxt = self._next_event(cycle)
            if nxt is None:
                raise DeadlockError(f"no progress possible at cycle {cycle}")
            assert nxt > cycle
            cycle = nxt
        self.cycles = last + 1
        return RunResult(
            outcome=self._outcome(),
            stats=StatsReport.from_counters(
                self.counters, self.config.mode, self.seed, self.cycles, self.config.echo()
            ),
            cycles=self.cycles,
            events=self.events,
            committed=self.committed,
        )

    def _outcome(self) -> Outcome:
        regs = {}
        for c in self.cores:
            for dest, val in c.regs.items():
                regs[(c.cid, dest)] = val
        return Outcome.from_maps(regs, dict(self.memory.values))


def run_program(
    program: Program,
    config: SimConfig | None = None,
    seed: int | None = None,
    warm: dict[int, list[int]] | None = None,
) -> RunResult:
    """Build a machine, optionally pre-warm caches, run to completion."""
    m = Machine(program, config, seed)
    if warm:
        for cid, locs in warm.items():
            m.warm(cid, locs)
    return m.run()
