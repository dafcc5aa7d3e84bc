"""One out-of-order core: reorder buffer, load/store queue, unordered store
buffer, pending-fence queue, and running minimum-version trackers.

Two fence-handling modes share the pipeline skeleton:

``baseline`` holds ordering by stalling.  A store-release or full fence drains
the store buffer before it retires; an in-flight load-acquire or full fence
blocks younger memory operations from starting execution; a load-acquire
additionally waits until every earlier release store is globally visible
before reading; and a cache invalidation squashes every matching satisfied
speculative load.

``louvre`` retires all three fence flavors as soon as they reach the head of
the reorder buffer.  Ordering rides on the version tags queue entries carry:
stores drain lowest-version-first (the oldest entry is exempt, nothing can
order before it), a load may not retire while a lower-versioned store sits in
the store buffer, and an invalidation squashes a satisfied load only when a
live fence still orders it (higher tag than the queue minima, or a pending
acquire/full fence at or before it in program order).
"""

from __future__ import annotations

import heapq
import math
from collections import Counter, deque
from dataclasses import dataclass

from .program import Instruction, MemOpKind
from .versioning import VersionState


class MinTracker:
    """Running minimum over a multiset of versions (lazy-deletion heap).

    Models the comparator network that recomputes the queue minimum every
    cycle; ``value`` is +inf when the underlying structure is empty so version
    comparisons degrade gracefully.
    """

    def __init__(self):
        self._heap: list[int] = []
        self._counts: Counter = Counter()

    def add(self, version: int) -> None:
        self._counts[version] += 1
        heapq.heappush(self._heap, version)

    def discard(self, version: int) -> None:
        c = self._counts[version] - 1
        if c:
            self._counts[version] = c
        else:
            del self._counts[version]

    @property
    def value(self) -> float:
        while self._heap and not self._counts.get(self._heap[0]):
            heapq.heappop(self._heap)
        return self._heap[0] if self._heap else math.inf


@dataclass
class Flight:
    """An in-flight instruction: the ROB entry, doubling as the LSQ entry."""

    instr: Instruction
    seq: int
    version: int | None
    issue_cycle: int
    pre_snap: tuple[int, int] | None
    is_load: bool = False
    is_store: bool = False
    is_acquire: bool = False
    satisfied: bool = False
    value: int | None = None
    source: str | None = None       # forward / sb / cache
    provisional: bool = False       # value bound while an older op still ordered it
    exec_started: bool = False
    data_ready: int | None = None   # stores: cycle the data is computed
    fill_ready: int | None = None   # loads: cycle the cache fill lands
    satisfy_cycle: int | None = None
    gate_since: int | None = None
    sb_wait_since: int | None = None

    @property
    def state(self) -> str:
        if self.is_load:
            return "satisfied" if self.satisfied else ("executing" if self.exec_started else "issued")
        if self.is_store:
            return "completed-exec" if self.data_ready is not None else ("executing" if self.exec_started else "issued")
        return "completed-exec"


@dataclass
class SbEntry:
    """A retired-but-incomplete store."""

    loc: int
    value: int
    version: int | None
    age: int
    is_release: bool
    ready_cycle: int
    issue_cycle: int
    key: tuple[int, int]


@dataclass
class PendingFence:
    """Queue entry for an in-flight load-acquire or full fence."""

    kind: MemOpKind
    seq: int
    version: int | None


def can_retire_load(
    version: int | None,
    is_acquire: bool,
    mode: str,
    strict_fence_order: bool,
    sb_min_version: float,
    sb_has_release: bool,
) -> bool:
    """Retirement gate for a satisfied load at the head of the ROB."""
    if mode == "baseline":
        return True
    if version > sb_min_version:
        return False
    if strict_fence_order and is_acquire and sb_has_release:
        return False
    return True


def select_store_to_complete(sb: list[SbEntry], mode: str, cycle: int) -> SbEntry | None:
    """Pick at most one store to drain this cycle.

    The oldest entry completes whenever its line is ready (nothing can order
    before it).  Otherwise, in louvre mode only ready entries tagged with the
    minimum version across *all* live entries are eligible, oldest first; the
    baseline buffer is unordered, oldest ready first.  Same-address entries
    always drain in age order in both modes: letting a younger store to a
    line overtake an older one would break single-thread semantics.
    """
    if not sb:
        return None
    oldest = sb[0]
    if oldest.ready_cycle <= cycle:
        return oldest
    seen = {oldest.loc}
    ready = []
    for e in sb[1:]:
        if e.ready_cycle <= cycle and e.loc not in seen:
            ready.append(e)
        seen.add(e.loc)
    if not ready:
        return None
    if mode == "baseline":
        return ready[0]
    lowest = min(e.version for e in sb)
    for e in ready:
        if e.version == lowest:
            return e
    return None


def _find_forward(lsq, sb, load: Flight):
    """Youngest same-address store visible to ``load``: an older in-flight
    store wins over the store buffer (buffer entries are older by
    construction)."""
    for g in reversed(lsq):
        if g.seq < load.seq and g.is_store and g.instr.addr == load.instr.addr:
            return ("lsq", g)
    best = None
    for e in sb:  # age order; keep the youngest match
        if e.loc == load.instr.addr:
            best = e
    if best is not None:
        return ("sb", best)
    return None


def forward_store_to_load(lsq, sb, load: Flight) -> int | None:
    """Value the load would forward, or None for the cache path."""
    hit = _find_forward(lsq, sb, load)
    if hit is None:
        return None
    kind, src = hit
    return src.instr.value if kind == "lsq" else src.value


class Core:
    def __init__(self, cid: int, thread: list[Instruction], config, memory, counters, sim):
        self.cid = cid
        self.thread = thread
        self.config = config
        self.memory = memory
        self.counters = counters
        self.sim = sim
        self.mode = config.mode
        self.vstate = VersionState.with_bits(config.version_bits) if self.mode == "louvre" else None

        self.rob: deque[Flight] = deque()
        self.lsq: deque[Flight] = deque()
        self.sb: list[SbEntry] = []
        self.fence_queue: deque[PendingFence] = deque()
        self.sb_min = MinTracker()
        self.lsq_min = MinTracker()
        self.release_in_sb = 0
        self.regs: dict[int, int] = {}
        self.fetch_idx = 0
        self.age_counter = 0
        self.pending_exec: list[Flight] = []   # issued, execution not begun (po order)
        self.pending_fills: list[Flight] = []
        self.draining = False
        self.drain_since = 0

    # ------------------------------------------------------------------ util

    def busy(self) -> bool:
        return bool(self.rob or self.sb or self.fetch_idx < len(self.thread))

    def _emit(self, cycle: int, event: str, detail: str) -> None:
        self.sim.emit(cycle, self.cid, event, detail)

    def _mark(self) -> None:
        self.sim.active = True

    # ----------------------------------------------------------- phase: snoop

    def snoop_invalidation(self, line: int, cycle: int) -> None:
        self.counters.invalidations_delivered += 1
        self._emit(cycle, "inval", f"line={line}")
        for f in list(self.lsq):
            if not (f.is_load and f.satisfied and f.source == "cache"):
                continue
            if self.memory.line_of(f.instr.addr) != line:
                continue
            if self._must_squash(f):
                self.counters.squash_count += 1
                self._emit(cycle, "squash", f"T{self.cid}:po{f.seq}")
                self._squash_from(f, cycle)
                break
            self.counters.avoided_squash_count += 1
            self._emit(cycle, "squash_avoided", f"T{self.cid}:po{f.seq}")

    def _must_squash(self, f: Flight) -> bool:
        if self.mode == "baseline":
            return True
        return f.provisional

    def _squash_from(self, f: Flight, cycle: int) -> None:
        self._mark()
        while self.rob and self.rob[-1].seq >= f.seq:
            g = self.rob.pop()
            if g.is_load or g.is_store:
                assert self.lsq and self.lsq[-1] is g
                self.lsq.pop()
                if self.vstate:
                    self.lsq_min.discard(g.version)
            if g.gate_since is not None:
                self.counters.scheduling_stall_cycles += cycle - g.gate_since
        while self.fence_queue and self.fence_queue[-1].seq >= f.seq:
            self.fence_queue.pop()
        self.pending_fills = [g for g in self.pending_fills if g.seq < f.seq]
        self.pending_exec = [g for g in self.pending_exec if g.seq < f.seq]
        if self.vstate:
            self.vstate.install(f.pre_snap)
        self.fetch_idx = f.seq

    # --------------------------------------------------------- phase: execute

    def _acquire_exec_blocked(self, f: Flight) -> bool:
        # Conventional acquire reads only after every earlier release store is
        # globally visible.
        if self.release_in_sb:
            return True
        for g in self.lsq:
            if g.seq >= f.seq:
                break
            if g.instr.kind is MemOpKind.STORE_RELEASE:
                return True
        return False

    def _ungate(self, f: Flight, cycle: int) -> None:
        if f.gate_since is not None:
            self.counters.scheduling_stall_cycles += cycle - f.gate_since
            f.gate_since = None

    def execute(self, cycle: int) -> None:
        if self.pending_exec:
            # In baseline mode an in-flight acquire or full fence blocks every
            # younger memory op; gating is monotone in program order, so stop
            # at the first blocked entry.
            gate_seq = None
            if self.mode == "baseline" and self.fence_queue:
                gate_seq = self.fence_queue[0].seq
            keep: list[Flight] = []
            n = len(self.pending_exec)
            for i in range(n):
                f = self.pending_exec[i]
                if gate_seq is not None and f.seq > gate_seq:
                    keep.extend(self.pending_exec[i:])
                    break
                if f.is_store:
                    self._ungate(f, cycle)
                    f.exec_started = True
                    f.data_ready = cycle + 1
                    self._mark()
                    continue
                if self.mode == "baseline" and f.is_acquire and self._acquire_exec_blocked(f):
                    if f.gate_since is None:
                        f.gate_since = cycle
                    keep.append(f)
                    continue
                hit = _find_forward(self.lsq, self.sb, f)
                if hit is not None:
                    where, src = hit
                    if where == "lsq":
                        if src.data_ready is None or src.data_ready > cycle:
                            keep.append(f)  # wait for the older store's data
                            continue
                        self._ungate(f, cycle)
                        self._satisfy(f, src.instr.value, "forward", cycle)
                    else:
                        self._ungate(f, cycle)
                        self._satisfy(f, src.value, "sb", cycle)
                    continue
                self._ungate(f, cycle)
                f.exec_started = True
                f.fill_ready = self.memory.read(self.cid, f.instr.addr, cycle)
                self.pending_fills.append(f)
                self._mark()
            self.pending_exec = keep
        if self.pending_fills:
            due = [f for f in self.pending_fills if f.fill_ready <= cycle]
            if due:
                self.pending_fills = [f for f in self.pending_fills if f.fill_ready > cycle]
                for f in due:
                    value = self.memory.finish_read(self.cid, f.instr.addr)
                    self._satisfy(f, value, "cache", cycle)

    def _satisfy(self, f: Flight, value: int, source: str, cycle: int) -> None:
        f.satisfied = True
        f.value = value
        f.source = source
        f.satisfy_cycle = cycle
        if source == "cache" and self.vstate:
            # Ordering evidence is judged when the value binds: an older
            # lower-versioned op still in a queue, or a pending acquire/full
            # fence at or before this load (the synchronizing load itself
            # included), makes the read provisional.  The flag is sticky: the
            # evidence may drain before an invalidation for this line lands,
            # but the read happened while the constraint was live.
            f.provisional = f.version > min(self.sb_min.value, self.lsq_min.value) or any(
                pf.seq <= f.seq for pf in self.fence_queue
            )
        self._emit(cycle, "satisfy", f"T{self.cid}:po{f.seq}={value} via {source}")
        self._mark()

    # ---------------------------------------------------------- phase: retire

    def retire(self, cycle: int) -> None:
        for _ in range(self.config.retire_width):
            if not self.rob:
                return
            f = self.rob[0]
            kind = f.instr.kind
            if kind is MemOpKind.FULL_FENCE:
                if self.mode == "baseline" and self.sb:
                    return  # drain before the fence leaves the ROB
            elif kind.is_load:
                if not f.satisfied:
                    return
                if not can_retire_load(
                    f.version,
                    kind is MemOpKind.LOAD_ACQUIRE,
                    self.mode,
                    self.config.strict_fence_order,
                    self.sb_min.value,
                    bool(self.release_in_sb),
                ):
                    return
            else:  # store flavors
                if f.data_ready is None or f.data_ready > cycle:
                    return
                if self.mode == "baseline" and kind is MemOpKind.STORE_RELEASE and self.sb:
                    return  # drain earlier stores before the release retires
                if len(self.sb) >= self.config.sb_entries:
                    if f.sb_wait_since is None:
                        f.sb_wait_since = cycle
                    return
                if f.sb_wait_since is not None:
                    self.counters.sb_full_stall_cycles += cycle - f.sb_wait_since
                    f.sb_wait_since = None
            self._retire_head(f, cycle)

    def _retire_head(self, f: Flight, cycle: int) -> None:
        kind = f.instr.kind
        self.rob.popleft()
        if f.is_load or f.is_store:
            assert self.lsq and self.lsq[0] is f
            self.lsq.popleft()
            if self.vstate:
                self.lsq_min.discard(f.version)
        if kind.is_load:
            self.regs[f.instr.dest] = f.value
        if kind.is_store:
            self._insert_sb(f, cycle)
        if kind in (MemOpKind.LOAD_ACQUIRE, MemOpKind.FULL_FENCE):
            pf = self.fence_queue.popleft()
            assert pf.seq == f.seq
        if kind.is_fence:
            self.counters.fence_count += 1
            self.counters.fence_residency_sum += cycle - f.issue_cycle
        self.counters.retired += 1
        self.sim.committed.append((self.cid, f.seq))
        self._emit(cycle, "retire", f"T{self.cid}:po{f.seq}")
        self._mark()

    def _insert_sb(self, f: Flight, cycle: int) -> None:
        ins = f.instr
        if self.config.write_combining:
            for e in self.sb:
                if e.loc == ins.addr and e.version == f.version:
                    e.value = ins.value  # merge: same line, same ordering class
                    self._emit(cycle, "sb_merge", f"T{self.cid}:po{f.seq}->age{e.age}")
                    return
        entry = SbEntry(
            loc=ins.addr,
            value=ins.value,
            version=f.version,
            age=self.age_counter,
            is_release=ins.kind is MemOpKind.STORE_RELEASE,
            ready_cycle=self.memory.request_ownership(self.cid, ins.addr, cycle),
            issue_cycle=f.issue_cycle,
            key=ins.key,
        )
        self.age_counter += 1
        self.sb.append(entry)
        if self.vstate:
            self.sb_min.add(f.version)
        if entry.is_release:
            self.release_in_sb += 1
        self._emit(cycle, "sb_insert", f"T{self.cid}:po{f.seq} v={f.version}")

    # -------------------------------------------------------- phase: complete

    def complete(self, cycle: int) -> None:
        for _ in range(self.config.sb_drain_width):
            e = select_store_to_complete(self.sb, self.mode, cycle)
            if e is None:
                return
            self.memory.complete_store(self.cid, e.loc, e.value, cycle)
            self.sb.remove(e)
            if self.vstate:
                self.sb_min.discard(e.version)
            if e.is_release:
                self.release_in_sb -= 1
            self.counters.store_count += 1
            self.counters.store_latency_sum += cycle - e.issue_cycle
            self._emit(cycle, "complete", f"T{e.key[0]}:po{e.key[1]} loc={e.loc} v={e.version}")
            self._mark()

    # ----------------------------------------------------------- phase: issue

    def issue(self, cycle: int) -> None:
        if self.draining:
            if not self.rob and not self.sb:
                self.vstate.reset()
                self.counters.version_resets += 1
                self.counters.scheduling_stall_cycles += cycle - self.drain_since
                self.draining = False
                self._emit(cycle, "vreset", "")
                self._mark()
            else:
                return
        budget = self.config.fetch_width
        mem_budget = self.config.mem_ops_per_cycle
        issued = 0
        while budget and self.fetch_idx < len(self.thread):
            ins = self.thread[self.fetch_idx]
            kind = ins.kind
            if len(self.rob) >= self.config.rob_entries:
                break
            if kind.is_access and (not mem_budget or len(self.lsq) >= self.config.lsq_entries):
                break
            if self.vstate and kind.is_fence and self.vstate.would_overflow(1):
                self.draining = True
                self.drain_since = cycle
                self._emit(cycle, "overflow_drain", f"T{self.cid}:po{ins.po}")
                self._mark()
                break
            pre = self.vstate.snapshot() if self.vstate else None
            version = self.vstate.assign(kind) if self.vstate else None
            f = Flight(
                instr=ins,
                seq=ins.po,
                version=version,
                issue_cycle=cycle,
                pre_snap=pre,
                is_load=kind.is_load,
                is_store=kind.is_store,
                is_acquire=kind is MemOpKind.LOAD_ACQUIRE,
            )
            self.rob.append(f)
            if kind.is_access:
                self.lsq.append(f)
                if self.vstate:
                    self.lsq_min.add(version)
                mem_budget -= 1
                self.pending_exec.append(f)
                if self.mode == "baseline" and self.fence_queue:
                    # blocked from executing while the older fence is in flight
                    f.gate_since = cycle
            else:
                f.satisfied = True  # a full fence has nothing to execute
            if kind in (MemOpKind.LOAD_ACQUIRE, MemOpKind.FULL_FENCE):
                self.fence_queue.append(PendingFence(kind, ins.po, version))
            self.fetch_idx += 1
            budget -= 1
            issued += 1
            self._emit(cycle, "issue", f"T{self.cid}:po{ins.po} {kind.value} v={version}")
            self._mark()
        if not issued and self.fetch_idx < len(self.thread):
            self.counters.issue_stall_cycles += 1

    # ------------------------------------------------------------- assertions

    def check_min_registers(self) -> None:
        if not self.vstate:
            return
        sb_expect = min((e.version for e in self.sb), default=math.inf)
        lsq_expect = min((f.version for f in self.lsq), default=math.inf)
        if self.sb_min.value != sb_expect:
            raise AssertionError(
                f"core {self.cid}: sb min tracker {self.sb_min.value} != brute-force {sb_expect}"
            )
        if self.lsq_min.value != lsq_expect:
            raise AssertionError(
                f"core {self.cid}: lsq min tracker {self.lsq_min.value} != brute-force {lsq_expect}"
            )

    def next_event_cycles(self, cycle: int, out: list[int]) -> None:
        for f in self.pending_fills:
            if f.fill_ready > cycle:
                out.append(f.fill_ready)
        for f in self.lsq:
            if f.is_store and f.data_ready is not None and f.data_ready > cycle:
                out.append(f.data_ready)
        for e in self.sb:
            if e.ready_cycle > cycle:
                out.append(e.ready_cycle)
