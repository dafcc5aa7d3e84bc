"""Latency and coherence model.

One flat coherence domain: a single authoritative value per location, private
per-core L1s over shared L2/L3 for latency, MESI line states, and an
invalidation message to every reader core when a store completes.  Stores are
multi-copy atomic by construction (the global value store updates once).

Capacity is modeled with per-level LRU sets and only affects latency; the
reader directory that drives invalidations survives evictions, so a core that
read a line always hears about the next write to it (a spurious snoop on an
evicted line is harmless).
"""

from __future__ import annotations

import heapq
from collections import OrderedDict


class _Lru:
    """Fixed-capacity LRU presence set (which lines a level currently holds)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._lines: OrderedDict[int, None] = OrderedDict()

    def __contains__(self, line: int) -> bool:
        return line in self._lines

    def touch(self, line: int) -> None:
        if line in self._lines:
            self._lines.move_to_end(line)

    def add(self, line: int) -> None:
        if line in self._lines:
            self._lines.move_to_end(line)
            return
        if len(self._lines) >= self.capacity:
            self._lines.popitem(last=False)
        self._lines[line] = None

    def drop(self, line: int) -> None:
        self._lines.pop(line, None)


class MemorySystem:
    def __init__(self, config, initial_memory: dict[int, int], n_cores: int, rng):
        self.config = config
        self.rng = rng
        self.n_cores = n_cores
        self.values = dict(initial_memory)
        l1_lines, l2_lines, l3_lines = config.cache_lines()
        self.l1 = [_Lru(l1_lines) for _ in range(n_cores)]
        self.l2 = _Lru(l2_lines)
        self.l3 = _Lru(l3_lines)
        # Coherence bookkeeping per line, independent of cache capacity.
        self.state: dict[int, str] = {}       # M / E / S / I
        self.owner: dict[int, int | None] = {}
        self.readers: dict[int, set[int]] = {}  # cores that read since the last write
        self._pending: list[tuple[int, int, int, int]] = []  # (cycle, seq, core, line)
        self._seq = 0
        self.alias = dict(config.false_sharing_map)

    def line_of(self, loc: int) -> int:
        return self.alias.get(loc, loc)

    def _jitter(self) -> int:
        if self.config.lat_jitter:
            return self.rng.randint(0, self.config.lat_jitter)
        return 0

    def _fetch_latency(self, core: int, line: int) -> int:
        c = self.config
        if line in self.l1[core]:
            self.l1[core].touch(line)
            return c.l1_lat
        if line in self.l2:
            return c.l2_lat
        if line in self.l3:
            return c.l3_lat
        return c.mem_lat

    def read(self, core: int, loc: int, cycle: int) -> int:
        """Start a load fill; returns the cycle the data arrives."""
        return cycle + self._fetch_latency(core, self.line_of(loc)) + self._jitter()

    def finish_read(self, core: int, loc: int) -> int:
        """Install the line for a completed fill and return the current value."""
        line = self.line_of(loc)
        self._install(core, line)
        st = self.state.get(line, "I")
        owner = self.owner.get(line)
        if st in ("M", "E"):
            if owner != core:  # another core's copy: downgrade to shared
                self.state[line] = "S"
                self.owner[line] = None
        elif st == "I":
            sole = not self.readers.get(line)
            self.state[line] = "E" if sole else "S"
            self.owner[line] = core if sole else None
        self.readers.setdefault(line, set()).add(core)
        return self.values[loc]

    def request_ownership(self, core: int, loc: int, cycle: int) -> int:
        """Start a read-for-ownership for a post-retirement store; returns the
        cycle the line is writable."""
        return cycle + self._fetch_latency(core, self.line_of(loc)) + self._jitter()

    def complete_store(self, core: int, loc: int, value: int, cycle: int) -> int:
        """Make a store globally visible; queue invalidations to other readers.

        Returns the number of invalidation messages sent.
        """
        line = self.line_of(loc)
        targets = set(self.readers.get(line, ()))
        owner = self.owner.get(line)
        if owner is not None:
            targets.add(owner)
        targets.discard(core)
        self.values[loc] = value
        deliver = cycle + self.config.inv_delay
        for t in sorted(targets):
            heapq.heappush(self._pending, (deliver, self._seq, t, line))
            self._seq += 1
            self.l1[t].drop(line)
        self.state[line] = "M"
        self.owner[line] = core
        self.readers[line] = {core}
        self._install(core, line)
        return len(targets)

    def _install(self, core: int, line: int) -> None:
        self.l1[core].add(line)
        self.l2.add(line)
        self.l3.add(line)

    def pop_due(self, cycle: int) -> list[tuple[int, int]]:
        """Invalidation messages (core, line) due for delivery this cycle."""
        out = []
        while self._pending and self._pending[0][0] <= cycle:
            _, _, core, line = heapq.heappop(self._pending)
            out.append((core, line))
        return out

    def pending_delivery_cycle(self) -> int | None:
        return self._pending[0][0] if self._pending else None

    def warm(self, core: int, locs) -> None:
        """Pre-install lines shared in the given core's L1 (test scaffolding)."""
        for loc in locs:
            line = self.line_of(loc)
            self._install(core, line)
            self.state[line] = "S"
            self.owner[line] = None
            self.readers.setdefault(line, set()).add(core)

    def check_mesi_invariants(self) -> None:
        for line, st in self.state.items():
            owner = self.owner.get(line)
            readers = self.readers.get(line, set())
            if st in ("M", "E"):
                assert owner is not None, f"line {line}: {st} without owner"
                assert readers <= {owner}, f"line {line}: {st} with extra readers {readers}"
            else:
                assert owner is None, f"line {line}: state {st} with owner {owner}"
