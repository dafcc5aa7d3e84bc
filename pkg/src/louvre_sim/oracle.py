"""Exhaustive outcome enumeration for small programs under two rule sets.

``rcsc`` is the axiomatic release-consistency model: full fences order both
directions, a load-acquire orders everything after it, a store-release orders
everything before it, same-thread fences stay in program order, and a load
reads the globally-latest store among those before it in program order or in
the global order (initial memory acts as a minimal virtual store).

``vsr`` is the version-tag model: two same-thread accesses with strictly
increasing tags keep their order globally, anything after a load-acquire with
an equal tag orders after it, and the value rule is identical.  The
``strict_fence_order`` option additionally keeps same-thread synchronizing
instructions in program order globally, covering the release-release and
release-acquire pairs that the raw tag comparison leaves unordered; without
it those pairs are free and the outcome set can grow.

Both rule sets are precedence relations over a program's instructions, so the
set of candidate global orders is the set of linear extensions of a DAG.  The
enumerator walks extensions back to front with memoization on (remaining
instructions, memory contents); a load's value is pinned either at placement
(no program-order-earlier same-address store remains) or by the last-placed
such store, which is exactly the Max-over-global-order value rule.
"""

from __future__ import annotations

from dataclasses import dataclass

from .program import Instruction, MemOpKind, Outcome, Program
from .versioning import VersionState


class OracleBoundError(ValueError):
    """The program is too large for factorial enumeration."""


DEFAULT_MAX_ACCESSES = 12

Key = tuple[int, int]


def assign_thread_versions(program: Program, version_bits: int = 10) -> dict[Key, int | None]:
    """Version tags each thread's instructions would receive at issue, in po."""
    versions: dict[Key, int | None] = {}
    for thread in program.threads:
        state = VersionState.with_bits(version_bits)
        for ins in thread:
            versions[ins.key] = state.assign(ins.kind)
    return versions


def _fence_class(kind: MemOpKind) -> bool:
    return kind.is_fence


def _validate_order(program: Program, order) -> dict[Key, int]:
    expect = {i.key for i in program.instructions() if i.kind.is_access}
    pos = {}
    for n, key in enumerate(order):
        if key in pos:
            raise ValueError(f"order repeats instruction {key}")
        pos[key] = n
    missing = expect - set(pos)
    extra = set(pos) - expect
    if missing or extra:
        raise ValueError(f"order is not a permutation (missing {missing}, extra {extra})")
    return pos


def _ff_between(thread) -> "callable":
    """Per-thread predicate: is there a full fence strictly between two pos?"""
    prefix = [0]
    for ins in thread:
        prefix.append(prefix[-1] + (ins.kind is MemOpKind.FULL_FENCE))

    def between(x: Instruction, y: Instruction) -> bool:
        return prefix[y.po] - prefix[x.po + 1] > 0

    return between


def _rcsc_needs_edge(x: Instruction, y: Instruction, between) -> bool:
    return (
        between(x, y)
        or x.kind is MemOpKind.LOAD_ACQUIRE
        or y.kind is MemOpKind.STORE_RELEASE
        or (_fence_class(x.kind) and _fence_class(y.kind))
    )


def check_rcsc(program: Program, order) -> bool:
    """True iff ``order`` (a permutation of the program's memory accesses)
    satisfies the ordering axioms.

    A full fence is an ordering barrier, not a node with a value: its
    two-sided axioms appear as required edges between the accesses around it,
    and its fence-ordering obligations reduce to the same edges.  The value
    rule is definitional given an order; use :func:`derive_outcome` for the
    induced values.
    """
    pos = _validate_order(program, order)
    for thread in program.threads:
        between = _ff_between(thread)
        accesses = [i for i in thread if i.kind.is_access]
        for i, x in enumerate(accesses):
            for y in accesses[i + 1:]:
                if _rcsc_needs_edge(x, y, between) and pos[x.key] > pos[y.key]:
                    return False
    return True


def check_vsr(program: Program, versions: dict[Key, int | None], order) -> bool:
    """True iff ``order`` satisfies the raw version-tag ordering rules.

    ``versions`` must cover every instruction (see
    :func:`assign_thread_versions`); a missing entry is a hard error.  Full
    fences carry no tag and are unconstrained here: their effect is already
    encoded in the tags of surrounding accesses.
    """
    pos = _validate_order(program, order)
    for thread in program.threads:
        accesses = [i for i in thread if i.kind.is_access]
        for i, x in enumerate(accesses):
            vx = versions[x.key]
            for y in accesses[i + 1:]:
                vy = versions[y.key]
                need = vx < vy or (x.kind is MemOpKind.LOAD_ACQUIRE and vx == vy)
                if need and pos[x.key] > pos[y.key]:
                    return False
    return True


def derive_outcome(program: Program, order) -> Outcome:
    """Values induced by an order: each load reads the latest-placed store
    among same-address stores that precede it in program order or in the
    order itself; final memory is the last-placed store per location."""
    pos = _validate_order(program, order)
    stores = [i for i in program.instructions() if i.kind.is_store]
    regs = {}
    for load in program.loads():
        best_pos = -1
        value = program.initial_memory[load.addr]
        for s in stores:
            if s.addr != load.addr:
                continue
            po_before = s.tid == load.tid and s.po < load.po
            if po_before or pos[s.key] < pos[load.key]:
                if pos[s.key] > best_pos:
                    best_pos = pos[s.key]
                    value = s.value
        regs[(load.tid, load.dest)] = value
    mem = dict(program.initial_memory)
    for loc in mem:
        best_pos = -1
        for s in stores:
            if s.addr == loc and pos[s.key] > best_pos:
                best_pos = pos[s.key]
                mem[loc] = s.value
    return Outcome.from_maps(regs, mem)


def _precedence_edges(
    program: Program,
    semantics: str,
    strict_fence_order: bool,
    versions: dict[Key, int | None] | None,
):
    """Yield (before, after) access pairs the selected rule set pins."""
    for thread in program.threads:
        between = _ff_between(thread)
        accesses = [i for i in thread if i.kind.is_access]
        for i, x in enumerate(accesses):
            for y in accesses[i + 1:]:
                if semantics == "rcsc":
                    need = _rcsc_needs_edge(x, y, between)
                else:
                    vx, vy = versions[x.key], versions[y.key]
                    need = (
                        vx < vy
                        or (x.kind is MemOpKind.LOAD_ACQUIRE and vx == vy)
                        or (
                            strict_fence_order
                            and _fence_class(x.kind)
                            and _fence_class(y.kind)
                        )
                    )
                if need:
                    yield x, y


def enumerate_outcomes(
    program: Program,
    semantics: str = "rcsc",
    strict_fence_order: bool = True,
    max_accesses: int = DEFAULT_MAX_ACCESSES,
    version_bits: int = 10,
) -> frozenset[Outcome]:
    """All outcomes reachable under the selected rule set.

    Enumeration is factorial in the worst case; programs with more than
    ``max_accesses`` memory accesses are refused with a size diagnostic.
    """
    if semantics not in ("rcsc", "vsr"):
        raise ValueError(f"unknown semantics {semantics!r}")
    n_acc = len(program.accesses())
    if n_acc > max_accesses:
        raise OracleBoundError(
            f"program has {n_acc} memory accesses; enumeration bound is {max_accesses}"
        )

    versions = assign_thread_versions(program, version_bits) if semantics == "vsr" else None
    nodes = [i for i in program.instructions() if i.kind.is_access]
    index = {ins.key: n for n, ins in enumerate(nodes)}
    n = len(nodes)

    preds = [0] * n
    for x, y in _precedence_edges(program, semantics, strict_fence_order, versions):
        preds[index[y.key]] |= 1 << index[x.key]

    locs = sorted(program.initial_memory)
    loc_pos = {loc: i for i, loc in enumerate(locs)}
    init_mem = tuple(program.initial_memory[loc] for loc in locs)

    loads = [i for i, ins in enumerate(nodes) if ins.kind.is_load]
    load_pos = {node_i: k for k, node_i in enumerate(loads)}
    n_loads = len(loads)

    is_store = [ins.kind.is_store for ins in nodes]
    addr_pos = [loc_pos[ins.addr] for ins in nodes]
    value = [ins.value for ins in nodes]

    # For each load, the same-thread same-address stores earlier in po: these
    # are the forwarding candidates that may place after the load globally.
    pending = [0] * n
    watchers: list[list[int]] = [[] for _ in range(n)]
    for li in loads:
        lo = nodes[li]
        for si, so in enumerate(nodes):
            if is_store[si] and so.tid == lo.tid and so.po < lo.po and so.addr == lo.addr:
                pending[li] |= 1 << si
                watchers[si].append(li)

    memo: dict[tuple[int, tuple], frozenset] = {}
    empty_lv = (None,) * n_loads

    def rec(remaining: int, mem: tuple) -> frozenset:
        if remaining == 0:
            return frozenset({(empty_lv, mem)})
        key = (remaining, mem)
        hit = memo.get(key)
        if hit is not None:
            return hit
        acc = set()
        r = remaining
        while r:
            low = r & -r
            r ^= low
            x = low.bit_length() - 1
            if preds[x] & remaining:
                continue  # an ordered-before instruction is still unplaced
            nxt = remaining ^ low
            if is_store[x]:
                ap = addr_pos[x]
                mem2 = mem[:ap] + (value[x],) + mem[ap + 1:]
                watch = [
                    load_pos[li]
                    for li in watchers[x]
                    if not (remaining >> li) & 1 and not pending[li] & nxt
                ]
                for lv, fm in rec(nxt, mem2):
                    if watch:
                        l2 = list(lv)
                        for lp in watch:
                            l2[lp] = value[x]  # x is the last-placed candidate
                        acc.add((tuple(l2), fm))
                    else:
                        acc.add((lv, fm))
            else:
                sub = rec(nxt, mem)
                if pending[x] & nxt:
                    acc |= sub  # a po-earlier store still pends; it sets the value
                else:
                    lp = load_pos[x]
                    v = mem[addr_pos[x]]
                    for lv, fm in sub:
                        l2 = list(lv)
                        l2[lp] = v
                        acc.add((tuple(l2), fm))
        result = frozenset(acc)
        memo[key] = result
        return result

    full = (1 << n) - 1
    outcomes = set()
    for lv, fm in rec(full, init_mem):
        regs = {}
        for k, node_i in enumerate(loads):
            ins = nodes[node_i]
            assert lv[k] is not None
            regs[(ins.tid, ins.dest)] = lv[k]
        mem = {loc: fm[loc_pos[loc]] for loc in locs}
        outcomes.add(Outcome.from_maps(regs, mem))
    return frozenset(outcomes)


@dataclass
class EquivalenceReport:
    equal: bool
    rcsc_only: frozenset[Outcome]
    vsr_only: frozenset[Outcome]
    rcsc: frozenset[Outcome]
    vsr: frozenset[Outcome]


def equivalence_report(
    program: Program,
    strict_fence_order: bool = True,
    max_accesses: int = DEFAULT_MAX_ACCESSES,
) -> EquivalenceReport:
    """Set-difference the two outcome sets in both directions."""
    rc = enumerate_outcomes(program, "rcsc", max_accesses=max_accesses)
    vs = enumerate_outcomes(
        program, "vsr", strict_fence_order=strict_fence_order, max_accesses=max_accesses
    )
    return EquivalenceReport(
        equal=rc == vs,
        rcsc_only=frozenset(rc - vs),
        vsr_only=frozenset(vs - rc),
        rcsc=rc,
        vsr=vs,
    )
