"""Instructions, programs, litmus tests, and the litmus text format.

Programs are straight-line per-thread lists of loads, stores, and fences over
abstract memory locations.  A location stands for a whole cache line unless a
false-sharing map aliases several locations onto one line.  Values are plain
integers; ordering is the only thing under study, so there is no arithmetic
and there are no branches.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

MAX_THREADS = 8


class MemOpKind(Enum):
    LOAD = "ld"
    STORE = "st"
    LOAD_ACQUIRE = "ldar"
    STORE_RELEASE = "stlr"
    FULL_FENCE = "fence"

    @property
    def is_load(self) -> bool:
        return self in (MemOpKind.LOAD, MemOpKind.LOAD_ACQUIRE)

    @property
    def is_store(self) -> bool:
        return self in (MemOpKind.STORE, MemOpKind.STORE_RELEASE)

    @property
    def is_access(self) -> bool:
        """True for anything that touches memory (everything but a full fence)."""
        return self is not MemOpKind.FULL_FENCE

    @property
    def is_fence(self) -> bool:
        """True for the three ordering instructions."""
        return self in (MemOpKind.LOAD_ACQUIRE, MemOpKind.STORE_RELEASE, MemOpKind.FULL_FENCE)


@dataclass(frozen=True)
class Instruction:
    """One static instruction: (tid, po) is unique within a program."""

    tid: int
    po: int
    kind: MemOpKind
    addr: int | None = None
    value: int | None = None
    dest: int | None = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.tid, self.po)


@dataclass
class Program:
    """Per-thread instruction lists plus initial memory contents.

    Immutable by convention after construction; every location referenced by
    an instruction must appear in ``initial_memory`` (0 by default).
    """

    threads: list[list[Instruction]]
    initial_memory: dict[int, int]
    name: str = ""
    loc_names: dict[int, str] = field(default_factory=dict)

    def instructions(self):
        for thread in self.threads:
            yield from thread

    def instr(self, tid: int, po: int) -> Instruction:
        return self.threads[tid][po]

    def accesses(self):
        return [i for i in self.instructions() if i.kind.is_access]

    def loads(self):
        return [i for i in self.instructions() if i.kind.is_load]

    def loc_name(self, loc: int) -> str:
        return self.loc_names.get(loc, f"L{loc}")

    def fence_count(self) -> int:
        return sum(1 for i in self.instructions() if i.kind.is_fence)


@dataclass(frozen=True)
class Outcome:
    """Final architectural state: one register value per load, plus memory.

    Stored as sorted tuples so outcomes are hashable and canonically ordered.
    """

    regs: tuple[tuple[tuple[int, int], int], ...]
    mem: tuple[tuple[int, int], ...]

    @classmethod
    def from_maps(cls, regs: dict, mem: dict) -> "Outcome":
        return cls(tuple(sorted(regs.items())), tuple(sorted(mem.items())))

    def regs_dict(self) -> dict[tuple[int, int], int]:
        return dict(self.regs)

    def mem_dict(self) -> dict[int, int]:
        return dict(self.mem)

    def describe(self, program: Program | None = None) -> str:
        regs = " ".join(f"T{t}:r{r}={v}" for (t, r), v in self.regs)
        if program is not None:
            mem = " ".join(f"{program.loc_name(l)}={v}" for l, v in self.mem)
        else:
            mem = " ".join(f"L{l}={v}" for l, v in self.mem)
        return f"[{regs} | {mem}]"


@dataclass(frozen=True)
class OutcomePredicate:
    """Partial outcome: a conjunction of register and final-memory conditions."""

    regs: tuple[tuple[tuple[int, int], int], ...] = ()
    mem: tuple[tuple[int, int], ...] = ()

    def matches(self, outcome: Outcome) -> bool:
        rd = outcome.regs_dict()
        md = outcome.mem_dict()
        return all(rd.get(k) == v for k, v in self.regs) and all(
            md.get(l) == v for l, v in self.mem
        )


@dataclass
class LitmusTest:
    program: Program
    forbidden: list[OutcomePredicate] = field(default_factory=list)
    allowed: list[OutcomePredicate] = field(default_factory=list)


class LitmusParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


_RE_THREAD = re.compile(r"^T(\d+)\s*:$")
_RE_THREAD_EMPTY = re.compile(r"^T(\d+)\s*\{\s*\}$")
_RE_REG = re.compile(r"^r(\d+)$")
_RE_ADDR = re.compile(r"^\[(\w+)\]$")
_RE_COND_REG = re.compile(r"^T(\d+):r(\d+)=(-?\d+)$")
_RE_COND_MEM = re.compile(r"^\[?(\w+?)\]?=(-?\d+)$")


def parse_litmus(text: str) -> LitmusTest:
    """Parse the line-oriented litmus format into a validated test.

    Directives: ``name:``, ``init:``, ``T<n>:`` (or ``T<n> {}`` for an empty
    thread), ``forbidden:``, ``allowed:``.  Instructions: ``ld r<n> [X]``,
    ``st [X] <v>``, ``ldar r<n> [X]``, ``stlr [X] <v>``, ``fence``.
    Predicates are ``&``-joined conditions ``T<n>:r<k>=<v>`` or ``X=<v>``.
    """
    name = ""
    init_pairs: list[tuple[str, int]] = []
    thread_bodies: dict[int, list[tuple[int, str]]] = {}
    forbidden_raw: list[tuple[int, str]] = []
    allowed_raw: list[tuple[int, str]] = []
    current_tid: int | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RE_THREAD.match(line)
        if m:
            tid = int(m.group(1))
            if tid in thread_bodies:
                raise LitmusParseError(f"duplicate thread id T{tid}", line_no)
            thread_bodies[tid] = []
            current_tid = tid
            continue
        m = _RE_THREAD_EMPTY.match(line)
        if m:
            tid = int(m.group(1))
            if tid in thread_bodies:
                raise LitmusParseError(f"duplicate thread id T{tid}", line_no)
            thread_bodies[tid] = []
            current_tid = None
            continue
        if line.startswith("name:"):
            name = line[len("name:"):].strip()
            current_tid = None
            continue
        if line.startswith("init:"):
            body = line[len("init:"):].replace(",", " ")
            for tok in body.split():
                if "=" not in tok:
                    raise LitmusParseError(f"bad init entry {tok!r}", line_no)
                loc, val = tok.split("=", 1)
                try:
                    init_pairs.append((loc.strip(), int(val)))
                except ValueError:
                    raise LitmusParseError(f"bad init value {tok!r}", line_no) from None
            current_tid = None
            continue
        if line.startswith("forbidden:"):
            forbidden_raw.append((line_no, line[len("forbidden:"):].strip()))
            current_tid = None
            continue
        if line.startswith("allowed:"):
            allowed_raw.append((line_no, line[len("allowed:"):].strip()))
            current_tid = None
            continue
        if current_tid is None:
            raise LitmusParseError(f"instruction outside a thread block: {line!r}", line_no)
        thread_bodies[current_tid].append((line_no, line))

    if not thread_bodies:
        raise LitmusParseError("no thread blocks found")
    tids = sorted(thread_bodies)
    if tids != list(range(len(tids))):
        raise LitmusParseError(f"thread ids must be contiguous from 0, got {tids}")

    loc_ids: dict[str, int] = {}

    def loc_id(tok: str) -> int:
        if tok not in loc_ids:
            loc_ids[tok] = len(loc_ids)
        return loc_ids[tok]

    initial_memory: dict[int, int] = {}
    for loc, val in init_pairs:
        initial_memory[loc_id(loc)] = val

    threads: list[list[Instruction]] = []
    for tid in tids:
        instrs: list[Instruction] = []
        for line_no, line in thread_bodies[tid]:
            instrs.append(_parse_instruction(tid, len(instrs), line, line_no, loc_id))
        threads.append(instrs)

    def parse_predicate(line_no: int, body: str) -> OutcomePredicate:
        regs = []
        mem = []
        for cond in body.split("&"):
            cond = cond.strip()
            m = _RE_COND_REG.match(cond)
            if m:
                tid, reg, val = int(m.group(1)), int(m.group(2)), int(m.group(3))
                if tid >= len(threads):
                    raise LitmusParseError(f"predicate names unknown thread T{tid}", line_no)
                regs.append(((tid, reg), val))
                continue
            m = _RE_COND_MEM.match(cond)
            if m:
                mem.append((loc_id(m.group(1)), int(m.group(2))))
                continue
            raise LitmusParseError(f"bad predicate condition {cond!r}", line_no)
        return OutcomePredicate(tuple(regs), tuple(mem))

    forbidden = [parse_predicate(n, b) for n, b in forbidden_raw]
    allowed = [parse_predicate(n, b) for n, b in allowed_raw]

    for loc in loc_ids.values():
        initial_memory.setdefault(loc, 0)

    program = Program(
        threads=threads,
        initial_memory=initial_memory,
        name=name,
        loc_names={v: k for k, v in loc_ids.items()},
    )
    problems = validate(program)
    if problems:
        raise LitmusParseError("; ".join(problems))
    return LitmusTest(program=program, forbidden=forbidden, allowed=allowed)


def _parse_instruction(tid, po, line, line_no, loc_id) -> Instruction:
    toks = line.split()
    op = toks[0]
    if op == "fence":
        if len(toks) != 1:
            raise LitmusParseError("fence takes no address", line_no)
        return Instruction(tid, po, MemOpKind.FULL_FENCE)
    if op in ("ld", "ldar"):
        kind = MemOpKind.LOAD if op == "ld" else MemOpKind.LOAD_ACQUIRE
        if len(toks) != 3:
            raise LitmusParseError(f"{op} needs a destination register and an address", line_no)
        m = _RE_REG.match(toks[1])
        if not m:
            raise LitmusParseError(f"{op} without destination register", line_no)
        a = _RE_ADDR.match(toks[2])
        if not a:
            raise LitmusParseError(f"bad address {toks[2]!r}", line_no)
        return Instruction(tid, po, kind, addr=loc_id(a.group(1)), dest=int(m.group(1)))
    if op in ("st", "stlr"):
        kind = MemOpKind.STORE if op == "st" else MemOpKind.STORE_RELEASE
        if len(toks) != 3:
            raise LitmusParseError(f"{op} needs an address and a value", line_no)
        a = _RE_ADDR.match(toks[1])
        if not a:
            raise LitmusParseError(f"bad address {toks[1]!r}", line_no)
        try:
            val = int(toks[2])
        except ValueError:
            raise LitmusParseError(f"bad store value {toks[2]!r}", line_no) from None
        return Instruction(tid, po, kind, addr=loc_id(a.group(1)), value=val)
    raise LitmusParseError(f"unknown instruction {op!r}", line_no)


def serialize_litmus(test: LitmusTest) -> str:
    """Render a test back to litmus text; inverse of :func:`parse_litmus`."""
    p = test.program
    lines = []
    if p.name:
        lines.append(f"name: {p.name}")
    if p.initial_memory:
        init = " ".join(f"{p.loc_name(l)}={p.initial_memory[l]}" for l in sorted(p.initial_memory))
        lines.append(f"init: {init}")
    for tid, thread in enumerate(p.threads):
        lines.append(f"T{tid}:")
        for ins in thread:
            lines.append("  " + _render_instruction(p, ins))

    def render_pred(pred: OutcomePredicate) -> str:
        conds = [f"T{t}:r{r}={v}" for (t, r), v in pred.regs]
        conds += [f"{p.loc_name(l)}={v}" for l, v in pred.mem]
        return " & ".join(conds)

    for pred in test.forbidden:
        lines.append(f"forbidden: {render_pred(pred)}")
    for pred in test.allowed:
        lines.append(f"allowed: {render_pred(pred)}")
    return "\n".join(lines) + "\n"


def _render_instruction(p: Program, ins: Instruction) -> str:
    if ins.kind is MemOpKind.FULL_FENCE:
        return "fence"
    loc = p.loc_name(ins.addr)
    if ins.kind.is_load:
        return f"{ins.kind.value} r{ins.dest} [{loc}]"
    return f"{ins.kind.value} [{loc}] {ins.value}"


def validate(program: Program) -> list[str]:
    """Check program invariants; returns one diagnostic string per violation."""
    problems = []
    if len(program.threads) > MAX_THREADS:
        problems.append(f"thread count exceeds {MAX_THREADS}")
    for tid, thread in enumerate(program.threads):
        pos = [ins.po for ins in thread]
        if pos != list(range(len(thread))):
            problems.append(f"T{tid}: non-contiguous program order {pos}")
        seen_dest = set()
        for ins in thread:
            if ins.tid != tid:
                problems.append(f"T{tid}: instruction carries wrong thread id {ins.tid}")
            if ins.kind is MemOpKind.FULL_FENCE:
                if ins.addr is not None or ins.value is not None or ins.dest is not None:
                    problems.append(f"T{tid} po{ins.po}: fence with address or operand")
                continue
            if ins.addr is None:
                problems.append(f"T{tid} po{ins.po}: memory access without address")
            elif ins.addr not in program.initial_memory:
                problems.append(
                    f"T{tid} po{ins.po}: address {program.loc_name(ins.addr)} missing from initial memory"
                )
            if ins.kind.is_load:
                if ins.dest is None:
                    problems.append(f"T{tid} po{ins.po}: load without destination register")
                elif ins.dest in seen_dest:
                    problems.append(f"T{tid} po{ins.po}: destination register r{ins.dest} reused")
                else:
                    seen_dest.add(ins.dest)
                if ins.value is not None:
                    problems.append(f"T{tid} po{ins.po}: load with a store value")
            if ins.kind.is_store and ins.value is None:
                problems.append(f"T{tid} po{ins.po}: store without value")
    return problems
