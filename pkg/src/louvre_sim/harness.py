"""Run litmus suites, the oracle-equivalence corpus, and synthetic workloads.

Every entry point is deterministic for a given seed.  Per-repeat seeds derive
from a CRC of (base seed, test name, repeat index) so results are reproducible
across processes and machines.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import SimConfig
from .oracle import (
    DEFAULT_MAX_ACCESSES,
    EquivalenceReport,
    OracleBoundError,
    enumerate_outcomes,
    equivalence_report,
)
from .program import (
    Instruction,
    LitmusTest,
    MemOpKind,
    Outcome,
    Program,
    parse_litmus,
    serialize_litmus,
)
from .simulator import run_program
from .stats import StatsReport, mean_of


def derive_seed(base: int, *parts) -> int:
    text = ":".join([str(base)] + [str(p) for p in parts])
    return zlib.crc32(text.encode()) & 0xFFFFFFFF


# --------------------------------------------------------------------- litmus


@dataclass
class LitmusResult:
    name: str
    verdict: str                      # pass / fail / conflict / skipped
    observed: frozenset[Outcome] = frozenset()
    oracle: frozenset[Outcome] | None = None
    forbidden_hits: list[Outcome] = field(default_factory=list)
    unsound: list[Outcome] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"


def run_litmus_test(
    test: LitmusTest,
    mode: str,
    repeats: int,
    seed: int,
    config: SimConfig | None = None,
    max_accesses: int = DEFAULT_MAX_ACCESSES,
) -> LitmusResult:
    """Run one test ``repeats`` times under timing jitter and check every
    observed outcome against the forbidden predicates and the oracle set."""
    program = test.program
    name = program.name or "unnamed"
    base = config or SimConfig()
    cfg = replace(base, mode=mode, trace=False, lat_jitter=max(base.lat_jitter, 8))
    try:
        oracle = enumerate_outcomes(program, "rcsc", max_accesses=max_accesses)
    except OracleBoundError as e:
        return LitmusResult(name=name, verdict="skipped", notes=[str(e)])

    result = LitmusResult(name=name, verdict="pass", oracle=oracle)
    for pred in test.forbidden:
        stated_ok = [o for o in oracle if pred.matches(o)]
        if stated_ok:
            result.verdict = "conflict"
            result.notes.append(
                f"test-specification conflict: forbidden predicate matches {len(stated_ok)} oracle-allowed outcome(s)"
            )
    observed = set()
    for i in range(repeats):
        run = run_program(program, cfg, seed=derive_seed(seed, name, mode, i))
        observed.add(run.outcome)
    result.observed = frozenset(observed)
    for o in observed:
        if any(pred.matches(o) for pred in test.forbidden):
            result.forbidden_hits.append(o)
        if o not in oracle:
            result.unsound.append(o)
    if result.forbidden_hits or result.unsound:
        result.verdict = "fail"
    return result


def load_litmus_paths(path: str | Path) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        return sorted(p.glob("*.litmus"))
    return [p]


def run_litmus(
    path: str | Path,
    mode: str,
    repeats: int = 1000,
    seed: int = 0,
    config: SimConfig | None = None,
) -> list[LitmusResult]:
    results = []
    for f in load_litmus_paths(path):
        try:
            test = parse_litmus(f.read_text())
            if not test.program.name:
                test.program.name = f.stem
        except ValueError as e:
            results.append(LitmusResult(name=f.stem, verdict="fail", notes=[f"parse error: {e}"]))
            continue
        results.append(run_litmus_test(test, mode, repeats, seed, config))
    return results


# ------------------------------------------------------- random program corpus


def random_program(
    rng: random.Random,
    n_threads: int | None = None,
    max_ops: int = 5,
    max_fences: int = 2,
    n_locs: int = 3,
    max_accesses: int = 10,
    name: str = "",
) -> Program:
    """A small random multi-threaded program within the given shape caps.

    ``max_ops`` bounds memory accesses per thread (synchronizing ones
    included) and ``max_fences`` bounds ordering instructions per thread.
    """
    if n_threads is None:
        n_threads = rng.choice((2, 2, 3))
    value_counter = 1
    threads: list[list[Instruction]] = []
    budget = max_accesses
    for tid in range(n_threads):
        remaining_threads = n_threads - tid - 1
        cap = min(max_ops, budget - remaining_threads)  # leave >=1 access per later thread
        n_ops = rng.randint(1, max(1, cap))
        budget -= n_ops
        fence_budget = rng.randint(0, max_fences)
        kinds: list[MemOpKind] = []
        for _ in range(n_ops):
            if fence_budget and rng.random() < 0.45:
                kinds.append(rng.choice((MemOpKind.LOAD_ACQUIRE, MemOpKind.STORE_RELEASE)))
                fence_budget -= 1
            else:
                kinds.append(rng.choice((MemOpKind.LOAD, MemOpKind.STORE)))
        # Full fences ride on top of the access count.
        for _ in range(fence_budget):
            if rng.random() < 0.5:
                kinds.insert(rng.randint(0, len(kinds)), MemOpKind.FULL_FENCE)
        instrs: list[Instruction] = []
        reg = 0
        for kind in kinds:
            po = len(instrs)
            if kind is MemOpKind.FULL_FENCE:
                instrs.append(Instruction(tid, po, kind))
            elif kind.is_load:
                instrs.append(Instruction(tid, po, kind, addr=rng.randrange(n_locs), dest=reg))
                reg += 1
            else:
                instrs.append(Instruction(tid, po, kind, addr=rng.randrange(n_locs), value=value_counter))
                value_counter += 1
        threads.append(instrs)
    return Program(
        threads=threads,
        initial_memory={loc: 0 for loc in range(n_locs)},
        name=name,
        loc_names={i: chr(ord("A") + i) for i in range(n_locs)},
    )


@dataclass
class CorpusSummary:
    total: int
    strict_equal: int
    strict_divergent: list[tuple[str, EquivalenceReport]]
    relaxed_equal: int
    relaxed_divergent: list[tuple[str, EquivalenceReport]]

    @property
    def all_strict_equal(self) -> bool:
        return self.strict_equal == self.total


def run_equivalence_corpus(
    count: int,
    seed: int = 0,
    n_threads: int | None = None,
    max_ops: int = 5,
    max_fences: int = 2,
    max_accesses: int = 10,
    keep_reproducers: int = 20,
) -> CorpusSummary:
    """Generate ``count`` random programs and compare the two outcome sets
    under both strict-fence-order settings.  Divergent programs are kept
    verbatim as reproducers."""
    rng = random.Random(seed)
    strict_equal = relaxed_equal = 0
    strict_div: list[tuple[str, EquivalenceReport]] = []
    relaxed_div: list[tuple[str, EquivalenceReport]] = []
    for i in range(count):
        program = random_program(
            rng,
            n_threads=n_threads,
            max_ops=max_ops,
            max_fences=max_fences,
            max_accesses=max_accesses,
            name=f"corpus-{seed}-{i}",
        )
        strict = equivalence_report(program, strict_fence_order=True)
        relaxed = equivalence_report(program, strict_fence_order=False)
        text = serialize_litmus(LitmusTest(program=program))
        if strict.equal:
            strict_equal += 1
        elif len(strict_div) < keep_reproducers:
            strict_div.append((text, strict))
        if relaxed.equal:
            relaxed_equal += 1
        elif len(relaxed_div) < keep_reproducers:
            relaxed_div.append((text, relaxed))
    return CorpusSummary(
        total=count,
        strict_equal=strict_equal,
        strict_divergent=strict_div,
        relaxed_equal=relaxed_equal,
        relaxed_divergent=relaxed_div,
    )


# ------------------------------------------------------------------ benchmarks


@dataclass
class SyntheticWorkloadSpec:
    """Shape of a random straight-line workload.

    ``store_fraction`` + ``load_fraction`` + the implied fence fraction sum
    to 1; ``fence_mix`` splits the fence fraction between load-acquire,
    store-release, and full fences (one-way fences twice as frequent as full
    by default).  ``address_pool`` overrides ``miss_rate``-based sizing when
    set.
    """

    instructions: int = 10_000
    cores: int = 4
    store_fraction: float = 0.4545
    load_fraction: float = 0.4545
    fence_mix: tuple[int, int, int] = (2, 2, 1)
    miss_rate: float = 0.5
    address_pool: int | None = None
    seed: int = 0

    def fence_fraction(self) -> float:
        f = 1.0 - self.store_fraction - self.load_fraction
        if f < -1e-9:
            raise ValueError("store_fraction + load_fraction exceeds 1")
        return max(f, 0.0)

    def resolve_pool(self, config: SimConfig) -> int:
        if self.address_pool is not None:
            return self.address_pool
        _, _, l3 = config.cache_lines()
        if self.miss_rate >= 1.0:
            return l3 * 64
        # Steady-state hit probability under uniform reuse is roughly
        # capacity / pool, so pool = capacity / (1 - miss).
        return max(8, int(l3 / max(1e-6, 1.0 - self.miss_rate)))

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticWorkloadSpec":
        kwargs = dict(d)
        if "fence_mix" in kwargs:
            kwargs["fence_mix"] = tuple(kwargs["fence_mix"])
        return cls(**kwargs)


def build_workload(spec: SyntheticWorkloadSpec, config: SimConfig, seed: int | None = None) -> Program:
    """Materialize the instruction streams for one seed.  The same (spec,
    seed) pair always yields the same program, so modes can be compared on an
    identical committed instruction sequence."""
    rng = random.Random(spec.seed if seed is None else seed)
    pool = spec.resolve_pool(config)
    per_core = max(1, spec.instructions // spec.cores)
    fence_frac = spec.fence_fraction()
    mix_total = sum(spec.fence_mix)
    value_counter = 1
    threads = []
    for tid in range(spec.cores):
        instrs: list[Instruction] = []
        reg = 0
        for _ in range(per_core):
            po = len(instrs)
            r = rng.random()
            if r < fence_frac:
                pick = rng.random() * mix_total
                if pick < spec.fence_mix[0]:
                    instrs.append(
                        Instruction(tid, po, MemOpKind.LOAD_ACQUIRE, addr=rng.randrange(pool), dest=reg)
                    )
                    reg += 1
                elif pick < spec.fence_mix[0] + spec.fence_mix[1]:
                    instrs.append(
                        Instruction(tid, po, MemOpKind.STORE_RELEASE, addr=rng.randrange(pool), value=value_counter)
                    )
                    value_counter += 1
                else:
                    instrs.append(Instruction(tid, po, MemOpKind.FULL_FENCE))
            elif r < fence_frac + spec.load_fraction:
                instrs.append(Instruction(tid, po, MemOpKind.LOAD, addr=rng.randrange(pool), dest=reg))
                reg += 1
            else:
                instrs.append(Instruction(tid, po, MemOpKind.STORE, addr=rng.randrange(pool), value=value_counter))
                value_counter += 1
        threads.append(instrs)
    return Program(
        threads=threads,
        initial_memory={loc: 0 for loc in range(pool)},
        name=f"synthetic-{spec.seed if seed is None else seed}",
    )


def run_benchmark(
    spec: SyntheticWorkloadSpec,
    modes: tuple[str, ...] = ("baseline", "louvre"),
    config: SimConfig | None = None,
    seed: int | None = None,
) -> dict[str, StatsReport]:
    """Run one workload under each mode; identical instruction stream per seed."""
    base = config or SimConfig()
    program = build_workload(spec, base, seed)
    reports = {}
    committed = {}
    for mode in modes:
        cfg = replace(base, mode=mode)
        result = run_program(program, cfg, seed=derive_seed(spec.seed if seed is None else seed, mode))
        reports[mode] = result.stats
        committed[mode] = result.committed
    seqs = {m: sorted(committed[m]) for m in committed}
    vals = list(seqs.values())
    assert all(v == vals[0] for v in vals), "modes committed different instruction streams"
    return reports


def run_benchmark_suite(
    spec: SyntheticWorkloadSpec,
    seeds: list[int],
    modes: tuple[str, ...] = ("baseline", "louvre"),
    config: SimConfig | None = None,
) -> dict[str, list[StatsReport]]:
    out: dict[str, list[StatsReport]] = {m: [] for m in modes}
    for s in seeds:
        for mode, report in run_benchmark(spec, modes, config, seed=s).items():
            out[mode].append(report)
    return out


def benchmark_deltas(reports: dict[str, list[StatsReport]]) -> dict[str, float | None]:
    """Relative improvements of louvre over baseline (positive = louvre better)."""
    base, louvre = reports["baseline"], reports["louvre"]

    def reduction(attr: str) -> float | None:
        b, l = mean_of(base, attr), mean_of(louvre, attr)
        if b is None or l is None or b == 0:
            return None
        return (b - l) / b

    ipc_b, ipc_l = mean_of(base, "ipc"), mean_of(louvre, "ipc")
    return {
        "fence_rob_residency_reduction": reduction("fence_rob_residency"),
        "scheduling_stall_reduction": reduction("scheduling_stall_cycles"),
        "store_latency_reduction": reduction("store_latency"),
        "ipc_gain": None if not ipc_b else (ipc_l - ipc_b) / ipc_b,
    }
