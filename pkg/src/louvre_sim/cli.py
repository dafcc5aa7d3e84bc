"""Command-line entry point.

Subcommands:
  litmus <dir|file>   run a litmus suite under one mode and verdict each test
  oracle <file>       enumerate the outcome set of one litmus file
  equiv               random-program equivalence sweep of the two rule sets
  bench               synthetic workload comparison across modes

Exit code is 0 iff every verdict passes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import SimConfig, parse_config
from .harness import (
    SyntheticWorkloadSpec,
    benchmark_deltas,
    run_benchmark_suite,
    run_equivalence_corpus,
    run_litmus,
)
from .oracle import enumerate_outcomes
from .program import parse_litmus
from .stats import csv_header, csv_row, mean_of


def _load_config(path: str | None) -> SimConfig:
    if path is None:
        return SimConfig()
    return parse_config(Path(path).read_text())


def _outcome_json(program, outcomes) -> list:
    rows = []
    for o in sorted(outcomes, key=lambda o: (o.regs, o.mem)):
        rows.append(
            {
                "regs": {f"T{t}:r{r}": v for (t, r), v in o.regs},
                "mem": {program.loc_name(l): v for l, v in o.mem},
            }
        )
    return rows


def cmd_litmus(args) -> int:
    config = _load_config(args.config)
    results = run_litmus(args.path, args.mode, repeats=args.repeats, seed=args.seed, config=config)
    rc = 0
    for r in results:
        line = f"{r.name:32s} {r.verdict:8s} observed={len(r.observed)}"
        if r.oracle is not None:
            line += f" oracle={len(r.oracle)}"
        print(line)
        for note in r.notes:
            print(f"    note: {note}")
        for o in r.forbidden_hits:
            print(f"    forbidden outcome observed: {o.describe()}")
        for o in r.unsound:
            print(f"    outcome outside oracle set: {o.describe()}")
        if not r.ok:
            rc = 1
    return rc


def cmd_oracle(args) -> int:
    test = parse_litmus(Path(args.file).read_text())
    outcomes = enumerate_outcomes(
        test.program,
        semantics=args.semantics,
        strict_fence_order=args.strict_fence_order == "on",
        max_accesses=args.max_accesses,
    )
    print(json.dumps(_outcome_json(test.program, outcomes), indent=2, sort_keys=True))
    return 0


def cmd_equiv(args) -> int:
    summary = run_equivalence_corpus(
        count=args.count,
        seed=args.seed,
        n_threads=args.threads,
        max_ops=args.ops,
        max_fences=args.fences,
    )
    print(f"programs: {summary.total}")
    print(f"strict fence order: {summary.strict_equal}/{summary.total} equal")
    print(f"relaxed fence order: {summary.relaxed_equal}/{summary.total} equal")
    for text, report in summary.strict_divergent:
        print("strict divergence reproducer:")
        print(text)
        for o in sorted(report.rcsc_only, key=lambda o: (o.regs, o.mem)):
            print(f"  rcsc-only: {o.describe()}")
        for o in sorted(report.vsr_only, key=lambda o: (o.regs, o.mem)):
            print(f"  vsr-only:  {o.describe()}")
    return 0 if summary.all_strict_equal else 1


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    spec = SyntheticWorkloadSpec.from_dict(json.loads(Path(args.spec).read_text()))
    modes = tuple(args.modes.split(","))
    seeds = [spec.seed + i for i in range(args.seeds)]
    reports = run_benchmark_suite(spec, seeds, modes, config)

    print(csv_header()) if args.csv else None
    for mode in modes:
        for r in reports[mode]:
            if args.csv:
                print(csv_row(r))
        if not args.csv:
            print(
                f"{mode:9s} ipc={mean_of(reports[mode], 'ipc'):.4f}"
                f" residency={_fmt(mean_of(reports[mode], 'fence_rob_residency'))}"
                f" sched_stalls={_fmt(mean_of(reports[mode], 'scheduling_stall_cycles'))}"
                f" store_lat={_fmt(mean_of(reports[mode], 'store_latency'))}"
                f" squashes={_fmt(mean_of(reports[mode], 'squash_count'))}"
                f" avoided={_fmt(mean_of(reports[mode], 'avoided_squash_count'))}"
            )
    if set(modes) >= {"baseline", "louvre"}:
        deltas = benchmark_deltas(reports)
        if not args.csv:
            for k, v in deltas.items():
                print(f"{k}: {'n/a' if v is None else f'{v * 100:.1f}%'}")
    if args.out:
        payload = {
            mode: [r.to_dict() for r in rs] for mode, rs in reports.items()
        }
        if set(modes) >= {"baseline", "louvre"}:
            payload["deltas"] = benchmark_deltas(reports)
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.1f}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="louvre-sim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("litmus", help="run a litmus test directory or file")
    lp.add_argument("path")
    lp.add_argument("--mode", choices=("baseline", "louvre"), default="louvre")
    lp.add_argument("--repeats", type=int, default=1000)
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--config", default=None, help="key=value config file")
    lp.set_defaults(fn=cmd_litmus)

    op = sub.add_parser("oracle", help="enumerate allowed outcomes of one test")
    op.add_argument("file")
    op.add_argument("--semantics", choices=("rcsc", "vsr"), default="rcsc")
    op.add_argument("--strict-fence-order", choices=("on", "off"), default="on")
    op.add_argument("--max-accesses", type=int, default=12)
    op.set_defaults(fn=cmd_oracle)

    ep = sub.add_parser("equiv", help="random-program equivalence sweep")
    ep.add_argument("--count", type=int, default=100)
    ep.add_argument("--threads", type=int, default=None)
    ep.add_argument("--ops", type=int, default=5)
    ep.add_argument("--fences", type=int, default=2)
    ep.add_argument("--seed", type=int, default=0)
    ep.set_defaults(fn=cmd_equiv)

    bp = sub.add_parser("bench", help="synthetic workload comparison")
    bp.add_argument("--spec", required=True, help="JSON workload spec file")
    bp.add_argument("--modes", default="baseline,louvre")
    bp.add_argument("--seeds", type=int, default=1, help="number of seeds (spec.seed + i)")
    bp.add_argument("--config", default=None)
    bp.add_argument("--out", default=None, help="write a JSON report here")
    bp.add_argument("--csv", action="store_true")
    bp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
