"""blxc command line: extract | schedule | codegen | simulate | compare |
stats | gantt.

Stages communicate through files (BLX between extract and schedule, schedule
JSON between schedule and codegen), so each stage is independently testable.

Exit codes: 0 success, 1 comparison difference, 2 usage error, 3 pipeline
error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import BlxError

EXIT_OK = 0
EXIT_DIFF = 1
EXIT_USAGE = 2
EXIT_PIPELINE = 3


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlxError as err:
        print(f"blxc: error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as err:
        print(f"blxc: error: {err}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blxc",
        description="Parallelizing toolchain for block-diagram models")
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="model -> flat BLX IR")
    ex.add_argument("--model", required=True, help="MDLX model file")
    ex.add_argument("--out", required=True, help="output BLX path")
    ex.add_argument("--registry", default=None,
                    help="extra toolbox registry JSON (also $BLXC_REGISTRY)")
    ex.set_defaults(func=cmd_extract)

    sc = sub.add_parser("schedule", help="BLX + profile -> schedule + gantt")
    sc.add_argument("--blx", required=True)
    sc.add_argument("--profile", required=True,
                    help="profile XML path or builtin name (uniform4, commheavy4)")
    sc.add_argument("--max-cores", required=True,
                    help="core budget N, or A..B to sweep and keep the best")
    sc.add_argument("--split", action="append", default=[], metavar="NAME=K",
                    help="shard an element-independent block into K copies")
    sc.add_argument("--out", required=True, help="output directory")
    sc.add_argument("--overhead", type=int, default=None,
                    help="per-block dispatch overhead ns (default 20)")
    sc.add_argument("--registry", default=None)
    sc.set_defaults(func=cmd_schedule)

    cg = sub.add_parser("codegen", help="BLX + schedule -> C sources")
    cg.add_argument("--blx", required=True)
    cg.add_argument("--schedule", default=None, help="schedule JSON")
    cg.add_argument("--sequential", action="store_true",
                    help="emit the single-task baseline instead")
    cg.add_argument("--out", required=True, help="output directory")
    cg.set_defaults(func=cmd_codegen)

    si = sub.add_parser("simulate", help="interpret a model or BLX IR")
    src = si.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--blx")
    si.add_argument("--input", default=None, help="input trace JSONL")
    si.add_argument("--steps", type=int, required=True)
    si.add_argument("--seed", type=int, default=0,
                    help="seed for a synthesized input trace when --input is omitted")
    si.add_argument("--schedule", default=None,
                    help="execute this schedule instead of plain interpretation")
    si.add_argument("--out", default=None, help="output trace path (default stdout)")
    si.add_argument("--registry", default=None)
    si.set_defaults(func=cmd_simulate)

    co = sub.add_parser("compare", help="diff two traces")
    co.add_argument("a")
    co.add_argument("b")
    co.add_argument("--tol", type=float, default=0.0,
                    help="absolute tolerance (0 = bitwise)")
    co.set_defaults(func=cmd_compare)

    st = sub.add_parser("stats", help="block/line counts for a model")
    st.add_argument("--model", required=True)
    st.set_defaults(func=cmd_stats)

    ga = sub.add_parser("gantt", help="schedule JSON -> SVG")
    ga.add_argument("--schedule", required=True)
    ga.add_argument("--out", required=True)
    ga.set_defaults(func=cmd_gantt)
    return p


def _load_registry(path: str | None):
    from .registry import load_registry

    return load_registry(path)


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def cmd_extract(args) -> int:
    from .extractor import emit_blx, extract
    from .mdlx import parse_model
    from .model import validate

    model = parse_model(_read(args.model))
    report = validate(model)
    if not report.ok:
        raise BlxError(f"model is invalid:\n{report}")
    ir = extract(model, _load_registry(args.registry))
    Path(args.out).write_bytes(emit_blx(ir))
    print(f"wrote {args.out} ({len(ir.blocks)} blocks, {len(ir.vars)} vars)")
    return EXIT_OK


def _parse_core_range(text: str) -> tuple[int, int]:
    if ".." in text:
        lo, _, hi = text.partition("..")
        return int(lo), int(hi)
    return int(text), int(text)


def _load_profile(spec: str):
    from .hwprofile import load_builtin_profile, parse_profile

    if os.path.exists(spec):
        return parse_profile(_read(spec))
    try:
        return load_builtin_profile(spec)
    except FileNotFoundError:
        raise BlxError(f"profile {spec!r} is neither a file nor a builtin") from None


def cmd_schedule(args) -> int:
    from .extractor import emit_blx, parse_blx
    from .gantt import emit_gantt
    from .hwprofile import DEFAULT_DISPATCH_OVERHEAD_NS, CostModel
    from .scheduler import (ScheduleRequest, allocate, makespan_report,
                            split_data_parallel)

    ir = parse_blx(_read(args.blx))
    profile = _load_profile(args.profile)
    registry = _load_registry(args.registry)
    lo, hi = _parse_core_range(args.max_cores)
    if lo < 1:
        print("blxc: error: --max-cores must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    overhead = args.overhead if args.overhead is not None \
        else DEFAULT_DISPATCH_OVERHEAD_NS

    for spec in args.split:
        name, _, kk = spec.partition("=")
        if not kk.isdigit():
            print(f"blxc: error: bad --split {spec!r}", file=sys.stderr)
            return EXIT_USAGE
        k = int(kk)
        if k > hi:
            print(f"blxc: warning: capping split {name} at max_cores={hi}",
                  file=sys.stderr)
            k = hi
        ir = split_data_parallel(ir, name, k, registry)

    CostModel.load(overhead_ns=overhead).bind(ir, registry)

    rows = []
    for k in range(lo, hi + 1):
        sched = allocate(ScheduleRequest(ir=ir, profile=profile, max_cores=k,
                                         overhead_ns=overhead))
        rows.append((k, sched))
        print(f"max_cores={k}: makespan {sched.makespan_ns} ns, "
              f"{sched.core_count_used} cores used")
    best_k, best = min(rows, key=lambda r: (r[1].makespan_ns, r[0]))
    if lo != hi:
        print(f"best: max_cores={best_k} ({best.makespan_ns} ns)")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scheduled.blx").write_bytes(emit_blx(ir))
    (out / "schedule.json").write_text(best.to_json())
    (out / "schedule.svg").write_bytes(emit_gantt(best, title=ir.name))
    (out / "report.json").write_text(makespan_report(ir, best).to_json())
    print(f"wrote {out}/scheduled.blx, schedule.json, schedule.svg, report.json")
    return EXIT_OK


def cmd_codegen(args) -> int:
    from .codegen import emit_parallel_c, emit_sequential_c
    from .extractor import parse_blx
    from .gantt import emit_gantt
    from .scheduler import Schedule

    ir = parse_blx(_read(args.blx))
    if args.sequential:
        bundle = emit_sequential_c(ir)
    else:
        if not args.schedule:
            print("blxc: error: codegen needs --schedule or --sequential",
                  file=sys.stderr)
            return EXIT_USAGE
        sched = Schedule.from_json(Path(args.schedule).read_text())
        bundle = emit_parallel_c(ir, sched)
    written = bundle.write(args.out)
    if not args.sequential:
        svg = Path(args.out) / "schedule.svg"
        svg.write_bytes(emit_gantt(sched, title=ir.name))
        written.append(str(svg))
    for w in written:
        print(f"wrote {w}")
    return EXIT_OK


def _synth_trace(target, steps: int, seed: int):
    import numpy as np

    from .dtypes import Matrix, PointCloud, Scalar, Vector, parse_dtype
    from .extractor import FlatIR
    from .simulator import Trace

    rng = np.random.default_rng(seed)
    ports: list[tuple[str, object]] = []
    if isinstance(target, FlatIR):
        for b in target.blocks:
            if b.kind == "Inport":
                ports.append((str(b.params.get("port", b.uname)),
                              target.var_map()[b.outputs[0]].dtype))
    else:
        for b in target.root.port_blocks("Inport"):
            ports.append((b.name, parse_dtype(str(b.params["dtype"]))))
    tr = Trace()
    for _ in range(steps):
        step = {}
        for name, dt in ports:
            if isinstance(dt, Scalar):
                step[name] = float(rng.uniform(-2, 2))
            elif isinstance(dt, Vector):
                step[name] = rng.uniform(-2, 2, dt.n).tolist()
            elif isinstance(dt, Matrix):
                step[name] = rng.uniform(-2, 2, (dt.rows, dt.cols)).tolist()
            elif isinstance(dt, PointCloud):
                n = int(rng.integers(1, dt.max_n + 1))
                step[name] = rng.uniform(-10, 10, (n, 3)).tolist()
        tr.steps.append(step)
    return tr


def cmd_simulate(args) -> int:
    from .extractor import parse_blx
    from .mdlx import parse_model
    from .scheduler import Schedule
    from .simulator import Trace, execute_schedule, interpret

    registry = _load_registry(args.registry)
    target = parse_model(_read(args.model)) if args.model else parse_blx(_read(args.blx))
    if args.input:
        trace = Trace.load_jsonl(Path(args.input).read_text())
    else:
        trace = _synth_trace(target, args.steps, args.seed)
    if args.schedule:
        from .extractor import FlatIR

        if not isinstance(target, FlatIR):
            raise BlxError("--schedule execution needs --blx, not --model")
        sched = Schedule.from_json(Path(args.schedule).read_text())
        out, _log = execute_schedule(target, sched, trace, args.steps, registry)
    else:
        out = interpret(target, trace, args.steps, registry)
    text = out.dump_jsonl()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(out)} steps)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .simulator import Trace, compare_traces

    a = Trace.load_jsonl(Path(args.a).read_text())
    b = Trace.load_jsonl(Path(args.b).read_text())
    diff = compare_traces(a, b, args.tol)
    if diff.equal:
        print("traces equal")
        return EXIT_OK
    print(diff.message)
    return EXIT_DIFF


def cmd_stats(args) -> int:
    import json

    from .mdlx import parse_model
    from .model import model_stats

    stats = model_stats(parse_model(_read(args.model)))
    print(json.dumps({
        "block_count": stats.block_count,
        "line_count": stats.line_count,
        "function_code_lines": stats.function_code_lines,
        "toolbox_block_count": stats.toolbox_block_count,
    }, indent=2))
    return EXIT_OK


def cmd_gantt(args) -> int:
    from .gantt import emit_gantt
    from .scheduler import Schedule

    sched = Schedule.from_json(Path(args.schedule).read_text())
    Path(args.out).write_bytes(emit_gantt(sched))
    print(f"wrote {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
