"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria 1-8 need no C
toolchain; criterion 9 (compiled-code equivalence) runs only when a C99
compiler is available and otherwise skips.
"""

import math
import random
import shutil
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from blxc.codegen import emit_parallel_c, emit_sequential_c
from blxc.extractor import emit_blx, extract
from blxc.gantt import emit_gantt
from blxc.kernels import (kernel_random_downsample, kernel_stanley_steer,
                          kernel_voxel_grid)
from blxc.model import model_stats
from blxc.scheduler import (ScheduleRequest, allocate, brute_force_allocate,
                            check_schedule, split_data_parallel)
from blxc.simulator import Trace, compare_traces, interpret

from gen import gen_dag_ir, gen_model, gen_profile, gen_trace

REPO = Path(__file__).resolve().parents[1]


@contextmanager
def criterion(number: int, title: str):
    t0 = time.time()
    try:
        yield
    except BaseException:
        print(f"FAIL  criterion {number}: {title}")
        raise
    print(f"PASS  criterion {number}: {title} ({time.time() - t0:.1f}s)")


def test_criterion_1_extraction_equivalence(registry, cases):
    with criterion(1, "extraction equivalence, 3 benchmarks + 50 random "
                      "models, bitwise over 100 steps"):
        for case in cases.values():
            ir = extract(case.model_toolbox, registry)
            a = interpret(case.model_toolbox, case.input_trace, 100, registry)
            b = interpret(ir, case.input_trace, 100, registry)
            assert compare_traces(a, b, 0.0).equal, case.name
        for seed in range(50):
            rng = random.Random(200_000 + seed)
            m = gen_model(rng, max_blocks=rng.randint(8, 30))
            ir = extract(m, registry)
            tr = gen_trace(rng, m, 100)
            a = interpret(m, tr, 100, registry)
            b = interpret(ir, tr, 100, registry)
            d = compare_traces(a, b, 0.0)
            assert d.equal, f"random model seed {seed}: {d.message}"


def test_criterion_2_schedule_validity_and_oracle_bound():
    with criterion(2, "schedule validity on 200 random DAGs; list scheduler "
                      "within 1.3x of brute-force optimum on 150 instances"):
        for seed in range(200):
            rng = random.Random(300_000 + seed)
            ir = gen_dag_ir(rng, rng.randint(5, 50))
            prof = gen_profile(rng)
            k = rng.randint(1, len(prof.cores))
            sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=k))
            check_schedule(ir, prof, sched)
        worst = 0.0
        for seed in range(150):
            rng = random.Random(7000 + seed)
            n = rng.randint(4, 12)
            ir = gen_dag_ir(rng, n)
            prof = gen_profile(rng)
            k = min(rng.randint(2, 3), len(prof.cores))
            req = ScheduleRequest(ir=ir, profile=prof, max_cores=k)
            heft = allocate(req)
            opt = brute_force_allocate(req)
            ratio = heft.makespan_ns / opt.makespan_ns
            worst = max(worst, ratio)
            assert ratio <= 1.3, f"seed {seed}: ratio {ratio:.3f}"
        print(f"  [worst list/optimal ratio: {worst:.3f}]")


def test_criterion_3_two_core_optimum(registry, cases, commheavy4, cost_model):
    with criterion(3, "trajectory_follower on commheavy4: makespan(2) < "
                      "makespan(1) and makespan(2) <= min(makespan(3), "
                      "makespan(4))"):
        ir = extract(cases["trajectory_follower"].model_toolbox, registry)
        cost_model.bind(ir, registry)
        ms = {k: allocate(ScheduleRequest(ir=ir, profile=commheavy4,
                                          max_cores=k)).makespan_ns
              for k in (1, 2, 3, 4)}
        print(f"  [makespans: {ms}]")
        assert ms[2] < ms[1]
        assert ms[2] <= min(ms[3], ms[4])


def test_criterion_4_data_parallel_match(registry, cases, uniform4, cost_model):
    with criterion(4, "k=4 split of the designated kernel on uniform4 uses "
                      "exactly 4 cores at <= 0.5x the sequential estimate"):
        case = cases["random_downsample_filter"]
        ir = extract(case.model_toolbox, registry)
        cost_model.bind(ir, registry)
        seq = allocate(ScheduleRequest(ir=ir, profile=uniform4, max_cores=1))
        split = split_data_parallel(ir, case.split_block, 4, registry)
        cost_model.bind(split, registry)
        par = allocate(ScheduleRequest(ir=split, profile=uniform4, max_cores=4))
        print(f"  [sequential {seq.makespan_ns} ns, split {par.makespan_ns} ns, "
              f"{par.core_count_used} cores]")
        assert par.core_count_used == 4
        assert par.makespan_ns <= 0.5 * seq.makespan_ns


def test_criterion_5_toolbox_reduction(cases):
    with criterion(5, "with-toolbox variants have < 0.5x the blocks of the "
                      "expanded variants (both downsample cases)"):
        for name in ("voxel_grid_downsample_filter", "random_downsample_filter"):
            tb = model_stats(cases[name].model_toolbox).block_count
            ex = model_stats(cases[name].model_expanded).block_count
            print(f"  [{name}: {tb} vs {ex} blocks]")
            assert tb < 0.5 * ex


def test_criterion_6_kernel_properties():
    with criterion(6, "kernel properties: voxel oracle/membership, downsample "
                      "size+subsequence+determinism, Stanley symmetry/bound/"
                      "closed form"):
        rng = np.random.default_rng(606)
        for _ in range(100):
            n = int(rng.integers(1, 150))
            pts = rng.uniform(-6, 6, (n, 3))
            voxel = float(rng.uniform(0.25, 2.5))
            out = kernel_voxel_grid(pts, voxel)
            keys = {(math.floor(p[0] / voxel), math.floor(p[1] / voxel),
                     math.floor(p[2] / voxel)) for p in pts}
            assert out.shape[0] == len(keys)
            rows = {tuple(p) for p in pts}
            assert all(tuple(p) in rows for p in out)
            out_keys = [(math.floor(p[0] / voxel), math.floor(p[1] / voxel),
                         math.floor(p[2] / voxel)) for p in out]
            assert len(set(out_keys)) == len(out_keys)

        for trial in range(50):
            n = int(rng.integers(0, 120))
            cap = int(rng.integers(0, 120))
            pts = rng.uniform(-5, 5, (n, 3))
            out = kernel_random_downsample(pts, cap, seed=trial)
            assert out.shape[0] == min(n, cap)
            again = kernel_random_downsample(pts, cap, seed=trial)
            assert (out == again).all()
            if out.shape[0]:
                idx = [int(np.nonzero((pts == p).all(axis=1))[0][0]) for p in out]
                assert idx == sorted(idx) and len(set(idx)) == len(idx)

        r2 = random.Random(607)
        for _ in range(200):
            e = r2.uniform(-40, 40)
            v, k, lim = r2.uniform(0, 25), r2.uniform(0.2, 4), r2.uniform(0.2, 1.4)
            pos = kernel_stanley_steer(e, 0.0, v, k, 0.05, lim)
            assert pos == -kernel_stanley_steer(-e, 0.0, v, k, 0.05, lim)
            assert abs(pos) <= lim
        got = kernel_stanley_steer(1.0, 0.0, 1.0, k=1.0, eps=0.0, limit=2.0)
        assert abs(got - math.atan(1.0)) < 1e-12


def test_criterion_7_split_semantics(registry):
    with criterion(7, "100 random element-independent splits replay bitwise"):
        from blxc.dtypes import PointCloud, parse_dtype
        from blxc.extractor import FlatBlock, FlatIR, GlobalVar

        rng = random.Random(707)
        for trial in range(100):
            cloudy = rng.random() < 0.4
            n = rng.randint(4, 80)
            dt = parse_dtype(f"pointcloud({n})" if cloudy else f"vector({n})")
            kind, params = rng.choice([
                ("Gain", {"k": rng.uniform(-2, 2)}),
                ("ElementwiseMap", {"op": rng.choice(("abs", "neg", "sq",
                                                      "relu", "sin"))}),
                ("Saturate", {"lo": -1.0, "hi": 1.0}),
                ("Toolbox", {"kind_name": "CloudPreprocess", "ins": 1, "outs": 1,
                             "scale": 0.7, "theta": 0.2, "tx": 1.0, "ty": 0.5,
                             "tz": -0.25}),
            ])
            if kind == "Toolbox" and not cloudy:
                kind, params = "Gain", {"k": 1.5}
            ir = FlatIR(name="t", step_count_hint=1)
            ir.blocks.append(FlatBlock(uname="i", kind="Inport",
                                       params={"dtype": str(dt), "port": "i"},
                                       outputs=["i_1"]))
            ir.vars.append(GlobalVar("i_1", dt, ("i", 1), external=True))
            ir.blocks.append(FlatBlock(
                uname="m", kind=kind, params=params,
                attrs=frozenset({"stateless", "element_independent"}),
                inputs=["i_1"], outputs=["m_1"]))
            ir.vars.append(GlobalVar("m_1", dt, ("m", 1)))
            ir.blocks.append(FlatBlock(uname="o", kind="Outport",
                                       params={"port": "o"}, inputs=["m_1"]))
            ir.canonicalize()
            k = rng.randint(1, min(8, n))
            split = split_data_parallel(ir, "m", k, registry)
            steps = 4
            tr = Trace()
            for _ in range(steps):
                if isinstance(dt, PointCloud):
                    rows = rng.randint(1, n)
                    tr.steps.append({"i": [[rng.uniform(-4, 4) for _ in range(3)]
                                           for _ in range(rows)]})
                else:
                    tr.steps.append({"i": [rng.uniform(-4, 4)
                                           for _ in range(n)]})
            a = interpret(ir, tr, steps, registry)
            b = interpret(split, tr, steps, registry)
            d = compare_traces(a, b, 0.0)
            assert d.equal, f"trial {trial} ({kind}, k={k}, {dt}): {d.message}"


def test_criterion_8_artifact_stability(registry, cases, uniform4, cost_model):
    with criterion(8, "BLX and codegen outputs byte-stable; Gantt well-formed "
                      "with disjoint per-lane bars on 200 random schedules"):
        for case in cases.values():
            ir1 = extract(case.model_toolbox, registry)
            ir2 = extract(case.model_toolbox, registry)
            assert emit_blx(ir1) == emit_blx(ir2)
            cost_model.bind(ir1, registry)
            sched = allocate(ScheduleRequest(ir=ir1, profile=uniform4,
                                             max_cores=4))
            assert emit_sequential_c(ir1).files == emit_sequential_c(ir1).files
            assert emit_parallel_c(ir1, sched).files == \
                emit_parallel_c(ir1, sched).files
        for seed in range(200):
            rng = random.Random(808_000 + seed)
            ir = gen_dag_ir(rng, rng.randint(4, 30))
            prof = gen_profile(rng)
            sched = allocate(ScheduleRequest(
                ir=ir, profile=prof, max_cores=rng.randint(1, len(prof.cores))))
            svg = emit_gantt(sched)
            root = ET.fromstring(svg)
            ns = root.tag.split("}")[0] + "}"
            for g in root.iter(f"{ns}g"):
                if not g.get("id", "").startswith("lane-"):
                    continue
                bars = sorted((float(r.get("x")),
                               float(r.get("x")) + float(r.get("width")))
                              for r in g.iter(f"{ns}rect"))
                for (s1, e1), (s2, e2) in zip(bars, bars[1:]):
                    assert s2 >= e1 - 2.0  # 2 px minimum bar width slack


CC = shutil.which("cc") or shutil.which("gcc") or shutil.which("clang")


@pytest.mark.skipif(CC is None, reason="no C toolchain present")
def test_criterion_9_compiled_code_equivalence(tmp_path, registry, cases,
                                               uniform4, cost_model):
    with criterion(9, "[secondary] compiled sequential and parallel programs "
                      "replay every benchmark bitwise; kit compiles warning-"
                      "free"):
        kit = REPO / "cgen-runtime" / "src"
        strict = [CC, "-std=c99", "-Wall", "-Wextra", "-Werror", "-pedantic",
                  "-c", str(kit / "blx_runtime.c"), "-o",
                  str(tmp_path / "rt.o")]
        subprocess.run(strict, check=True)
        subprocess.run([CC, "-std=c99", "-Wall", "-Wextra", "-Werror",
                        "-pedantic", "-c", str(kit / "blx_harness.c"), "-o",
                        str(tmp_path / "h.o"), "-I", str(kit)], check=True)

        for case in cases.values():
            ir = extract(case.model_toolbox, registry)
            cost_model.bind(ir, registry)
            sched = allocate(ScheduleRequest(ir=ir, profile=uniform4,
                                             max_cores=4))
            for mode, bundle in (("seq", emit_sequential_c(ir)),
                                 ("par", emit_parallel_c(ir, sched))):
                out = tmp_path / case.name / mode
                bundle.write(str(out))
                for f in kit.iterdir():
                    (out / f.name).write_bytes(f.read_bytes())
                exe = out / "run"
                subprocess.run(
                    [CC, "-std=c99", "-O2", "-ffp-contract=off", "-o", str(exe),
                     str(out / "model.c"), str(out / "tasks.c"),
                     str(out / "blx_runtime.c"), str(out / "blx_harness.c"),
                     "-lpthread", "-lm"], check=True)
                res = subprocess.run(
                    [str(exe), str(REPO / "benchmarks" / case.name /
                                   "input.jsonl"), "100"],
                    capture_output=True, text=True, check=True)
                got = Trace.load_jsonl(res.stdout)
                d = compare_traces(got, case.expected_trace, 0.0)
                assert d.equal, f"{case.name}/{mode}: {d.message}"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
