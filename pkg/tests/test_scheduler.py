import random

import pytest

from blxc.dtypes import parse_dtype
from blxc.errors import KTooLarge, NotSplittable, TooLarge
from blxc.extractor import FlatBlock, FlatIR, GlobalVar
from blxc.hwprofile import CommMatrix, Core, HardwareProfile
from blxc.scheduler import (Schedule, ScheduleRequest, allocate,
                            brute_force_allocate, check_schedule,
                            makespan_report, split_data_parallel)

from gen import gen_dag_ir, gen_profile


def _uniform_profile(n=2, fixed=0.0, per_byte=0.0):
    cores = tuple(Core(id=i, clock_hz=1e9,
                       cycles_per_op={"arith": 1, "trig": 1, "mem": 1, "cmp": 1})
                  for i in range(n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    return HardwareProfile(
        name="test", cores=cores,
        comm=CommMatrix(fixed_ns={p: fixed for p in pairs},
                        per_byte_ns={p: per_byte for p in pairs}))


def _two_block_ir(costs=(10, 10)):
    """Two independent scalar chains (in -> gain -> out is overkill; use two
    source Const blocks feeding nothing shared)."""
    ir = FlatIR(name="t", step_count_hint=1)
    sc = parse_dtype("scalar")
    for i, cost in enumerate(costs):
        u = f"b{i}"
        ir.blocks.append(FlatBlock(uname=u, kind="Const", params={"value": 1.0},
                                   outputs=[f"{u}_1"], cost_hint={"arith": cost}))
        ir.vars.append(GlobalVar(f"{u}_1", sc, (u, 1)))
        ir.blocks.append(FlatBlock(uname=f"o{i}", kind="Outport",
                                   params={"port": f"o{i}"}, inputs=[f"{u}_1"],
                                   cost_hint={}))
    return ir.canonicalize()


def _chain_ir(costs=(10, 10)):
    ir = FlatIR(name="t", step_count_hint=1)
    sc = parse_dtype("scalar")
    prev = None
    for i, cost in enumerate(costs):
        u = f"b{i}"
        blk = FlatBlock(uname=u, kind="Gain" if prev else "Const",
                        params={"k": 1.0} if prev else {"value": 1.0},
                        inputs=[prev] if prev else [],
                        outputs=[f"{u}_1"], cost_hint={"arith": cost})
        ir.blocks.append(blk)
        ir.vars.append(GlobalVar(f"{u}_1", sc, (u, 1)))
        prev = f"{u}_1"
    ir.blocks.append(FlatBlock(uname="out", kind="Outport", params={"port": "out"},
                               inputs=[prev], cost_hint={}))
    return ir.canonicalize()


def test_two_independent_blocks_run_in_parallel():
    ir = _two_block_ir((10, 10))
    prof = _uniform_profile(2)
    sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=2,
                                     overhead_ns=0))
    # outports cost 0 ns; the two 10 ns blocks overlap perfectly
    assert sched.makespan_ns == 10
    assert sched.core_count_used == 2


def test_chain_stays_on_one_core_under_comm():
    # A -> B, 10 ns each, cross-core comm 5 ns: exhaustive 2-core enumeration
    # confirms 20 < 25, so both belong on one core
    ir = _chain_ir((10, 10))
    prof = _uniform_profile(2, fixed=5.0)
    req = ScheduleRequest(ir=ir, profile=prof, max_cores=2, overhead_ns=0)
    sched = allocate(req)
    opt = brute_force_allocate(req)
    assert opt.makespan_ns == 20
    assert sched.makespan_ns == 20
    chain_cores = {sched.assignment["b0"], sched.assignment["b1"]}
    assert len(chain_cores) == 1


def test_single_block_brute_force():
    ir = FlatIR(name="t", step_count_hint=1)
    ir.blocks.append(FlatBlock(uname="b", kind="Const", params={"value": 1.0},
                               outputs=["b_1"], cost_hint={"arith": 7}))
    ir.vars.append(GlobalVar("b_1", parse_dtype("scalar"), ("b", 1)))
    ir.blocks.append(FlatBlock(uname="o", kind="Outport", params={"port": "o"},
                               inputs=["b_1"], cost_hint={}))
    ir.canonicalize()
    prof = _uniform_profile(2)
    sched = brute_force_allocate(ScheduleRequest(ir=ir, profile=prof,
                                                 max_cores=2, overhead_ns=0))
    assert sched.finish_ns["b"] - sched.start_ns["b"] == 7


def test_diamond_within_oracle_bound():
    # A -> {B, C} -> D, uniform 10 ns, comm 2 ns, 2 cores
    ir = FlatIR(name="t", step_count_hint=1)
    sc = parse_dtype("scalar")

    def add(u, kind, params, ins):
        ir.blocks.append(FlatBlock(uname=u, kind=kind, params=params,
                                   inputs=ins, outputs=[f"{u}_1"],
                                   cost_hint={"arith": 10}))
        ir.vars.append(GlobalVar(f"{u}_1", sc, (u, 1)))

    add("a", "Const", {"value": 1.0}, [])
    add("b", "Gain", {"k": 1.0}, ["a_1"])
    add("c", "Gain", {"k": 1.0}, ["a_1"])
    add("d", "Sum", {"signs": "++"}, ["b_1", "c_1"])
    ir.blocks.append(FlatBlock(uname="o", kind="Outport", params={"port": "o"},
                               inputs=["d_1"], cost_hint={}))
    ir.canonicalize()
    prof = _uniform_profile(2, fixed=2.0)
    req = ScheduleRequest(ir=ir, profile=prof, max_cores=2, overhead_ns=0)
    heft = allocate(req)
    opt = brute_force_allocate(req)
    assert heft.makespan_ns <= 1.3 * opt.makespan_ns
    # independent exhaustive enumeration (assignments x topological orders,
    # greedy timing) pins the optimum at 32: a,b on one core, c,d staggered
    # behind the 2 ns transfers on the other
    assert opt.makespan_ns == _enumerate_diamond_optimum() == 32


def _enumerate_diamond_optimum():
    import itertools

    w = {"a": 10, "b": 10, "c": 10, "d": 10, "o": 0}
    preds = {"a": [], "b": ["a"], "c": ["a"], "d": ["b", "c"], "o": ["d"]}
    comm = 2
    names = list(w)
    orders = [seq for seq in itertools.permutations(names)
              if all(seq.index(p) < seq.index(u) for u in names
                     for p in preds[u])]
    best = None
    for assign in itertools.product((0, 1), repeat=len(names)):
        amap = dict(zip(names, assign))
        for seq in orders:
            avail = [0, 0]
            finish = {}
            for u in seq:
                ready = max((finish[p] + (0 if amap[p] == amap[u] else comm)
                             for p in preds[u]), default=0)
                s = max(avail[amap[u]], ready)
                finish[u] = s + w[u]
                avail[amap[u]] = finish[u]
            mk = max(finish.values())
            best = mk if best is None else min(best, mk)
    return best


def test_brute_force_guards():
    rng = random.Random(5)
    ir = gen_dag_ir(rng, 20)
    prof = _uniform_profile(2)
    with pytest.raises(TooLarge):
        brute_force_allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=2))
    ir2 = gen_dag_ir(rng, 6)
    prof4 = _uniform_profile(4)
    with pytest.raises(TooLarge):
        brute_force_allocate(ScheduleRequest(ir=ir2, profile=prof4, max_cores=4))


def test_schedule_validity_on_random_dags():
    for seed in range(60):
        rng = random.Random(80_000 + seed)
        ir = gen_dag_ir(rng, rng.randint(5, 50))
        prof = gen_profile(rng)
        k = rng.randint(1, len(prof.cores))
        sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=k))
        check_schedule(ir, prof, sched)  # raises on violation
        assert sched.core_count_used <= k


def test_single_core_makespan_is_total_work():
    for seed in range(10):
        rng = random.Random(90_000 + seed)
        ir = gen_dag_ir(rng, rng.randint(5, 30))
        prof = gen_profile(rng)
        overhead = 20
        sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=1,
                                         overhead_ns=overhead))
        from blxc.hwprofile import estimate_block_time

        total = sum(estimate_block_time(b, prof.cores[0], overhead)
                    for b in ir.blocks)
        assert sched.makespan_ns == total
        assert sched.core_count_used == 1


def test_determinism():
    rng = random.Random(123)
    ir = gen_dag_ir(rng, 30)
    prof = gen_profile(rng)
    req = ScheduleRequest(ir=ir, profile=prof, max_cores=len(prof.cores))
    s1, s2 = allocate(req), allocate(req)
    assert s1.to_json() == s2.to_json()


def test_schedule_json_roundtrip():
    rng = random.Random(7)
    ir = gen_dag_ir(rng, 12)
    prof = gen_profile(rng)
    sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=2))
    back = Schedule.from_json(sched.to_json())
    assert back.to_json() == sched.to_json()


# -- data-parallel split ------------------------------------------------------


def _splittable_ir(n=100, registry=None):
    ir = FlatIR(name="t", step_count_hint=1)
    vec = parse_dtype(f"vector({n})")
    ir.blocks.append(FlatBlock(uname="i", kind="Inport",
                               params={"dtype": str(vec), "port": "i"},
                               outputs=["i_1"]))
    ir.vars.append(GlobalVar("i_1", vec, ("i", 1), external=True))
    ir.blocks.append(FlatBlock(uname="m", kind="ElementwiseMap",
                               params={"op": "sq"},
                               attrs=frozenset({"stateless", "element_independent"}),
                               inputs=["i_1"], outputs=["m_1"]))
    ir.vars.append(GlobalVar("m_1", vec, ("m", 1)))
    ir.blocks.append(FlatBlock(uname="o", kind="Outport", params={"port": "o"},
                               inputs=["m_1"]))
    return ir.canonicalize()


def test_split_creates_shards_and_merger(registry):
    ir = split_data_parallel(_splittable_ir(100), "m", 4, registry)
    kinds = {b.uname: b.kind for b in ir.blocks}
    assert kinds["m_split"] == "Splitter"
    assert kinds["m_merge"] == "Merger"
    shards = [u for u, k in kinds.items() if u.startswith("m_s") and k == "ElementwiseMap"]
    assert len(shards) == 4
    vm = ir.var_map()
    sizes = [vm[f"m_s{i}_1"].dtype.n for i in range(1, 5)]
    assert sizes == [25, 25, 25, 25]
    assert len(ir.blocks) == 3 - 1 + 6  # 6 new blocks replace 1


def test_split_remainder_spread_over_leading_shards(registry):
    ir = split_data_parallel(_splittable_ir(10), "m", 3, registry)
    vm = ir.var_map()
    sizes = [vm[f"m_s{i}_1"].dtype.n for i in range(1, 4)]
    assert sizes == [4, 3, 3]


def test_split_k1_is_peepholed(registry):
    ir = split_data_parallel(_splittable_ir(100), "m", 1, registry)
    kinds = [b.kind for b in ir.blocks]
    assert "Splitter" not in kinds and "Merger" not in kinds
    assert len(ir.blocks) == 3


def test_split_rejects_stateful_or_dependent(registry):
    ir = _splittable_ir(100)
    blk = ir.block("m")
    blk.attrs = frozenset({"stateless"})
    with pytest.raises(NotSplittable):
        split_data_parallel(ir, "m", 2, registry)


def test_split_k_too_large(registry):
    with pytest.raises(KTooLarge):
        split_data_parallel(_splittable_ir(4), "m", 5, registry)


def test_split_semantics_preserved_bitwise(registry):
    from blxc.simulator import Trace, compare_traces, interpret

    rng = random.Random(99)
    for trial in range(20):
        n = rng.randint(4, 60)
        k = rng.randint(1, min(6, n))
        ir = _splittable_ir(n)
        split = split_data_parallel(ir, "m", k, registry)
        tr = Trace(steps=[{"i": [rng.uniform(-3, 3) for _ in range(n)]}
                          for _ in range(5)])
        a = interpret(ir, tr, 5, registry)
        b = interpret(split, tr, 5, registry)
        assert compare_traces(a, b, 0.0).equal, f"trial {trial}"


def test_split_shards_spread_over_four_cores(registry, cases, uniform4,
                                             cost_model):
    from blxc.extractor import extract

    ir = extract(cases["random_downsample_filter"].model_toolbox, registry)
    split = split_data_parallel(ir, "pre", 4, registry)
    cost_model.bind(split, registry)
    sched = allocate(ScheduleRequest(ir=split, profile=uniform4, max_cores=4))
    shard_cores = {sched.assignment[f"pre_s{i}"] for i in range(1, 5)}
    assert len(shard_cores) == 4


def test_trajectory_two_cores_beat_one_on_uniform4(registry, cases, uniform4,
                                                   cost_model):
    from blxc.extractor import extract

    ir = extract(cases["trajectory_follower"].model_toolbox, registry)
    cost_model.bind(ir, registry)
    m1 = allocate(ScheduleRequest(ir=ir, profile=uniform4, max_cores=1)).makespan_ns
    m2 = allocate(ScheduleRequest(ir=ir, profile=uniform4, max_cores=2)).makespan_ns
    assert m2 < m1


def test_makespan_report_accounting():
    ir = _two_block_ir((10, 10))
    prof = _uniform_profile(2)
    sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=2,
                                     overhead_ns=0))
    rep = makespan_report(ir, sched)
    for core, entry in rep.per_core.items():
        assert entry["busy_ns"] + entry["idle_ns"] == rep.makespan_ns
        assert entry["idle_ns"] == 0  # perfect two-way overlap
    assert sum(e["busy_ns"] for e in rep.per_core.values()) <= \
        len(rep.per_core) * rep.makespan_ns


def test_report_excludes_unused_cores():
    ir = _chain_ir((10, 10))
    prof = _uniform_profile(2, fixed=5.0)
    sched = allocate(ScheduleRequest(ir=ir, profile=prof, max_cores=2,
                                     overhead_ns=0))
    rep = makespan_report(ir, sched)
    assert len(rep.per_core) == sched.core_count_used
