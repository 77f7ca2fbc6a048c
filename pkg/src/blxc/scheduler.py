"""Core allocation: communication-aware list scheduling plus an exact oracle.

allocate ranks blocks by upward rank (critical-path length to a sink using
mean core speed and mean link cost over the permitted cores) and places each
on the core minimizing its earliest finish time, insertion allowed. Ties break
to the lower core id, then lexicographic uname. All times are integer ns.

brute_force_allocate explores every (ready block, core) decision sequence with
branch-and-bound (greedy timing per fixed sequence+assignment is optimal, so
this searches exactly the assignments x topological orders space).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import (InvalidSchedule, KTooLarge, NameCollision, NotSplittable,
                     SchemaError, TooLarge, UnboundCost)
from .dtypes import Matrix, PointCloud, Scalar, Vector
from .extractor import FlatBlock, FlatIR, GlobalVar
from .hwprofile import (DEFAULT_DISPATCH_OVERHEAD_NS, HardwareProfile,
                        estimate_block_time)
from .model import shard_sizes


@dataclass(frozen=True)
class CommEvent:
    var: str
    src_core: int
    dst_core: int
    depart_ns: int
    arrive_ns: int


@dataclass
class Schedule:
    assignment: dict[str, int]
    start_ns: dict[str, int]
    finish_ns: dict[str, int]
    comm_events: list[CommEvent]
    makespan_ns: int
    core_count_used: int
    max_cores: int
    profile_name: str
    overhead_ns: int

    def to_json(self) -> str:
        doc = {
            "profile": self.profile_name,
            "max_cores": self.max_cores,
            "overhead_ns": self.overhead_ns,
            "makespan_ns": self.makespan_ns,
            "core_count_used": self.core_count_used,
            "blocks": [
                {"uname": u, "core": self.assignment[u],
                 "start_ns": self.start_ns[u], "finish_ns": self.finish_ns[u]}
                for u in sorted(self.assignment)
            ],
            "comm_events": [
                {"var": e.var, "from": e.src_core, "to": e.dst_core,
                 "depart_ns": e.depart_ns, "arrive_ns": e.arrive_ns}
                for e in sorted(self.comm_events,
                                key=lambda e: (e.depart_ns, e.var, e.dst_core))
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "Schedule":
        try:
            doc = json.loads(text)
            return Schedule(
                assignment={b["uname"]: int(b["core"]) for b in doc["blocks"]},
                start_ns={b["uname"]: int(b["start_ns"]) for b in doc["blocks"]},
                finish_ns={b["uname"]: int(b["finish_ns"]) for b in doc["blocks"]},
                comm_events=[CommEvent(e["var"], int(e["from"]), int(e["to"]),
                                       int(e["depart_ns"]), int(e["arrive_ns"]))
                             for e in doc["comm_events"]],
                makespan_ns=int(doc["makespan_ns"]),
                core_count_used=int(doc["core_count_used"]),
                max_cores=int(doc["max_cores"]),
                profile_name=str(doc.get("profile", "")),
                overhead_ns=int(doc.get("overhead_ns",
                                        DEFAULT_DISPATCH_OVERHEAD_NS)),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaError(f"bad schedule JSON: {err}") from None


@dataclass
class ScheduleRequest:
    ir: FlatIR
    profile: HardwareProfile
    max_cores: int
    overhead_ns: int = DEFAULT_DISPATCH_OVERHEAD_NS

    def __post_init__(self):
        if not 1 <= self.max_cores <= len(self.profile.cores):
            raise SchemaError(f"max_cores must be in 1..{len(self.profile.cores)}")


# ---------------------------------------------------------------------------
# Shared precomputation
# ---------------------------------------------------------------------------

class _Instance:
    def __init__(self, req: ScheduleRequest):
        self.ir = req.ir
        self.req = req
        self.cores = req.profile.cores[:req.max_cores]
        self.comm = req.profile.comm
        for b in self.ir.blocks:
            if b.cost_hint is None:
                raise UnboundCost(f"block {b.uname} has no cost hint; bind costs first")
        self.w = {b.uname: [estimate_block_time(b, c, req.overhead_ns)
                            for c in self.cores] for b in self.ir.blocks}
        vm = self.ir.var_map()
        self.var_bytes = {v.name: v.dtype.byte_size() for v in self.ir.vars}
        # per consumer: list of (producer, var, bytes)
        self.preds: dict[str, list[tuple[str, str, int]]] = {b.uname: []
                                                             for b in self.ir.blocks}
        self.succs: dict[str, list[tuple[str, str, int]]] = {b.uname: []
                                                             for b in self.ir.blocks}
        for u, v, var in self.ir.edges():
            nbytes = self.var_bytes[var]
            self.preds[v].append((u, var, nbytes))
            self.succs[u].append((v, var, nbytes))
        del vm

    def comm_ns(self, nbytes: int, cu: int, cv: int) -> int:
        if cu == cv:
            return 0
        return self.comm.cost_ns(nbytes, self.cores[cu].id, self.cores[cv].id)

    def mean_comm_ns(self, nbytes: int) -> float:
        k = len(self.cores)
        if k == 1:
            return 0.0
        total = 0.0
        for i in range(k):
            for j in range(k):
                if i != j:
                    total += self.comm.cost_ns(nbytes, self.cores[i].id, self.cores[j].id)
        return total / (k * (k - 1))

    def upward_rank(self) -> dict[str, float]:
        wbar = {u: sum(ws) / len(ws) for u, ws in self.w.items()}
        rank: dict[str, float] = {}
        for blk in reversed(self.ir.toposort()):
            u = blk.uname
            best = 0.0
            for v, _var, nbytes in self.succs[u]:
                best = max(best, self.mean_comm_ns(nbytes) + rank[v])
            rank[u] = wbar[u] + best
        return rank


# ---------------------------------------------------------------------------
# List scheduler
# ---------------------------------------------------------------------------

def allocate(req: ScheduleRequest) -> Schedule:
    """Upward-rank list scheduling with insertion-based EFT core selection.

    Greedy EFT is myopic in two recurring ways: it can strand the critical
    path behind an expensive return link (asymmetric comm), and it places
    source blocks by their own tiny finish time rather than their fan-out. To
    keep the oracle bound, the same ranked order is therefore also scheduled
    onto every core subset of size one and two, and once per core with the
    source blocks pinned there; the best candidate wins (deterministic
    preference: makespan, then candidate index)."""
    inst = _Instance(req)
    rank = inst.upward_rank()
    order = sorted(inst.w, key=lambda u: (-rank[u], u))

    k = len(inst.cores)
    candidates = [_eft_schedule(inst, order, list(range(k)))]
    if k > 1:
        sources = frozenset(u for u in inst.w if not inst.preds[u])
        for c in range(k):
            candidates.append(_eft_schedule(inst, order, [c]))
            candidates.append(_eft_schedule(inst, order, list(range(k)),
                                            pin=(sources, c)))
        for c1 in range(k):
            for c2 in range(c1 + 1, k):
                candidates.append(_eft_schedule(inst, order, [c1, c2]))
    best = min(enumerate(candidates), key=lambda p: (p[1][0], p[0]))[1]
    _mk, assignment, start, finish = best
    return _finalize(inst, assignment, start, finish)


def _eft_schedule(inst: "_Instance", order: list[str], cores: list[int],
                  pin: tuple[frozenset, int] | None = None):
    assignment: dict[str, int] = {}
    start: dict[str, int] = {}
    finish: dict[str, int] = {}
    busy: dict[int, list[tuple[int, int, str]]] = {c: [] for c in cores}

    for u in order:
        allowed = [pin[1]] if pin and u in pin[0] else cores
        best = None  # (finish, core, start)
        for c in allowed:
            ready = 0
            for p, _var, nbytes in inst.preds[u]:
                ready = max(ready, finish[p] + inst.comm_ns(nbytes, assignment[p], c))
            s = _earliest_slot(busy[c], ready, inst.w[u][c])
            f = s + inst.w[u][c]
            if best is None or (f, c) < (best[0], best[1]):
                best = (f, c, s)
        f, c, s = best
        assignment[u], start[u], finish[u] = c, s, f
        busy[c].append((s, f, u))
        busy[c].sort()

    makespan = max(finish.values()) if finish else 0
    return makespan, assignment, start, finish


def _earliest_slot(intervals: list[tuple[int, int, str]], ready: int, dur: int) -> int:
    """Earliest start >= ready fitting dur into the sorted busy list."""
    t = ready
    for s, f, _ in intervals:
        if t + dur <= s:
            return t
        t = max(t, f)
    return t


def _finalize(inst: _Instance, assignment, start, finish) -> Schedule:
    events: dict[tuple[str, int, int], CommEvent] = {}
    for v, plist in inst.preds.items():
        for p, var, nbytes in plist:
            cu, cv = assignment[p], assignment[v]
            if cu == cv:
                continue
            key = (var, cu, cv)
            if key not in events:
                depart = finish[p]
                events[key] = CommEvent(var, inst.cores[cu].id, inst.cores[cv].id,
                                        depart, depart + inst.comm_ns(nbytes, cu, cv))
    makespan = max(finish.values()) if finish else 0
    sched = Schedule(
        assignment={u: inst.cores[c].id for u, c in assignment.items()},
        start_ns=dict(start), finish_ns=dict(finish),
        comm_events=sorted(events.values(),
                           key=lambda e: (e.depart_ns, e.var, e.dst_core)),
        makespan_ns=makespan,
        core_count_used=len(set(assignment.values())),
        max_cores=inst.req.max_cores,
        profile_name=inst.req.profile.name,
        overhead_ns=inst.req.overhead_ns,
    )
    check_schedule(inst.ir, inst.req.profile, sched)
    return sched


def check_schedule(ir: FlatIR, profile: HardwareProfile, sched: Schedule):
    """Raise InvalidSchedule on any violated schedule invariant."""
    core_ids = {c.id for c in profile.cores}
    by_core: dict[int, list[tuple[int, int, str]]] = {}
    for b in ir.blocks:
        u = b.uname
        if u not in sched.assignment:
            raise InvalidSchedule(f"block {u} is unscheduled")
        c = sched.assignment[u]
        if c not in core_ids:
            raise InvalidSchedule(f"block {u} assigned to unknown core {c}")
        s, f = sched.start_ns[u], sched.finish_ns[u]
        if s < 0 or f < s:
            raise InvalidSchedule(f"block {u} has bad interval [{s}, {f})")
        by_core.setdefault(c, []).append((s, f, u))
    for c, iv in by_core.items():
        iv.sort()
        for (s1, f1, u1), (s2, f2, u2) in zip(iv, iv[1:]):
            if s2 < f1:
                raise InvalidSchedule(f"core {c}: {u1} and {u2} overlap")
    vm = ir.var_map()
    for u, v, var in ir.edges():
        cu, cv = sched.assignment[u], sched.assignment[v]
        need = sched.finish_ns[u]
        if cu != cv:
            need += profile.comm.cost_ns(vm[var].dtype.byte_size(), cu, cv)
        if sched.start_ns[v] < need:
            raise InvalidSchedule(
                f"edge {u}->{v} via {var}: start {sched.start_ns[v]} < required {need}")
    if sched.makespan_ns != (max(sched.finish_ns.values()) if sched.finish_ns else 0):
        raise InvalidSchedule("makespan does not match max finish")
    if sched.core_count_used != len(set(sched.assignment.values())):
        raise InvalidSchedule("core_count_used does not match assignment")


# ---------------------------------------------------------------------------
# Exact oracle
# ---------------------------------------------------------------------------

BRUTE_FORCE_MAX_BLOCKS = 12
BRUTE_FORCE_MAX_CORES = 3


def brute_force_allocate(req: ScheduleRequest) -> Schedule:
    """Minimum-makespan schedule by exhaustive search (with pruning) over
    (ready block, core) decision sequences. Guarded by size limits."""
    if len(req.ir.blocks) > BRUTE_FORCE_MAX_BLOCKS:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_MAX_BLOCKS} blocks")
    if req.max_cores > BRUTE_FORCE_MAX_CORES:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_MAX_CORES} cores")

    inst = _Instance(req)
    names = sorted(inst.w)
    idx = {u: i for i, u in enumerate(names)}
    n, k = len(names), len(inst.cores)
    wmin = {u: min(ws) for u, ws in inst.w.items()}

    # critical path to sink ignoring comm: admissible remaining-work bound
    cp: dict[str, float] = {}
    for blk in reversed(req.ir.toposort()):
        u = blk.uname
        cp[u] = wmin[u] + max((cp[v] for v, _, _ in inst.succs[u]), default=0)

    symmetric = _cores_interchangeable(inst)

    incumbent = allocate(req)
    best_makespan = incumbent.makespan_ns
    best_state: tuple | None = None

    indeg0 = [0] * n
    for u in names:
        indeg0[idx[u]] = len(inst.preds[u])

    assignment = [-1] * n
    start = [0] * n
    finish = [0] * n

    # Interleavings that share (assignment, per-core sequences) yield identical
    # greedy timings, so only the placement order sorted by (start, name) is
    # explored: each child must not precede the previous placement.

    def dfs(scheduled_count: int, indeg: list[int], core_avail: list[int],
            total_done_w: int, last_key: tuple[int, str]):
        nonlocal best_makespan, best_state
        if scheduled_count == n:
            mk = max(finish)
            if mk < best_makespan:
                best_makespan = mk
                best_state = (list(assignment), list(start), list(finish))
            return
        curr_mk = max((finish[i] for i in range(n) if assignment[i] >= 0), default=0)
        rem = sum(wmin[names[i]] for i in range(n) if assignment[i] < 0)
        ready = [i for i in range(n) if assignment[i] < 0 and indeg[i] == 0]
        # admissible bounds
        lb = curr_mk
        for i in ready:
            u = names[i]
            data = 0
            for p, _var, _nb in inst.preds[u]:
                data = max(data, finish[idx[p]])
            lb = max(lb, data + int(cp[u]))
        lb = max(lb, (total_done_w + rem + k - 1) // k)
        if lb >= best_makespan:
            return
        children = []
        for i in ready:
            u = names[i]
            core_limit = k
            if symmetric:
                used = max(assignment) + 1 if scheduled_count else 0
                core_limit = min(k, used + 1)
            for c in range(core_limit):
                rdy = 0
                for p, _var, nb in inst.preds[u]:
                    rdy = max(rdy, finish[idx[p]] + inst.comm_ns(nb, assignment[idx[p]], c))
                s = max(core_avail[c], rdy)
                if (s, u) < last_key:
                    continue  # canonical order: starts never go backwards
                f = s + inst.w[u][c]
                children.append((f, s, i, c))
        children.sort()
        for f, s, i, c in children:
            if max(f, curr_mk) >= best_makespan:
                continue
            u = names[i]
            assignment[i], start[i], finish[i] = c, s, f
            old_avail = core_avail[c]
            core_avail[c] = f
            for v, _var, _nb in inst.succs[u]:
                indeg[idx[v]] -= 1
            dfs(scheduled_count + 1, indeg, core_avail,
                total_done_w + inst.w[u][c], (s, u))
            for v, _var, _nb in inst.succs[u]:
                indeg[idx[v]] += 1
            core_avail[c] = old_avail
            assignment[i] = -1

    dfs(0, list(indeg0), [0] * k, 0, (0, ""))

    if best_state is None:
        return incumbent
    asg, st, fin = best_state
    return _finalize(inst, {names[i]: asg[i] for i in range(n)},
                     {names[i]: st[i] for i in range(n)},
                     {names[i]: fin[i] for i in range(n)})


def _cores_interchangeable(inst: _Instance) -> bool:
    c0 = inst.cores[0]
    if any(c.clock_hz != c0.clock_hz or c.cycles_per_op != c0.cycles_per_op
           for c in inst.cores):
        return False
    pairs = [(i, j) for i in range(len(inst.cores)) for j in range(len(inst.cores))
             if i != j]
    if not pairs:
        return True
    key0 = (inst.comm.fixed_ns[(inst.cores[pairs[0][0]].id, inst.cores[pairs[0][1]].id)],
            inst.comm.per_byte_ns[(inst.cores[pairs[0][0]].id, inst.cores[pairs[0][1]].id)])
    return all((inst.comm.fixed_ns[(inst.cores[i].id, inst.cores[j].id)],
                inst.comm.per_byte_ns[(inst.cores[i].id, inst.cores[j].id)]) == key0
               for i, j in pairs)


# ---------------------------------------------------------------------------
# Data-parallel split
# ---------------------------------------------------------------------------

_SPLITTABLE_KINDS = ("Gain", "ElementwiseMap", "Saturate", "Sum", "Product",
                     "MatMul", "Toolbox")


def split_data_parallel(ir: FlatIR, uname: str, k: int, registry=None) -> FlatIR:
    """Replace one element-independent block by Splitter -> k shard copies ->
    Merger. Returns a new IR; the input is untouched. Shard cost hints are
    cleared (re-bind after splitting)."""
    if k < 1:
        raise KTooLarge("k must be >= 1")
    ir = _copy_ir(ir)
    blk = ir.block(uname)
    vm = ir.var_map()

    if "element_independent" not in blk.attrs or "stateless" not in blk.attrs:
        raise NotSplittable(f"{uname} is not element_independent+stateless")
    if blk.kind not in _SPLITTABLE_KINDS:
        raise NotSplittable(f"kind {blk.kind} cannot be sharded")
    if len(blk.outputs) != 1:
        raise NotSplittable(f"{uname} has {len(blk.outputs)} outputs")
    if blk.kind == "Toolbox":
        if registry is None:
            from .registry import load_registry
            registry = load_registry()
        mode, entry = registry.lookup(str(blk.params["kind_name"]))
        if mode != "opaque" or not entry.splittable:
            raise NotSplittable(f"toolbox kind {blk.params['kind_name']} is not splittable")

    principal = vm[blk.inputs[0]].dtype
    if isinstance(principal, Vector):
        total = principal.n
    elif isinstance(principal, PointCloud):
        total = principal.max_n
    else:
        raise NotSplittable(f"principal input of {uname} is {principal}, "
                            "need vector or pointcloud")
    if k > total:
        raise KTooLarge(f"k={k} exceeds {total} elements")
    for extra in blk.inputs[1:]:
        dt = vm[extra].dtype
        row_bcast = isinstance(dt, Vector) and dt.n == 3 and isinstance(principal, PointCloud)
        rhs_mat = blk.kind == "MatMul" and isinstance(dt, Matrix)
        if not (isinstance(dt, Scalar) or row_bcast or rhs_mat):
            raise NotSplittable(f"{uname}: input {extra} ({dt}) does not broadcast "
                                "across shards")

    sizes = shard_sizes(total, k)
    out_var = blk.outputs[0]
    out_dtype = vm[out_var].dtype
    split_name, merge_name = f"{uname}_split", f"{uname}_merge"
    shard_names = [f"{uname}_s{i + 1}" for i in range(k)]
    existing = {b.uname for b in ir.blocks}
    for nm in [split_name, merge_name] + shard_names:
        if nm in existing:
            raise NameCollision(f"shard name {nm} already exists")

    def shard_dtype(base, size):
        return Vector(size) if isinstance(base, Vector) else PointCloud(size)

    splitter = FlatBlock(uname=split_name, kind="Splitter",
                         params={"shards": k}, attrs=frozenset({"stateless"}),
                         inputs=[blk.inputs[0]],
                         outputs=[f"{split_name}_{i + 1}" for i in range(k)])
    new_vars = [GlobalVar(name=f"{split_name}_{i + 1}",
                          dtype=shard_dtype(principal, sizes[i]),
                          producer=(split_name, i + 1)) for i in range(k)]
    shards = []
    for i, nm in enumerate(shard_names):
        shard = FlatBlock(uname=nm, kind=blk.kind, params=dict(blk.params),
                          attrs=blk.attrs,
                          inputs=[f"{split_name}_{i + 1}"] + list(blk.inputs[1:]),
                          outputs=[f"{nm}_1"])
        shards.append(shard)
        new_vars.append(GlobalVar(name=f"{nm}_1",
                                  dtype=shard_dtype(out_dtype, sizes[i]),
                                  producer=(nm, 1)))
    merger = FlatBlock(uname=merge_name, kind="Merger", params={"inputs": k},
                       attrs=frozenset({"stateless"}),
                       inputs=[f"{nm}_1" for nm in shard_names],
                       outputs=[f"{merge_name}_1"])
    new_vars.append(GlobalVar(name=f"{merge_name}_1", dtype=out_dtype,
                              producer=(merge_name, 1)))

    ir.blocks = [b for b in ir.blocks if b.uname != uname]
    ir.blocks += [splitter] + shards + [merger]
    ir.vars = [v for v in ir.vars if v.name != out_var] + new_vars
    for b in ir.blocks:
        b.inputs = [f"{merge_name}_1" if v == out_var else v for v in b.inputs]

    _peephole_trivial_shards(ir)
    ir.canonicalize()
    ir.check()
    return ir


def _peephole_trivial_shards(ir: FlatIR):
    """Remove Splitter blocks with one shard and Merger blocks with one input
    (the k=1 degenerate split)."""
    alias: dict[str, str] = {}
    drop: set[str] = set()
    for b in ir.blocks:
        if b.kind == "Splitter" and len(b.outputs) == 1:
            alias[b.outputs[0]] = b.inputs[0]
            drop.add(b.uname)
        elif b.kind == "Merger" and len(b.inputs) == 1:
            alias[b.outputs[0]] = b.inputs[0]
            drop.add(b.uname)
    if not drop:
        return

    def final(v):
        while v in alias:
            v = alias[v]
        return v

    dead_vars = {b.outputs[0] for b in ir.blocks if b.uname in drop}
    ir.blocks = [b for b in ir.blocks if b.uname not in drop]
    ir.vars = [v for v in ir.vars if v.name not in dead_vars]
    for b in ir.blocks:
        b.inputs = [final(v) for v in b.inputs]


def _copy_ir(ir: FlatIR) -> FlatIR:
    from .extractor import StateVar
    return FlatIR(
        name=ir.name, step_count_hint=ir.step_count_hint,
        blocks=[FlatBlock(uname=b.uname, kind=b.kind, params=dict(b.params),
                          attrs=b.attrs, inputs=list(b.inputs),
                          outputs=list(b.outputs),
                          cost_hint=dict(b.cost_hint) if b.cost_hint else None)
                for b in ir.blocks],
        vars=[GlobalVar(v.name, v.dtype, v.producer, v.external) for v in ir.vars],
        state_vars=[StateVar(s.name, s.owner, s.dtype, s.init) for s in ir.state_vars],
    )


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass
class MakespanReport:
    makespan_ns: int
    per_core: dict[int, dict[str, int]]   # core id -> {busy_ns, idle_ns, blocks}
    comm_volume_bytes: int
    comm_event_count: int

    def to_json(self) -> str:
        return json.dumps({
            "makespan_ns": self.makespan_ns,
            "per_core": {str(c): v for c, v in sorted(self.per_core.items())},
            "comm_volume_bytes": self.comm_volume_bytes,
            "comm_event_count": self.comm_event_count,
        }, indent=2) + "\n"


def makespan_report(ir: FlatIR, sched: Schedule) -> MakespanReport:
    per_core: dict[int, dict[str, int]] = {}
    for u, c in sched.assignment.items():
        e = per_core.setdefault(c, {"busy_ns": 0, "idle_ns": 0, "blocks": 0})
        e["busy_ns"] += sched.finish_ns[u] - sched.start_ns[u]
        e["blocks"] += 1
    for c, e in per_core.items():
        e["idle_ns"] = sched.makespan_ns - e["busy_ns"]
    vm = ir.var_map()
    volume = sum(vm[e.var].dtype.byte_size() for e in sched.comm_events
                 if e.var in vm)
    return MakespanReport(makespan_ns=sched.makespan_ns, per_core=per_core,
                          comm_volume_bytes=volume,
                          comm_event_count=len(sched.comm_events))
