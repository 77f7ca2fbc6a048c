"""Reference semantics: sequential interpreters for Model and FlatIR, a
discrete-event executor for Schedules, and trace comparison.

Both interpreters fire every block once per step in a deterministic
topological order; UnitDelay emits its previous-step state and latches its
input at the end-of-step barrier. The Model interpreter routes buses as
runtime records and expands toolbox composites by nested evaluation of their
templates, so comparing it against the FlatIR interpreter genuinely exercises
the extractor's rewiring (criterion: bitwise-equal traces).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dtypes import DType, Matrix, PointCloud, Scalar, Vector, parse_dtype
from .errors import (InvalidSchedule, MissingInput, SchemaError, ShapeMismatch)
from .extractor import FlatIR, flatten, _Wiring
from .kernels import (apply_map, eval_function_block, fold_product, fold_sum,
                      kernel_cloud_preprocess, kernel_random_downsample,
                      kernel_voxel_grid, matmul, parse_body)
from .model import Block, Model, parse_name_list, parse_selections, shard_sizes
from .scheduler import Schedule


# ---------------------------------------------------------------------------
# Values and traces
# ---------------------------------------------------------------------------

def coerce_value(raw, dtype: DType):
    """JSON-ish raw value -> runtime value matching dtype (float / ndarray)."""
    if isinstance(dtype, Scalar):
        if isinstance(raw, (int, float)):
            return float(raw)
        raise ShapeMismatch(f"expected scalar, got {type(raw).__name__}")
    arr = np.asarray(raw, dtype=np.float64)
    if isinstance(dtype, Vector):
        if arr.shape != (dtype.n,):
            raise ShapeMismatch(f"expected vector({dtype.n}), got shape {arr.shape}")
        return arr
    if isinstance(dtype, Matrix):
        if arr.shape != (dtype.rows, dtype.cols):
            raise ShapeMismatch(f"expected {dtype}, got shape {arr.shape}")
        return arr
    if isinstance(dtype, PointCloud):
        if arr.size == 0:
            return np.empty((0, 3), dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] > dtype.max_n:
            raise ShapeMismatch(f"expected {dtype}, got shape {arr.shape}")
        return arr
    raise ShapeMismatch(f"cannot carry {dtype} at a boundary")


def coerce_init(raw, dtype: DType):
    """UnitDelay initial state; scalar literals broadcast over array dtypes."""
    if isinstance(raw, (int, float)) and not isinstance(dtype, Scalar):
        if isinstance(dtype, Vector):
            return np.full(dtype.n, float(raw))
        if isinstance(dtype, Matrix):
            return np.full((dtype.rows, dtype.cols), float(raw))
        if isinstance(dtype, PointCloud):
            return np.full((dtype.max_n, 3), float(raw))
    return coerce_value(raw, dtype)


def value_to_json(value):
    if isinstance(value, float):
        return value
    if isinstance(value, (int, np.floating)):
        return float(value)
    return np.asarray(value, dtype=np.float64).tolist()


@dataclass
class Trace:
    """Per-step port->value maps. Values are floats or float64 arrays (raw
    JSON lists are accepted and coerced at binding time)."""

    steps: list[dict[str, object]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def ports(self) -> list[str]:
        return sorted(self.steps[0]) if self.steps else []

    def dump_jsonl(self) -> str:
        lines = []
        for step in self.steps:
            lines.append(json.dumps({k: value_to_json(v) for k, v in sorted(step.items())},
                                    allow_nan=True))
        return "\n".join(lines) + "\n"

    @staticmethod
    def load_jsonl(text: str) -> "Trace":
        from .errors import ModelSyntaxError

        steps = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                step = json.loads(line)
            except json.JSONDecodeError as err:
                raise ModelSyntaxError(f"trace line {lineno}: {err}") from None
            if not isinstance(step, dict):
                raise ModelSyntaxError(f"trace line {lineno}: expected an object")
            steps.append(step)
        return Trace(steps=steps)


# ---------------------------------------------------------------------------
# Primitive kernel dispatch (shared by both interpreters and the executor)
# ---------------------------------------------------------------------------

class KernelContext:
    """Per-run caches: parsed bodies, const values, toolbox helpers."""

    def __init__(self, registry=None):
        if registry is None:
            from .registry import load_registry
            registry = load_registry()
        self.registry = registry
        self.bodies: dict[int, list] = {}
        self.consts: dict[int, object] = {}

    def body(self, blk_key: int, body_text: str):
        if blk_key not in self.bodies:
            self.bodies[blk_key] = parse_body(body_text)
        return self.bodies[blk_key]


def fire_primitive(kind: str, params: dict, invals: list,
                   out_dtypes: list[DType], ctx: KernelContext,
                   blk_key: int = 0) -> list:
    """Stateless kind semantics. UnitDelay, ports, and bus kinds are handled
    by the evaluators."""
    if kind == "Const":
        if blk_key not in ctx.consts:
            v = params["value"]
            ctx.consts[blk_key] = float(v) if isinstance(v, (int, float)) \
                else np.asarray(v, dtype=np.float64)
        return [ctx.consts[blk_key]]
    if kind == "Gain":
        return [float(params["k"]) * invals[0]]
    if kind == "Sum":
        return [fold_sum(invals, str(params["signs"]))]
    if kind == "Product":
        return [fold_product(invals)]
    if kind == "Saturate":
        lo, hi = float(params["lo"]), float(params["hi"])
        x = invals[0]
        if isinstance(x, float):
            return [lo if x < lo else hi if x > hi else x]
        return [np.where(x < lo, lo, np.where(x > hi, hi, x))]
    if kind == "Switch":
        ctrl = invals[1]
        if not isinstance(ctrl, float):
            raise ShapeMismatch("Switch control must be scalar")
        return [invals[0] if ctrl >= float(params["threshold"]) else invals[2]]
    if kind == "MatMul":
        return [matmul(np.asarray(invals[0]), np.asarray(invals[1]))]
    if kind == "ElementwiseMap":
        return [apply_map(str(params["op"]), invals[0])]
    if kind == "Reduce":
        from .kernels import reduce_value
        return [reduce_value(str(params["op"]), invals[0])]
    if kind == "Concat":
        return [np.concatenate([np.atleast_1d(np.asarray(v)) for v in invals])]
    if kind == "Slice":
        start, stop = int(params["start"]), int(params["stop"])
        arr = np.asarray(invals[0])
        out = arr[start - 1:stop]
        if isinstance(out_dtypes[0], Scalar):
            return [float(out[0])]
        return [out]
    if kind == "FunctionBlock":
        stmts = ctx.body(blk_key, str(params["body"]))
        return eval_function_block(stmts, params, invals, int(params["outs"]))
    if kind == "Toolbox":
        return _fire_opaque_toolbox(params, invals, ctx, blk_key)
    if kind == "Splitter":
        k = int(params["shards"])
        arr = np.asarray(invals[0])
        sizes = shard_sizes(arr.shape[0], k)
        out, off = [], 0
        for sz in sizes:
            out.append(arr[off:off + sz])
            off += sz
        return out
    if kind == "Merger":
        return [np.concatenate([np.asarray(v) for v in invals])]
    raise SchemaError(f"no interpreter kernel for kind {kind!r}")


def _fire_opaque_toolbox(params: dict, invals: list, ctx: KernelContext,
                         blk_key: int) -> list:
    kind_name = str(params["kind_name"])
    mode, entry = ctx.registry.lookup(kind_name)
    if mode != "opaque":
        raise SchemaError(f"expandable toolbox {kind_name} reached the kernel layer")
    if entry.kernel == "voxel_grid":
        return [kernel_voxel_grid(invals[0], float(params["voxel_size"]))]
    if entry.kernel == "random_downsample":
        return [kernel_random_downsample(invals[0], int(params["max_points"]),
                                         int(params["seed"]))]
    if entry.kernel == "cloud_preprocess":
        if blk_key not in ctx.consts:
            th = float(params["theta"])
            rot = np.array([[math.cos(th), -math.sin(th), 0.0],
                            [math.sin(th), math.cos(th), 0.0],
                            [0.0, 0.0, 1.0]])
            off = np.array([float(params["tx"]), float(params["ty"]),
                            float(params["tz"])])
            ctx.consts[blk_key] = (rot, off)
        rot, off = ctx.consts[blk_key]
        return [kernel_cloud_preprocess(invals[0], float(params["scale"]), rot, off)]
    raise SchemaError(f"unknown opaque kernel {entry.kernel!r}")


# ---------------------------------------------------------------------------
# Model interpreter (hierarchical semantics, runtime buses)
# ---------------------------------------------------------------------------

class _ModelEval:
    def __init__(self, model: Model, registry=None, reverse_ties: bool = False):
        self.model = model
        self.ctx = KernelContext(registry)
        self.wiring = _Wiring(model)
        kept = [(p, b) for p, b in flatten(model)
                if not (b.kind in ("Inport", "Outport") and len(p) > 1)]
        self.nodes: dict[tuple[str, ...], Block] = {p: b for p, b in kept}
        self.bindings: dict[tuple[str, ...], list[tuple[tuple[str, ...], int]]] = {}
        for p, b in kept:
            self.bindings[p] = [self.wiring.producer(p, port)
                                for port in range(1, b.n_in + 1)]
        self.order = self._topo_order(reverse_ties)
        self.states: dict[tuple[str, ...], object] = {}
        self.sub_evals: dict[tuple[str, ...], _ModelEval] = {}
        self.inport_dtype: dict[tuple[str, ...], DType] = {}
        for p, b in kept:
            if b.kind == "UnitDelay":
                dt = self.wiring.out_dtype.get((p, 1), Scalar())
                self.states[p] = coerce_init(b.params.get("init", 0.0), dt)
            elif b.kind == "Inport":
                self.inport_dtype[p] = parse_dtype(str(b.params["dtype"]))
        self.inports = [p for p, b in kept if b.kind == "Inport" and len(p) == 1]
        self.outports = [p for p, b in kept if b.kind == "Outport" and len(p) == 1]

    def _topo_order(self, reverse_ties: bool) -> list[tuple[str, ...]]:
        import heapq

        indeg = {p: 0 for p in self.nodes}
        succ: dict[tuple[str, ...], list[tuple[str, ...]]] = {p: [] for p in self.nodes}
        for p, b in self.nodes.items():
            if b.kind == "UnitDelay":
                continue
            for (pp, _port) in self.bindings[p]:
                succ[pp].append(p)
                indeg[p] += 1
        key = (lambda p: tuple(-ord(c) for c in "/".join(p))) if reverse_ties \
            else (lambda p: p)
        heap = [(key(p), p) for p, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            _, p = heapq.heappop(heap)
            out.append(p)
            for v in succ[p]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, (key(v), v))
        if len(out) != len(self.nodes):
            raise SchemaError("model has an algebraic loop; validate() first")
        return out

    def step(self, inputs: dict[str, object]) -> dict[str, object]:
        slots: dict[tuple[tuple[str, ...], int], object] = {}
        outputs: dict[str, object] = {}
        for p in self.order:
            b = self.nodes[p]
            if b.kind == "Inport":
                name = b.name
                if name not in inputs:
                    raise MissingInput(f"input trace lacks port {name!r}")
                slots[(p, 1)] = coerce_value(inputs[name], self.inport_dtype[p])
                continue
            if b.kind == "UnitDelay":
                slots[(p, 1)] = self.states[p]
                continue
            invals = [slots[(pp, port)] for pp, port in self.bindings[p]]
            if b.kind == "Outport":
                outputs[b.name] = invals[0]
            elif b.kind == "BusCreator":
                names = parse_name_list(str(b.params["names"]))
                slots[(p, 1)] = dict(zip(names, invals))
            elif b.kind == "BusSelector":
                record = invals[0]
                for j, sel in enumerate(parse_selections(str(b.params["select"])),
                                        start=1):
                    slots[(p, j)] = _select_from_record(record, sel)
            elif b.kind == "Toolbox" and \
                    str(b.params["kind_name"]) in self.ctx.registry.expandable:
                outvals = self._fire_template(p, b, invals)
                for j, v in enumerate(outvals, start=1):
                    slots[(p, j)] = v
            else:
                out_dts = [self.wiring.out_dtype.get((p, port), Scalar())
                           for port in range(1, b.n_out + 1)]
                outvals = fire_primitive(b.kind, b.params, invals, out_dts,
                                         self.ctx, id(b))
                for j, v in enumerate(outvals, start=1):
                    slots[(p, j)] = v
        for p, b in self.nodes.items():
            if b.kind == "UnitDelay":
                (pp, port) = self.bindings[p][0]
                self.states[p] = slots[(pp, port)]
        return outputs

    def _fire_template(self, path: tuple[str, ...], blk: Block, invals: list) -> list:
        if path not in self.sub_evals:
            _, builder = self.ctx.registry.lookup(str(blk.params["kind_name"]))
            template = builder(dict(blk.params))
            mini = Model(name="tpl", root=template, step_count_hint=1)
            self.sub_evals[path] = _ModelEval(mini, self.ctx.registry)
        sub = self.sub_evals[path]
        in_names = [b.name for b in sub.model.root.port_blocks("Inport")]
        outs = sub.step(dict(zip(in_names, invals)))
        out_names = [b.name for b in sub.model.root.port_blocks("Outport")]
        return [outs[n] for n in out_names]


def _select_from_record(record, sel: list[str]):
    cur = record
    for seg in sel:
        if not isinstance(cur, dict):
            raise ShapeMismatch(f"selection {'.'.join(sel)} descends into non-bus")
        if seg.startswith("#"):
            items = list(cur.values())
            idx = int(seg[1:]) - 1
            if idx >= len(items):
                raise ShapeMismatch(f"selection position {seg} out of range")
            cur = items[idx]
        else:
            if seg not in cur:
                raise ShapeMismatch(f"no bus element {seg!r}")
            cur = cur[seg]
    return cur


# ---------------------------------------------------------------------------
# FlatIR interpreter
# ---------------------------------------------------------------------------

class _IREval:
    def __init__(self, ir: FlatIR, registry=None, reverse_ties: bool = False):
        self.ir = ir
        self.ctx = KernelContext(registry)
        order = ir.toposort()
        if reverse_ties:
            order = self._reverse_tie_order()
        self.order = order
        self.vm = ir.var_map()
        self.states: dict[str, object] = {}
        for s in ir.state_vars:
            self.states[s.owner] = coerce_init(s.init, s.dtype)
        self.inports = [b for b in ir.blocks if b.kind == "Inport"]
        self.outports = [b for b in ir.blocks if b.kind == "Outport"]

    def _reverse_tie_order(self):
        import heapq

        blocks = {b.uname: b for b in self.ir.blocks}
        indeg = {u: 0 for u in blocks}
        succ: dict[str, list[str]] = {u: [] for u in blocks}
        for u, v, _ in self.ir.edges():
            succ[u].append(v)
            indeg[v] += 1
        key = lambda u: tuple(-ord(c) for c in u)  # noqa: E731
        heap = [(key(u), u) for u, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            _, u = heapq.heappop(heap)
            out.append(blocks[u])
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, (key(v), v))
        return out

    def port_name(self, blk) -> str:
        return str(blk.params.get("port", blk.uname))

    def step(self, inputs: dict[str, object]) -> dict[str, object]:
        env: dict[str, object] = {}
        outputs: dict[str, object] = {}
        for b in self.order:
            if b.kind == "Inport":
                name = self.port_name(b)
                if name not in inputs:
                    raise MissingInput(f"input trace lacks port {name!r}")
                env[b.outputs[0]] = coerce_value(inputs[name],
                                                 self.vm[b.outputs[0]].dtype)
            elif b.kind == "Outport":
                outputs[self.port_name(b)] = env[b.inputs[0]]
            elif b.kind == "UnitDelay":
                env[b.outputs[0]] = self.states[b.uname]
            else:
                invals = [env[v] for v in b.inputs]
                out_dts = [self.vm[v].dtype for v in b.outputs]
                for j, v in enumerate(fire_primitive(b.kind, b.params, invals,
                                                     out_dts, self.ctx, id(b))):
                    env[b.outputs[j]] = v
        for b in self.ir.blocks:
            if b.kind == "UnitDelay":
                self.states[b.uname] = env[b.inputs[0]]
        return outputs


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------

def interpret(target, inputs: Trace, steps: int, registry=None) -> Trace:
    """Run `steps` synchronous steps of a Model or FlatIR over the input
    trace; returns the output trace (one dict per step, outport -> value)."""
    if len(inputs) < steps:
        raise MissingInput(f"input trace has {len(inputs)} steps, need {steps}")
    if isinstance(target, Model):
        ev = _ModelEval(target, registry)
    elif isinstance(target, FlatIR):
        ev = _IREval(target, registry)
    else:
        raise TypeError(f"cannot interpret {type(target).__name__}")
    out = Trace()
    for i in range(steps):
        out.steps.append(ev.step(inputs.steps[i]))
    return out


def execute_schedule(ir: FlatIR, sched: Schedule, inputs: Trace, steps: int,
                     registry=None) -> tuple[Trace, list[tuple[int, str, int, int]]]:
    """Discrete-event execution of a schedule: blocks fire at their scheduled
    times on their assigned cores with a barrier between steps. Verifies
    schedule invariants against the recorded comm events (InvalidSchedule on
    violation). Returns (output trace, busy-interval log for one step as
    (core, uname, start, finish))."""
    _check_against_events(ir, sched)
    ev = _IREval(ir, registry)
    # execution order: dependency-first, earliest scheduled start among ready
    # blocks (plain start-time sorting could reorder across a zero-duration
    # producer that ties with its consumer)
    ev.order = _start_priority_order(ir, sched)

    out = Trace()
    if len(inputs) < steps:
        raise MissingInput(f"input trace has {len(inputs)} steps, need {steps}")
    for i in range(steps):
        out.steps.append(ev.step(inputs.steps[i]))
    log = sorted((sched.assignment[b.uname], b.uname, sched.start_ns[b.uname],
                  sched.finish_ns[b.uname]) for b in ir.blocks)
    log = [(c, u, s, f) for c, u, s, f in log]
    return out, log


def _start_priority_order(ir: FlatIR, sched: Schedule):
    import heapq

    blocks = {b.uname: b for b in ir.blocks}
    indeg = {u: 0 for u in blocks}
    succ: dict[str, list[str]] = {u: [] for u in blocks}
    for u, v, _ in ir.edges():
        succ[u].append(v)
        indeg[v] += 1
    heap = [(sched.start_ns[u], sched.assignment[u], u)
            for u, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, _, u = heapq.heappop(heap)
        order.append(blocks[u])
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, (sched.start_ns[v], sched.assignment[v], v))
    if len(order) != len(blocks):
        raise InvalidSchedule("scheduled blocks do not form a DAG")
    return order


def _check_against_events(ir: FlatIR, sched: Schedule):
    by_core: dict[int, list[tuple[int, int, str]]] = {}
    for b in ir.blocks:
        u = b.uname
        if u not in sched.assignment:
            raise InvalidSchedule(f"block {u} is unscheduled")
        by_core.setdefault(sched.assignment[u], []).append(
            (sched.start_ns[u], sched.finish_ns[u], u))
    for c, iv in by_core.items():
        iv.sort()
        for (s1, f1, u1), (s2, f2, u2) in zip(iv, iv[1:]):
            if s2 < f1:
                raise InvalidSchedule(f"core {c}: {u1} and {u2} overlap")
    events = {(e.var, e.dst_core): e for e in sched.comm_events}
    for u, v, var in ir.edges():
        cu, cv = sched.assignment[u], sched.assignment[v]
        if cu == cv:
            if sched.start_ns[v] < sched.finish_ns[u]:
                raise InvalidSchedule(f"edge {u}->{v}: consumer starts too early")
            continue
        ev = events.get((var, cv))
        if ev is None:
            raise InvalidSchedule(f"no comm event delivers {var} to core {cv}")
        if ev.depart_ns < sched.finish_ns[u]:
            raise InvalidSchedule(f"comm event for {var} departs before {u} finishes")
        if sched.start_ns[v] < ev.arrive_ns:
            raise InvalidSchedule(f"{v} starts before {var} arrives on core {cv}")


# ---------------------------------------------------------------------------
# Trace comparison
# ---------------------------------------------------------------------------

@dataclass
class DiffReport:
    equal: bool
    first_divergence: tuple[int, str, int] | None = None   # (step, port, flat index)
    message: str = ""

    def __str__(self) -> str:
        if self.equal:
            return "traces equal"
        return self.message


def compare_traces(a: Trace, b: Trace, tol: float = 0.0) -> DiffReport:
    """tol=0 compares bit patterns (NaN equals NaN only on identical bits);
    otherwise per-element absolute tolerance."""
    if len(a) != len(b):
        raise ShapeMismatch(f"step counts differ: {len(a)} vs {len(b)}")
    for step, (sa, sb) in enumerate(zip(a.steps, b.steps)):
        if sorted(sa) != sorted(sb):
            raise ShapeMismatch(f"step {step}: ports differ {sorted(sa)} vs {sorted(sb)}")
        for port in sorted(sa):
            va = np.atleast_1d(np.asarray(sa[port], dtype=np.float64))
            vb = np.atleast_1d(np.asarray(sb[port], dtype=np.float64))
            if va.shape != vb.shape:
                return DiffReport(False, (step, port, 0),
                                  f"step {step} port {port}: shapes {va.shape} "
                                  f"vs {vb.shape}")
            if tol == 0.0:
                bits_a = va.ravel().view(np.uint64)
                bits_b = vb.ravel().view(np.uint64)
                bad = np.nonzero(bits_a != bits_b)[0]
            else:
                diff = np.abs(va.ravel() - vb.ravel())
                bad = np.nonzero(~(diff <= tol))[0]
            if bad.size:
                i = int(bad[0])
                return DiffReport(False, (step, port, i),
                                  f"step {step} port {port} index {i}: "
                                  f"{va.ravel()[i]!r} vs {vb.ravel()[i]!r}")
    return DiffReport(True)
