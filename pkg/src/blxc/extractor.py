"""Flattening pipeline: hierarchical Model -> flat BLX IR.

Stages (composed by extract, in this order):

1. record_bus_selections: snapshot every BusSelector's input layout and the
   1-based position path of each selected element, before any renaming.
2. flatten: depth-first traversal assigning path-joined unique names
   (separator "_", literal underscores doubled); masked subsystems are
   traversed like any other.
3. globalize_signals: every line becomes one single-writer global variable
   named <producer uname>_<out port>; subsystem Inport/Outport boundaries
   dissolve into direct bindings (root ports stay as real blocks).
4. rewire_bus_selectors: selector outputs are re-bound to the element
   variables at the recorded positions by walking BusCreator producer chains;
   all bus blocks compile away.
5. expand_toolbox: expandable toolbox blocks are replaced by their template's
   extracted blocks (spliced under the toolbox block's name); opaque ones stay
   single blocks and absorb registry attrs.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

from .dtypes import Bus, BusLayout, DType, parse_dtype
from .errors import (CyclicIR, ModelSyntaxError, NameCollision, PositionOutOfRange,
                     SchemaError, UnresolvableSelection)
from .model import (Block, Model, Subsystem, kind_info, parse_selections,
                    selection_positions)


# ---------------------------------------------------------------------------
# IR types
# ---------------------------------------------------------------------------

@dataclass
class GlobalVar:
    name: str
    dtype: DType
    producer: tuple[str, int]      # (block uname, 1-based out port)
    external: bool = False         # produced by a root Inport


@dataclass
class StateVar:
    name: str                      # <owner uname>_state
    owner: str
    dtype: DType
    init: object                   # scalar or nested list literal


@dataclass
class FlatBlock:
    uname: str
    kind: str
    params: dict[str, object] = field(default_factory=dict)
    attrs: frozenset[str] = frozenset()
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    cost_hint: dict[str, int] | None = None


@dataclass
class FlatIR:
    name: str
    step_count_hint: int
    blocks: list[FlatBlock] = field(default_factory=list)
    vars: list[GlobalVar] = field(default_factory=list)
    state_vars: list[StateVar] = field(default_factory=list)

    def canonicalize(self) -> "FlatIR":
        self.blocks.sort(key=lambda b: b.uname)
        self.vars.sort(key=lambda v: v.name)
        self.state_vars.sort(key=lambda s: s.name)
        return self

    def block(self, uname: str) -> FlatBlock:
        for b in self.blocks:
            if b.uname == uname:
                return b
        raise KeyError(uname)

    def var(self, name: str) -> GlobalVar:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def var_map(self) -> dict[str, GlobalVar]:
        return {v.name: v for v in self.vars}

    def edges(self) -> list[tuple[str, str, str]]:
        """(producer uname, consumer uname, var) pairs. Inputs of UnitDelay do
        not create edges: the delay emits last step's state and latches its
        input at the end-of-step barrier."""
        vm = self.var_map()
        out = set()
        for b in self.blocks:
            if b.kind == "UnitDelay":
                continue
            for vname in b.inputs:
                out.add((vm[vname].producer[0], b.uname, vname))
        return sorted(out)

    def toposort(self) -> list[FlatBlock]:
        """Deterministic Kahn order (lexicographic among ready blocks)."""
        import heapq

        indeg = {b.uname: 0 for b in self.blocks}
        succ: dict[str, list[str]] = {b.uname: [] for b in self.blocks}
        for u, v, _ in self.edges():
            if u == v:
                raise CyclicIR(f"block {u} consumes its own output")
            succ[u].append(v)
            indeg[v] += 1
        heap = [u for u, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        result = []
        while heap:
            u = heapq.heappop(heap)
            result.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, v)
        if len(result) != len(self.blocks):
            leftover = sorted(u for u in indeg if indeg[u] > 0)
            raise CyclicIR(f"dependency cycle through {leftover[:8]}")
        by_name = {b.uname: b for b in self.blocks}
        return [by_name[u] for u in result]

    def check(self):
        """Raise on any violated IR invariant."""
        names = [b.uname for b in self.blocks]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise NameCollision(f"duplicate unames {dup}")
        vnames = [v.name for v in self.vars]
        if len(set(vnames)) != len(vnames):
            raise SchemaError("duplicate var names")
        by_uname = {b.uname: b for b in self.blocks}
        for v in self.vars:
            owner, port = v.producer
            b = by_uname.get(owner)
            if b is None or port > len(b.outputs) or b.outputs[port - 1] != v.name:
                raise SchemaError(f"var {v.name} has inconsistent producer {v.producer}")
            if v.name != f"{owner}_{port}":
                raise SchemaError(f"var {v.name} violates the producer naming rule")
        vm = self.var_map()
        for b in self.blocks:
            if b.kind in ("Subsystem", "BusCreator", "BusSelector"):
                raise SchemaError(f"structural kind {b.kind} survived extraction: {b.uname}")
            for vname in b.inputs:
                if vname not in vm:
                    raise SchemaError(f"block {b.uname} reads unknown var {vname}")
        for s in self.state_vars:
            if s.owner not in by_uname:
                raise SchemaError(f"state var {s.name} owned by unknown block")
        self.toposort()  # raises CyclicIR on cycles


@dataclass
class BusSelection:
    selector_path: tuple[str, ...]
    recorded_layout: BusLayout
    recorded_positions: list[tuple[int, ...]]


# ---------------------------------------------------------------------------
# Naming
# ---------------------------------------------------------------------------

def escape_segment(seg: str) -> str:
    return seg.replace("_", "__")


def join_path(path: tuple[str, ...]) -> str:
    return "_".join(escape_segment(seg) for seg in path)


# ---------------------------------------------------------------------------
# Stage 1: record bus selections
# ---------------------------------------------------------------------------

def record_bus_selections(model: Model) -> list[BusSelection]:
    """Snapshot selector layouts and positions before renaming. Raises
    UnresolvableSelection when a selected name is absent from the layout."""
    out: list[BusSelection] = []

    def walk(sub: Subsystem, path: tuple[str, ...]):
        for c in sub.children:
            if isinstance(c, Subsystem):
                walk(c, path + (c.name,))
                continue
            if c.kind != "BusSelector":
                continue
            dt = _incoming_dtype(sub, c.name, 1)
            if not isinstance(dt, Bus):
                raise SchemaError(f"BusSelector {'/'.join(path + (c.name,))} input "
                                  f"is {dt}, not a bus")
            positions = []
            for sel in parse_selections(str(c.params["select"])):
                try:
                    positions.append(tuple(selection_positions(dt.layout, sel, c.name)))
                except SchemaError as err:
                    raise UnresolvableSelection(str(err)) from None
            out.append(BusSelection(path + (c.name,), dt.layout, positions))

    walk(model.root, ())
    return out


def _incoming_dtype(sub: Subsystem, name: str, port: int):
    for line in sub.lines:
        for db, dp in line.dsts:
            if db == name and dp == port:
                return line.dtype
    return None


# ---------------------------------------------------------------------------
# Stage 2: flatten
# ---------------------------------------------------------------------------

def flatten(model: Model) -> list[tuple[tuple[str, ...], Block]]:
    """Depth-first (path, block) listing over all primitive blocks, root
    segment elided. Raises NameCollision when two paths join identically."""
    out: list[tuple[tuple[str, ...], Block]] = []
    seen: dict[str, tuple[str, ...]] = {}

    def walk(sub: Subsystem, path: tuple[str, ...]):
        for c in sub.children:
            if isinstance(c, Subsystem):
                walk(c, path + (c.name,))
            else:
                p = path + (c.name,)
                uname = join_path(p)
                if uname in seen:
                    raise NameCollision(
                        f"paths {'/'.join(seen[uname])} and {'/'.join(p)} both "
                        f"flatten to {uname!r}")
                seen[uname] = p
                out.append((p, c))

    walk(model.root, ())
    return out


# ---------------------------------------------------------------------------
# Stage 3: globalize signals
# ---------------------------------------------------------------------------

class _Wiring:
    """Producer resolution across subsystem boundaries."""

    def __init__(self, model: Model):
        self.sub_by_path: dict[tuple[str, ...], Subsystem] = {}
        self.node_by_path: dict[tuple[str, ...], object] = {}
        self.feed: dict[tuple[tuple[str, ...], int], tuple[str, int]] = {}
        self.out_dtype: dict[tuple[tuple[str, ...], int], DType] = {}
        self._memo: dict[tuple[tuple[str, ...], int], tuple[tuple[str, ...], int]] = {}

        def walk(sub: Subsystem, path: tuple[str, ...]):
            self.sub_by_path[path] = sub
            for c in sub.children:
                self.node_by_path[path + (c.name,)] = c
                if isinstance(c, Subsystem):
                    walk(c, path + (c.name,))
            for line in sub.lines:
                sname, sport = line.src
                self.out_dtype[(path + (sname,), sport)] = line.dtype
                for db, dp in line.dsts:
                    self.feed[(path + (db,), dp)] = line.src

        walk(model.root, ())

    def inport_index(self, path: tuple[str, ...]) -> int:
        sub = self.sub_by_path[path[:-1]]
        for i, b in enumerate(sub.port_blocks("Inport"), start=1):
            if b.name == path[-1]:
                return i
        raise KeyError(path)

    def producer(self, path: tuple[str, ...], in_port: int) -> tuple[tuple[str, ...], int]:
        """Real producing (block path, out port) of a consumed port, skipping
        subsystem boundaries and inner Inport/Outport blocks."""
        key = (path, in_port)
        if key in self._memo:
            return self._memo[key]
        if key not in self.feed:
            raise SchemaError(f"unconnected input {'/'.join(path)}:{in_port}")
        sname, sport = self.feed[key]
        parent = path[:-1]
        spath = parent + (sname,)
        node = self.node_by_path[spath]
        if isinstance(node, Subsystem):
            outp = node.port_blocks("Outport")[sport - 1]
            res = self.producer(spath + (outp.name,), 1)
        elif node.kind == "Inport" and len(spath) > 1:
            res = self.producer(parent, self.inport_index(spath))
        else:
            res = (spath, sport)
        self._memo[key] = res
        return res


def globalize_signals(model: Model,
                      flat: list[tuple[tuple[str, ...], Block]]) -> FlatIR:
    """Create one GlobalVar per produced port and bind every consumer input.
    Inner subsystem Inport/Outport blocks are elided; root ports remain."""
    wiring = _Wiring(model)
    kept = [(p, b) for p, b in flat
            if not (b.kind in ("Inport", "Outport") and len(p) > 1)]

    ir = FlatIR(name=model.name, step_count_hint=model.step_count_hint)
    for path, blk in kept:
        uname = join_path(path)
        fb = FlatBlock(uname=uname, kind=blk.kind, params=dict(blk.params),
                       attrs=blk.attrs)
        if blk.kind in ("Inport", "Outport") and len(path) == 1:
            # keep the model-level port name (unames escape underscores)
            fb.params.setdefault("port", blk.name)
        for port in range(1, blk.n_out + 1):
            vname = f"{uname}_{port}"
            dt = wiring.out_dtype.get((path, port))
            if dt is None:
                if blk.kind == "Inport":
                    dt = parse_dtype(str(blk.params["dtype"]))
                else:
                    raise SchemaError(f"out port {uname}:{port} feeds no line; "
                                      "cannot type its variable")
            ir.vars.append(GlobalVar(name=vname, dtype=dt, producer=(uname, port),
                                     external=(blk.kind == "Inport")))
            fb.outputs.append(vname)
        for port in range(1, blk.n_in + 1):
            ppath, pport = wiring.producer(path, port)
            fb.inputs.append(f"{join_path(ppath)}_{pport}")
        if blk.kind == "UnitDelay":
            init = blk.params.get("init", 0.0)
            dt = wiring.out_dtype.get((path, 1)) or parse_dtype("scalar")
            ir.state_vars.append(StateVar(name=f"{uname}_state", owner=uname,
                                          dtype=dt, init=init))
        ir.blocks.append(fb)
    return ir


# ---------------------------------------------------------------------------
# Stage 4: rewire bus selectors
# ---------------------------------------------------------------------------

def rewire_bus_selectors(ir: FlatIR, selections: list[BusSelection]) -> FlatIR:
    """Bind every consumer of a selector output directly to the element var at
    the recorded position; compile all BusCreator/BusSelector blocks away."""
    by_uname = {b.uname: b for b in ir.blocks}
    vm = ir.var_map()
    sel_by_uname = {join_path(s.selector_path): s for s in selections}

    def resolve(vname: str, pos: tuple[int, ...]) -> str:
        producer, port = vm[vname].producer
        blk = by_uname[producer]
        if blk.kind == "BusSelector":
            sel = sel_by_uname.get(producer)
            if sel is None:
                raise SchemaError(f"no recorded selection for {producer}")
            base = resolve(blk.inputs[0], sel.recorded_positions[port - 1])
            return resolve(base, pos)
        if not pos:
            return vname
        if blk.kind == "BusCreator":
            i = pos[0]
            if i > len(blk.inputs):
                raise PositionOutOfRange(
                    f"{producer}: recorded position {i} exceeds {len(blk.inputs)} elements")
            return resolve(blk.inputs[i - 1], pos[1:])
        raise PositionOutOfRange(
            f"recorded positions descend below var {vname} (producer {producer} "
            f"is {blk.kind}, not a bus maker)")

    alias: dict[str, str] = {}
    for uname, sel in sorted(sel_by_uname.items()):
        blk = by_uname.get(uname)
        if blk is None:
            raise SchemaError(f"recorded selector {uname} not present in IR")
        for port, pos in enumerate(sel.recorded_positions, start=1):
            alias[blk.outputs[port - 1]] = resolve(blk.inputs[0], pos)

    dropped_kinds = ("BusCreator", "BusSelector")
    dead_vars = {v for b in ir.blocks if b.kind in dropped_kinds for v in b.outputs}
    ir.blocks = [b for b in ir.blocks if b.kind not in dropped_kinds]
    ir.vars = [v for v in ir.vars if v.name not in dead_vars]
    for b in ir.blocks:
        b.inputs = [alias.get(v, v) for v in b.inputs]
        for v in b.inputs:
            if v in dead_vars:
                raise SchemaError(f"block {b.uname} still reads bus var {v} "
                                  "after rewiring (sub-bus fed a non-bus block?)")
    return ir


# ---------------------------------------------------------------------------
# Stage 5: toolbox expansion
# ---------------------------------------------------------------------------

def expand_toolbox(ir: FlatIR, registry, _depth: int = 0) -> FlatIR:
    """Inline expandable toolbox blocks; finalize opaque ones."""
    if _depth > 16:
        raise SchemaError("toolbox templates nest too deep (recursive template?)")
    result_blocks: list[FlatBlock] = []
    alias: dict[str, str] = {}
    dead_vars: set[str] = set()
    new_vars: list[GlobalVar] = []
    new_states: list[StateVar] = []

    for blk in list(ir.blocks):
        if blk.kind != "Toolbox":
            result_blocks.append(blk)
            continue
        kind_name = str(blk.params["kind_name"])
        mode, entry = registry.lookup(kind_name)
        if mode == "opaque":
            if len(blk.inputs) != entry.ins or len(blk.outputs) != entry.outs:
                raise SchemaError(f"{blk.uname}: {kind_name} expects "
                                  f"{entry.ins} in/{entry.outs} out, block has "
                                  f"{len(blk.inputs)}/{len(blk.outputs)}")
            for p in entry.required_params:
                if p not in blk.params:
                    raise SchemaError(f"{blk.uname}: {kind_name} requires param {p!r}")
            blk.attrs = frozenset(blk.attrs | entry.attrs)
            result_blocks.append(blk)
            continue

        template: Subsystem = entry(dict(blk.params))
        tpl_model = Model(name="tpl", root=template, step_count_hint=1)
        sub_ir = _extract_core(tpl_model, registry, _depth + 1)
        inports = [join_path((b.name,)) for b in template.port_blocks("Inport")]
        outports = [join_path((b.name,)) for b in template.port_blocks("Outport")]
        if len(inports) != len(blk.inputs) or len(outports) != len(blk.outputs):
            raise SchemaError(f"{blk.uname}: template ports do not match block arity")

        prefix = blk.uname + "_"
        port_alias: dict[str, str] = {}
        for i, pname in enumerate(inports):
            port_alias[prefix + pname + "_1"] = blk.inputs[i]
        sub_by_uname = {b.uname: b for b in sub_ir.blocks}
        for j, pname in enumerate(outports):
            inner_src = sub_by_uname[pname].inputs[0]
            alias[blk.outputs[j]] = port_alias.get(prefix + inner_src, prefix + inner_src)
            dead_vars.add(blk.outputs[j])

        for b in sub_ir.blocks:
            if b.kind in ("Inport", "Outport"):
                continue
            nb = FlatBlock(uname=prefix + b.uname, kind=b.kind,
                           params=dict(b.params), attrs=b.attrs,
                           inputs=[port_alias.get(prefix + v, prefix + v)
                                   for v in b.inputs],
                           outputs=[prefix + v for v in b.outputs])
            result_blocks.append(nb)
        for v in sub_ir.vars:
            owner, port = v.producer
            if sub_by_uname[owner].kind in ("Inport", "Outport"):
                continue
            new_vars.append(GlobalVar(name=prefix + v.name, dtype=v.dtype,
                                      producer=(prefix + owner, port)))
        for s in sub_ir.state_vars:
            new_states.append(StateVar(name=prefix + s.name, owner=prefix + s.owner,
                                       dtype=s.dtype, init=s.init))
        dead_vars.update(blk.outputs)

    def final(v: str) -> str:
        hops = 0
        while v in alias:
            v = alias[v]
            hops += 1
            if hops > len(alias) + 1:
                raise SchemaError("alias cycle during toolbox expansion")
        return v

    ir.blocks = result_blocks
    ir.vars = [v for v in ir.vars if v.name not in dead_vars] + new_vars
    ir.state_vars += new_states
    for b in ir.blocks:
        b.inputs = [final(v) for v in b.inputs]
    return ir


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def _extract_core(model: Model, registry, _depth: int = 0) -> FlatIR:
    selections = record_bus_selections(model)
    flat = flatten(model)
    ir = globalize_signals(model, flat)
    ir = rewire_bus_selectors(ir, selections)
    ir = expand_toolbox(ir, registry, _depth)
    return ir.canonicalize()


def extract(model: Model, registry) -> FlatIR:
    """Full pipeline; output satisfies all FlatIR invariants (checked)."""
    ir = _extract_core(model, registry)
    ir.check()
    return ir


# ---------------------------------------------------------------------------
# BLX serialization
# ---------------------------------------------------------------------------

def emit_blx(ir: FlatIR) -> bytes:
    """Deterministic XML for a FlatIR: blocks sorted by uname, stable
    attribute order, UTF-8, trailing newline."""
    ir.canonicalize()
    states = {s.owner: s for s in ir.state_vars}
    vm = ir.var_map()
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<blx model={quoteattr(ir.name)} steps="{ir.step_count_hint}">']
    for b in ir.blocks:
        attrs = f" attrs={quoteattr(' '.join(sorted(b.attrs)))}" if b.attrs else ""
        out.append(f"  <block uname={quoteattr(b.uname)} kind={quoteattr(b.kind)}{attrs}>")
        for key in sorted(b.params):
            val = b.params[key]
            text = val if isinstance(val, str) else json.dumps(val)
            out.append(f"    <param k={quoteattr(key)} v={quoteattr(text)}/>")
        for v in b.inputs:
            out.append(f"    <in var={quoteattr(v)}/>")
        for v in b.outputs:
            out.append(f"    <out var={quoteattr(v)} dtype={quoteattr(str(vm[v].dtype))}/>")
        if b.uname in states:
            s = states[b.uname]
            out.append(f"    <state var={quoteattr(s.name)} "
                       f"init={quoteattr(json.dumps(s.init))} "
                       f"dtype={quoteattr(str(s.dtype))}/>")
        if b.cost_hint:
            for cls in sorted(b.cost_hint):
                out.append(f'    <cost class={quoteattr(cls)} count="{b.cost_hint[cls]}"/>')
        out.append("  </block>")
    out.append("</blx>")
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_blx(text: bytes | str) -> FlatIR:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as err:
        raise ModelSyntaxError(f"malformed XML: {err}") from None
    if root.tag != "blx":
        raise SchemaError(f"root element must be <blx>, got <{root.tag}>")
    ir = FlatIR(name=root.get("model", "ir"), step_count_hint=int(root.get("steps", "1")))
    for belem in root:
        if belem.tag != "block":
            raise SchemaError(f"unexpected element <{belem.tag}> in blx")
        uname = belem.get("uname")
        kind = belem.get("kind")
        if not uname or not kind:
            raise SchemaError("block missing uname/kind")
        kind_info(kind)
        blk = FlatBlock(uname=uname, kind=kind,
                        attrs=frozenset((belem.get("attrs") or "").split()))
        for child in belem:
            if child.tag == "param":
                blk.params[child.get("k")] = _parse_value(child.get("v", ""))
            elif child.tag == "in":
                blk.inputs.append(child.get("var"))
            elif child.tag == "out":
                vname = child.get("var")
                blk.outputs.append(vname)
                ir.vars.append(GlobalVar(
                    name=vname, dtype=parse_dtype(child.get("dtype")),
                    producer=(uname, len(blk.outputs)),
                    external=(kind == "Inport")))
            elif child.tag == "state":
                ir.state_vars.append(StateVar(
                    name=child.get("var"), owner=uname,
                    dtype=parse_dtype(child.get("dtype")),
                    init=_parse_value(child.get("init", "0.0"))))
            elif child.tag == "cost":
                hint = blk.cost_hint or {}
                hint[child.get("class")] = int(child.get("count"))
                blk.cost_hint = hint
            else:
                raise SchemaError(f"unexpected element <{child.tag}> in block")
        ir.blocks.append(blk)
    ir.canonicalize()
    ir.check()  # hand-edited files must honor the IR invariants too
    return ir


def _parse_value(text: str):
    try:
        val = json.loads(text)
    except json.JSONDecodeError:
        return text
    return val if isinstance(val, (int, float, list)) else text
