"""Hardware description (cores, cycle costs, link costs) and cost estimation.

The profile file is a small XML dialect:

    <shim name="uniform4">
      <core id="0" clockHz="1000000000">
        <cpi class="arith" cycles="1"/> ... (arith, trig, mem, cmp)
      </core>
      <link from="0" to="1" fixedNs="100" perByteNs="0.05"/>
    </shim>

Estimation is static: every block kind has an op-count formula over its
principal dimension n (shipped in data/costs.json, overridable), and
time = ceil(sum(count * cycles) / clock) in integer nanoseconds plus a fixed
per-block dispatch overhead. All public times are integer nanoseconds.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources

from .dtypes import element_count
from .errors import (MissingOpClass, ModelSyntaxError, SchemaError,
                     UnboundDimension)
from .extractor import FlatBlock, FlatIR
from .kernels import _Parser, _tokenize, eval_expr

OP_CLASSES = ("arith", "trig", "mem", "cmp")

DEFAULT_DISPATCH_OVERHEAD_NS = 20


@dataclass(frozen=True)
class Core:
    id: int
    clock_hz: float
    cycles_per_op: dict[str, float]


@dataclass(frozen=True)
class CommMatrix:
    """Ordered-pair link costs; same-core transfers are free."""

    fixed_ns: dict[tuple[int, int], float]
    per_byte_ns: dict[tuple[int, int], float]

    def cost_ns(self, nbytes: int, src: int, dst: int) -> int:
        if src == dst:
            return 0
        key = (src, dst)
        return int(math.ceil(self.fixed_ns[key] + nbytes * self.per_byte_ns[key]))


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    cores: tuple[Core, ...]
    comm: CommMatrix


def parse_profile(text: bytes | str) -> HardwareProfile:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as err:
        raise ModelSyntaxError(f"malformed XML: {err}") from None
    if root.tag != "shim":
        raise SchemaError(f"root element must be <shim>, got <{root.tag}>")
    name = root.get("name", "profile")
    cores: list[Core] = []
    links: list[tuple[int, int, float, float]] = []
    for child in root:
        if child.tag == "core":
            cid = int(child.get("id", "-1"))
            clock = float(child.get("clockHz", "0"))
            if clock <= 0:
                raise SchemaError(f"core {cid}: clockHz must be positive")
            cpi: dict[str, float] = {}
            for sub in child:
                if sub.tag != "cpi":
                    raise SchemaError(f"unexpected <{sub.tag}> in core")
                cycles = float(sub.get("cycles", "0"))
                if cycles <= 0:
                    raise SchemaError(f"core {cid}: cycles must be positive")
                cpi[sub.get("class", "")] = cycles
            for cls in OP_CLASSES:
                if cls not in cpi:
                    raise MissingOpClass(f"core {cid} lacks op class {cls!r}")
            cores.append(Core(id=cid, clock_hz=clock, cycles_per_op=cpi))
        elif child.tag == "link":
            fx = float(child.get("fixedNs", "0"))
            pb = float(child.get("perByteNs", "0"))
            if fx < 0 or pb < 0:
                raise SchemaError("link costs must be non-negative")
            links.append((int(child.get("from")), int(child.get("to")), fx, pb))
        else:
            raise SchemaError(f"unexpected element <{child.tag}> in shim")
    if not cores:
        raise SchemaError("profile has no cores")
    ids = [c.id for c in cores]
    if sorted(ids) != list(range(len(cores))):
        raise SchemaError(f"core ids must be 0..{len(cores) - 1}, got {ids}")
    cores.sort(key=lambda c: c.id)

    fixed: dict[tuple[int, int], float] = {}
    per_byte: dict[tuple[int, int], float] = {}
    for src, dst, fx, pb in links:
        if not (0 <= src < len(cores) and 0 <= dst < len(cores)):
            raise SchemaError(f"link {src}->{dst} references unknown core")
        if src == dst and (fx or pb):
            raise SchemaError(f"link {src}->{src} must be zero-cost")
        fixed[(src, dst)] = fx
        per_byte[(src, dst)] = pb
    for i in range(len(cores)):
        for j in range(len(cores)):
            if i != j and (i, j) not in fixed:
                raise SchemaError(f"missing link {i}->{j}")
    return HardwareProfile(name=name, cores=tuple(cores),
                           comm=CommMatrix(fixed_ns=fixed, per_byte_ns=per_byte))


def load_builtin_profile(name: str) -> HardwareProfile:
    """Profiles shipped with the package ("uniform4", "commheavy4")."""
    text = resources.files("blxc").joinpath(f"data/{name}.xml").read_text("utf-8")
    return parse_profile(text)


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------

@dataclass
class CostModel:
    """Binds op-count formulas to blocks and turns them into nanoseconds."""

    table: dict[str, dict[str, str]]
    overhead_ns: int = DEFAULT_DISPATCH_OVERHEAD_NS

    @staticmethod
    def load(extra_path: str | None = None,
             overhead_ns: int = DEFAULT_DISPATCH_OVERHEAD_NS) -> "CostModel":
        data = resources.files("blxc").joinpath("data/costs.json").read_text("utf-8")
        table = json.loads(data)
        if extra_path:
            with open(extra_path, "r", encoding="utf-8") as fh:
                table.update(json.load(fh))
        return CostModel(table=table, overhead_ns=overhead_ns)

    def op_counts(self, block: FlatBlock, ir: FlatIR, registry=None) -> dict[str, int]:
        """Op counts for a block with its dimensions bound from the IR vars."""
        n = _principal_n(block, ir)
        if block.kind == "Toolbox":
            if registry is None:
                raise SchemaError("toolbox cost needs a registry")
            mode, entry = registry.lookup(str(block.params["kind_name"]))
            if mode != "opaque":
                raise SchemaError(f"{block.uname}: expandable toolbox reached costing")
            return entry.op_counts(n)
        if block.kind == "FunctionBlock":
            return _function_block_counts(block, n)
        formulas = None
        if block.kind == "ElementwiseMap":
            formulas = self.table.get(f"ElementwiseMap.{block.params.get('op')}")
        if formulas is None:
            formulas = self.table.get(block.kind)
        if formulas is None:
            raise SchemaError(f"no cost formula for kind {block.kind!r}")
        env = {"n": float(n), "k": float(len(block.inputs) or 1)}
        out = {}
        for cls, expr in formulas.items():
            parser = _Parser(_tokenize(str(expr)))
            node = parser.expr()
            if parser.peek() is not None:
                raise SchemaError(f"trailing tokens in cost expr {expr!r}")
            val = eval_expr(node, env)
            cnt = int(math.ceil(val))
            if cnt < 0:
                raise SchemaError(f"negative op count for {block.uname}")
            out[cls] = cnt
        return out

    def bind(self, ir: FlatIR, registry=None) -> FlatIR:
        """Fill cost_hint on every block. Mutates and returns ir."""
        for b in ir.blocks:
            b.cost_hint = self.op_counts(b, ir, registry)
        return ir


_TRIG_FUNCS = {"sin", "cos", "atan", "atan2", "exp"}


def _function_block_counts(block: FlatBlock, n: int) -> dict[str, int]:
    """Static op census of a FunctionBlock body, per element."""
    from .kernels import Expr, parse_body

    arith = trig = cmp = 0

    def count(node: Expr):
        nonlocal arith, trig, cmp
        if node.tag in ("bin", "un"):
            arith += 1
            for child in (node.b, node.c):
                if isinstance(child, Expr):
                    count(child)
        elif node.tag == "call":
            if node.a in _TRIG_FUNCS:
                trig += 1
            elif node.a in ("min", "max"):
                cmp += 1
            elif node.a == "clamp":
                cmp += 2
            else:
                arith += 1
            for child in node.b:
                count(child)

    for _, expr in parse_body(str(block.params["body"])):
        count(expr)
    out = {"mem": len(block.inputs) + len(block.outputs)}
    if arith:
        out["arith"] = arith * n
    if trig:
        out["trig"] = trig * n
    if cmp:
        out["cmp"] = cmp * n
    return out


def _principal_n(block: FlatBlock, ir: FlatIR) -> int:
    vm = ir.var_map()
    if block.inputs:
        return element_count(vm[block.inputs[0]].dtype)
    if block.outputs:
        return element_count(vm[block.outputs[0]].dtype)
    return 1


def estimate_block_time(block: FlatBlock, core: Core,
                        overhead_ns: int = DEFAULT_DISPATCH_OVERHEAD_NS) -> int:
    """Nanoseconds for one firing: ceil(cycles/clock) + dispatch overhead.
    Requires a bound cost hint."""
    if block.cost_hint is None:
        raise UnboundDimension(f"block {block.uname} has no bound cost hint")
    cycles = 0.0
    for cls, count in block.cost_hint.items():
        if cls not in core.cycles_per_op:
            raise MissingOpClass(f"core {core.id} lacks op class {cls!r}")
        if count < 0:
            raise SchemaError(f"negative op count on {block.uname}")
        cycles += count * core.cycles_per_op[cls]
    return int(math.ceil(cycles / core.clock_hz * 1e9)) + overhead_ns


def estimate_comm_time(nbytes: int, src: Core, dst: Core, comm: CommMatrix) -> int:
    """Nanoseconds to move nbytes between cores; zero on the same core."""
    if nbytes < 0:
        raise SchemaError("byte count must be >= 0")
    return comm.cost_ns(nbytes, src.id, dst.id)
