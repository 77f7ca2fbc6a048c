"""In-memory model types, the block kind table, validation, and stats.

A model is a tree of subsystems containing blocks wired by signal lines.
Single-rate synchronous semantics: every block fires exactly once per step.
Cycles are legal only through UnitDelay (which reads its previous-step input).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .dtypes import Bus, BusLayout, DType, Matrix, PointCloud, Scalar, Vector
from .errors import SchemaError

IDENT_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")

MAP_OPS = ("abs", "neg", "relu", "sq", "sqrt", "sin", "cos", "atan", "floor", "exp")
REDUCE_OPS = ("sum", "min", "max")

STATELESS = "stateless"
ELEMENT_INDEPENDENT = "element_independent"


def check_ident(name: str, what: str = "identifier") -> str:
    if not IDENT_RE.match(name):
        raise SchemaError(f"bad {what}: {name!r}")
    return name


@dataclass
class Block:
    """A primitive (non-subsystem) block instance."""

    name: str
    kind: str
    params: dict[str, object] = field(default_factory=dict)
    attrs: frozenset[str] = frozenset()
    n_in: int = 0
    n_out: int = 0

    @staticmethod
    def make(name: str, kind: str, params: dict[str, object] | None = None,
             extra_attrs: set[str] | frozenset[str] = frozenset()) -> "Block":
        """Construct with arity and attrs resolved from the kind table."""
        check_ident(name, "block name")
        params = dict(params or {})
        info = kind_info(kind)
        n_in, n_out = info.arity(params)
        attrs = frozenset(info.default_attrs | set(extra_attrs))
        if ELEMENT_INDEPENDENT in attrs and STATELESS not in attrs:
            raise SchemaError(f"block {name!r}: element_independent implies stateless")
        if kind == "UnitDelay" and ELEMENT_INDEPENDENT in attrs:
            raise SchemaError(f"block {name!r}: UnitDelay cannot be element_independent")
        return Block(name, kind, params, attrs, n_in, n_out)


@dataclass
class SignalLine:
    """One source port feeding one or more destination ports, with a declared dtype."""

    src: tuple[str, int]                 # (block name, 1-based out port)
    dsts: tuple[tuple[str, int], ...]    # (block name, 1-based in port)
    dtype: DType

    def __post_init__(self):
        if not self.dsts:
            raise SchemaError(f"line from {self.src} has no destination")


@dataclass
class Subsystem:
    """A container of blocks and nested subsystems. masked only hides the
    contents in an editor; the toolchain traverses it like any other."""

    name: str
    masked: bool = False
    children: list[object] = field(default_factory=list)   # Block | Subsystem
    lines: list[SignalLine] = field(default_factory=list)

    def child(self, name: str):
        for c in self.children:
            if c.name == name:
                return c
        raise KeyError(name)

    def blocks(self) -> list[Block]:
        return [c for c in self.children if isinstance(c, Block)]

    def subsystems(self) -> list["Subsystem"]:
        return [c for c in self.children if isinstance(c, Subsystem)]

    def port_blocks(self, kind: str) -> list[Block]:
        """Inport/Outport children in port order (explicit index param wins,
        then appearance order)."""
        ports = [c for c in self.children if isinstance(c, Block) and c.kind == kind]
        indexed: list[tuple[int, Block]] = []
        used = set()
        auto = 1
        for b in ports:
            idx = b.params.get("index")
            if idx is None:
                while auto in used:
                    auto += 1
                idx = auto
            idx = int(idx)
            if idx in used:
                raise SchemaError(f"duplicate {kind} index {idx} in subsystem {self.name!r}")
            used.add(idx)
            indexed.append((idx, b))
        indexed.sort(key=lambda p: p[0])
        if indexed and indexed[-1][0] != len(indexed):
            raise SchemaError(f"{kind} indices in {self.name!r} are not 1..{len(indexed)}")
        return [b for _, b in indexed]


@dataclass
class Model:
    name: str
    root: Subsystem
    step_count_hint: int = 1

    def __post_init__(self):
        if self.step_count_hint < 1:
            raise SchemaError("step_count_hint must be positive")


# ---------------------------------------------------------------------------
# Kind table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KindInfo:
    arity: "callable"            # params -> (n_in, n_out)
    default_attrs: frozenset[str]


def _need(params: dict, key: str, kind: str):
    if key not in params:
        raise SchemaError(f"{kind} requires param {key!r}")
    return params[key]


def _signs_arity(params):
    signs = str(params.setdefault("signs", "++"))
    if not signs or set(signs) - {"+", "-"}:
        raise SchemaError(f"bad Sum signs {signs!r}")
    if len(signs) < 2:
        raise SchemaError("Sum needs at least 2 inputs")
    return len(signs), 1


def _product_arity(params):
    n = int(params.setdefault("n", 2))
    if n < 2:
        raise SchemaError("Product needs at least 2 inputs")
    return n, 1


def _concat_arity(params):
    n = int(params.setdefault("n", 2))
    if n < 2:
        raise SchemaError("Concat needs at least 2 inputs")
    return n, 1


def _map_arity(params):
    op = _need(params, "op", "ElementwiseMap")
    if op not in MAP_OPS:
        raise SchemaError(f"unknown map op {op!r}")
    return 1, 1


def _reduce_arity(params):
    op = _need(params, "op", "Reduce")
    if op not in REDUCE_OPS:
        raise SchemaError(f"unknown reduce op {op!r}")
    return 1, 1


def _saturate_arity(params):
    lo = float(_need(params, "lo", "Saturate"))
    hi = float(_need(params, "hi", "Saturate"))
    if lo > hi:
        raise SchemaError(f"Saturate lo {lo} > hi {hi}")
    return 1, 1


def _slice_arity(params):
    start = int(_need(params, "start", "Slice"))
    stop = int(_need(params, "stop", "Slice"))
    if start < 1 or stop < start:
        raise SchemaError(f"bad Slice range {start}..{stop}")
    return 1, 1


def _buscreator_arity(params):
    names = parse_name_list(str(_need(params, "names", "BusCreator")))
    if len(names) < 2:
        raise SchemaError("BusCreator needs at least 2 elements")
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate BusCreator element names {names}")
    return len(names), 1


def _busselector_arity(params):
    sels = parse_selections(str(_need(params, "select", "BusSelector")))
    return 1, len(sels)


def _function_arity(params):
    ins = int(params.setdefault("ins", 1))
    outs = int(params.setdefault("outs", 1))
    _need(params, "body", "FunctionBlock")
    if ins < 0 or outs < 1:
        raise SchemaError(f"bad FunctionBlock arity ins={ins} outs={outs}")
    return ins, outs


def _toolbox_arity(params):
    check_ident(str(_need(params, "kind_name", "Toolbox")), "toolbox kind name")
    ins = int(params.setdefault("ins", 1))
    outs = int(params.setdefault("outs", 1))
    if ins < 0 or outs < 1:
        raise SchemaError(f"bad Toolbox arity ins={ins} outs={outs}")
    return ins, outs


def _splitter_arity(params):
    k = int(_need(params, "shards", "Splitter"))
    if k < 1:
        raise SchemaError("Splitter needs >= 1 shard")
    return 1, k


def _merger_arity(params):
    k = int(_need(params, "inputs", "Merger"))
    if k < 1:
        raise SchemaError("Merger needs >= 1 input")
    return k, 1


def _inport_arity(params):
    _need(params, "dtype", "Inport")
    return 0, 1


def _const_arity(params):
    literal_dtype(_need(params, "value", "Const"))
    return 0, 1


def _gain_arity(params):
    float(_need(params, "k", "Gain"))
    return 1, 1


def _switch_arity(params):
    float(_need(params, "threshold", "Switch"))
    return 3, 1


_PURE = frozenset({STATELESS})
_ELEMWISE = frozenset({STATELESS, ELEMENT_INDEPENDENT})

KIND_TABLE: dict[str, KindInfo] = {
    "Inport": KindInfo(_inport_arity, _PURE),
    "Outport": KindInfo(lambda p: (1, 0), _PURE),
    "Const": KindInfo(_const_arity, _PURE),
    "Gain": KindInfo(_gain_arity, _ELEMWISE),
    "Sum": KindInfo(_signs_arity, _ELEMWISE),
    "Product": KindInfo(_product_arity, _ELEMWISE),
    "Saturate": KindInfo(_saturate_arity, _ELEMWISE),
    "Switch": KindInfo(_switch_arity, _PURE),
    "MatMul": KindInfo(lambda p: (2, 1), _ELEMWISE),
    "ElementwiseMap": KindInfo(_map_arity, _ELEMWISE),
    "Reduce": KindInfo(_reduce_arity, _PURE),
    "Concat": KindInfo(_concat_arity, _PURE),
    "Slice": KindInfo(_slice_arity, _PURE),
    "UnitDelay": KindInfo(lambda p: (1, 1), frozenset()),
    "BusCreator": KindInfo(_buscreator_arity, _PURE),
    "BusSelector": KindInfo(_busselector_arity, _PURE),
    "FunctionBlock": KindInfo(_function_arity, _PURE),
    "Toolbox": KindInfo(_toolbox_arity, _PURE),
    "Splitter": KindInfo(_splitter_arity, _PURE),
    "Merger": KindInfo(_merger_arity, _PURE),
}

STRUCTURAL_KINDS = ("BusCreator", "BusSelector")


def kind_info(kind: str) -> KindInfo:
    try:
        return KIND_TABLE[kind]
    except KeyError:
        raise SchemaError(f"unknown block kind {kind!r}") from None


def parse_name_list(text: str) -> list[str]:
    return [check_ident(p.strip(), "bus element name") for p in text.split(",") if p.strip()]


def parse_selections(text: str) -> list[list[str]]:
    """Selection syntax: comma-separated paths, each a dot-joined sequence of
    element names or #N 1-based positions. E.g. "a, p.y, #1.2"."""
    sels = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        sels.append([seg.strip() for seg in part.split(".")])
    if not sels:
        raise SchemaError("BusSelector has no selections")
    for path in sels:
        for seg in path:
            if seg.startswith("#"):
                if not seg[1:].isdigit() or int(seg[1:]) < 1:
                    raise SchemaError(f"bad position segment {seg!r}")
            else:
                check_ident(seg, "bus selection segment")
    return sels


# ---------------------------------------------------------------------------
# Literals (Const values, UnitDelay init)
# ---------------------------------------------------------------------------

def literal_dtype(value) -> DType:
    """Shape of a numeric literal: float -> scalar, [..] -> vector, [[..]] -> matrix."""
    if isinstance(value, (int, float)):
        return Scalar()
    if isinstance(value, list) and value and all(isinstance(x, (int, float)) for x in value):
        return Vector(len(value))
    if (isinstance(value, list) and value and all(isinstance(r, list) for r in value)
            and len({len(r) for r in value}) == 1
            and all(isinstance(x, (int, float)) for r in value for x in r)):
        return Matrix(len(value), len(value[0]))
    raise SchemaError(f"bad literal {value!r}")


# ---------------------------------------------------------------------------
# Output type inference
# ---------------------------------------------------------------------------

def broadcast_result(dtypes: list[DType], where: str) -> DType:
    """Elementwise combination: scalars broadcast; Vector(3) row-broadcasts
    over PointCloud; otherwise all non-scalar shapes must agree. At most one
    point-cloud operand: live row counts are dynamic, so two clouds cannot be
    aligned elementwise."""
    shaped = [d for d in dtypes if not isinstance(d, Scalar)]
    if not shaped:
        return Scalar()
    clouds = [d for d in shaped if isinstance(d, PointCloud)]
    if clouds:
        if len(clouds) > 1:
            raise SchemaError(f"{where}: at most one point-cloud operand")
        rest = [d for d in shaped if not isinstance(d, PointCloud)]
        if any(not (isinstance(d, Vector) and d.n == 3) for d in rest):
            raise SchemaError(f"{where}: cannot broadcast {[str(d) for d in dtypes]}")
        return clouds[0]
    if len(set(shaped)) != 1:
        raise SchemaError(f"{where}: shape mismatch {[str(d) for d in dtypes]}")
    return shaped[0]


def infer_output_dtypes(block: Block, input_dtypes: list[DType]) -> list[DType] | None:
    """Declared/derived output dtypes, or None when the kind's outputs are
    taken on trust from the line declarations (FunctionBlock, Toolbox)."""
    k, p, where = block.kind, block.params, f"block {block.name!r} ({block.kind})"
    if k == "Inport":
        from .dtypes import parse_dtype
        return [parse_dtype(str(_need(p, "dtype", "Inport")))]
    if k == "Outport":
        return []
    if k == "Const":
        return [literal_dtype(p["value"])]
    if k in ("Gain", "ElementwiseMap", "Saturate", "UnitDelay"):
        return [input_dtypes[0]]
    if k in ("Sum", "Product"):
        return [broadcast_result(input_dtypes, where)]
    if k == "Switch":
        if not isinstance(input_dtypes[1], Scalar):
            raise SchemaError(f"{where}: control input must be scalar")
        if input_dtypes[0] != input_dtypes[2]:
            raise SchemaError(f"{where}: data inputs differ "
                              f"({input_dtypes[0]} vs {input_dtypes[2]})")
        return [input_dtypes[0]]
    if k == "MatMul":
        a, b = input_dtypes
        if isinstance(a, Matrix) and isinstance(b, Matrix) and a.cols == b.rows:
            return [Matrix(a.rows, b.cols)]
        if isinstance(a, Matrix) and isinstance(b, Vector) and a.cols == b.n:
            return [Vector(a.rows)]
        if isinstance(a, PointCloud) and isinstance(b, Matrix) and (b.rows, b.cols) == (3, 3):
            return [a]
        raise SchemaError(f"{where}: cannot multiply {a} by {b}")
    if k == "Reduce":
        return [Scalar()]
    if k == "Concat":
        if all(isinstance(d, Vector) for d in input_dtypes):
            return [Vector(sum(d.n for d in input_dtypes))]
        if all(isinstance(d, PointCloud) for d in input_dtypes):
            return [PointCloud(sum(d.max_n for d in input_dtypes))]
        raise SchemaError(f"{where}: Concat needs all-vector or all-pointcloud inputs")
    if k == "Slice":
        start, stop = int(p["start"]), int(p["stop"])
        src = input_dtypes[0]
        if isinstance(src, Vector):
            if stop > src.n:
                raise SchemaError(f"{where}: slice {start}..{stop} exceeds vector({src.n})")
            n = stop - start + 1
            return [Scalar()] if n == 1 else [Vector(n)]
        if isinstance(src, PointCloud):
            if stop > src.max_n:
                raise SchemaError(f"{where}: slice exceeds pointcloud({src.max_n})")
            return [PointCloud(stop - start + 1)]
        raise SchemaError(f"{where}: Slice input must be vector or pointcloud")
    if k == "BusCreator":
        names = parse_name_list(str(p["names"]))
        return [Bus(BusLayout(tuple(zip(names, input_dtypes))))]
    if k == "BusSelector":
        src = input_dtypes[0]
        if not isinstance(src, Bus):
            raise SchemaError(f"{where}: input is not a bus")
        out = []
        for path in parse_selections(str(p["select"])):
            out.append(resolve_selection(src.layout, path, where))
        return out
    if k == "Splitter":
        src = input_dtypes[0]
        k_shards = int(p["shards"])
        if isinstance(src, Vector):
            return [Vector(n) for n in shard_sizes(src.n, k_shards)]
        if isinstance(src, PointCloud):
            return [PointCloud(n) for n in shard_sizes(src.max_n, k_shards)]
        raise SchemaError(f"{where}: Splitter input must be vector or pointcloud")
    if k == "Merger":
        if all(isinstance(d, Vector) for d in input_dtypes):
            return [Vector(sum(d.n for d in input_dtypes))]
        if all(isinstance(d, PointCloud) for d in input_dtypes):
            return [PointCloud(sum(d.max_n for d in input_dtypes))]
        raise SchemaError(f"{where}: Merger needs all-vector or all-pointcloud inputs")
    if k in ("FunctionBlock", "Toolbox"):
        return None
    raise SchemaError(f"unknown block kind {k!r}")


def resolve_selection(layout: BusLayout, path: list[str], where: str) -> DType:
    """Resolve a name-or-position path against a layout; returns element dtype."""
    dt: DType = Bus(layout)
    for seg in path:
        if not isinstance(dt, Bus):
            raise SchemaError(f"{where}: selection {'.'.join(path)} descends into non-bus")
        lay = dt.layout
        if seg.startswith("#"):
            pos = int(seg[1:])
            if pos > len(lay.elements):
                raise SchemaError(f"{where}: position {pos} out of range")
            dt = lay.at(pos)[1]
        else:
            try:
                dt = lay.at(lay.index_of(seg))[1]
            except KeyError:
                raise SchemaError(f"{where}: no bus element named {seg!r}") from None
    return dt


def selection_positions(layout: BusLayout, path: list[str], where: str) -> list[int]:
    """Convert a name-or-position path to a pure 1-based position path."""
    positions = []
    dt: DType = Bus(layout)
    for seg in path:
        if not isinstance(dt, Bus):
            raise SchemaError(f"{where}: selection {'.'.join(path)} descends into non-bus")
        lay = dt.layout
        if seg.startswith("#"):
            pos = int(seg[1:])
            if pos > len(lay.elements):
                raise SchemaError(f"{where}: position {pos} out of range")
        else:
            try:
                pos = lay.index_of(seg)
            except KeyError:
                raise SchemaError(f"{where}: no bus element named {seg!r}") from None
        positions.append(pos)
        dt = lay.at(pos)[1]
    return positions


def shard_sizes(n: int, k: int) -> list[int]:
    """Contiguous partition of n rows into k shards, sizes differing by <= 1,
    remainder spread over the leading shards."""
    base, rem = divmod(n, k)
    return [base + (1 if i < rem else 0) for i in range(k)]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.path}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding]

    @property
    def ok(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(str(f) for f in self.findings)


def validate(model: Model) -> ValidationReport:
    """Structural validation. Returns findings; never raises, never mutates."""
    findings: list[Finding] = []
    _validate_subsystem(model.root, (), findings, at_root=True)
    _check_algebraic_loops(model, findings)
    findings.sort(key=lambda f: (f.path, f.code, f.message))
    return ValidationReport(findings)


def _path_str(path: tuple[str, ...]) -> str:
    return "/".join(path) if path else "<root>"


def _validate_subsystem(sub: Subsystem, path: tuple[str, ...],
                        findings: list[Finding], at_root: bool = False):
    names = [c.name for c in sub.children]
    for n in sorted({n for n in names if names.count(n) > 1}):
        findings.append(Finding("duplicate-name", _path_str(path),
                                f"child name {n!r} is not unique"))

    by_name = {c.name: c for c in sub.children}
    in_feeds: dict[tuple[str, int], int] = {}
    out_feeds: dict[tuple[str, int], int] = {}
    line_dtype: dict[tuple[str, int], DType] = {}

    for line in sub.lines:
        sb, sp = line.src
        src_blk = by_name.get(sb)
        if src_blk is None:
            findings.append(Finding("missing-block", _path_str(path),
                                    f"line source block {sb!r} does not exist"))
            continue
        if not 1 <= sp <= _n_out(src_blk):
            findings.append(Finding("bad-port", _path_str(path),
                                    f"{sb!r} has no out port {sp}"))
            continue
        out_feeds[(sb, sp)] = out_feeds.get((sb, sp), 0) + 1
        line_dtype[(sb, sp)] = line.dtype
        for db, dp in line.dsts:
            dst_blk = by_name.get(db)
            if dst_blk is None:
                findings.append(Finding("missing-block", _path_str(path),
                                        f"line destination block {db!r} does not exist"))
                continue
            if not 1 <= dp <= _n_in(dst_blk):
                findings.append(Finding("bad-port", _path_str(path),
                                        f"{db!r} has no in port {dp}"))
                continue
            in_feeds[(db, dp)] = in_feeds.get((db, dp), 0) + 1

    for c in sub.children:
        cpath = path + (c.name,)
        if isinstance(c, Subsystem):
            _validate_subsystem(c, cpath, findings)
            n_in, n_out = len(c.port_blocks("Inport")), len(c.port_blocks("Outport"))
        else:
            n_in, n_out = c.n_in, c.n_out
        for port in range(1, n_in + 1):
            got = in_feeds.get((c.name, port), 0)
            if got == 0:
                findings.append(Finding("dangling-input", _path_str(path),
                                        f"{c.name!r} in port {port} is unconnected"))
            elif got > 1:
                findings.append(Finding("multiply-driven", _path_str(path),
                                        f"{c.name!r} in port {port} driven {got} times"))
        for port in range(1, n_out + 1):
            if out_feeds.get((c.name, port), 0) == 0:
                findings.append(Finding("dangling-output", _path_str(path),
                                        f"{c.name!r} out port {port} feeds nothing"))
            elif out_feeds[(c.name, port)] > 1:
                findings.append(Finding("duplicate-line", _path_str(path),
                                        f"{c.name!r} out port {port} has multiple lines"))

    # dtype consistency: inferred output dtypes must match line declarations
    for c in sub.children:
        input_dtypes: list[DType] = []
        missing = False
        n_in = len(c.port_blocks("Inport")) if isinstance(c, Subsystem) else c.n_in
        for port in range(1, n_in + 1):
            dt = _incoming_dtype(sub, c.name, port)
            if dt is None:
                missing = True
                break
            input_dtypes.append(dt)
        if missing:
            continue
        if isinstance(c, Subsystem):
            declared = _subsystem_output_dtypes(c)
        else:
            try:
                declared = infer_output_dtypes(c, input_dtypes)
            except SchemaError as err:
                findings.append(Finding("type-error", _path_str(path), str(err)))
                continue
            if at_root and c.kind in ("Inport", "Outport"):
                dt = declared[0] if c.kind == "Inport" else input_dtypes[0]
                if isinstance(dt, Bus):
                    findings.append(Finding("bus-at-boundary", _path_str(path),
                                            f"root port {c.name!r} cannot carry a bus"))
        if declared is None:
            continue
        for port, want in enumerate(declared, start=1):
            got = line_dtype.get((c.name, port))
            if got is not None and got != want:
                findings.append(Finding("type-mismatch", _path_str(path),
                                        f"{c.name!r} out port {port} declared {got}, "
                                        f"computes {want}"))


def _n_in(c) -> int:
    return len(c.port_blocks("Inport")) if isinstance(c, Subsystem) else c.n_in


def _n_out(c) -> int:
    return len(c.port_blocks("Outport")) if isinstance(c, Subsystem) else c.n_out


def _incoming_dtype(sub: Subsystem, block_name: str, port: int) -> DType | None:
    for line in sub.lines:
        for db, dp in line.dsts:
            if db == block_name and dp == port:
                return line.dtype
    return None


def _subsystem_output_dtypes(sub: Subsystem) -> list[DType] | None:
    """Declared dtypes of a subsystem's out ports: the dtype of the line
    feeding each inner Outport (None if any is unknown)."""
    out = []
    for blk in sub.port_blocks("Outport"):
        dt = _incoming_dtype(sub, blk.name, 1)
        if dt is None:
            return None
        out.append(dt)
    return out


# ---------------------------------------------------------------------------
# Flat wiring graph (for algebraic-loop detection)
# ---------------------------------------------------------------------------

def flat_wiring(model: Model) -> tuple[list[tuple[tuple[str, ...], Block]],
                                       set[tuple[tuple[str, ...], tuple[str, ...]]]]:
    """All primitive blocks by path plus the value-dependency edges between
    them. Subsystem boundaries are bridged through their Inport/Outport
    blocks, which appear as ordinary nodes: a line whose endpoint is a
    subsystem attaches to the matching port block inside it. Edges into
    UnitDelay are kept (callers drop them for loop checks)."""
    nodes: list[tuple[tuple[str, ...], Block]] = []
    edges: set[tuple[tuple[str, ...], tuple[str, ...]]] = set()

    def endpoint(sub: Subsystem, path: tuple[str, ...], name: str, port: int,
                 side: str) -> tuple[str, ...]:
        c = sub.child(name)
        if isinstance(c, Subsystem):
            kind = "Outport" if side == "src" else "Inport"
            pb = c.port_blocks(kind)[port - 1]
            return path + (c.name, pb.name)
        return path + (name,)

    def walk(sub: Subsystem, path: tuple[str, ...]):
        for c in sub.children:
            if isinstance(c, Subsystem):
                walk(c, path + (c.name,))
            else:
                nodes.append((path + (c.name,), c))
        for line in sub.lines:
            try:
                producer = endpoint(sub, path, line.src[0], line.src[1], "src")
                consumers = [endpoint(sub, path, db, dp, "dst") for db, dp in line.dsts]
            except (KeyError, IndexError):
                continue  # dangling endpoints reported elsewhere
            for consumer in consumers:
                edges.add((producer, consumer))

    walk(model.root, ())
    return nodes, edges


def _check_algebraic_loops(model: Model, findings: list[Finding]):
    try:
        nodes, edges = flat_wiring(model)
    except (KeyError, IndexError, SchemaError):
        return  # wiring errors already reported per-subsystem
    kind_of = {p: b.kind for p, b in nodes}
    adj: dict[tuple[str, ...], list[tuple[str, ...]]] = {}
    for u, v in sorted(edges):
        if kind_of.get(v) == "UnitDelay":
            continue  # delay reads previous step; breaks the loop
        adj.setdefault(u, []).append(v)

    WHITE, GRAY, BLACK = 0, 1, 2
    color = {p: WHITE for p, _ in nodes}
    stack_path: list[tuple[str, ...]] = []

    def dfs(u):
        color[u] = GRAY
        stack_path.append(u)
        for v in adj.get(u, ()):
            if color.get(v, BLACK) == GRAY:
                i = stack_path.index(v)
                cyc = " -> ".join("/".join(p) for p in stack_path[i:] + [v])
                findings.append(Finding("algebraic-loop", "/".join(v), cyc))
                continue
            if color.get(v) == WHITE:
                dfs(v)
        stack_path.pop()
        color[u] = BLACK

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        for p, _ in sorted(nodes):
            if color[p] == WHITE:
                dfs(p)
    finally:
        sys.setrecursionlimit(old)


# ---------------------------------------------------------------------------
# Stats
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stats:
    block_count: int
    line_count: int
    function_code_lines: int
    toolbox_block_count: int


def model_stats(model: Model) -> Stats:
    """Counts over the whole tree; the root subsystem wrapper itself is excluded
    but nested subsystem blocks count as blocks."""
    blocks = lines = fn_lines = toolbox = 0

    def walk(sub: Subsystem, is_root: bool):
        nonlocal blocks, lines, fn_lines, toolbox
        if not is_root:
            blocks += 1
        lines += len(sub.lines)
        for c in sub.children:
            if isinstance(c, Subsystem):
                walk(c, False)
            else:
                blocks += 1
                if c.kind == "Toolbox":
                    toolbox += 1
                if c.kind == "FunctionBlock":
                    body = str(c.params.get("body", ""))
                    fn_lines += sum(1 for ln in body.splitlines() if ln.strip())

    walk(model.root, True)
    return Stats(blocks, lines, fn_lines, toolbox)
