"""C99 code generation from a FlatIR plus (optionally) a Schedule.

Output bundle layout is fixed: model.c (globals, init, ports, step driver),
tasks.c (task function bodies), globals.h, manifest.json. The sources compile
against the runtime-support kit (blx_runtime.h/.c + blx_harness.c) shipped in
cgen-runtime/; synchronization is one ready-flag per cross-core variable plus
a join barrier at the end of every step. Generation is deterministic: the
same (ir, schedule) yields byte-identical files.

Kernel statements mirror the interpreter's evaluation orders exactly (left
folds, first-term-seeded dot products, branch-form clamps), so a compiled
binary replays traces bit-identically on the build host.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dtypes import DType, Matrix, PointCloud, Scalar, Vector
from .errors import InvalidSchedule, MissingTemplate
from .extractor import FlatBlock, FlatIR
from .kernels import MAP_OP_IMPLS, expr_to_c, parse_body
from .scheduler import Schedule

GENERATOR_VERSION = "blxc-0.1.0"


@dataclass
class SourceBundle:
    files: dict[str, str]
    entry_point: str
    task_functions: list[str]
    manifest: dict

    def write(self, out_dir: str) -> list[str]:
        import os

        os.makedirs(out_dir, exist_ok=True)
        written = []
        for name in sorted(self.files):
            path = os.path.join(out_dir, name)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.files[name])
            written.append(path)
        return written


# ---------------------------------------------------------------------------
# Naming and typing helpers
# ---------------------------------------------------------------------------

def _cvar(name: str) -> str:
    return "g_" + name


def _cstate(name: str) -> str:
    return "s_" + name


def _cflag(name: str) -> str:
    return "f_" + name


def _cloud_type(max_n: int) -> str:
    return f"blx_cloud{max_n}_t"


def _decl(dt: DType, cname: str) -> str:
    if isinstance(dt, Scalar):
        return f"double {cname}"
    if isinstance(dt, Vector):
        return f"double {cname}[{dt.n}]"
    if isinstance(dt, Matrix):
        return f"double {cname}[{dt.rows}][{dt.cols}]"
    if isinstance(dt, PointCloud):
        return f"{_cloud_type(dt.max_n)} {cname}"
    raise MissingTemplate(f"no C representation for {dt}")


def _cnum(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return f"{int(v)}.0"
    return repr(v)


# ---------------------------------------------------------------------------
# Per-kind statement templates
# ---------------------------------------------------------------------------

class _BlockEmitter:
    def __init__(self, ir: FlatIR):
        self.ir = ir
        self.vm = ir.var_map()

    def dtype(self, var: str) -> DType:
        return self.vm[var].dtype

    def emit(self, b: FlatBlock) -> list[str]:
        """C statements computing b's outputs from its inputs."""
        fn = getattr(self, f"_k_{b.kind.lower()}", None)
        if fn is None:
            raise MissingTemplate(f"no C template for kind {b.kind!r}")
        return [f"/* {b.uname} ({b.kind}) */"] + fn(b)

    # -- trivial/port kinds --------------------------------------------------

    def _k_inport(self, b):
        return ["/* written by the harness before the step */"]

    def _k_outport(self, b):
        return ["/* read by the harness after the step */"]

    def _k_const(self, b):
        out = _cvar(b.outputs[0])
        val = b.params["value"]
        dt = self.dtype(b.outputs[0])
        if isinstance(dt, Scalar):
            return [f"{out} = {_cnum(val)};"]
        if isinstance(dt, Vector):
            return [f"{out}[{i}] = {_cnum(x)};" for i, x in enumerate(val)]
        if isinstance(dt, Matrix):
            return [f"{out}[{i}][{j}] = {_cnum(x)};"
                    for i, row in enumerate(val) for j, x in enumerate(row)]
        raise MissingTemplate("Const over point clouds is not supported")

    def _k_unitdelay(self, b):
        out, dt = _cvar(b.outputs[0]), self.dtype(b.outputs[0])
        state = _cstate(b.uname + "_state")
        return self._copy(out, state, dt)

    # -- elementwise families --------------------------------------------------

    def _elementwise(self, b, combine):
        """combine(operand_exprs) -> C expression for one element."""
        out = b.outputs[0]
        dt = self.dtype(out)
        ov = _cvar(out)
        if isinstance(dt, Scalar):
            return [f"{ov} = {combine([self._elem(v, None) for v in b.inputs])};"]
        body = []
        if isinstance(dt, Vector):
            idx = "i"
            body.append(f"for (int i = 0; i < {dt.n}; i++) {{")
            body.append(f"  {ov}[i] = "
                        f"{combine([self._elem(v, (idx, None)) for v in b.inputs])};")
            body.append("}")
            return body
        if isinstance(dt, Matrix):
            body.append(f"for (int i = 0; i < {dt.rows}; i++) "
                        f"for (int j = 0; j < {dt.cols}; j++) {{")
            body.append(f"  {ov}[i][j] = "
                        f"{combine([self._elem(v, ('i', 'j')) for v in b.inputs])};")
            body.append("}")
            return body
        if isinstance(dt, PointCloud):
            n_src = self._cloud_len(b.inputs)
            body.append(f"{ov}.n = {n_src};")
            body.append(f"for (int i = 0; i < {ov}.n; i++) "
                        "for (int j = 0; j < 3; j++) {")
            body.append(f"  {ov}.p[i][j] = "
                        f"{combine([self._elem(v, ('i', 'j')) for v in b.inputs])};")
            body.append("}")
            return body
        raise MissingTemplate(f"elementwise over {dt}")

    def _cloud_len(self, inputs) -> str:
        for v in inputs:
            if isinstance(self.dtype(v), PointCloud):
                return f"{_cvar(v)}.n"
        raise MissingTemplate("no cloud operand")

    def _elem(self, var: str, idx) -> str:
        """Element access with broadcast: scalars ignore indices, vector(3)
        row-broadcasts over clouds via the column index."""
        dt = self.dtype(var)
        cv = _cvar(var)
        if isinstance(dt, Scalar):
            return cv
        if idx is None:
            raise MissingTemplate(f"array operand {var} in scalar context")
        i, j = idx
        if isinstance(dt, Vector):
            if j is not None and dt.n == 3 and i is not None:
                # row-broadcast over a cloud: index by column only
                return f"{cv}[{j}]"
            return f"{cv}[{i}]"
        if isinstance(dt, Matrix):
            return f"{cv}[{i}][{j}]"
        if isinstance(dt, PointCloud):
            return f"{cv}.p[{i}][{j}]"
        raise MissingTemplate(f"operand {dt}")

    def _k_gain(self, b):
        k = _cnum(b.params["k"])
        return self._elementwise(b, lambda ops: f"{k} * {ops[0]}")

    def _k_sum(self, b):
        signs = str(b.params["signs"])

        def combine(ops):
            expr = ops[0] if signs[0] == "+" else f"(-{ops[0]})"
            for op, s in zip(ops[1:], signs[1:]):
                expr = f"({expr} {s} {op})"
            return expr

        return self._elementwise(b, combine)

    def _k_product(self, b):
        def combine(ops):
            expr = ops[0]
            for op in ops[1:]:
                expr = f"({expr} * {op})"
            return expr

        return self._elementwise(b, combine)

    def _k_saturate(self, b):
        lo, hi = _cnum(b.params["lo"]), _cnum(b.params["hi"])
        return self._elementwise(
            b, lambda ops: f"blx_clamp({ops[0]}, {lo}, {hi})")

    def _k_elementwisemap(self, b):
        impl = MAP_OP_IMPLS[str(b.params["op"])]
        return self._elementwise(b, lambda ops: impl.c_expr.format(x=ops[0]))

    def _k_switch(self, b):
        ctrl = _cvar(b.inputs[1])
        thr = _cnum(b.params["threshold"])
        out, dt = _cvar(b.outputs[0]), self.dtype(b.outputs[0])
        take1 = self._copy(out, _cvar(b.inputs[0]), dt, src_is_var=True)
        take3 = self._copy(out, _cvar(b.inputs[2]), dt, src_is_var=True)
        return ([f"if ({ctrl} >= {thr}) {{"] + ["  " + s for s in take1]
                + ["} else {"] + ["  " + s for s in take3] + ["}"])

    def _copy(self, dst: str, src: str, dt: DType, src_is_var: bool = True) -> list[str]:
        del src_is_var
        if isinstance(dt, Scalar):
            return [f"{dst} = {src};"]
        if isinstance(dt, Vector):
            return [f"for (int i = 0; i < {dt.n}; i++) {dst}[i] = {src}[i];"]
        if isinstance(dt, Matrix):
            return [f"for (int i = 0; i < {dt.rows}; i++) for (int j = 0; j < "
                    f"{dt.cols}; j++) {dst}[i][j] = {src}[i][j];"]
        if isinstance(dt, PointCloud):
            return [f"{dst} = {src};"]  # struct copy
        raise MissingTemplate(f"copy of {dt}")

    def _k_matmul(self, b):
        a, c = b.inputs
        adt, cdt = self.dtype(a), self.dtype(c)
        out = b.outputs[0]
        ov, av, cv = _cvar(out), _cvar(a), _cvar(c)
        if isinstance(adt, Matrix) and isinstance(cdt, Matrix):
            inner = adt.cols
            terms = " + ".join(f"{av}[i][{j}] * {cv}[{j}][k]" for j in range(inner))
            return [f"for (int i = 0; i < {adt.rows}; i++) "
                    f"for (int k = 0; k < {cdt.cols}; k++) {{",
                    f"  {ov}[i][k] = {_left_fold_sum(terms.split(' + '))};", "}"]
        if isinstance(adt, Matrix) and isinstance(cdt, Vector):
            terms = [f"{av}[i][{j}] * {cv}[{j}]" for j in range(adt.cols)]
            return [f"for (int i = 0; i < {adt.rows}; i++) {{",
                    f"  {ov}[i] = {_left_fold_sum(terms)};", "}"]
        if isinstance(adt, PointCloud) and isinstance(cdt, Matrix):
            lines = [f"{ov}.n = {av}.n;",
                     f"for (int i = 0; i < {av}.n; i++) {{"]
            for k in range(3):
                terms = [f"{av}.p[i][{j}] * {cv}[{j}][{k}]" for j in range(3)]
                lines.append(f"  {ov}.p[i][{k}] = {_left_fold_sum(terms)};")
            lines.append("}")
            return lines
        raise MissingTemplate(f"MatMul over {adt} x {cdt}")

    def _k_reduce(self, b):
        op = str(b.params["op"])
        src, dt = b.inputs[0], self.dtype(b.inputs[0])
        ov, sv = _cvar(b.outputs[0]), _cvar(src)
        if isinstance(dt, Vector):
            first, total, at = f"{sv}[0]", str(dt.n), lambda: f"{sv}[i]"
            head = f"for (int i = 1; i < {total}; i++)"
        elif isinstance(dt, Matrix):
            first = f"{sv}[0][0]"
            total = str(dt.rows * dt.cols)
            at = lambda: f"{sv}[i / {dt.cols}][i % {dt.cols}]"  # noqa: E731
            head = f"for (int i = 1; i < {total}; i++)"
        elif isinstance(dt, PointCloud):
            first = f"{sv}.p[0][0]"
            total = f"({sv}.n * 3)"
            at = lambda: f"{sv}.p[i / 3][i % 3]"  # noqa: E731
            head = f"for (int i = 1; i < {total}; i++)"
        else:
            raise MissingTemplate(f"Reduce over {dt}")
        if op == "sum":
            upd = f"{ov} = {ov} + {at()};"
        elif op == "min":
            upd = f"if ({at()} < {ov}) {ov} = {at()};"
        else:
            upd = f"if ({at()} > {ov}) {ov} = {at()};"
        return [f"{ov} = {first};", f"{head} {{ {upd} }}"]

    def _k_concat(self, b):
        out, odt = b.outputs[0], self.dtype(b.outputs[0])
        ov = _cvar(out)
        lines = []
        if isinstance(odt, Vector):
            off = 0
            for v in b.inputs:
                dt = self.dtype(v)
                n = dt.n if isinstance(dt, Vector) else 1
                if isinstance(dt, Vector):
                    lines.append(f"for (int i = 0; i < {n}; i++) "
                                 f"{ov}[{off} + i] = {_cvar(v)}[i];")
                else:
                    lines.append(f"{ov}[{off}] = {_cvar(v)};")
                off += n
            return lines
        if isinstance(odt, PointCloud):
            lines.append(f"{ov}.n = 0;")
            for v in b.inputs:
                lines.append(f"for (int i = 0; i < {_cvar(v)}.n; i++) {{ "
                             f"for (int j = 0; j < 3; j++) "
                             f"{ov}.p[{ov}.n][j] = {_cvar(v)}.p[i][j]; {ov}.n++; }}")
            return lines
        raise MissingTemplate(f"Concat to {odt}")

    def _k_slice(self, b):
        start, stop = int(b.params["start"]), int(b.params["stop"])
        src, sdt = b.inputs[0], self.dtype(b.inputs[0])
        out, odt = b.outputs[0], self.dtype(b.outputs[0])
        ov, sv = _cvar(out), _cvar(src)
        if isinstance(sdt, Vector):
            if isinstance(odt, Scalar):
                return [f"{ov} = {sv}[{start - 1}];"]
            return [f"for (int i = 0; i < {stop - start + 1}; i++) "
                    f"{ov}[i] = {sv}[{start - 1} + i];"]
        if isinstance(sdt, PointCloud):
            return [f"{ov}.n = ({sv}.n < {stop} ? {sv}.n : {stop}) - {start - 1};",
                    f"if ({ov}.n < 0) {ov}.n = 0;",
                    f"for (int i = 0; i < {ov}.n; i++) for (int j = 0; j < 3; j++) "
                    f"{ov}.p[i][j] = {sv}.p[{start - 1} + i][j];"]
        raise MissingTemplate(f"Slice over {sdt}")

    def _k_splitter(self, b):
        k = int(b.params["shards"])
        src = _cvar(b.inputs[0])
        sdt = self.dtype(b.inputs[0])
        lines = []
        if isinstance(sdt, PointCloud):
            lines.append(f"{{ int32_t base = {src}.n / {k}, rem = {src}.n % {k}, "
                         "off = 0;")
            for i, out in enumerate(b.outputs):
                ov = _cvar(out)
                lines.append(f"  {{ int32_t sz = base + ({i} < rem ? 1 : 0);")
                lines.append(f"    {ov}.n = sz;")
                lines.append(f"    for (int i = 0; i < sz; i++) for (int j = 0; j < 3; "
                             f"j++) {ov}.p[i][j] = {src}.p[off + i][j];")
                lines.append("    off += sz; }")
            lines.append("}")
            return lines
        if isinstance(sdt, Vector):
            off = 0
            from .model import shard_sizes
            for out, sz in zip(b.outputs, shard_sizes(sdt.n, k)):
                ov = _cvar(out)
                lines.append(f"for (int i = 0; i < {sz}; i++) "
                             f"{ov}[i] = {src}[{off} + i];")
                off += sz
            return lines
        raise MissingTemplate(f"Splitter over {sdt}")

    def _k_merger(self, b):
        out, odt = b.outputs[0], self.dtype(b.outputs[0])
        ov = _cvar(out)
        if isinstance(odt, PointCloud):
            lines = [f"{ov}.n = 0;"]
            for v in b.inputs:
                lines.append(f"for (int i = 0; i < {_cvar(v)}.n; i++) {{ "
                             f"for (int j = 0; j < 3; j++) "
                             f"{ov}.p[{ov}.n][j] = {_cvar(v)}.p[i][j]; {ov}.n++; }}")
            return lines
        if isinstance(odt, Vector):
            lines, off = [], 0
            for v in b.inputs:
                n = self.dtype(v).n
                lines.append(f"for (int i = 0; i < {n}; i++) "
                             f"{ov}[{off} + i] = {_cvar(v)}[i];")
                off += n
            return lines
        raise MissingTemplate(f"Merger to {odt}")

    def _k_functionblock(self, b):
        for v in b.inputs + b.outputs:
            if not isinstance(self.dtype(v), Scalar):
                raise MissingTemplate(
                    f"{b.uname}: C templates support scalar FunctionBlocks only")
        stmts = parse_body(str(b.params["body"]))
        consts = {k: float(v) for k, v in b.params.items()
                  if isinstance(v, (int, float)) and k not in ("ins", "outs")}
        temps = sorted({t for t, _ in stmts if not _is_port_name(t, b)})

        def name_of(ident: str) -> str:
            if ident.startswith("u") and ident[1:].isdigit():
                return _cvar(b.inputs[int(ident[1:]) - 1])
            if ident.startswith("y") and ident[1:].isdigit():
                return _cvar(b.outputs[int(ident[1:]) - 1])
            if ident in consts:
                return _cnum(consts[ident])
            return "t_" + ident

        lines = ["{"]
        if temps:
            lines.append("  double " + ", ".join("t_" + t for t in temps) + ";")
        for target, expr in stmts:
            lines.append(f"  {name_of(target)} = {expr_to_c(expr, name_of)};")
        lines.append("}")
        return lines

    def _k_toolbox(self, b):
        kernel = self._opaque_kernel_name(b)
        fn = getattr(self, f"_tk_{kernel}", None)
        if fn is None:
            raise MissingTemplate(f"no C template for toolbox kernel {kernel!r}")
        return fn(b)

    def _opaque_kernel_name(self, b) -> str:
        from .registry import load_registry

        registry = getattr(self, "_registry", None)
        if registry is None:
            registry = self._registry = load_registry()
        mode, entry = registry.lookup(str(b.params["kind_name"]))
        if mode != "opaque":
            raise MissingTemplate(f"{b.uname}: expandable toolbox left in IR")
        return entry.kernel

    def _tk_cloud_preprocess(self, b):
        # mirrors kernel_cloud_preprocess: scale, then (scaled @ R^T) as an
        # ordered sum of three terms (zero terms kept for signed-zero parity),
        # then the offset
        src, out = _cvar(b.inputs[0]), _cvar(b.outputs[0])
        p = b.params
        sc = _cnum(p["scale"])
        return [
            f"{{ double th = {_cnum(p['theta'])};",
            "  double c = cos(th), s = sin(th);",
            f"  {out}.n = {src}.n;",
            f"  for (int i = 0; i < {src}.n; i++) {{",
            f"    double sx = {sc} * {src}.p[i][0];"
            f" double sy = {sc} * {src}.p[i][1];"
            f" double sz = {sc} * {src}.p[i][2];",
            f"    {out}.p[i][0] = (((sx * c) + (sy * (-s))) + (sz * 0.0)) + {_cnum(p['tx'])};",
            f"    {out}.p[i][1] = (((sx * s) + (sy * c)) + (sz * 0.0)) + {_cnum(p['ty'])};",
            f"    {out}.p[i][2] = (((sx * 0.0) + (sy * 0.0)) + (sz * 1.0)) + {_cnum(p['tz'])};",
            "  }",
            "}",
        ]

    def _tk_voxel_grid(self, b):
        src, out = _cvar(b.inputs[0]), _cvar(b.outputs[0])
        cap = self.dtype(b.inputs[0]).max_n
        vs = _cnum(b.params["voxel_size"])
        return [
            f"{{ static double kx[{cap}], ky[{cap}], kz[{cap}]; int32_t m = 0;",
            f"  for (int i = 0; i < {src}.n; i++) {{",
            f"    double cx = floor({src}.p[i][0] / {vs});",
            f"    double cy = floor({src}.p[i][1] / {vs});",
            f"    double cz = floor({src}.p[i][2] / {vs});",
            "    int found = 0;",
            "    for (int q = 0; q < m; q++) {",
            "      if (kx[q] == cx && ky[q] == cy && kz[q] == cz) { found = 1; break; }",
            "    }",
            "    if (!found) {",
            "      kx[m] = cx; ky[m] = cy; kz[m] = cz;",
            f"      for (int j = 0; j < 3; j++) {out}.p[m][j] = {src}.p[i][j];",
            "      m++;",
            "    }",
            "  }",
            f"  {out}.n = m;",
            "}",
        ]

    def _tk_random_downsample(self, b):
        src, out = _cvar(b.inputs[0]), _cvar(b.outputs[0])
        cap = self.dtype(b.inputs[0]).max_n
        max_pts = int(b.params["max_points"])
        seed = int(b.params["seed"])
        return [
            f"if ({src}.n <= {max_pts}) {{",
            f"  {out}.n = {src}.n;",
            f"  for (int32_t i = 0; i < {src}.n; i++) for (int j = 0; j < 3; j++) "
            f"{out}.p[i][j] = {src}.p[i][j];",
            "} else {",
            f"  static int32_t idx[{cap}];",
            f"  blx_rng_t rng; blx_rng_seed(&rng, {seed}ULL);",
            f"  for (int32_t i = 0; i < {src}.n; i++) idx[i] = i;",
            f"  for (int32_t i = 0; i < {max_pts}; i++) {{",
            f"    int32_t j = i + (int32_t)blx_rng_below(&rng, "
            f"(uint64_t)({src}.n - i));",
            "    int32_t t = idx[i]; idx[i] = idx[j]; idx[j] = t;",
            "  }",
            f"  blx_sort_i32(idx, {max_pts});",
            f"  {out}.n = {max_pts};",
            f"  for (int32_t i = 0; i < {max_pts}; i++) for (int j = 0; j < 3; j++) "
            f"{out}.p[i][j] = {src}.p[idx[i]][j];",
            "}",
        ]


def _left_fold_sum(terms: list[str]) -> str:
    expr = terms[0]
    for t in terms[1:]:
        expr = f"({expr} + {t})"
    return expr


def _is_port_name(t: str, b) -> bool:
    if t.startswith("y") and t[1:].isdigit() and int(t[1:]) <= len(b.outputs):
        return True
    if t.startswith("u") and t[1:].isdigit() and int(t[1:]) <= len(b.inputs):
        return True
    return False


# ---------------------------------------------------------------------------
# Bundle assembly
# ---------------------------------------------------------------------------

@dataclass
class _Assembly:
    ir: FlatIR
    sched: Schedule | None
    emitter: _BlockEmitter = field(init=False)

    def __post_init__(self):
        self.emitter = _BlockEmitter(self.ir)


def emit_sequential_c(ir: FlatIR) -> SourceBundle:
    """Single task function, topological order, no synchronization."""
    asm = _Assembly(ir, None)
    order = ir.toposort()
    tasks = {"blx_task_seq": order}
    return _emit_bundle(asm, tasks, parallel=False)


def emit_parallel_c(ir: FlatIR, sched: Schedule) -> SourceBundle:
    """One task function per used core, blocks in start-time order, ready-flag
    waits on cross-core inputs, per-step join barrier."""
    _validate_pairing(ir, sched)
    cores = sorted(set(sched.assignment.values()))
    tasks: dict[str, list[FlatBlock]] = {}
    for c in cores:
        blocks = [b for b in ir.blocks if sched.assignment[b.uname] == c]
        blocks.sort(key=lambda b: (sched.start_ns[b.uname], b.uname))
        tasks[f"blx_task_c{c}"] = blocks
    asm = _Assembly(ir, sched)
    return _emit_bundle(asm, tasks, parallel=True)


def _validate_pairing(ir: FlatIR, sched: Schedule):
    missing = [b.uname for b in ir.blocks if b.uname not in sched.assignment]
    if missing:
        raise InvalidSchedule(f"schedule lacks blocks {missing[:5]}")
    extra = sorted(set(sched.assignment) - {b.uname for b in ir.blocks})
    if extra:
        raise InvalidSchedule(f"schedule names unknown blocks {extra[:5]}")


def _cross_core_vars(ir: FlatIR, sched: Schedule) -> set[str]:
    out = set()
    vm = ir.var_map()
    for u, v, var in ir.edges():
        if sched.assignment[u] != sched.assignment[v] and not vm[var].external:
            out.add(var)
    return out


def _emit_bundle(asm: _Assembly, tasks: dict[str, list[FlatBlock]],
                 parallel: bool) -> SourceBundle:
    ir, sched = asm.ir, asm.sched
    cloud_caps = sorted({v.dtype.max_n for v in ir.vars
                         if isinstance(v.dtype, PointCloud)}
                        | {s.dtype.max_n for s in ir.state_vars
                           if isinstance(s.dtype, PointCloud)})
    flags = sorted(_cross_core_vars(ir, sched)) if parallel else []

    globals_h = _emit_globals_h(ir, cloud_caps, flags, tasks, parallel)
    tasks_c = _emit_tasks_c(asm, tasks, flags, parallel)
    model_c = _emit_model_c(ir, flags, tasks, parallel)
    manifest = _manifest(ir, tasks, parallel)

    files = {
        "globals.h": globals_h,
        "tasks.c": tasks_c,
        "model.c": model_c,
        "manifest.json": json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    }
    return SourceBundle(files=files, entry_point="blx_step",
                        task_functions=sorted(tasks), manifest=manifest)


def _banner(what: str) -> list[str]:
    return [f"/* {what} -- generated by {GENERATOR_VERSION}; do not edit.",
            " * Synchronization: one ready flag per cross-core variable; the",
            " * spawn/join of the per-core tasks is the end-of-step barrier.",
            " */"]


def _emit_globals_h(ir: FlatIR, cloud_caps, flags, tasks, parallel) -> str:
    lines = _banner("globals.h")
    lines += ["#ifndef BLX_GLOBALS_H", "#define BLX_GLOBALS_H",
              "#include <stdint.h>", '#include "blx_runtime.h"', ""]
    for cap in cloud_caps:
        lines.append(f"typedef struct {{ int32_t n; double p[{cap}][3]; }} "
                     f"{_cloud_type(cap)};")
    if cloud_caps:
        lines.append("")
    lines.append(f"#define BLX_NUM_TASKS {len(tasks)}")
    lines.append(f"#define BLX_PARALLEL {1 if parallel else 0}")
    lines.append("")
    lines.append("/* signal variables (single writer per step) */")
    for v in sorted(ir.vars, key=lambda v: v.name):
        lines.append(f"extern {_decl(v.dtype, _cvar(v.name))};")
    if ir.state_vars:
        lines.append("")
        lines.append("/* unit-delay states (latched at end of step) */")
        for s in sorted(ir.state_vars, key=lambda s: s.name):
            lines.append(f"extern {_decl(s.dtype, _cstate(s.name))};")
    if flags:
        lines.append("")
        lines.append("/* ready flags for cross-core variables */")
        for f in flags:
            lines.append(f"extern blx_flag_t {_cflag(f)};")
    lines += ["",
              "void blx_init(void);",
              "void blx_step(void);", ""]
    for t in sorted(tasks):
        lines.append(f"void {t}(void);")
    lines += ["",
              "extern const blx_port_t blx_inports[];",
              "extern const int blx_inport_count;",
              "extern const blx_port_t blx_outports[];",
              "extern const int blx_outport_count;",
              "", "#endif /* BLX_GLOBALS_H */", ""]
    return "\n".join(lines)


def _port_entry(ir: FlatIR, blk: FlatBlock) -> str:
    name = str(blk.params.get("port", blk.uname))
    var = blk.outputs[0] if blk.kind == "Inport" else blk.inputs[0]
    dt = ir.var_map()[var].dtype
    cv = _cvar(var)
    if isinstance(dt, Scalar):
        kind, rows, cols, ptr, data = "BLX_SCALAR", 1, 1, f"&{cv}", "0"
    elif isinstance(dt, Vector):
        kind, rows, cols, ptr, data = "BLX_VECTOR", dt.n, 1, cv, "0"
    elif isinstance(dt, Matrix):
        kind, rows, cols, ptr, data = ("BLX_MATRIX", dt.rows, dt.cols,
                                       f"&{cv}[0][0]", "0")
    elif isinstance(dt, PointCloud):
        kind, rows, cols, ptr, data = ("BLX_CLOUD", dt.max_n, 3,
                                       f"&{cv}.n", f"(void *)&{cv}.p[0][0]")
    else:
        raise MissingTemplate(f"port over {dt}")
    return (f'  {{ "{name}", {kind}, {rows}, {cols}, (void *){ptr}, {data} }},')


def _emit_model_c(ir: FlatIR, flags, tasks, parallel) -> str:
    lines = _banner("model.c")
    lines += ['#include "globals.h"', ""]
    for v in sorted(ir.vars, key=lambda v: v.name):
        lines.append(f"{_decl(v.dtype, _cvar(v.name))};")
    for s in sorted(ir.state_vars, key=lambda s: s.name):
        lines.append(f"{_decl(s.dtype, _cstate(s.name))};")
    for f in flags:
        lines.append(f"blx_flag_t {_cflag(f)} = BLX_FLAG_INIT;")
    lines.append("")

    # sorted by port name so the harness prints keys in the same order as the
    # simulator's JSON dump
    inports = sorted((b for b in ir.blocks if b.kind == "Inport"),
                     key=lambda b: str(b.params.get("port", b.uname)))
    outports = sorted((b for b in ir.blocks if b.kind == "Outport"),
                      key=lambda b: str(b.params.get("port", b.uname)))
    lines.append("const blx_port_t blx_inports[] = {")
    for b in inports:
        lines.append(_port_entry(ir, b))
    lines += ["};", f"const int blx_inport_count = {len(inports)};", ""]
    lines.append("const blx_port_t blx_outports[] = {")
    for b in outports:
        lines.append(_port_entry(ir, b))
    lines += ["};", f"const int blx_outport_count = {len(outports)};", ""]

    lines.append("void blx_init(void) {")
    for s in sorted(ir.state_vars, key=lambda s: s.name):
        lines += ["  " + ln for ln in _state_init(s)]
    lines += ["}", ""]

    lines.append("static void blx_state_update(void) {")
    by_uname = {b.uname: b for b in ir.blocks}
    for s in sorted(ir.state_vars, key=lambda s: s.name):
        src = by_uname[s.owner].inputs[0]
        em = _BlockEmitter(ir)
        lines += ["  " + ln for ln in em._copy(_cstate(s.name), _cvar(src), s.dtype)]
    lines += ["}", ""]

    if parallel:
        lines.append("static const blx_task_fn blx_task_table[] = {")
        for t in sorted(tasks):
            lines.append(f"  {t},")
        lines += ["};", ""]
        lines.append("void blx_step(void) {")
        for f in flags:
            lines.append(f"  blx_flag_reset(&{_cflag(f)});")
        lines.append("  blx_run_tasks(blx_task_table, BLX_NUM_TASKS);")
        lines.append("  blx_state_update();")
        lines += ["}", ""]
    else:
        lines.append("void blx_step(void) {")
        for t in sorted(tasks):
            lines.append(f"  {t}();")
        lines.append("  blx_state_update();")
        lines += ["}", ""]
    return "\n".join(lines)


def _state_init(s) -> list[str]:
    dst = _cstate(s.name)
    init = s.init
    if isinstance(s.dtype, Scalar):
        return [f"{dst} = {_cnum(init)};"]
    if isinstance(s.dtype, Vector):
        if isinstance(init, (int, float)):
            return [f"for (int i = 0; i < {s.dtype.n}; i++) {dst}[i] = {_cnum(init)};"]
        return [f"{dst}[{i}] = {_cnum(x)};" for i, x in enumerate(init)]
    if isinstance(s.dtype, Matrix):
        if isinstance(init, (int, float)):
            return [f"for (int i = 0; i < {s.dtype.rows}; i++) for (int j = 0; j < "
                    f"{s.dtype.cols}; j++) {dst}[i][j] = {_cnum(init)};"]
        return [f"{dst}[{i}][{j}] = {_cnum(x)};"
                for i, row in enumerate(init) for j, x in enumerate(row)]
    if isinstance(s.dtype, PointCloud):
        if not isinstance(init, (int, float)):
            raise MissingTemplate("cloud state init must be a scalar fill")
        return [f"{dst}.n = {s.dtype.max_n};",
                f"for (int i = 0; i < {s.dtype.max_n}; i++) for (int j = 0; j < 3; "
                f"j++) {dst}.p[i][j] = {_cnum(init)};"]
    raise MissingTemplate(f"state init for {s.dtype}")


def _emit_tasks_c(asm: _Assembly, tasks: dict[str, list[FlatBlock]],
                  flags, parallel) -> str:
    ir, sched = asm.ir, asm.sched
    vm = ir.var_map()
    flag_set = set(flags)
    lines = _banner("tasks.c")
    lines += ["#include <math.h>", '#include "globals.h"', ""]
    helper_at = len(lines)  # clamp helper inserted here only if referenced

    for tname in sorted(tasks):
        blocks = tasks[tname]
        lines.append(f"void {tname}(void) {{")
        waited: set[str] = set()
        for b in blocks:
            if parallel and b.kind != "UnitDelay":
                for v in b.inputs:
                    producer = vm[v].producer[0]
                    if (v in flag_set and v not in waited
                            and sched.assignment[producer] != sched.assignment[b.uname]):
                        lines.append(f"  blx_flag_wait(&{_cflag(v)});")
                        waited.add(v)
            for ln in asm.emitter.emit(b):
                lines.append("  " + ln)
            if parallel:
                for v in b.outputs:
                    if v in flag_set:
                        lines.append(f"  blx_flag_set(&{_cflag(v)});")
        lines.append("}")
        lines.append("")
    if any("blx_clamp(" in ln for ln in lines[helper_at:]):
        lines[helper_at:helper_at] = [
            "static double blx_clamp(double x, double lo, double hi) {",
            "  if (x < lo) return lo;",
            "  if (x > hi) return hi;",
            "  return x;",
            "}", ""]
    return "\n".join(lines)


def _manifest(ir: FlatIR, tasks: dict[str, list[FlatBlock]], parallel) -> dict:
    block_map = {}
    for tname in sorted(tasks):
        for b in tasks[tname]:
            block_map[b.uname] = tname
    return {
        "generator": GENERATOR_VERSION,
        "entry": "blx_step",
        "mode": "parallel" if parallel else "sequential",
        "tasks": {t: [b.uname for b in tasks[t]] for t in sorted(tasks)},
        "blocks": block_map,
        "files": ["globals.h", "model.c", "tasks.c", "manifest.json"],
    }
