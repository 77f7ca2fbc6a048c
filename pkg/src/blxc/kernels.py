"""Block kernel semantics shared by the interpreter and the C backend.

Everything here is written so a C implementation of the same kernel produces
bit-identical doubles on the same host:

- reductions and multi-input sums fold left in a fixed order (no pairwise
  summation),
- transcendental functions go through the platform libm (the math module),
  which is what the C compiler links,
- the downsampling PRNG is xoshiro256** seeded via splitmix64 with bitmask
  rejection for bounded draws, all 64-bit integer math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVoxel, SchemaError

MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# Elementwise map ops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapOp:
    fn: "callable"        # float -> float, via libm where applicable
    exact: bool           # IEEE-determined: safe to vectorize with numpy
    c_expr: str           # C expression template, {x} is the operand


MAP_OP_IMPLS: dict[str, MapOp] = {
    "abs": MapOp(abs, True, "fabs({x})"),
    "neg": MapOp(lambda x: -x, True, "-({x})"),
    "relu": MapOp(lambda x: x if x > 0.0 else 0.0, True, "(({x}) > 0.0 ? ({x}) : 0.0)"),
    "sq": MapOp(lambda x: x * x, True, "(({x}) * ({x}))"),
    "sqrt": MapOp(math.sqrt, True, "sqrt({x})"),
    "sin": MapOp(math.sin, False, "sin({x})"),
    "cos": MapOp(math.cos, False, "cos({x})"),
    "atan": MapOp(math.atan, False, "atan({x})"),
    "floor": MapOp(math.floor, True, "floor({x})"),
    "exp": MapOp(math.exp, False, "exp({x})"),
}


def apply_map(op: str, value):
    """Apply a unary map elementwise. Scalars stay floats; arrays keep shape."""
    impl = MAP_OP_IMPLS[op]
    if isinstance(value, float):
        return float(impl.fn(value))
    arr = np.asarray(value, dtype=np.float64)
    if impl.exact:
        if op == "abs":
            return np.abs(arr)
        if op == "neg":
            return -arr
        if op == "relu":
            return np.where(arr > 0.0, arr, 0.0)
        if op == "sq":
            return arr * arr
        if op == "sqrt":
            return np.sqrt(arr)
        if op == "floor":
            return np.floor(arr)
    out = np.empty_like(arr)
    flat_in, flat_out = arr.ravel(), out.ravel()
    for i, v in enumerate(flat_in):
        flat_out[i] = impl.fn(float(v))
    return out


def fold_sum(values, signs: str):
    """Signed left fold: ((±v1) ± v2) ± v3 ..., elementwise with broadcast."""
    acc = values[0] if signs[0] == "+" else _negate(values[0])
    for v, s in zip(values[1:], signs[1:]):
        acc = acc + v if s == "+" else acc - v
    return acc


def fold_product(values):
    acc = values[0]
    for v in values[1:]:
        acc = acc * v
    return acc


def _negate(v):
    return -v


def reduce_value(op: str, value) -> float:
    """Sequential reduction in index order (matches a plain C loop)."""
    arr = np.asarray(value, dtype=np.float64).ravel()
    if arr.size == 0:
        raise SchemaError("Reduce over empty value")
    acc = float(arr[0])
    if op == "sum":
        for v in arr[1:]:
            acc = acc + float(v)
    elif op == "min":
        for v in arr[1:]:
            if float(v) < acc:
                acc = float(v)
    elif op == "max":
        for v in arr[1:]:
            if float(v) > acc:
                acc = float(v)
    else:
        raise SchemaError(f"unknown reduce op {op!r}")
    return acc


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product as an ordered sum of rank-1 terms, seeded with the j=0
    term: out = a[:,0]b[0,:] + a[:,1]b[1,:] + ... This matches a C inner loop
    that initializes the accumulator with the first product (no +0.0 seed, so
    signed zeros survive)."""
    a2 = a if a.ndim == 2 else a.reshape(a.shape[0], 1)
    b2 = b if b.ndim == 2 else b.reshape(b.shape[0], 1)
    acc = a2[:, 0:1] * b2[0:1, :]
    for j in range(1, a2.shape[1]):
        acc = acc + a2[:, j:j + 1] * b2[j:j + 1, :]
    return acc if b.ndim == 2 else acc[:, 0]


# ---------------------------------------------------------------------------
# Deterministic PRNG (xoshiro256**, splitmix64 seeding)
# ---------------------------------------------------------------------------

def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def _splitmix64(x: int):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), x


class Xoshiro256:
    """xoshiro256** with splitmix64 state expansion from a 64-bit seed."""

    def __init__(self, seed: int):
        x = seed & MASK64
        state = []
        for _ in range(4):
            z, x = _splitmix64(x)
            state.append(z)
        self.s = state

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, bound: int) -> int:
        """Uniform draw in [0, bound) via bitmask rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        mask = (1 << (bound - 1).bit_length()) - 1 if bound > 1 else 0
        while True:
            r = self.next_u64() & mask
            if r < bound:
                return r


# ---------------------------------------------------------------------------
# Point-cloud kernels
# ---------------------------------------------------------------------------

def kernel_voxel_grid(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Bucket points by floor(coord/voxel) per axis; keep the first point (in
    input order) of each non-empty bucket; output in first-occurrence order."""
    if voxel_size <= 0:
        raise NonPositiveVoxel(f"voxel size must be > 0, got {voxel_size}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    keep: list[int] = []
    seen: dict[tuple[float, float, float], bool] = {}
    for i in range(pts.shape[0]):
        key = (math.floor(pts[i, 0] / voxel_size),
               math.floor(pts[i, 1] / voxel_size),
               math.floor(pts[i, 2] / voxel_size))
        if key not in seen:
            seen[key] = True
            keep.append(i)
    return pts[keep].copy() if keep else np.empty((0, 3), dtype=np.float64)


def kernel_random_downsample(points: np.ndarray, max_n: int, seed: int) -> np.ndarray:
    """At most max_n points. If over the cap, choose max_n distinct indices by
    a partial Fisher-Yates shuffle driven by the seeded PRNG and emit them in
    ascending index order; otherwise the input passes through unchanged."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = pts.shape[0]
    if max_n < 0:
        raise ValueError("max_n must be >= 0")
    if n <= max_n:
        return pts.copy()
    rng = Xoshiro256(seed)
    idx = list(range(n))
    for i in range(max_n):
        j = i + rng.below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    chosen = sorted(idx[:max_n])
    return pts[chosen].copy()


def kernel_cloud_preprocess(points: np.ndarray, scale: float,
                            rot: np.ndarray, offset: np.ndarray) -> np.ndarray:
    """Decode + sensor-frame alignment: (p * scale) @ R^T + t per point.
    Fixed per-coordinate evaluation order (see cloud_preprocess C template)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    scaled = pts * float(scale)
    rotated = matmul(scaled, np.asarray(rot, dtype=np.float64).T)
    return rotated + np.asarray(offset, dtype=np.float64).reshape(3)


# ---------------------------------------------------------------------------
# Controller math (closed forms; the benchmark models compute the same
# formulas through template blocks)
# ---------------------------------------------------------------------------

def kernel_stanley_steer(cross_track: float, heading_error: float, v_now: float,
                         k: float, eps: float, limit: float) -> float:
    """steer = clamp(heading_error + atan(k*e / (v + eps)), +-limit)."""
    raw = heading_error + math.atan((k * cross_track) / (v_now + eps))
    return _clamp(raw, -limit, limit)


def kernel_pid_step(error: float, integral: float, prev_error: float,
                    kp: float, ki: float, kd: float) -> tuple[float, float, float]:
    """One PID step (unit timestep). Returns (u, new_integral, new_prev)."""
    new_integral = integral + error
    deriv = error - prev_error
    u = kp * error + ki * new_integral + kd * deriv
    return u, new_integral, error


def kernel_trajectory_follower(pose_now, pose_ref, v_now: float, v_ref: float,
                               params: dict, state: dict | None = None):
    """Reference controller: Stanley lateral steering plus PID longitudinal
    accel/brake. pose_* are (x, y, yaw). state carries the PID integral and
    previous error between steps (mutated in place when given)."""
    x, y, yaw = (float(v) for v in pose_now)
    xr, yr, yawr = (float(v) for v in pose_ref)
    dx, dy = xr - x, yr - y
    heading_error = math.sin(yawr - yaw)  # small-angle wrap, odd in the error
    cross_track = (-math.sin(yawr)) * dx + math.cos(yawr) * dy
    steer = kernel_stanley_steer(cross_track, heading_error, v_now,
                                 params["k"], params["eps"], params["steer_limit"])
    st = state if state is not None else {"integral": 0.0, "prev_error": 0.0}
    u, integ, prev = kernel_pid_step(v_ref - v_now, st["integral"], st["prev_error"],
                                     params["kp"], params["ki"], params["kd"])
    st["integral"], st["prev_error"] = integ, prev
    accel = u if u > 0.0 else 0.0
    brake = -u if u < 0.0 else 0.0
    return {"accel": accel, "brake": brake, "steer": steer}


def _clamp(x: float, lo: float, hi: float) -> float:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


# ---------------------------------------------------------------------------
# FunctionBlock expression language
#
# Bodies are sequences of assignments evaluated top to bottom:
#     e = u1 - u2
#     y1 = atan(k * e / (u3 + eps))
# Inputs are u1..uN, outputs y1..yM, temporaries are plain names, and any
# numeric block param is visible as a constant. Functions: sin cos atan atan2
# sqrt abs exp floor min max clamp. Arithmetic folds left, like C.
# ---------------------------------------------------------------------------

_FUNCS_1 = {"sin": math.sin, "cos": math.cos, "atan": math.atan,
            "sqrt": math.sqrt, "abs": abs, "exp": math.exp, "floor": math.floor}
_FUNCS_2 = {"atan2": math.atan2, "min": min, "max": max}

_C_FUNCS = {"sin": "sin", "cos": "cos", "atan": "atan", "sqrt": "sqrt",
            "abs": "fabs", "exp": "exp", "floor": "floor", "atan2": "atan2"}


@dataclass(frozen=True)
class Expr:
    """AST node: ('num', v) | ('var', name) | ('un', '-', e)
    | ('bin', op, l, r) | ('call', name, args)."""

    tag: str
    a: object = None
    b: object = None
    c: object = None


def _tokenize(text: str) -> list[str]:
    tokens, i = [], 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
        elif ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] in ".eE"
                                     or (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            tokens.append(text[i:j])
            i = j
        elif ch in "+-*/(),=":
            tokens.append(ch)
            i += 1
        else:
            raise SchemaError(f"bad character {ch!r} in expression {text!r}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, want=None):
        tok = self.peek()
        if tok is None or (want is not None and tok != want):
            raise SchemaError(f"expected {want!r}, got {tok!r}")
        self.pos += 1
        return tok

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = Expr("bin", op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = Expr("bin", op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek() == "-":
            self.take()
            return Expr("un", "-", self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.take()
        if tok == "(":
            node = self.expr()
            self.take(")")
            return node
        if tok[0].isdigit() or tok[0] == ".":
            return Expr("num", float(tok))
        if not (tok[0].isalpha() or tok[0] == "_"):
            raise SchemaError(f"unexpected token {tok!r}")
        if self.peek() == "(":
            self.take("(")
            args = [self.expr()]
            while self.peek() == ",":
                self.take(",")
                args.append(self.expr())
            self.take(")")
            return Expr("call", tok, tuple(args))
        return Expr("var", tok)


def parse_body(body: str) -> list[tuple[str, Expr]]:
    """Parse a FunctionBlock body into (target, expression) assignments."""
    stmts = []
    for raw in body.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        target, sep, rhs = line.partition("=")
        target = target.strip()
        if not sep or not target or not target.replace("_", "a").isalnum():
            raise SchemaError(f"bad statement {raw!r} (want name = expr)")
        parser = _Parser(_tokenize(rhs))
        node = parser.expr()
        if parser.peek() is not None:
            raise SchemaError(f"trailing tokens in {raw!r}")
        stmts.append((target, node))
    if not stmts:
        raise SchemaError("empty FunctionBlock body")
    return stmts


def eval_expr(node: Expr, env: dict):
    if node.tag == "num":
        return node.a
    if node.tag == "var":
        try:
            return env[node.a]
        except KeyError:
            raise SchemaError(f"unknown name {node.a!r} in expression") from None
    if node.tag == "un":
        return -eval_expr(node.b, env)
    if node.tag == "bin":
        lv, rv = eval_expr(node.b, env), eval_expr(node.c, env)
        if node.a == "+":
            return lv + rv
        if node.a == "-":
            return lv - rv
        if node.a == "*":
            return lv * rv
        return lv / rv
    if node.tag == "call":
        args = [eval_expr(a, env) for a in node.b]
        return _call_fn(node.a, args)
    raise AssertionError(node.tag)


def _call_fn(name: str, args: list):
    if name == "clamp":
        if len(args) != 3:
            raise SchemaError("clamp takes 3 arguments")
        x, lo, hi = args
        return _clamp_any(x, lo, hi)
    if name in _FUNCS_1:
        if len(args) != 1:
            raise SchemaError(f"{name} takes 1 argument")
        return _apply_1(_FUNCS_1[name], name, args[0])
    if name in _FUNCS_2:
        if len(args) != 2:
            raise SchemaError(f"{name} takes 2 arguments")
        return _apply_2(_FUNCS_2[name], name, args[0], args[1])
    raise SchemaError(f"unknown function {name!r}")


def _apply_1(fn, name, x):
    if isinstance(x, (int, float)):
        return float(fn(float(x)))
    arr = np.asarray(x, dtype=np.float64)
    if name == "abs":
        return np.abs(arr)
    if name == "sqrt":
        return np.sqrt(arr)
    if name == "floor":
        return np.floor(arr)
    out = np.empty_like(arr)
    fi, fo = arr.ravel(), out.ravel()
    for i, v in enumerate(fi):
        fo[i] = fn(float(v))
    return out


def _apply_2(fn, name, x, y):
    if isinstance(x, (int, float)) and isinstance(y, (int, float)):
        return float(fn(float(x), float(y)))
    if name in ("min", "max"):
        ax, ay = np.broadcast_arrays(np.asarray(x, dtype=np.float64),
                                     np.asarray(y, dtype=np.float64))
        pick = ay < ax if name == "min" else ay > ax
        return np.where(pick, ay, ax)
    # atan2 over arrays, elementwise through libm
    ax, ay = np.broadcast_arrays(np.asarray(x, dtype=np.float64),
                                 np.asarray(y, dtype=np.float64))
    out = np.empty_like(ax)
    fx, fy, fo = ax.ravel(), ay.ravel(), out.ravel()
    for i in range(fx.size):
        fo[i] = fn(float(fx[i]), float(fy[i]))
    return out


def _clamp_any(x, lo, hi):
    if isinstance(x, (int, float)):
        return _clamp(float(x), float(lo), float(hi))
    # branch form, not minimum/maximum: matches the C template on signed zeros
    arr = np.asarray(x, dtype=np.float64)
    return np.where(arr < lo, lo, np.where(arr > hi, hi, arr))


def eval_function_block(body_stmts: list[tuple[str, Expr]], params: dict,
                        inputs: list, n_out: int) -> list:
    """Run the statements; returns [y1..yM]. Numeric params are constants."""
    env: dict[str, object] = {k: float(v) for k, v in params.items()
                              if isinstance(v, (int, float)) and k not in ("ins", "outs")}
    for i, v in enumerate(inputs, start=1):
        env[f"u{i}"] = v
    for target, node in body_stmts:
        env[target] = eval_expr(node, env)
    outs = []
    for j in range(1, n_out + 1):
        if f"y{j}" not in env:
            raise SchemaError(f"FunctionBlock body never assigns y{j}")
        outs.append(env[f"y{j}"])
    return outs


def expr_to_c(node: Expr, name_of_var) -> str:
    """Render an expression as C source. name_of_var maps identifier -> C
    lvalue text (inputs, params, temporaries)."""
    if node.tag == "num":
        return _c_double(node.a)
    if node.tag == "var":
        return name_of_var(node.a)
    if node.tag == "un":
        return f"-({expr_to_c(node.b, name_of_var)})"
    if node.tag == "bin":
        return (f"({expr_to_c(node.b, name_of_var)} {node.a} "
                f"{expr_to_c(node.c, name_of_var)})")
    if node.tag == "call":
        if node.a == "clamp":
            a0, a1, a2 = (expr_to_c(a, name_of_var) for a in node.b)
            return f"blx_clamp({a0}, {a1}, {a2})"
        if node.a in ("min", "max"):
            # comparison form matches Python's min/max on signed zeros,
            # unlike fmin/fmax
            a, b = (expr_to_c(x, name_of_var) for x in node.b)
            cmp = "<" if node.a == "min" else ">"
            return f"(({b}) {cmp} ({a}) ? ({b}) : ({a}))"
        args = ", ".join(expr_to_c(a, name_of_var) for a in node.b)
        return f"{_C_FUNCS[node.a]}({args})"
    raise AssertionError(node.tag)


def _c_double(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return f"{int(v)}.0"
    return repr(float(v))
