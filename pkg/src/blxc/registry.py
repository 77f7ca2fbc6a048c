"""Toolbox block registry: expandable composites and opaque kernels.

Expandable kinds carry a subsystem template that the extractor inlines and
re-flattens; opaque kinds stay single blocks and carry a cost formula, attrs,
and a kernel name for the interpreter / C backend.

Opaque kinds are data: built-ins ship in data/toolbox.json and a user file
named by the BLXC_REGISTRY environment variable is merged on top. Expandable
templates are code (they are parameterized block structures).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

from .errors import SchemaError, UnknownToolboxKind
from .kernels import _Parser, _tokenize, eval_expr
from .model import Block, SignalLine, Subsystem
from .dtypes import Scalar


@dataclass(frozen=True)
class OpaqueKind:
    name: str
    ins: int
    outs: int
    attrs: frozenset[str]
    splittable: bool
    cost: dict[str, str]          # op class -> expression over n
    kernel: str                   # simulator/codegen kernel key
    required_params: tuple[str, ...] = ()

    def op_counts(self, n: int) -> dict[str, int]:
        out = {}
        for cls, expr in self.cost.items():
            parser = _Parser(_tokenize(expr))
            node = parser.expr()
            if parser.peek() is not None:
                raise SchemaError(f"trailing tokens in cost expr {expr!r}")
            val = eval_expr(node, {"n": float(n)})
            out[cls] = int(math.ceil(val))
            if out[cls] < 0:
                raise SchemaError(f"negative op count from {expr!r}")
        return out


@dataclass
class ToolboxRegistry:
    opaque: dict[str, OpaqueKind] = field(default_factory=dict)
    expandable: dict[str, "callable"] = field(default_factory=dict)  # params -> Subsystem

    def lookup(self, kind_name: str):
        if kind_name in self.expandable:
            return ("expandable", self.expandable[kind_name])
        if kind_name in self.opaque:
            return ("opaque", self.opaque[kind_name])
        raise UnknownToolboxKind(f"no registry entry for toolbox kind {kind_name!r}")

    def __contains__(self, kind_name: str) -> bool:
        return kind_name in self.expandable or kind_name in self.opaque


def load_registry(extra_path: str | None = None) -> ToolboxRegistry:
    """Built-in templates + shipped opaque table + optional user file
    (argument, else $BLXC_REGISTRY)."""
    reg = ToolboxRegistry(expandable=dict(_TEMPLATES))
    data = resources.files("blxc").joinpath("data/toolbox.json").read_text("utf-8")
    _merge_opaque(reg, json.loads(data), "builtin toolbox.json")
    path = extra_path or os.environ.get("BLXC_REGISTRY")
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            _merge_opaque(reg, json.load(fh), path)
    return reg


def _merge_opaque(reg: ToolboxRegistry, doc: dict, where: str):
    for name, spec in doc.get("opaque", {}).items():
        try:
            reg.opaque[name] = OpaqueKind(
                name=name,
                ins=int(spec["ins"]),
                outs=int(spec["outs"]),
                attrs=frozenset(spec.get("attrs", [])),
                splittable=bool(spec.get("splittable", False)),
                cost={str(k): str(v) for k, v in spec["cost"].items()},
                kernel=str(spec["kernel"]),
                required_params=tuple(spec.get("required_params", [])),
            )
        except KeyError as err:
            raise SchemaError(f"{where}: opaque kind {name!r} missing {err}") from None


# ---------------------------------------------------------------------------
# Expansion templates
# ---------------------------------------------------------------------------

def _p(params: dict, key: str, default: float) -> float:
    return float(params.get(key, default))


def stanley_lateral_template(params: dict) -> Subsystem:
    """Steering law: clamp(heading_error + atan(k*e/(v+eps)), +-limit).
    Inputs: heading_error, cross_track, v_now. Output: steer."""
    k = _p(params, "k", 1.0)
    eps = _p(params, "eps", 0.01)
    lim = _p(params, "steer_limit", 0.6)
    sub = Subsystem(name="tpl")
    sub.children += [
        Block.make("in_he", "Inport", {"dtype": "scalar", "index": 1}),
        Block.make("in_ct", "Inport", {"dtype": "scalar", "index": 2}),
        Block.make("in_v", "Inport", {"dtype": "scalar", "index": 3}),
        Block.make("ratio", "FunctionBlock",
                   {"ins": 2, "outs": 1, "k": k, "eps": eps,
                    "body": "y1 = k * u1 / (u2 + eps)"}),
        Block.make("atan_term", "ElementwiseMap", {"op": "atan"}),
        Block.make("steer_sum", "Sum", {"signs": "++"}),
        Block.make("sat", "Saturate", {"lo": -lim, "hi": lim}),
        Block.make("out_steer", "Outport", {"index": 1}),
    ]
    s = Scalar()
    sub.lines += [
        SignalLine(("in_ct", 1), (("ratio", 1),), s),
        SignalLine(("in_v", 1), (("ratio", 2),), s),
        SignalLine(("ratio", 1), (("atan_term", 1),), s),
        SignalLine(("in_he", 1), (("steer_sum", 1),), s),
        SignalLine(("atan_term", 1), (("steer_sum", 2),), s),
        SignalLine(("steer_sum", 1), (("sat", 1),), s),
        SignalLine(("sat", 1), (("out_steer", 1),), s),
    ]
    return sub


def pid_longitudinal_template(params: dict) -> Subsystem:
    """PID on (v_ref - v_now), split into accel = relu(u), brake = relu(-u).
    Integral and previous-error state live in UnitDelays."""
    kp = _p(params, "kp", 1.0)
    ki = _p(params, "ki", 0.1)
    kd = _p(params, "kd", 0.0)
    sub = Subsystem(name="tpl")
    sub.children += [
        Block.make("in_vref", "Inport", {"dtype": "scalar", "index": 1}),
        Block.make("in_vnow", "Inport", {"dtype": "scalar", "index": 2}),
        Block.make("err", "Sum", {"signs": "+-"}),
        Block.make("integ", "Sum", {"signs": "++"}),        # e_t + I_{t-1}
        Block.make("integ_delay", "UnitDelay", {"init": 0.0}),
        Block.make("prev_err", "UnitDelay", {"init": 0.0}),
        Block.make("deriv", "Sum", {"signs": "+-"}),
        Block.make("p_term", "Gain", {"k": kp}),
        Block.make("i_term", "Gain", {"k": ki}),
        Block.make("d_term", "Gain", {"k": kd}),
        Block.make("u_sum", "Sum", {"signs": "+++"}),
        Block.make("accel_relu", "ElementwiseMap", {"op": "relu"}),
        Block.make("u_neg", "ElementwiseMap", {"op": "neg"}),
        Block.make("brake_relu", "ElementwiseMap", {"op": "relu"}),
        Block.make("out_accel", "Outport", {"index": 1}),
        Block.make("out_brake", "Outport", {"index": 2}),
    ]
    s = Scalar()
    sub.lines += [
        SignalLine(("in_vref", 1), (("err", 1),), s),
        SignalLine(("in_vnow", 1), (("err", 2),), s),
        SignalLine(("err", 1), (("integ", 1), ("prev_err", 1), ("deriv", 1),
                                ("p_term", 1)), s),
        SignalLine(("integ_delay", 1), (("integ", 2),), s),
        SignalLine(("integ", 1), (("integ_delay", 1), ("i_term", 1)), s),
        SignalLine(("prev_err", 1), (("deriv", 2),), s),
        SignalLine(("deriv", 1), (("d_term", 1),), s),
        SignalLine(("p_term", 1), (("u_sum", 1),), s),
        SignalLine(("i_term", 1), (("u_sum", 2),), s),
        SignalLine(("d_term", 1), (("u_sum", 3),), s),
        SignalLine(("u_sum", 1), (("accel_relu", 1), ("u_neg", 1)), s),
        SignalLine(("u_neg", 1), (("brake_relu", 1),), s),
        SignalLine(("accel_relu", 1), (("out_accel", 1),), s),
        SignalLine(("brake_relu", 1), (("out_brake", 1),), s),
    ]
    return sub


def tracking_error_template(params: dict) -> Subsystem:
    """Pose errors for path tracking. Inputs: x,y,yaw now then ref.
    Outputs: heading_error = sin(yaw_ref - yaw), cross_track in the reference
    frame = -sin(yaw_ref)*dx + cos(yaw_ref)*dy."""
    del params
    sub = Subsystem(name="tpl")
    sub.children += [
        Block.make("in_x", "Inport", {"dtype": "scalar", "index": 1}),
        Block.make("in_y", "Inport", {"dtype": "scalar", "index": 2}),
        Block.make("in_yaw", "Inport", {"dtype": "scalar", "index": 3}),
        Block.make("in_xr", "Inport", {"dtype": "scalar", "index": 4}),
        Block.make("in_yr", "Inport", {"dtype": "scalar", "index": 5}),
        Block.make("in_yawr", "Inport", {"dtype": "scalar", "index": 6}),
        Block.make("dyaw", "Sum", {"signs": "+-"}),
        Block.make("he_sin", "ElementwiseMap", {"op": "sin"}),
        Block.make("dx", "Sum", {"signs": "+-"}),
        Block.make("dy", "Sum", {"signs": "+-"}),
        Block.make("sin_ref", "ElementwiseMap", {"op": "sin"}),
        Block.make("cos_ref", "ElementwiseMap", {"op": "cos"}),
        Block.make("sin_neg", "ElementwiseMap", {"op": "neg"}),
        Block.make("t_dx", "Product", {"n": 2}),
        Block.make("t_dy", "Product", {"n": 2}),
        Block.make("ct_sum", "Sum", {"signs": "++"}),
        Block.make("out_he", "Outport", {"index": 1}),
        Block.make("out_ct", "Outport", {"index": 2}),
    ]
    s = Scalar()
    sub.lines += [
        SignalLine(("in_yawr", 1), (("dyaw", 1), ("sin_ref", 1), ("cos_ref", 1)), s),
        SignalLine(("in_yaw", 1), (("dyaw", 2),), s),
        SignalLine(("dyaw", 1), (("he_sin", 1),), s),
        SignalLine(("in_xr", 1), (("dx", 1),), s),
        SignalLine(("in_x", 1), (("dx", 2),), s),
        SignalLine(("in_yr", 1), (("dy", 1),), s),
        SignalLine(("in_y", 1), (("dy", 2),), s),
        SignalLine(("sin_ref", 1), (("sin_neg", 1),), s),
        SignalLine(("sin_neg", 1), (("t_dx", 1),), s),
        SignalLine(("dx", 1), (("t_dx", 2),), s),
        SignalLine(("cos_ref", 1), (("t_dy", 1),), s),
        SignalLine(("dy", 1), (("t_dy", 2),), s),
        SignalLine(("t_dx", 1), (("ct_sum", 1),), s),
        SignalLine(("t_dy", 1), (("ct_sum", 2),), s),
        SignalLine(("he_sin", 1), (("out_he", 1),), s),
        SignalLine(("ct_sum", 1), (("out_ct", 1),), s),
    ]
    return sub


_TEMPLATES = {
    "StanleyLateral": stanley_lateral_template,
    "PidLongitudinal": pid_longitudinal_template,
    "TrackingError": tracking_error_template,
}
