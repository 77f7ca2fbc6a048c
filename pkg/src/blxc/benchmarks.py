"""Benchmark corpus: the three sensing/control node models, each in a
with-toolbox and an expanded (composites inlined as plain subsystems) variant,
plus synthetic input traces.

The opaque point-cloud kernels (voxel bucketing, random sampling) stay single
blocks in both variants -- they are not expressible in the primitive kind set.
Expansion applies to the composite preprocessing/controller blocks, which is
where the block-count reduction the toolbox buys (and the data-parallel split
target) lives. The designated splittable block per case is recorded in
meta.json.

Regenerate fixtures with `python -m blxc.benchmarks` (oracle discipline:
expected traces come from interpreting the with-toolbox model).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FixtureCorrupt
from .mdlx import parse_model, serialize_model
from .model import Block, Model, SignalLine, Subsystem
from .dtypes import parse_dtype
from .registry import load_registry
from .simulator import Trace, interpret

CASE_NAMES = ("voxel_grid_downsample_filter", "random_downsample_filter",
              "trajectory_follower")

STEPS = 100
_SC = parse_dtype("scalar")


@dataclass
class BenchmarkCase:
    name: str
    model_toolbox: Model
    model_expanded: Model
    input_trace: Trace
    expected_trace: Trace
    meta: dict

    @property
    def split_block(self) -> str | None:
        return self.meta.get("split_block")


# ---------------------------------------------------------------------------
# Cloud preprocessing expansion (shared by both downsample cases)
# ---------------------------------------------------------------------------

def _preprocess_params(scale, theta, tx, ty, tz):
    return {"scale": scale, "theta": theta, "tx": tx, "ty": ty, "tz": tz,
            "ins": 1, "outs": 1}


def _preprocess_subsystem(cloud_dt: str, scale, theta, tx, ty, tz) -> Subsystem:
    """Explicit form of CloudPreprocess: Gain(scale) -> MatMul(., R^T) ->
    Sum(., t). The R^T literal carries the exact doubles the opaque kernel
    computes from theta."""
    c, s = math.cos(theta), math.sin(theta)
    rot_t = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]   # R.T rows
    sub = Subsystem(name="decode")
    sub.children += [
        Block.make("in_c", "Inport", {"dtype": cloud_dt, "index": 1}),
        Block.make("g_scale", "Gain", {"k": scale}),
        Block.make("rot_t", "Const", {"value": rot_t}),
        Block.make("mm", "MatMul"),
        Block.make("t_off", "Const", {"value": [tx, ty, tz]}),
        Block.make("add_t", "Sum", {"signs": "++"}),
        Block.make("out_c", "Outport", {"index": 1}),
    ]
    dt = parse_dtype(cloud_dt)
    sub.lines += [
        SignalLine(("in_c", 1), (("g_scale", 1),), dt),
        SignalLine(("g_scale", 1), (("mm", 1),), dt),
        SignalLine(("rot_t", 1), (("mm", 2),), parse_dtype("matrix(3,3)")),
        SignalLine(("mm", 1), (("add_t", 1),), dt),
        SignalLine(("t_off", 1), (("add_t", 2),), parse_dtype("vector(3)")),
        SignalLine(("add_t", 1), (("out_c", 1),), dt),
    ]
    return sub


# ---------------------------------------------------------------------------
# Case builders
# ---------------------------------------------------------------------------

def build_voxel_models() -> tuple[Model, Model]:
    cap = 1200
    cloud = f"pointcloud({cap})"
    dt = parse_dtype(cloud)
    pp = _preprocess_params(0.001, 0.02, 1.5, -0.9, 0.08)

    def base(expanded: bool) -> Model:
        root = Subsystem(name="root")
        root.children.append(Block.make("cloud_in", "Inport", {"dtype": cloud}))
        if expanded:
            root.children.append(_preprocess_subsystem(cloud, 0.001, 0.02,
                                                       1.5, -0.9, 0.08))
            pre_name = "decode"
        else:
            root.children.append(Block.make("pre", "Toolbox",
                                            dict(pp, kind_name="CloudPreprocess")))
            pre_name = "pre"
        root.children += [
            Block.make("voxel", "Toolbox",
                       {"kind_name": "VoxelGridDownsample", "ins": 1, "outs": 1,
                        "voxel_size": 0.4}),
            Block.make("cloud_out", "Outport"),
        ]
        root.lines += [
            SignalLine(("cloud_in", 1), ((pre_name, 1),), dt),
            SignalLine((pre_name, 1), (("voxel", 1),), dt),
            SignalLine(("voxel", 1), (("cloud_out", 1),), dt),
        ]
        return Model(name="voxel_grid_downsample_filter", root=root,
                     step_count_hint=STEPS)

    return base(False), base(True)


def build_random_models() -> tuple[Model, Model]:
    cap = 2048
    cloud = f"pointcloud({cap})"
    dt = parse_dtype(cloud)
    capped = "pointcloud(512)"
    pp = _preprocess_params(0.001, 0.015, 1.2, -0.8, 0.05)

    def base(expanded: bool) -> Model:
        root = Subsystem(name="root")
        root.children.append(Block.make("cloud_in", "Inport", {"dtype": cloud}))
        if expanded:
            root.children.append(_preprocess_subsystem(cloud, 0.001, 0.015,
                                                       1.2, -0.8, 0.05))
            pre_name = "decode"
        else:
            root.children.append(Block.make("pre", "Toolbox",
                                            dict(pp, kind_name="CloudPreprocess")))
            pre_name = "pre"
        root.children += [
            Block.make("sample", "Toolbox",
                       {"kind_name": "RandomDownsample", "ins": 1, "outs": 1,
                        "max_points": 512, "seed": 20240611}),
            Block.make("cloud_out", "Outport"),
        ]
        root.lines += [
            SignalLine(("cloud_in", 1), ((pre_name, 1),), dt),
            SignalLine((pre_name, 1), (("sample", 1),), dt),
            SignalLine(("sample", 1), (("cloud_out", 1),), parse_dtype(capped)),
        ]
        return Model(name="random_downsample_filter", root=root,
                     step_count_hint=STEPS)

    return base(False), base(True)


_POSE_BUS = "bus(now:bus(x:scalar,y:scalar,yaw:scalar)," \
            "ref:bus(x:scalar,y:scalar,yaw:scalar))"
_CTRL_PARAMS = {"k": 2.5, "eps": 0.1, "steer_limit": 0.6109,
                "kp": 1.2, "ki": 0.35, "kd": 0.15}


def build_trajectory_models() -> tuple[Model, Model]:
    def lateral_subsystem(expanded: bool) -> Subsystem:
        sub = Subsystem(name="lateral", masked=True)
        sub.children += [
            Block.make("poses_in", "Inport", {"dtype": _POSE_BUS, "index": 1}),
            Block.make("v_in", "Inport", {"dtype": "scalar", "index": 2}),
            Block.make("sel", "BusSelector",
                       {"select": "now.x, now.y, now.yaw, ref.x, ref.y, #2.yaw"}),
        ]
        if expanded:
            from .registry import tracking_error_template, stanley_lateral_template
            terr = tracking_error_template({})
            terr.name = "terr"
            stanley = stanley_lateral_template(dict(_CTRL_PARAMS))
            stanley.name = "stanley"
            sub.children += [terr, stanley]
        else:
            sub.children += [
                Block.make("terr", "Toolbox",
                           {"kind_name": "TrackingError", "ins": 6, "outs": 2}),
                Block.make("stanley", "Toolbox",
                           dict(kind_name="StanleyLateral", ins=3, outs=1,
                                k=_CTRL_PARAMS["k"], eps=_CTRL_PARAMS["eps"],
                                steer_limit=_CTRL_PARAMS["steer_limit"])),
            ]
        sub.children.append(Block.make("steer_out", "Outport", {"index": 1}))
        bus = parse_dtype(_POSE_BUS)
        sub.lines += [
            SignalLine(("poses_in", 1), (("sel", 1),), bus),
            SignalLine(("sel", 1), (("terr", 1),), _SC),
            SignalLine(("sel", 2), (("terr", 2),), _SC),
            SignalLine(("sel", 3), (("terr", 3),), _SC),
            SignalLine(("sel", 4), (("terr", 4),), _SC),
            SignalLine(("sel", 5), (("terr", 5),), _SC),
            SignalLine(("sel", 6), (("terr", 6),), _SC),
            SignalLine(("terr", 1), (("stanley", 1),), _SC),
            SignalLine(("terr", 2), (("stanley", 2),), _SC),
            SignalLine(("v_in", 1), (("stanley", 3),), _SC),
            SignalLine(("stanley", 1), (("steer_out", 1),), _SC),
        ]
        return sub

    def longitudinal_subsystem(expanded: bool) -> Subsystem:
        sub = Subsystem(name="longitudinal")
        sub.children += [
            Block.make("vref_in", "Inport", {"dtype": "scalar", "index": 1}),
            Block.make("vnow_in", "Inport", {"dtype": "scalar", "index": 2}),
        ]
        if expanded:
            from .registry import pid_longitudinal_template
            pid = pid_longitudinal_template(dict(_CTRL_PARAMS))
            pid.name = "pid"
            sub.children.append(pid)
        else:
            sub.children.append(Block.make(
                "pid", "Toolbox",
                dict(kind_name="PidLongitudinal", ins=2, outs=2,
                     kp=_CTRL_PARAMS["kp"], ki=_CTRL_PARAMS["ki"],
                     kd=_CTRL_PARAMS["kd"])))
        sub.children += [
            Block.make("accel_out", "Outport", {"index": 1}),
            Block.make("brake_out", "Outport", {"index": 2}),
        ]
        sub.lines += [
            SignalLine(("vref_in", 1), (("pid", 1),), _SC),
            SignalLine(("vnow_in", 1), (("pid", 2),), _SC),
            SignalLine(("pid", 1), (("accel_out", 1),), _SC),
            SignalLine(("pid", 2), (("brake_out", 1),), _SC),
        ]
        return sub

    def base(expanded: bool) -> Model:
        root = Subsystem(name="root")
        for name in ("x_now", "y_now", "yaw_now", "x_ref", "y_ref", "yaw_ref",
                     "v_now", "v_ref"):
            root.children.append(Block.make(name, "Inport", {"dtype": "scalar"}))
        root.children += [
            Block.make("bc_now", "BusCreator", {"names": "x,y,yaw"}),
            Block.make("bc_ref", "BusCreator", {"names": "x,y,yaw"}),
            Block.make("bc_poses", "BusCreator", {"names": "now,ref"}),
            lateral_subsystem(expanded),
            longitudinal_subsystem(expanded),
            Block.make("steer", "Outport"),
            Block.make("accel", "Outport"),
            Block.make("brake", "Outport"),
        ]
        pose3 = parse_dtype("bus(x:scalar,y:scalar,yaw:scalar)")
        poses = parse_dtype(_POSE_BUS)
        root.lines += [
            SignalLine(("x_now", 1), (("bc_now", 1),), _SC),
            SignalLine(("y_now", 1), (("bc_now", 2),), _SC),
            SignalLine(("yaw_now", 1), (("bc_now", 3),), _SC),
            SignalLine(("x_ref", 1), (("bc_ref", 1),), _SC),
            SignalLine(("y_ref", 1), (("bc_ref", 2),), _SC),
            SignalLine(("yaw_ref", 1), (("bc_ref", 3),), _SC),
            SignalLine(("bc_now", 1), (("bc_poses", 1),), pose3),
            SignalLine(("bc_ref", 1), (("bc_poses", 2),), pose3),
            SignalLine(("bc_poses", 1), (("lateral", 1),), poses),
            SignalLine(("v_now", 1), (("lateral", 2), ("longitudinal", 2)), _SC),
            SignalLine(("v_ref", 1), (("longitudinal", 1),), _SC),
            SignalLine(("lateral", 1), (("steer", 1),), _SC),
            SignalLine(("longitudinal", 1), (("accel", 1),), _SC),
            SignalLine(("longitudinal", 2), (("brake", 1),), _SC),
        ]
        return Model(name="trajectory_follower", root=root, step_count_hint=STEPS)

    return base(False), base(True)


# ---------------------------------------------------------------------------
# Input traces
# ---------------------------------------------------------------------------

def _cloud_trace(seed: int, cap: int, lo_n: int, hi_n: int, steps: int) -> Trace:
    """Synthetic scans: a few clusters plus uniform clutter, mm-scale coords,
    varying live point count per step."""
    rng = np.random.default_rng(seed)
    tr = Trace()
    for _ in range(steps):
        n = int(rng.integers(lo_n, hi_n + 1))
        k_clusters = int(rng.integers(3, 7))
        centers = rng.uniform([-25000, -25000, -1500], [25000, 25000, 2500],
                              size=(k_clusters, 3))
        counts = rng.multinomial(n - n // 4, [1 / k_clusters] * k_clusters)
        pts = [rng.normal(centers[i], 900.0, size=(c, 3))
               for i, c in enumerate(counts)]
        pts.append(rng.uniform([-30000, -30000, -2000], [30000, 30000, 3000],
                               size=(n - int(sum(counts)), 3)))
        cloud = np.round(np.concatenate(pts)[:cap], 1)  # 0.1 mm grid, short JSON
        tr.steps.append({"cloud_in": cloud.tolist()})
    return tr


def _trajectory_trace(seed: int, steps: int) -> Trace:
    """Reference on a gentle arc; current pose wanders around it."""
    rng = np.random.default_rng(seed)
    tr = Trace()
    for t in range(steps):
        a = 0.03 * t
        xr, yr = 40.0 * math.cos(a), 40.0 * math.sin(a)
        yawr = a + math.pi / 2
        tr.steps.append({
            "x_ref": xr, "y_ref": yr, "yaw_ref": yawr,
            "x_now": xr + float(rng.normal(0, 0.8)),
            "y_now": yr + float(rng.normal(0, 0.8)),
            "yaw_now": yawr + float(rng.normal(0, 0.12)),
            "v_ref": 8.0 + 2.0 * math.sin(0.05 * t),
            "v_now": max(0.0, 8.0 + float(rng.normal(0, 0.7))),
        })
    return tr


_BUILDERS = {
    "voxel_grid_downsample_filter": (build_voxel_models,
                                     lambda: _cloud_trace(101, 1200, 900, 1200, STEPS),
                                     "pre"),
    "random_downsample_filter": (build_random_models,
                                 lambda: _cloud_trace(202, 2048, 1400, 2048, STEPS),
                                 "pre"),
    "trajectory_follower": (build_trajectory_models,
                            lambda: _trajectory_trace(303, STEPS),
                            None),
}


# ---------------------------------------------------------------------------
# Fixture I/O
# ---------------------------------------------------------------------------

def benchmarks_root() -> Path:
    env = os.environ.get("BLXC_BENCHMARKS")
    if env:
        return Path(env)
    repo = Path(__file__).resolve().parents[2] / "benchmarks"
    if repo.is_dir():
        return repo
    return Path.cwd() / "benchmarks"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def regenerate(root: Path | None = None) -> list[Path]:
    """Write all fixtures. The expected trace is produced only by the
    interpreter on the with-toolbox model."""
    root = root or benchmarks_root()
    registry = load_registry()
    written = []
    for name, (build, make_trace, split_block) in _BUILDERS.items():
        case_dir = root / name
        case_dir.mkdir(parents=True, exist_ok=True)
        m_tb, m_ex = build()
        trace = make_trace()
        expected = interpret(m_tb, trace, STEPS, registry)
        files = {
            "toolbox.mdlx": serialize_model(m_tb),
            "expanded.mdlx": serialize_model(m_ex),
            "input.jsonl": trace.dump_jsonl().encode(),
            "expected.jsonl": expected.dump_jsonl().encode(),
        }
        meta = {
            "name": name,
            "steps": STEPS,
            "split_block": split_block,
            "notes": "expanded variant keeps opaque point kernels as single "
                     "blocks; composites are inlined",
            "sha256": {fn: _sha256(data) for fn, data in sorted(files.items())},
        }
        files["meta.json"] = (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode()
        for fn, data in files.items():
            path = case_dir / fn
            path.write_bytes(data)
            written.append(path)
    return written


def load_case(name: str, root: Path | None = None) -> BenchmarkCase:
    root = root or benchmarks_root()
    case_dir = root / name
    meta = json.loads((case_dir / "meta.json").read_text())
    for fn, want in meta["sha256"].items():
        got = _sha256((case_dir / fn).read_bytes())
        if got != want:
            raise FixtureCorrupt(f"{name}/{fn}: sha256 {got[:12]} != {want[:12]}")
    return BenchmarkCase(
        name=name,
        model_toolbox=parse_model((case_dir / "toolbox.mdlx").read_bytes()),
        model_expanded=parse_model((case_dir / "expanded.mdlx").read_bytes()),
        input_trace=Trace.load_jsonl((case_dir / "input.jsonl").read_text()),
        expected_trace=Trace.load_jsonl((case_dir / "expected.jsonl").read_text()),
        meta=meta,
    )


def build_benchmarks(root: Path | None = None) -> list[BenchmarkCase]:
    return [load_case(name, root) for name in CASE_NAMES]


if __name__ == "__main__":
    paths = regenerate()
    print(f"wrote {len(paths)} files under {benchmarks_root()}")
