"""Regenerate the committed codegen golden bundles (drift detector fixtures).

Run `python tests/regen_goldens.py` from the repo root after an intentional
generator change, then review the diff.
"""

from pathlib import Path

from blxc.benchmarks import build_benchmarks
from blxc.codegen import emit_parallel_c, emit_sequential_c
from blxc.extractor import extract
from blxc.hwprofile import CostModel, load_builtin_profile
from blxc.registry import load_registry
from blxc.scheduler import ScheduleRequest, allocate

GOLDEN_ROOT = Path(__file__).parent / "goldens"


def golden_bundles(case, registry, cost_model, profile):
    ir = extract(case.model_toolbox, registry)
    cost_model.bind(ir, registry)
    sched = allocate(ScheduleRequest(ir=ir, profile=profile, max_cores=4))
    return {
        f"{case.name}_seq": emit_sequential_c(ir),
        f"{case.name}_par": emit_parallel_c(ir, sched),
    }


def main():
    registry = load_registry()
    cost_model = CostModel.load()
    profile = load_builtin_profile("uniform4")
    for case in build_benchmarks():
        for name, bundle in golden_bundles(case, registry, cost_model,
                                           profile).items():
            out = GOLDEN_ROOT / name
            out.mkdir(parents=True, exist_ok=True)
            for fname, text in bundle.files.items():
                (out / fname).write_text(text, newline="\n")
            print(f"wrote {out}")


if __name__ == "__main__":
    main()
