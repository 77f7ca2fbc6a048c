"""blxc: parallelizing toolchain for hierarchical block-diagram models.

Pipeline: MDLX model -> flat BLX IR (extract) -> cost estimation against a
hardware profile -> core allocation -> parallelized C sources + Gantt report,
with a reference interpreter for end-to-end equivalence checks.
"""

from .dtypes import Bus, BusLayout, Matrix, PointCloud, Scalar, Vector, parse_dtype
from .extractor import FlatBlock, FlatIR, GlobalVar, extract, emit_blx, parse_blx
from .hwprofile import (CostModel, HardwareProfile, estimate_block_time,
                        estimate_comm_time, load_builtin_profile, parse_profile)
from .mdlx import parse_model, serialize_model
from .model import Block, Model, SignalLine, Subsystem, model_stats, validate
from .registry import ToolboxRegistry, load_registry
from .scheduler import (Schedule, ScheduleRequest, allocate, brute_force_allocate,
                        makespan_report, split_data_parallel)
from .simulator import Trace, compare_traces, execute_schedule, interpret

__version__ = "0.1.0"

__all__ = [
    "Block", "Bus", "BusLayout", "CostModel", "FlatBlock", "FlatIR", "GlobalVar",
    "HardwareProfile", "Matrix", "Model", "PointCloud", "Scalar", "Schedule",
    "ScheduleRequest", "SignalLine", "Subsystem", "ToolboxRegistry", "Trace",
    "Vector", "allocate", "brute_force_allocate", "compare_traces", "emit_blx",
    "estimate_block_time", "estimate_comm_time", "execute_schedule", "extract",
    "interpret", "load_builtin_profile", "load_registry", "makespan_report",
    "model_stats", "parse_blx", "parse_dtype", "parse_model", "parse_profile",
    "serialize_model", "split_data_parallel", "validate",
]
