"""Exception taxonomy for the toolchain.

Every error raised by the pipeline derives from BlxError so the CLI can map
them to a single exit code. Names mirror the failure they report.
"""


class BlxError(Exception):
    """Base class for all toolchain errors."""


# -- model parsing / validation ----------------------------------------------

class ModelSyntaxError(BlxError):
    """Input file is not well-formed XML."""


class SchemaError(BlxError):
    """Well-formed XML that violates the MDLX/profile schema (unknown kind,
    bad arity, bad dtype, missing attribute...)."""


# -- extraction ---------------------------------------------------------------

class NameCollision(BlxError):
    """Two distinct block paths joined to the same flat name."""


class UnresolvableSelection(BlxError):
    """A bus selection names an element absent from the layout."""


class PositionOutOfRange(BlxError):
    """A recorded bus position does not exist in the post-rename layout."""


class UnknownToolboxKind(BlxError):
    """Toolbox block kind has no registry entry."""


# -- hardware profile / cost estimation ---------------------------------------

class MissingOpClass(BlxError):
    """A core entry lacks one of the required op classes."""


class UnboundDimension(BlxError):
    """Cost estimation requested before the block's dimensions were bound."""


# -- scheduling ----------------------------------------------------------------

class CyclicIR(BlxError):
    """The IR's dependency relation is not a DAG."""


class UnboundCost(BlxError):
    """A block reached the scheduler without a bound cost hint."""


class TooLarge(BlxError):
    """Instance exceeds the brute-force search guard."""


class NotSplittable(BlxError):
    """Data-parallel split requested on a block that is not element-independent."""


class KTooLarge(BlxError):
    """Requested shard count exceeds the element count."""


# -- simulation ----------------------------------------------------------------

class ShapeMismatch(BlxError):
    """A runtime value does not match its declared dtype, or traces disagree
    in ports/steps."""


class MissingInput(BlxError):
    """Input trace does not cover all inports for the requested steps."""


class NonPositiveVoxel(BlxError):
    """Voxel size must be > 0."""


class InvalidSchedule(BlxError):
    """Schedule violates an invariant (detected statically or at runtime)."""


# -- codegen -------------------------------------------------------------------

class MissingTemplate(BlxError):
    """No C template exists for a block kind."""


# -- benchmarks ----------------------------------------------------------------

class FixtureCorrupt(BlxError):
    """Benchmark fixture checksum mismatch."""
