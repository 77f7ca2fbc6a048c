"""Signal datatypes: scalars, fixed-size arrays, point clouds, and buses.

The textual syntax used in model files and reports:

    scalar
    vector(3)
    matrix(2,3)
    pointcloud(1024)
    bus(a:scalar, b:vector(3), c:bus(x:scalar, y:scalar))

Bus element names are unique per nesting level and positions are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemaError


@dataclass(frozen=True)
class DType:
    """Base class; concrete dtypes below."""

    def byte_size(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class Scalar(DType):
    def byte_size(self) -> int:
        return 8

    def __str__(self) -> str:
        return "scalar"


@dataclass(frozen=True)
class Vector(DType):
    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise SchemaError(f"vector length must be positive, got {self.n}")

    def byte_size(self) -> int:
        return 8 * self.n

    def __str__(self) -> str:
        return f"vector({self.n})"


@dataclass(frozen=True)
class Matrix(DType):
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise SchemaError(f"matrix dims must be positive, got {self.rows}x{self.cols}")

    def byte_size(self) -> int:
        return 8 * self.rows * self.cols

    def __str__(self) -> str:
        return f"matrix({self.rows},{self.cols})"


@dataclass(frozen=True)
class PointCloud(DType):
    """Up to max_n rows of (x, y, z). Runtime row count may be smaller."""

    max_n: int

    def __post_init__(self):
        if self.max_n <= 0:
            raise SchemaError(f"pointcloud capacity must be positive, got {self.max_n}")

    def byte_size(self) -> int:
        # 12 bytes per point plus an 8-byte header carrying the live count.
        return 12 * self.max_n + 8

    def __str__(self) -> str:
        return f"pointcloud({self.max_n})"


@dataclass(frozen=True)
class Bus(DType):
    """Ordered, possibly nested grouping of named signals. Compiled away by
    the extractor; never crosses the model boundary."""

    layout: "BusLayout"

    def byte_size(self) -> int:
        return sum(t.byte_size() for _, t in self.layout.elements)

    def __str__(self) -> str:
        inner = ", ".join(f"{n}:{t}" for n, t in self.layout.elements)
        return f"bus({inner})"


@dataclass(frozen=True)
class BusLayout:
    """Ordered (name, dtype) pairs; names unique at each nesting level."""

    elements: tuple[tuple[str, DType], ...]

    def __post_init__(self):
        names = [n for n, _ in self.elements]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate bus element names in {names}")

    def index_of(self, name: str) -> int:
        """1-based position of a top-level element."""
        for i, (n, _) in enumerate(self.elements, start=1):
            if n == name:
                return i
        raise KeyError(name)

    def at(self, pos: int) -> tuple[str, DType]:
        """Element at 1-based position."""
        if not 1 <= pos <= len(self.elements):
            raise IndexError(pos)
        return self.elements[pos - 1]


def element_count(dt: DType) -> int:
    """Number of scalar-ish elements, used by cost formulas (principal size n)."""
    if isinstance(dt, Scalar):
        return 1
    if isinstance(dt, Vector):
        return dt.n
    if isinstance(dt, Matrix):
        return dt.rows * dt.cols
    if isinstance(dt, PointCloud):
        return dt.max_n
    if isinstance(dt, Bus):
        return sum(element_count(t) for _, t in dt.layout.elements)
    raise TypeError(dt)


def parse_dtype(text: str) -> DType:
    """Parse the textual dtype syntax. Raises SchemaError on bad input."""
    dt, rest = _parse_dtype(text.strip())
    if rest.strip():
        raise SchemaError(f"trailing characters in dtype {text!r}")
    return dt


def _parse_dtype(s: str) -> tuple[DType, str]:
    s = s.lstrip()
    for head in ("scalar", "vector", "matrix", "pointcloud", "bus"):
        if s.startswith(head):
            rest = s[len(head):]
            break
    else:
        raise SchemaError(f"unknown dtype at {s[:24]!r}")
    if head == "scalar":
        return Scalar(), rest
    rest = rest.lstrip()
    if not rest.startswith("("):
        raise SchemaError(f"expected '(' after {head!r}")
    rest = rest[1:]
    if head == "vector":
        num, rest = _parse_int(rest)
        rest = _expect(rest, ")")
        return Vector(num), rest
    if head == "matrix":
        r, rest = _parse_int(rest)
        rest = _expect(rest, ",")
        c, rest = _parse_int(rest)
        rest = _expect(rest, ")")
        return Matrix(r, c), rest
    if head == "pointcloud":
        num, rest = _parse_int(rest)
        rest = _expect(rest, ")")
        return PointCloud(num), rest
    # bus(name:dtype, ...)
    elements: list[tuple[str, DType]] = []
    while True:
        rest = rest.lstrip()
        j = 0
        while j < len(rest) and (rest[j].isalnum() or rest[j] == "_"):
            j += 1
        name, rest = rest[:j], rest[j:]
        if not name:
            raise SchemaError("empty bus element name")
        rest = _expect(rest, ":")
        dt, rest = _parse_dtype(rest)
        elements.append((name, dt))
        rest = rest.lstrip()
        if rest.startswith(","):
            rest = rest[1:]
            continue
        rest = _expect(rest, ")")
        return Bus(BusLayout(tuple(elements))), rest


def _parse_int(s: str) -> tuple[int, str]:
    s = s.lstrip()
    j = 0
    while j < len(s) and s[j].isdigit():
        j += 1
    if j == 0:
        raise SchemaError(f"expected integer at {s[:16]!r}")
    return int(s[:j]), s[j:]


def _expect(s: str, ch: str) -> str:
    s = s.lstrip()
    if not s.startswith(ch):
        raise SchemaError(f"expected {ch!r} at {s[:16]!r}")
    return s[1:]
