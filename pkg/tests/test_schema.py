"""The shipped XSD must accept every fixture and the serializer's output."""

import random
from pathlib import Path

import pytest

xmlschema = pytest.importorskip("xmlschema")

from blxc.benchmarks import CASE_NAMES, benchmarks_root
from blxc.mdlx import serialize_model

from gen import gen_model

REPO = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def schema():
    return xmlschema.XMLSchema(str(REPO / "docs" / "mdlx.xsd"))


def test_benchmark_fixtures_validate(schema):
    for name in CASE_NAMES:
        for variant in ("toolbox.mdlx", "expanded.mdlx"):
            path = benchmarks_root() / name / variant
            schema.validate(str(path))


def test_serializer_output_validates(schema):
    for seed in range(10):
        rng = random.Random(130_000 + seed)
        m = gen_model(rng, max_blocks=20)
        schema.validate(serialize_model(m).decode("utf-8"))
