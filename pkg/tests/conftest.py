import pytest

from blxc.benchmarks import build_benchmarks
from blxc.hwprofile import CostModel, load_builtin_profile
from blxc.registry import load_registry


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture(scope="session")
def cost_model():
    return CostModel.load()


@pytest.fixture(scope="session")
def uniform4():
    return load_builtin_profile("uniform4")


@pytest.fixture(scope="session")
def commheavy4():
    return load_builtin_profile("commheavy4")


@pytest.fixture(scope="session")
def cases():
    return {c.name: c for c in build_benchmarks()}
