import json
import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
sys.path.insert(0, str(SRC))

from golden import load_fixture  # noqa: E402
from instance_io import parse_instance  # noqa: E402


def load_instance(name: str):
    """(network, profile) эталона по имени, со стратегией из экземпляра"""
    fixture = load_fixture(name)
    return parse_instance(json.dumps(fixture.instance))


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    for name in ("NRM_SEED", "NRM_DEGREE_CAP", "NRM_SUBSET_SAMPLES",
                 "NRM_ABB_THRESHOLD", "NRM_WORKERS", "NRM_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def tree16():
    network, _ = load_instance("FIX-T")
    return network


@pytest.fixture
def gap_graph():
    network, _ = load_instance("FIX-G")
    return network


@pytest.fixture
def line():
    network, _ = load_instance("FIX-LINE")
    return network


@pytest.fixture
def p1():
    network, _ = load_instance("FIX-P1")
    return network


@pytest.fixture
def p2():
    network, _ = load_instance("FIX-P2")
    return network


@pytest.fixture
def depth_gap():
    network, _ = load_instance("FIX-GAP")
    return network
