import json
from pathlib import Path

import pytest

from pdhlock.config import load_project

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def config3():
    return load_project(FIXTURES / "config3.json")


@pytest.fixture(scope="session")
def config3_doc():
    return json.loads((FIXTURES / "config3.json").read_text())


@pytest.fixture(scope="session")
def all_configs():
    return [load_project(FIXTURES / f"config{i}.json") for i in (1, 2, 3)]
