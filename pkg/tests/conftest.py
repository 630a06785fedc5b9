import json
from pathlib import Path

import pytest

from flangraph import Application, parse

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def touchpoint_app() -> Application:
    return Application.from_json((FIXTURES / "touchpoint_claims.jsonl").read_text())


@pytest.fixture(scope="session")
def touchpoint_parsed(touchpoint_app):
    return [parse(c) for c in touchpoint_app.claims]


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads((FIXTURES / "touchpoint_golden.json").read_text())


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
