import json
from pathlib import Path

import pytest

from mplan.backends import mock_suite
from mplan.plan_model import ImageStore

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def png_16x16() -> bytes:
    return (FIXTURES / "img_16x16.png").read_bytes()


@pytest.fixture()
def store(tmp_path) -> ImageStore:
    return ImageStore(tmp_path / "blobs")


@pytest.fixture()
def suite():
    return mock_suite(seed=7)


@pytest.fixture(scope="session")
def judge_fixtures() -> list[dict]:
    return json.loads((FIXTURES / "judge_responses.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def ppddl_fixtures() -> list[dict]:
    return json.loads((FIXTURES / "ppddl_messy.json").read_text(encoding="utf-8"))
