"""Shared pytest setup: project root on sys.path, common fixtures."""

import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tests.fixtures import FIXTURES, read_fixture  # noqa: E402


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def contract_source():
    """Read a Solidity fixture by file name."""
    def _read(name: str) -> str:
        return read_fixture(f"contracts/{name}")
    return _read
