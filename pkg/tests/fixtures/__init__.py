"""Fixture paths shared by the test suite."""

from pathlib import Path

FIXTURES = Path(__file__).parent


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def read_fixture(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")
