from __future__ import annotations

from pathlib import Path

import pytest

from archloop.engine import Engine
from archloop.gateway import Gateway, ReplayBackend

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def golden_cassette_path() -> Path:
    return DATA_DIR / "golden_walkthrough.cassette.json"


@pytest.fixture
def bench_cassette_path() -> Path:
    return DATA_DIR / "bench_fixture.cassette.json"


@pytest.fixture
def questions_path() -> Path:
    return DATA_DIR / "questions_fixture.yaml"


@pytest.fixture
def replay_engine(tmp_path, golden_cassette_path) -> Engine:
    """Engine wired to the committed golden cassette."""
    gateway = Gateway(ReplayBackend(golden_cassette_path))
    return Engine(gateway, tmp_path / "data")


@pytest.fixture
def no_network(monkeypatch):
    """Make any network attempt explode loudly."""
    import socket

    import httpx

    def _fail(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(httpx.Client, "send", _fail)
    monkeypatch.setattr(socket.socket, "connect", _fail)
