from __future__ import annotations

from pathlib import Path

import pytest

from oasguard import specmodel
from oasguard.config import HarnessConfig, LlmConfig, RunConfig
from oasguard.llm import Gateway, TranscriptCache

from llm_stub import FailingProvider, ScriptedProvider

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture
def charges_spec():
    return specmodel.load_spec(FIXTURES / "charges_api.yaml")


@pytest.fixture
def transcript_cache() -> TranscriptCache:
    return TranscriptCache(FIXTURES / "transcripts.jsonl")


@pytest.fixture
def replay_gateway() -> Gateway:
    """Replay-only gateway whose provider fails on any network contact."""
    return Gateway(FailingProvider(), mode="replay")


@pytest.fixture
def record_gateway(tmp_path) -> tuple[Gateway, TranscriptCache]:
    cache = TranscriptCache(tmp_path / "cache.jsonl")
    return Gateway(ScriptedProvider(), mode="record"), cache


@pytest.fixture
def replay_config() -> RunConfig:
    return RunConfig(
        spec_path=str(FIXTURES / "charges_api.yaml"),
        llm=LlmConfig(mode="replay", cache_path=str(FIXTURES / "transcripts.jsonl")),
        harness=HarnessConfig(traces_path=str(FIXTURES / "traces.jsonl")),
    )
