"""Run configuration: one YAML or TOML file plus flag overrides.

Secrets never live in config files; the provider key and base URL are read
from the environment by the gateway.  Validation failures carry the exact
field path so the CLI can exit 1 with a usable message.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


@dataclass(frozen=True)
class LlmConfig:
    model: str = "gpt-4o"
    temperature: float = 0.0
    top_p: float = 0.95
    mode: str = "replay"
    cache_path: str | None = None
    max_concurrency: int = 4
    prompt_dir: str | None = None


@dataclass(frozen=True)
class MiningConfig:
    mode: str = "oc"
    kb_path: str | None = None


@dataclass(frozen=True)
class SynthesisConfig:
    repair_attempts: int = 1
    verify_examples: bool = True


@dataclass(frozen=True)
class HarnessConfig:
    traces_path: str | None = None
    lenient_formats: bool = False


@dataclass(frozen=True)
class RunConfig:
    spec_path: str | None = None
    llm: LlmConfig = field(default_factory=LlmConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    output_dir: str | None = None

    def validate(self) -> "RunConfig":
        if self.llm.mode not in ("live", "record", "replay"):
            raise ConfigError("llm.mode", "must be one of live|record|replay")
        if self.llm.mode == "replay" and not self.llm.cache_path:
            raise ConfigError("llm.cache_path", "replay mode requires a cache path")
        if self.llm.temperature < 0:
            raise ConfigError("llm.temperature", "must be >= 0")
        if not (0 < self.llm.top_p <= 1):
            raise ConfigError("llm.top_p", "must be in (0, 1]")
        if self.llm.max_concurrency < 1:
            raise ConfigError("llm.max_concurrency", "must be >= 1")
        if self.mining.mode not in ("oc", "merged"):
            raise ConfigError("mining.mode", "must be one of oc|merged")
        if self.synthesis.repair_attempts < 0:
            raise ConfigError("synthesis.repair_attempts", "must be >= 0")
        return self


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(name, "must be a table/mapping")
    return value


def _pick(data: dict, section: str, cls, defaults):
    known = {f.name for f in defaults.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{section}.{sorted(unknown)[0]}", "unknown field")
    try:
        return replace(defaults, **data)
    except TypeError as exc:
        raise ConfigError(section, str(exc)) from exc


def config_from_dict(data: dict) -> RunConfig:
    known_top = {"spec_path", "llm", "mining", "synthesis", "harness", "output_dir"}
    unknown = set(data) - known_top
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    cfg = RunConfig(
        spec_path=data.get("spec_path"),
        llm=_pick(_section(data, "llm"), "llm", LlmConfig, LlmConfig()),
        mining=_pick(_section(data, "mining"), "mining", MiningConfig, MiningConfig()),
        synthesis=_pick(_section(data, "synthesis"), "synthesis", SynthesisConfig, SynthesisConfig()),
        harness=_pick(_section(data, "harness"), "harness", HarnessConfig, HarnessConfig()),
        output_dir=data.get("output_dir"),
    )
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"no such file: {path}")
    if path.suffix == ".toml":
        data = tomllib.loads(path.read_text())
    else:
        data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return config_from_dict(data)
