"""Pipeline facade shared by the HTTP service and the CLI.

Each stage is a pure-ish function over in-memory payloads; file reading and
writing stay at the edges (CLI), so the same code path serves both local
runs and the service endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import TOOL_VERSION, evalkit, harness, ir, mining, specmodel, synth
from .config import RunConfig
from .llm import Gateway, OpenAiCompatProvider, TemplateLibrary, TranscriptCache


@dataclass
class Runtime:
    """Gateway + cache wired from a run configuration."""

    config: RunConfig
    gateway: Gateway
    cache: TranscriptCache
    kb: mining.KnowledgeBase = field(default_factory=mining.KnowledgeBase)


def build_runtime(config: RunConfig, provider=None) -> Runtime:
    config = config.validate()
    if provider is None and config.llm.mode in ("live", "record"):
        provider = OpenAiCompatProvider()
    templates = TemplateLibrary(config.llm.prompt_dir)
    gateway = Gateway(
        provider,
        model=config.llm.model,
        temperature=config.llm.temperature,
        top_p=config.llm.top_p,
        mode=config.llm.mode,
        templates=templates,
        max_concurrency=config.llm.max_concurrency,
    )
    cache = TranscriptCache(config.llm.cache_path)
    return Runtime(config=config, gateway=gateway, cache=cache)


def load_document(document, format: str | None = None) -> specmodel.ApiSpec:
    return specmodel.load_spec(document, format)


def mine_stage(runtime: Runtime, spec: specmodel.ApiSpec) -> tuple[list[mining.Constraint], dict]:
    constraints, report = mining.mine_all(
        spec,
        runtime.gateway,
        runtime.cache,
        mode=runtime.config.mining.mode,
        kb=runtime.kb,
    )
    report["tool_version"] = TOOL_VERSION
    return constraints, report


def gen_stage(
    runtime: Runtime,
    spec: specmodel.ApiSpec,
    constraints: list[mining.Constraint],
) -> tuple[list[synth.SynthesisResult], dict]:
    results, report = synth.synthesize_all(
        constraints,
        spec,
        runtime.gateway,
        runtime.cache,
        verify=runtime.config.synthesis.verify_examples,
        repair_attempts=runtime.config.synthesis.repair_attempts,
    )
    report["tool_version"] = TOOL_VERSION
    return results, report


def run_stage(
    config: RunConfig,
    programs: list[ir.ValidatorProgram],
    exchanges: list[harness.Exchange],
    *,
    spec: specmodel.ApiSpec | None = None,
    trace_stats: harness.TraceStats | None = None,
) -> dict:
    results = harness.run(
        programs, exchanges, lenient_formats=config.harness.lenient_formats
    )
    return harness.build_report(
        results, tool_version=TOOL_VERSION, spec=spec, trace_stats=trace_stats
    )


def eval_stage(
    mined: list[mining.Constraint],
    ground_truth: evalkit.GroundTruth,
    judgments: dict[str, dict],
    external: list[evalkit.ExternalInvariant] | None = None,
) -> dict:
    metrics = evalkit.score(mined, ground_truth, judgments)
    out = {"tool_version": TOOL_VERSION, "metrics": metrics.to_dict()}
    if external is not None:
        out["overlap"] = evalkit.overlap(mined, external).to_dict()
    return out
