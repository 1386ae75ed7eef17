"""FastAPI service wrapping the pipeline.

The service owns one gateway/transcript-cache pair built from its run
configuration; requests may override the LLM mode per call (a replay-only
deployment is the deterministic default).  All payloads are inline JSON;
the service never reads from or writes to caller file paths.
"""

from __future__ import annotations

import json
from dataclasses import replace

from fastapi import FastAPI, HTTPException

from .. import TOOL_VERSION, evalkit, harness, ir, mining, pipeline, specmodel
from ..config import RunConfig
from ..ir.serialize import IrSyntaxError
from ..llm import CacheMiss, ProviderError
from ..specmodel import SpecError
from . import models


def _load_spec_payload(document, format):
    try:
        if isinstance(document, dict):
            return specmodel.load_spec(document)
        return specmodel.load_spec(document.encode("utf-8"), format)
    except SpecError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app(config: RunConfig | None = None, provider=None) -> FastAPI:
    config = (config or RunConfig(llm=replace(RunConfig().llm, mode="live"))).validate()
    app = FastAPI(
        title="oasguard",
        version=TOOL_VERSION,
        description="Mine response-body constraints from OpenAPI documents, "
        "compile them to validators, and check recorded traffic against them.",
    )
    runtime = pipeline.build_runtime(config, provider=provider)

    def _runtime_for(overrides: models.LlmOverrides | None) -> pipeline.Runtime:
        if overrides is None:
            return runtime
        llm = runtime.config.llm
        changed = replace(
            llm,
            mode=overrides.mode or llm.mode,
            model=overrides.model or llm.model,
            temperature=overrides.temperature if overrides.temperature is not None else llm.temperature,
            top_p=overrides.top_p if overrides.top_p is not None else llm.top_p,
        )
        if changed == llm:
            return runtime
        fresh = pipeline.build_runtime(replace(runtime.config, llm=changed), provider=provider)
        fresh.cache = runtime.cache  # one transcript store per service
        fresh.kb = runtime.kb
        return fresh

    @app.get("/health", response_model=models.HealthResponse)
    def health() -> models.HealthResponse:
        return models.HealthResponse(status="ok", tool_version=TOOL_VERSION)

    @app.post("/spec/normalize", response_model=models.NormalizeResponse)
    def normalize(payload: models.SpecPayload) -> models.NormalizeResponse:
        spec = _load_spec_payload(payload.document, payload.format)
        return models.NormalizeResponse(tool_version=TOOL_VERSION, spec=specmodel.spec_to_dict(spec))

    @app.post("/mine", response_model=models.MineResponse)
    def mine(payload: models.MineRequest) -> models.MineResponse:
        spec = _load_spec_payload(payload.document, payload.format)
        rt = _runtime_for(payload.llm)
        if payload.mining_mode is not None:
            rt = pipeline.Runtime(
                config=replace(rt.config, mining=replace(rt.config.mining, mode=payload.mining_mode)),
                gateway=rt.gateway,
                cache=rt.cache,
                kb=rt.kb,
            )
        try:
            constraints, report = pipeline.mine_stage(rt, spec)
        except CacheMiss as exc:
            raise HTTPException(status_code=409, detail=f"replay cache miss: {exc}") from exc
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return models.MineResponse(
            tool_version=TOOL_VERSION,
            constraints=[
                models.ConstraintModel(**mining.constraint_to_dict(c)) for c in constraints
            ],
            report=report,
        )

    @app.post("/gen", response_model=models.GenResponse)
    def gen(payload: models.GenRequest) -> models.GenResponse:
        spec = _load_spec_payload(payload.document, payload.format)
        rt = _runtime_for(payload.llm)
        rt = pipeline.Runtime(
            config=replace(
                rt.config,
                synthesis=replace(rt.config.synthesis, verify_examples=payload.verify),
            ),
            gateway=rt.gateway,
            cache=rt.cache,
            kb=rt.kb,
        )
        constraints = [
            mining.constraint_from_dict(c.model_dump()) for c in payload.constraints
        ]
        try:
            results, report = pipeline.gen_stage(rt, spec, constraints)
        except CacheMiss as exc:
            raise HTTPException(status_code=409, detail=f"replay cache miss: {exc}") from exc
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        files = {
            name: json.loads(content)
            for name, content in synth_bundle_files(results).items()
        }
        return models.GenResponse(tool_version=TOOL_VERSION, programs=files, report=report)

    @app.post("/run", response_model=models.RunResponse)
    def run(payload: models.RunRequest) -> models.RunResponse:
        programs = []
        for i, raw in enumerate(payload.programs):
            try:
                programs.append(ir.program_from_dict(raw))
            except IrSyntaxError as exc:
                raise HTTPException(status_code=422, detail=f"programs[{i}]: {exc}") from exc
        exchanges = [
            harness.Exchange(
                operation=f"{e.operation.get('method', '').upper()} {e.operation.get('path', '')}",
                request=e.request,
                status=e.status,
                response_body=e.response_body,
                captured_at=e.captured_at,
            )
            for e in payload.exchanges
        ]
        retained = [e for e in exchanges if 200 <= e.status <= 299]
        stats = harness.TraceStats(
            total_lines=len(exchanges),
            retained=len(retained),
            filtered_non_2xx=len(exchanges) - len(retained),
        )
        spec = None
        if payload.document is not None:
            spec = _load_spec_payload(payload.document, payload.format)
        cfg = replace(
            runtime.config,
            harness=replace(runtime.config.harness, lenient_formats=payload.lenient_formats),
        )
        report = pipeline.run_stage(cfg, programs, retained, spec=spec, trace_stats=stats)
        return models.RunResponse(
            tool_version=TOOL_VERSION,
            report=report,
            exit_code=harness.exit_code_for(report),
        )

    @app.post("/eval", response_model=models.EvalResponse)
    def evaluate(payload: models.EvalRequest) -> models.EvalResponse:
        constraints = [
            mining.constraint_from_dict(c.model_dump()) for c in payload.constraints
        ]
        gt = evalkit.GroundTruth(
            tuple(
                evalkit.GroundTruthEntry(
                    operation=e.operation,
                    variables=tuple(e.variables),
                    description=e.description,
                    category=e.category,
                )
                for e in payload.ground_truth
            )
        )
        external = None
        if payload.external_invariants is not None:
            external = [
                evalkit.ExternalInvariant(
                    raw["operation"], tuple(raw["variables"]), raw.get("text", "")
                )
                if "variables" in raw
                else evalkit.parse_invariant_text(raw["operation"], raw["text"])
                for raw in payload.external_invariants
            ]
        try:
            result = pipeline.eval_stage(constraints, gt, payload.judgments, external)
        except evalkit.MissingJudgment as exc:
            raise HTTPException(status_code=422, detail=f"missing judgment: {exc}") from exc
        return models.EvalResponse(
            tool_version=TOOL_VERSION,
            metrics=result["metrics"],
            overlap=result.get("overlap"),
        )

    @app.post("/validate", response_model=models.ValidateResponse)
    def validate(payload: models.ValidateRequest) -> models.ValidateResponse:
        try:
            program = ir.program_from_dict(payload.program)
        except IrSyntaxError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        verdict = ir.evaluate(
            program,
            payload.request,
            payload.response,
            lenient_formats=payload.lenient_formats,
        )
        return models.ValidateResponse(
            tool_version=TOOL_VERSION, verdict=verdict.label, detail=verdict.detail
        )

    return app


def synth_bundle_files(results):
    from ..synth import bundle_to_files

    return bundle_to_files(results)
