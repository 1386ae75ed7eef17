"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"]
    tool_version: str


class SpecPayload(BaseModel):
    """An OpenAPI document, inline as an object or as YAML/JSON text."""

    document: dict[str, Any] | str
    format: Literal["yaml", "json"] | None = None


class NormalizeResponse(BaseModel):
    tool_version: str
    spec: dict[str, Any]


class LlmOverrides(BaseModel):
    mode: Literal["live", "record", "replay"] | None = None
    model: str | None = None
    temperature: float | None = Field(default=None, ge=0)
    top_p: float | None = Field(default=None, gt=0, le=1)


class MineRequest(SpecPayload):
    llm: LlmOverrides | None = None
    mining_mode: Literal["oc", "merged"] | None = None


class ConstraintModel(BaseModel):
    id: str
    source: Literal["ReqResp", "RespProp"]
    operation: str
    variables: list[dict[str, str]]
    description: str
    category: str
    provenance: list[str] = Field(default_factory=list)


class MineResponse(BaseModel):
    tool_version: str
    constraints: list[ConstraintModel]
    report: dict[str, Any]


class GenRequest(SpecPayload):
    constraints: list[ConstraintModel]
    llm: LlmOverrides | None = None
    verify: bool = True


class GenResponse(BaseModel):
    tool_version: str
    programs: dict[str, dict[str, Any]]  # file name -> IR document
    report: dict[str, Any]


class ExchangeModel(BaseModel):
    operation: dict[str, str]
    request: dict[str, Any] = Field(default_factory=dict)
    status: int = Field(ge=100, le=599)
    response_body: Any = None
    captured_at: str | None = None


class RunRequest(BaseModel):
    programs: list[dict[str, Any]]
    exchanges: list[ExchangeModel]
    document: dict[str, Any] | str | None = None
    format: Literal["yaml", "json"] | None = None
    lenient_formats: bool = False


class RunResponse(BaseModel):
    tool_version: str
    report: dict[str, Any]
    exit_code: int


class GroundTruthEntryModel(BaseModel):
    operation: str
    variables: list[str]
    description: str
    category: str = "Uncategorized"


class EvalRequest(BaseModel):
    constraints: list[ConstraintModel]
    ground_truth: list[GroundTruthEntryModel]
    judgments: dict[str, dict[str, Any]]
    external_invariants: list[dict[str, Any]] | None = None


class EvalResponse(BaseModel):
    tool_version: str
    metrics: dict[str, Any]
    overlap: dict[str, Any] | None = None


class ValidateRequest(BaseModel):
    program: dict[str, Any]
    request: dict[str, Any] = Field(default_factory=dict)
    response: Any = None
    lenient_formats: bool = False


class ValidateResponse(BaseModel):
    tool_version: str
    verdict: Literal["matched", "unknown", "mismatched"]
    detail: str | None = None
