"""Chat-completion gateway: templating, record/replay cache, token accounting.

This is the only module that talks to an LLM provider.  Completions are
keyed by a digest of (model, temperature, top_p, prompt); replay mode serves
exclusively from the transcript cache and never touches the network, which
keeps the whole pipeline deterministic and testable offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import string
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

TEMPLATE_IDS = (
    "parameter-observation",
    "operation-observation",
    "schema-observation",
    "mapping",
    "mapping-confirmation",
    "property-observation",
    "constraint-confirmation",
    "testgen",
    "merged-observation-confirmation",
)

_DEFAULT_PROMPT_DIR = Path(__file__).parent / "prompts"

API_KEY_ENV = "OASGUARD_API_KEY"
BASE_URL_ENV = "OASGUARD_BASE_URL"
_DEFAULT_BASE_URL = "https://api.openai.com/v1"


class MissingBinding(KeyError):
    """A template placeholder was left unbound."""


class CacheMiss(KeyError):
    """Replay mode was asked for a prompt that was never recorded."""


class ProviderError(RuntimeError):
    """The provider failed after retries were exhausted."""


class TransientProviderError(ProviderError):
    """A retryable transport-level failure."""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    def placeholders(self) -> set[str]:
        return {
            name
            for _, name, _, _ in string.Formatter().parse(self.body)
            if name is not None
        }

    def render(self, bindings: dict[str, str]) -> str:
        missing = self.placeholders() - set(bindings)
        if missing:
            raise MissingBinding(sorted(missing)[0])
        return self.body.format(**bindings)


class TemplateLibrary:
    """Templates are configuration: plain text files, one per template id."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else _DEFAULT_PROMPT_DIR
        self._cache: dict[str, PromptTemplate] = {}

    def get(self, template_id: str) -> PromptTemplate:
        if template_id not in self._cache:
            path = self.directory / f"{template_id}.txt"
            if not path.exists():
                raise KeyError(f"no template {template_id!r} in {self.directory}")
            self._cache[template_id] = PromptTemplate(template_id, path.read_text())
        return self._cache[template_id]

    def render(self, template_id: str, bindings: dict[str, str]) -> str:
        return self.get(template_id).render(bindings)


@dataclass(frozen=True)
class LlmRequest:
    template_id: str
    rendered_prompt: str
    model: str
    temperature: float
    top_p: float

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    input_tokens: int
    output_tokens: int
    cached: bool

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be >= 0")


def request_digest(req: LlmRequest) -> str:
    payload = json.dumps(
        {
            "model": req.model,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "prompt": req.rendered_prompt,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TranscriptCache:
    """Append-only JSON-lines store of provider transcripts.

    An in-memory instance (path=None) is valid; entries are write-once, the
    first recording of a digest wins.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line_no, line in enumerate(self.path.read_text().splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{self.path}:{line_no}: bad cache line: {exc}") from exc
                self.entries.setdefault(record["digest"], record)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, digest: str) -> LlmResponse | None:
        record = self.entries.get(digest)
        if record is None:
            return None
        return LlmResponse(
            text=record["completion"],
            input_tokens=int(record["input_tokens"]),
            output_tokens=int(record["output_tokens"]),
            cached=True,
        )

    def put(self, req: LlmRequest, response: LlmResponse) -> None:
        digest = request_digest(req)
        record = {
            "digest": digest,
            "model": req.model,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "prompt": req.rendered_prompt,
            "completion": response.text,
            "input_tokens": response.input_tokens,
            "output_tokens": response.output_tokens,
        }
        with self._lock:
            if digest in self.entries:
                return
            self.entries[digest] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


class Provider(Protocol):
    def __call__(self, req: LlmRequest) -> tuple[str, int, int]:
        """Return (completion text, input tokens, output tokens)."""


def estimate_tokens(text: str) -> int:
    """Deterministic size proxy used when a provider reports no usage."""
    return max(1, (len(text) + 3) // 4)


class OpenAiCompatProvider:
    """Chat-completions provider for any OpenAI-compatible endpoint.

    Endpoint and credentials come from the environment only; transport
    errors and 5xx/429 responses are raised as transient so the gateway
    retries them.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None, timeout: float = 60.0):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV, _DEFAULT_BASE_URL)).rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        self.timeout = timeout

    def __call__(self, req: LlmRequest) -> tuple[str, int, int]:
        import requests

        if not self.api_key:
            raise ProviderError(f"no API key: set {API_KEY_ENV}")
        try:
            resp = requests.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": req.model,
                    "temperature": req.temperature,
                    "top_p": req.top_p,
                    "messages": [{"role": "user", "content": req.rendered_prompt}],
                },
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientProviderError(str(exc)) from exc
        if resp.status_code in (429,) or resp.status_code >= 500:
            raise TransientProviderError(f"provider returned HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(f"provider returned HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        text = data["choices"][0]["message"]["content"]
        usage = data.get("usage") or {}
        return (
            text,
            int(usage.get("prompt_tokens", estimate_tokens(req.rendered_prompt))),
            int(usage.get("completion_tokens", estimate_tokens(text))),
        )


class Gateway:
    """Provider-agnostic completion front end with session accounting."""

    MAX_ATTEMPTS = 3

    def __init__(
        self,
        provider: Provider | None = None,
        *,
        model: str = "gpt-4o",
        temperature: float = 0.0,
        top_p: float = 0.95,
        mode: str = "replay",
        templates: TemplateLibrary | None = None,
        max_concurrency: int = 4,
        retry_base_delay: float = 0.5,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"bad gateway mode {mode!r}")
        self.provider = provider
        self.model = model
        self.temperature = temperature
        self.top_p = top_p
        self.mode = mode
        self.templates = templates or TemplateLibrary()
        self._semaphore = threading.Semaphore(max_concurrency)
        self._retry_base_delay = retry_base_delay
        self._sleep = sleeper
        self._stats_lock = threading.Lock()
        self.input_tokens = 0
        self.output_tokens = 0
        self.cache_hits = 0
        self.provider_calls = 0
        self.calls_by_template: dict[str, int] = {}

    def build_request(self, template_id: str, bindings: dict[str, str]) -> LlmRequest:
        prompt = self.templates.render(template_id, bindings)
        return LlmRequest(template_id, prompt, self.model, self.temperature, self.top_p)

    def ask(
        self,
        template_id: str,
        bindings: dict[str, str],
        cache: TranscriptCache,
        mode: str | None = None,
    ) -> LlmResponse:
        return self.complete(self.build_request(template_id, bindings), cache, mode)

    def complete(
        self, req: LlmRequest, cache: TranscriptCache, mode: str | None = None
    ) -> LlmResponse:
        mode = mode or self.mode
        digest = request_digest(req)
        if mode in ("replay", "record"):
            cached = cache.get(digest)
            if cached is not None:
                self._count(req, cached)
                return cached
            if mode == "replay":
                raise CacheMiss(f"no transcript for digest {digest[:12]}… ({req.template_id})")
        text, tokens_in, tokens_out = self._call_provider(req)
        response = LlmResponse(text, tokens_in, tokens_out, cached=False)
        if mode == "record":
            cache.put(req, response)
        self._count(req, response)
        return response

    def _call_provider(self, req: LlmRequest) -> tuple[str, int, int]:
        if self.provider is None:
            raise ProviderError("no provider configured (replay mode requires a cache hit)")
        last: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            try:
                with self._semaphore:
                    result = self.provider(req)
                with self._stats_lock:
                    self.provider_calls += 1
                return result
            except TransientProviderError as exc:
                last = exc
                if attempt + 1 < self.MAX_ATTEMPTS:
                    self._sleep(self._retry_base_delay * (2**attempt))
        raise ProviderError(f"provider failed after {self.MAX_ATTEMPTS} attempts: {last}")

    def _count(self, req: LlmRequest, response: LlmResponse) -> None:
        with self._stats_lock:
            self.input_tokens += response.input_tokens
            self.output_tokens += response.output_tokens
            if response.cached:
                self.cache_hits += 1
            self.calls_by_template[req.template_id] = (
                self.calls_by_template.get(req.template_id, 0) + 1
            )

    def stats(self) -> dict:
        with self._stats_lock:
            return {
                "input_tokens": self.input_tokens,
                "output_tokens": self.output_tokens,
                "cache_hits": self.cache_hits,
                "provider_calls": self.provider_calls,
                "calls_by_template": dict(sorted(self.calls_by_template.items())),
            }


@dataclass(frozen=True)
class StructuredAnswer:
    verdict: bool
    property: str | None = None
    explanation: str | None = None


@dataclass(frozen=True)
class ParseFailure:
    reason: str


_VERDICT_RE = re.compile(r"^\W*(yes|no)\b", re.IGNORECASE)
_PROPERTY_RE = re.compile(
    r"corresponding property\s*[:=]\s*[\"'`]?([\w.\[\]-]+)", re.IGNORECASE
)
_EXPLANATION_RE = re.compile(r"explanation\s*[:=]\s*(.+)", re.IGNORECASE)
_ANSWER_PREFIX_RE = re.compile(r"^\W*answer\s*[:=]\s*(.+)$", re.IGNORECASE)


def parse_structured_answer(text: str, expected: str = "mapping") -> StructuredAnswer | ParseFailure:
    """Lenient extraction of (verdict, property, explanation) from a completion.

    Failures are values, not exceptions: unusable completions are counted
    and discarded by callers.
    """
    if expected not in ("mapping", "yes-no"):
        raise ValueError(f"unknown answer schema {expected!r}")
    verdict: bool | None = None
    for line in text.splitlines():
        candidate = line
        prefixed = _ANSWER_PREFIX_RE.match(line)
        if prefixed:
            candidate = prefixed.group(1)
        m = _VERDICT_RE.match(candidate)
        if m:
            verdict = m.group(1).lower() == "yes"
            break
    if verdict is None:
        return ParseFailure("no yes/no verdict found")
    if expected == "yes-no":
        return StructuredAnswer(verdict=verdict)
    prop_match = _PROPERTY_RE.search(text)
    expl_match = _EXPLANATION_RE.search(text)
    return StructuredAnswer(
        verdict=verdict,
        property=prop_match.group(1) if prop_match else None,
        explanation=expl_match.group(1).strip() if expl_match else None,
    )


def extract_json_block(text: str) -> str | None:
    """First JSON object in a completion, fenced or bare."""
    fence = re.search(r"```(?:json)?\s*\n(.*?)```", text, re.DOTALL)
    if fence:
        candidate = fence.group(1).strip()
        if candidate.startswith("{"):
            return candidate
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None
