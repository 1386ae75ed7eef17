import threading

import pytest

from oasguard import llm
from llm_stub import FailingProvider, FlakyProvider, ScriptedProvider

BINDINGS = dict(
    method="GET",
    endpoint="/v1/charges",
    parameter="customer",
    description="Only return charges for the customer specified by this customer ID.",
    schema_name="charge",
    corresponding_property="customer",
    explanation="filters by customer",
)


class TestTemplates:
    def test_mapping_render_shape(self):
        lib = llm.TemplateLibrary()
        prompt = lib.render(
            "mapping",
            {**BINDINGS, "parameter_observation": "p", "operation_observation": "o",
             "schema_observation": "s", "schema": "- customer (string)"},
        )
        assert "Request parameter for GET - /v1/charges" in prompt
        assert "{parameter}" not in prompt and "{schema}" not in prompt

    def test_placeholder_free_template_renders_verbatim(self, tmp_path):
        (tmp_path / "static.txt").write_text("no placeholders here")
        lib = llm.TemplateLibrary(tmp_path)
        assert lib.render("static", {}) == "no placeholders here"

    def test_missing_binding_fails_loudly(self):
        lib = llm.TemplateLibrary()
        with pytest.raises(llm.MissingBinding):
            lib.render("mapping-confirmation", {"method": "GET"})

    def test_testgen_contains_schema_block(self):
        lib = llm.TemplateLibrary()
        prompt = lib.render(
            "testgen",
            {
                "parameter": "(none)",
                "constraint_description": "A positive integer can be up to eight digits.",
                "response_schema": "- amount (integer): A positive integer...",
                "property": "amount",
                "property_description": "A positive integer can be up to eight digits.",
            },
        )
        assert "API response schema: - amount (integer)" in prompt
        assert "'amount'" in prompt

    def test_all_shipped_templates_load(self):
        lib = llm.TemplateLibrary()
        for template_id in llm.TEMPLATE_IDS:
            assert lib.get(template_id).body.strip()


def _request(gateway, suffix=""):
    return gateway.build_request(
        "mapping-confirmation", {**BINDINGS, "explanation": "filters" + suffix}
    )


class TestCompleteModes:
    def test_record_then_replay_identical(self, tmp_path):
        cache_path = tmp_path / "cache.jsonl"
        recorder = llm.Gateway(ScriptedProvider(), mode="record")
        recorded = recorder.complete(_request(recorder), llm.TranscriptCache(cache_path))
        assert recorded.cached is False

        replayer = llm.Gateway(FailingProvider(), mode="replay")
        for _ in range(3):
            replayed = replayer.complete(_request(replayer), llm.TranscriptCache(cache_path))
            assert replayed.cached is True
            assert replayed.text == recorded.text

    def test_replay_without_transcript_is_cache_miss(self):
        gateway = llm.Gateway(FailingProvider(), mode="replay")
        with pytest.raises(llm.CacheMiss):
            gateway.complete(_request(gateway), llm.TranscriptCache())

    def test_record_contacts_provider_once_per_digest(self, tmp_path):
        provider = ScriptedProvider()
        gateway = llm.Gateway(provider, mode="record")
        cache = llm.TranscriptCache(tmp_path / "c.jsonl")
        gateway.complete(_request(gateway), cache)
        second = gateway.complete(_request(gateway), cache)
        assert provider.calls == 1
        assert second.cached is True

    def test_live_mode_never_writes_cache(self):
        gateway = llm.Gateway(ScriptedProvider(), mode="live")
        cache = llm.TranscriptCache()
        gateway.complete(_request(gateway), cache)
        assert len(cache) == 0

    def test_distinct_settings_have_distinct_digests(self):
        a = llm.LlmRequest("mapping", "same prompt", "gpt-4o", 0.0, 0.95)
        b = llm.LlmRequest("mapping", "same prompt", "gpt-4o", 0.5, 0.95)
        assert llm.request_digest(a) != llm.request_digest(b)


class TestRetries:
    def test_transient_failures_retried(self, tmp_path):
        flaky = FlakyProvider(2, ScriptedProvider())
        gateway = llm.Gateway(flaky, mode="record", retry_base_delay=0, sleeper=lambda s: None)
        got = gateway.complete(_request(gateway), llm.TranscriptCache(tmp_path / "c.jsonl"))
        assert flaky.attempts == 3
        assert got.text == "yes"

    def test_gives_up_after_three_attempts(self):
        flaky = FlakyProvider(99, ScriptedProvider())
        delays = []
        gateway = llm.Gateway(flaky, mode="live", retry_base_delay=0.5, sleeper=delays.append)
        with pytest.raises(llm.ProviderError):
            gateway.complete(_request(gateway), llm.TranscriptCache())
        assert flaky.attempts == 3
        assert delays == [0.5, 1.0]  # exponential backoff between attempts


class TestAccounting:
    def test_counters_are_sums_and_monotone(self, tmp_path):
        gateway = llm.Gateway(ScriptedProvider(), mode="record")
        cache = llm.TranscriptCache(tmp_path / "c.jsonl")
        running = []
        per_call = []
        for i in range(4):
            before = (gateway.input_tokens, gateway.output_tokens)
            response = gateway.complete(_request(gateway, str(i)), cache)
            per_call.append((response.input_tokens, response.output_tokens))
            after = (gateway.input_tokens, gateway.output_tokens)
            assert after[0] >= before[0] and after[1] >= before[1]
            running.append(after)
        assert running[-1][0] == sum(t[0] for t in per_call)
        assert running[-1][1] == sum(t[1] for t in per_call)

    def test_concurrent_completions_are_counted_exactly(self, tmp_path):
        gateway = llm.Gateway(ScriptedProvider(), mode="record", max_concurrency=4)
        cache = llm.TranscriptCache(tmp_path / "c.jsonl")
        threads = [
            threading.Thread(target=gateway.complete, args=(_request(gateway, str(i)), cache))
            for i in range(16)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert gateway.provider_calls == 16
        assert gateway.calls_by_template == {"mapping-confirmation": 16}
        assert len(cache) == 16


class TestAnswerParsing:
    def test_mapping_answer(self):
        got = llm.parse_structured_answer(
            "yes\ncorresponding property: customer\nexplanation: filters charges"
        )
        assert got == llm.StructuredAnswer(True, "customer", "filters charges")

    def test_bare_no(self):
        got = llm.parse_structured_answer("no")
        assert got == llm.StructuredAnswer(False, None, None)

    def test_unparseable_is_a_value_not_an_exception(self):
        got = llm.parse_structured_answer("I am uncertain; the data is ambiguous.")
        assert isinstance(got, llm.ParseFailure)

    def test_tolerates_surrounding_prose(self):
        text = (
            "Let me reason about this.\n"
            "Answer: yes\n"
            "Corresponding Property: `created`\n"
            "Explanation: the filter bounds creation time\n"
        )
        got = llm.parse_structured_answer(text)
        assert got.verdict is True
        assert got.property == "created"

    def test_note_lines_are_not_verdicts(self):
        got = llm.parse_structured_answer("Note: nothing conclusive\nyes")
        assert got.verdict is True

    def test_yes_no_schema_ignores_property(self):
        got = llm.parse_structured_answer("no\ncorresponding property: x", "yes-no")
        assert got == llm.StructuredAnswer(False, None, None)


class TestRequestValidation:
    def test_temperature_bounds(self):
        with pytest.raises(ValueError):
            llm.LlmRequest("mapping", "p", "m", -0.1, 0.95)

    def test_top_p_bounds(self):
        with pytest.raises(ValueError):
            llm.LlmRequest("mapping", "p", "m", 0.0, 0.0)

    def test_token_counts_non_negative(self):
        with pytest.raises(ValueError):
            llm.LlmResponse("t", -1, 0, False)
