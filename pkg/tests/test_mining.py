import threading

import pytest

from oasguard import mining, specmodel
from oasguard.paths import PropertyPath
from oasguard.categories import OracleCategory
from oasguard.llm import Gateway, TranscriptCache
from oasguard.mining import Constraint, KnowledgeBase, Variable, categorize, make_constraint

from llm_stub import FailingProvider, ScriptedProvider


def _constraint(desc, source="RespProp", variables=None):
    return make_constraint(
        source,
        "GET /v1/charges",
        variables or [Variable("response", "prop")],
        desc,
    )


class TestCategorize:
    @pytest.mark.parametrize(
        "description,expected",
        [
            ("must be one of the two-letter province abbreviations: BC, ON, QC", OracleCategory.VALUE_IN_SET),
            ("an integer between 1 and 9", OracleCategory.VALUE_IN_RANGE),
            ("Measured in seconds since the Unix epoch.", OracleCategory.IS_UNIXTIME),
            ("ISO date-time at which the record was updated", OracleCategory.IS_DATETIME),
            ("ISO date: the literal date of the holiday", OracleCategory.IS_DATE),
            ("the time of day, as HH:MM:SS", OracleCategory.IS_TIME),
            ("a URL pointing at the avatar image", OracleCategory.IS_URL),
            ("Three lowercase letters.", OracleCategory.STRING_SPECIFIC_LENGTH),
            ("a list of strings naming the labels", OracleCategory.ARRAY_IS_STRING),
            ("true or false depending on visibility", OracleCategory.IS_BOOLEAN),
            ("matches the pattern ^\\d+\\smin$", OracleCategory.TEMPLATE_LITERALS),
            ("a positive integer can be up to eight digits", OracleCategory.VALUE_IN_RANGE),
            ("an integer count of items", OracleCategory.IS_NUMBER),
        ],
    )
    def test_keyword_rules(self, description, expected):
        assert categorize(_constraint(description)) is expected

    def test_empty_description_uncategorized(self):
        assert categorize(_constraint("")) is OracleCategory.UNCATEGORIZED

    def test_req_resp_maps_to_io(self):
        c = _constraint(
            "Only return charges for the customer specified",
            source="ReqResp",
            variables=[Variable("request", "customer"), Variable("response", "customer")],
        )
        assert categorize(c) is OracleCategory.IO

    def test_req_resp_composite(self):
        c = _constraint(
            "created_after must be before the created date-time and the value must be a datetime",
            source="ReqResp",
            variables=[Variable("request", "created_after"), Variable("response", "created_at")],
        )
        assert categorize(c) is OracleCategory.COMPOSITE

    def test_multi_variable_resp_prop_is_nary(self):
        c = _constraint(
            "sellingTotal equals total plus margins plus markup",
            variables=[Variable("response", "sellingTotal"), Variable("response", "total")],
        )
        assert categorize(c) is OracleCategory.NARY_ATOMIC


class TestConstraintInvariants:
    def test_req_resp_needs_both_sides(self):
        with pytest.raises(ValueError):
            Constraint("x", "ReqResp", "GET /a", (Variable("request", "p"),), "d")

    def test_resp_prop_rejects_request_variables(self):
        with pytest.raises(ValueError):
            Constraint(
                "x", "RespProp", "GET /a",
                (Variable("request", "p"), Variable("response", "q")), "d",
            )

    def test_stable_ids(self):
        a = _constraint("Some rule")
        b = _constraint("  some   RULE ")  # normalization: case and whitespace
        assert a.id == b.id


class TestKnowledgeBase:
    def test_write_once(self):
        kb = KnowledgeBase()
        key = KnowledgeBase.key("created", "desc")
        entry1, hit1 = kb.get_or_compute(key, lambda: mining.KbEntry(True, "first"))
        entry2, hit2 = kb.get_or_compute(key, lambda: mining.KbEntry(False, "second"))
        assert (hit1, hit2) == (False, True)
        assert entry2.constraint_description == "first"

    def test_key_depends_on_description(self):
        assert KnowledgeBase.key("due_date", "a date") != KnowledgeBase.key("due_date", "a filter")

    def test_single_flight_under_contention(self):
        kb = KnowledgeBase()
        key = KnowledgeBase.key("p", "d")
        calls = []
        gate = threading.Event()

        def compute():
            calls.append(1)
            gate.wait(timeout=5)
            return mining.KbEntry(True, "winner")

        results = []

        def worker():
            entry, _ = kb.get_or_compute(key, compute)
            results.append(entry.constraint_description)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        gate.set()
        for t in threads:
            t.join()
        assert len(calls) == 1
        assert results == ["winner"] * 8

    def test_round_trips_through_dict(self):
        kb = KnowledgeBase()
        kb.get_or_compute(KnowledgeBase.key("a", "b"), lambda: mining.KbEntry(True, "x", ("d1",)))
        back = KnowledgeBase.from_dict(kb.to_dict())
        entry, hit = back.get_or_compute(KnowledgeBase.key("a", "b"), lambda: 1 / 0)
        assert hit and entry.constraint_description == "x"


class TestRequestResponseMiner:
    def test_fig_fixture_pairs(self, charges_spec, replay_gateway, transcript_cache):
        op = charges_spec.operation("GET", "/v1/charges")
        got = mining.mine_request_response(charges_spec, op, replay_gateway, transcript_cache)
        pairs = {
            tuple(v.qualified() for v in c.variables): c.description for c in got
        }
        assert ("input.customer", "return.customer") in pairs
        assert pairs[("input.customer", "return.customer")].startswith(
            "Only return charges for the customer specified"
        )
        assert ("input.created[gt]", "return.created") in pairs
        assert ("input.created[lt]", "return.created") in pairs

    def test_parameter_without_description_skips_llm(self, tmp_path):
        doc = {
            "openapi": "3.0.0",
            "info": {"title": "t", "version": "1"},
            "paths": {"/a": {"get": {
                "parameters": [{"name": "raw", "in": "query", "schema": {"type": "string"}}],
                "responses": {"200": {"content": {"application/json": {"schema": {
                    "properties": {"id": {"type": "integer"}}}}}}},
            }}},
        }
        spec = specmodel.load_spec(doc)
        gateway = Gateway(ScriptedProvider(), mode="record")
        got = mining.mine_request_response(
            spec, spec.operations[0], gateway, TranscriptCache()
        )
        assert got == []
        assert gateway.stats()["provider_calls"] == 0  # no observation, no mapping

    def test_mapping_yes_but_confirmation_no_is_dropped(self, tmp_path):
        class VetoingProvider(ScriptedProvider):
            def _answer(self, req):
                if req.template_id == "mapping-confirmation":
                    return "no"
                return super()._answer(req)

        spec = specmodel.load_spec(FIXTURE_DOC)
        gateway = Gateway(VetoingProvider(), mode="record")
        got = mining.mine_request_response(
            spec, spec.operations[0], gateway, TranscriptCache()
        )
        assert got == []

    def test_provenance_contains_mapping_and_confirmation(self, charges_spec, replay_gateway, transcript_cache):
        op = charges_spec.operation("GET", "/v1/charges")
        got = mining.mine_request_response(charges_spec, op, replay_gateway, transcript_cache)
        for c in got:
            assert len(c.provenance) == 5  # schema+operation+parameter obs, mapping, confirmation


FIXTURE_DOC = {
    "openapi": "3.0.0",
    "info": {"title": "t", "version": "1"},
    "paths": {"/v1/charges": {"get": {
        "parameters": [{
            "name": "customer", "in": "query",
            "description": "Only return charges for the customer specified by this customer ID.",
            "schema": {"type": "string"},
        }],
        "responses": {"200": {"content": {"application/json": {"schema": {
            "properties": {"customer": {"type": "string", "description": "ID of the customer."}}
        }}}}},
    }}},
}


class TestResponsePropertyMiner:
    def test_confirmed_properties_become_constraints(self, charges_spec, replay_gateway, transcript_cache):
        op = charges_spec.operation("GET", "/v1/charges")
        kb = KnowledgeBase()
        got = mining.mine_response_properties(
            charges_spec, op, "200", kb, replay_gateway, transcript_cache
        )
        by_var = {c.variables[0].name: c for c in got}
        assert set(by_var) == {"amount", "created", "currency"}  # customer: confirmation says no
        assert by_var["created"].category == OracleCategory.IS_UNIXTIME.value
        assert by_var["currency"].category in (
            OracleCategory.STRING_SPECIFIC_LENGTH.value,
            OracleCategory.TEMPLATE_LITERALS.value,
        )

    def test_kb_short_circuits_repeated_property(self, fixtures_dir, replay_gateway, transcript_cache):
        spec = specmodel.load_spec(fixtures_dir / "kb_economy.yaml")
        kb = KnowledgeBase()
        stats = mining.MiningStats()
        total = []
        for op in spec.operations:
            total.extend(
                mining.mine_response_properties(
                    spec, op, "200", kb, replay_gateway, transcript_cache, stats=stats
                )
            )
        assert len(total) == 5  # one constraint per operation
        assert stats.kb_hits == 4
        assert replay_gateway.stats()["calls_by_template"] == {
            "property-observation": 1,
            "constraint-confirmation": 1,
        }

    def test_composed_description_order(self):
        prop = specmodel.PropertySpec(
            path=PropertyPath.parse("amount"),
            description="A positive integer.",
            declared_type="integer",
            format_hint="int64",
            example=99999999,
            has_example=True,
        )
        composed = mining.compose_property_description(prop)
        assert composed.splitlines() == [
            "A positive integer.",
            "type: integer",
            "format: int64",
            "example: 99999999",
        ]

    def test_property_without_any_description_skipped(self, replay_gateway):
        doc = {
            "openapi": "3.0.0",
            "info": {"title": "t", "version": "1"},
            "paths": {"/a": {"get": {"responses": {"200": {"content": {"application/json": {
                "schema": {"properties": {"opaque": {"type": "string"}}}}}}}}}},
        }
        spec = specmodel.load_spec(doc)
        stats = mining.MiningStats()
        got = mining.mine_response_properties(
            spec, spec.operations[0], "200", KnowledgeBase(), replay_gateway,
            TranscriptCache(), stats=stats,
        )
        assert got == []
        assert stats.skipped_missing_description == 1


class TestMineAll:
    def test_replay_matches_golden(self, charges_spec, replay_gateway, transcript_cache, golden_dir):
        constraints, _ = mining.mine_all(charges_spec, replay_gateway, transcript_cache)
        got = mining.constraints_to_json(constraints, "0.1.0")
        assert got == (golden_dir / "constraints.json").read_text()

    def test_spec_without_descriptions_is_free(self):
        doc = {
            "openapi": "3.0.0",
            "info": {"title": "t", "version": "1"},
            "paths": {"/a": {"get": {
                "parameters": [{"name": "q", "in": "query", "schema": {"type": "string"}}],
                "responses": {"200": {"content": {"application/json": {"schema": {
                    "properties": {"id": {"type": "integer"}, "name": {"type": "string"}}
                }}}}},
            }}},
        }
        spec = specmodel.load_spec(doc)
        gateway = Gateway(FailingProvider(), mode="replay")
        constraints, report = mining.mine_all(spec, gateway, TranscriptCache())
        assert constraints == []
        assert report["llm"]["calls_by_template"] == {}

    def test_replay_is_deterministic(self, charges_spec, transcript_cache):
        runs = []
        for _ in range(2):
            gateway = Gateway(FailingProvider(), mode="replay")
            constraints, _ = mining.mine_all(charges_spec, gateway, transcript_cache)
            runs.append(mining.constraints_to_json(constraints, "x"))
        assert runs[0] == runs[1]

    def test_merged_mode_uses_single_template(self, charges_spec, tmp_path):
        gateway = Gateway(ScriptedProvider(), mode="record")
        cache = TranscriptCache(tmp_path / "merged.jsonl")
        constraints, report = mining.mine_all(charges_spec, gateway, cache, mode="merged")
        assert report["llm"]["calls_by_template"].keys() == {"merged-observation-confirmation"}
        sources = {c.source for c in constraints}
        assert sources == {"ReqResp", "RespProp"}

    def test_variables_exist_in_spec(self, charges_spec, replay_gateway, transcript_cache):
        constraints, _ = mining.mine_all(charges_spec, replay_gateway, transcript_cache)
        op = charges_spec.operation("GET", "/v1/charges")
        param_names = {p.name for p in op.parameters}
        prop_paths = {p.path.render() for p in specmodel.flatten_response_schema(op, "200")}
        for c in constraints:
            for v in c.variables:
                assert v.name in (param_names if v.kind == "request" else prop_paths)

    def test_round_trip_json(self, charges_spec, replay_gateway, transcript_cache):
        constraints, _ = mining.mine_all(charges_spec, replay_gateway, transcript_cache)
        text = mining.constraints_to_json(constraints, "x")
        assert mining.constraints_from_json(text) == constraints
