"""HTTP surface: config loading, routes, caching, determinism."""

import json

import pytest
from fastapi.testclient import TestClient

from cpgqa.corpus import corpus_stats
from cpgqa.service import (
    ENV_PORT,
    ENV_SCORER,
    AppState,
    SeverityBands,
    compute_answer,
    create_app,
    load_config,
    load_state,
    serve,
)


@pytest.fixture(scope="module")
def config_path(fixtures_dir):
    return fixtures_dir / "service_config.json"


@pytest.fixture(scope="module")
def state(config_path):
    return load_state(config_path)


@pytest.fixture(scope="module")
def client(state):
    return TestClient(create_app(state=state))


class TestSeverityBands:
    @pytest.mark.parametrize(
        "score,band",
        [
            (0.0, "low"),
            (0.19, "low"),
            (0.2, "elevated"),
            (0.35, "elevated"),
            (0.5, "elevated"),
            (0.51, "high"),
            (0.81, "high"),
        ],
    )
    def test_boundaries_fall_in_the_middle_band(self, score, band):
        assert SeverityBands().band(score) == band


class TestConfig:
    def test_fixture_values(self, config_path):
        config = load_config(config_path)
        assert config.max_tokens == 48
        assert config.top_k == 10
        assert config.population.condition == "chronic kidney disease"
        assert config.population.medicare_rate == 0.25
        assert config.population.cci3_rate == 0.30
        assert config.severity == SeverityBands(low_max=0.2, high_min=0.5)
        assert config.scorer_endpoint is None

    def test_relative_paths_resolve_against_the_config_file(self, config_path, fixtures_dir):
        config = load_config(config_path)
        assert config.corpus == str(fixtures_dir / "corpus.json")
        assert config.graph == str(fixtures_dir / "graph.jsonl")

    def test_missing_keys_take_defaults(self, tmp_path):
        path = tmp_path / "minimal.json"
        path.write_text(json.dumps({"corpus": "c.json", "patients": "p.json", "ccs": "t.csv"}))
        config = load_config(path)
        assert config.annotations is None
        assert config.max_tokens == 512
        assert config.cache_size == 256
        assert config.severity == SeverityBands()

    def test_env_endpoint_overrides_file(self, config_path, monkeypatch):
        monkeypatch.setenv(ENV_SCORER, "http://scores.internal:9000")
        config = load_config(config_path)
        assert config.scorer_endpoint == "http://scores.internal:9000"


class TestPatientsRoute:
    def test_lists_all_twenty_sorted(self, client):
        body = client.get("/patients").json()
        assert len(body) == 20
        assert [p["id"] for p in body] == sorted(p["id"] for p in body)
        assert set(body[0]) == {"id", "age_group", "sex", "risk_score"}

    def test_riskless_patient_has_null_score(self, client):
        body = {p["id"]: p for p in client.get("/patients").json()}
        assert body["p020"]["risk_score"] is None
        assert body["p001"]["risk_score"] == 0.40


@pytest.fixture(scope="module")
def p001(client):
    response = client.get("/patients/p001/report")
    assert response.status_code == 200
    return response.json()


class TestReportRoute:
    def test_shape(self, p001):
        assert set(p001) == {"patient", "timeline", "risk", "features", "questions", "warnings"}
        assert p001["patient"]["id"] == "p001"

    def test_risk_band(self, p001):
        assert p001["risk"]["score"] == 0.40
        assert p001["risk"]["band"] == "elevated"

    def test_features_ordered_by_weight_magnitude(self, p001, state):
        weights = [abs(f["weight"]) for f in p001["features"]]
        assert weights == sorted(weights, reverse=True)
        by_code = {f["code"]: f for f in p001["features"] if f["code"]}
        assert by_code["I10"]["grouping"] == state.ccs.rollup("I10")

    def test_question_inventory(self, p001):
        ids = [q["id"] for q in p001["questions"]]
        assert ids[0] == "p001:t1" and ids[1] == "p001:t2"
        assert len(ids) == 9

    def test_timeline_months_aggregate(self, p001, state):
        months = [t["month"] for t in p001["timeline"]]
        assert months == sorted(months)
        total = sum(t["visits"] for t in p001["timeline"])
        assert total == len(state.patients["p001"].visits)
        for t in p001["timeline"]:
            assert t["codes"] == sorted(t["codes"])

    def test_band_boundaries_via_reports(self, client):
        # p008 scores exactly 0.20 and p017 exactly 0.50.
        for pid in ("p008", "p017"):
            assert client.get(f"/patients/{pid}/report").json()["risk"]["band"] == "elevated"
        assert client.get("/patients/p011/report").json()["risk"]["band"] == "low"
        assert client.get("/patients/p019/report").json()["risk"]["band"] == "high"

    def test_riskless_patient_report(self, client):
        body = client.get("/patients/p020/report").json()
        assert body["risk"] is None
        assert body["features"] == []

    def test_unknown_patient_404(self, client):
        response = client.get("/patients/p999/report")
        assert response.status_code == 404
        assert response.json() == {"reason": "unknown patient 'p999'"}


class TestAnswerRoute:
    def test_retrieval_answer_shape(self, client):
        response = client.post("/patients/p001/questions/p001:t3:i10/answer", json={})
        assert response.status_code == 200
        body = response.json()
        assert body["question_id"] == "p001:t3:i10"
        assert body["reason"] is None
        assert body["answers"]
        first = body["answers"][0]
        assert set(first) == {
            "text", "confidence", "source", "strategy", "sentence_id", "grade", "in_range",
        }
        assert first["source"] == "Guideline"
        assert first["strategy"] == "base"

    def test_summary_answer_has_no_ranking_fields(self, client):
        body = client.post("/patients/p001/questions/p001:t1/answer", json={}).json()
        assert len(body["answers"]) == 1
        answer = body["answers"][0]
        assert answer["confidence"] is None
        assert answer["sentence_id"] is None
        assert answer["source"] == "PatientData"
        assert "A1C" in answer["text"]

    def test_risk_summary_source(self, client):
        body = client.post("/patients/p001/questions/p001:t2/answer", json={}).json()
        assert body["answers"][0]["source"] == "RiskModel"

    def test_lab_answer_carries_range_verdict(self, client):
        body = client.post("/patients/p001/questions/p001:t5:a1c:gt/answer", json={}).json()
        texts = [a["text"] for a in body["answers"]]
        assert all(t.startswith('The guidelines state: "') for t in texts)
        flagged = [a for a in body["answers"] if a["in_range"] is not None]
        assert flagged, "at least one candidate should pair numerically"

    def test_grades_only_on_recommendation_sentences(self, client, state):
        body = client.post("/patients/p001/questions/p001:t3:i10/answer", json={}).json()
        for answer in body["answers"]:
            sid = answer["sentence_id"]
            expected = state.corpus.grade_of(sid)
            assert answer["grade"] == (expected.value if expected else None)

    def test_strategy_from_body(self, client):
        body = client.post(
            "/patients/p001/questions/p001:t3:i10/answer",
            json={"strategy": "overlap:overlap-first"},
        ).json()
        assert all(a["strategy"] == "overlap:overlap-first" for a in body["answers"])

    def test_unknown_question_404(self, client):
        response = client.post("/patients/p001/questions/p001:t9:zz/answer", json={})
        assert response.status_code == 404
        assert "p001:t9:zz" in response.json()["reason"]

    def test_unknown_patient_404(self, client):
        assert client.post("/patients/p999/questions/q/answer", json={}).status_code == 404

    def test_bad_strategy_400(self, client):
        response = client.post(
            "/patients/p001/questions/p001:t3:i10/answer", json={"strategy": "psychic"}
        )
        assert response.status_code == 400
        assert "psychic" in response.json()["reason"]

    def test_bad_scorer_400(self, client):
        response = client.post(
            "/patients/p001/questions/p001:t3:i10/answer", json={"scorer": "dice"}
        )
        assert response.status_code == 400

    def test_remote_scorer_without_endpoint_400(self, client):
        response = client.post(
            "/patients/p001/questions/p001:t3:i10/answer", json={"scorer": "remote"}
        )
        assert response.status_code == 400
        assert "endpoint" in response.json()["reason"]

    def test_non_object_body_400(self, client):
        response = client.post(
            "/patients/p001/questions/p001:t3:i10/answer", json=["strategy"]
        )
        assert response.status_code == 400
        assert response.json() == {"reason": "body must be a JSON object"}

    def test_absent_body_uses_defaults(self, client):
        response = client.post("/patients/p001/questions/p001:t3:i10/answer")
        assert response.status_code == 200
        assert response.json()["answers"][0]["strategy"] == "base"


class TestDeterminism:
    def test_repeat_requests_are_byte_identical(self, client):
        path = "/patients/p001/questions/p001:t3:i10/answer"
        first = client.post(path, json={"strategy": "semantic"})
        second = client.post(path, json={"strategy": "semantic"})
        assert first.content == second.content

    def test_fresh_state_reproduces_the_payload(self, state, config_path):
        other = load_state(config_path)
        for qid in ("p001:t3:i10", "p001:t4:glp-1-ra", "p001:t5:a1c:gt"):
            a = compute_answer(state, "p001", qid, "ontosort:hops-first")
            b = compute_answer(other, "p001", qid, "ontosort:hops-first")
            assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


class TestCache:
    def test_repeat_compute_returns_the_cached_object(self, state):
        a = compute_answer(state, "p013", "p013:t3:n18-3", "base")
        b = compute_answer(state, "p013", "p013:t3:n18-3", "base")
        assert a is b

    def test_distinct_strategies_cache_separately(self, state):
        a = compute_answer(state, "p013", "p013:t3:n18-3", "base")
        b = compute_answer(state, "p013", "p013:t3:n18-3", "semantic")
        assert a is not b

    def test_lru_evicts_oldest(self, state, monkeypatch):
        monkeypatch.setattr(state.config, "cache_size", 2)
        state.cache_put(("k1",), {"v": 1})
        state.cache_put(("k2",), {"v": 2})
        state.cache_get(("k1",))  # refresh k1; k2 becomes oldest
        state.cache_put(("k3",), {"v": 3})
        assert state.cache_get(("k1",)) == {"v": 1}
        assert state.cache_get(("k2",)) is None
        assert state.cache_get(("k3",)) == {"v": 3}


class TestStatsRoute:
    def test_matches_direct_computation(self, client, state):
        body = client.get("/corpus/stats").json()
        types = {
            a.semantic_type
            for anns in state.kb.annotations.by_sentence.values()
            for a in anns
        }
        assert body == corpus_stats(state.corpus, semantic_types=types).to_dict()
        assert body["sentence_count"] == 17

    def test_distinct_types_counted(self, client):
        assert client.get("/corpus/stats").json()["distinct_semantic_types"] > 0


class TestUnloadedApp:
    def test_every_route_503s(self):
        bare = TestClient(create_app())
        for call in (
            lambda c: c.get("/patients"),
            lambda c: c.get("/patients/p001/report"),
            lambda c: c.post("/patients/p001/questions/q/answer", json={}),
            lambda c: c.get("/corpus/stats"),
        ):
            response = call(bare)
            assert response.status_code == 503
            assert response.json() == {"reason": "store-not-loaded"}


class TestServe:
    def test_port_env_fallback(self, config_path, monkeypatch):
        import uvicorn

        captured = {}

        def fake_run(app, host, port):
            captured.update(host=host, port=port)

        monkeypatch.setattr(uvicorn, "run", fake_run)
        monkeypatch.setenv(ENV_PORT, "5555")
        serve(config_path)
        assert captured == {"host": "127.0.0.1", "port": 5555}

    def test_explicit_port_wins(self, config_path, monkeypatch):
        import uvicorn

        captured = {}
        monkeypatch.setattr(uvicorn, "run", lambda app, host, port: captured.update(port=port))
        monkeypatch.setenv(ENV_PORT, "5555")
        serve(config_path, port=7777)
        assert captured["port"] == 7777
