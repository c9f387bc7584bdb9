"""HTTP API assembling per-patient reports and on-demand answers.

The server loads every store once at startup (corpus, knowledge,
patients, CCS table, templates) and treats them as immutable shared
state.  Answers are computed on request so a dashboard can switch
strategy or scorer live; a small synchronized LRU keyed by (patient,
question, strategy, scorer) bounds repeat-question latency and makes
repeated calls byte-identical.

The CLI ``ask`` verb calls the same ``compute_answer`` entry point the
HTTP route does, so both interfaces produce equal JSON for equal
inputs.
"""

from __future__ import annotations

import json
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .augment import KnowledgeBase, StrategyKind, answer_question, parse_strategy
from .corpus import (
    GuidelineCorpus,
    Passage,
    chunk_passages,
    corpus_stats,
    load_corpus,
)
from .errors import ContractError, TransportError
from .numeric import predict_in_range, verdict_answer
from .ontology import AnnotationSet, ConceptMapping, OntologyGraph, load_knowledge
from .patients import CcsTable, PatientRecord, load_ccs, load_patients
from .questions import (
    DEFAULT_TEMPLATES,
    PopulationStats,
    QuestionInstance,
    QuestionSet,
    QuestionType,
    answer_summary,
    generate_questions,
    load_templates,
)
from .reader import LexicalScorer, RemoteScorer, Scorer

ENV_PORT = "CPGQA_PORT"
ENV_SCORER = "CPGQA_SCORER_ENDPOINT"


@dataclass(frozen=True)
class SeverityBands:
    """Risk-score bands; boundaries land in the middle band."""

    low_max: float = 0.2
    high_min: float = 0.5

    def band(self, score: float) -> str:
        if score < self.low_max:
            return "low"
        if score > self.high_min:
            return "high"
        return "elevated"


@dataclass
class ServiceConfig:
    corpus: str
    patients: str
    ccs: str
    annotations: str | None = None
    graph: str | None = None
    mapping: str | None = None
    templates: str | None = None
    population: PopulationStats = field(
        default_factory=lambda: PopulationStats(
            condition="chronic kidney disease", medicare_rate=0.25, cci3_rate=0.30
        )
    )
    scorer_endpoint: str | None = None
    severity: SeverityBands = field(default_factory=SeverityBands)
    max_tokens: int = 512
    top_k: int = 10
    cache_size: int = 256


def load_config(path: str | Path) -> ServiceConfig:
    """Read the service config; relative paths resolve against the file."""
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent

    def resolve(key: str) -> str | None:
        value = raw.get(key)
        return str(base / value) if value else None

    pop = raw.get("population", {})
    bands = raw.get("severity_bands", {})
    return ServiceConfig(
        corpus=resolve("corpus"),
        patients=resolve("patients"),
        ccs=resolve("ccs"),
        annotations=resolve("annotations"),
        graph=resolve("graph"),
        mapping=resolve("mapping"),
        templates=resolve("templates"),
        population=PopulationStats(
            condition=pop.get("condition", "chronic kidney disease"),
            medicare_rate=float(pop.get("medicare_rate", 0.25)),
            cci3_rate=float(pop.get("cci3_rate", 0.30)),
        ),
        scorer_endpoint=os.environ.get(ENV_SCORER) or raw.get("scorer_endpoint"),
        severity=SeverityBands(
            low_max=float(bands.get("low_max", 0.2)),
            high_min=float(bands.get("high_min", 0.5)),
        ),
        max_tokens=int(raw.get("max_tokens", 512)),
        top_k=int(raw.get("top_k", 10)),
        cache_size=int(raw.get("cache_size", 256)),
    )


class AppState:
    """Immutable stores plus the one synchronized cache."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.corpus: GuidelineCorpus = load_corpus(config.corpus)
        self.passages: list[Passage] = chunk_passages(self.corpus, max_tokens=config.max_tokens)
        if config.annotations and config.graph and config.mapping:
            annotations, graph, mapping = load_knowledge(
                config.annotations, config.graph, config.mapping
            )
        else:
            annotations = AnnotationSet(())
            graph = OntologyGraph(())
            mapping = ConceptMapping(codes={})
        self.kb = KnowledgeBase(
            corpus=self.corpus, annotations=annotations, graph=graph, mapping=mapping
        )
        self.has_annotations = config.annotations is not None
        self.patients: dict[str, PatientRecord] = {
            p.id: p for p in load_patients(config.patients)
        }
        self.ccs: CcsTable = load_ccs(config.ccs)
        self.templates = (
            load_templates(config.templates) if config.templates else DEFAULT_TEMPLATES
        )
        self.population = config.population
        self.lexical_scorer = LexicalScorer(self.corpus)
        self.question_sets: dict[str, QuestionSet] = {
            pid: generate_questions(p, self.ccs, self.templates)
            for pid, p in sorted(self.patients.items())
        }
        self._cache: OrderedDict[tuple, dict] = OrderedDict()
        self._cache_lock = threading.Lock()

    def question(self, patient_id: str, question_id: str) -> QuestionInstance:
        for q in self.question_sets[patient_id].questions:
            if q.id == question_id:
                return q
        raise KeyError(question_id)

    def cache_get(self, key: tuple) -> dict | None:
        with self._cache_lock:
            value = self._cache.get(key)
            if value is not None:
                self._cache.move_to_end(key)
            return value

    def cache_put(self, key: tuple, value: dict) -> None:
        with self._cache_lock:
            self._cache[key] = value
            self._cache.move_to_end(key)
            while len(self._cache) > self.config.cache_size:
                self._cache.popitem(last=False)


def load_state(config_path: str | Path) -> AppState:
    return AppState(load_config(config_path))


# --- report assembly ------------------------------------------------------


def patient_listing(state: AppState) -> list[dict]:
    return [
        {
            "id": p.id,
            "age_group": p.age_group.value,
            "sex": p.sex.value,
            "risk_score": p.risk.score if p.risk else None,
        }
        for p in sorted(state.patients.values(), key=lambda p: p.id)
    ]


def _timeline(patient: PatientRecord) -> list[dict]:
    months: dict[str, dict] = {}
    for visit in patient.visits:
        month = visit.date.strftime("%Y-%m")
        entry = months.setdefault(month, {"month": month, "visits": 0, "codes": set()})
        entry["visits"] += 1
        entry["codes"].update(visit.codes)
    return [
        {"month": m, "visits": months[m]["visits"], "codes": sorted(months[m]["codes"])}
        for m in sorted(months)
    ]


def patient_report(state: AppState, patient_id: str) -> dict:
    patient = state.patients[patient_id]
    risk = None
    features: list[dict] = []
    if patient.risk is not None:
        risk = {
            "condition": patient.risk.condition,
            "score": patient.risk.score,
            "band": state.config.severity.band(patient.risk.score),
        }
        features = [
            {
                "name": f.name,
                "code": f.code,
                "weight": f.weight,
                "kind": f.kind,
                "grouping": state.ccs.rollup(f.code) if f.code else None,
            }
            for f in sorted(
                patient.risk.features, key=lambda f: (-abs(f.weight), f.name)
            )
        ]
    question_set = state.question_sets[patient_id]
    return {
        "patient": {
            "id": patient.id,
            "age_group": patient.age_group.value,
            "sex": patient.sex.value,
        },
        "timeline": _timeline(patient),
        "risk": risk,
        "features": features,
        "questions": [q.to_dict() for q in question_set.questions],
        "warnings": list(question_set.warnings),
    }


# --- answers --------------------------------------------------------------


def _build_scorer(state: AppState, scorer_text: str) -> Scorer:
    if scorer_text == "lexical":
        return state.lexical_scorer
    if scorer_text == "remote":
        if not state.config.scorer_endpoint:
            raise ValueError("no remote scorer endpoint configured")
        return RemoteScorer(state.config.scorer_endpoint)
    if scorer_text.startswith("remote:"):
        return RemoteScorer(scorer_text.split(":", 1)[1])
    raise ValueError(f"unknown scorer {scorer_text!r}; use 'lexical', 'remote' or 'remote:<url>'")


def compute_answer(
    state: AppState,
    patient_id: str,
    question_id: str,
    strategy_text: str = "base",
    scorer_text: str = "lexical",
) -> dict:
    """One answer payload; the HTTP route and the CLI both land here.

    Raises KeyError for unknown ids, ValueError for bad strategy or
    scorer strings, TransportError when a remote scorer fails.
    """
    patient = state.patients[patient_id]  # KeyError -> 404 upstream
    question = state.question(patient_id, question_id)
    strategy = parse_strategy(strategy_text)
    cache_key = (patient_id, question_id, strategy.label(), scorer_text)
    cached = state.cache_get(cache_key)
    if cached is not None:
        return cached

    if question.qtype in (QuestionType.T2DM_SUMMARY, QuestionType.RISK_SUMMARY):
        summary = answer_summary(question, patient, state.population, state.ccs)
        payload = {
            "question_id": question_id,
            "answers": [
                {
                    "text": summary.text,
                    "confidence": None,
                    "source": summary.source.value,
                    "strategy": None,
                    "sentence_id": None,
                    "grade": None,
                    "in_range": None,
                }
            ],
            "reason": None,
        }
        state.cache_put(cache_key, payload)
        return payload

    scorer = _build_scorer(state, scorer_text)
    outcome = answer_question(
        question,
        strategy,
        scorer,
        state.kb,
        state.passages,
        k=state.config.top_k,
        max_tokens=state.config.max_tokens,
    )
    answers = []
    for aug in outcome.candidates:
        candidate = aug.candidate
        grade = state.corpus.grade_of(candidate.sentence_id)
        in_range = None
        text = candidate.answer_text
        if question.qtype == QuestionType.LAB_VALUE:
            in_range, verdict = predict_in_range(question.text, candidate.answer_text)
            if not verdict.matched_pairs:
                in_range = None
            text = verdict_answer(verdict, candidate).text
        answers.append(
            {
                "text": text,
                "confidence": candidate.confidence,
                "source": "Guideline",
                "strategy": aug.strategy,
                "sentence_id": candidate.sentence_id,
                "grade": grade.value if grade else None,
                "in_range": in_range,
            }
        )
    payload = {"question_id": question_id, "answers": answers, "reason": outcome.reason}
    state.cache_put(cache_key, payload)
    return payload


def coverage_payload(state: AppState) -> dict:
    types = None
    if state.has_annotations:
        types = {
            a.semantic_type
            for anns in state.kb.annotations.by_sentence.values()
            for a in anns
        }
    stats = corpus_stats(state.corpus, semantic_types=types)
    return stats.to_dict()


# --- HTTP app -------------------------------------------------------------


def create_app(config_path: str | Path | None = None, state: AppState | None = None) -> FastAPI:
    """App factory; without a config the API reports 503 on every route."""
    app = FastAPI(title="guideline-qa")
    if state is None and config_path is not None:
        state = load_state(config_path)
    app.state.store = state

    def _unavailable() -> JSONResponse:
        return JSONResponse({"reason": "store-not-loaded"}, status_code=503)

    @app.get("/patients")
    def patients() -> Any:
        if app.state.store is None:
            return _unavailable()
        return patient_listing(app.state.store)

    @app.get("/patients/{patient_id}/report")
    def report(patient_id: str) -> Any:
        if app.state.store is None:
            return _unavailable()
        try:
            return patient_report(app.state.store, patient_id)
        except KeyError:
            return JSONResponse({"reason": f"unknown patient {patient_id!r}"}, status_code=404)

    @app.post("/patients/{patient_id}/questions/{question_id}/answer")
    async def answer(patient_id: str, question_id: str, request: Request) -> Any:
        if app.state.store is None:
            return _unavailable()
        try:
            body = await request.json()
        except Exception:
            body = {}
        if not isinstance(body, dict):
            return JSONResponse({"reason": "body must be a JSON object"}, status_code=400)
        strategy_text = body.get("strategy", "base")
        scorer_text = body.get("scorer", "lexical")
        try:
            payload = compute_answer(
                app.state.store, patient_id, question_id, strategy_text, scorer_text
            )
        except KeyError as exc:
            return JSONResponse({"reason": f"unknown id {exc.args[0]!r}"}, status_code=404)
        except (ValueError, ContractError) as exc:
            return JSONResponse({"reason": str(exc)}, status_code=400)
        except TransportError as exc:
            return JSONResponse({"reason": str(exc)}, status_code=502)
        return payload

    @app.get("/corpus/stats")
    def stats() -> Any:
        if app.state.store is None:
            return _unavailable()
        return coverage_payload(app.state.store)

    return app


def serve(config_path: str | Path, host: str = "127.0.0.1", port: int | None = None) -> None:
    import uvicorn

    if port is None:
        port = int(os.environ.get(ENV_PORT, "8000"))
    uvicorn.run(create_app(config_path), host=host, port=port)
