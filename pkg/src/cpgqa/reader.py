"""Candidate answer scoring: local lexical baseline and remote readers.

A scorer consumes a question plus passage payloads (passage id with
sentence ids and texts) and proposes one candidate per passage: the
sentence it believes best answers the question, with a confidence.
``rank_candidates`` owns ordering and truncation so every scorer,
local or remote, produces identically tie-broken rankings.

The remote protocol is a single POST to ``{endpoint}/score`` carrying
the question, the payloads and top_k; the reply lists candidates with
confidences.  Confidences outside [0, 1] are clamped with a warning
since that is a protocol wobble, not a failure.  Transport problems
and non-200 replies raise TransportError.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import httpx

from .corpus import GuidelineCorpus, Passage, Sentence, Tokenizer, default_tokenizer
from .errors import TransportError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SentencePayload:
    id: str
    text: str


@dataclass(frozen=True)
class PassagePayload:
    id: str
    sentences: tuple[SentencePayload, ...]


@dataclass(frozen=True)
class AnswerCandidate:
    passage_id: str
    sentence_id: str
    answer_text: str
    confidence: float
    scorer: str


def build_payloads(corpus: GuidelineCorpus, passages: Sequence[Passage]) -> list[PassagePayload]:
    return [
        PassagePayload(
            id=p.id,
            sentences=tuple(
                SentencePayload(id=sid, text=corpus.sentence(sid).text) for sid in p.sentence_ids
            ),
        )
        for p in passages
    ]


class Scorer(Protocol):
    name: str

    def score_passages(
        self, question: str, passages: Sequence[PassagePayload], top_k: int
    ) -> list[AnswerCandidate]: ...


# --- lexical baseline -----------------------------------------------------


def build_idf(sentences: Iterable[Sentence | SentencePayload], tokenizer: Tokenizer = default_tokenizer) -> dict[str, float]:
    """Smoothed inverse document frequency over sentence-level documents."""
    df: dict[str, int] = {}
    n = 0
    for sentence in sentences:
        n += 1
        for token in set(tokenizer(sentence.text)):
            df[token] = df.get(token, 0) + 1
    return {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}


def lexical_score(
    question_tokens: Sequence[str],
    sentence_tokens: Sequence[str],
    idf: dict[str, float],
    default_idf: float = 1.0,
) -> float:
    """IDF-weighted token overlap, normalized by the question's mass.

    Zero when nothing overlaps; exactly 1.0 when every question token
    appears in the sentence.
    """
    q = set(question_tokens)
    if not q:
        return 0.0
    s = set(sentence_tokens)
    weight = lambda t: idf.get(t, default_idf)
    total = sum(weight(t) for t in q)
    shared = sum(weight(t) for t in q & s)
    return shared / total if total > 0 else 0.0


class LexicalScorer:
    """Deterministic overlap scorer used as the local baseline."""

    name = "lexical"

    def __init__(self, corpus: GuidelineCorpus, tokenizer: Tokenizer = default_tokenizer):
        self._tokenizer = tokenizer
        self._idf = build_idf(corpus.sentences(), tokenizer)

    def score_passages(
        self, question: str, passages: Sequence[PassagePayload], top_k: int
    ) -> list[AnswerCandidate]:
        q_tokens = self._tokenizer(question)
        out = []
        for passage in passages:
            best: tuple[float, SentencePayload] | None = None
            for sentence in passage.sentences:
                score = lexical_score(q_tokens, self._tokenizer(sentence.text), self._idf)
                if best is None or score > best[0]:
                    best = (score, sentence)
            if best is not None:
                out.append(
                    AnswerCandidate(
                        passage_id=passage.id,
                        sentence_id=best[1].id,
                        answer_text=best[1].text,
                        confidence=best[0],
                        scorer=self.name,
                    )
                )
        return out


# --- remote scorer --------------------------------------------------------


def _clamp_confidence(value: float, endpoint: str) -> float:
    if value < 0.0 or value > 1.0:
        log.warning("scorer at %s returned confidence %s; clamping", endpoint, value)
        return min(1.0, max(0.0, value))
    return value


class RemoteScorer:
    """Client for the POST {endpoint}/score protocol.

    Large passage sets can be split into batches issued concurrently;
    in-flight requests are bounded by max_in_flight.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        batch_size: int | None = None,
        max_in_flight: int = 8,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.name = f"remote:{self.endpoint}"
        self._timeout = timeout
        self._batch_size = batch_size
        self._max_in_flight = max_in_flight

    def _post_batch(self, question: str, batch: Sequence[PassagePayload], top_k: int) -> list[AnswerCandidate]:
        body = {
            "question": question,
            "passages": [
                {"id": p.id, "sentences": [{"id": s.id, "text": s.text} for s in p.sentences]}
                for p in batch
            ],
            "top_k": top_k,
        }
        try:
            response = httpx.post(f"{self.endpoint}/score", json=body, timeout=self._timeout)
        except httpx.HTTPError as exc:
            raise TransportError(self.endpoint, str(exc)) from exc
        if response.status_code != 200:
            raise TransportError(self.endpoint, f"HTTP {response.status_code}")
        try:
            payload = response.json()
            raw = payload["candidates"]
            return [
                AnswerCandidate(
                    passage_id=c["passage_id"],
                    sentence_id=c["sentence_id"],
                    answer_text=c["answer_text"],
                    confidence=_clamp_confidence(float(c["confidence"]), self.endpoint),
                    scorer=self.name,
                )
                for c in raw
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(self.endpoint, f"malformed response: {exc}") from exc

    def score_passages(
        self, question: str, passages: Sequence[PassagePayload], top_k: int
    ) -> list[AnswerCandidate]:
        if self._batch_size is None or len(passages) <= self._batch_size:
            return self._post_batch(question, passages, top_k)
        batches = [
            passages[i : i + self._batch_size] for i in range(0, len(passages), self._batch_size)
        ]
        out: list[AnswerCandidate] = []
        with ThreadPoolExecutor(max_workers=self._max_in_flight) as pool:
            for result in pool.map(lambda b: self._post_batch(question, b, top_k), batches):
                out.extend(result)
        return out


# --- ranking --------------------------------------------------------------


def rank_candidates(
    scorer: Scorer,
    question: str,
    passages: Sequence[PassagePayload],
    k: int = 10,
) -> list[AnswerCandidate]:
    """Top-k candidates ordered by confidence, ties broken by ids."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not passages:
        raise ValueError("no passages to score")
    candidates = scorer.score_passages(question, passages, top_k=k)
    ordered = sorted(candidates, key=lambda c: (-c.confidence, c.passage_id, c.sentence_id))
    return ordered[:k]
