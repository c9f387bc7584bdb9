"""Knowledge-augmented retrieval strategies around the base reader.

Five families of behavior, all named by what they do:

- ``base``: reader ranking, untouched.
- ``overlap:<order>``: rank, then reorder the top k by question/answer
  concept overlap ("confidence-first" breaks overlap ties by keeping
  the reader's confidence order first; "overlap-first" leads with the
  overlap count).
- ``semantic``: before ranking, drop passages with no noun mention of
  an allowed-type concept matching the question's concepts.
- ``hops:<n>``: before ranking, keep passages whose concepts sit
  within n hops of a question concept in the ontology, or are a
  proper ancestor of one.
- ``ontosort:<order>``: rank, then reorder by ontology features
  (summed minimum hop distance, ancestor count, confidence).

Pre-filters rechunk the surviving sentences into fresh passages of
variable length before ranking, so the reader sees dense, on-topic
windows.  A question with no recognized concepts degrades every
pre-filter to a logged pass-through rather than an empty answer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .corpus import (
    GuidelineCorpus,
    Passage,
    Tokenizer,
    chunk_sentences,
    default_tokenizer,
)
from .errors import ContractError
from .ontology import (
    AnnotationSet,
    ConceptAnnotation,
    ConceptMapping,
    DISEASE_TYPES,
    LAB_TYPES,
    MEDICATION_TYPES,
    OntologyGraph,
    disease_annotations,
    disease_concepts,
)
from .questions import QuestionInstance, QuestionType
from .reader import AnswerCandidate, Scorer, build_payloads, rank_candidates

log = logging.getLogger(__name__)

# Hop thresholds worth sweeping; mid-range cutoffs filter best.
HOPS_GRID = (3, 5, 6, 8)


class StrategyKind(str, Enum):
    BASE = "base"
    POST_OVERLAP = "overlap"
    PRE_SEMANTIC = "semantic"
    PRE_ONTOLOGY = "hops"
    POST_ONTOLOGY = "ontosort"


class SortOrder(str, Enum):
    CONFIDENCE_FIRST = "confidence-first"
    OVERLAP_FIRST = "overlap-first"
    HOPS_FIRST = "hops-first"
    ANCESTORS_FIRST = "ancestors-first"


_OVERLAP_ORDERS = (SortOrder.CONFIDENCE_FIRST, SortOrder.OVERLAP_FIRST)
_ONTO_ORDERS = (SortOrder.HOPS_FIRST, SortOrder.ANCESTORS_FIRST, SortOrder.CONFIDENCE_FIRST)


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    order: SortOrder | None = None
    max_hops: int | None = None
    allowed_types: frozenset[str] | None = None  # None = resolve from qtype
    top_k: int = 10

    def label(self) -> str:
        if self.kind == StrategyKind.POST_OVERLAP:
            return f"overlap:{self.order.value}"
        if self.kind == StrategyKind.PRE_ONTOLOGY:
            return f"hops:{self.max_hops}"
        if self.kind == StrategyKind.POST_ONTOLOGY:
            return f"ontosort:{self.order.value}"
        return self.kind.value


def parse_strategy(text: str) -> StrategyConfig:
    """Parse a strategy label like "base", "hops:5" or "overlap:overlap-first"."""
    head, _, arg = text.strip().lower().partition(":")
    if head == "base" and not arg:
        return StrategyConfig(kind=StrategyKind.BASE)
    if head == "semantic" and not arg:
        return StrategyConfig(kind=StrategyKind.PRE_SEMANTIC)
    if head == "overlap":
        order = SortOrder(arg) if arg else SortOrder.CONFIDENCE_FIRST
        if order not in _OVERLAP_ORDERS:
            raise ValueError(f"overlap order must be one of {[o.value for o in _OVERLAP_ORDERS]}")
        return StrategyConfig(kind=StrategyKind.POST_OVERLAP, order=order)
    if head == "hops":
        try:
            max_hops = int(arg)
        except ValueError:
            raise ValueError(f"hops strategy needs an integer threshold, got {arg!r}") from None
        if max_hops < 1:
            raise ValueError("hops threshold must be >= 1")
        return StrategyConfig(kind=StrategyKind.PRE_ONTOLOGY, max_hops=max_hops)
    if head == "ontosort":
        order = SortOrder(arg) if arg else SortOrder.HOPS_FIRST
        if order not in _ONTO_ORDERS:
            raise ValueError(f"ontosort order must be one of {[o.value for o in _ONTO_ORDERS]}")
        return StrategyConfig(kind=StrategyKind.POST_ONTOLOGY, order=order)
    raise ValueError(f"unknown strategy {text!r}")


def allowed_types_for(qtype: QuestionType) -> frozenset[str]:
    if qtype == QuestionType.MEDICATION:
        return MEDICATION_TYPES
    if qtype == QuestionType.LAB_VALUE:
        return DISEASE_TYPES | LAB_TYPES
    return DISEASE_TYPES


# --- concept features -----------------------------------------------------


def disease_overlap(
    q_annotations: Iterable[ConceptAnnotation],
    s_annotations: Iterable[ConceptAnnotation],
    allowed_types: frozenset[str] = DISEASE_TYPES,
) -> int:
    """Distinct concept CUIs shared by question and sentence."""
    q = {a.cui for a in disease_annotations(q_annotations, allowed_types)}
    s = {a.cui for a in disease_annotations(s_annotations, allowed_types)}
    return len(q & s)


def concept_codes(
    annotations: Iterable[ConceptAnnotation],
    mapping: ConceptMapping,
    allowed_types: frozenset[str],
) -> frozenset[str]:
    codes: set[str] = set()
    for cui_codes in disease_concepts(annotations, mapping, allowed_types).values():
        codes.update(cui_codes)
    return frozenset(codes)


def hop_sum(
    question_codes: frozenset[str],
    answer_codes: frozenset[str],
    graph: OntologyGraph,
) -> int | None:
    """Sum over question codes of the nearest answer code's hop distance.

    Question codes with no reachable answer code contribute nothing;
    when none is reachable at all the sum is undefined (None), which
    sorts after every defined value.
    """
    if not question_codes or not answer_codes:
        return None
    total = 0
    defined = False
    for qc in sorted(question_codes):
        hops = [
            d for ac in answer_codes if (d := graph.hop_distance(qc, ac)) is not None
        ]
        if hops:
            total += min(hops)
            defined = True
    return total if defined else None


def ancestor_count(
    question_codes: frozenset[str],
    answer_codes: frozenset[str],
    graph: OntologyGraph,
) -> int:
    """Answer codes that are proper isa-ancestors of some question code."""
    return sum(
        1
        for ac in sorted(answer_codes)
        if any(graph.is_ancestor(ac, qc) for qc in question_codes)
    )


# --- pre-filters ----------------------------------------------------------


@dataclass(frozen=True)
class FilterResult:
    passages: tuple[Passage, ...]
    passthrough: bool = False
    warning: str | None = None


def prefilter_semantic(
    question: QuestionInstance,
    passages: Sequence[Passage],
    annotations: AnnotationSet,
    allowed_types: frozenset[str] | None = None,
    match_on: str = "cui",
) -> FilterResult:
    """Keep passages sharing a recognized concept with the question.

    match_on "cui" requires the same concept; "type" only requires a
    concept of the same semantic type.  Both require noun mentions of
    an allowed type on each side.
    """
    if match_on not in ("cui", "type"):
        raise ValueError(f"match_on must be 'cui' or 'type', got {match_on!r}")
    allowed = allowed_types if allowed_types is not None else allowed_types_for(question.qtype)
    q_anns = disease_annotations(annotations.for_question(question.id), allowed)
    if not q_anns:
        warning = f"question {question.id}: no recognized concepts; semantic filter passing all"
        log.warning(warning)
        return FilterResult(passages=tuple(passages), passthrough=True, warning=warning)
    q_cuis = {a.cui for a in q_anns}
    q_types = {a.semantic_type for a in q_anns}

    def sentence_hits(sid: str) -> bool:
        for ann in disease_annotations(annotations.for_sentence(sid), allowed):
            if match_on == "cui" and ann.cui in q_cuis:
                return True
            if match_on == "type" and ann.semantic_type in q_types:
                return True
        return False

    kept = tuple(p for p in passages if any(sentence_hits(sid) for sid in p.sentence_ids))
    return FilterResult(passages=kept)


def prefilter_ontology(
    question: QuestionInstance,
    passages: Sequence[Passage],
    annotations: AnnotationSet,
    graph: OntologyGraph,
    mapping: ConceptMapping,
    max_hops: int,
    allowed_types: frozenset[str] | None = None,
) -> FilterResult:
    """Keep passages whose concepts sit near the question's in the ontology.

    Near means within max_hops undirected hops of any question code,
    or a proper ancestor of one.
    """
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    allowed = allowed_types if allowed_types is not None else allowed_types_for(question.qtype)
    q_codes = concept_codes(annotations.for_question(question.id), mapping, allowed)
    if not q_codes:
        warning = f"question {question.id}: no mapped ontology codes; hop filter passing all"
        log.warning(warning)
        return FilterResult(passages=tuple(passages), passthrough=True, warning=warning)

    def code_near(code: str) -> bool:
        for qc in q_codes:
            d = graph.hop_distance(code, qc)
            if d is not None and d <= max_hops:
                return True
            if graph.is_ancestor(code, qc):
                return True
        return False

    def sentence_hits(sid: str) -> bool:
        codes = concept_codes(annotations.for_sentence(sid), mapping, allowed)
        return any(code_near(c) for c in codes)

    kept = tuple(p for p in passages if any(sentence_hits(sid) for sid in p.sentence_ids))
    return FilterResult(passages=kept)


# --- post-sorts -----------------------------------------------------------


@dataclass(frozen=True)
class AugmentedCandidate:
    candidate: AnswerCandidate
    strategy: str
    overlap_count: int | None = None
    hop_sum: int | None = None
    ancestor_count: int | None = None


def _overlap_key(order: SortOrder):
    def key(a: AugmentedCandidate):
        tie = (a.candidate.passage_id, a.candidate.sentence_id)
        if order == SortOrder.OVERLAP_FIRST:
            return (-(a.overlap_count or 0), -a.candidate.confidence) + tie
        return (-a.candidate.confidence, -(a.overlap_count or 0)) + tie

    return key


def _onto_key(order: SortOrder):
    def key(a: AugmentedCandidate):
        # Missing hop sums rank after every defined one.
        hops = (a.hop_sum is None, a.hop_sum if a.hop_sum is not None else 0)
        anc = -(a.ancestor_count or 0)
        conf = -a.candidate.confidence
        tie = (a.candidate.passage_id, a.candidate.sentence_id)
        if order == SortOrder.HOPS_FIRST:
            return hops + (anc, conf) + tie
        if order == SortOrder.ANCESTORS_FIRST:
            return (anc,) + hops + (conf,) + tie
        return (conf, anc) + hops + tie

    return key


def postsort(
    candidates: Sequence[AugmentedCandidate],
    kind: StrategyKind,
    order: SortOrder,
) -> list[AugmentedCandidate]:
    """Deterministic reorder of ranked candidates by strategy features."""
    if kind == StrategyKind.POST_OVERLAP:
        if order not in _OVERLAP_ORDERS:
            raise ValueError(f"bad overlap order {order!r}")
        return sorted(candidates, key=_overlap_key(order))
    if kind == StrategyKind.POST_ONTOLOGY:
        if order not in _ONTO_ORDERS:
            raise ValueError(f"bad ontosort order {order!r}")
        return sorted(candidates, key=_onto_key(order))
    raise ValueError(f"postsort does not apply to {kind!r}")


# --- end-to-end answering -------------------------------------------------


@dataclass(frozen=True)
class KnowledgeBase:
    """Everything answer_question needs besides the scorer."""

    corpus: GuidelineCorpus
    annotations: AnnotationSet
    graph: OntologyGraph
    mapping: ConceptMapping


@dataclass(frozen=True)
class AnswerOutcome:
    candidates: tuple[AugmentedCandidate, ...]
    reason: str | None = None  # "filtered-all" | "no-answer" when empty
    warnings: tuple[str, ...] = ()


_RETRIEVAL_TYPES = (
    QuestionType.FEATURE_IMPORTANCE,
    QuestionType.MEDICATION,
    QuestionType.LAB_VALUE,
)


def answer_question(
    question: QuestionInstance,
    strategy: StrategyConfig,
    scorer: Scorer,
    kb: KnowledgeBase,
    passages: Sequence[Passage],
    k: int | None = None,
    max_tokens: int = 512,
    tokenizer: Tokenizer = default_tokenizer,
) -> AnswerOutcome:
    """Run one retrieval question through a strategy and scorer."""
    if question.qtype not in _RETRIEVAL_TYPES:
        raise ContractError(
            f"retrieval covers types 3-5, got type {int(question.qtype)}; "
            "use answer_summary for types 1-2"
        )
    k = k if k is not None else strategy.top_k
    warnings: list[str] = []
    if not passages:
        return AnswerOutcome(candidates=(), reason="no-answer")

    working: Sequence[Passage] = passages
    if strategy.kind in (StrategyKind.PRE_SEMANTIC, StrategyKind.PRE_ONTOLOGY):
        if strategy.kind == StrategyKind.PRE_SEMANTIC:
            result = prefilter_semantic(question, passages, kb.annotations, strategy.allowed_types)
        else:
            result = prefilter_ontology(
                question,
                passages,
                kb.annotations,
                kb.graph,
                kb.mapping,
                strategy.max_hops,
                strategy.allowed_types,
            )
        if result.warning:
            warnings.append(result.warning)
        if not result.passages:
            return AnswerOutcome(candidates=(), reason="filtered-all", warnings=tuple(warnings))
        if not result.passthrough:
            survivors = [
                kb.corpus.sentence(sid) for p in result.passages for sid in p.sentence_ids
            ]
            working = chunk_sentences(survivors, tokenizer, max_tokens, id_prefix="f")
        else:
            working = result.passages

    payloads = build_payloads(kb.corpus, working)
    ranked = rank_candidates(scorer, question.text, payloads, k)
    if not ranked:
        return AnswerOutcome(candidates=(), reason="no-answer", warnings=tuple(warnings))

    label = strategy.label()
    allowed = (
        strategy.allowed_types
        if strategy.allowed_types is not None
        else allowed_types_for(question.qtype)
    )
    q_anns = kb.annotations.for_question(question.id)
    augmented: list[AugmentedCandidate] = []
    if strategy.kind == StrategyKind.POST_OVERLAP:
        for c in ranked:
            augmented.append(
                AugmentedCandidate(
                    candidate=c,
                    strategy=label,
                    overlap_count=disease_overlap(
                        q_anns, kb.annotations.for_sentence(c.sentence_id), allowed
                    ),
                )
            )
        augmented = postsort(augmented, strategy.kind, strategy.order)
    elif strategy.kind == StrategyKind.POST_ONTOLOGY:
        q_codes = concept_codes(q_anns, kb.mapping, allowed)
        for c in ranked:
            s_codes = concept_codes(
                kb.annotations.for_sentence(c.sentence_id), kb.mapping, allowed
            )
            augmented.append(
                AugmentedCandidate(
                    candidate=c,
                    strategy=label,
                    hop_sum=hop_sum(q_codes, s_codes, kb.graph),
                    ancestor_count=ancestor_count(q_codes, s_codes, kb.graph),
                )
            )
        augmented = postsort(augmented, strategy.kind, strategy.order)
    else:
        augmented = [AugmentedCandidate(candidate=c, strategy=label) for c in ranked]

    return AnswerOutcome(candidates=tuple(augmented), warnings=tuple(warnings))
