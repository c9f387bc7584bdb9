"""Concept annotations, the medical ontology graph, and code mappings.

Three line-oriented JSON inputs feed this module: concept annotations
over corpus sentences and generated questions, an ontology edge list,
and a concept-to-code mapping.  All three are produced offline by an
annotation pipeline; here they are validated, indexed and queried.

Graph queries come in two flavors with deliberately different views of
the same edge list.  ``hop_distance`` treats every edge as undirected
and unit-weight (shortest path, so Dijkstra degenerates to BFS), while
``is_ancestor`` walks only the directed isa edges and requires a path
of length >= 1, so a concept is never its own ancestor.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import LoadError

# --- semantic type inventory ----------------------------------------------

# Closed list of recognized semantic type codes.  Annotations carrying
# anything else are rejected at load time.
SEMANTIC_TYPES: frozenset[str] = frozenset(
    """
    aapp acab acty aggp amas amph anab anim anst antb arch bacs bact bdsu
    bdsy bhvr biof bird blor bmod bodm bpoc bsoj celc celf cell cgab chem
    chvf chvs clas clna clnd cnce comd crbs diap dora drdd dsyn edac elii
    emod emst enty enzy euka evnt famg ffas fish fndg fngs food ftcn genf
    geoa gngm gora grpa grup hcpp hcro hlca hops horm humn idcn imft inbe
    inch inpo inpr irda lang lbpr lbtr mamm mbrt mcha medd menp mnob mobd
    moft mosq neop nnon npop nusq ocac ocdi orch orga orgf orgm orgt ortf
    patf phob phpr phsf phsu plnt podg popg prog pros qlco qnco rcpt rept
    resa resd rnlw sbst shro socb sosy spco tisu tmco topp virs vita vtbt
    """.split()
)

# Defaults for the two concept families the filters care about.
DISEASE_TYPES: frozenset[str] = frozenset({"dsyn", "fndg", "bpoc"})
MEDICATION_TYPES: frozenset[str] = frozenset({"phsu"})
LAB_TYPES: frozenset[str] = frozenset({"lbpr", "lbtr"})


# --- annotations ----------------------------------------------------------


@dataclass(frozen=True)
class ConceptAnnotation:
    """A concept mention inside one sentence or one question."""

    cui: str
    surface: str
    start: int
    end: int
    semantic_type: str
    is_noun: bool
    sentence_id: str | None = None
    question_id: str | None = None


class AnnotationSet:
    """Annotations indexed by owning sentence and question."""

    def __init__(self, annotations: Iterable[ConceptAnnotation]):
        self.by_sentence: dict[str, tuple[ConceptAnnotation, ...]] = {}
        self.by_question: dict[str, tuple[ConceptAnnotation, ...]] = {}
        sent: dict[str, list[ConceptAnnotation]] = {}
        ques: dict[str, list[ConceptAnnotation]] = {}
        for ann in annotations:
            if ann.sentence_id is not None:
                sent.setdefault(ann.sentence_id, []).append(ann)
            if ann.question_id is not None:
                ques.setdefault(ann.question_id, []).append(ann)
        self.by_sentence = {k: tuple(v) for k, v in sent.items()}
        self.by_question = {k: tuple(v) for k, v in ques.items()}

    def for_sentence(self, sentence_id: str) -> tuple[ConceptAnnotation, ...]:
        return self.by_sentence.get(sentence_id, ())

    def for_question(self, question_id: str) -> tuple[ConceptAnnotation, ...]:
        return self.by_question.get(question_id, ())

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_sentence.values()) + sum(
            len(v) for v in self.by_question.values()
        )


# --- ontology graph -------------------------------------------------------


class OntologyGraph:
    """Undirected hop queries plus directed isa ancestry over one edge list."""

    def __init__(self, edges: Iterable[tuple[str, str, bool]]):
        adj: dict[str, set[str]] = {}
        parents: dict[str, set[str]] = {}
        for a, b, isa in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
            if isa:
                if a in parents.get(b, set()):
                    raise ValueError(f"isa 2-cycle between {a!r} and {b!r}")
                parents.setdefault(a, set()).add(b)
        self._adj = {k: tuple(sorted(v)) for k, v in adj.items()}
        self._parents = {k: frozenset(v) for k, v in parents.items()}
        self._dist_cache: dict[str, dict[str, int]] = {}

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self._adj)

    def neighbors(self, node: str) -> tuple[str, ...]:
        return self._adj.get(node, ())

    def parents(self, node: str) -> frozenset[str]:
        return self._parents.get(node, frozenset())

    def _distances_from(self, source: str) -> dict[str, int]:
        # Unit weights make Dijkstra collapse to BFS; memoized per source
        # because strategy scoring asks many pairs from few sources.
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            for nxt in self._adj.get(node, ()):
                if nxt not in dist:
                    dist[nxt] = dist[node] + 1
                    queue.append(nxt)
        self._dist_cache[source] = dist
        return dist

    def hop_distance(self, a: str, b: str) -> int | None:
        """Shortest undirected hop count, None if disconnected or unknown."""
        if a not in self._adj or b not in self._adj:
            return None
        if a == b:
            return 0
        return self._distances_from(a).get(b)

    def is_ancestor(self, ancestor: str, descendant: str) -> bool:
        """True iff an isa chain of length >= 1 leads descendant -> ancestor."""
        if ancestor == descendant:
            return False
        seen = set()
        stack = [descendant]
        while stack:
            node = stack.pop()
            for parent in self._parents.get(node, ()):
                if parent == ancestor:
                    return True
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return False


# --- concept-to-code mapping ----------------------------------------------


@dataclass(frozen=True)
class ConceptMapping:
    """CUI to ontology code lookup; unknown CUIs map to no codes."""

    codes: Mapping[str, tuple[str, ...]]

    def codes_for(self, cui: str) -> tuple[str, ...]:
        return self.codes.get(cui, ())

    def __contains__(self, cui: str) -> bool:
        return cui in self.codes


# --- loading --------------------------------------------------------------


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(str(path), str(exc)) from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LoadError(str(path), f"invalid JSON: {exc.msg}", lineno) from exc
        if not isinstance(record, dict):
            raise LoadError(str(path), "expected an object", lineno)
        yield lineno, record


def load_annotations(path: str | Path) -> AnnotationSet:
    out = []
    for lineno, rec in _read_jsonl(path):
        sentence_id = rec.get("sentence_id")
        question_id = rec.get("question_id")
        if (sentence_id is None) == (question_id is None):
            raise LoadError(str(path), "need exactly one of sentence_id/question_id", lineno)
        try:
            ann = ConceptAnnotation(
                cui=rec["cui"],
                surface=rec["surface"],
                start=int(rec["start"]),
                end=int(rec["end"]),
                semantic_type=rec["semantic_type"],
                is_noun=bool(rec["is_noun"]),
                sentence_id=sentence_id,
                question_id=question_id,
            )
        except KeyError as exc:
            raise LoadError(str(path), f"missing field {exc.args[0]!r}", lineno) from exc
        if ann.start < 0 or ann.end <= ann.start:
            raise LoadError(str(path), f"bad span [{ann.start}, {ann.end})", lineno)
        if ann.semantic_type not in SEMANTIC_TYPES:
            raise LoadError(str(path), f"unknown semantic type {ann.semantic_type!r}", lineno)
        out.append(ann)
    return AnnotationSet(out)


def load_graph(path: str | Path) -> OntologyGraph:
    edges = []
    for lineno, rec in _read_jsonl(path):
        try:
            edges.append((rec["a"], rec["b"], bool(rec.get("isa", False))))
        except KeyError as exc:
            raise LoadError(str(path), f"missing field {exc.args[0]!r}", lineno) from exc
        if rec["a"] == rec["b"]:
            raise LoadError(str(path), "self-loop edge", lineno)
    try:
        return OntologyGraph(edges)
    except ValueError as exc:
        raise LoadError(str(path), str(exc)) from exc


def load_mapping(path: str | Path) -> ConceptMapping:
    codes: dict[str, tuple[str, ...]] = {}
    for lineno, rec in _read_jsonl(path):
        try:
            cui, code_list = rec["cui"], rec["codes"]
        except KeyError as exc:
            raise LoadError(str(path), f"missing field {exc.args[0]!r}", lineno) from exc
        if not isinstance(code_list, list):
            raise LoadError(str(path), "codes must be a list", lineno)
        if cui in codes:
            raise LoadError(str(path), f"duplicate mapping for {cui}", lineno)
        codes[cui] = tuple(code_list)
    return ConceptMapping(codes=codes)


def load_knowledge(
    annotations_path: str | Path,
    graph_path: str | Path,
    mapping_path: str | Path,
) -> tuple[AnnotationSet, OntologyGraph, ConceptMapping]:
    return (
        load_annotations(annotations_path),
        load_graph(graph_path),
        load_mapping(mapping_path),
    )


# --- disease concept filtering --------------------------------------------


def disease_annotations(
    annotations: Iterable[ConceptAnnotation],
    allowed_types: frozenset[str] = DISEASE_TYPES,
) -> list[ConceptAnnotation]:
    """Noun mentions whose semantic type is in the allowed set."""
    return [a for a in annotations if a.is_noun and a.semantic_type in allowed_types]


def disease_concepts(
    annotations: Iterable[ConceptAnnotation],
    mapping: ConceptMapping | None = None,
    allowed_types: frozenset[str] = DISEASE_TYPES,
) -> dict[str, tuple[str, ...]]:
    """Distinct disease CUIs with their ontology codes (empty if unmapped)."""
    out: dict[str, tuple[str, ...]] = {}
    for ann in disease_annotations(annotations, allowed_types):
        if ann.cui not in out:
            out[ann.cui] = mapping.codes_for(ann.cui) if mapping else ()
    return out
