"""Guideline corpus: extraction, sentence handling, chunking, stats.

A guideline document is parsed from HTML into a fixed hierarchy:
chapters, recommendation groups within a chapter, and per group the
graded recommendations, the narrative discussion, and the reference
list.  Which elements play which role is driven entirely by a selector
config, so a differently marked-up guideline only needs a new config.

Selectors use a small CSS subset: ``tag``, ``.class``, ``tag.class``,
and descendant chains separated by spaces.  That covers the documents
we extract from without pulling in an HTML-query dependency.

Sentences are the retrieval unit everywhere downstream.  Each gets a
corpus-unique id derived from its position (``c2.g1.d3`` is chapter 2,
group 1, discussion sentence 3) so serialized corpora, gold files and
ranked runs can all refer to the same ids.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ParseError, StructuralError

Tokenizer = Callable[[str], list[str]]

# --- tokenization ---------------------------------------------------------

# Numbers survive as single tokens, decimal point included; everything
# else splits on non-alphanumeric runs.
_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[a-z][a-z0-9]*")


def default_tokenizer(text: str) -> list[str]:
    """Lowercase tokenization used for counting, IDF and overlap."""
    return _TOKEN_RE.findall(text.lower())


# --- sentence splitting ---------------------------------------------------

_BOUNDARY_RE = re.compile(r"[.?!]\s+(?=[A-Z])")

# Words that take a trailing period without ending the sentence.  The
# final /-segment of the preceding word is checked too, so bracketed
# unit alternates such as "mmol/mol" are covered.
_ABBREVIATIONS = {
    "e.g", "i.e", "etc", "vs", "cf", "no", "fig", "tab",
    "dr", "mr", "mrs", "ms", "mmol", "mol",
}


def _ends_with_abbreviation(prefix: str) -> bool:
    m = re.search(r"(\S+)[.?!]$", prefix)
    if not m:
        return False
    word = m.group(1).lower().strip("()[]\"'.,;:")
    if word in _ABBREVIATIONS:
        return True
    return word.rsplit("/", 1)[-1] in _ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split on ./?/! + whitespace + uppercase, minus abbreviations."""
    pieces: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        if _ends_with_abbreviation(text[: m.start() + 1]):
            continue
        pieces.append(text[start : m.start() + 1])
        start = m.end()
    pieces.append(text[start:])
    return [p.strip() for p in pieces if p.strip()]


# --- data model -----------------------------------------------------------


class Grade(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    E = "E"
    UNKNOWN = "Unknown"


class SentenceKind(str, Enum):
    RECOMMENDATION = "Recommendation"
    DISCUSSION = "Discussion"


@dataclass(frozen=True)
class Sentence:
    id: str
    text: str
    kind: SentenceKind
    chapter_ordinal: int


@dataclass(frozen=True)
class Recommendation:
    numbering: str
    text: str
    grade: Grade


@dataclass(frozen=True)
class Reference:
    index: int
    citation: str


@dataclass(frozen=True)
class RecommendationGroup:
    id: str
    recommendations: tuple[Recommendation, ...]
    discussion: tuple[Sentence, ...]
    references: tuple[Reference, ...]


@dataclass(frozen=True)
class Chapter:
    ordinal: int
    title: str
    groups: tuple[RecommendationGroup, ...]


@dataclass(frozen=True)
class GuidelineCorpus:
    title: str
    chapters: tuple[Chapter, ...]

    @cached_property
    def _sentences(self) -> tuple[Sentence, ...]:
        out: list[Sentence] = []
        for chapter in self.chapters:
            for gi, group in enumerate(chapter.groups, start=1):
                for ri, rec in enumerate(group.recommendations, start=1):
                    out.append(
                        Sentence(
                            id=_rec_sentence_id(chapter.ordinal, gi, ri),
                            text=rec.text,
                            kind=SentenceKind.RECOMMENDATION,
                            chapter_ordinal=chapter.ordinal,
                        )
                    )
                out.extend(group.discussion)
        return tuple(out)

    @cached_property
    def _by_id(self) -> dict[str, Sentence]:
        return {s.id: s for s in self._sentences}

    @cached_property
    def _grades(self) -> dict[str, Grade]:
        out: dict[str, Grade] = {}
        for chapter in self.chapters:
            for gi, group in enumerate(chapter.groups, start=1):
                for ri, rec in enumerate(group.recommendations, start=1):
                    out[_rec_sentence_id(chapter.ordinal, gi, ri)] = rec.grade
        return out

    def sentences(self) -> tuple[Sentence, ...]:
        """All recommendation and discussion sentences, document order."""
        return self._sentences

    def sentence(self, sentence_id: str) -> Sentence:
        return self._by_id[sentence_id]

    def find_sentence(self, sentence_id: str) -> Sentence | None:
        return self._by_id.get(sentence_id)

    def grade_of(self, sentence_id: str) -> Grade | None:
        """Grade for a recommendation sentence, None for discussion."""
        return self._grades.get(sentence_id)


def _rec_sentence_id(chapter_ordinal: int, group_index: int, rec_index: int) -> str:
    return f"c{chapter_ordinal}.g{group_index}.r{rec_index}"


@dataclass(frozen=True)
class Passage:
    id: str
    sentence_ids: tuple[str, ...]
    token_count: int
    over_limit: bool = False


@dataclass(frozen=True)
class CoverageStats:
    chapter_count: int
    sentence_count: int
    token_count: int
    avg_tokens_per_sentence: int
    distinct_semantic_types: int | None = None

    def to_dict(self) -> dict:
        return {
            "chapter_count": self.chapter_count,
            "sentence_count": self.sentence_count,
            "token_count": self.token_count,
            "avg_tokens_per_sentence": self.avg_tokens_per_sentence,
            "distinct_semantic_types": self.distinct_semantic_types,
        }


# --- minimal HTML tree + selector engine ----------------------------------

_VOID_TAGS = {"br", "hr", "img", "meta", "link", "input", "col", "area", "base"}


class _Node:
    __slots__ = ("tag", "classes", "attrs", "children", "parent", "chunks")

    def __init__(self, tag: str, attrs: dict[str, str], parent: "_Node | None"):
        self.tag = tag
        self.attrs = attrs
        self.classes = set(attrs.get("class", "").split())
        self.parent = parent
        self.children: list[_Node] = []
        self.chunks: list[str] = []

    def text(self) -> str:
        parts = list(self.chunks)
        for child in self.children:
            parts.append(child.text())
        return re.sub(r"\s+", " ", " ".join(parts)).strip()

    def walk(self) -> Iterable["_Node"]:
        yield self
        for child in self.children:
            yield from child.walk()


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("#root", {}, None)
        self._stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = _Node(tag, dict(attrs), self._stack[-1])
        self._stack[-1].children.append(node)
        if tag not in _VOID_TAGS:
            self._stack.append(node)

    def handle_endtag(self, tag):
        # Pop back to the matching open tag; tolerate strays.
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                break

    def handle_data(self, data):
        if data.strip():
            self._stack[-1].chunks.append(data)


_STEP_RE = re.compile(r"^([a-zA-Z][a-zA-Z0-9]*)?(?:\.([a-zA-Z0-9_-]+))?$")


def _parse_selector(selector: str) -> list[tuple[str | None, str | None]]:
    steps = []
    parts = selector.split()
    if not parts:
        raise StructuralError(selector, "empty selector")
    for part in parts:
        m = _STEP_RE.match(part)
        if not m or (m.group(1) is None and m.group(2) is None):
            raise StructuralError(selector, f"unsupported step {part!r}")
        steps.append((m.group(1), m.group(2)))
    return steps


def _step_matches(node: _Node, step: tuple[str | None, str | None]) -> bool:
    tag, cls = step
    if tag is not None and node.tag != tag:
        return False
    if cls is not None and cls not in node.classes:
        return False
    return True


def _select(scope: _Node, selector: str) -> list[_Node]:
    steps = _parse_selector(selector)
    out = []
    for node in scope.walk():
        if node is scope or not _step_matches(node, steps[-1]):
            continue
        # Remaining steps must match some chain of ancestors, in order.
        needed = len(steps) - 2
        cursor = node.parent
        while needed >= 0 and cursor is not None and cursor is not scope.parent:
            if _step_matches(cursor, steps[needed]):
                needed -= 1
            cursor = cursor.parent
        if needed < 0:
            out.append(node)
    return out


# --- guideline extraction -------------------------------------------------

_GRADE_RE = re.compile(r"\s([ABCE])\s*$")
_NUMBERING_RE = re.compile(r"^(\d+(?:\.\d+)+)\s")

REQUIRED_SELECTORS = ("chapter", "chapter_title", "group", "recommendation")
OPTIONAL_SELECTORS = ("discussion", "reference")


def parse_grade(text: str) -> Grade:
    """Trailing lone capital A/B/C/E marks the grade; anything else is Unknown."""
    m = _GRADE_RE.search(text)
    if m:
        return Grade(m.group(1))
    return Grade.UNKNOWN


def parse_guideline(html: str, selectors: dict[str, str], title: str = "") -> GuidelineCorpus:
    """Extract the chapter/group/recommendation hierarchy from HTML.

    ``selectors`` must provide chapter, chapter_title, group and
    recommendation entries; discussion and reference are optional.
    Raises ParseError on an empty document and StructuralError when a
    selector is malformed or a required one matches nothing.
    """
    if not html or not html.strip():
        raise ParseError("empty document")
    for key in REQUIRED_SELECTORS:
        if key not in selectors:
            raise StructuralError(key, "missing from selector config")

    builder = _TreeBuilder()
    builder.feed(html)
    root = builder.root
    if not root.text():
        raise ParseError("document has no text content")

    chapter_nodes = _select(root, selectors["chapter"])
    if not chapter_nodes:
        raise StructuralError(selectors["chapter"], "matched no chapters")

    chapters = []
    for ordinal, ch_node in enumerate(chapter_nodes, start=1):
        title_nodes = _select(ch_node, selectors["chapter_title"])
        if not title_nodes:
            raise StructuralError(selectors["chapter_title"], f"no title in chapter {ordinal}")
        groups = []
        for gi, g_node in enumerate(_select(ch_node, selectors["group"]), start=1):
            groups.append(_parse_group(g_node, selectors, ordinal, gi))
        chapters.append(Chapter(ordinal=ordinal, title=title_nodes[0].text(), groups=tuple(groups)))

    doc_title = title
    if not doc_title:
        title_node = _select(root, selectors.get("title", "h1"))
        doc_title = title_node[0].text() if title_node else ""
    return GuidelineCorpus(title=doc_title, chapters=tuple(chapters))


def _parse_group(g_node: _Node, selectors: dict[str, str], chapter_ordinal: int, group_index: int) -> RecommendationGroup:
    group_id = g_node.attrs.get("id") or f"ch{chapter_ordinal}-g{group_index}"

    recommendations = []
    for r_node in _select(g_node, selectors["recommendation"]):
        text = r_node.text()
        if not text:
            continue
        m = _NUMBERING_RE.match(text)
        recommendations.append(
            Recommendation(
                numbering=m.group(1) if m else "",
                text=text,
                grade=parse_grade(text),
            )
        )

    discussion: list[Sentence] = []
    if "discussion" in selectors:
        di = 0
        for d_node in _select(g_node, selectors["discussion"]):
            for sent_text in split_sentences(d_node.text()):
                di += 1
                discussion.append(
                    Sentence(
                        id=f"c{chapter_ordinal}.g{group_index}.d{di}",
                        text=sent_text,
                        kind=SentenceKind.DISCUSSION,
                        chapter_ordinal=chapter_ordinal,
                    )
                )

    references = []
    if "reference" in selectors:
        for idx, ref_node in enumerate(_select(g_node, selectors["reference"]), start=1):
            references.append(Reference(index=idx, citation=ref_node.text()))

    return RecommendationGroup(
        id=group_id,
        recommendations=tuple(recommendations),
        discussion=tuple(discussion),
        references=tuple(references),
    )


# --- chunking -------------------------------------------------------------


def chunk_sentences(
    sentences: Sequence[Sentence],
    tokenizer: Tokenizer = default_tokenizer,
    max_tokens: int = 512,
    id_prefix: str = "p",
) -> list[Passage]:
    """Greedy in-order packing of sentences into token-bounded passages.

    A single sentence longer than max_tokens becomes its own passage,
    flagged over_limit, so the output always partitions the input.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    passages: list[Passage] = []
    current: list[str] = []
    current_tokens = 0

    def flush():
        nonlocal current, current_tokens
        if current:
            passages.append(
                Passage(
                    id=f"{id_prefix}{len(passages) + 1:04d}",
                    sentence_ids=tuple(current),
                    token_count=current_tokens,
                    over_limit=current_tokens > max_tokens,
                )
            )
            current = []
            current_tokens = 0

    for sentence in sentences:
        n = len(tokenizer(sentence.text))
        if current and current_tokens + n > max_tokens:
            flush()
        current.append(sentence.id)
        current_tokens += n
        if current_tokens > max_tokens:
            # Lone over-long sentence; keep it intact but flagged.
            flush()
    flush()
    return passages


def chunk_passages(
    corpus: GuidelineCorpus,
    tokenizer: Tokenizer = default_tokenizer,
    max_tokens: int = 512,
) -> list[Passage]:
    return chunk_sentences(corpus.sentences(), tokenizer, max_tokens)


# --- coverage stats -------------------------------------------------------


def corpus_stats(
    corpus: GuidelineCorpus,
    tokenizer: Tokenizer = default_tokenizer,
    semantic_types: Iterable[str] | None = None,
) -> CoverageStats:
    """Chapter/sentence/token counts plus optional semantic-type tally.

    Average tokens per sentence is reported at integer precision
    (truncated); an empty corpus reports 0.
    """
    sentences = corpus.sentences()
    token_count = sum(len(tokenizer(s.text)) for s in sentences)
    avg = token_count // len(sentences) if sentences else 0
    distinct = len(set(semantic_types)) if semantic_types is not None else None
    return CoverageStats(
        chapter_count=len(corpus.chapters),
        sentence_count=len(sentences),
        token_count=token_count,
        avg_tokens_per_sentence=avg,
        distinct_semantic_types=distinct,
    )


# --- serialization --------------------------------------------------------


def corpus_to_dict(corpus: GuidelineCorpus) -> dict:
    return {
        "title": corpus.title,
        "chapters": [
            {
                "ordinal": ch.ordinal,
                "title": ch.title,
                "groups": [
                    {
                        "id": g.id,
                        "recommendations": [
                            {"numbering": r.numbering, "text": r.text, "grade": r.grade.value}
                            for r in g.recommendations
                        ],
                        "discussion": [{"id": s.id, "text": s.text} for s in g.discussion],
                        "references": [
                            {"index": ref.index, "citation": ref.citation} for ref in g.references
                        ],
                    }
                    for g in ch.groups
                ],
            }
            for ch in corpus.chapters
        ],
    }


def corpus_from_dict(data: dict) -> GuidelineCorpus:
    chapters = []
    for ch in data["chapters"]:
        groups = []
        for g in ch["groups"]:
            groups.append(
                RecommendationGroup(
                    id=g["id"],
                    recommendations=tuple(
                        Recommendation(
                            numbering=r["numbering"],
                            text=r["text"],
                            grade=Grade(r["grade"]),
                        )
                        for r in g["recommendations"]
                    ),
                    discussion=tuple(
                        Sentence(
                            id=s["id"],
                            text=s["text"],
                            kind=SentenceKind.DISCUSSION,
                            chapter_ordinal=ch["ordinal"],
                        )
                        for s in g["discussion"]
                    ),
                    references=tuple(
                        Reference(index=r["index"], citation=r["citation"])
                        for r in g["references"]
                    ),
                )
            )
        chapters.append(Chapter(ordinal=ch["ordinal"], title=ch["title"], groups=tuple(groups)))
    return GuidelineCorpus(title=data["title"], chapters=tuple(chapters))


def save_corpus(corpus: GuidelineCorpus, path: str | Path) -> None:
    Path(path).write_text(json.dumps(corpus_to_dict(corpus), indent=2) + "\n", encoding="utf-8")


def load_corpus(path: str | Path) -> GuidelineCorpus:
    return corpus_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
