"""Numeric comparator phrases: extraction, interval agreement, verdicts.

Lab-value questions are settled by interval arithmetic.  Both the
question ("whose A1C levels are greater than 10 ?") and a candidate
guideline sentence ("when A1C levels are greater than 10% [86
mmol/mol]") are reduced to (noun phrase, interval, unit) tuples via an
explicit comparator grammar; no part-of-speech tagging.  Phrases pair
up when their noun runs share a content token and their units are
compatible, and the answer is "in range" when every paired question
phrase's interval intersects a paired answer interval.

Units are never converted.  A mg/dL phrase will not pair with a
mmol/mol one, but bracketed alternates ("10% [86 mmol/mol]") are
emitted as extra phrases, giving the other unit system a second
chance to pair.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .questions import AnswerSource, TemplateAnswer, fmt_number
from .reader import AnswerCandidate

INF = math.inf

# --- intervals ------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    lower_closed: bool
    upper_closed: bool

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"interval bounds out of order: {self.lower} > {self.upper}")
        if math.isinf(self.lower) and math.isinf(self.upper):
            raise ValueError("at least one bound must be finite")
        if (math.isinf(self.lower) and self.lower_closed) or (
            math.isinf(self.upper) and self.upper_closed
        ):
            raise ValueError("an infinite bound cannot be closed")

    def intersects(self, other: "Interval") -> bool:
        lo = max(self.lower, other.lower)
        hi = min(self.upper, other.upper)
        if lo < hi:
            return True
        if lo > hi:
            return False
        lo_ok = (self.lower < lo or self.lower_closed) and (other.lower < lo or other.lower_closed)
        hi_ok = (self.upper > hi or self.upper_closed) and (other.upper > hi or other.upper_closed)
        return lo_ok and hi_ok


def greater_than(x: float) -> Interval:
    return Interval(x, INF, False, False)


def at_least(x: float) -> Interval:
    return Interval(x, INF, True, False)


def less_than(x: float) -> Interval:
    return Interval(-INF, x, False, False)


def at_most(x: float) -> Interval:
    return Interval(-INF, x, False, True)


def exactly(x: float) -> Interval:
    return Interval(x, x, True, True)


def between(x: float, y: float) -> Interval:
    return Interval(x, y, True, True)


# --- phrase grammar -------------------------------------------------------

_NUM = r"\d+(?:\.\d+)?"
# A unit is %, an mmHg-style pressure unit, or a slashed compound like
# mg/dL; bare words after a number are not units.
_UNIT = r"%|mmHg|[A-Za-z]+(?:/[A-Za-z0-9]+)+"

_COMPARATOR_RE = re.compile(
    r"""
    (?P<gte>greater\s+than\s+or\s+equal\s+to|>=|≥)
    |(?P<lte>less(?:er)?\s+than\s+or\s+equal\s+to|<=|≤)
    |(?P<gt>greater\s+than|more\s+than|>)
    |(?P<lt>less(?:er)?\s+than|lower\s+than|<)
    |(?P<eq>equal\s+to|=)
    |(?P<between>between)
    """,
    re.IGNORECASE | re.VERBOSE,
)

_VALUE_RE = re.compile(rf"\s*(?P<value>{_NUM})\s*(?P<unit>{_UNIT})?")
_ALTERNATE_RE = re.compile(rf"\s*\[\s*(?P<value>{_NUM})\s*(?P<unit>{_UNIT})?\s*\]")
_BETWEEN_TAIL_RE = re.compile(
    rf"\s*(?P<v1>{_NUM})\s*(?P<u1>{_UNIT})?\s+and\s+(?P<v2>{_NUM})\s*(?P<u2>{_UNIT})?",
    re.IGNORECASE,
)

# Trailing run of plain words directly before the comparator.
_NOUN_RUN_RE = re.compile(r"(?:[A-Za-z][A-Za-z0-9'-]*\s+)*[A-Za-z][A-Za-z0-9'-]*\s*$")

_COPULAS = {"is", "are", "was", "were", "be", "been", "being"}
_NOUN_STOP = {
    "the", "a", "an", "this", "that", "these", "those", "whose", "their",
    "his", "her", "its", "or", "and", "but", "when", "if", "for", "with",
    "of", "in", "on", "to", "by", "at", "as", "from", "than", "very",
    "who", "which", "there", "where", "not", "no",
}

STOPWORDS = _NOUN_STOP | _COPULAS


@dataclass(frozen=True)
class NumericPhrase:
    noun_phrase: tuple[str, ...]
    interval: Interval
    unit: str | None
    source_span: tuple[int, int]
    alternate: bool = False

    def to_dict(self) -> dict:
        return {
            "noun_phrase": list(self.noun_phrase),
            "interval": {
                "lower": None if math.isinf(self.interval.lower) else self.interval.lower,
                "upper": None if math.isinf(self.interval.upper) else self.interval.upper,
                "lower_closed": self.interval.lower_closed,
                "upper_closed": self.interval.upper_closed,
            },
            "unit": self.unit,
            "source_span": list(self.source_span),
        }


@dataclass(frozen=True)
class NumericExtraction:
    phrases: tuple[NumericPhrase, ...]
    diagnostics: tuple[str, ...] = ()


def _noun_run(text: str, end: int) -> tuple[str, ...]:
    m = _NOUN_RUN_RE.search(text[:end])
    if not m:
        return ()
    words = [w.lower() for w in m.group(0).split()]
    while words and words[-1] in _COPULAS:
        words.pop()
    run: list[str] = []
    for word in reversed(words):
        if word in _NOUN_STOP or word in _COPULAS:
            break
        run.append(word)
    run.reverse()
    return tuple(run)


def extract_numeric_phrases(text: str) -> NumericExtraction:
    """Find every comparator + number mention and build phrases.

    Comparators without a following number are skipped and reported in
    the diagnostics list rather than raised.
    """
    phrases: list[NumericPhrase] = []
    diagnostics: list[str] = []
    for m in _COMPARATOR_RE.finditer(text):
        kind = m.lastgroup
        noun = _noun_run(text, m.start())
        if kind == "between":
            tail = _BETWEEN_TAIL_RE.match(text, m.end())
            if not tail:
                diagnostics.append(f"no value pair after {m.group(0)!r} at offset {m.start()}")
                continue
            lo, hi = float(tail.group("v1")), float(tail.group("v2"))
            if lo > hi:
                lo, hi = hi, lo
            phrases.append(
                NumericPhrase(
                    noun_phrase=noun,
                    interval=between(lo, hi),
                    unit=tail.group("u1") or tail.group("u2"),
                    source_span=(m.start(), tail.end()),
                )
            )
            continue

        tail = _VALUE_RE.match(text, m.end())
        if not tail:
            diagnostics.append(f"no value after {m.group(0)!r} at offset {m.start()}")
            continue
        value = float(tail.group("value"))
        builder = {
            "gte": at_least,
            "lte": at_most,
            "gt": greater_than,
            "lt": less_than,
            "eq": exactly,
        }[kind]
        span_end = tail.end()
        phrases.append(
            NumericPhrase(
                noun_phrase=noun,
                interval=builder(value),
                unit=tail.group("unit"),
                source_span=(m.start(), span_end),
            )
        )
        alt = _ALTERNATE_RE.match(text, span_end)
        if alt:
            phrases.append(
                NumericPhrase(
                    noun_phrase=noun,
                    interval=builder(float(alt.group("value"))),
                    unit=alt.group("unit"),
                    source_span=(alt.start(), alt.end()),
                    alternate=True,
                )
            )
    return NumericExtraction(phrases=tuple(phrases), diagnostics=tuple(diagnostics))


def render_interval(interval: Interval, noun_phrase: Sequence[str] = (), unit: str | None = None) -> str:
    """Canonical comparator text for an interval; extraction-stable."""
    suffix = "" if unit is None else (unit if unit == "%" else f" {unit}")
    if interval.lower == interval.upper:
        body = f"equal to {fmt_number(interval.lower)}{suffix}"
    elif math.isinf(interval.upper):
        word = "greater than or equal to" if interval.lower_closed else "greater than"
        body = f"{word} {fmt_number(interval.lower)}{suffix}"
    elif math.isinf(interval.lower):
        word = "less than or equal to" if interval.upper_closed else "less than"
        body = f"{word} {fmt_number(interval.upper)}{suffix}"
    else:
        body = f"between {fmt_number(interval.lower)}{suffix} and {fmt_number(interval.upper)}{suffix}"
    prefix = " ".join(noun_phrase)
    return f"{prefix} {body}" if prefix else body


# --- pairing and verdicts -------------------------------------------------


@dataclass(frozen=True)
class RangeVerdict:
    in_range: bool
    matched_pairs: tuple[tuple[NumericPhrase, NumericPhrase], ...]
    unmatched_question_phrases: tuple[NumericPhrase, ...]

    def to_dict(self) -> dict:
        return {
            "in_range": self.in_range,
            "matched_pairs": [
                {"question": q.to_dict(), "answer": a.to_dict()} for q, a in self.matched_pairs
            ],
            "unmatched_question_phrases": [p.to_dict() for p in self.unmatched_question_phrases],
        }


def _units_compatible(a: str | None, b: str | None) -> bool:
    if a is None or b is None:
        return True
    return a.lower() == b.lower()


def _content_tokens(phrase: NumericPhrase) -> set[str]:
    return {t for t in phrase.noun_phrase if t not in STOPWORDS}


def compare_ranges(
    q_phrases: Iterable[NumericPhrase],
    a_phrases: Iterable[NumericPhrase],
    min_shared_tokens: int = 1,
) -> RangeVerdict:
    """Pair question phrases with answer phrases and test agreement.

    A question phrase agrees when any of its paired answer intervals
    intersects its own.  The verdict is in-range only when at least
    one pair exists and every paired question phrase agrees.
    """
    a_list = list(a_phrases)
    pairs: list[tuple[NumericPhrase, NumericPhrase]] = []
    unmatched: list[NumericPhrase] = []
    all_agree = True
    any_pair = False
    for q in q_phrases:
        q_tokens = _content_tokens(q)
        q_pairs = [
            a
            for a in a_list
            if len(q_tokens & _content_tokens(a)) >= min_shared_tokens
            and _units_compatible(q.unit, a.unit)
        ]
        if not q_pairs:
            unmatched.append(q)
            continue
        any_pair = True
        pairs.extend((q, a) for a in q_pairs)
        if not any(q.interval.intersects(a.interval) for a in q_pairs):
            all_agree = False
    return RangeVerdict(
        in_range=any_pair and all_agree,
        matched_pairs=tuple(pairs),
        unmatched_question_phrases=tuple(unmatched),
    )


def verdict_answer(verdict: RangeVerdict, candidate: AnswerCandidate) -> TemplateAnswer:
    """Render the guideline sentence with an in/out-of-range clause."""
    cited = f'The guidelines state: "{candidate.answer_text}"'
    if not verdict.matched_pairs:
        clause = "No comparable numeric statement was found for the patient's value."
    elif verdict.in_range:
        clause = "This guidance is in range of the patient's value."
    else:
        clause = "This guidance is out of range of the patient's value."
    return TemplateAnswer(text=f"{cited} {clause}", source=AnswerSource.GUIDELINE)


# --- accuracy bookkeeping -------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("accuracy undefined for empty counts")
        return (self.tp + self.tn) / self.total

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


@dataclass(frozen=True)
class NumericReport:
    overall: ConfusionCounts
    by_operator: dict[str, ConfusionCounts]


_OPERATOR_LABELS = {"lt": "Lesser Than", "eq": "Equal To", "gt": "Greater Than"}


def numeric_accuracy(verdicts: Iterable[tuple[bool, bool, str]]) -> NumericReport:
    """Confusion counts per operator group and overall.

    Each item is (predicted in-range, gold in-range, operator code);
    in-range counts as the positive class.
    """
    cells: dict[str, dict[str, int]] = {}
    for predicted, gold, operator in verdicts:
        group = cells.setdefault(operator, {"tp": 0, "tn": 0, "fp": 0, "fn": 0})
        if predicted and gold:
            group["tp"] += 1
        elif not predicted and not gold:
            group["tn"] += 1
        elif predicted and not gold:
            group["fp"] += 1
        else:
            group["fn"] += 1
    by_operator = {op: ConfusionCounts(**c) for op, c in sorted(cells.items())}
    if not by_operator:
        raise ValueError("no verdicts to score")
    overall = ConfusionCounts(0, 0, 0, 0)
    for counts in by_operator.values():
        overall = overall + counts
    return NumericReport(overall=overall, by_operator=by_operator)


def accuracy_table(report: NumericReport) -> str:
    """Aligned per-operator breakdown, operators first, overall last."""
    header = f"{'Operator':<14}{'Accuracy':>9}{'TP':>5}{'TN':>5}{'FP':>5}{'FN':>5}{'Total':>7}"
    lines = [header]
    order = [op for op in ("lt", "eq", "gt") if op in report.by_operator]
    order += [op for op in report.by_operator if op not in order]
    for op in order:
        c = report.by_operator[op]
        label = _OPERATOR_LABELS.get(op, op)
        lines.append(
            f"{label:<14}{c.accuracy:>9.2f}{c.tp:>5}{c.tn:>5}{c.fp:>5}{c.fn:>5}{c.total:>7}"
        )
    c = report.overall
    lines.append(f"{'Overall':<14}{c.accuracy:>9.2f}{c.tp:>5}{c.tn:>5}{c.fp:>5}{c.fn:>5}{c.total:>7}")
    return "\n".join(lines)


def predict_in_range(question_text: str, answer_text: str) -> tuple[bool, RangeVerdict]:
    """End-to-end helper: extract both sides, compare, return verdict."""
    q = extract_numeric_phrases(question_text)
    a = extract_numeric_phrases(answer_text)
    verdict = compare_ranges(q.phrases, a.phrases)
    return verdict.in_range, verdict
