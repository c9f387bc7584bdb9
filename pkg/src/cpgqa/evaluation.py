"""Gold ingestion and the ranking metric suite.

Relevance lives at sentence-id granularity: a gold file lists the
relevant sentence ids per question, a run file the ranked sentence ids
a system produced.  Metrics are the usual IR set (AP/MAP, precision
at k, recall and F1 at 10) plus sentence-level BLEU of the top-ranked
texts against the relevant sentences.

The BLEU variant: max order 4, modified n-gram precision, add-one
smoothing on orders two and up, brevity penalty against the closest
reference length, averaged over candidates.  Report renderers repeat
that in their header so numbers travel with their definition.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from math import exp, log
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import GuidelineCorpus, Tokenizer, default_tokenizer
from .errors import ContractError, LoadError

BLEU_VARIANT = "sentence-BLEU max order 4, add-one smoothed orders >= 2, brevity penalty"


# --- gold and run files ---------------------------------------------------


@dataclass(frozen=True)
class GoldAnnotation:
    question_id: str
    relevant: frozenset[str]
    expert_validated: bool = False


@dataclass(frozen=True)
class RankedRun:
    rankings: Mapping[str, tuple[str, ...]]

    def __getitem__(self, question_id: str) -> tuple[str, ...]:
        return self.rankings[question_id]

    def __iter__(self):
        return iter(self.rankings)

    def __len__(self) -> int:
        return len(self.rankings)


def _jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(str(path), str(exc)) from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise LoadError(str(path), f"invalid JSON: {exc.msg}", lineno) from exc


def load_gold(path: str | Path) -> dict[str, GoldAnnotation]:
    out: dict[str, GoldAnnotation] = {}
    for lineno, rec in _jsonl(path):
        try:
            gold = GoldAnnotation(
                question_id=rec["question_id"],
                relevant=frozenset(rec["relevant"]),
                expert_validated=bool(rec.get("expert_validated", False)),
            )
        except KeyError as exc:
            raise LoadError(str(path), f"missing field {exc.args[0]!r}", lineno) from exc
        if gold.question_id in out:
            raise LoadError(str(path), f"duplicate question {gold.question_id!r}", lineno)
        out[gold.question_id] = gold
    return out


def load_run(path: str | Path) -> RankedRun:
    rankings: dict[str, tuple[str, ...]] = {}
    for lineno, rec in _jsonl(path):
        try:
            qid, ranked = rec["question_id"], rec["ranked"]
        except KeyError as exc:
            raise LoadError(str(path), f"missing field {exc.args[0]!r}", lineno) from exc
        if qid in rankings:
            raise LoadError(str(path), f"duplicate question {qid!r}", lineno)
        if len(set(ranked)) != len(ranked):
            raise LoadError(str(path), f"duplicate sentence ids for {qid!r}", lineno)
        rankings[qid] = tuple(ranked)
    return RankedRun(rankings=rankings)


# --- core metrics ---------------------------------------------------------


def average_precision(ranking: Sequence[str], relevant: frozenset[str] | set[str]) -> float:
    """Mean over relevant items of precision at each hit's rank.

    Relevant items never retrieved contribute zero.  An empty relevant
    set has no defined AP and is a contract violation.
    """
    if not relevant:
        raise ContractError("average_precision needs a non-empty relevant set")
    hits = 0
    total = 0.0
    seen: set[str] = set()
    for rank, item in enumerate(ranking, start=1):
        if item in seen:
            continue
        seen.add(item)
        if item in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


@dataclass(frozen=True)
class TopkMetrics:
    precision: float
    recall: float
    f1: float


def topk_metrics(ranking: Sequence[str], relevant: frozenset[str] | set[str], k: int) -> TopkMetrics:
    """Precision/recall/F1 over the first k ranks.

    k stays in the precision denominator even when fewer than k items
    were retrieved.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        raise ContractError("topk_metrics needs a non-empty relevant set")
    hits = len(set(ranking[:k]) & set(relevant))
    precision = hits / k
    recall = hits / len(relevant)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return TopkMetrics(precision=precision, recall=recall, f1=f1)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _sentence_bleu(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    max_n: int,
) -> float:
    c_len = len(candidate)
    if c_len == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n in range(1, min(max_n, c_len) + 1):
        cand_counts = _ngrams(candidate, n)
        clipped = 0
        for gram, count in cand_counts.items():
            best = max((_ngrams(ref, n).get(gram, 0) for ref in references), default=0)
            clipped += min(count, best)
        total = sum(cand_counts.values())
        if n == 1:
            if clipped == 0:
                return 0.0
            p = clipped / total
        else:
            p = (clipped + 1) / (total + 1)
        log_sum += log(p)
        orders += 1
    # Brevity penalty against the closest reference length (shorter wins ties).
    r_len = min((len(r) for r in references), key=lambda r: (abs(r - c_len), r))
    brevity = 1.0 if c_len >= r_len else exp(1 - r_len / c_len)
    return brevity * exp(log_sum / orders)


def bleu(
    candidates: Sequence[str],
    references: Sequence[str],
    max_n: int = 4,
    tokenizer: Tokenizer = default_tokenizer,
) -> float:
    """Mean sentence BLEU of each candidate against the reference set."""
    if not candidates:
        raise ContractError("bleu needs at least one candidate")
    if not references:
        raise ContractError("bleu needs at least one reference")
    ref_tokens = [tokenizer(r) for r in references]
    scores = [_sentence_bleu(tokenizer(c), ref_tokens, max_n) for c in candidates]
    return sum(scores) / len(scores)


# --- run evaluation -------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    map: float
    p_at_1: float
    p_at_5: float
    f1_at_10: float
    recall_at_10: float
    bleu: float
    n_questions: int

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "p_at_1": self.p_at_1,
            "p_at_5": self.p_at_5,
            "f1_at_10": self.f1_at_10,
            "recall_at_10": self.recall_at_10,
            "bleu": self.bleu,
            "n_questions": self.n_questions,
        }


@dataclass(frozen=True)
class QuestionMetrics:
    ap: float
    p_at_1: float
    p_at_5: float
    f1_at_10: float
    recall_at_10: float
    bleu: float


@dataclass(frozen=True)
class EvaluationResult:
    report: MetricsReport
    per_question: dict[str, QuestionMetrics]
    skipped: tuple[tuple[str, str], ...]
    by_group: dict[str, MetricsReport] | None = None


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _aggregate(per_question: Mapping[str, QuestionMetrics]) -> MetricsReport:
    qs = list(per_question.values())
    return MetricsReport(
        map=_mean([q.ap for q in qs]),
        p_at_1=_mean([q.p_at_1 for q in qs]),
        p_at_5=_mean([q.p_at_5 for q in qs]),
        f1_at_10=_mean([q.f1_at_10 for q in qs]),
        recall_at_10=_mean([q.recall_at_10 for q in qs]),
        bleu=_mean([q.bleu for q in qs]),
        n_questions=len(qs),
    )


def evaluate_run(
    run: RankedRun,
    gold: Mapping[str, GoldAnnotation],
    corpus: GuidelineCorpus,
    tokenizer: Tokenizer = default_tokenizer,
    groups: Mapping[str, str] | None = None,
) -> EvaluationResult:
    """Score a ranked run against gold annotations.

    Run questions without usable gold are skipped with a reason, not
    failed.  With a question-to-group mapping the report is also
    rolled up per group.
    """
    per_question: dict[str, QuestionMetrics] = {}
    skipped: list[tuple[str, str]] = []
    for qid in sorted(run.rankings):
        annotation = gold.get(qid)
        if annotation is None:
            skipped.append((qid, "no gold annotation"))
            continue
        if not annotation.relevant:
            skipped.append((qid, "empty relevant set"))
            continue
        ranking = run[qid]
        top10 = ranking[:10]
        candidate_texts = [
            s.text for s in (corpus.find_sentence(sid) for sid in top10) if s is not None
        ]
        reference_texts = [
            s.text for s in (corpus.find_sentence(sid) for sid in sorted(annotation.relevant)) if s is not None
        ]
        if candidate_texts and reference_texts:
            bleu_score = bleu(candidate_texts, reference_texts, tokenizer=tokenizer)
        else:
            bleu_score = 0.0
        at10 = topk_metrics(ranking, annotation.relevant, 10)
        per_question[qid] = QuestionMetrics(
            ap=average_precision(ranking, annotation.relevant),
            p_at_1=topk_metrics(ranking, annotation.relevant, 1).precision,
            p_at_5=topk_metrics(ranking, annotation.relevant, 5).precision,
            f1_at_10=at10.f1,
            recall_at_10=at10.recall,
            bleu=bleu_score,
        )

    by_group = None
    if groups is not None:
        grouped: dict[str, dict[str, QuestionMetrics]] = {}
        for qid, metrics in per_question.items():
            grouped.setdefault(groups.get(qid, "Unmapped"), {})[qid] = metrics
        by_group = {g: _aggregate(m) for g, m in sorted(grouped.items())}

    return EvaluationResult(
        report=_aggregate(per_question),
        per_question=per_question,
        skipped=tuple(skipped),
        by_group=by_group,
    )


def report_table(reports: Mapping[str, MetricsReport]) -> str:
    """Aligned comparison table, one row per labeled run."""
    header = (
        f"{'Run':<28}{'BLEU':>7}{'P@1':>7}{'P@5':>7}{'MAP':>7}{'F1@10':>8}{'R@10':>7}{'N':>5}"
    )
    lines = [f"# {BLEU_VARIANT}", header]
    for label, r in reports.items():
        lines.append(
            f"{label:<28}{r.bleu:>7.3f}{r.p_at_1:>7.3f}{r.p_at_5:>7.3f}"
            f"{r.map:>7.3f}{r.f1_at_10:>8.3f}{r.recall_at_10:>7.3f}{r.n_questions:>5}"
        )
    return "\n".join(lines)
