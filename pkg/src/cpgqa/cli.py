"""Command-line entry points.

Verbs: extract a corpus from guideline HTML, print coverage stats,
answer a single question, evaluate ranked runs or numeric verdicts,
and serve the HTTP API.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import corpus_stats, load_corpus, parse_guideline, save_corpus
from .errors import CpgqaError
from .evaluation import evaluate_run, load_gold, load_run, report_table
from .numeric import accuracy_table, numeric_accuracy, predict_in_range
from .ontology import load_annotations
from .patients import load_ccs
from .service import compute_answer, load_state, serve


def _cmd_extract(args: argparse.Namespace) -> int:
    html = Path(args.html).read_text(encoding="utf-8")
    selectors = json.loads(Path(args.selectors).read_text(encoding="utf-8"))
    corpus = parse_guideline(html, selectors, title=args.title or "")
    save_corpus(corpus, args.out)
    print(f"wrote {args.out}: {len(corpus.chapters)} chapters, {len(corpus.sentences())} sentences")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    types = None
    if args.annotations:
        annotations = load_annotations(args.annotations)
        types = {a.semantic_type for anns in annotations.by_sentence.values() for a in anns}
    stats = corpus_stats(corpus, semantic_types=types)
    if args.format == "json":
        print(json.dumps(stats.to_dict(), indent=2))
    else:
        d = stats.to_dict()
        width = max(len(k) for k in d)
        for key, value in d.items():
            print(f"{key:<{width}}  {value if value is not None else '-'}")
    return 0


def _cmd_ask(args: argparse.Namespace) -> int:
    state = load_state(args.config)
    payload = compute_answer(state, args.patient, args.question, args.strategy, args.scorer)
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_evaluate_ir(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    run = load_run(args.run)
    gold = load_gold(args.gold)
    groups = None
    if args.group_by_ccs:
        ccs = load_ccs(args.group_by_ccs)
        # Feature questions carry their diagnosis code in the id tail.
        groups = {}
        for qid in run.rankings:
            parts = qid.split(":")
            code = parts[2] if len(parts) > 2 and parts[1] == "t3" else None
            groups[qid] = ccs.rollup(code) if code else "Unmapped"
    result = evaluate_run(run, gold, corpus, groups=groups)
    if args.format == "json":
        out = {
            "report": result.report.to_dict(),
            "per_question": {q: m.__dict__ for q, m in sorted(result.per_question.items())},
            "skipped": [{"question_id": q, "reason": r} for q, r in result.skipped],
        }
        if result.by_group is not None:
            out["by_group"] = {g: r.to_dict() for g, r in result.by_group.items()}
        print(json.dumps(out, indent=2))
    else:
        rows = {Path(args.run).stem: result.report}
        if result.by_group:
            rows.update({f"  {g}": r for g, r in result.by_group.items()})
        print(report_table(rows))
        for qid, reason in result.skipped:
            print(f"skipped {qid}: {reason}", file=sys.stderr)
    return 0


def _cmd_evaluate_numeric(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    questions = {}
    for line in Path(args.questions).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            questions[rec["question_id"]] = rec["text"]
    verdicts = []
    for line in Path(args.gold).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        question_text = questions[rec["question_id"]]
        sentence = corpus.sentence(rec["candidate_sentence_id"])
        predicted, _ = predict_in_range(question_text, sentence.text)
        verdicts.append((predicted, bool(rec["gold_in_range"]), rec["operator"]))
    report = numeric_accuracy(verdicts)
    if args.format == "json":
        out = {
            "overall": {**report.overall.__dict__, "accuracy": report.overall.accuracy},
            "by_operator": {
                op: {**c.__dict__, "accuracy": c.accuracy}
                for op, c in report.by_operator.items()
            },
        }
        print(json.dumps(out, indent=2))
    else:
        print(accuracy_table(report))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    serve(args.config, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpgqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="parse guideline HTML into a corpus JSON")
    p.add_argument("--html", required=True)
    p.add_argument("--selectors", required=True, help="selector config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--title", default="")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("stats", help="coverage statistics for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--annotations")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("ask", help="answer one question for one patient")
    p.add_argument("--config", required=True, help="service config JSON")
    p.add_argument("--patient", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--strategy", default="base")
    p.add_argument("--scorer", default="lexical")
    p.set_defaults(func=_cmd_ask)

    p = sub.add_parser("evaluate", help="score runs against gold labels")
    eval_sub = p.add_subparsers(dest="kind", required=True)

    e = eval_sub.add_parser("ir", help="ranking metrics for a retrieval run")
    e.add_argument("--run", required=True)
    e.add_argument("--gold", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--group-by-ccs", help="CCS table for per-grouping rollups")
    e.add_argument("--format", choices=("text", "json"), default="text")
    e.set_defaults(func=_cmd_evaluate_ir)

    e = eval_sub.add_parser("numeric", help="range-verdict accuracy breakdown")
    e.add_argument("--gold", required=True, help="gold verdicts JSON-lines")
    e.add_argument("--questions", required=True, help="question texts JSON-lines")
    e.add_argument("--corpus", required=True)
    e.add_argument("--format", choices=("text", "json"), default="text")
    e.set_defaults(func=_cmd_evaluate_numeric)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CpgqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
