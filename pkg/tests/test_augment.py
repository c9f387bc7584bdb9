"""Strategy parsing, concept features, pre-filters and post-sorts.

Hop distances referenced here were walked by hand on the fixture edge
list (essential hypertension sits 1 hop from hypertensive disorder,
5 from chronic kidney disease, 6 from type 2 diabetes); the filter
tests then check retention against those numbers, not against the
filter's own output.
"""

import pytest
from hypothesis import given, strategies as st

from cpgqa.augment import (
    HOPS_GRID,
    AnswerOutcome,
    AugmentedCandidate,
    KnowledgeBase,
    SortOrder,
    StrategyConfig,
    StrategyKind,
    allowed_types_for,
    ancestor_count,
    answer_question,
    concept_codes,
    disease_overlap,
    hop_sum,
    parse_strategy,
    postsort,
    prefilter_ontology,
    prefilter_semantic,
)
from cpgqa.corpus import chunk_passages
from cpgqa.errors import ContractError
from cpgqa.ontology import (
    DISEASE_TYPES,
    LAB_TYPES,
    MEDICATION_TYPES,
    AnnotationSet,
    ConceptAnnotation,
)
from cpgqa.questions import QuestionType, generate_questions
from cpgqa.reader import AnswerCandidate, LexicalScorer


@pytest.fixture(scope="module")
def kb(corpus, annotations, graph, mapping):
    return KnowledgeBase(corpus=corpus, annotations=annotations, graph=graph, mapping=mapping)


@pytest.fixture(scope="module")
def singleton_passages(corpus):
    # One sentence per passage so filter decisions are sentence-precise.
    return chunk_passages(corpus, max_tokens=1)


@pytest.fixture(scope="module")
def questions_p001(patients_by_id, ccs):
    return {q.id: q for q in generate_questions(patients_by_id["p001"], ccs).questions}


def _sids(passages):
    return {sid for p in passages for sid in p.sentence_ids}


class TestStrategyParsing:
    @pytest.mark.parametrize(
        "label",
        [
            "base",
            "semantic",
            "overlap:confidence-first",
            "overlap:overlap-first",
            "hops:3",
            "hops:8",
            "ontosort:hops-first",
            "ontosort:ancestors-first",
            "ontosort:confidence-first",
        ],
    )
    def test_labels_round_trip(self, label):
        assert parse_strategy(label).label() == label

    def test_defaults_for_bare_families(self):
        assert parse_strategy("overlap").label() == "overlap:confidence-first"
        assert parse_strategy("ontosort").label() == "ontosort:hops-first"

    @pytest.mark.parametrize(
        "bad",
        ["", "unknown", "hops", "hops:zero", "hops:0", "overlap:hops-first", "ontosort:overlap-first", "semantic:cui"],
    )
    def test_rejects_malformed(self, bad):
        with pytest.raises(ValueError):
            parse_strategy(bad)

    def test_grid_is_the_documented_sweep(self):
        assert HOPS_GRID == (3, 5, 6, 8)

    def test_allowed_types_follow_question_type(self):
        assert allowed_types_for(QuestionType.FEATURE_IMPORTANCE) == DISEASE_TYPES
        assert allowed_types_for(QuestionType.MEDICATION) == MEDICATION_TYPES
        assert allowed_types_for(QuestionType.LAB_VALUE) == DISEASE_TYPES | LAB_TYPES


class TestConceptFeatures:
    def test_overlap_counts_distinct_shared_cuis(self, annotations):
        q = annotations.for_question("p001:t3:i10")
        s = annotations.for_sentence("c1.g1.d4")
        assert disease_overlap(q, s) == 1
        assert disease_overlap(q, annotations.for_sentence("c1.g2.d3")) == 0

    def test_overlap_respects_type_filter(self, annotations):
        q = annotations.for_question("p001:t4:glp-1-ra")
        s = annotations.for_sentence("c1.g2.d1")
        assert disease_overlap(q, s, MEDICATION_TYPES) == 1
        assert disease_overlap(q, s, DISEASE_TYPES) == 0

    def test_concept_codes_resolution(self, annotations, mapping):
        codes = concept_codes(annotations.for_sentence("c1.g2.d2"), mapping, DISEASE_TYPES)
        assert codes == {"84114007", "709044004"}

    def test_hop_sum_hand_values(self, graph):
        assert hop_sum(frozenset({"59621000"}), frozenset({"709044004"}), graph) == 5
        assert hop_sum(frozenset({"59621000"}), frozenset({"38341003", "709044004"}), graph) == 1
        assert (
            hop_sum(frozenset({"59621000", "44054006"}), frozenset({"38341003"}), graph)
            == 1 + 5
        )

    def test_hop_sum_undefined_cases(self, graph):
        assert hop_sum(frozenset(), frozenset({"x"}), graph) is None
        assert hop_sum(frozenset({"59621000"}), frozenset(), graph) is None
        assert hop_sum(frozenset({"59621000"}), frozenset({"703668003"}), graph) is None

    def test_unreachable_question_codes_contribute_nothing(self, graph):
        # 43396009 is absent from the graph; only the 59621000 term counts.
        got = hop_sum(frozenset({"59621000", "43396009"}), frozenset({"38341003"}), graph)
        assert got == 1

    def test_ancestor_count_proper_only(self, graph):
        q = frozenset({"59621000"})
        assert ancestor_count(q, frozenset({"38341003", "49601007"}), graph) == 2
        assert ancestor_count(q, frozenset({"59621000"}), graph) == 0
        assert ancestor_count(q, frozenset({"709044004"}), graph) == 0


class TestSemanticPrefilter:
    def test_cui_match_keeps_only_shared_concept_sentences(
        self, questions_p001, singleton_passages, annotations
    ):
        result = prefilter_semantic(
            questions_p001["p001:t3:i10"], singleton_passages, annotations
        )
        assert not result.passthrough
        assert _sids(result.passages) == {"c1.g1.d4"}

    def test_type_match_is_broader(self, questions_p001, singleton_passages, annotations):
        by_cui = prefilter_semantic(
            questions_p001["p001:t3:i10"], singleton_passages, annotations, match_on="cui"
        )
        by_type = prefilter_semantic(
            questions_p001["p001:t3:i10"], singleton_passages, annotations, match_on="type"
        )
        assert _sids(by_cui.passages) <= _sids(by_type.passages)
        # Every noun dsyn mention qualifies under type matching.
        assert "c1.g2.d2" in _sids(by_type.passages)

    def test_medication_question_matches_drug_mentions(
        self, questions_p001, singleton_passages, annotations
    ):
        result = prefilter_semantic(
            questions_p001["p001:t4:glp-1-ra"], singleton_passages, annotations
        )
        assert _sids(result.passages) == {"c1.g2.r1", "c1.g2.d1"}

    def test_unannotated_question_passes_through_with_warning(
        self, questions_p001, singleton_passages, annotations, caplog
    ):
        import logging

        bare = AnnotationSet([])
        with caplog.at_level(logging.WARNING, logger="cpgqa.augment"):
            result = prefilter_semantic(
                questions_p001["p001:t3:i10"], singleton_passages, bare
            )
        assert result.passthrough
        assert len(result.passages) == len(singleton_passages)
        assert result.warning and "p001:t3:i10" in result.warning

    def test_bad_match_mode_rejected(self, questions_p001, singleton_passages, annotations):
        with pytest.raises(ValueError):
            prefilter_semantic(
                questions_p001["p001:t3:i10"], singleton_passages, annotations, match_on="fuzzy"
            )

    def test_passage_kept_when_any_sentence_hits(self, questions_p001, corpus, annotations):
        # With the whole corpus in one passage, one matching sentence
        # rescues every sentence in it.
        whole = chunk_passages(corpus, max_tokens=512)
        assert len(whole) == 1
        result = prefilter_semantic(questions_p001["p001:t3:i10"], whole, annotations)
        assert len(result.passages) == 1


HOPS3_KEPT = {"c1.g1.r2", "c1.g1.d1", "c1.g1.d4", "c1.g2.r1", "c1.g2.d1", "c1.g2.d2"}
HOPS5_KEPT = HOPS3_KEPT | {"c2.g1.r2", "c2.g1.d3"}


class TestOntologyPrefilter:
    def test_three_hop_retention_set(self, questions_p001, singleton_passages, kb):
        result = prefilter_ontology(
            questions_p001["p001:t3:i10"], singleton_passages, kb.annotations,
            kb.graph, kb.mapping, max_hops=3,
        )
        assert _sids(result.passages) == HOPS3_KEPT

    def test_five_hop_adds_kidney_and_hypoglycemia_sentences(
        self, questions_p001, singleton_passages, kb
    ):
        result = prefilter_ontology(
            questions_p001["p001:t3:i10"], singleton_passages, kb.annotations,
            kb.graph, kb.mapping, max_hops=5,
        )
        assert _sids(result.passages) == HOPS5_KEPT

    def test_retention_grows_monotonically_over_grid(
        self, questions_p001, singleton_passages, kb
    ):
        kept = [
            _sids(
                prefilter_ontology(
                    questions_p001["p001:t3:i10"], singleton_passages, kb.annotations,
                    kb.graph, kb.mapping, max_hops=n,
                ).passages
            )
            for n in HOPS_GRID
        ]
        for smaller, larger in zip(kept, kept[1:]):
            assert smaller <= larger

    def test_ancestors_kept_regardless_of_hops(self, singleton_passages, kb, questions_p001):
        # A sentence mentioning only the cardiovascular parent concept
        # stays in even at the tightest threshold, because the parent is
        # an ancestor of the question concept.
        result = prefilter_ontology(
            questions_p001["p001:t3:i10"], singleton_passages, kb.annotations,
            kb.graph, kb.mapping, max_hops=1,
        )
        assert "c1.g2.r1" in _sids(result.passages)

    def test_hops_below_one_rejected(self, questions_p001, singleton_passages, kb):
        with pytest.raises(ValueError):
            prefilter_ontology(
                questions_p001["p001:t3:i10"], singleton_passages, kb.annotations,
                kb.graph, kb.mapping, max_hops=0,
            )

    def test_unmapped_question_passes_through(self, singleton_passages, kb, patients_by_id, ccs):
        # p002's questions carry no annotations at all.
        q = next(
            q for q in generate_questions(patients_by_id["p002"], ccs).questions
            if q.qtype == QuestionType.FEATURE_IMPORTANCE
        )
        result = prefilter_ontology(
            q, singleton_passages, kb.annotations, kb.graph, kb.mapping, max_hops=3
        )
        assert result.passthrough and result.warning


def _cand(pid, sid, conf):
    return AnswerCandidate(pid, sid, "t", conf, "s")


def _aug(pid, sid, conf, overlap=None, hops=None, ancestors=None):
    return AugmentedCandidate(
        candidate=_cand(pid, sid, conf),
        strategy="x",
        overlap_count=overlap,
        hop_sum=hops,
        ancestor_count=ancestors,
    )


class TestPostsort:
    def test_overlap_first_leads_with_overlap(self):
        cands = [
            _aug("p1", "s1", 0.9, overlap=0),
            _aug("p2", "s2", 0.2, overlap=3),
            _aug("p3", "s3", 0.5, overlap=3),
        ]
        got = postsort(cands, StrategyKind.POST_OVERLAP, SortOrder.OVERLAP_FIRST)
        assert [c.candidate.sentence_id for c in got] == ["s3", "s2", "s1"]

    def test_confidence_first_breaks_ties_with_overlap(self):
        cands = [
            _aug("p1", "s1", 0.5, overlap=0),
            _aug("p2", "s2", 0.5, overlap=2),
            _aug("p3", "s3", 0.9, overlap=0),
        ]
        got = postsort(cands, StrategyKind.POST_OVERLAP, SortOrder.CONFIDENCE_FIRST)
        assert [c.candidate.sentence_id for c in got] == ["s3", "s2", "s1"]

    def test_hops_first_puts_missing_last(self):
        cands = [
            _aug("p1", "s1", 0.9, hops=None, ancestors=0),
            _aug("p2", "s2", 0.1, hops=7, ancestors=0),
            _aug("p3", "s3", 0.5, hops=2, ancestors=0),
        ]
        got = postsort(cands, StrategyKind.POST_ONTOLOGY, SortOrder.HOPS_FIRST)
        assert [c.candidate.sentence_id for c in got] == ["s3", "s2", "s1"]

    def test_ancestors_first(self):
        cands = [
            _aug("p1", "s1", 0.9, hops=1, ancestors=0),
            _aug("p2", "s2", 0.1, hops=9, ancestors=2),
        ]
        got = postsort(cands, StrategyKind.POST_ONTOLOGY, SortOrder.ANCESTORS_FIRST)
        assert [c.candidate.sentence_id for c in got] == ["s2", "s1"]

    def test_wrong_family_rejected(self):
        with pytest.raises(ValueError):
            postsort([], StrategyKind.BASE, SortOrder.CONFIDENCE_FIRST)
        with pytest.raises(ValueError):
            postsort([], StrategyKind.POST_OVERLAP, SortOrder.HOPS_FIRST)

    @given(
        data=st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=1, allow_nan=False),
                st.integers(min_value=0, max_value=5),
                st.one_of(st.none(), st.integers(min_value=0, max_value=9)),
                st.integers(min_value=0, max_value=4),
            ),
            max_size=25,
        ),
        kind_order=st.sampled_from(
            [
                (StrategyKind.POST_OVERLAP, SortOrder.CONFIDENCE_FIRST),
                (StrategyKind.POST_OVERLAP, SortOrder.OVERLAP_FIRST),
                (StrategyKind.POST_ONTOLOGY, SortOrder.HOPS_FIRST),
                (StrategyKind.POST_ONTOLOGY, SortOrder.ANCESTORS_FIRST),
                (StrategyKind.POST_ONTOLOGY, SortOrder.CONFIDENCE_FIRST),
            ]
        ),
    )
    def test_postsort_is_a_deterministic_permutation(self, data, kind_order):
        kind, order = kind_order
        cands = [
            _aug(f"p{i}", f"s{i}", conf, overlap=ov, hops=hp, ancestors=anc)
            for i, (conf, ov, hp, anc) in enumerate(data)
        ]
        once = postsort(cands, kind, order)
        twice = postsort(list(reversed(cands)), kind, order)
        assert sorted(c.candidate.sentence_id for c in once) == sorted(
            c.candidate.sentence_id for c in cands
        )
        assert [c.candidate.sentence_id for c in once] == [
            c.candidate.sentence_id for c in twice
        ]


@pytest.fixture(scope="module")
def scorer(corpus):
    return LexicalScorer(corpus)


@pytest.fixture(scope="module")
def passages(corpus):
    return chunk_passages(corpus, max_tokens=48)


class TestAnswerQuestion:
    def test_summary_types_are_rejected(self, questions_p001, kb, scorer, passages):
        for qid in ("p001:t1", "p001:t2"):
            with pytest.raises(ContractError):
                answer_question(
                    questions_p001[qid], parse_strategy("base"), scorer, kb, passages
                )

    def test_base_strategy_is_plain_ranking(self, questions_p001, kb, scorer, passages):
        outcome = answer_question(
            questions_p001["p001:t3:i10"], parse_strategy("base"), scorer, kb, passages
        )
        assert outcome.reason is None
        assert outcome.candidates
        assert all(c.strategy == "base" for c in outcome.candidates)
        confs = [c.candidate.confidence for c in outcome.candidates]
        assert confs == sorted(confs, reverse=True)

    def test_prefilter_rechunks_with_fresh_ids(self, questions_p001, kb, scorer, passages):
        outcome = answer_question(
            questions_p001["p001:t3:i10"], parse_strategy("semantic"), scorer, kb, passages
        )
        assert outcome.candidates
        assert all(c.candidate.passage_id.startswith("f") for c in outcome.candidates)

    def test_passthrough_keeps_original_passages(self, kb, scorer, passages, patients_by_id, ccs):
        q = next(
            q for q in generate_questions(patients_by_id["p002"], ccs).questions
            if q.qtype == QuestionType.FEATURE_IMPORTANCE
        )
        outcome = answer_question(q, parse_strategy("semantic"), scorer, kb, passages)
        assert outcome.warnings
        assert all(not c.candidate.passage_id.startswith("f") for c in outcome.candidates)

    def test_filtered_all_reason(self, kb, scorer, passages, questions_p001):
        # A question annotated with a concept nothing in the corpus carries.
        q = questions_p001["p001:t3:i10"]
        alien = AnnotationSet(
            [
                ConceptAnnotation(
                    "C9999999", "martian flu", 0, 11, "dsyn", True, question_id=q.id
                )
            ]
        )
        kb_alien = KnowledgeBase(kb.corpus, alien, kb.graph, kb.mapping)
        outcome = answer_question(q, parse_strategy("semantic"), scorer, kb_alien, passages)
        assert outcome.candidates == ()
        assert outcome.reason == "filtered-all"

    def test_no_answer_reason_when_scorer_returns_nothing(self, questions_p001, kb, passages):
        class Mute:
            name = "mute"

            def score_passages(self, question, passages, top_k):
                return []

        outcome = answer_question(
            questions_p001["p001:t3:i10"], parse_strategy("base"), Mute(), kb, passages
        )
        assert outcome.candidates == ()
        assert outcome.reason == "no-answer"

    def test_overlap_candidates_carry_counts(self, questions_p001, kb, scorer, passages):
        outcome = answer_question(
            questions_p001["p001:t3:i10"],
            parse_strategy("overlap:overlap-first"),
            scorer, kb, passages,
        )
        assert all(c.overlap_count is not None for c in outcome.candidates)
        overlaps = [c.overlap_count for c in outcome.candidates]
        assert overlaps == sorted(overlaps, reverse=True)

    def test_ontosort_orders_by_hop_sum(self, questions_p001, kb, scorer, passages):
        outcome = answer_question(
            questions_p001["p001:t3:i10"],
            parse_strategy("ontosort:hops-first"),
            scorer, kb, passages,
        )
        defined = [c.hop_sum for c in outcome.candidates if c.hop_sum is not None]
        assert defined == sorted(defined)
        tail = [c.hop_sum for c in outcome.candidates[len(defined):]]
        assert all(h is None for h in tail)

    def test_hops_strategy_narrows_candidates(self, questions_p001, kb, scorer, corpus):
        # max_tokens=1 keeps the post-filter rechunk at one sentence per
        # passage, so the candidate set mirrors the retention set.
        passages = chunk_passages(corpus, max_tokens=1)
        base = answer_question(
            questions_p001["p001:t3:i10"], parse_strategy("base"), scorer, kb,
            passages, k=20, max_tokens=1,
        )
        hops3 = answer_question(
            questions_p001["p001:t3:i10"], parse_strategy("hops:3"), scorer, kb,
            passages, k=20, max_tokens=1,
        )
        base_sids = {c.candidate.sentence_id for c in base.candidates}
        hops3_sids = {c.candidate.sentence_id for c in hops3.candidates}
        assert hops3_sids == HOPS3_KEPT
        assert hops3_sids < base_sids

    def test_same_call_twice_is_identical(self, questions_p001, kb, scorer, passages):
        args = (questions_p001["p001:t4:glp-1-ra"], parse_strategy("semantic"), scorer, kb, passages)
        assert answer_question(*args) == answer_question(*args)
