import random
import string

import pytest
from hypothesis import given, settings, strategies as st

from mathcorpus import dedup as dd

from conftest import make_doc


def words(rng, n, pool=None):
    pool = pool or [f"w{i}" for i in range(50)]
    return " ".join(rng.choice(pool) for _ in range(n))


class TestExactDedup:
    def test_keeps_first_occurrence(self):
        a, b = make_doc("alpha text"), make_doc("beta text")
        a2 = make_doc("alpha text")
        assert list(dd.exact_dedup([a, b, a2])) == [a, b]

    def test_all_distinct_unchanged(self):
        docs = [make_doc(f"text {i}") for i in range(10)]
        assert list(dd.exact_dedup(docs)) == docs

    def test_idempotent(self):
        rng = random.Random(0)
        docs = [make_doc(words(rng, 5)) for _ in range(100)]
        once = list(dd.exact_dedup(docs))
        assert list(dd.exact_dedup(once)) == once

    def test_matches_quadratic_oracle(self):
        rng = random.Random(1)
        base = [words(rng, 6) for _ in range(200)]
        texts = base + rng.choices(base, k=100)  # planted duplicates
        rng.shuffle(texts)
        docs = [make_doc(t) for t in texts]
        survivors = [d.text for d in dd.exact_dedup(docs)]
        oracle = []
        for t in texts:
            if not any(t == prev for prev in oracle):
                oracle.append(t)
        assert survivors == oracle


class TestSimilarity:
    def test_identical_sets(self):
        s = dd.ShingleSet.from_text("a", words(random.Random(2), 30))
        assert dd.similarity_13gram(s, s, "jaccard") == 1.0
        assert dd.similarity_13gram(s, s, "containment") == 1.0

    def test_disjoint_sets(self):
        a = dd.ShingleSet.from_text("a", " ".join(f"a{i}" for i in range(20)))
        b = dd.ShingleSet.from_text("b", " ".join(f"b{i}" for i in range(20)))
        assert dd.similarity_13gram(a, b, "jaccard") == 0.0

    def test_short_text_has_empty_shingles(self):
        s = dd.ShingleSet.from_text("a", "only five tokens in here no wait seven")
        assert s.shingles == frozenset()
        t = dd.ShingleSet.from_text("b", words(random.Random(3), 30))
        assert dd.similarity_13gram(s, t, "jaccard") == 0.0

    def test_hand_enumerated_overlap(self):
        # 20-token texts sharing a contiguous 15-token span: each has 8
        # shingles, 3 of them shared, union 13
        shared = [f"s{i}" for i in range(15)]
        a = " ".join([f"p{i}" for i in range(5)] + shared)
        b = " ".join(shared + [f"q{i}" for i in range(5)])
        sa = dd.ShingleSet.from_text("a", a)
        sb = dd.ShingleSet.from_text("b", b)
        assert len(sa.shingles) == len(sb.shingles) == 8
        assert dd.similarity_13gram(sa, sb, "jaccard") == pytest.approx(3 / 13)
        assert dd.similarity_13gram(sa, sb, "containment") == pytest.approx(3 / 8)

    def test_shingle_count_bound(self):
        for n in (5, 13, 20, 40):
            s = dd.ShingleSet.from_text("x", " ".join(f"t{i}" for i in range(n)))
            assert len(s.shingles) <= max(0, s.token_count - 12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(0, 2 ** 31))
    def test_symmetric_and_bounded(self, seed_a, seed_b):
        a = dd.ShingleSet.from_text("a", words(random.Random(seed_a), 25))
        b = dd.ShingleSet.from_text("b", words(random.Random(seed_b), 25))
        for mode in ("jaccard", "containment"):
            s = dd.similarity_13gram(a, b, mode)
            assert s == dd.similarity_13gram(b, a, mode)
            assert 0.0 <= s <= 1.0
            if s == 1.0 and mode == "jaccard":
                assert a.shingles == b.shingles


def build_corpus_and_bench(n_docs=200, n_questions=20, seed=4):
    """Random docs, some with planted benchmark question overlap."""
    rng = random.Random(seed)
    pool = [f"tok{i}" for i in range(120)]
    questions = [(f"q{i}", words(rng, rng.randint(15, 25), pool))
                 for i in range(n_questions)]
    docs = []
    for i in range(n_docs):
        kind = rng.random()
        qid, qtext = rng.choice(questions)
        if kind < 0.1:  # verbatim containment
            text = words(rng, 10, pool) + " " + qtext + " " + words(rng, 10, pool)
        elif kind < 0.3:  # partial 13-gram overlap
            qtok = qtext.split()
            span = " ".join(qtok[: rng.randint(13, len(qtok))])
            text = words(rng, rng.randint(5, 30), pool) + " " + span
        else:
            text = words(rng, rng.randint(20, 60), pool)
        docs.append(make_doc(text))
    bench = dd.BenchmarkSet.from_texts("bench", questions)
    return docs, bench


def brute_force_removals(docs, bench, threshold, mode):
    removed = set()
    for doc in docs:
        for q in bench.questions:
            if q.text in doc.text:
                removed.add(doc.id)
                break
            ds = dd.ShingleSet.from_text(doc.id, doc.text)
            if dd.similarity_13gram(ds, q.shingles, mode) > threshold:
                removed.add(doc.id)
                break
    return removed


class TestDecontaminate:
    def test_verbatim_question_removed(self):
        bench = dd.BenchmarkSet.from_texts("b", [("q1", "what is two plus two")])
        doc = make_doc("intro text what is two plus two closing text")
        removed = []
        clean = list(dd.decontaminate([doc], bench, removed=removed))
        assert clean == []
        assert removed[0].reason == "exact"

    def test_disjoint_doc_retained(self):
        bench = dd.BenchmarkSet.from_texts(
            "b", [("q1", " ".join(f"q{i}" for i in range(20)))])
        doc = make_doc(" ".join(f"d{i}" for i in range(30)))
        assert list(dd.decontaminate([doc], bench)) == [doc]

    @pytest.mark.parametrize("mode", ["jaccard", "containment"])
    def test_index_matches_brute_force(self, mode):
        docs, bench = build_corpus_and_bench()
        removed = []
        clean = list(dd.decontaminate(docs, bench, 0.6, mode, use_index=True,
                                      removed=removed))
        removed_ids = {r.doc_id for r in removed}
        assert removed_ids == brute_force_removals(docs, bench, 0.6, mode)
        assert {d.id for d in clean} | removed_ids == {d.id for d in docs}

    def test_threshold_monotonicity(self):
        docs, bench = build_corpus_and_bench(seed=9)
        def removed_at(t):
            removed = []
            list(dd.decontaminate(docs, bench, t, removed=removed))
            return {r.doc_id for r in removed}
        assert removed_at(0.8) <= removed_at(0.6) <= removed_at(0.4)

    def test_strictly_greater_than_threshold(self):
        # containment exactly 3/8 must survive a threshold of 3/8
        shared = [f"s{i}" for i in range(15)]
        doc = make_doc(" ".join([f"p{i}" for i in range(5)] + shared))
        bench = dd.BenchmarkSet.from_texts(
            "b", [("q", " ".join(shared + [f"q{i}" for i in range(5)]))])
        assert list(dd.decontaminate([doc], bench, threshold=3 / 8)) == [doc]
        assert list(dd.decontaminate([doc], bench, threshold=0.374)) == []

    def test_bad_threshold_rejected(self):
        bench = dd.BenchmarkSet.from_texts("b", [("q", "text of a question")])
        with pytest.raises(ValueError):
            list(dd.decontaminate([], bench, threshold=0.0))


class TestCandidateIndex:
    def test_superset_property(self):
        docs, bench = build_corpus_and_bench(seed=11)
        index = dd.CandidateIndex.build(bench)
        for doc in docs:
            ds = dd.ShingleSet.from_text(doc.id, doc.text)
            candidates = index.query(ds)
            for q in bench.questions:
                if ds.shingles & q.shingles.shingles:
                    assert q.id in candidates

    def test_benchmark_file_round_trip(self, tmp_path):
        import json
        path = tmp_path / "bench.jsonl"
        qs = [{"id": "a", "text": "first question text"},
              {"id": "b", "text": "second question text"}]
        path.write_text("\n".join(json.dumps(q) for q in qs) + "\n")
        bench = dd.BenchmarkSet.from_file(str(path))
        assert [q.id for q in bench.questions] == ["a", "b"]

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            dd.BenchmarkSet.from_texts("b", [("q", "  ")])
