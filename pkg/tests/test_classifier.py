import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mathcorpus import classifier as clf
from mathcorpus.corpus import ConfigurationError

from conftest import make_doc

POS_VOCAB = ["integral", "derivative", "theorem", "matrix", "polynomial",
             "equation", "vertex", "modulus", "prime", "converge"]
NEG_VOCAB = ["recipe", "butter", "oven", "garlic", "simmer",
             "teaspoon", "whisk", "marinate", "dough", "saute"]

SMALL_BUCKETS = 50_000


def synthetic_corpus(n_pos, n_neg, seed=7):
    rng = random.Random(seed)
    pos = [make_doc(" ".join(rng.choices(POS_VOCAB, k=rng.randint(5, 15))))
           for _ in range(n_pos)]
    neg = [make_doc(" ".join(rng.choices(NEG_VOCAB, k=rng.randint(5, 15))))
           for _ in range(n_neg)]
    return pos, neg


@pytest.fixture(scope="module")
def trained_model():
    pos, neg = synthetic_corpus(200, 200)
    config = clf.ClassifierConfig(buckets=SMALL_BUCKETS, seed=3)
    return clf.train(pos, neg, config)


class TestConfig:
    def test_defaults_match_reference_hyperparameters(self):
        config = clf.ClassifierConfig()
        assert (config.dim, config.lr, config.word_ngrams, config.epochs) \
            == (50, 0.5, 2, 5)

    @pytest.mark.parametrize("kw", [{"dim": 0}, {"lr": 0.0}, {"lr": -1},
                                    {"word_ngrams": 0}, {"epochs": 0},
                                    {"buckets": 0}])
    def test_invalid_config_rejected(self, kw):
        with pytest.raises(ConfigurationError):
            clf.ClassifierConfig(**kw)


class TestTrain:
    def test_separable_corpus_high_holdout_accuracy(self, trained_model):
        hold_pos, hold_neg = synthetic_corpus(50, 50, seed=99)
        correct = sum(trained_model.score(d.text) > 0.5 for d in hold_pos)
        correct += sum(trained_model.score(d.text) < 0.5 for d in hold_neg)
        assert correct / 100 >= 0.95

    def test_two_document_corpus_trains(self):
        pos = [make_doc("integral of a function")]
        neg = [make_doc("butter in the oven")]
        model = clf.train(pos, neg, clf.ClassifierConfig(buckets=1000, seed=0))
        assert model.score(pos[0].text) > 0.5
        assert model.score(neg[0].text) < 0.5

    def test_empty_stream_rejected(self):
        with pytest.raises(ConfigurationError):
            clf.train([], [make_doc("x y")], clf.ClassifierConfig(buckets=10))

    def test_deterministic_training_identical_bytes(self):
        pos, neg = synthetic_corpus(30, 30)
        config = clf.ClassifierConfig(buckets=2000, seed=11)
        first = clf.model_bytes(clf.train(pos, neg, config))
        second = clf.model_bytes(clf.train(pos, neg, config))
        assert first == second


class TestScore:
    def test_empty_text_uniform_prior(self, trained_model):
        assert trained_model.score("") == 0.5

    def test_deterministic(self, trained_model):
        text = "the integral of the polynomial"
        assert trained_model.score(text) == trained_model.score(text)

    def test_score_in_unit_interval(self, trained_model):
        for text in ["integral theorem", "garlic dough", "mixed integral recipe"]:
            assert 0.0 <= trained_model.score(text) <= 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.text(max_size=100))
    def test_softmax_sums_to_one(self, text):
        pos, neg = synthetic_corpus(5, 5)
        model = clf.train(pos, neg, clf.ClassifierConfig(buckets=100, seed=1, epochs=1))
        probs = model.predict_proba(text)
        assert np.all(np.isfinite(probs))
        assert np.all((0 <= probs) & (probs <= 1))
        assert abs(probs.sum() - 1.0) < 1e-9


class TestFilterByScore:
    def test_threshold_zero_retains_all(self, trained_model):
        docs = [make_doc(f"doc {i} integral") for i in range(5)]
        assert list(clf.filter_by_score(docs, trained_model, 0.0)) == docs

    def test_threshold_one_retains_only_certain(self, trained_model):
        docs = [make_doc("integral theorem matrix")]
        out = list(clf.filter_by_score(docs, trained_model, 1.0))
        assert all(trained_model.score(d.text) >= 1.0 for d in out)

    def test_matches_per_document_scoring(self, trained_model):
        pos, neg = synthetic_corpus(20, 20, seed=5)
        docs = pos + neg
        expected = [d for d in docs if trained_model.score(d.text) >= 0.5]
        assert list(clf.filter_by_score(docs, trained_model, 0.5)) == expected

    def test_monotone_retention(self, trained_model):
        pos, neg = synthetic_corpus(15, 15, seed=8)
        docs = pos + neg
        lower = {d.id for d in clf.filter_by_score(docs, trained_model, 0.3)}
        higher = {d.id for d in clf.filter_by_score(docs, trained_model, 0.7)}
        assert higher <= lower

    def test_bad_threshold_rejected(self, trained_model):
        with pytest.raises(ConfigurationError):
            list(clf.filter_by_score([], trained_model, 1.5))


class TestSaveLoad:
    def test_round_trip_identical_scores(self, trained_model, tmp_path):
        path = tmp_path / "model.bin"
        clf.save_model(trained_model, str(path))
        loaded = clf.load_model(str(path))
        rng = random.Random(0)
        for _ in range(100):
            text = " ".join(rng.choices(POS_VOCAB + NEG_VOCAB, k=8))
            assert loaded.score(text) == trained_model.score(text)

    def test_corrupted_file_rejected(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"MCFT" + b"\x01\x00\x00\x00" + b"garbage")
        with pytest.raises(clf.ModelFormatError):
            clf.load_model(str(path))

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 100)
        with pytest.raises(clf.ModelFormatError):
            clf.load_model(str(path))

    def test_truncated_file_rejected(self, trained_model, tmp_path):
        path = tmp_path / "model.bin"
        clf.save_model(trained_model, str(path))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(clf.ModelFormatError):
            clf.load_model(str(path))

    def test_save_to_unwritable_path_raises(self, trained_model):
        with pytest.raises(OSError):
            clf.save_model(trained_model, "/nonexistent-dir/model.bin")


class TestFeatureHashing:
    def test_indices_in_range(self, trained_model):
        rng = random.Random(1)
        rows = trained_model.input_matrix.shape[0]
        for _ in range(50):
            text = " ".join(rng.choices(POS_VOCAB + NEG_VOCAB + ["zzz", "@#$"], k=10))
            idx = trained_model._feature_indices(text)
            assert all(0 <= i < rows for i in idx)
