import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from matra.corpus import EvalSegment, load_corpus
from matra.features import (FEATURE_COLUMNS, FEATURE_NAMES, N_FEATURES, FeatureNormalization,
                            FeatureVector, apply_normalization, extract, feature_fingerprint,
                            fit_normalization, read_feature_table, write_feature_table)
from matra.lexstats import lm_score, quartile_fractions
from matra.text import tokenize
from matra.vectors import MissingEmbeddingError, SentenceEmbeddingProvider

from conftest import FIXTURES, GOLDEN


@pytest.fixture(scope="module")
def segments():
    return load_corpus(FIXTURES / "segments.jsonl")


def test_feature_order_golden():
    names = (GOLDEN / "feature_names.txt").read_text(encoding="utf-8").split()
    assert list(FEATURE_NAMES) == names
    assert N_FEATURES == 24
    assert FEATURE_COLUMNS[0] == "f1" and FEATURE_COLUMNS[-1] == "f24"


def test_fingerprint_is_stable():
    assert feature_fingerprint() == feature_fingerprint()
    assert len(feature_fingerprint()) == 16


def test_identity_segment(segments, en_resources):
    v = extract(segments[0], en_resources)
    for name in ("lexical_cosine", "pos_cosine", "stem_cosine", "word2vec_cosine",
                 "sent_embed_cosine", "rekha1", "rekha2", "bleu"):
        assert getattr(v, name) == 1.0, name
    assert v.content_words_reference == v.content_words_candidate == 3  # cat, sat, mat


def test_hand_worked_segment(segments, en_resources):
    # candidate "the dog sits" against reference "a dog sits ."
    seg = segments[1]
    v = extract(seg, en_resources)
    assert v.lexical_cosine == pytest.approx(2 / math.sqrt(12), abs=1e-12)
    # DT NN VB against DT NN VB UNK
    assert v.pos_cosine == pytest.approx(3 / math.sqrt(12), abs=1e-12)
    assert v.stem_cosine == pytest.approx(2 / math.sqrt(12), abs=1e-12)
    cand_mean = np.array([0.9, 0.9, 1.0]) / 3
    ref_mean = np.array([0.8, 0.8, 0.9]) / 2
    w2v = cand_mean @ ref_mean / (np.linalg.norm(cand_mean) * np.linalg.norm(ref_mean))
    assert v.word2vec_cosine == pytest.approx(w2v, abs=1e-12)
    assert v.sent_embed_cosine == pytest.approx(0.6, abs=1e-12)
    r1 = (2 / math.sqrt(12) * 2 + 3 / math.sqrt(12) + w2v) / 4
    assert v.rekha1 == pytest.approx(r1, abs=1e-12)
    assert v.rekha2 == pytest.approx((r1 + 0.6) / 2, abs=1e-12)
    # p1 = 2/3, p2 = (1+1)/(2+1), p3 = (0+1)/(1+1), no 4-grams; c = 3, r = 4
    bleu = math.exp(1 - 4 / 3) * (2 / 3 * 2 / 3 * 1 / 2) ** (1 / 3)
    assert v.bleu == pytest.approx(bleu, abs=1e-12)
    assert (v.content_words_reference, v.content_words_candidate,
            v.content_words_source) == (2, 2, 2)
    cand = tokenize(seg.candidate_text)
    assert v.lm_probability == lm_score(en_resources.lm, cand)
    for n, prefix in ((1, "unigram"), (2, "bigram"), (3, "trigram")):
        fr = quartile_fractions(cand, en_resources.stats, n)
        assert tuple(getattr(v, f"{prefix}_q{q}") for q in (1, 2, 3, 4)) == fr


def test_short_candidate_has_no_trigrams(segments, en_resources):
    v = extract(segments[2], en_resources)  # two-token candidate
    assert (v.trigram_q1, v.trigram_q2, v.trigram_q3, v.trigram_q4) == (0, 0, 0, 0)
    assert sum((v.bigram_q1, v.bigram_q2, v.bigram_q3, v.bigram_q4)) == pytest.approx(1.0)


def test_corpus_pos_tags_override_lexicon(segments, en_resources):
    seg = segments[2]
    assert seg.candidate_pos == ("NN", "VB")
    retagged = replace(seg, candidate_pos=("DT", "DT"))
    assert extract(retagged, en_resources).pos_cosine != extract(seg, en_resources).pos_cosine


def test_extract_is_pure(segments, en_resources):
    first = [extract(s, en_resources) for s in segments]
    second = [extract(s, en_resources) for s in reversed(segments)][::-1]
    assert first == second


def test_source_side_quartiles(segments, en_resources):
    src_res = replace(en_resources, quartile_side="source")
    seg = segments[3]
    v = extract(seg, src_res)
    fr = quartile_fractions(tokenize(seg.source_text), en_resources.stats, 1)
    assert (v.unigram_q1, v.unigram_q2, v.unigram_q3, v.unigram_q4) == fr
    with pytest.raises(ValueError):
        replace(en_resources, quartile_side="reference")


def test_missing_embedding_strict(en_resources):
    strict = replace(en_resources, embeddings=SentenceEmbeddingProvider(
        en_resources.embeddings.embeddings, fallback=False))
    with pytest.raises(MissingEmbeddingError):
        extract(EvalSegment("nope", "s", "d", "x", "cat", "cat"), strict)


rows = arrays(np.float64, (7, 5), elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=50)
@given(rows)
def test_normalization_standardizes(X):
    norm = fit_normalization(X)
    Z = apply_normalization(X, norm)
    assert np.all(np.abs(Z.mean(axis=0)) <= 1e-9)
    for j in range(X.shape[1]):
        if np.ptp(X[:, j]) > 1e-6 * max(1.0, np.abs(X[:, j]).max()):
            assert Z[:, j].var() == pytest.approx(1.0, abs=1e-9)


def test_normalization_single_vector():
    norm = fit_normalization([[3.0, -1.0]])
    np.testing.assert_array_equal(norm.std, [1.0, 1.0])
    np.testing.assert_array_equal(apply_normalization([3.0, -1.0], norm), [0.0, 0.0])
    with pytest.raises(ValueError):
        FeatureNormalization(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        fit_normalization(np.zeros((0, 3)))


def test_feature_table_round_trip(tmp_path, segments, en_resources):
    vecs = [extract(s, en_resources) for s in segments]
    path = tmp_path / "f.tsv"
    write_feature_table(path, segments, vecs, [0.1, 0.2, 0.3, 0.4])
    header = path.read_text(encoding="utf-8").splitlines()[0].split("\t")
    assert header == ["segment_id", "system_id", *FEATURE_COLUMNS, "target"]
    table = read_feature_table(path)
    assert table.segment_ids == ["s1", "s2", "s3", "s4"]
    assert table.system_ids == ["sysA", "sysA", "sysB", "sysB"]
    np.testing.assert_array_equal(table.X, np.array(vecs, dtype=float))
    np.testing.assert_array_equal(table.targets, [0.1, 0.2, 0.3, 0.4])

    write_feature_table(path, segments[:1], vecs[:1])
    assert read_feature_table(path).targets is None


def test_feature_table_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("segment_id\tsystem_id\tf2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        read_feature_table(path)


def test_feature_vector_is_a_tuple():
    v = FeatureVector(*range(24))
    assert v[9] == v.content_words_reference == 9
    assert len(v) == N_FEATURES
