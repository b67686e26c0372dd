import random
from contextlib import contextmanager
from pathlib import Path

import pytest

from matra import text
from matra.corpus import EvalSegment, HEvalRecord, MetricScore, heval_target
from matra.lexstats import build_statistics, lm_train
from matra.resources import Resources
from matra.vectors import load_sentence_embeddings, load_word_vectors

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def train_sentences():
    with open(FIXTURES / "train_corpus.txt", encoding="utf-8") as fh:
        return [text.tokenize(line) for line in fh if line.strip()]


@pytest.fixture(scope="session")
def en_resources():
    """Small English resource bundle built from tests/fixtures."""
    sents = train_sentences()
    return Resources(
        stats=build_statistics(sents),
        lm=lm_train(sents, k=0.1),
        word_vectors=load_word_vectors(FIXTURES / "word_vectors.txt"),
        embeddings=load_sentence_embeddings(FIXTURES / "embeddings.jsonl"),
        stopwords_src=text.load_stopwords(FIXTURES / "stopwords_en.txt", "en"),
        stopwords_tgt=text.load_stopwords(FIXTURES / "stopwords_en.txt", "en"),
        stem_rules=text.load_stem_rules(FIXTURES / "stem_rules_en.tsv"),
        pos_lexicon=text.load_pos_lexicon(FIXTURES / "pos_lexicon_en.tsv"),
    )


def system_scores_fixture():
    """Per-segment scores whose per-system means are the system-level rows of
    tests/fixtures/system_means.tsv (two identical segments per system)."""
    with open(FIXTURES / "system_means.tsv", encoding="utf-8") as fh:
        metrics = fh.readline().rstrip("\n").split("\t")[1:]
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    segments, scores, expected = [], [], {}
    for i, (system, *values) in enumerate(rows):
        expected[system] = [float(v) for v in values]
        for j in range(2):
            sid = f"sm-{i}-{j}"
            segments.append(EvalSegment(sid, system, "agriculture", "src", "cand", "ref"))
            scores.extend(MetricScore(sid, m, float(v)) for m, v in zip(metrics, values))
    return segments, scores, metrics, expected


def correlation_fixture(per_system=6, seed=4):
    """Seven systems, HEval records and two noisy model scores per segment."""
    rnd = random.Random(seed)
    systems = ["Google Translate", "Bing Translate", "Devnagri MT System", "HimangY MT System",
               "DIBD Anuvad MT System", "Chat GPT", "AI4Bharat MT System"]
    segments, scores, records = [], [], []
    for i, system in enumerate(systems):
        for j in range(per_system):
            sid = f"hc-{i}-{j}"
            segments.append(EvalSegment(sid, system, "education", "src", "cand", "ref"))
            rec = HEvalRecord(sid, tuple(rnd.randint(0, 4) for _ in range(11)))
            records.append(rec)
            t = heval_target(rec)
            scores.append(MetricScore(sid, "MaTrA-1", round(min(1, max(0, t + rnd.gauss(0, 0.1))), 6)))
            scores.append(MetricScore(sid, "MaTrA-2", round(min(1, max(0, t + rnd.gauss(0, 0.05))), 6)))
    return segments, scores, records


# criterion number -> (title, passed); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record whether the block passes, then let any failure propagate.
    A criterion checked by several tests passes only if all of them do."""
    earlier = ACCEPTANCE.get(number, (title, True))[1]
    ACCEPTANCE[number] = (title, False)
    yield
    ACCEPTANCE[number] = (title, earlier)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
