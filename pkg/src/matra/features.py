"""The 24-dimensional segment representation and z-score normalization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from matra import text
from matra.basemetrics import (bleu_sentence, rekha1_from_components, rekha2_from_components,
                               segment_tokens, similarity_components)
from matra.corpus import EvalSegment
from matra.lexstats import lm_score, quartile_fractions


class FeatureVector(NamedTuple):
    lexical_cosine: float
    pos_cosine: float
    stem_cosine: float
    word2vec_cosine: float
    sent_embed_cosine: float
    lm_probability: float
    rekha1: float
    rekha2: float
    bleu: float
    content_words_reference: int
    content_words_candidate: int
    content_words_source: int
    unigram_q1: float
    bigram_q1: float
    trigram_q1: float
    unigram_q2: float
    bigram_q2: float
    trigram_q2: float
    unigram_q3: float
    bigram_q3: float
    trigram_q3: float
    unigram_q4: float
    bigram_q4: float
    trigram_q4: float


FEATURE_NAMES: tuple[str, ...] = FeatureVector._fields
N_FEATURES = len(FEATURE_NAMES)
# File columns f1..f24 follow FEATURE_NAMES order.
FEATURE_COLUMNS = tuple(f"f{i}" for i in range(1, N_FEATURES + 1))


def feature_fingerprint() -> str:
    """Hash of the feature order; stored with models to catch reordering."""
    return hashlib.sha256("\n".join(FEATURE_NAMES).encode("utf-8")).hexdigest()[:16]


def extract(segment: EvalSegment, resources) -> FeatureVector:
    src, cand, ref = segment_tokens(segment)
    sims = similarity_components(segment, resources)
    r1 = rekha1_from_components(sims["lexical"], sims["stem"], sims["pos"], sims["word2vec"])

    quart_tokens = cand if resources.quartile_side == "candidate" else src
    # fractions[n] = (Q1, Q2, Q3, Q4)
    fractions = {n: quartile_fractions(quart_tokens, resources.stats, n) for n in (1, 2, 3)}
    by_quartile = [fractions[n][q] for q in range(4) for n in (1, 2, 3)]

    return FeatureVector(
        sims["lexical"],
        sims["pos"],
        sims["stem"],
        sims["word2vec"],
        sims["embedding"],
        lm_score(resources.lm, cand),
        r1,
        rekha2_from_components(r1, sims["embedding"]),
        bleu_sentence(cand, ref),
        len(text.content_words(ref, resources.stopwords_tgt)),
        len(text.content_words(cand, resources.stopwords_tgt)),
        len(text.content_words(src, resources.stopwords_src)),
        *by_quartile,
    )


@dataclass(frozen=True)
class FeatureNormalization:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("normalization mean/std must be 1-D arrays of equal length")
        if np.any(self.std <= 0):
            raise ValueError("normalization stddev entries must be positive")


def as_matrix(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def fit_normalization(vectors) -> FeatureNormalization:
    """Per-component mean and population stddev; constant components get stddev 1."""
    X = as_matrix(vectors)
    if X.shape[0] == 0:
        raise ValueError("cannot fit normalization on an empty set")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # test constancy exactly: the float mean of equal values can be off by an ulp
    constant = X.min(axis=0) == X.max(axis=0)
    mean[constant] = X[0, constant]
    std[constant | (std == 0)] = 1.0
    return FeatureNormalization(mean, std)


def apply_normalization(v, norm: FeatureNormalization) -> np.ndarray:
    return (np.asarray(v, dtype=np.float64) - norm.mean) / norm.std


# -- feature file -----------------------------------------------------------

@dataclass
class FeatureTable:
    segment_ids: list[str]
    system_ids: list[str]
    X: np.ndarray
    targets: Optional[np.ndarray] = None


def write_feature_table(path, segments: Sequence[EvalSegment], vectors: Sequence[FeatureVector],
                        targets: Optional[Sequence[float]] = None) -> None:
    header = ["segment_id", "system_id", *FEATURE_COLUMNS]
    if targets is not None:
        header.append("target")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for i, (seg, vec) in enumerate(zip(segments, vectors)):
            row = [seg.segment_id, seg.system_id, *(repr(float(x)) if isinstance(x, float)
                                                    else str(x) for x in vec)]
            if targets is not None:
                row.append(repr(float(targets[i])))
            fh.write("\t".join(row) + "\n")


def read_feature_table(path) -> FeatureTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        expected = ["segment_id", "system_id", *FEATURE_COLUMNS]
        if header[: len(expected)] != expected or header[len(expected):] not in ([], ["target"]):
            raise ValueError(f"{path}: unexpected feature header {header}")
        has_target = header[-1] == "target"
        seg_ids, sys_ids, rows, targets = [], [], [], []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cols)}")
            seg_ids.append(cols[0])
            sys_ids.append(cols[1])
            try:
                rows.append([float(x) for x in cols[2:2 + N_FEATURES]])
                if has_target:
                    targets.append(float(cols[-1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    X = np.array(rows, dtype=np.float64).reshape(len(rows), N_FEATURES)
    return FeatureTable(seg_ids, sys_ids, X, np.array(targets) if has_target else None)
