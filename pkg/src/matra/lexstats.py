"""N-gram frequency statistics, frequency quartiles and an add-k trigram LM.

Both tables serialize to one JSON artifact (``save_artifact``) laid out as::

    {
      "format": "matra-lexstats", "version": 1,
      "statistics": {"total_tokens": int,
                     "counts": {"1": [[[tok, ...], count], ...], "2": ..., "3": ...},
                     "cutoffs": {"1": [c1, c2, c3], ...}},
      "language_model": {"order": 3, "k": float, "vocabulary": [tok, ...],
                         "counts": [[[h1, h2, w], count], ...]}
    }

Count lists are sorted by n-gram so the file is byte-identical for the same
training corpus.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from matra.text import ngrams

ORDERS = (1, 2, 3)
QUARTILES = ("Q1", "Q2", "Q3", "Q4")

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

ARTIFACT_FORMAT = "matra-lexstats"
ARTIFACT_VERSION = 1


def nearest_rank(sorted_values: Sequence[int], pct: float) -> int:
    """Nearest-rank percentile: the value at rank round(pct * N), 1-based,
    clamped to [1, N]; halves round up."""
    n = len(sorted_values)
    rank = min(n, max(1, math.floor(pct * n + 0.5)))
    return sorted_values[rank - 1]


@dataclass(frozen=True)
class NgramStatistics:
    counts: dict[int, Counter]
    cutoffs: dict[int, tuple[int, int, int]]
    total_tokens: int

    def frequency(self, gram: tuple[str, ...]) -> int:
        return self.counts[len(gram)].get(gram, 0)


def build_statistics(corpus: Sequence[Sequence[str]]) -> NgramStatistics:
    if not corpus:
        raise ValueError("cannot build statistics from an empty corpus")
    counts = {n: Counter() for n in ORDERS}
    total = 0
    for tokens in corpus:
        total += len(tokens)
        for n in ORDERS:
            counts[n].update(ngrams(tokens, n))
    cutoffs = {}
    for n in ORDERS:
        freqs = sorted(counts[n].values())
        if freqs:
            cutoffs[n] = tuple(nearest_rank(freqs, p) for p in (0.25, 0.5, 0.75))
        else:
            cutoffs[n] = (0, 0, 0)
    return NgramStatistics(counts, cutoffs, total)


def quartile_of(freq: int, stats: NgramStatistics, n: int) -> str:
    """Map an n-gram corpus frequency to its quartile; unseen n-grams are Q1."""
    if freq < 0:
        raise ValueError("frequency must be non-negative")
    c1, c2, c3 = stats.cutoffs[n]
    if freq == 0 or freq <= c1:
        return "Q1"
    if freq <= c2:
        return "Q2"
    if freq <= c3:
        return "Q3"
    return "Q4"


def quartile_fractions(tokens: Sequence[str], stats: NgramStatistics,
                       n: int) -> tuple[float, float, float, float]:
    """Share of the sentence's n-grams in each frequency quartile.

    All zeros when the sentence has no n-gram of this order.
    """
    grams = ngrams(tokens, n)
    if not grams:
        return (0.0, 0.0, 0.0, 0.0)
    hits = Counter(quartile_of(stats.frequency(g), stats, n) for g in grams)
    return tuple(hits[q] / len(grams) for q in QUARTILES)


class LanguageModel:
    """Trigram model with add-k smoothing.

    Every training sentence is padded with two ``<s>`` and one ``</s>``.
    Predicted outcomes are the training vocabulary plus ``</s>`` and
    ``<unk>``; unknown words in scored text map to ``<unk>``.
    """

    order = 3

    def __init__(self, counts: Counter, vocabulary: Iterable[str], k: float):
        if not k > 0 or not math.isfinite(k):
            raise ValueError(f"smoothing constant k must be a positive real, got {k}")
        self.k = float(k)
        self.vocabulary = frozenset(vocabulary)
        self.counts = counts
        self.context_counts = Counter()
        for (h1, h2, _), c in counts.items():
            self.context_counts[(h1, h2)] += c
        # outcomes: words, </s>, <unk>
        self.outcomes = sorted(self.vocabulary | {EOS, UNK})

    def _map(self, token: str) -> str:
        return token if token in self.vocabulary else UNK

    def prob(self, word: str, context: tuple[str, str]) -> float:
        if word != EOS:
            word = self._map(word)
        context = tuple(t if t == BOS else self._map(t) for t in context)
        num = self.counts.get((*context, word), 0) + self.k
        den = self.context_counts.get(context, 0) + self.k * len(self.outcomes)
        return num / den

    def transitions(self, tokens: Sequence[str]) -> list[tuple[tuple[str, str], str]]:
        padded = [BOS, BOS, *tokens, EOS]
        return [((padded[i - 2], padded[i - 1]), padded[i]) for i in range(2, len(padded))]

    def log_prob(self, tokens: Sequence[str]) -> float:
        return sum(math.log(self.prob(w, h)) for h, w in self.transitions(tokens))


def lm_train(corpus: Sequence[Sequence[str]], k: float = 0.1) -> LanguageModel:
    if not corpus:
        raise ValueError("cannot train a language model on an empty corpus")
    if not k > 0:
        raise ValueError(f"smoothing constant k must be positive, got {k}")
    counts = Counter()
    vocab = set()
    for tokens in corpus:
        vocab.update(tokens)
        padded = [BOS, BOS, *tokens, EOS]
        counts.update(ngrams(padded, 3))
    return LanguageModel(counts, vocab, k)


def lm_score(model: LanguageModel, tokens: Sequence[str]) -> float:
    """Geometric mean of the per-token conditionals, ``</s>`` included."""
    steps = model.transitions(tokens)
    return math.exp(model.log_prob(tokens) / len(steps))


# -- serialization ----------------------------------------------------------

def _dump_counts(counter: Counter) -> list:
    return [[list(g), c] for g, c in sorted(counter.items())]


def _load_counts(items) -> Counter:
    return Counter({tuple(g): int(c) for g, c in items})


def artifact_to_json(stats: NgramStatistics, lm: LanguageModel) -> dict:
    return {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "statistics": {
            "total_tokens": stats.total_tokens,
            "counts": {str(n): _dump_counts(stats.counts[n]) for n in ORDERS},
            "cutoffs": {str(n): list(stats.cutoffs[n]) for n in ORDERS},
        },
        "language_model": {
            "order": lm.order,
            "k": lm.k,
            "vocabulary": sorted(lm.vocabulary),
            "counts": _dump_counts(lm.counts),
        },
    }


def save_artifact(stats: NgramStatistics, lm: LanguageModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(artifact_to_json(stats, lm), fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")


def load_artifact(path) -> tuple[NgramStatistics, LanguageModel]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != ARTIFACT_FORMAT:
        raise ValueError(f"{path}: not a {ARTIFACT_FORMAT} artifact")
    if obj.get("version") != ARTIFACT_VERSION:
        raise ValueError(f"{path}: unsupported artifact version {obj.get('version')!r}")
    st = obj["statistics"]
    stats = NgramStatistics(
        counts={n: _load_counts(st["counts"][str(n)]) for n in ORDERS},
        cutoffs={n: tuple(st["cutoffs"][str(n)]) for n in ORDERS},
        total_tokens=int(st["total_tokens"]),
    )
    lm_obj = obj["language_model"]
    if lm_obj.get("order") != 3:
        raise ValueError(f"{path}: only trigram models are supported")
    lm = LanguageModel(_load_counts(lm_obj["counts"]), lm_obj["vocabulary"], lm_obj["k"])
    return stats, lm
