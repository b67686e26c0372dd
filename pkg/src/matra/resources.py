"""The bundle of linguistic resources needed to score a segment."""

from __future__ import annotations

from dataclasses import dataclass, field

from matra import text
from matra.lexstats import LanguageModel, NgramStatistics, load_artifact
from matra.vectors import (SentenceEmbeddingProvider, WordVectorStore,
                           load_sentence_embeddings, load_word_vectors)


@dataclass(frozen=True)
class Resources:
    stats: NgramStatistics
    lm: LanguageModel
    word_vectors: WordVectorStore
    stopwords_src: text.StopwordList
    stopwords_tgt: text.StopwordList
    stem_rules: text.StemRules
    pos_lexicon: text.PosLexicon
    embeddings: SentenceEmbeddingProvider = field(default_factory=SentenceEmbeddingProvider)
    # "candidate" (default) or "source"
    quartile_side: str = "candidate"

    def __post_init__(self):
        if self.quartile_side not in ("candidate", "source"):
            raise ValueError(f"quartile_side must be 'candidate' or 'source', "
                             f"got {self.quartile_side!r}")


def load_resources(stats_path, word_vectors=None, embeddings=None, stopwords_src=None,
                   stopwords_tgt=None, stem_rules=None, pos_lexicon=None,
                   embedding_fallback=True, quartile_side="candidate") -> Resources:
    """Load every resource from disk; omitted text resources use the bundled
    English (source side) and Gujarati (target side) starter files."""
    stats, lm = load_artifact(stats_path)
    store = load_word_vectors(word_vectors) if word_vectors else WordVectorStore(1)
    if embeddings:
        provider = load_sentence_embeddings(embeddings, fallback=embedding_fallback)
    else:
        provider = SentenceEmbeddingProvider(fallback=embedding_fallback)
    return Resources(
        stats=stats,
        lm=lm,
        word_vectors=store,
        embeddings=provider,
        stopwords_src=text.load_stopwords(stopwords_src or text.bundled("stopwords_en.txt"), "en"),
        stopwords_tgt=text.load_stopwords(stopwords_tgt or text.bundled("stopwords_gu.txt"), "gu"),
        stem_rules=text.load_stem_rules(stem_rules or text.bundled("stem_rules_gu.tsv")),
        pos_lexicon=text.load_pos_lexicon(pos_lexicon or text.bundled("pos_lexicon_gu.tsv")),
        quartile_side=quartile_side,
    )
