"""Native baseline metrics (BLEU, chrF++, METEOR-lite, LEPOR-basic) and the
REKHA-style composite similarity scores.

Sentence-level functions take token lists; ``chrf`` takes raw strings because
it works on characters. Every score lies in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Sequence

from matra import text
from matra.corpus import EvalSegment, MetricScore
from matra.vectors import bag_cosine, cosine, sentence_embedding, sentence_vector

NATIVE_METRICS = ("BLEU", "chrF++", "METEOR-lite", "LEPOR")


# -- BLEU -------------------------------------------------------------------

def _bleu_stats(candidate, reference, max_n):
    """Per-order (clipped matches, candidate n-gram total)."""
    stats = []
    for n in range(1, max_n + 1):
        cand = Counter(text.ngrams(candidate, n))
        ref = Counter(text.ngrams(reference, n))
        matches = sum(min(c, ref[g]) for g, c in cand.items())
        stats.append((matches, max(len(candidate) - n + 1, 0)))
    return stats


def _bleu_from_stats(stats, cand_len, ref_len) -> float:
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n, (matches, total) in enumerate(stats, 1):
        if total == 0:
            # candidate shorter than n: order excluded
            continue
        if n == 1:
            if matches == 0:
                return 0.0
            p = matches / total
        else:
            p = (matches + 1) / (total + 1)
        log_sum += math.log(p)
        orders += 1
    bp = min(1.0, math.exp(1.0 - ref_len / cand_len))
    return bp * math.exp(log_sum / orders)


def bleu_sentence(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with add-one smoothing on orders >= 2."""
    return _bleu_from_stats(_bleu_stats(candidate, reference, max_n),
                            len(candidate), len(reference))


def bleu_corpus(pairs: Iterable[tuple[Sequence[str], Sequence[str]]], max_n: int = 4) -> float:
    """BLEU over pooled n-gram counts and lengths of (candidate, reference) pairs."""
    pooled = [[0, 0] for _ in range(max_n)]
    c_len = r_len = 0
    for cand, ref in pairs:
        for i, (m, t) in enumerate(_bleu_stats(cand, ref, max_n)):
            pooled[i][0] += m
            pooled[i][1] += t
        c_len += len(cand)
        r_len += len(ref)
    return _bleu_from_stats([tuple(p) for p in pooled], c_len, r_len)


# -- chrF++ -----------------------------------------------------------------

def _f_beta(p: float, r: float, beta: float) -> float:
    denom = beta * beta * p + r
    if denom == 0:
        return 0.0
    return (1 + beta * beta) * p * r / denom


def _order_f(cand_grams: Counter, ref_grams: Counter, beta: float):
    """F-score for one order, or None when neither side has n-grams."""
    c_total = sum(cand_grams.values())
    r_total = sum(ref_grams.values())
    if c_total == 0 and r_total == 0:
        return None
    overlap = sum((cand_grams & ref_grams).values())
    p = overlap / c_total if c_total else 0.0
    r = overlap / r_total if r_total else 0.0
    return _f_beta(p, r, beta)


def chrf(candidate_text: str, reference_text: str, char_n: int = 6, word_n: int = 2,
         beta: float = 2.0) -> float:
    """chrF++: mean F-beta over character orders 1..char_n and word orders 1..word_n.

    Whitespace is ignored for character n-grams; words come from ``tokenize``.
    """
    cand_chars = "".join(candidate_text.split())
    ref_chars = "".join(reference_text.split())
    cand_words = text.tokenize(candidate_text)
    ref_words = text.tokenize(reference_text)

    scores = []
    for n in range(1, char_n + 1):
        f = _order_f(Counter(text.ngrams(cand_chars, n)), Counter(text.ngrams(ref_chars, n)), beta)
        if f is not None:
            scores.append(f)
    for n in range(1, word_n + 1):
        f = _order_f(Counter(text.ngrams(cand_words, n)), Counter(text.ngrams(ref_words, n)), beta)
        if f is not None:
            scores.append(f)
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


# -- METEOR-lite ------------------------------------------------------------

def align_unigrams(candidate: Sequence[str], reference: Sequence[str],
                   stems: text.StemRules | None = None) -> list[tuple[int, int]]:
    """Greedy one-to-one alignment: exact matches, then stem matches.

    Each candidate token (left to right) takes the leftmost free reference
    token. Returns (candidate_index, reference_index) pairs sorted by
    candidate index.
    """
    used = set()
    pairs = {}
    stages = [lambda t: t]
    if stems is not None:
        stages.append(lambda t: text.stem(t, stems))
    for key in stages:
        ref_keys = [key(t) for t in reference]
        for i, tok in enumerate(candidate):
            if i in pairs:
                continue
            k = key(tok)
            for j, rk in enumerate(ref_keys):
                if j not in used and rk == k:
                    pairs[i] = j
                    used.add(j)
                    break
    return sorted(pairs.items())


def count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(candidate: Sequence[str], reference: Sequence[str],
                stems: text.StemRules | None = None, alpha: float = 0.9,
                beta_pen: float = 3.0, gamma: float = 0.5) -> float:
    alignment = align_unigrams(candidate, reference, stems)
    m = len(alignment)
    if m == 0:
        return 0.0
    p = m / len(candidate)
    r = m / len(reference)
    f = p * r / (alpha * p + (1 - alpha) * r)
    penalty = gamma * (count_chunks(alignment) / m) ** beta_pen
    return f * (1 - penalty)


# -- LEPOR ------------------------------------------------------------------

def nearest_alignment(candidate: Sequence[str], reference: Sequence[str]) -> list[tuple[int, int]]:
    """Align each candidate token to the free identical reference token whose
    relative position is closest; ties go to the earlier reference token."""
    c, r = len(candidate), len(reference)
    used = set()
    pairs = []
    for i, tok in enumerate(candidate):
        best = None
        for j, ref_tok in enumerate(reference):
            if j in used or ref_tok != tok:
                continue
            d = abs((i + 1) / c - (j + 1) / r)
            if best is None or d < best[0]:
                best = (d, j)
        if best is not None:
            used.add(best[1])
            pairs.append((i, best[1]))
    return pairs


def lepor_basic(candidate: Sequence[str], reference: Sequence[str], alpha: float = 1.0,
                beta: float = 1.0) -> float:
    c, r = len(candidate), len(reference)
    alignment = nearest_alignment(candidate, reference)
    if not alignment:
        return 0.0
    if c < r:
        lp = math.exp(1 - r / c)
    elif c > r:
        lp = math.exp(1 - c / r)
    else:
        lp = 1.0
    npd = sum(abs((i + 1) / c - (j + 1) / r) for i, j in alignment) / len(alignment)
    m = len(alignment)
    p, rec = m / c, m / r
    harmonic = (alpha + beta) / (alpha / rec + beta / p)
    return lp * math.exp(-npd) * harmonic


# -- REKHA composites -------------------------------------------------------

def segment_tokens(segment: EvalSegment) -> tuple[list[str], list[str], list[str]]:
    return (text.tokenize(segment.source_text), text.tokenize(segment.candidate_text),
            text.tokenize(segment.reference_text))


def pos_tags(segment: EvalSegment, side: str, tokens, lexicon: text.PosLexicon) -> list[str]:
    """Tags from the corpus when present, else the lexicon tagger."""
    tags = getattr(segment, f"{side}_pos")
    return list(tags) if tags is not None else text.pos_tag(tokens, lexicon)


def similarity_components(segment: EvalSegment, resources) -> dict[str, float]:
    """Candidate-vs-reference cosines: lexical, POS, stem, word vector and
    sentence embedding. All clamped below at 0."""
    _, cand, ref = segment_tokens(segment)
    rules = resources.stem_rules
    store = resources.word_vectors
    cand_emb = sentence_embedding(segment.segment_id, "candidate", resources.embeddings, store, cand)
    ref_emb = sentence_embedding(segment.segment_id, "reference", resources.embeddings, store, ref)
    comps = {
        "lexical": bag_cosine(cand, ref),
        "pos": bag_cosine(pos_tags(segment, "candidate", cand, resources.pos_lexicon),
                          pos_tags(segment, "reference", ref, resources.pos_lexicon)),
        "stem": bag_cosine([text.stem(t, rules) for t in cand], [text.stem(t, rules) for t in ref]),
        "word2vec": cosine(sentence_vector(cand, store), sentence_vector(ref, store)),
        "embedding": cosine(cand_emb, ref_emb),
    }
    return {k: max(0.0, v) for k, v in comps.items()}


def rekha1_from_components(lexical: float, stem: float, pos: float, word2vec: float) -> float:
    return (lexical + stem + pos + word2vec) / 4


def rekha2_from_components(rekha1: float, embedding: float) -> float:
    return (rekha1 + min(1.0, max(0.0, embedding))) / 2


def rekha1(segment: EvalSegment, resources) -> float:
    """Lexical/syntactic/semantic composite: mean of the lexical, stem, POS
    and word-vector cosines."""
    c = similarity_components(segment, resources)
    return rekha1_from_components(c["lexical"], c["stem"], c["pos"], c["word2vec"])


def rekha2(segment: EvalSegment, resources) -> float:
    c = similarity_components(segment, resources)
    r1 = rekha1_from_components(c["lexical"], c["stem"], c["pos"], c["word2vec"])
    return rekha2_from_components(r1, c["embedding"])


def score_segments(segments: Iterable[EvalSegment],
                   stems: text.StemRules | None = None) -> list[MetricScore]:
    """All native baselines for every segment, as metric-score records."""
    out = []
    for seg in segments:
        _, cand, ref = segment_tokens(seg)
        values = {
            "BLEU": bleu_sentence(cand, ref),
            "chrF++": chrf(seg.candidate_text, seg.reference_text),
            "METEOR-lite": meteor_lite(cand, ref, stems),
            "LEPOR": lepor_basic(cand, ref),
        }
        out.extend(MetricScore(seg.segment_id, name, values[name]) for name in NATIVE_METRICS)
    return out
