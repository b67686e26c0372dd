"""Tokenization, n-grams, rule-based stemming, content-word filtering and
lexicon POS tagging.

All resources (stem rules, stopwords, POS lexicon) are plain text files so
that the pipeline can be pointed at any target language. Starter files for
Gujarati and English ship in ``matra/data``.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

Tokens = list[str]


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def is_punctuation(token: str) -> bool:
    """True when every character of ``token`` is a punctuation mark."""
    return bool(token) and all(_is_punct(ch) for ch in token)


def tokenize(text: str) -> Tokens:
    """Split ``text`` into tokens.

    The text is NFC-normalized and split on Unicode whitespace; every
    punctuation character (Unicode category P*) becomes a token of its own.
    Combining marks stay attached to their base letters, so Gujarati
    matras and viramas are never split off.
    """
    tokens: Tokens = []
    for chunk in unicodedata.normalize("NFC", text).split():
        buf = []
        for ch in chunk:
            if _is_punct(ch):
                if buf:
                    tokens.append("".join(buf))
                    buf = []
                tokens.append(ch)
            else:
                buf.append(ch)
        if buf:
            tokens.append("".join(buf))
    return tokens


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


@dataclass(frozen=True)
class StemRules:
    """Ordered (suffix, min_stem_length) pairs; the first applicable rule wins."""

    rules: tuple[tuple[str, int], ...]

    def __post_init__(self):
        for suffix, min_len in self.rules:
            if not suffix:
                raise ValueError("stem rule with empty suffix")
            if min_len < 1:
                raise ValueError(f"stem rule {suffix!r}: min_stem_length must be >= 1")


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]
    language: str = "und"

    def __post_init__(self):
        if any(not w for w in self.words):
            raise ValueError("stopword list contains an empty entry")
        object.__setattr__(self, "words", frozenset(w.casefold() for w in self.words))

    def __contains__(self, token: str) -> bool:
        return token.casefold() in self.words


@dataclass(frozen=True)
class PosLexicon:
    default_tag: str = "X"
    tags: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.default_tag:
            raise ValueError("POS lexicon needs a non-empty default tag")


def stem(token: str, rules: StemRules) -> str:
    """Strip at most one suffix: the first rule whose suffix matches and
    leaves a stem of at least ``min_stem_length`` characters."""
    for suffix, min_len in rules.rules:
        if token.endswith(suffix) and len(token) - len(suffix) >= min_len:
            return token[: len(token) - len(suffix)]
    return token


def content_words(tokens: Iterable[str], stopwords: StopwordList) -> Tokens:
    return [t for t in tokens if not is_punctuation(t) and t not in stopwords]


def pos_tag(tokens: Sequence[str], lexicon: PosLexicon) -> list[str]:
    return [lexicon.tags.get(t, lexicon.default_tag) for t in tokens]


# -- resource files ---------------------------------------------------------

def _lines(path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = unicodedata.normalize("NFC", line.rstrip("\r\n"))
            if line.strip() and not line.lstrip().startswith("#"):
                yield lineno, line


def load_stem_rules(path) -> StemRules:
    """Read ``suffix<TAB>min_stem_length`` lines."""
    rules = []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'suffix<TAB>min_stem_length'")
        try:
            min_len = int(parts[1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: min_stem_length is not an integer") from None
        rules.append((parts[0].strip(), min_len))
    return StemRules(tuple(rules))


def load_stopwords(path, language: str = "und") -> StopwordList:
    return StopwordList(frozenset(line.strip() for _, line in _lines(path)), language)


def load_pos_lexicon(path) -> PosLexicon:
    """Read ``token<TAB>tag`` lines; a ``DEFAULT<TAB>tag`` line sets the fallback."""
    default = None
    tags = {}
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1]:
            raise ValueError(f"{path}:{lineno}: expected 'token<TAB>tag'")
        if parts[0] == "DEFAULT":
            default = parts[1]
        else:
            tags[parts[0]] = parts[1]
    if default is None:
        raise ValueError(f"{path}: missing 'DEFAULT<TAB>tag' header")
    return PosLexicon(default, tags)


def bundled(name: str) -> Path:
    """Path of a starter resource shipped with the package."""
    return Path(str(resources.files("matra") / "data" / name))
