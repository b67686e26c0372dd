"""Evaluation corpora, HEval human scores and external metric scores.

File layouts:

* segments, JSONL: one object per line with ``segment_id``, ``system_id``,
  ``domain_tag``, ``source_text``, ``candidate_text``, ``reference_text`` and
  optional ``candidate_pos`` / ``reference_pos`` tag lists;
* segments, TSV: the six text columns above in that order, no POS, no header;
* human scores, JSONL: ``{"segment_id": ..., "params": [11 ints in 0..4]}``;
* metric scores, TSV: ``segment_id<TAB>metric_name<TAB>score``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from matra.text import tokenize

SEGMENT_FIELDS = ("segment_id", "system_id", "domain_tag",
                  "source_text", "candidate_text", "reference_text")
HEVAL_PARAMS = 11
HEVAL_MAX = 4


class CorpusError(ValueError):
    """A corpus or score file violates its format; carries the line number."""

    def __init__(self, message: str, path=None, lineno: Optional[int] = None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(where + message)


class DuplicateSegmentError(CorpusError):
    pass


@dataclass(frozen=True)
class EvalSegment:
    segment_id: str
    system_id: str
    domain_tag: str
    source_text: str
    candidate_text: str
    reference_text: str
    candidate_pos: Optional[tuple[str, ...]] = None
    reference_pos: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not self.segment_id:
            raise ValueError("segment_id is empty")
        for name in ("source_text", "candidate_text", "reference_text"):
            if not getattr(self, name).strip():
                raise ValueError(f"segment {self.segment_id}: {name} is empty")
        for side in ("candidate", "reference"):
            tags = getattr(self, f"{side}_pos")
            if tags is None:
                continue
            tags = tuple(tags)
            object.__setattr__(self, f"{side}_pos", tags)
            n_tok = len(tokenize(getattr(self, f"{side}_text")))
            if len(tags) != n_tok:
                raise ValueError(f"segment {self.segment_id}: {side}_pos has {len(tags)} "
                                 f"tags for {n_tok} tokens")

    def to_json(self) -> dict:
        obj = {k: getattr(self, k) for k in SEGMENT_FIELDS}
        if self.candidate_pos is not None:
            obj["candidate_pos"] = list(self.candidate_pos)
        if self.reference_pos is not None:
            obj["reference_pos"] = list(self.reference_pos)
        return obj


@dataclass(frozen=True)
class HEvalRecord:
    segment_id: str
    params: tuple[int, ...]

    def __post_init__(self):
        params = tuple(self.params)
        object.__setattr__(self, "params", params)
        if len(params) != HEVAL_PARAMS:
            raise ValueError(f"segment {self.segment_id}: expected {HEVAL_PARAMS} "
                             f"HEval params, got {len(params)}")
        for p in params:
            if isinstance(p, bool) or not isinstance(p, int) or not 0 <= p <= HEVAL_MAX:
                raise ValueError(f"segment {self.segment_id}: HEval param {p!r} "
                                 f"outside integer range 0..{HEVAL_MAX}")


@dataclass(frozen=True)
class ExternalScoreRecord:
    segment_id: str
    metric_name: str
    score: float

    def __post_init__(self):
        if not self.metric_name:
            raise ValueError("metric_name is empty")


# Native metrics and model predictions use the same record type.
MetricScore = ExternalScoreRecord


def heval_target(record: HEvalRecord) -> float:
    """Mean of the 11 Likert scores rescaled from 0..4 to [0, 1]."""
    return sum(record.params) / (len(record.params) * HEVAL_MAX)


def _segment_from_json(obj) -> EvalSegment:
    if not isinstance(obj, dict):
        raise ValueError("expected a JSON object")
    missing = [k for k in SEGMENT_FIELDS if k not in obj]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    extra = set(obj) - set(SEGMENT_FIELDS) - {"candidate_pos", "reference_pos"}
    if extra:
        raise ValueError(f"unknown field(s): {', '.join(sorted(extra))}")
    for k in SEGMENT_FIELDS:
        if not isinstance(obj[k], str):
            raise ValueError(f"field {k} must be a string")
    return EvalSegment(**{k: obj[k] for k in SEGMENT_FIELDS},
                       candidate_pos=obj.get("candidate_pos"),
                       reference_pos=obj.get("reference_pos"))


def _nonblank_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def load_corpus(path, format: Optional[str] = None) -> list[EvalSegment]:
    """Load segments from a JSONL or TSV file, in file order.

    ``format`` defaults to the file extension (``.tsv`` means TSV, anything
    else JSONL). Raises :class:`CorpusError` with the offending line number.
    """
    path = Path(path)
    if format is None:
        format = "tsv" if path.suffix.lower() == ".tsv" else "jsonl"
    if format not in ("jsonl", "tsv"):
        raise ValueError(f"unknown corpus format {format!r}")

    segments = []
    first_line: dict[str, int] = {}
    for lineno, line in _nonblank_lines(path):
        try:
            if format == "jsonl":
                seg = _segment_from_json(json.loads(line))
            else:
                cols = line.split("\t")
                if len(cols) != len(SEGMENT_FIELDS):
                    raise ValueError(f"expected {len(SEGMENT_FIELDS)} tab-separated "
                                     f"fields, got {len(cols)}")
                seg = EvalSegment(*cols)
        except (ValueError, TypeError) as exc:
            raise CorpusError(str(exc), path, lineno) from None
        if seg.segment_id in first_line:
            raise DuplicateSegmentError(
                f"duplicate segment_id {seg.segment_id!r} (first seen on line "
                f"{first_line[seg.segment_id]})", path, lineno)
        first_line[seg.segment_id] = lineno
        segments.append(seg)
    return segments


def write_corpus(segments: Iterable[EvalSegment], path, format: str = "jsonl") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seg in segments:
            if format == "jsonl":
                fh.write(json.dumps(seg.to_json(), ensure_ascii=False) + "\n")
            elif format == "tsv":
                cols = [getattr(seg, k) for k in SEGMENT_FIELDS]
                if any("\t" in c or "\n" in c for c in cols):
                    raise ValueError(f"segment {seg.segment_id}: field contains a tab or newline")
                fh.write("\t".join(cols) + "\n")
            else:
                raise ValueError(f"unknown corpus format {format!r}")


def load_human_scores(path) -> dict[str, HEvalRecord]:
    records: dict[str, HEvalRecord] = {}
    for lineno, line in _nonblank_lines(path):
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict) or "segment_id" not in obj or "params" not in obj:
                raise ValueError("expected {\"segment_id\", \"params\"}")
            if not isinstance(obj["params"], list):
                raise ValueError("params must be a list")
            rec = HEvalRecord(obj["segment_id"], tuple(obj["params"]))
        except ValueError as exc:
            raise CorpusError(str(exc), path, lineno) from None
        if rec.segment_id in records:
            raise DuplicateSegmentError(f"duplicate segment_id {rec.segment_id!r}", path, lineno)
        records[rec.segment_id] = rec
    return records


def write_human_scores(records: Iterable[HEvalRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps({"segment_id": rec.segment_id, "params": list(rec.params)},
                                ensure_ascii=False) + "\n")


def load_external_scores(path) -> list[ExternalScoreRecord]:
    records = []
    for lineno, line in _nonblank_lines(path):
        cols = line.split("\t")
        if len(cols) != 3:
            raise CorpusError(f"expected 3 tab-separated fields, got {len(cols)}", path, lineno)
        try:
            score = float(cols[2])
        except ValueError:
            raise CorpusError(f"score {cols[2]!r} is not a number", path, lineno) from None
        if not math.isfinite(score):
            raise CorpusError(f"score {cols[2]!r} is not finite", path, lineno)
        try:
            records.append(ExternalScoreRecord(cols[0], cols[1], score))
        except ValueError as exc:
            raise CorpusError(str(exc), path, lineno) from None
    return records


def write_scores(records: Iterable[ExternalScoreRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(f"{rec.segment_id}\t{rec.metric_name}\t{float(rec.score)!r}\n")
