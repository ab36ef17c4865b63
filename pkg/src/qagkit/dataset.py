"""Load, validate, and write QG-Bench-format datasets.

The on-disk format is JSON-Lines, one record object per line, UTF-8, with
exactly these keys: paragraph, sentence, question, answer, paragraph_answer,
paragraph_sentence. Unknown keys are ignored on load.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .types import DEFAULT_HIGHLIGHT_TOKEN, Paragraph, QAPair, QAPairSet

REQUIRED_COLUMNS = (
    "paragraph",
    "sentence",
    "question",
    "answer",
    "paragraph_answer",
    "paragraph_sentence",
)

SPLIT_NAMES = ("train", "validation", "test")


class DatasetError(Exception):
    pass


class MalformedLine(DatasetError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class MissingColumn(DatasetError):
    def __init__(self, name: str, line_no: int):
        super().__init__(f"line {line_no}: missing column {name!r}")
        self.name = name
        self.line_no = line_no


class InvariantViolation(DatasetError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    """One QG-Bench row.

    The answer and sentence must be contiguous substrings of the paragraph,
    and each highlighted column must contain the highlight token exactly
    twice.
    """

    paragraph: str
    sentence: str
    question: str
    answer: str
    paragraph_answer: str
    paragraph_sentence: str

    def validate(self, highlight_token: str = DEFAULT_HIGHLIGHT_TOKEN) -> None:
        if not self.question.strip():
            raise ValueError("question is empty")
        if not self.answer.strip():
            raise ValueError("answer is empty")
        if self.answer not in self.paragraph:
            raise ValueError("answer is not a contiguous substring of paragraph")
        if self.sentence not in self.paragraph:
            raise ValueError("sentence is not a contiguous substring of paragraph")
        for column in ("paragraph_answer", "paragraph_sentence"):
            n = getattr(self, column).count(highlight_token)
            if n != 2:
                raise ValueError(f"{column} contains {n} {highlight_token!r} tokens, expected 2")


@dataclass
class DatasetSplit:
    """A named list of validated records; ``skipped`` counts lines dropped in lenient mode."""

    name: str
    records: list[DatasetRecord]
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.name not in SPLIT_NAMES:
            raise ValueError(f"split name must be one of {SPLIT_NAMES}, got {self.name!r}")

    def __len__(self) -> int:
        return len(self.records)


def _resolve_path(path: str | Path, split: str) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / f"{split}.jsonl"
    if not p.exists():
        raise FileNotFoundError(f"dataset file not found: {p}")
    return p


def load_dataset(
    path: str | Path,
    split: str = "train",
    lenient: bool = False,
    highlight_token: str = DEFAULT_HIGHLIGHT_TOKEN,
) -> DatasetSplit:
    """Load one split from ``path`` (a JSONL file, or a directory holding
    ``{split}.jsonl``).

    Invalid lines fail the whole load by default; with ``lenient`` they are
    skipped and counted on the returned split instead.
    """
    file_path = _resolve_path(path, split)
    records: list[DatasetRecord] = []
    skipped = 0
    with file_path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(_parse_line(line, line_no, highlight_token))
            except DatasetError:
                if not lenient:
                    raise
                skipped += 1
    return DatasetSplit(name=split, records=records, skipped=skipped)


def _parse_line(line: str, line_no: int, highlight_token: str) -> DatasetRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "line is not a JSON object")
    for column in REQUIRED_COLUMNS:
        if column not in obj:
            raise MissingColumn(column, line_no)
        if not isinstance(obj[column], str):
            raise MalformedLine(line_no, f"column {column!r} is not a string")
    record = DatasetRecord(**{column: obj[column] for column in REQUIRED_COLUMNS})
    try:
        record.validate(highlight_token)
    except ValueError as exc:
        raise InvariantViolation(line_no, str(exc)) from exc
    return record


def write_dataset(split: DatasetSplit, path: str | Path) -> None:
    """Write records as JSONL with the exact schema keys; load(write(x)) == x."""
    p = Path(path)
    with p.open("w", encoding="utf-8") as fh:
        for record in split.records:
            row = {column: getattr(record, column) for column in REQUIRED_COLUMNS}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def context_id_for(paragraph_text: str) -> str:
    """Stable content-derived id, so gold and generated groups line up."""
    return "ctx-" + hashlib.sha1(paragraph_text.encode("utf-8")).hexdigest()[:16]


def group_by_paragraph(
    split: DatasetSplit, language: str = "en"
) -> list[tuple[Paragraph, QAPairSet]]:
    """Group records into per-paragraph QA pair sets.

    Paragraph identity is exact string equality (no normalization — that
    would silently merge distinct contexts). Pair order follows record
    order; group order follows first occurrence. The paragraph length cap is
    lifted here since gold corpora may carry long contexts.
    """
    grouped: dict[str, list[QAPair]] = {}
    for record in split.records:
        grouped.setdefault(record.paragraph, []).append(
            QAPair(question=record.question, answer=record.answer)
        )
    return [
        (
            Paragraph(text=text, language=language, max_chars=None),
            QAPairSet(tuple(pairs), context_id=context_id_for(text)),
        )
        for text, pairs in grouped.items()
    ]


def pairs_per_paragraph(groups: list[tuple[Paragraph, QAPairSet]]) -> float:
    """Arithmetic mean of pairs per paragraph group."""
    if not groups:
        raise EmptyInput("no paragraph groups")
    return math.fsum(len(pair_set) for _, pair_set in groups) / len(groups)
