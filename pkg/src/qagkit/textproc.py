"""Language-aware sentence segmentation, metric tokenization, and
longest-common-substring computation.

Everything here is rule-based and documented bit-exactly: metric values must
be reproducible across implementations, so the tokenizer cannot hide any
model-specific behaviour.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from pathlib import Path

from .types import Paragraph

# Languages whose text is not space-delimited; tokenized per scalar value.
CHAR_TOKENIZED_LANGUAGES = ("ja", "ko")

ASCII_TERMINATORS = frozenset(".!?")
FULLWIDTH_TERMINATORS = frozenset("。！？")

DEFAULT_ABBREVIATIONS = frozenset(
    ["Mr.", "Mrs.", "Dr.", "St.", "No.", "vs.", "etc.", "e.g.", "i.e."]
)


@dataclass(frozen=True)
class SentenceSpan:
    """Character offsets [start, end) of one sentence inside a paragraph."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def slice(self, text: str) -> str:
        return text[self.start : self.end]


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """Read an abbreviation list, one abbreviation per line, UTF-8."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(line.strip() for line in lines if line.strip())


def _token_ending_at(text: str, i: int) -> str:
    """The maximal non-whitespace run ending at index i (inclusive)."""
    start = i
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start : i + 1]


def split_sentences(
    p: Paragraph,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> list[SentenceSpan]:
    """Split a paragraph into sentence spans.

    Terminators are ``. ! ?`` plus ``。！？`` for ja/ko. An ASCII terminator
    ends a sentence only when followed by whitespace or end-of-text and, for
    ``.``, when the token it closes is not a known abbreviation. Fullwidth
    terminators always end a sentence (CJK prose carries no space after
    them). Spans cover every non-whitespace character exactly once;
    whitespace-only input yields an empty list.
    """
    text = p.text
    fullwidth_active = p.language in CHAR_TOKENIZED_LANGUAGES
    spans: list[SentenceSpan] = []
    start: int | None = None
    for i, ch in enumerate(text):
        if start is None:
            if ch.isspace():
                continue
            start = i
        is_boundary = False
        if fullwidth_active and ch in FULLWIDTH_TERMINATORS:
            is_boundary = True
        elif ch in ASCII_TERMINATORS:
            followed_ok = i + 1 == len(text) or text[i + 1].isspace()
            if followed_ok:
                if ch == "." and _token_ending_at(text, i) in abbreviations:
                    is_boundary = False
                else:
                    is_boundary = True
        if is_boundary:
            spans.append(SentenceSpan(start, i + 1))
            start = None
    if start is not None:
        # Trailing text without a terminator still forms a sentence.
        end = len(text)
        while text[end - 1].isspace():
            end -= 1
        spans.append(SentenceSpan(start, end))
    return spans


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize_for_metrics(text: str, language: str = "en") -> list[str]:
    """Tokenize for BLEU/ROUGE-style metrics.

    Space-delimited languages: lowercase, split on Unicode whitespace, strip
    leading/trailing punctuation from each token, drop tokens that become
    empty. ja/ko: one token per non-whitespace Unicode scalar value.
    """
    if language in CHAR_TOKENIZED_LANGUAGES:
        return [ch for ch in text if not ch.isspace()]
    tokens = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


def longest_common_substring_len(q: str, p: str) -> int:
    """Length (in Unicode scalar values) of the longest contiguous substring
    of ``q`` that occurs in ``p``; 0 if either string is empty.

    Dynamic programming over scalar values, O(|q|*|p|) time and O(min) space.
    """
    if not q or not p:
        return 0
    # Roll the table over the shorter string.
    a, b = (q, p) if len(q) <= len(p) else (p, q)
    prev = [0] * (len(a) + 1)
    best = 0
    for ch_b in b:
        cur = [0] * (len(a) + 1)
        for j, ch_a in enumerate(a, start=1):
            if ch_b == ch_a:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best
