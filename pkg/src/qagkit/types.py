"""Shared domain types and the highlight-token input encoding.

Every downstream module (dataset loading, pipeline, service) speaks in terms
of these types. All of them are immutable after construction and validate
their invariants eagerly, so a constructed value is always safe to share
across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

SUPPORTED_LANGUAGES = ("en", "de", "es", "fr", "it", "ja", "ko", "ru")

# Sentinel marking the target span inside a paragraph. Backends are trained
# against this literal; override only for backends trained with a different one.
DEFAULT_HIGHLIGHT_TOKEN = "<hl>"

DEFAULT_MAX_PARAGRAPH_CHARS = 2000


class OffsetOutOfRange(ValueError):
    """Span offsets fall outside the paragraph or are inverted."""


class EmptySpan(ValueError):
    """Span has zero width."""


@dataclass(frozen=True)
class QAPair:
    """One (question, answer) string pair, the unit of generation and evaluation."""

    question: str
    answer: str

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError("question must be non-empty after trimming")
        if not self.answer.strip():
            raise ValueError("answer must be non-empty after trimming")


@dataclass(frozen=True)
class QAPairSet:
    """Per-paragraph set of QA pairs.

    Order is preserved as produced or loaded, but no score may depend on it;
    an empty set is legal (a paragraph can yield zero pairs).
    """

    pairs: tuple[QAPair, ...]
    context_id: str

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class Paragraph:
    """A context paragraph with its language.

    ``max_chars`` caps the text length in Unicode scalar values (the core is
    tokenizer-agnostic, so the cap is character-based); pass ``None`` to lift
    the cap, e.g. when loading gold corpora with long contexts.
    """

    text: str
    language: str = "en"
    max_chars: int | None = field(default=DEFAULT_MAX_PARAGRAPH_CHARS, compare=False)

    def __post_init__(self):
        if self.language not in SUPPORTED_LANGUAGES:
            raise ValueError(
                f"unsupported language {self.language!r}, expected one of {SUPPORTED_LANGUAGES}"
            )
        if self.max_chars is not None and len(self.text) > self.max_chars:
            raise ValueError(
                f"paragraph length {len(self.text)} exceeds max of {self.max_chars} characters"
            )


@dataclass(frozen=True)
class HighlightedInput:
    """Paragraph text with exactly one span wrapped in highlight tokens.

    kind is "answer_highlight" for AE-style targets and "sentence_highlight"
    for QG-style targets.
    """

    text: str
    kind: str
    highlight_token: str = DEFAULT_HIGHLIGHT_TOKEN

    def __post_init__(self):
        if self.kind not in ("answer_highlight", "sentence_highlight"):
            raise ValueError(f"unknown highlight kind {self.kind!r}")
        n = self.text.count(self.highlight_token)
        if n != 2:
            raise ValueError(
                f"highlighted input must contain exactly two {self.highlight_token!r} tokens, found {n}"
            )

    @property
    def highlighted_span(self) -> str:
        """The text between the two highlight tokens, with the splice spaces removed."""
        first = self.text.index(self.highlight_token) + len(self.highlight_token)
        second = self.text.index(self.highlight_token, first)
        inner = self.text[first:second]
        # Construction puts one space inside each token; drop exactly those.
        if inner.startswith(" "):
            inner = inner[1:]
        if inner.endswith(" "):
            inner = inner[:-1]
        return inner


@dataclass(frozen=True)
class DecodingParams:
    """Decoding controls shared by every generation backend."""

    beam_size: int = 4
    top_p: float = 0.95  # 1.0 disables nucleus sampling
    max_output_length: int = 64

    def __post_init__(self):
        if not isinstance(self.beam_size, int) or self.beam_size < 1:
            raise ValueError(f"beam_size must be a positive integer, got {self.beam_size!r}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p!r}")
        if not isinstance(self.max_output_length, int) or self.max_output_length < 1:
            raise ValueError(
                f"max_output_length must be a positive integer, got {self.max_output_length!r}"
            )


def _check_span(text: str, start: int, end: int) -> None:
    if start == end:
        raise EmptySpan(f"span [{start}, {end}) is empty")
    if start < 0 or end > len(text) or start > end:
        raise OffsetOutOfRange(f"span [{start}, {end}) out of range for text of length {len(text)}")


def _splice(text: str, start: int, end: int, token: str) -> str:
    # The first token owns its trailing space and the second its leading one,
    # so stripping "token + space" / "space + token" recovers the source exactly.
    return f"{text[:start]}{token} {text[start:end]} {token}{text[end:]}"


def make_answer_highlight(
    p: Paragraph,
    span: tuple[int, int],
    highlight_token: str = DEFAULT_HIGHLIGHT_TOKEN,
) -> HighlightedInput:
    """Wrap the answer span of ``p`` in highlight tokens.

    ``span`` is a [start, end) pair of character offsets (Unicode scalar
    values, not bytes) into ``p.text``.
    """
    start, end = span
    _check_span(p.text, start, end)
    return HighlightedInput(
        text=_splice(p.text, start, end, highlight_token),
        kind="answer_highlight",
        highlight_token=highlight_token,
    )


def make_sentence_highlight(
    p: Paragraph,
    span: tuple[int, int],
    highlight_token: str = DEFAULT_HIGHLIGHT_TOKEN,
) -> HighlightedInput:
    """Wrap the sentence span of ``p`` in highlight tokens. Same splice contract
    as :func:`make_answer_highlight`."""
    start, end = span
    _check_span(p.text, start, end)
    return HighlightedInput(
        text=_splice(p.text, start, end, highlight_token),
        kind="sentence_highlight",
        highlight_token=highlight_token,
    )


def strip_highlight(text: str, highlight_token: str = DEFAULT_HIGHLIGHT_TOKEN) -> str:
    """Remove both highlight tokens and the splice spaces, recovering the source text."""
    first = text.find(highlight_token)
    if first < 0:
        return text
    out = text[:first] + text[first + len(highlight_token) :]
    # Token and its adjacent splice space: trailing for the first occurrence.
    if first < len(out) and out[first] == " ":
        out = out[:first] + out[first + 1 :]
    second = out.find(highlight_token)
    if second < 0:
        return out
    out = out[:second] + out[second + len(highlight_token) :]
    if second > 0 and out[second - 1] == " ":
        out = out[: second - 1] + out[second:]
    return out
