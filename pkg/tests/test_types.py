from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from qagkit.types import (
    DecodingParams,
    EmptySpan,
    HighlightedInput,
    OffsetOutOfRange,
    Paragraph,
    QAPair,
    QAPairSet,
    make_answer_highlight,
    make_sentence_highlight,
    strip_highlight,
)

TURNER = (
    "William Turner was an English painter who specialised in watercolour landscapes."
)


def test_answer_highlight_mid_paragraph():
    h = make_answer_highlight(Paragraph("AB CD"), (3, 5))
    assert h.text == "AB <hl> CD <hl>"
    assert h.kind == "answer_highlight"


def test_answer_highlight_at_start():
    h = make_answer_highlight(Paragraph(TURNER), (0, len("William Turner")))
    assert h.text.startswith("<hl> William Turner <hl> was an English painter")


def test_empty_span_rejected():
    with pytest.raises(EmptySpan):
        make_answer_highlight(Paragraph("AB"), (0, 0))


def test_offsets_out_of_range():
    with pytest.raises(OffsetOutOfRange):
        make_answer_highlight(Paragraph("AB"), (0, 3))
    with pytest.raises(OffsetOutOfRange):
        make_sentence_highlight(Paragraph("AB"), (-1, 2))


def test_sentence_highlight_second_sentence():
    h = make_sentence_highlight(Paragraph("S1. S2."), (4, 7))
    assert h.text == "S1. <hl> S2. <hl>"
    assert h.kind == "sentence_highlight"


def test_sentence_highlight_first_sentence():
    h = make_sentence_highlight(Paragraph("S1. S2."), (0, 3))
    assert h.text == "<hl> S1. <hl> S2."


def test_sentence_highlight_empty_paragraph():
    # An empty paragraph admits no valid span at all.
    with pytest.raises((OffsetOutOfRange, EmptySpan)):
        make_sentence_highlight(Paragraph(""), (0, 1))


def test_highlighted_span_property():
    h = make_answer_highlight(Paragraph(TURNER), (0, 14))
    assert h.highlighted_span == "William Turner"


def test_exactly_two_tokens():
    with pytest.raises(ValueError):
        HighlightedInput(text="no tokens here", kind="answer_highlight")
    with pytest.raises(ValueError):
        HighlightedInput(text="<hl> a <hl> b <hl>", kind="answer_highlight")


def test_custom_highlight_token():
    h = make_answer_highlight(Paragraph("AB CD"), (3, 5), highlight_token="[HL]")
    assert h.text == "AB [HL] CD [HL]"
    assert strip_highlight(h.text, highlight_token="[HL]") == "AB CD"


@given(st.text(min_size=1, max_size=60).filter(lambda t: "<hl>" not in t), st.data())
def test_round_trip_recovers_source(text, data):
    start = data.draw(st.integers(min_value=0, max_value=len(text) - 1))
    end = data.draw(st.integers(min_value=start + 1, max_value=len(text)))
    for maker in (make_answer_highlight, make_sentence_highlight):
        h = maker(Paragraph(text, max_chars=None), (start, end))
        assert h.text.count("<hl>") == 2
        assert strip_highlight(h.text) == text


def test_qapair_rejects_blank_fields():
    with pytest.raises(ValueError):
        QAPair(question="  ", answer="a")
    with pytest.raises(ValueError):
        QAPair(question="q", answer="")


def test_qapairset_may_be_empty():
    s = QAPairSet((), context_id="ctx")
    assert len(s) == 0


def test_paragraph_language_and_length():
    with pytest.raises(ValueError):
        Paragraph("hi", language="xx")
    with pytest.raises(ValueError):
        Paragraph("x" * 2001)
    assert Paragraph("x" * 2001, max_chars=None).text  # cap is configurable
    Paragraph("これはペンです。", language="ja")


def test_decoding_params_ranges():
    p = DecodingParams()
    assert (p.beam_size, p.top_p, p.max_output_length) == (4, 0.95, 64)
    with pytest.raises(ValueError):
        DecodingParams(beam_size=0)
    with pytest.raises(ValueError):
        DecodingParams(top_p=0.0)
    with pytest.raises(ValueError):
        DecodingParams(top_p=1.2)
    with pytest.raises(ValueError):
        DecodingParams(max_output_length=0)
    DecodingParams(top_p=1.0)  # 1.0 disables nucleus sampling
