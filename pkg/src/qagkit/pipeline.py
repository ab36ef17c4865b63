"""Two-stage QA generation: answer extraction over every sentence, then
question generation per extracted answer, over a pluggable backend.

Backends are anything implementing :class:`GenerationBackend`; the package
ships a deterministic stub (tests, offline demos) and an HTTP client for
real model servers. Also covers the answer-given mode where the caller pins
the answer and only a question is generated.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import requests

from .dataset import context_id_for
from .metrics import lexical_overlap_score
from .textproc import split_sentences
from .types import DecodingParams, Paragraph, QAPair, QAPairSet, make_answer_highlight, make_sentence_highlight


class BackendError(RuntimeError):
    """Transport or protocol failure talking to a generation backend."""

    def __init__(self, message: str, status: int | None = None, timeout: bool = False):
        super().__init__(message)
        self.status = status
        self.timeout = timeout


class NoSentences(ValueError):
    """The paragraph contains no sentences to extract answers from."""


class AnswerNotInParagraph(ValueError):
    """The pinned answer does not occur in the paragraph."""


class EmptyGeneration(RuntimeError):
    """The backend produced an empty question."""


class GenerationBackend(Protocol):
    """Text-in/text-out generation interface.

    ``generate`` must return one output per input, in input order.
    """

    name: str
    language: str

    def generate(self, inputs: list[str], params: DecodingParams) -> list[str]: ...


class PerplexityScorer(Protocol):
    """Optional fluency scorer; lower is better. Plugged in externally."""

    def score(self, texts: list[str]) -> list[float]: ...


@dataclass(frozen=True)
class PairDiagnostics:
    source_sentence_index: int
    overlap_score: float
    perplexity: float | None = None


@dataclass
class QAGResult:
    """Generated pairs plus per-pair diagnostics (aligned by index) and
    counters for candidates dropped along the way."""

    pairs: QAPairSet
    diagnostics: tuple[PairDiagnostics, ...]
    dropped: dict[str, int] = field(default_factory=dict)


HL = "<hl>"


def _between_highlights(text: str) -> str:
    first = text.find(HL)
    if first < 0:
        return text
    start = first + len(HL)
    second = text.find(HL, start)
    if second < 0:
        return text
    inner = text[start:second]
    if inner.startswith(" "):
        inner = inner[1:]
    if inner.endswith(" "):
        inner = inner[:-1]
    return inner


def _tokens_with_offsets(text: str) -> list[tuple[int, int]]:
    offsets = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < len(text) and not text[j].isspace():
            j += 1
        offsets.append((i, j))
        i = j
    return offsets


class StubBackend:
    """Deterministic test double for AE and QG roles.

    AE: from the highlighted sentence, return the longest maximal run of
    tokens that are capitalized words or digit strings (first such run on
    ties); if there is none, the sentence's first token. QG: parse the
    highlighted answer A and return "What is mentioned in the text: A?".
    Ignores decoding parameters entirely, so output is a pure function of
    the inputs.
    """

    def __init__(self, role: str, language: str = "en"):
        if role not in ("ae", "qg"):
            raise ValueError(f"stub role must be 'ae' or 'qg', got {role!r}")
        self.role = role
        self.name = f"stub-{role}"
        self.language = language

    def generate(self, inputs: list[str], params: DecodingParams) -> list[str]:
        if self.role == "ae":
            return [self._extract(text) for text in inputs]
        return [f"What is mentioned in the text: {_between_highlights(text)}?" for text in inputs]

    @staticmethod
    def _extract(text: str) -> str:
        sentence = _between_highlights(text)
        offsets = _tokens_with_offsets(sentence)
        if not offsets:
            return ""

        def qualifies(tok: str) -> bool:
            return tok.isdigit() or (tok[0].isupper() and tok.isalpha())

        best: tuple[int, int] | None = None  # token index range [i, j)
        best_len = 0
        i = 0
        while i < len(offsets):
            if qualifies(sentence[offsets[i][0] : offsets[i][1]]):
                j = i
                while j < len(offsets) and qualifies(sentence[offsets[j][0] : offsets[j][1]]):
                    j += 1
                if j - i > best_len:
                    best, best_len = (i, j), j - i
                i = j
            else:
                i += 1
        if best is None:
            start, end = offsets[0]
        else:
            start, end = offsets[best[0]][0], offsets[best[1] - 1][1]
        return sentence[start:end]


def stub_backend(role: str, language: str = "en") -> StubBackend:
    """Deterministic stub backend for the given role ('ae' or 'qg')."""
    return StubBackend(role, language)


class HttpBackend:
    """Client for a generation server speaking the POST /generate protocol.

    Request: {"inputs": [str], "beam_size": int, "top_p": float,
    "max_length": int}; response: {"outputs": [str]} with one output per
    input. Transport errors and 5xx responses are retried up to
    ``max_attempts`` times with exponential backoff; a response with the
    wrong output count is a protocol error and not retried.
    """

    def __init__(
        self,
        endpoint: str,
        auth: str | None = None,
        language: str = "en",
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 0.25,
        batch_size: int = 32,
    ):
        self.url = endpoint if endpoint.endswith("/generate") else endpoint.rstrip("/") + "/generate"
        self.name = f"http:{endpoint}"
        self.language = language
        self.auth = auth
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.batch_size = batch_size

    def generate(self, inputs: list[str], params: DecodingParams) -> list[str]:
        outputs: list[str] = []
        for i in range(0, len(inputs), self.batch_size):
            outputs.extend(self._call(inputs[i : i + self.batch_size], params))
        return outputs

    def _call(self, batch: list[str], params: DecodingParams) -> list[str]:
        body = {
            "inputs": batch,
            "beam_size": params.beam_size,
            "top_p": params.top_p,
            "max_length": params.max_output_length,
        }
        headers = {"Authorization": f"Bearer {self.auth}"} if self.auth else {}
        last_error: BackendError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
            except requests.Timeout as exc:
                last_error = BackendError(f"backend timed out: {exc}", timeout=True)
                continue
            except requests.RequestException as exc:
                last_error = BackendError(f"backend transport error: {exc}")
                continue
            if resp.status_code >= 500:
                last_error = BackendError(
                    f"backend returned {resp.status_code}", status=resp.status_code
                )
                continue
            if resp.status_code >= 400:
                raise BackendError(f"backend returned {resp.status_code}", status=resp.status_code)
            try:
                payload = resp.json()
            except ValueError as exc:
                raise BackendError(f"backend returned invalid JSON: {exc}") from exc
            got = payload.get("outputs")
            if not isinstance(got, list) or len(got) != len(batch):
                raise BackendError(
                    f"protocol violation: expected {len(batch)} outputs, "
                    f"got {len(got) if isinstance(got, list) else type(got).__name__}"
                )
            return [str(x) for x in got]
        assert last_error is not None
        raise last_error


def http_backend(endpoint: str, auth: str | None = None, **kwargs) -> HttpBackend:
    """HTTP generation backend for ``endpoint`` (base URL or full /generate URL)."""
    return HttpBackend(endpoint, auth=auth, **kwargs)


def extract_answers(
    p: Paragraph,
    ae: GenerationBackend,
    params: DecodingParams | None = None,
    dropped: dict[str, int] | None = None,
) -> list[tuple[str, int]]:
    """Run answer extraction over every sentence of the paragraph.

    One sentence-highlighted input per sentence goes to the AE backend.
    Outputs are trimmed and must be non-empty contiguous substrings of the
    paragraph; exact duplicates keep their first occurrence. Returns
    (answer, sentence_index) in sentence order. Drop counters accumulate in
    ``dropped`` when given.
    """
    if not p.text.strip():
        raise NoSentences("paragraph is empty or whitespace-only")
    spans = split_sentences(p)
    if not spans:
        raise NoSentences("paragraph contains no sentences")
    params = params or DecodingParams()
    inputs = [make_sentence_highlight(p, (span.start, span.end)).text for span in spans]
    outputs = ae.generate(inputs, params)
    if len(outputs) != len(inputs):
        raise BackendError(
            f"protocol violation: AE backend returned {len(outputs)} outputs for {len(inputs)} inputs"
        )
    counters = dropped if dropped is not None else {}
    seen: set[str] = set()
    answers: list[tuple[str, int]] = []
    for index, raw in enumerate(outputs):
        answer = raw.strip()
        if not answer:
            counters["ae_empty"] = counters.get("ae_empty", 0) + 1
            continue
        if answer not in p.text:
            counters["ae_not_in_paragraph"] = counters.get("ae_not_in_paragraph", 0) + 1
            continue
        if answer in seen:
            counters["ae_duplicate"] = counters.get("ae_duplicate", 0) + 1
            continue
        seen.add(answer)
        answers.append((answer, index))
    return answers


def generate_question(
    p: Paragraph,
    answer: str,
    qg: GenerationBackend,
    params: DecodingParams | None = None,
) -> str:
    """Generate a single question for a pinned answer.

    The first occurrence of the answer in the paragraph is highlighted.
    """
    start = p.text.find(answer)
    if not answer or start < 0:
        raise AnswerNotInParagraph(f"answer {answer!r} does not occur in the paragraph")
    params = params or DecodingParams()
    highlighted = make_answer_highlight(p, (start, start + len(answer)))
    outputs = qg.generate([highlighted.text], params)
    if len(outputs) != 1:
        raise BackendError(
            f"protocol violation: QG backend returned {len(outputs)} outputs for 1 input"
        )
    question = outputs[0].strip()
    if not question:
        raise EmptyGeneration("QG backend produced an empty question")
    return question


def generate_qa(
    p: Paragraph,
    ae: GenerationBackend,
    qg: GenerationBackend,
    params: DecodingParams | None = None,
    perplexity_scorer: PerplexityScorer | None = None,
    max_in_flight: int = 4,
) -> QAGResult:
    """Full two-stage QAG: extract answers, generate one question per answer.

    A failed question generation drops that pair (counted in diagnostics)
    rather than aborting the batch; BackendError is raised only when every
    QG call fails. Pairs are assembled in sentence order, then stably sorted
    by ascending overlap score — or ascending perplexity when a scorer is
    configured — so the most paragraph-grounded generation comes first.
    """
    params = params or DecodingParams()
    dropped: dict[str, int] = {}
    answers = extract_answers(p, ae, params, dropped)

    def one_question(answer: str) -> str:
        return generate_question(p, answer, qg, params)

    results: list[str | Exception] = []
    if answers:
        workers = min(max_in_flight, len(answers))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one_question, answer) for answer, _ in answers]
            for future in futures:
                try:
                    results.append(future.result())
                except (BackendError, EmptyGeneration, AnswerNotInParagraph) as exc:
                    results.append(exc)

    entries: list[tuple[QAPair, PairDiagnostics]] = []
    failures = 0
    for (answer, sentence_index), outcome in zip(answers, results):
        if isinstance(outcome, Exception):
            failures += 1
            dropped["qg_failed"] = dropped.get("qg_failed", 0) + 1
            continue
        entries.append(
            (
                QAPair(question=outcome, answer=answer),
                PairDiagnostics(
                    source_sentence_index=sentence_index,
                    overlap_score=lexical_overlap_score(outcome, p.text),
                ),
            )
        )
    if answers and failures == len(answers):
        raise BackendError("all question generations failed")

    if perplexity_scorer is not None and entries:
        ppl = perplexity_scorer.score([pair.question for pair, _ in entries])
        entries = [
            (pair, PairDiagnostics(diag.source_sentence_index, diag.overlap_score, score))
            for (pair, diag), score in zip(entries, ppl)
        ]
        entries.sort(key=lambda e: e[1].perplexity)
    else:
        entries.sort(key=lambda e: e[1].overlap_score)

    return QAGResult(
        pairs=QAPairSet(tuple(pair for pair, _ in entries), context_id=context_id_for(p.text)),
        diagnostics=tuple(diag for _, diag in entries),
        dropped=dropped,
    )
