"""REST API binding the pipeline, metrics, and evaluation together.

The JSON contract under /v1 is the stable public surface: handlers are
stateless (the model registry is immutable after boot), every 4xx/5xx body
carries {"error": {"code", "message"}}, and a global concurrent-request
ceiling returns 429 beyond capacity.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import pipeline
from .metrics import BASE_METRIC_NAMES, get_base_metric, lexical_overlap_score
from .qaaligned import corpus_qaaligned
from .types import (
    DEFAULT_MAX_PARAGRAPH_CHARS,
    SUPPORTED_LANGUAGES,
    DecodingParams,
    Paragraph,
    QAPair,
    QAPairSet,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class RegistryError(ValueError):
    """The model registry config is malformed."""


@dataclass(frozen=True)
class ModelRegistryEntry:
    """One servable model: paired AE/QG endpoints (or "stub") plus decoding defaults."""

    id: str
    language: str
    ae_endpoint: str
    qg_endpoint: str
    defaults: DecodingParams = DecodingParams()
    perplexity_endpoint: str | None = None

    def __post_init__(self):
        if self.language not in SUPPORTED_LANGUAGES:
            raise RegistryError(
                f"model {self.id!r}: unsupported language {self.language!r}"
            )


def _make_backend(endpoint: str, role: str, language: str) -> pipeline.GenerationBackend:
    if endpoint == "stub":
        return pipeline.stub_backend(role, language)
    return pipeline.http_backend(endpoint, language=language)


class HttpPerplexityScorer:
    """Client for an external perplexity service: POST {endpoint}/score with
    {"texts": [str]} returning {"scores": [float]}; lower is better."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def score(self, texts: list[str]) -> list[float]:
        import requests

        resp = requests.post(
            f"{self.endpoint}/score", json={"texts": texts}, timeout=self.timeout
        )
        resp.raise_for_status()
        scores = resp.json()["scores"]
        if len(scores) != len(texts):
            raise ValueError("perplexity service returned wrong number of scores")
        return [float(s) for s in scores]


class ModelRegistry:
    """Immutable id -> entry mapping with backends built once at boot."""

    def __init__(self, entries: list[ModelRegistryEntry]):
        ids = [entry.id for entry in entries]
        if len(set(ids)) != len(ids):
            raise RegistryError("duplicate model ids in registry")
        self.entries = {entry.id: entry for entry in entries}
        self._backends = {
            entry.id: (
                _make_backend(entry.ae_endpoint, "ae", entry.language),
                _make_backend(entry.qg_endpoint, "qg", entry.language),
            )
            for entry in entries
        }
        self._scorers = {
            entry.id: (
                HttpPerplexityScorer(entry.perplexity_endpoint)
                if entry.perplexity_endpoint
                else None
            )
            for entry in entries
        }

    def get(self, model_id: str) -> ModelRegistryEntry | None:
        return self.entries.get(model_id)

    def backends(self, model_id: str) -> tuple[pipeline.GenerationBackend, pipeline.GenerationBackend]:
        return self._backends[model_id]

    def scorer(self, model_id: str):
        return self._scorers.get(model_id)

    @classmethod
    def from_config(cls, path: str | Path) -> ModelRegistry:
        p = Path(path)
        raw = p.read_bytes()
        if p.suffix == ".toml":
            config = tomllib.loads(raw.decode("utf-8"))
        else:
            config = json.loads(raw)
        models = config.get("models")
        if not isinstance(models, list):
            raise RegistryError(f"{p}: expected a top-level 'models' list")
        entries = []
        for obj in models:
            try:
                defaults = DecodingParams(**obj.get("defaults", {}))
                entries.append(
                    ModelRegistryEntry(
                        id=obj["id"],
                        language=obj["language"],
                        ae_endpoint=obj["ae_endpoint"],
                        qg_endpoint=obj["qg_endpoint"],
                        defaults=defaults,
                        perplexity_endpoint=obj.get("perplexity_endpoint"),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise RegistryError(f"{p}: bad model entry {obj!r}: {exc}") from exc
        return cls(entries)


def stub_registry() -> ModelRegistry:
    """A registry with one stub model per supported language, for offline use."""
    return ModelRegistry(
        [
            ModelRegistryEntry(
                id=f"stub-{lang}", language=lang, ae_endpoint="stub", qg_endpoint="stub"
            )
            for lang in SUPPORTED_LANGUAGES
        ]
    )


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


class GenerateQARequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_id: str
    paragraph: str
    beam_size: int | None = Field(default=None, ge=1)
    top_p: float | None = Field(default=None, gt=0.0, le=1.0)


class GenerateQuestionRequest(GenerateQARequest):
    answer: str


class EvaluateRequest(BaseModel):
    gold: list[list[list[str]]]
    pred: list[list[list[str]]]
    metric: str
    language: str = "en"


def _merged_params(entry: ModelRegistryEntry, req: GenerateQARequest) -> DecodingParams:
    return DecodingParams(
        beam_size=req.beam_size if req.beam_size is not None else entry.defaults.beam_size,
        top_p=req.top_p if req.top_p is not None else entry.defaults.top_p,
        max_output_length=entry.defaults.max_output_length,
    )


def _checked_paragraph(text: str, language: str, max_chars: int) -> Paragraph:
    if not text.strip():
        raise ApiError(422, "invalid_paragraph", "paragraph is empty")
    if len(text) > max_chars:
        raise ApiError(
            422,
            "invalid_paragraph",
            f"paragraph length {len(text)} exceeds the {max_chars}-character cap",
        )
    return Paragraph(text=text, language=language, max_chars=max_chars)


def _pair_sets(groups: list[list[list[str]]], side: str) -> list[QAPairSet]:
    sets = []
    for i, group in enumerate(groups):
        pairs = []
        for pair in group:
            if len(pair) != 2:
                raise ApiError(
                    422, "validation_error", f"{side}[{i}]: each pair must be [question, answer]"
                )
            try:
                pairs.append(QAPair(question=pair[0], answer=pair[1]))
            except ValueError as exc:
                raise ApiError(422, "validation_error", f"{side}[{i}]: {exc}") from exc
        sets.append(QAPairSet(tuple(pairs), context_id=f"ctx-{i}"))
    return sets


def create_app(
    registry: ModelRegistry | None = None,
    max_concurrent_requests: int = 64,
    max_paragraph_chars: int = DEFAULT_MAX_PARAGRAPH_CHARS,
) -> FastAPI:
    """Build the service app around an immutable model registry."""
    registry = registry if registry is not None else stub_registry()
    app = FastAPI(title="qagkit", version="0.1.0")
    state = {"in_flight": 0}

    @app.middleware("http")
    async def concurrency_ceiling(request: Request, call_next):
        if state["in_flight"] >= max_concurrent_requests:
            return _error_response(429, "too_many_requests", "server is at capacity")
        state["in_flight"] += 1
        try:
            return await call_next(request)
        finally:
            state["in_flight"] -= 1

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return _error_response(422, "validation_error", str(exc.errors()[:3]))

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_exception(request: Request, exc: StarletteHTTPException):
        return _error_response(exc.status_code, "http_error", str(exc.detail))

    def _entry_or_404(model_id: str) -> ModelRegistryEntry:
        entry = registry.get(model_id)
        if entry is None:
            raise ApiError(404, "unknown_model", f"no model registered under id {model_id!r}")
        return entry

    def _map_backend_error(exc: pipeline.BackendError) -> ApiError:
        if exc.timeout:
            return ApiError(504, "backend_timeout", str(exc))
        return ApiError(502, "backend_error", str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/models")
    def list_models():
        return [
            {
                "id": entry.id,
                "language": entry.language,
                "ae_endpoint": entry.ae_endpoint,
                "qg_endpoint": entry.qg_endpoint,
                "defaults": {
                    "beam_size": entry.defaults.beam_size,
                    "top_p": entry.defaults.top_p,
                    "max_output_length": entry.defaults.max_output_length,
                },
            }
            for entry in registry.entries.values()
        ]

    @app.post("/v1/generate_qa")
    def generate_qa(req: GenerateQARequest):
        entry = _entry_or_404(req.model_id)
        paragraph = _checked_paragraph(req.paragraph, entry.language, max_paragraph_chars)
        ae, qg = registry.backends(req.model_id)
        try:
            result = pipeline.generate_qa(
                paragraph,
                ae,
                qg,
                params=_merged_params(entry, req),
                perplexity_scorer=registry.scorer(req.model_id),
            )
        except pipeline.NoSentences as exc:
            raise ApiError(422, "invalid_paragraph", str(exc)) from exc
        except pipeline.BackendError as exc:
            raise _map_backend_error(exc) from exc
        return {
            "pairs": [
                {
                    "question": pair.question,
                    "answer": pair.answer,
                    "overlap": diag.overlap_score,
                    "perplexity": diag.perplexity,
                }
                for pair, diag in zip(result.pairs, result.diagnostics)
            ],
            "diagnostics": {
                "dropped": result.dropped,
                "source_sentence_indices": [
                    diag.source_sentence_index for diag in result.diagnostics
                ],
            },
        }

    @app.post("/v1/generate_question")
    def generate_question(req: GenerateQuestionRequest):
        entry = _entry_or_404(req.model_id)
        paragraph = _checked_paragraph(req.paragraph, entry.language, max_paragraph_chars)
        _, qg = registry.backends(req.model_id)
        try:
            question = pipeline.generate_question(
                paragraph, req.answer, qg, params=_merged_params(entry, req)
            )
        except pipeline.AnswerNotInParagraph as exc:
            raise ApiError(422, "answer_not_in_paragraph", str(exc)) from exc
        except pipeline.EmptyGeneration as exc:
            raise ApiError(502, "backend_error", str(exc)) from exc
        except pipeline.BackendError as exc:
            raise _map_backend_error(exc) from exc
        return {"question": question, "overlap": lexical_overlap_score(question, paragraph.text)}

    @app.post("/v1/evaluate")
    def evaluate(req: EvaluateRequest):
        if req.metric not in BASE_METRIC_NAMES:
            raise ApiError(
                400,
                "unknown_metric",
                f"metric {req.metric!r} not supported; choose from {list(BASE_METRIC_NAMES)}",
            )
        if req.language not in SUPPORTED_LANGUAGES:
            raise ApiError(422, "validation_error", f"unsupported language {req.language!r}")
        gold_sets = _pair_sets(req.gold, "gold")
        pred_sets = _pair_sets(req.pred, "pred")[: len(gold_sets)]
        s = get_base_metric(req.metric, language=req.language)
        score = corpus_qaaligned(gold_sets, pred_sets, s, metric_name=req.metric)
        return {
            "f1": round(score.f1, 4),
            "precision": round(score.precision, 4),
            "recall": round(score.recall, 4),
            "per_context": [
                {
                    "context_id": cid,
                    "f1": round(f1, 4),
                    "precision": round(p, 4),
                    "recall": round(r, 4),
                }
                for cid, f1, p, r in (score.per_paragraph or ())
            ],
        }

    return app


def serve(
    config: str | None = None,
    host: str = "0.0.0.0",
    port: int = 8080,
    max_concurrent_requests: int = 64,
) -> None:
    """Run the service under uvicorn. QAGKIT_CONFIG and QAGKIT_PORT env vars
    override the corresponding arguments."""
    import os

    import uvicorn

    config = os.environ.get("QAGKIT_CONFIG", config)
    port = int(os.environ.get("QAGKIT_PORT", port))
    registry = ModelRegistry.from_config(config) if config else stub_registry()
    app = create_app(registry, max_concurrent_requests=max_concurrent_requests)
    uvicorn.run(app, host=host, port=port)
