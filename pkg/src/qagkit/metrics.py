"""Reference-based base metrics in [0, 1], plus the character-level lexical
overlap score used to rank generations.

Every base metric maps a (candidate, reference) text pair into [0, 1] and
scores identical non-empty inputs as 1.0. Smoothing and tokenization rules
are pinned down bit-exactly so numbers reproduce across implementations.
"""
from __future__ import annotations

import hashlib
import math
from collections import Counter
from typing import Callable, Protocol

import numpy as np
import requests

from .textproc import longest_common_substring_len, tokenize_for_metrics

BaseMetricFn = Callable[[str, str], float]

BASE_METRIC_NAMES = ("exact_match", "bleu4", "rouge_l", "embedding_f1")


class ProviderUnavailable(RuntimeError):
    """The embedding provider could not be reached or failed to respond."""


class DimensionMismatch(ValueError):
    """The embedding provider returned vectors of inconsistent dimension."""


class EmptyQuestion(ValueError):
    """Lexical overlap is undefined for an empty question."""


def exact_match(candidate: str, reference: str) -> float:
    """1.0 iff the two texts are equal after trimming outer whitespace."""
    return 1.0 if candidate.strip() == reference.strip() else 0.0


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str, language: str = "en") -> float:
    """Sentence-level BLEU with uniform weights over n=1..4.

    Modified (clipped) n-gram precisions; brevity penalty
    exp(1 - |r|/|c|) when the candidate is shorter, else 1. A zero
    precision for n >= 2 is replaced by 1/(2*|c|) (candidate token count);
    orders where neither side has any n-gram count as vacuously perfect so
    that identical short sentences still score 1.0. A zero unigram
    precision, or an empty side, scores 0.
    """
    c = tokenize_for_metrics(candidate, language)
    r = tokenize_for_metrics(reference, language)
    if not c or not r:
        return 0.0
    eps = 1.0 / (2.0 * len(c))
    log_sum = 0.0
    for n in range(1, 5):
        c_counts = _ngram_counts(c, n)
        r_counts = _ngram_counts(r, n)
        total = sum(c_counts.values())
        if total == 0 and not r_counts:
            continue  # log(1) == 0
        matched = sum(min(count, r_counts[gram]) for gram, count in c_counts.items())
        if matched > 0:
            p_n = matched / total
        elif n == 1:
            return 0.0
        else:
            p_n = eps
        log_sum += math.log(p_n)
    bp = math.exp(1.0 - len(r) / len(c)) if len(c) < len(r) else 1.0
    return bp * math.exp(log_sum / 4.0)


def _lcs_subsequence_len(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: str, reference: str, language: str = "en") -> float:
    """ROUGE-L F-measure: token-level longest common *subsequence*.

    P = LCS/|c|, R = LCS/|r|, F = 2PR/(P+R); 0 when the LCS is empty or
    either side tokenizes to nothing.
    """
    c = tokenize_for_metrics(candidate, language)
    r = tokenize_for_metrics(reference, language)
    if not c or not r:
        return 0.0
    lcs = _lcs_subsequence_len(c, r)
    if lcs == 0:
        return 0.0
    p = lcs / len(c)
    rec = lcs / len(r)
    return 2.0 * p * rec / (p + rec)


class EmbeddingProvider(Protocol):
    """Maps a token list to one vector per token.

    Must be deterministic for deterministic inputs and return unit-norm
    vectors of a fixed dimension.
    """

    def embed(self, tokens: list[str]) -> np.ndarray: ...


class HashEmbeddingProvider:
    """Deterministic seeded embedding provider for tests and offline use.

    Each token's vector is drawn from an RNG seeded by a stable hash of the
    token, so equal tokens map to equal unit vectors across runs/processes.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def embed(self, tokens: list[str]) -> np.ndarray:
        vectors = np.empty((len(tokens), self.dim))
        for i, tok in enumerate(tokens):
            digest = hashlib.blake2b(
                tok.encode("utf-8"), digest_size=8, key=str(self.seed).encode()
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            v = rng.standard_normal(self.dim)
            vectors[i] = v / np.linalg.norm(v)
        return vectors


class HttpEmbeddingProvider:
    """Client for an external embedding service.

    Wire protocol: POST {endpoint}/embed with {"tokens": [str]}, expecting
    {"vectors": [[f64]], "dim": int}. Safe for concurrent calls.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def embed(self, tokens: list[str]) -> np.ndarray:
        try:
            resp = requests.post(
                f"{self.endpoint}/embed", json={"tokens": tokens}, timeout=self.timeout
            )
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise ProviderUnavailable(f"embedding service at {self.endpoint}: {exc}") from exc
        vectors, dim = body.get("vectors"), body.get("dim")
        if vectors is None or dim is None:
            raise ProviderUnavailable(f"malformed embedding response: {sorted(body)}")
        if len(vectors) != len(tokens) or any(len(v) != dim for v in vectors):
            raise DimensionMismatch(
                f"expected {len(tokens)} vectors of dim {dim} from embedding service"
            )
        return np.asarray(vectors, dtype=float)


def _clamped_cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"embedding dims differ: {a.shape[1]} vs {b.shape[1]}")
    norms_a = np.linalg.norm(a, axis=1, keepdims=True)
    norms_b = np.linalg.norm(b, axis=1, keepdims=True)
    norms_a[norms_a == 0] = 1.0
    norms_b[norms_b == 0] = 1.0
    sim = (a / norms_a) @ (b / norms_b).T
    return np.clip(sim, 0.0, 1.0)


def embedding_f1(
    candidate: str,
    reference: str,
    provider: EmbeddingProvider,
    language: str = "en",
) -> float:
    """Greedy token-matching similarity over provider embeddings.

    Recall is the mean over reference tokens of the max cosine against
    candidate tokens; precision is symmetric; F1 is their harmonic mean.
    Cosines are clamped to [0, 1] so the result stays a valid base metric.
    """
    c_tokens = tokenize_for_metrics(candidate, language)
    r_tokens = tokenize_for_metrics(reference, language)
    if not c_tokens or not r_tokens:
        return 0.0
    sim = _clamped_cosine_matrix(provider.embed(c_tokens), provider.embed(r_tokens))
    precision = float(np.mean(np.max(sim, axis=1)))  # over candidate tokens
    recall = float(np.mean(np.max(sim, axis=0)))  # over reference tokens
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def lexical_overlap_score(q: str, p: str, casefold: bool = False) -> float:
    """1 - |q∩p| / |q| where |q∩p| is the length of the longest substring of
    the question occurring in the paragraph, all in characters.

    Lower means more of the question is copied from the paragraph; used as a
    computationally-light ranking signal in place of perplexity. Raw text by
    default; set ``casefold`` to compare case-insensitively.
    """
    if not q:
        raise EmptyQuestion("lexical overlap needs a non-empty question")
    if casefold:
        shared = longest_common_substring_len(q.casefold(), p.casefold())
    else:
        shared = longest_common_substring_len(q, p)
    return 1.0 - shared / len(q)


def get_base_metric(
    name: str,
    language: str = "en",
    provider: EmbeddingProvider | None = None,
) -> BaseMetricFn:
    """Resolve a base metric name to a (candidate, reference) -> score callable."""
    if name == "exact_match":
        return exact_match
    if name == "bleu4":
        return lambda c, r: bleu4(c, r, language)
    if name == "rouge_l":
        return lambda c, r: rouge_l(c, r, language)
    if name == "embedding_f1":
        actual = provider if provider is not None else HashEmbeddingProvider()
        return lambda c, r: embedding_f1(c, r, actual, language)
    raise ValueError(f"unknown base metric {name!r}, expected one of {BASE_METRIC_NAMES}")
