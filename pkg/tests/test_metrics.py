from __future__ import annotations

import random

import numpy as np
import pytest

from qagkit.metrics import (
    DimensionMismatch,
    EmptyQuestion,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    ProviderUnavailable,
    bleu4,
    embedding_f1,
    exact_match,
    get_base_metric,
    lexical_overlap_score,
    rouge_l,
)

from oracles import bleu4_from_tokens, lcs_substring_brute, rouge_l_from_tokens

TURNER_P = (
    "William Turner was an English painter who specialised in watercolour landscapes."
)


def random_token_text(rng, max_len=10, vocab="abcde"):
    n = rng.randint(1, max_len)
    return " ".join(rng.choice(vocab) for _ in range(n))


def test_exact_match_basic():
    assert exact_match("a b", "a b") == 1.0
    assert exact_match("a b", "a c") == 0.0
    assert exact_match(" x ", "x") == 1.0


def test_bleu4_identity_and_empty():
    assert bleu4("the cat sat on the mat", "the cat sat on the mat") == pytest.approx(1.0)
    assert bleu4("the cat", "the cat") == pytest.approx(1.0)  # shorter than 4 tokens
    assert bleu4("", "anything") == 0.0
    assert bleu4("anything", "") == 0.0


def test_bleu4_matches_bruteforce_counter():
    rng = random.Random(3)
    for _ in range(100):
        c = random_token_text(rng)
        r = random_token_text(rng)
        expected = bleu4_from_tokens(c.split(), r.split())
        assert abs(bleu4(c, r) - expected) <= 1e-12, (c, r)


def test_rouge_l_values():
    assert rouge_l("same text here", "same text here") == pytest.approx(1.0)
    assert rouge_l("the cat", "the cat sat") == pytest.approx(0.8)
    assert rouge_l("aa bb", "cc dd") == 0.0


def test_rouge_l_matches_recursive_oracle():
    rng = random.Random(5)
    for _ in range(100):
        c = random_token_text(rng)
        r = random_token_text(rng)
        expected = rouge_l_from_tokens(c.split(), r.split())
        assert abs(rouge_l(c, r) - expected) <= 1e-12, (c, r)


def test_metrics_ignore_extra_interior_whitespace():
    assert bleu4("a  b   c", "a b c") == pytest.approx(1.0)
    assert rouge_l("a \t b  c", "a b c") == pytest.approx(1.0)


def test_embedding_f1_identity_and_empty():
    provider = HashEmbeddingProvider()
    assert embedding_f1("a b c", "a b c", provider) == pytest.approx(1.0)
    assert embedding_f1("", "a", provider) == 0.0
    assert embedding_f1("a", "", provider) == 0.0


def test_embedding_f1_matches_double_loop():
    provider = HashEmbeddingProvider(dim=16, seed=42)
    c_tokens, r_tokens = ["a", "b"], ["a", "c"]
    cv = provider.embed(c_tokens)
    rv = provider.embed(r_tokens)
    # Independent double-loop greedy matching.
    p_terms = []
    for i in range(len(c_tokens)):
        best = max(float(np.dot(cv[i], rv[j])) for j in range(len(r_tokens)))
        p_terms.append(min(max(best, 0.0), 1.0))
    r_terms = []
    for j in range(len(r_tokens)):
        best = max(float(np.dot(cv[i], rv[j])) for i in range(len(c_tokens)))
        r_terms.append(min(max(best, 0.0), 1.0))
    precision = sum(p_terms) / len(p_terms)
    recall = sum(r_terms) / len(r_terms)
    expected = 2 * precision * recall / (precision + recall)
    assert embedding_f1("a b", "a c", provider) == pytest.approx(expected, abs=1e-12)


def test_embedding_provider_is_deterministic():
    a = HashEmbeddingProvider(dim=8, seed=1).embed(["tok", "tok", "other"])
    b = HashEmbeddingProvider(dim=8, seed=1).embed(["tok", "tok", "other"])
    assert np.array_equal(a, b)
    assert np.array_equal(a[0], a[1])
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)


def test_embedding_dim_mismatch():
    class BadProvider:
        def __init__(self):
            self.calls = 0

        def embed(self, tokens):
            self.calls += 1
            dim = 4 if self.calls == 1 else 6
            return np.ones((len(tokens), dim))

    with pytest.raises(DimensionMismatch):
        embedding_f1("a b", "c d", BadProvider())


@pytest.fixture
def embed_server():
    import json as jsonlib
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            tokens = jsonlib.loads(self.rfile.read(length))["tokens"]
            if self.server.spec.get("truncate_dim"):
                vectors = [[1.0] for _ in tokens]
                dim = 3
            else:
                # Unit vectors along axes keyed by token hash.
                dim = 4
                vectors = []
                for tok in tokens:
                    v = [0.0] * dim
                    v[sum(tok.encode()) % dim] = 1.0
                    vectors.append(v)
            data = jsonlib.dumps({"vectors": vectors, "dim": dim}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    server.spec = {}
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_http_embedding_provider(embed_server):
    _, url = embed_server
    provider = HttpEmbeddingProvider(url)
    vectors = provider.embed(["a", "b"])
    assert vectors.shape == (2, 4)
    assert embedding_f1("a b", "a b", provider) == pytest.approx(1.0)


def test_http_embedding_provider_dim_mismatch(embed_server):
    server, url = embed_server
    server.spec["truncate_dim"] = True
    with pytest.raises(DimensionMismatch):
        HttpEmbeddingProvider(url).embed(["a"])


def test_http_embedding_provider_unavailable():
    provider = HttpEmbeddingProvider("http://127.0.0.1:1", timeout=0.2)
    with pytest.raises(ProviderUnavailable):
        provider.embed(["a"])


def test_lexical_overlap_extremes():
    assert lexical_overlap_score("abc", "zabcy") == 0.0
    assert lexical_overlap_score("abc", "xyz") == 1.0


def test_lexical_overlap_turner():
    q = "Who was William Turner?"
    assert lcs_substring_brute(q, TURNER_P) == 14
    assert lexical_overlap_score(q, TURNER_P) == pytest.approx(1 - 14 / 23)


def test_lexical_overlap_empty_question():
    with pytest.raises(EmptyQuestion):
        lexical_overlap_score("", "anything")


def test_lexical_overlap_casefold_flag():
    assert lexical_overlap_score("ABC", "abc") == 1.0
    assert lexical_overlap_score("ABC", "abc", casefold=True) == 0.0


def test_lexical_overlap_matches_oracle_on_random_pairs():
    rng = random.Random(13)
    for _ in range(200):
        q = "".join(rng.choice("abxy ") for _ in range(rng.randint(1, 25)))
        p = "".join(rng.choice("abxy ") for _ in range(rng.randint(0, 25)))
        expected = 1 - lcs_substring_brute(q, p) / len(q)
        assert lexical_overlap_score(q, p) == pytest.approx(expected, abs=1e-12)


def test_all_metrics_stay_in_unit_range_under_fuzz():
    rng = random.Random(99)
    provider = HashEmbeddingProvider(dim=8)

    def random_unicode(max_len):
        return "".join(
            chr(rng.choice([rng.randint(32, 0x2FF), rng.randint(0x3040, 0x30FF)]))
            for _ in range(rng.randint(0, max_len))
        )

    for _ in range(250):
        c, r = random_unicode(20), random_unicode(20)
        lang = rng.choice(["en", "ja"])
        for value in (
            exact_match(c, r),
            bleu4(c, r, lang),
            rouge_l(c, r, lang),
            embedding_f1(c, r, provider, lang),
        ):
            assert 0.0 <= value <= 1.0, (c, r, lang, value)


def test_identity_property_all_metrics():
    provider = HashEmbeddingProvider()
    for text in ("hello there", "一つの文です", "x"):
        assert exact_match(text, text) == 1.0
        lang = "ja" if "文" in text else "en"
        assert bleu4(text, text, lang) == pytest.approx(1.0)
        assert rouge_l(text, text, lang) == pytest.approx(1.0)
        assert embedding_f1(text, text, provider, lang) == pytest.approx(1.0)


def test_get_base_metric_names():
    assert get_base_metric("exact_match")("a", "a") == 1.0
    assert get_base_metric("rouge_l")("the cat", "the cat sat") == pytest.approx(0.8)
    with pytest.raises(ValueError):
        get_base_metric("meteor")
