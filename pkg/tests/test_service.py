from __future__ import annotations

import threading
import time

import pytest
import requests
import uvicorn

from qagkit.service import ModelRegistry, ModelRegistryEntry, create_app, stub_registry
from oracles import lcs_substring_brute

TWO_SENTENCES = "Marie Curie won in 1903. The prize was for Physics work."


def start_server(app):
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start in time")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    return server, f"http://127.0.0.1:{port}"


def two_model_registry():
    return ModelRegistry(
        [
            ModelRegistryEntry(id="stub-en", language="en", ae_endpoint="stub", qg_endpoint="stub"),
            ModelRegistryEntry(id="stub-ja", language="ja", ae_endpoint="stub", qg_endpoint="stub"),
        ]
    )


@pytest.fixture(scope="module")
def base_url():
    server, url = start_server(create_app(two_model_registry()))
    yield url
    server.should_exit = True


def overlap(question, paragraph):
    return 1 - lcs_substring_brute(question, paragraph) / len(question)


def test_healthz(base_url):
    resp = requests.get(f"{base_url}/healthz")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_models_listing(base_url):
    resp = requests.get(f"{base_url}/v1/models")
    assert resp.status_code == 200
    body = resp.json()
    assert len(body) == 2
    assert body[0] == {
        "id": "stub-en",
        "language": "en",
        "ae_endpoint": "stub",
        "qg_endpoint": "stub",
        "defaults": {"beam_size": 4, "top_p": 0.95, "max_output_length": 64},
    }


def test_empty_registry_lists_nothing():
    server, url = start_server(create_app(ModelRegistry([])))
    try:
        assert requests.get(f"{url}/v1/models").json() == []
    finally:
        server.should_exit = True


def test_generate_qa_two_sentence_paragraph(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa", json={"model_id": "stub-en", "paragraph": TWO_SENTENCES}
    )
    assert resp.status_code == 200
    # Stub trace: answers per sentence, questions templated, ranked by overlap.
    expected_pairs = [
        {
            "question": "What is mentioned in the text: Marie Curie?",
            "answer": "Marie Curie",
            "overlap": overlap("What is mentioned in the text: Marie Curie?", TWO_SENTENCES),
            "perplexity": None,
        },
        {
            "question": "What is mentioned in the text: The?",
            "answer": "The",
            "overlap": overlap("What is mentioned in the text: The?", TWO_SENTENCES),
            "perplexity": None,
        },
    ]
    order = sorted(range(2), key=lambda i: expected_pairs[i]["overlap"])
    assert resp.json() == {
        "pairs": [expected_pairs[i] for i in order],
        "diagnostics": {"dropped": {}, "source_sentence_indices": order},
    }


def test_generate_qa_is_stateless(base_url):
    body = {"model_id": "stub-en", "paragraph": TWO_SENTENCES, "beam_size": 8, "top_p": 0.9}
    first = requests.post(f"{base_url}/v1/generate_qa", json=body)
    second = requests.post(f"{base_url}/v1/generate_qa", json=body)
    assert first.json() == second.json()


def test_generate_qa_pairs_satisfy_substring_invariant(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa", json={"model_id": "stub-en", "paragraph": TWO_SENTENCES}
    )
    for pair in resp.json()["pairs"]:
        assert pair["answer"] in TWO_SENTENCES


def test_generate_qa_unknown_model(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa", json={"model_id": "missing", "paragraph": "Some text."}
    )
    assert resp.status_code == 404
    assert resp.json() == {
        "error": {"code": "unknown_model", "message": "no model registered under id 'missing'"}
    }


def test_generate_qa_overlong_paragraph(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa", json={"model_id": "stub-en", "paragraph": "x" * 5000}
    )
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "invalid_paragraph"


def test_generate_qa_empty_paragraph(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa", json={"model_id": "stub-en", "paragraph": "   "}
    )
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "invalid_paragraph"


def test_generate_qa_rejects_bad_params(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa",
        json={"model_id": "stub-en", "paragraph": "Some text.", "beam_size": 0},
    )
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "validation_error"


def test_generate_qa_japanese_model(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_qa",
        json={"model_id": "stub-ja", "paragraph": "これはペンです。それはノートです。"},
    )
    assert resp.status_code == 200
    assert len(resp.json()["pairs"]) == 2


def test_generate_question_stub(base_url):
    paragraph = "X is here."
    resp = requests.post(
        f"{base_url}/v1/generate_question",
        json={"model_id": "stub-en", "paragraph": paragraph, "answer": "X"},
    )
    assert resp.status_code == 200
    question = "What is mentioned in the text: X?"
    assert resp.json() == {"question": question, "overlap": overlap(question, paragraph)}


def test_generate_question_answer_absent(base_url):
    resp = requests.post(
        f"{base_url}/v1/generate_question",
        json={"model_id": "stub-en", "paragraph": "X is here.", "answer": "Zelda"},
    )
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "answer_not_in_paragraph"


SNIPPET_GOLD = [[["What makes X?", "Y"], ["Who made X?", "Y"]]]
SNIPPET_PRED = [[["What makes X?", "Y"], ["Who build X?", "Y"], ["When X occurs?", "Y"]]]


def test_evaluate_snippet_case(base_url):
    resp = requests.post(
        f"{base_url}/v1/evaluate",
        json={"gold": SNIPPET_GOLD, "pred": SNIPPET_PRED, "metric": "exact_match"},
    )
    assert resp.status_code == 200
    assert resp.json() == {
        "f1": 0.4,
        "precision": 0.5,
        "recall": 0.3333,
        "per_context": [
            {"context_id": "ctx-0", "f1": 0.4, "precision": 0.5, "recall": 0.3333}
        ],
    }


def test_evaluate_identical_sets(base_url):
    resp = requests.post(
        f"{base_url}/v1/evaluate",
        json={"gold": SNIPPET_GOLD, "pred": SNIPPET_GOLD, "metric": "exact_match"},
    )
    body = resp.json()
    assert (body["f1"], body["precision"], body["recall"]) == (1.0, 1.0, 1.0)


def test_evaluate_unknown_metric(base_url):
    resp = requests.post(
        f"{base_url}/v1/evaluate",
        json={"gold": SNIPPET_GOLD, "pred": SNIPPET_PRED, "metric": "meteor"},
    )
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "unknown_metric"


def test_evaluate_malformed_body(base_url):
    resp = requests.post(f"{base_url}/v1/evaluate", json={"gold": "not a list"})
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "validation_error"


def test_evaluate_bad_pair_shape(base_url):
    resp = requests.post(
        f"{base_url}/v1/evaluate",
        json={"gold": [[["only-question"]]], "pred": [[]], "metric": "exact_match"},
    )
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "validation_error"


def test_error_body_shape_on_unknown_route(base_url):
    resp = requests.get(f"{base_url}/v1/definitely_not_here")
    assert resp.status_code == 404
    body = resp.json()
    assert set(body) == {"error"}
    assert set(body["error"]) == {"code", "message"}


def test_concurrency_ceiling_returns_429():
    server, url = start_server(create_app(stub_registry(), max_concurrent_requests=0))
    try:
        resp = requests.get(f"{url}/healthz")
        assert resp.status_code == 429
        assert resp.json()["error"]["code"] == "too_many_requests"
    finally:
        server.should_exit = True


def test_perplexity_scorer_endpoint_ranks_pairs():
    import json as jsonlib
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class ScorerHandler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            texts = jsonlib.loads(self.rfile.read(length))["texts"]
            # Longer questions score as more perplexing.
            data = jsonlib.dumps({"scores": [float(len(t)) for t in texts]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    scorer = ThreadingHTTPServer(("127.0.0.1", 0), ScorerHandler)
    scorer_thread = threading.Thread(target=scorer.serve_forever, daemon=True)
    scorer_thread.start()
    scorer_url = f"http://127.0.0.1:{scorer.server_address[1]}"

    registry = ModelRegistry(
        [
            ModelRegistryEntry(
                id="scored", language="en", ae_endpoint="stub", qg_endpoint="stub",
                perplexity_endpoint=scorer_url,
            )
        ]
    )
    server, url = start_server(create_app(registry))
    try:
        resp = requests.post(
            f"{url}/v1/generate_qa", json={"model_id": "scored", "paragraph": TWO_SENTENCES}
        )
        assert resp.status_code == 200
        pairs = resp.json()["pairs"]
        ppl = [p["perplexity"] for p in pairs]
        assert all(isinstance(x, float) for x in ppl)
        assert ppl == sorted(ppl)  # ranked by ascending perplexity, not overlap
        assert pairs[0]["answer"] == "The"  # shortest question wins under this scorer
    finally:
        server.should_exit = True
        scorer.shutdown()


def test_registry_from_toml_and_json(tmp_path):
    toml_path = tmp_path / "models.toml"
    toml_path.write_text(
        '[[models]]\nid = "m1"\nlanguage = "en"\nae_endpoint = "stub"\nqg_endpoint = "stub"\n'
        "[models.defaults]\nbeam_size = 2\ntop_p = 0.9\nmax_output_length = 32\n"
    )
    registry = ModelRegistry.from_config(toml_path)
    assert registry.get("m1").defaults.beam_size == 2

    json_path = tmp_path / "models.json"
    json_path.write_text(
        '{"models": [{"id": "m2", "language": "ja", "ae_endpoint": "stub", "qg_endpoint": "stub"}]}'
    )
    registry = ModelRegistry.from_config(json_path)
    assert registry.get("m2").language == "ja"
