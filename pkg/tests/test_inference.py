import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from bioner import codec
from bioner.errors import BackendError, UnknownSentence
from bioner.inference import (
    EchoBackend,
    EchoGoldBackend,
    GenerationRequest,
    PerturbingBackend,
    WireBackend,
    add_char_noise,
    call_with_retry,
    run_batch,
)
from bioner.prompts import PromptTemplate, render_prompt


class Stub:
    """Scripted chat-completions server: each POST pops the next (status, body)."""

    def __init__(self, script):
        self.script = list(script)
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers["Content-Length"])
                stub.requests.append((self.path, dict(self.headers), json.loads(self.rfile.read(n))))
                status, body = stub.script.pop(0) if len(stub.script) > 1 else stub.script[0]
                data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/v1"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


def reply(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


@pytest.fixture
def stub_factory():
    made = []

    def make(script):
        s = Stub(script)
        made.append(s)
        return s

    yield make
    for s in made:
        s.close()


def test_wire_returns_content(stub_factory, monkeypatch):
    stub = stub_factory([(200, reply("X"))])
    monkeypatch.setenv("TEST_KEY", "sekret")
    backend = WireBackend(stub.url, "m1", token_env="TEST_KEY")
    assert backend.generate(GenerationRequest("hello", 100, 0.0)) == "X"
    path, headers, body = stub.requests[0]
    assert path == "/v1/chat/completions"
    assert headers["Authorization"] == "Bearer sekret"
    assert body == {"model": "m1", "messages": [{"role": "user", "content": "hello"}], "temperature": 0.0, "max_tokens": 100}


def test_wire_retries_on_500(stub_factory):
    stub = stub_factory([(500, "oops"), (500, "oops"), (200, reply("ok"))])
    out = run_batch(["p"], WireBackend(stub.url, "m"), parallelism=1, retries=3, backoff=0)
    assert out == ["ok"]
    assert len(stub.requests) == 3


def test_wire_http_error_after_retries(stub_factory):
    stub = stub_factory([(503, "down")])
    out = run_batch(["p"], WireBackend(stub.url, "m"), retries=1, backoff=0)
    assert out[0] == BackendError("http_status", "503")


def test_wire_malformed(stub_factory):
    stub = stub_factory([(200, {"id": "x"})])
    with pytest.raises(BackendError) as err:
        WireBackend(stub.url, "m").generate(GenerationRequest("p"))
    assert err.value.kind == "malformed_response"


def test_wire_transport_error():
    backend = WireBackend("http://127.0.0.1:9", "m", timeout=2)
    with pytest.raises(BackendError) as err:
        backend.generate(GenerationRequest("p"))
    assert err.value.kind in ("transport", "timeout")


def test_no_token_no_header(stub_factory, monkeypatch):
    monkeypatch.delenv("LLM_API_KEY", raising=False)
    stub = stub_factory([(200, reply("X"))])
    WireBackend(stub.url, "m").generate(GenerationRequest("p"))
    assert "Authorization" not in stub.requests[0][1]


def test_run_batch_empty_and_echo():
    assert run_batch([], EchoBackend()) == []
    prompts = [f"p{k}" for k in range(5)]
    assert run_batch(prompts, EchoBackend(), parallelism=4) == prompts


class Scripted:
    name = "scripted"

    def __init__(self, fail_on, delay=0.0):
        self.fail_on = fail_on
        self.delay = delay
        self.active = 0
        self.peak = 0
        self.lock = threading.Lock()

    def generate(self, req):
        with self.lock:
            self.active += 1
            self.peak = max(self.peak, self.active)
        try:
            time.sleep(self.delay)
            if req.prompt == self.fail_on:
                raise BackendError("http_status", "500")
            return req.prompt.upper()
        finally:
            with self.lock:
                self.active -= 1


def test_failing_slot_is_isolated():
    out = run_batch(["a", "b", "c", "d", "e"], Scripted("c"), parallelism=4, retries=2, backoff=0)
    assert out[:2] == ["A", "B"] and out[3:] == ["D", "E"]
    assert isinstance(out[2], BackendError)


def test_concurrency_bound():
    backend = Scripted(None, delay=0.02)
    run_batch([str(k) for k in range(24)], backend, parallelism=3)
    assert 1 < backend.peak <= 3


def test_unexpected_exception_contained():
    class Broken:
        name = "broken"

        def generate(self, req):
            raise RuntimeError("boom")

    out = run_batch(["x"], Broken(), retries=0)
    assert out[0].kind == "backend_exception"


def test_call_with_retry_backoff_doubles():
    calls, sleeps = [], []

    def fn():
        calls.append(1)
        raise BackendError("timeout", "slow")

    with pytest.raises(BackendError):
        call_with_retry(fn, retries=3, backoff=0.5, sleep=sleeps.append)
    assert len(calls) == 4 and sleeps == [0.5, 1.0, 2.0]


def test_echo_gold(construct, genia, schemas):
    for strategy in codec.STRATEGIES:
        tmpl = PromptTemplate.default(strategy)
        backend = EchoGoldBackend([construct], schemas, strategy, tmpl)
        prompt = render_prompt(construct, genia, tmpl)
        assert backend.generate(GenerationRequest(prompt)) == codec.encode(strategy, construct, genia).payload
    with pytest.raises(UnknownSentence):
        backend.generate(GenerationRequest("a prompt about something else"))


def test_echo_gold_through_batch_reports_unknown(construct, schemas):
    out = run_batch(["unrelated"], EchoGoldBackend([construct], schemas, "json"), retries=0)
    assert out[0].kind == "unknown_sentence"


def test_char_noise_rate_zero_and_one():
    import random

    assert add_char_noise("abc", 0.0, random.Random(1)) == ("abc", frozenset())
    noisy = add_char_noise("a" * 2000, 1.0, random.Random(1))
    assert noisy.touched == frozenset(range(2000))
    assert noisy.text != "a" * 2000


def test_perturbing_is_seeded_by_prompt(construct, schemas):
    inner = EchoGoldBackend([construct], schemas, "symbolic")
    prompt = render_prompt(construct, schemas["GENIA"], PromptTemplate.default())
    a = PerturbingBackend(inner, 0.2, seed=4).generate(GenerationRequest(prompt))
    b = PerturbingBackend(inner, 0.2, seed=4).generate(GenerationRequest(prompt))
    c = PerturbingBackend(inner, 0.2, seed=5).generate(GenerationRequest(prompt))
    assert a == b and a != c
    assert a == PerturbingBackend(inner, 0.2, seed=4).corrupt(inner.generate(GenerationRequest(prompt)), prompt).text
