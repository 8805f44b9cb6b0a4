"""Generation backends and the bounded-parallel batch driver."""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Protocol, Sequence

import requests

from . import codec
from .errors import BackendError, UnknownSentence
from .model import DatasetSchema, Sentence
from .prompts import PromptTemplate, sentence_pattern

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 3
DEFAULT_MAX_OUTPUT_CHARS = 8192


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS
    temperature: float = 0.0
    request_id: str = ""

    def __post_init__(self):
        if self.max_output_chars <= 0:
            raise ValueError("max_output_chars must be positive")


class Backend(Protocol):
    name: str

    def generate(self, request: GenerationRequest) -> str: ...


def call_with_retry(fn: Callable[[], str], retries: int = DEFAULT_RETRIES, backoff: float = 0.5, sleep=time.sleep):
    """Call ``fn``; on BackendError retry up to ``retries`` more times with doubling delays."""
    delay = backoff
    for attempt in range(retries + 1):
        try:
            return fn()
        except BackendError as exc:
            if attempt == retries:
                raise
            log.warning("attempt %d failed (%s); retrying in %.2fs", attempt + 1, exc, delay)
            if delay > 0:
                sleep(delay)
            delay *= 2


def run_batch(
    prompts: Sequence[str],
    backend: Backend,
    parallelism: int = 4,
    retries: int = DEFAULT_RETRIES,
    backoff: float = 0.5,
    temperature: float = 0.0,
    max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS,
) -> list[str | BackendError]:
    """Generate for every prompt; slot ``i`` of the result answers ``prompts[i]``.

    A failed slot holds its final BackendError instead of a string; other
    slots are unaffected.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    results: list[str | BackendError] = [None] * len(prompts)  # type: ignore[list-item]

    def work(i: int):
        req = GenerationRequest(prompts[i], max_output_chars, temperature, str(i))
        try:
            results[i] = call_with_retry(lambda: backend.generate(req), retries, backoff)
        except BackendError as exc:
            results[i] = exc
        except Exception as exc:  # a buggy backend must not take the batch down
            results[i] = BackendError("backend_exception", f"{type(exc).__name__}: {exc}")

    if not prompts:
        return []
    with ThreadPoolExecutor(max_workers=min(parallelism, len(prompts))) as pool:
        list(pool.map(work, range(len(prompts))))
    return results


class WireBackend:
    """Client for an HTTP chat-completions endpoint.

    The auth token is read from the environment variable ``token_env`` at
    call time and sent as a bearer token when present.
    """

    def __init__(self, endpoint: str, model: str, token_env: str = "LLM_API_KEY",
                 temperature: float | None = None, timeout: float = DEFAULT_TIMEOUT):
        if not endpoint:
            raise ValueError("endpoint URL required")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.token_env = token_env
        self.temperature = temperature
        self.timeout = timeout
        self.name = f"wire:{model}@{self.endpoint}"
        self._local = threading.local()

    def _session(self) -> requests.Session:
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = self._local.session = requests.Session()
        return sess

    def generate(self, request: GenerationRequest) -> str:
        temperature = request.temperature if self.temperature is None else self.temperature
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": temperature,
            "max_tokens": request.max_output_chars,
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env) if self.token_env else None
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._session().post(f"{self.endpoint}/chat/completions", json=body,
                                        headers=headers, timeout=self.timeout)
        except requests.Timeout as exc:
            raise BackendError("timeout", str(exc)) from exc
        except requests.RequestException as exc:
            raise BackendError("transport", str(exc)) from exc
        if not 200 <= resp.status_code < 300:
            raise BackendError("http_status", str(resp.status_code))
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed_response", f"{type(exc).__name__}: {exc}") from exc
        if not isinstance(content, str):
            raise BackendError("malformed_response", "message content is not a string")
        return content


def wire_backend(endpoint: str, model: str, token_env: str = "LLM_API_KEY", **kwargs) -> WireBackend:
    return WireBackend(endpoint, model, token_env, **kwargs)


class EchoBackend:
    """Returns the prompt unchanged."""

    name = "echo"

    def generate(self, request: GenerationRequest) -> str:
        return request.prompt


class EchoGoldBackend:
    """A perfect model: answers each prompt with the gold encoding of its sentence."""

    def __init__(self, corpus: Iterable[Sentence], schemas: Mapping[str, DatasetSchema],
                 strategy: str, template: PromptTemplate | None = None):
        self.schemas = schemas
        self.strategy = strategy
        self.name = f"echo-gold:{strategy}"
        self._pattern = sentence_pattern(template or PromptTemplate.default(strategy))
        self._by_text: dict[str, list[Sentence]] = {}
        for s in corpus:
            self._by_text.setdefault(s.text, []).append(s)

    def lookup(self, prompt: str) -> Sentence:
        m = self._pattern.fullmatch(prompt)
        candidates = self._by_text.get(m.group("sentence"), []) if m else []
        if not candidates:
            # the prompt did not come from the expected template
            hits = [t for t in self._by_text if t and t in prompt]
            if hits:
                candidates = self._by_text[max(hits, key=len)]
        if not candidates:
            raise UnknownSentence(prompt[:80])
        if len(candidates) > 1:
            named = [s for s in candidates if s.dataset in prompt]
            candidates = named or candidates
        return candidates[0]

    def generate(self, request: GenerationRequest) -> str:
        s = self.lookup(request.prompt)
        return codec.encode(self.strategy, s, self.schemas.get(s.dataset)).payload


def echo_gold_backend(corpus, schemas, strategy, template=None) -> EchoGoldBackend:
    return EchoGoldBackend(corpus, schemas, strategy, template)


class Noise(NamedTuple):
    text: str
    touched: frozenset[int]  # indices of the input that were substituted, deleted or preceded by an insertion


NOISE_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


def add_char_noise(text: str, rate: float, rng: random.Random, alphabet: str = NOISE_ALPHABET) -> Noise:
    """Independently corrupt each character with probability ``rate``.

    A corrupted character is substituted, deleted, or gets a random character
    inserted before it, with equal odds. Replacement characters come from
    ``alphabet``.
    """
    out, touched = [], set()
    for i, ch in enumerate(text):
        if rng.random() >= rate:
            out.append(ch)
            continue
        touched.add(i)
        op = rng.randrange(3)
        if op == 0:
            out.append(rng.choice([c for c in alphabet if c != ch] or alphabet))
        elif op == 2:
            out.append(rng.choice(alphabet))
            out.append(ch)
    return Noise("".join(out), frozenset(touched))


class PerturbingBackend:
    """Wraps a backend and applies seeded character noise to its output.

    The noise stream depends only on ``seed`` and the prompt, so results do
    not depend on request scheduling.
    """

    def __init__(self, inner: Backend, rate: float, seed: int = 0, alphabet: str = NOISE_ALPHABET):
        self.inner = inner
        self.rate = rate
        self.seed = seed
        self.alphabet = alphabet
        self.name = f"perturb({rate}):{inner.name}"

    def corrupt(self, payload: str, prompt: str) -> Noise:
        rng = random.Random(f"{self.seed}\x00{prompt}")
        return add_char_noise(payload, self.rate, rng, self.alphabet)

    def generate(self, request: GenerationRequest) -> str:
        return self.corrupt(self.inner.generate(request), request.prompt).text
