"""Contrastive entity selector: marked candidates, training samples, filtering.

A candidate mention is presented to a scoring model as its type, a separator
and the sentence with start/end markers spliced around the mention. The
scoring model itself (a fine-tuned classifier) sits behind ``SelectorBackend``.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import BackendError, InsufficientNegatives, MarkerCollision, NoTokenOverlap, ParseError
from .inference import Backend, GenerationRequest
from .model import DatasetSchema, EntitySpan, Sentence, char_span_to_token_span, tokenize

log = logging.getLogger(__name__)

DEFAULT_MARKERS = ("⟨e⟩", "⟨/e⟩")
SEPARATOR = " | "
SHIFTS = (-2, -1, 1, 2)
MAX_TRIES = 16


@dataclass(frozen=True)
class MarkedCandidate:
    sentence_id: str
    candidate: EntitySpan
    marked_text: str
    selector_input: str


def mark_candidate(s: Sentence, e: EntitySpan, s1: str = DEFAULT_MARKERS[0], s2: str = DEFAULT_MARKERS[1]) -> MarkedCandidate:
    if not s1 or not s2:
        raise ValueError("markers must be non-empty")
    for marker in (s1, s2):
        if marker in s.text:
            raise MarkerCollision(f"marker {marker!r} occurs in sentence {s.id}")
    if not 0 <= e.start < e.end <= len(s.text):
        raise ValueError(f"span ({e.start}, {e.end}) outside sentence {s.id}")
    t = s.text
    marked = t[:e.start] + s1 + t[e.start:e.end] + s2 + t[e.end:]
    return MarkedCandidate(s.id, e, marked, e.etype + SEPARATOR + marked)


def unmark(marked_text: str, s1: str = DEFAULT_MARKERS[0], s2: str = DEFAULT_MARKERS[1]) -> tuple[str, int, int]:
    """Inverse of the splice: ``(source text, start, end)``."""
    i = marked_text.index(s1)
    j = marked_text.index(s2, i + len(s1))
    text = marked_text[:i] + marked_text[i + len(s1):j] + marked_text[j + len(s2):]
    return text, i, j - len(s1)


def split_selector_input(selector_input: str) -> tuple[str, str]:
    etype, sep, marked = selector_input.partition(SEPARATOR)
    if not sep:
        raise ValueError("selector input lacks the type separator")
    return etype, marked


@dataclass(frozen=True)
class Provenance:
    kind: str  # gold | shift_start | shift_end | type_swap
    delta: int | None = None
    old_type: str | None = None
    new_type: str | None = None
    anchor: tuple[int, int, str] | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.delta is not None:
            d["delta"] = self.delta
        if self.old_type is not None:
            d["from"] = self.old_type
            d["to"] = self.new_type
        if self.anchor is not None:
            d["anchor"] = list(self.anchor)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        anchor = tuple(d["anchor"]) if "anchor" in d else None
        return cls(d["kind"], d.get("delta"), d.get("from"), d.get("to"), anchor)


GOLD = Provenance("gold")


@dataclass(frozen=True)
class SelectorSample:
    candidate: MarkedCandidate
    label: int
    provenance: Provenance

    def to_record(self) -> dict:
        c = self.candidate
        return {
            "input": c.selector_input,
            "label": self.label,
            "meta": {
                "sentence_id": c.sentence_id,
                "start": c.candidate.start,
                "end": c.candidate.end,
                "type": c.candidate.etype,
                "text": c.candidate.text,
                "provenance": self.provenance.to_dict(),
            },
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SelectorSample":
        meta = rec["meta"]
        etype, marked = split_selector_input(rec["input"])
        span = EntitySpan(meta["start"], meta["end"], meta["type"], meta["text"])
        cand = MarkedCandidate(meta["sentence_id"], span, marked, rec["input"])
        label = rec["label"]
        if label not in (0, 1) or isinstance(label, bool):
            raise ValueError(f"label must be 0 or 1, got {label!r}")
        return cls(cand, label, Provenance.from_dict(meta["provenance"]))


def _shift(anchor: EntitySpan, tokens, kind: str, delta: int, text: str) -> EntitySpan | None:
    first, last = char_span_to_token_span(anchor, tokens)
    if kind == "shift_start":
        k = first + delta
        if not 0 <= k <= last:
            return None
        start, end = tokens[k].start, anchor.end
    else:
        k = last + delta
        if not first <= k < len(tokens):
            return None
        start, end = anchor.start, tokens[k].end
    if not 0 <= start < end <= len(text):
        return None
    return EntitySpan(start, end, anchor.etype, text[start:end])


def gen_selector_dataset(
    corpus: Sequence[Sentence],
    schemas: Mapping[str, DatasetSchema],
    seed: int,
    total: int = 10000,
    neg_ratio: float = 0.5,
    markers: tuple[str, str] = DEFAULT_MARKERS,
) -> list[SelectorSample]:
    """Sample gold mentions as positives and perturbed mentions as negatives.

    A negative takes a random gold anchor and either moves its start or its
    end by 1 or 2 tokens (in either direction) or swaps its type for another
    type of the same schema. Candidates that are empty, out of bounds or equal
    to any gold mention of the sentence are redrawn; an anchor is abandoned
    after 16 failed draws.
    """
    if not 0 <= neg_ratio <= 1:
        raise ValueError("neg_ratio must lie in [0, 1]")
    rng = random.Random(seed)
    usable = [s for s in corpus if not any(m in s.text for m in markers)]
    if len(usable) < len(corpus):
        log.warning("%d sentences contain a marker string and were skipped", len(corpus) - len(usable))
    anchors = [(s, e) for s in usable for e in s.entities]
    if not anchors:
        raise InsufficientNegatives("corpus has no usable entities")
    n_pos = math.ceil(total * (1 - neg_ratio))
    n_neg = total - n_pos

    positives = []
    while len(positives) < n_pos:
        batch = rng.sample(range(len(anchors)), min(len(anchors), n_pos - len(positives)))
        for k in batch:
            s, e = anchors[k]
            positives.append(SelectorSample(mark_candidate(s, e, *markers), 1, GOLD))

    tokens_cache: dict[str, list] = {}
    gold_keys = {s.id: {e.key for e in s.entities} for s in usable}
    negatives = []
    consecutive_failures = 0
    patience = max(1000, 10 * len(anchors))
    while len(negatives) < n_neg:
        s, anchor = anchors[rng.randrange(len(anchors))]
        tokens = tokens_cache.get(s.id)
        if tokens is None:
            tokens = tokens_cache[s.id] = tokenize(s.text, s.language)
        found = None
        for _ in range(MAX_TRIES):
            kind = rng.choice(("shift_start", "shift_end", "type_swap"))
            if kind == "type_swap":
                others = [t for t in schemas[s.dataset].type_names if t != anchor.etype]
                if not others:
                    continue
                new_type = rng.choice(others)
                cand = EntitySpan(anchor.start, anchor.end, new_type, anchor.text)
                prov = Provenance(kind, None, anchor.etype, new_type, anchor.key)
            else:
                delta = rng.choice(SHIFTS)
                try:
                    cand = _shift(anchor, tokens, kind, delta, s.text)
                except NoTokenOverlap:
                    cand = None
                if cand is None:
                    continue
                prov = Provenance(kind, delta, anchor=anchor.key)
            if cand.key in gold_keys[s.id]:
                continue
            found = SelectorSample(mark_candidate(s, cand, *markers), 0, prov)
            break
        if found is None:
            consecutive_failures += 1
            if consecutive_failures > patience:
                raise InsufficientNegatives(f"only {len(negatives)} of {n_neg} negatives could be generated")
            continue
        consecutive_failures = 0
        negatives.append(found)

    samples = positives + negatives
    rng.shuffle(samples)
    return samples


def emit_selector_file(samples: Iterable[SelectorSample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_record(), ensure_ascii=False))
            fh.write("\n")


def load_selector_file(path) -> list[SelectorSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(SelectorSample.from_record(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(lineno, f"{type(exc).__name__}: {exc}") from exc
    return out


# --- scoring backends ---------------------------------------------------------


class SelectorBackend(Protocol):
    name: str

    def score(self, selector_input: str) -> float: ...


class GoldOracleScorer:
    """Scores 1.0 exactly when the marked candidate is a gold mention."""

    name = "gold-oracle"

    def __init__(self, corpus: Iterable[Sentence], markers: tuple[str, str] = DEFAULT_MARKERS):
        self.markers = markers
        self._gold: dict[str, set] = {}
        for s in corpus:
            self._gold.setdefault(s.text, set()).update(e.key for e in s.entities)

    def score(self, selector_input: str) -> float:
        etype, marked = split_selector_input(selector_input)
        text, start, end = unmark(marked, *self.markers)
        return 1.0 if (start, end, etype) in self._gold.get(text, ()) else 0.0


class ConstantScorer:
    def __init__(self, value: float):
        self.value = value
        self.name = f"constant({value})"

    def score(self, selector_input: str) -> float:
        return self.value


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class ChatScorer:
    """Scores through a chat backend whose first output line is a number in [0, 1]."""

    def __init__(self, backend: Backend, temperature: float = 0.0):
        self.backend = backend
        self.temperature = temperature
        self.name = f"chat:{backend.name}"

    def score(self, selector_input: str) -> float:
        raw = self.backend.generate(GenerationRequest(selector_input, 64, self.temperature))
        first = raw.strip().splitlines()[0] if raw.strip() else ""
        m = _NUMBER.fullmatch(first.strip()) or _NUMBER.search(first)
        if not m:
            raise BackendError("malformed_response", f"no score in {first[:40]!r}")
        value = float(m.group(0))
        if not 0.0 <= value <= 1.0:
            raise BackendError("malformed_response", f"score {value} outside [0, 1]")
        return value


@dataclass
class ScoreRecord:
    sentence_id: str
    start: int
    end: int
    etype: str
    score: float | None
    kept: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "start": self.start,
            "end": self.end,
            "type": self.etype,
            "score": self.score,
            "kept": self.kept,
            "error": self.error,
        }


@dataclass
class FilterResult:
    sentences: list[Sentence]
    audit: list[ScoreRecord] = field(default_factory=list)

    @property
    def diagnostics(self) -> list[str]:
        return [f"{r.sentence_id} {r.etype}({r.start},{r.end}): {r.error}" for r in self.audit if r.error]


def filter_predictions(
    predictions: Sequence[Sentence],
    backend: SelectorBackend,
    threshold: float = 0.5,
    markers: tuple[str, str] = DEFAULT_MARKERS,
    parallelism: int = 1,
) -> FilterResult:
    """Keep predicted mentions whose selector score is at least ``threshold``.

    ``predictions`` are sentences whose ``entities`` hold the predicted
    mentions. Order is preserved. When a candidate cannot be scored (backend
    error, marker collision) it is kept and the reason recorded.
    """
    jobs = [(si, e) for si, s in enumerate(predictions) for e in s.entities]

    def run(job):
        si, e = job
        s = predictions[si]
        try:
            cand = mark_candidate(s, e, *markers)
            value = float(backend.score(cand.selector_input))
        except (BackendError, MarkerCollision, ValueError) as exc:
            return ScoreRecord(s.id, e.start, e.end, e.etype, None, True, f"{type(exc).__name__}: {exc}")
        return ScoreRecord(s.id, e.start, e.end, e.etype, value, value >= threshold)

    if parallelism > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            audit = list(pool.map(run, jobs))
    else:
        audit = [run(j) for j in jobs]
    for rec in audit:
        if rec.error:
            log.warning("selector kept %s (%d, %d) unscored: %s", rec.sentence_id, rec.start, rec.end, rec.error)

    kept: list[list[EntitySpan]] = [[] for _ in predictions]
    for (si, e), rec in zip(jobs, audit):
        if rec.kept:
            kept[si].append(e)
    return FilterResult([s.with_entities(k) for s, k in zip(predictions, kept)], audit)
