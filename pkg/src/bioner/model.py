"""Core domain types, tokenization and sentence validation.

Offsets everywhere are Python ``str`` indices (Unicode code points), with
``start`` inclusive and ``end`` exclusive.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import NoTokenOverlap

LANGUAGES = ("zh", "en")

# characters a type name may not contain; they are structural in the
# symbolic and HTML payloads
_RESERVED_IN_TYPE = set(":<>[]\\\n\r")


@dataclass(frozen=True, order=True)
class EntitySpan:
    start: int
    end: int
    etype: str
    text: str = field(default="", compare=True)

    @classmethod
    def from_sentence(cls, text: str, start: int, end: int, etype: str) -> "EntitySpan":
        return cls(start, end, etype, text[start:end])

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.etype)

    def overlaps(self, other: "EntitySpan") -> int:
        """Number of shared characters with ``other``."""
        return max(0, min(self.end, other.end) - max(self.start, other.start))

    def contains(self, other: "EntitySpan") -> bool:
        return self.start <= other.start and other.end <= self.end

    def crosses(self, other: "EntitySpan") -> bool:
        """True for partial overlap without containment."""
        return self.overlaps(other) > 0 and not (self.contains(other) or other.contains(self))


@dataclass(frozen=True)
class Sentence:
    id: str
    text: str
    language: str
    dataset: str
    entities: tuple[EntitySpan, ...] = ()

    def __post_init__(self):
        if not isinstance(self.entities, tuple):
            object.__setattr__(self, "entities", tuple(self.entities))

    def with_entities(self, entities: Iterable[EntitySpan]) -> "Sentence":
        return Sentence(self.id, self.text, self.language, self.dataset, tuple(entities))

    def span(self, start: int, end: int, etype: str) -> EntitySpan:
        return EntitySpan.from_sentence(self.text, start, end, etype)


@dataclass(frozen=True)
class DatasetSchema:
    """A dataset's name, language and ordered entity-type definitions."""

    name: str
    language: str
    types: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple((str(n), str(d)) for n, d in self.types))
        if self.language not in LANGUAGES:
            raise ValueError(f"unsupported language {self.language!r}")
        seen = set()
        for name, _ in self.types:
            if not name or name != name.strip():
                raise ValueError(f"type name {name!r} is empty or padded")
            if _RESERVED_IN_TYPE & set(name) or name.startswith("/"):
                raise ValueError(f"type name {name!r} contains a reserved character")
            if name in seen:
                raise ValueError(f"duplicate type name {name!r}")
            seen.add(name)

    @property
    def type_names(self) -> list[str]:
        return [n for n, _ in self.types]

    def definition(self, name: str) -> str:
        return dict(self.types)[name]

    def __contains__(self, etype: str) -> bool:
        return any(n == etype for n, _ in self.types)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        return cls(d["name"], d["language"], tuple((t["name"], t["definition"]) for t in d["types"]))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "language": self.language,
            "types": [{"name": n, "definition": d} for n, d in self.types],
        }


class Token(NamedTuple):
    start: int
    end: int
    surface: str


def tokenize(text: str, language: str) -> list[Token]:
    """Split ``text`` into tokens; whitespace is the only separator.

    Chinese text yields one token per non-whitespace character.  English text
    groups maximal runs of letters/digits and isolates every other character.
    """
    tokens = []
    if language == "zh":
        for i, ch in enumerate(text):
            if not ch.isspace():
                tokens.append(Token(i, i + 1, ch))
        return tokens
    if language != "en":
        raise ValueError(f"unsupported language {language!r}")
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isalnum():
            j = i + 1
            while j < n and text[j].isalnum():
                j += 1
            tokens.append(Token(i, j, text[i:j]))
            i = j
        else:
            tokens.append(Token(i, i + 1, ch))
            i += 1
    return tokens


def char_span_to_token_span(span, tokens: Sequence[Token]) -> tuple[int, int]:
    """Indices of the first and last token overlapping ``[span.start, span.end)``.

    ``span`` may be an EntitySpan or a ``(start, end)`` pair.
    """
    start, end = (span.start, span.end) if hasattr(span, "start") else span
    ends = [t.end for t in tokens]
    first = bisect.bisect_right(ends, start)
    if first >= len(tokens) or tokens[first].start >= end:
        raise NoTokenOverlap(f"span ({start}, {end}) covers no token")
    starts = [t.start for t in tokens]
    last = bisect.bisect_left(starts, end) - 1
    return first, last


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    entity: int | None = None

    def __str__(self):
        where = f" (entity {self.entity})" if self.entity is not None else ""
        return f"{self.kind}{where}: {self.message}"


def validate_sentence(s: Sentence, schema: DatasetSchema | None) -> list[Violation]:
    """Check every Sentence/EntitySpan invariant; returns one Violation per failure."""
    out = []
    if s.language not in LANGUAGES:
        out.append(Violation("UnknownLanguage", f"language {s.language!r}"))
    if schema is not None:
        if schema.name != s.dataset:
            out.append(Violation("SchemaMismatch", f"sentence dataset {s.dataset!r} vs schema {schema.name!r}"))
        elif schema.language != s.language:
            out.append(Violation("LanguageMismatch", f"{s.language!r} vs schema {schema.language!r}"))
    n = len(s.text)
    seen = set()
    for i, e in enumerate(s.entities):
        if not (0 <= e.start < e.end <= n):
            out.append(Violation("OffsetOutOfRange", f"({e.start}, {e.end}) for text of length {n}", i))
        elif s.text[e.start:e.end] != e.text:
            out.append(Violation("TextMismatch", f"{e.text!r} != {s.text[e.start:e.end]!r}", i))
        if schema is not None and e.etype not in schema:
            out.append(Violation("UnknownType", e.etype, i))
        if e.key in seen:
            out.append(Violation("DuplicateEntity", f"{e.key}", i))
        seen.add(e.key)
    return out
