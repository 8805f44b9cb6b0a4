"""Canonical line-delimited corpus files and schema files."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ParseError, SchemaNotFound, ValidationError
from .model import DatasetSchema, EntitySpan, Sentence, validate_sentence

log = logging.getLogger(__name__)


def sentence_to_record(s: Sentence) -> dict:
    return {
        "id": s.id,
        "dataset": s.dataset,
        "language": s.language,
        "text": s.text,
        "entities": [
            {"start": e.start, "end": e.end, "type": e.etype, "text": e.text}
            for e in s.entities
        ],
    }


def dumps_sentence(s: Sentence) -> str:
    return json.dumps(sentence_to_record(s), ensure_ascii=False)


def record_to_sentence(rec: dict) -> Sentence:
    """Build a Sentence from a decoded record; raises KeyError/TypeError on bad shape."""
    ents = []
    for e in rec["entities"]:
        start, end = e["start"], e["end"]
        if not (isinstance(start, int) and isinstance(end, int)) or isinstance(start, bool) or isinstance(end, bool):
            raise TypeError("entity offsets must be integers")
        ents.append(EntitySpan(start, end, str(e["type"]), str(e["text"])))
    for key in ("id", "dataset", "language", "text"):
        if not isinstance(rec[key], str):
            raise TypeError(f"field {key!r} must be a string")
    return Sentence(rec["id"], rec["text"], rec["language"], rec["dataset"], tuple(ents))


class LoadStats:
    def __init__(self):
        self.loaded = 0
        self.skipped = 0
        self.problems: list[str] = []

    def __repr__(self):
        return f"LoadStats(loaded={self.loaded}, skipped={self.skipped})"


def load_corpus(
    path,
    schemas: Mapping[str, DatasetSchema] | None = None,
    strict: bool = True,
    stats: LoadStats | None = None,
) -> list[Sentence]:
    """Read a canonical corpus file.

    With ``schemas`` given, every record is validated against the schema named
    by its ``dataset`` field. In strict mode the first problem raises; in
    lenient mode the record is skipped and counted in ``stats``.
    """
    stats = stats if stats is not None else LoadStats()
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                s = record_to_sentence(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
                if strict:
                    raise ParseError(lineno, f"{type(exc).__name__}: {exc}") from exc
                stats.skipped += 1
                stats.problems.append(f"line {lineno}: unparseable ({exc})")
                continue
            schema = None
            if schemas is not None:
                schema = schemas.get(s.dataset)
                if schema is None:
                    if strict:
                        raise SchemaNotFound(s.dataset)
                    stats.skipped += 1
                    stats.problems.append(f"line {lineno}: no schema {s.dataset!r}")
                    continue
            violations = validate_sentence(s, schema)
            if violations:
                if strict:
                    raise ValidationError(lineno, violations)
                stats.skipped += 1
                stats.problems.append(f"line {lineno}: " + "; ".join(map(str, violations)))
                continue
            out.append(s)
            stats.loaded += 1
    if stats.skipped:
        log.warning("skipped %d invalid records in %s", stats.skipped, path)
    return out


def write_corpus(sentences: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(dumps_sentence(s))
            fh.write("\n")


def load_schema(path) -> DatasetSchema:
    with open(path, encoding="utf-8") as fh:
        return DatasetSchema.from_dict(json.load(fh))


def load_schemas(directory) -> dict[str, DatasetSchema]:
    """Load every ``*.json`` schema file in ``directory``, keyed by schema name."""
    schemas = {}
    for p in sorted(Path(directory).glob("*.json")):
        schema = load_schema(p)
        if schema.name in schemas:
            raise ValueError(f"schema {schema.name!r} defined twice in {directory}")
        schemas[schema.name] = schema
    return schemas


def write_schema(schema: DatasetSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def bundled_schemas() -> dict[str, DatasetSchema]:
    """Schemas for the six reference datasets shipped with the package."""
    return load_schemas(Path(__file__).parent / "schemas")
