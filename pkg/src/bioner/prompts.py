"""Instruction prompts, supervised targets and multi-dataset mixing."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import codec
from .errors import MissingPlaceholder, OverlapUnserializable
from .model import DatasetSchema, Sentence

DATASET_SLOT = "<Dataset-Name>"
TYPES_SLOT = "<Type-Definitions>"
SENTENCE_SLOT = "<Sentence>"
PLACEHOLDERS = (DATASET_SLOT, TYPES_SLOT, SENTENCE_SLOT)

_TEMPLATE_DIR = Path(__file__).parent / "templates"
_SLOT_RE = re.compile("|".join(re.escape(p) for p in PLACEHOLDERS))


@dataclass(frozen=True)
class PromptTemplate:
    preamble: str
    strategy: str = "symbolic"

    def __post_init__(self):
        if self.strategy not in codec.STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for slot in PLACEHOLDERS:
            count = self.preamble.count(slot)
            if count != 1:
                raise MissingPlaceholder(f"{slot} appears {count} times in template (expected once)")

    @classmethod
    def load(cls, path, strategy: str = "symbolic") -> "PromptTemplate":
        return cls(Path(path).read_text(encoding="utf-8"), strategy)

    @classmethod
    def default(cls, strategy: str = "symbolic") -> "PromptTemplate":
        return cls.load(_TEMPLATE_DIR / f"{strategy}.txt", strategy)


def type_definitions(schema: DatasetSchema) -> str:
    return "\n".join(f"{name}: {definition}" for name, definition in schema.types)


def render_prompt(s: Sentence, schema: DatasetSchema, tmpl: PromptTemplate) -> str:
    """Fill the template's three slots; the sentence is inserted verbatim.

    A zero-shot prompt for an unseen dataset is produced the same way, by
    passing that dataset's schema.
    """
    if s.dataset != schema.name:
        raise ValueError(f"sentence {s.id} belongs to {s.dataset!r}, not {schema.name!r}")
    values = {DATASET_SLOT: schema.name, TYPES_SLOT: type_definitions(schema), SENTENCE_SLOT: s.text}
    # single pass so slot-like text inside the values is left alone
    return _SLOT_RE.sub(lambda m: values[m.group(0)], tmpl.preamble)


def sentence_pattern(tmpl: PromptTemplate) -> re.Pattern:
    """Regex over rendered prompts capturing the sentence slot as group ``sentence``."""
    pieces = []
    for part in re.split(f"({_SLOT_RE.pattern})", tmpl.preamble):
        if part == SENTENCE_SLOT:
            pieces.append("(?P<sentence>.*)")
        elif part in PLACEHOLDERS:
            pieces.append(".*?")
        else:
            pieces.append(re.escape(part))
    return re.compile("".join(pieces), re.DOTALL)


@dataclass(frozen=True)
class TrainingRecord:
    instruction: str
    output: str
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "output": self.output, "meta": self.meta}


def build_training_record(
    s: Sentence,
    schema: DatasetSchema,
    tmpl: PromptTemplate,
    strategy: str | None = None,
) -> TrainingRecord:
    """Prompt plus gold payload; raises OverlapUnserializable for crossing spans."""
    strategy = strategy or tmpl.strategy
    tagged = codec.encode(strategy, s, schema)
    decoded = codec.decode(strategy, tagged, s, schema)
    if decoded.failed or decoded.entities != sorted(s.entities):
        raise AssertionError(f"payload for {s.id} does not decode back to its gold entities")
    meta = {"dataset": s.dataset, "language": s.language, "id": s.id, "strategy": strategy}
    return TrainingRecord(render_prompt(s, schema, tmpl), tagged.payload, meta)


def build_training_records(
    sentences: Iterable[Sentence],
    schemas: Mapping[str, DatasetSchema],
    templates: Mapping[str, PromptTemplate] | PromptTemplate,
    strategy: str | None = None,
) -> tuple[list[TrainingRecord], list[tuple[str, str]]]:
    """Build records for many sentences; unserializable ones are skipped and reported.

    ``templates`` may be one template for every dataset or a per-dataset map.
    Returns ``(records, skipped)`` with ``skipped`` holding ``(sentence id, reason)``.
    """
    records, skipped = [], []
    for s in sentences:
        tmpl = templates if isinstance(templates, PromptTemplate) else templates[s.dataset]
        try:
            records.append(build_training_record(s, schemas[s.dataset], tmpl, strategy))
        except OverlapUnserializable as exc:
            skipped.append((s.id, str(exc)))
    return records, skipped


def mix_datasets(corpora: Mapping[str, list[Sentence]], seed: int) -> list[Sentence]:
    """Pool sentences by language, shuffle each pool, then alternate zh/en.

    Chinese goes first; once one pool is exhausted the rest of the other follows.
    Corpora are pooled in name order so the result depends only on content and seed.
    """
    zh: list[Sentence] = []
    en: list[Sentence] = []
    for name in sorted(corpora):
        for s in corpora[name]:
            if s.language == "zh":
                zh.append(s)
            elif s.language == "en":
                en.append(s)
            else:
                raise ValueError(f"sentence {s.id}: unsupported language {s.language!r}")
    rng = random.Random(seed)
    rng.shuffle(zh)
    rng.shuffle(en)
    out = []
    for k in range(max(len(zh), len(en))):
        if k < len(zh):
            out.append(zh[k])
        if k < len(en):
            out.append(en[k])
    return out


def emit_finetune_file(records: Iterable[TrainingRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False))
            fh.write("\n")


def load_finetune_file(path) -> list[TrainingRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(TrainingRecord(d["instruction"], d["output"], d["meta"]))
    return out
