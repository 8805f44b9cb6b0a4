"""Seeded generators of synthetic annotated sentences.

Used by the test suite, the acceptance checks and the demo scripts; real
corpora are never needed to exercise the pipeline.
"""

from __future__ import annotations

import random

from .model import DatasetSchema, EntitySpan, Sentence, tokenize

# punctuation that is structural in one of the payload formats is included on purpose
EN_PUNCT = list(",.;:()[]<>\\/-+%'\"")
ZH_PUNCT = list("，。；：（）、[]<>\\/-")
EN_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIKLMNOPRSTU"
DIGITS = "0123456789"


def _en_word(rng: random.Random) -> str:
    n = rng.choice((1, 2, 3, 4, 5, 6, 7, 8, 9, 10))
    pool = EN_LETTERS if rng.random() < 0.85 else EN_LETTERS + DIGITS
    return "".join(rng.choice(pool) for _ in range(n))


def random_text(rng: random.Random, language: str, max_len: int = 200) -> str:
    target = rng.randint(1, max_len)
    parts: list[str] = []
    size = 0
    while size < target:
        if language == "zh":
            r = rng.random()
            if r < 0.8:
                piece = chr(rng.randint(0x4E00, 0x9FA5))
            elif r < 0.9:
                piece = rng.choice(ZH_PUNCT)
            elif r < 0.95:
                piece = _en_word(rng)[:3]
            else:
                piece = " "
        else:
            r = rng.random()
            if r < 0.15:
                piece = rng.choice(EN_PUNCT)
            else:
                piece = _en_word(rng)
            if parts and rng.random() < 0.7:
                piece = " " + piece
        parts.append(piece)
        size += len(piece)
    return "".join(parts)[:target]


def _laminar_intervals(rng, lo, hi, depth, budget, out):
    """Append non-crossing token intervals ``(a, b)`` (inclusive) inside [lo, hi]."""
    if lo > hi or budget[0] <= 0:
        return
    pos = lo
    while pos <= hi and budget[0] > 0:
        if rng.random() < 0.55:
            pos += 1
            continue
        a = pos
        b = min(hi, a + rng.choice((0, 0, 1, 1, 2, 3, 5)))
        out.append((a, b, depth))
        budget[0] -= 1
        if depth < 3 and rng.random() < 0.4:
            _laminar_intervals(rng, a, b, depth + 1, budget, out)
        pos = b + 1 + rng.choice((0, 0, 1, 2))


def random_sentence(
    rng: random.Random,
    schema: DatasetSchema,
    sid: str,
    max_len: int = 200,
    max_entities: int = 8,
) -> Sentence:
    """A sentence with up to ``max_entities`` token-aligned, non-crossing mentions.

    Nesting depth is at most 3; identical spans with different types and
    same-type nesting both occur.
    """
    text = random_text(rng, schema.language, max_len)
    tokens = tokenize(text, schema.language)
    intervals: list[tuple[int, int, int]] = []
    if tokens:
        _laminar_intervals(rng, 0, len(tokens) - 1, 1, [rng.randint(0, max_entities)], intervals)
    names = schema.type_names
    ents: dict[tuple, EntitySpan] = {}
    for a, b, _ in intervals:
        start, end = tokens[a].start, tokens[b].end
        e = EntitySpan(start, end, rng.choice(names), text[start:end])
        ents.setdefault(e.key, e)
    return Sentence(sid, text, schema.language, schema.name, tuple(ents.values()))


def random_corpus(
    seed: int,
    schemas: list[DatasetSchema],
    size: int,
    max_len: int = 200,
    max_entities: int = 8,
) -> list[Sentence]:
    rng = random.Random(seed)
    out = []
    for k in range(size):
        schema = schemas[k % len(schemas)]
        out.append(random_sentence(rng, schema, f"{schema.name}-{k}", max_len, max_entities))
    return out
