"""Encoders and decoders for the three generative tagging formats.

``json``      a JSON array of ``{start_idx, end_idx, type, entity}`` records,
              character offsets, end-exclusive.
``html``      the sentence with ``<type:entity> ... </type:entity>`` wrapped
              around every mention (nesting allowed).
``symbolic``  one line per schema type, ``<type>: <sentence copy>`` with
              ``[`` / ``]`` around every mention of that type.

Decoders are total: malformed model output never raises, it produces a
DecodeOutcome whose diagnostics list everything that was dropped or repaired.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .align import DEFAULT_MAX_RATIO, align_to_source
from .errors import AlignmentRejected, OverlapUnserializable
from .model import DatasetSchema, EntitySpan, Sentence

STRATEGIES = ("json", "html", "symbolic")


@dataclass(frozen=True)
class TaggedText:
    strategy: str
    payload: str
    dataset: str = ""


class Diagnostic(NamedTuple):
    severity: str  # "info" | "warning" | "error"
    kind: str  # "Repair" | "Dropped" | "Rejected" | "Unparseable" | ...
    message: str


@dataclass
class DecodeOutcome:
    entities: list[EntitySpan] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    failed: bool = False

    def note(self, severity, kind, message):
        self.diagnostics.append(Diagnostic(severity, kind, message))

    def count(self, kind) -> int:
        return sum(1 for d in self.diagnostics if d.kind == kind)


def _payload(t) -> str:
    return t.payload if isinstance(t, TaggedText) else str(t)


def find_crossing(entities: Iterable[EntitySpan], same_type_only: bool = False):
    """First pair of crossing spans, or None."""
    ents = sorted(entities)
    for i, a in enumerate(ents):
        for b in ents[i + 1:]:
            if b.start >= a.end:
                break
            if same_type_only and a.etype != b.etype:
                continue
            if a.crosses(b):
                return a, b
    return None


def _finish(out: DecodeOutcome, candidates: list[EntitySpan]) -> DecodeOutcome:
    seen = set()
    for e in candidates:
        if e.key in seen:
            out.note("warning", "Dropped", f"duplicate entity {e.key}")
            continue
        seen.add(e.key)
        out.entities.append(e)
    out.entities.sort()
    return out


def _occurrences(text: str, sub: str) -> list[int]:
    hits, pos = [], text.find(sub)
    while pos != -1:
        hits.append(pos)
        pos = text.find(sub, pos + 1)
    return hits


def _nearest_occurrence(text: str, sub: str, near: int) -> int | None:
    hits = _occurrences(text, sub) if sub else []
    if not hits:
        return None
    return min(hits, key=lambda p: (abs(p - near), p))


# --- JSON -----------------------------------------------------------------


def encode_json(s: Sentence) -> TaggedText:
    records = [
        {"start_idx": e.start, "end_idx": e.end, "type": e.etype, "entity": e.text}
        for e in sorted(s.entities)
    ]
    return TaggedText("json", json.dumps(records, ensure_ascii=False), s.dataset)


def _load_json_array(payload: str):
    try:
        return json.loads(payload)
    except json.JSONDecodeError:
        pass
    # tolerate chatter around the array
    lo, hi = payload.find("["), payload.rfind("]")
    if lo != -1 and hi > lo:
        try:
            return json.loads(payload[lo:hi + 1])
        except json.JSONDecodeError:
            return None
    return None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def decode_json(t, source: Sentence, schema: DatasetSchema | None = None) -> DecodeOutcome:
    out = DecodeOutcome()
    data = _load_json_array(_payload(t))
    if not isinstance(data, list):
        out.failed = True
        out.note("error", "Unparseable", "payload is not a JSON array")
        return out
    text = source.text
    n = len(text)
    found = []
    for k, rec in enumerate(data):
        if not isinstance(rec, dict) or not isinstance(rec.get("type"), str):
            out.note("warning", "Dropped", f"record {k}: not an object with a string type")
            continue
        etype = rec["type"]
        if schema is not None and etype not in schema:
            out.note("warning", "Dropped", f"record {k}: unknown type {etype!r}")
            continue
        start, end, entity = rec.get("start_idx"), rec.get("end_idx"), rec.get("entity")
        in_range = _is_int(start) and _is_int(end) and 0 <= start < end <= n
        if not isinstance(entity, str):
            if in_range:
                out.note("warning", "Repair", f"record {k}: no entity text, trusting indices")
                found.append(EntitySpan(start, end, etype, text[start:end]))
            else:
                out.note("warning", "Dropped", f"record {k}: no entity text and bad indices")
            continue
        if in_range and text[start:end] == entity:
            found.append(EntitySpan(start, end, etype, entity))
            continue
        near = start if _is_int(start) else 0
        pos = _nearest_occurrence(text, entity, near)
        if pos is None:
            out.note("warning", "Dropped", f"record {k}: entity {entity!r} not found in source")
            continue
        out.note("info", "Repair", f"record {k}: ({start}, {end}) -> ({pos}, {pos + len(entity)})")
        found.append(EntitySpan(pos, pos + len(entity), etype, entity))
    return _finish(out, found)


# --- HTML -----------------------------------------------------------------

_HTML_SPECIAL = "\\<>"


def _escape(text: str, special: str) -> str:
    return "".join("\\" + c if c in special else c for c in text)


def _html_escape(text: str) -> str:
    return _escape(text, _HTML_SPECIAL)


def encode_html(s: Sentence) -> TaggedText:
    """Wrap each mention in ``<type:entity>``/``</type:entity>``.

    Raises OverlapUnserializable when two mentions cross.
    """
    pair = find_crossing(s.entities)
    if pair:
        raise OverlapUnserializable(*pair)
    # outer-first at opens; closes run in reverse opening order
    order = sorted(s.entities, key=lambda e: (e.start, -e.end, e.etype))
    opens, closes = defaultdict(list), defaultdict(list)
    for e in order:
        opens[e.start].append(e)
        closes[e.end].append(e)
    parts = []
    text = s.text
    for pos in range(len(text) + 1):
        for e in reversed(closes.get(pos, ())):
            parts.append(f"</{e.etype}:{_html_escape(e.text)}>")
        for e in opens.get(pos, ()):
            parts.append(f"<{e.etype}:{_html_escape(e.text)}>")
        if pos < len(text):
            parts.append(_html_escape(text[pos]))
    return TaggedText("html", "".join(parts), s.dataset)


class _Tag(NamedTuple):
    closing: bool
    etype: str
    entity: str
    pos: int  # offset in the tag-stripped text
    raw: int  # offset in the payload


def _scan_html(payload: str, out: DecodeOutcome) -> tuple[str, list[_Tag]]:
    chars, tags = [], []
    i, n = 0, len(payload)
    while i < n:
        c = payload[i]
        if c == "\\" and i + 1 < n:
            chars.append(payload[i + 1])
            i += 2
            continue
        if c != "<":
            chars.append(c)
            i += 1
            continue
        j, buf = i + 1, []
        while j < n and payload[j] not in "<>":
            if payload[j] == "\\" and j + 1 < n:
                buf.append(payload[j + 1])
                j += 2
            else:
                buf.append(payload[j])
                j += 1
        if j >= n or payload[j] != ">":
            out.note("warning", "Repair", f"unterminated '<' at {i} kept as text")
            chars.append(c)
            i += 1
            continue
        content = "".join(buf)
        closing = content.startswith("/")
        body = content[1:] if closing else content
        if ":" not in body:
            out.note("warning", "Dropped", f"malformed tag <{content}> at {i}")
        else:
            etype, entity = body.split(":", 1)
            tags.append(_Tag(closing, etype.strip(), entity, len(chars), i))
        i = j + 1
    return "".join(chars), tags


def _match_tags(tags: list[_Tag], out: DecodeOutcome) -> list[tuple[_Tag, _Tag]]:
    stack: list[_Tag] = []
    pairs = []
    for tag in tags:
        if not tag.closing:
            stack.append(tag)
            continue
        key = (tag.etype, tag.entity)
        hit = next((k for k in range(len(stack) - 1, -1, -1) if (stack[k].etype, stack[k].entity) == key), None)
        if hit is None:
            # tolerate a typo in the closing tag if the innermost open tag has the same type
            if stack and stack[-1].etype == tag.etype:
                out.note("info", "Repair", f"closing tag at {tag.raw} matched by type only")
                hit = len(stack) - 1
            else:
                out.note("warning", "Dropped", f"unmatched closing tag </{tag.etype}:{tag.entity}> at {tag.raw}")
                continue
        for orphan in stack[hit + 1:]:
            out.note("warning", "Dropped", f"unclosed or crossing tag <{orphan.etype}:{orphan.entity}> at {orphan.raw}")
        pairs.append((stack[hit], tag))
        del stack[hit:]
    for orphan in stack:
        out.note("warning", "Dropped", f"unclosed tag <{orphan.etype}:{orphan.entity}> at {orphan.raw}")
    return pairs


def decode_html(
    t,
    source: Sentence,
    schema: DatasetSchema | None = None,
    max_ratio: float | None = DEFAULT_MAX_RATIO,
) -> DecodeOutcome:
    out = DecodeOutcome()
    stripped, tags = _scan_html(_payload(t), out)
    if not tags and out.count("Dropped"):
        out.failed = True
        out.note("error", "Unparseable", "no tag structure recoverable")
        return out
    pairs = _match_tags(tags, out)
    text = source.text
    try:
        al = align_to_source(stripped, text, max_ratio)
    except AlignmentRejected as exc:
        out.failed = True
        out.note("error", "Rejected", str(exc))
        return out
    if al.distance:
        out.note("info", "Aligned", f"text copy differs from source by {al.distance} edits")
    found = []
    for op, cl in pairs:
        if schema is not None and op.etype not in schema:
            out.note("warning", "Dropped", f"unknown type {op.etype!r}")
            continue
        a, b = op.pos, cl.pos
        sa, sb = al.project(a, b)
        if sa < sb and text[sa:sb] == op.entity:
            if stripped[a:b] != op.entity:
                out.note("info", "Repair", f"tag {op.etype}:{op.entity!r} wraps {stripped[a:b]!r}; entity text used")
            found.append(EntitySpan(sa, sb, op.etype, op.entity))
            continue
        pos = _nearest_occurrence(text, op.entity, sa)
        if pos is not None:
            out.note("info", "Repair", f"tag {op.etype}:{op.entity!r} relocated to {pos} by its entity text")
            found.append(EntitySpan(pos, pos + len(op.entity), op.etype, op.entity))
        elif sa < sb:
            out.note("warning", "Repair", f"entity text {op.entity!r} absent from source; kept aligned span")
            found.append(EntitySpan(sa, sb, op.etype, text[sa:sb]))
        else:
            out.note("warning", "Dropped", f"tag {op.etype}:{op.entity!r} has no source span")
    return _finish(out, found)


# --- symbolic ---------------------------------------------------------------

_SYM_SPECIAL = "\\[]"
_SYM_ESCAPES = {"\n": "\\n", "\r": "\\r"}
_SYM_UNESCAPES = {"n": "\n", "r": "\r"}


def _symbolic_escape(ch: str) -> str:
    if ch in _SYM_SPECIAL:
        return "\\" + ch
    return _SYM_ESCAPES.get(ch, ch)


def encode_symbolic(s: Sentence, schema: DatasetSchema) -> TaggedText:
    """One ``<type>: <bracketed copy>`` line per schema type, in schema order."""
    pair = find_crossing(s.entities, same_type_only=True)
    if pair:
        raise OverlapUnserializable(*pair)
    unknown = {e.etype for e in s.entities} - set(schema.type_names)
    if unknown:
        raise ValueError(f"types {sorted(unknown)} not in schema {schema.name!r}")
    escaped = [_symbolic_escape(c) for c in s.text]
    lines = []
    for etype in schema.type_names:
        opens = Counter(e.start for e in s.entities if e.etype == etype)
        closes = Counter(e.end for e in s.entities if e.etype == etype)
        parts = []
        for pos in range(len(escaped) + 1):
            parts.append("]" * closes.get(pos, 0))
            parts.append("[" * opens.get(pos, 0))
            if pos < len(escaped):
                parts.append(escaped[pos])
        lines.append(f"{etype}: {''.join(parts)}")
    return TaggedText("symbolic", "\n".join(lines), s.dataset)


class BracketSpan(NamedTuple):
    start: int  # offsets in the bracket-stripped body
    end: int
    raw_open: int  # offsets of '[' and ']' in the body string
    raw_close: int


@dataclass
class ParsedBody:
    text: str
    spans: list[BracketSpan]
    unmatched_open: list[int]
    unmatched_close: list[int]


def parse_bracket_body(body: str) -> ParsedBody:
    """Strip escapes and brackets; pair brackets by a stack."""
    chars: list[str] = []
    spans, stack, stray = [], [], []
    i, n = 0, len(body)
    while i < n:
        c = body[i]
        if c == "\\" and i + 1 < n:
            nxt = body[i + 1]
            chars.append(_SYM_UNESCAPES.get(nxt, nxt))
            i += 2
            continue
        if c == "[":
            stack.append((len(chars), i))
        elif c == "]":
            if stack:
                pos, raw = stack.pop()
                spans.append(BracketSpan(pos, len(chars), raw, i))
            else:
                stray.append(i)
        else:
            chars.append(c)
        i += 1
    return ParsedBody("".join(chars), spans, [raw for _, raw in stack], stray)


class SymbolicLine(NamedTuple):
    label: str
    body: str
    offset: int  # payload offset of the body's first character
    raw: str = ""
    raw_offset: int = 0


def split_symbolic_lines(payload: str, max_label: int | None = None) -> list[SymbolicLine]:
    """Split a payload into (label, body) lines.

    The label is whatever precedes the first ':'; with ``max_label`` set, a
    colon further into the line than that is treated as body text and the
    label comes back empty.
    """
    lines, offset = [], 0
    for raw in payload.split("\n"):
        line = raw[:-1] if raw.endswith("\r") else raw
        colon = line.find(":")
        if colon == -1 or (max_label is not None and colon > max_label):
            lines.append(SymbolicLine("", line, offset, line, offset))
        else:
            skip = colon + 1
            if line[skip:skip + 1] == " ":
                skip += 1
            lines.append(SymbolicLine(line[:colon].strip(), line[skip:], offset + skip, line, offset))
        offset += len(raw) + 1
    return lines


def _levenshtein(a: str, b: str) -> int:
    row = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        prev, row[0] = row[0], i
        for j, cb in enumerate(b, 1):
            prev, row[j] = row[j], min(row[j] + 1, row[j - 1] + 1, prev + (ca != cb))
    return row[-1]


def _resolve_label(label: str, schema: DatasetSchema, used: set) -> tuple[str | None, bool]:
    """Map a generated label to a schema type: (type, repaired)."""
    names = schema.type_names
    if label in names:
        return label, False
    if not label:
        return None, False
    folded = [n for n in names if n.casefold() == label.casefold()]
    if len(folded) == 1:
        return folded[0], True
    scored = sorted((_levenshtein(label, n), n) for n in names if n not in used)
    if not scored:
        return None, False
    best, name = scored[0]
    unique = len(scored) == 1 or scored[1][0] > best
    if unique and best <= max(1, len(name) // 4):
        return name, True
    return None, False


def _split_merged_line(line: SymbolicLine, schema: DatasetSchema) -> int | None:
    """Offset in ``line.body`` where another ``type:`` prefix starts (lost newline)."""
    best = None
    for name in schema.type_names:
        pos = line.body.find(name + ":")
        while pos != -1 and pos > 0 and line.body[pos - 1] == "\\":
            pos = line.body.find(name + ":", pos + 1)
        if pos > 0 and (best is None or pos < best):
            best = pos
    return best


def _label_from_prefix(line: SymbolicLine, schema: DatasetSchema, used: set) -> SymbolicLine | None:
    """Recover a line whose ``type:`` separator was damaged by matching the line prefix."""
    best = None
    for name in schema.type_names:
        if name in used:
            continue
        tol = max(1, len(name) // 4)
        for size in (len(name), len(name) - 1, len(name) + 1):
            if size <= 0:
                continue
            d = _levenshtein(line.raw[:size], name)
            if d <= tol and (best is None or (d, -size) < best[:2]):
                best = (d, -size, name)
    if best is None:
        return None
    size = -best[1]
    skip = size + (1 if line.raw[size:size + 1] in (":", " ") else 0)
    return SymbolicLine(best[2], line.raw[skip:], line.raw_offset + skip, line.raw, line.raw_offset)


def decode_symbolic(
    t,
    schema: DatasetSchema,
    source: Sentence,
    max_ratio: float | None = DEFAULT_MAX_RATIO,
) -> DecodeOutcome:
    out = DecodeOutcome()
    text = source.text
    used: set[str] = set()
    recognized = False
    found: list[EntitySpan] = []
    max_label = max(len(n) for n in schema.type_names) + 2
    queue = deque(split_symbolic_lines(_payload(t), max_label))
    while queue:
        line = queue.popleft()
        if not line.label and not line.body.strip():
            continue
        etype, repaired = _resolve_label(line.label, schema, used)
        if etype is None:
            recovered = _label_from_prefix(line, schema, used)
            if recovered is None:
                out.note("warning", "Dropped", f"line with unknown type label {line.label!r}")
                continue
            line, etype, repaired = recovered, recovered.label, True
        if repaired:
            out.note("info", "Repair", f"type label {line.label!r} read as {etype!r}")
        if etype in used:
            out.note("warning", "Dropped", f"duplicate line for type {etype!r}")
            continue
        recognized = True
        parsed = parse_bracket_body(line.body)
        for raw in parsed.unmatched_open:
            out.note("warning", "Repair", f"{etype}: discarded unmatched '[' at {line.offset + raw}")
        for raw in parsed.unmatched_close:
            out.note("warning", "Repair", f"{etype}: discarded unmatched ']' at {line.offset + raw}")
        try:
            al = align_to_source(parsed.text, text, max_ratio)
        except AlignmentRejected as exc:
            cut = _split_merged_line(line, schema)
            if cut is not None:
                out.note("info", "Repair", f"{etype}: split merged line at {line.offset + cut}")
                tail_label, _, tail_body = line.body[cut:].partition(":")
                skip = cut + len(tail_label) + 1
                if tail_body.startswith(" "):
                    tail_body, skip = tail_body[1:], skip + 1
                tail_raw = line.body[cut:]
                queue.appendleft(SymbolicLine(tail_label.strip(), tail_body, line.offset + skip,
                                              tail_raw, line.offset + cut))
                queue.appendleft(line._replace(body=line.body[:cut]))
                continue
            used.add(etype)
            out.note("error", "Rejected", f"{etype}: {exc}")
            continue
        used.add(etype)
        if al.distance:
            out.note("info", "Aligned", f"{etype}: copy differs from source by {al.distance} edits")
        for sp in parsed.spans:
            if sp.start == sp.end:
                out.note("warning", "Dropped", f"{etype}: empty brackets at {line.offset + sp.raw_open}")
                continue
            sa, sb = al.project(sp.start, sp.end)
            if sa >= sb:
                out.note("warning", "Dropped", f"{etype}: span at {line.offset + sp.raw_open} has no source characters")
                continue
            found.append(EntitySpan(sa, sb, etype, text[sa:sb]))
    if not recognized:
        out.failed = True
        out.note("error", "Unparseable", "no line carries a known 'type:' prefix")
        out.entities = []
        return out
    return _finish(out, found)


# --- dispatch ---------------------------------------------------------------


def encode(strategy: str, s: Sentence, schema: DatasetSchema | None = None) -> TaggedText:
    if strategy == "json":
        return encode_json(s)
    if strategy == "html":
        return encode_html(s)
    if strategy == "symbolic":
        if schema is None:
            raise ValueError("symbolic encoding needs a schema")
        return encode_symbolic(s, schema)
    raise ValueError(f"unknown strategy {strategy!r}")


def decode(
    strategy: str,
    payload,
    source: Sentence,
    schema: DatasetSchema | None = None,
    max_ratio: float | None = DEFAULT_MAX_RATIO,
) -> DecodeOutcome:
    if strategy == "json":
        return decode_json(payload, source, schema)
    if strategy == "html":
        return decode_html(payload, source, schema, max_ratio)
    if strategy == "symbolic":
        if schema is None:
            raise ValueError("symbolic decoding needs a schema")
        return decode_symbolic(payload, schema, source, max_ratio)
    raise ValueError(f"unknown strategy {strategy!r}")
