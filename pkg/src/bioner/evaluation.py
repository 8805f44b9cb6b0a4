"""Exact-match scoring, error taxonomy and boundary-deviation statistics."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateEntity, NoTokenOverlap
from .model import EntitySpan, Sentence, char_span_to_token_span, tokenize

log = logging.getLogger(__name__)

TYPE, SPAN, TYPE_AND_SPAN, SPURIOUS = "Type", "Span", "TypeAndSpan", "Spurious"
CATEGORIES = (TYPE, SPAN, TYPE_AND_SPAN, SPURIOUS)
BOUNDARY_CATEGORIES = (SPAN, TYPE_AND_SPAN)


@dataclass
class MatchResult:
    true_positives: list = field(default_factory=list)  # (pred, gold)
    errors: list = field(default_factory=list)  # (pred, category, gold or None)
    missed: list = field(default_factory=list)  # gold

    @property
    def predictions(self) -> list[EntitySpan]:
        return [p for p, _ in self.true_positives] + [p for p, _, _ in self.errors]

    @property
    def gold(self) -> list[EntitySpan]:
        consumed = [g for _, _, g in self.errors if g is not None]
        return [g for _, g in self.true_positives] + consumed + self.missed

    def category_counts(self) -> Counter:
        c = Counter({k: 0 for k in CATEGORIES})
        c.update(cat for _, cat, _ in self.errors)
        return c

    def check_conservation(self, n_pred: int | None = None, n_gold: int | None = None) -> None:
        """Raise AssertionError unless prediction and gold counts are conserved."""
        tp = len(self.true_positives)
        counts = self.category_counts()
        consumed = sum(counts[c] for c in (TYPE, SPAN, TYPE_AND_SPAN))
        preds = self.predictions if n_pred is None else [None] * n_pred
        golds = self.gold if n_gold is None else [None] * n_gold
        if len(preds) != tp + sum(counts.values()):
            raise AssertionError(f"|pred|={len(preds)} != TP {tp} + errors {sum(counts.values())}")
        if len(golds) != tp + len(self.missed) + consumed:
            raise AssertionError(f"|gold|={len(golds)} != TP {tp} + missed {len(self.missed)} + consumed {consumed}")

    def __add__(self, other: "MatchResult") -> "MatchResult":
        return MatchResult(
            self.true_positives + other.true_positives,
            self.errors + other.errors,
            self.missed + other.missed,
        )


def _check_unique(items: Sequence[EntitySpan], what: str) -> None:
    keys = [e.key for e in items]
    if len(set(keys)) != len(keys):
        dup = next(k for k, n in Counter(keys).items() if n > 1)
        raise DuplicateEntity(f"{what} list contains {dup} more than once")


def _overlap_rank(p: EntitySpan, g: EntitySpan):
    return (-p.overlaps(g), abs(p.start - g.start) + abs(p.end - g.end), g.start, g.end, g.etype)


def match_entities(pred: Sequence[EntitySpan], gold: Sequence[EntitySpan]) -> MatchResult:
    """One-to-one staged matching of predictions against gold.

    Stages, each over still-unconsumed items: exact span and type (TP); exact
    span, other type (Type); overlapping span, same type (Span); overlapping
    span, other type (TypeAndSpan). Leftover predictions are Spurious and
    leftover gold is missed. Overlap stages walk predictions in
    (start, end, type) order and take the gold with the largest overlap, then
    the smallest boundary distance, then the leftmost.
    """
    _check_unique(pred, "prediction")
    _check_unique(gold, "gold")
    preds = sorted(pred, key=lambda e: e.key)
    free_gold = sorted(gold, key=lambda e: e.key)
    result = MatchResult()
    assigned: dict[tuple, tuple[str, EntitySpan | None]] = {}

    gold_by_key = {g.key: g for g in free_gold}
    for p in preds:
        g = gold_by_key.get(p.key)
        if g is not None:
            assigned[p.key] = ("TP", g)
    taken = {id(g) for _, g in assigned.values()}
    free_gold = [g for g in free_gold if id(g) not in taken]

    def stage(category, accept):
        nonlocal free_gold
        for p in preds:
            if p.key in assigned:
                continue
            cands = [g for g in free_gold if accept(p, g)]
            if not cands:
                continue
            g = min(cands, key=lambda g: _overlap_rank(p, g))
            assigned[p.key] = (category, g)
            free_gold = [x for x in free_gold if x is not g]

    stage(TYPE, lambda p, g: (p.start, p.end) == (g.start, g.end) and p.etype != g.etype)
    stage(SPAN, lambda p, g: p.overlaps(g) > 0 and (p.start, p.end) != (g.start, g.end) and p.etype == g.etype)
    stage(TYPE_AND_SPAN, lambda p, g: p.overlaps(g) > 0 and (p.start, p.end) != (g.start, g.end) and p.etype != g.etype)

    for p in preds:
        cat, g = assigned.get(p.key, (SPURIOUS, None))
        if cat == "TP":
            result.true_positives.append((p, g))
        else:
            result.errors.append((p, cat, g))
    result.missed = list(free_gold)
    return result


def prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass
class Scores:
    n_pred: int = 0
    n_gold: int = 0
    tp: int = 0

    @property
    def precision(self) -> float:
        return prf(self.tp, self.n_pred, self.n_gold)[0]

    @property
    def recall(self) -> float:
        return prf(self.tp, self.n_pred, self.n_gold)[1]

    @property
    def f1(self) -> float:
        return prf(self.tp, self.n_pred, self.n_gold)[2]


@dataclass
class EvalReport:
    overall: Scores
    per_type: dict[str, Scores]
    errors: dict[str, int]
    missed: int
    deviation: dict[int, int] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return self.overall.precision

    @property
    def recall(self) -> float:
        return self.overall.recall

    @property
    def f1(self) -> float:
        return self.overall.f1


def compute_metrics(matches: MatchResult | Iterable[MatchResult]) -> EvalReport:
    """P/R/F1 overall and per type, plus error-category counts.

    Pass one MatchResult per sentence when scoring a corpus; per-type scores
    re-run matching inside each sentence restricted to that type.
    """
    if isinstance(matches, MatchResult):
        matches = [matches]
    overall = Scores()
    per_type: dict[str, Scores] = {}
    errors = Counter({k: 0 for k in CATEGORIES})
    missed = 0
    for m in matches:
        preds, golds = m.predictions, m.gold
        overall.n_pred += len(preds)
        overall.n_gold += len(golds)
        overall.tp += len(m.true_positives)
        errors.update(cat for _, cat, _ in m.errors)
        missed += len(m.missed)
        for t in sorted({e.etype for e in preds} | {e.etype for e in golds}):
            tp_, tg = [e for e in preds if e.etype == t], [e for e in golds if e.etype == t]
            sub = match_entities(tp_, tg)
            sc = per_type.setdefault(t, Scores())
            sc.n_pred += len(tp_)
            sc.n_gold += len(tg)
            sc.tp += len(sub.true_positives)
    return EvalReport(overall, dict(sorted(per_type.items())), dict(errors), missed)


def boundary_deviation(pred: EntitySpan, gold: EntitySpan, tokens) -> int:
    ps, pe = char_span_to_token_span(pred, tokens)
    gs, ge = char_span_to_token_span(gold, tokens)
    return max(abs(ps - gs), abs(pe - ge))


def boundary_deviation_histogram(m: MatchResult, sentence: Sentence | None = None, tokens=None) -> Counter:
    """Token-level deviation of every Span / TypeAndSpan error from its matched gold.

    Deviation is the larger of the start-token and end-token offsets.
    """
    if tokens is None:
        if sentence is None:
            raise ValueError("need the owning sentence or its tokens")
        tokens = tokenize(sentence.text, sentence.language)
    hist = Counter()
    for p, cat, g in m.errors:
        if cat not in BOUNDARY_CATEGORIES or g is None:
            continue
        try:
            hist[boundary_deviation(p, g, tokens)] += 1
        except NoTokenOverlap:
            log.debug("skipping whitespace-only span %s / %s", p, g)
    return hist


def evaluate_corpus(
    predictions: Iterable[Sentence],
    gold: Iterable[Sentence],
) -> tuple[EvalReport, list[MatchResult]]:
    """Score predicted sentences against gold sentences, paired by id.

    Gold sentences with no prediction record count as predicting nothing.
    """
    gold = list(gold)
    pred_by_id: dict[str, Sentence] = {}
    for s in predictions:
        if s.id in pred_by_id:
            raise ValueError(f"duplicate prediction record {s.id!r}")
        pred_by_id[s.id] = s
    gold_ids = {s.id for s in gold}
    stray = sorted(set(pred_by_id) - gold_ids)
    if stray:
        raise ValueError(f"predictions for unknown sentences: {stray[:5]}")
    matches = []
    hist = Counter()
    for s in gold:
        p = pred_by_id.get(s.id)
        m = match_entities(p.entities if p else (), s.entities)
        m.check_conservation()
        matches.append(m)
        hist += boundary_deviation_histogram(m, s)
    report = compute_metrics(matches)
    report.deviation = dict(sorted(hist.items()))
    return report, matches


def _machine_lines(report: EvalReport) -> list[dict]:
    def block(sc: Scores) -> dict:
        return {
            "n_pred": sc.n_pred,
            "n_gold": sc.n_gold,
            "tp": sc.tp,
            "precision": sc.precision,
            "recall": sc.recall,
            "f1": sc.f1,
        }

    lines = [{"section": "overall", **block(report.overall)}]
    for t, sc in report.per_type.items():
        lines.append({"section": "type", "type": t, **block(sc)})
    lines.append({"section": "errors", **{c: report.errors.get(c, 0) for c in CATEGORIES}, "Missed": report.missed})
    lines.append({"section": "deviation", "histogram": [[k, v] for k, v in sorted(report.deviation.items())]})
    return lines


def render_report(report: EvalReport, fmt: str = "text") -> str:
    if fmt == "machine":
        return "".join(json.dumps(d, ensure_ascii=False) + "\n" for d in _machine_lines(report))
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    rows = [("overall", report.overall)] + list(report.per_type.items())
    width = max(12, *(len(name) for name, _ in rows))
    out = [f"{'':<{width}}  {'pred':>6} {'gold':>6} {'tp':>6}  {'P':>7} {'R':>7} {'F1':>7}"]
    for name, sc in rows:
        out.append(
            f"{name:<{width}}  {sc.n_pred:>6} {sc.n_gold:>6} {sc.tp:>6}  "
            f"{sc.precision:>7.4f} {sc.recall:>7.4f} {sc.f1:>7.4f}"
        )
    out.append("")
    out.append("errors: " + "  ".join(f"{c}={report.errors.get(c, 0)}" for c in CATEGORIES) + f"  Missed={report.missed}")
    dev = "  ".join(f"{k}:{v}" for k, v in sorted(report.deviation.items())) or "-"
    out.append(f"boundary deviation (tokens): {dev}")
    return "\n".join(out) + "\n"


def load_report(text: str) -> list[dict]:
    """Parse a machine-format report back into its records."""
    return [json.loads(line) for line in text.splitlines() if line.strip()]
