import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bioner.errors import DuplicateEntity
from bioner.evaluation import (
    CATEGORIES,
    MatchResult,
    Scores,
    boundary_deviation_histogram,
    compute_metrics,
    evaluate_corpus,
    load_report,
    match_entities,
    render_report,
)
from bioner.model import EntitySpan, Sentence, tokenize

from conftest import CONSTRUCT


def E(start, end, etype):
    return EntitySpan(start, end, etype)


def brute_force_max_exact(pred, gold):
    """Largest one-to-one pairing in which every pair agrees on span and type."""
    best = 0

    def go(i, used, count):
        nonlocal best
        if count + (len(pred) - i) <= best:
            return
        if i == len(pred):
            best = max(best, count)
            return
        for j, g in enumerate(gold):
            if j not in used and g.key == pred[i].key:
                go(i + 1, used | {j}, count + 1)
        go(i + 1, used, count)

    go(0, frozenset(), 0)
    return best


def random_fixture(rng, max_n=6):
    def draw(n):
        out = {}
        for _ in range(n):
            s = rng.randint(0, 12)
            e = rng.randint(s + 1, 15)
            ent = E(s, e, rng.choice("AB"))
            out[ent.key] = ent
        return list(out.values())

    return draw(rng.randint(0, max_n)), draw(rng.randint(0, max_n))


def test_exact_match():
    m = match_entities([E(0, 4, "Protein")], [E(0, 4, "Protein")])
    assert len(m.true_positives) == 1 and m.errors == [] and m.missed == []


def test_category_type():
    m = match_entities([E(0, 5, "Chemical")], [E(0, 5, "Disease")])
    assert [(c, g) for _, c, g in m.errors] == [("Type", E(0, 5, "Disease"))]


@pytest.mark.parametrize("pred, category", [
    (E(22, 33, "Protein"), "Span"),
    (E(22, 33, "DNA"), "TypeAndSpan"),
    (E(40, 44, "Protein"), "Spurious"),
])
def test_category_boundary_categories(pred, category):
    gold = [E(23, 33, "Protein")]
    m = match_entities([pred], gold)
    assert [c for _, c, _ in m.errors] == [category]
    assert len(m.missed) == (1 if category == "Spurious" else 0)
    m.check_conservation()


def test_staged_preference_type_before_span():
    # an exact-span wrong-type pred claims the gold before a same-type overlap can
    gold = [E(0, 5, "A")]
    m = match_entities([E(0, 5, "B"), E(0, 4, "A")], gold)
    cats = {p.key: c for p, c, _ in m.errors}
    assert cats == {(0, 5, "B"): "Type", (0, 4, "A"): "Spurious"}


def test_ranking_prefers_larger_overlap():
    gold = [E(0, 3, "A"), E(5, 12, "A")]
    m = match_entities([E(2, 10, "A")], gold)
    assert m.errors[0][2] == E(5, 12, "A")
    assert m.missed == [E(0, 3, "A")]


def test_duplicates_rejected():
    with pytest.raises(DuplicateEntity):
        match_entities([E(0, 1, "A"), E(0, 1, "A")], [])
    with pytest.raises(DuplicateEntity):
        match_entities([], [E(0, 1, "A"), E(0, 1, "A")])


def test_staged_tp_equals_brute_force():
    rng = random.Random(11)
    for _ in range(500):
        pred, gold = random_fixture(rng)
        m = match_entities(pred, gold)
        assert len(m.true_positives) == brute_force_max_exact(pred, gold)
        m.check_conservation(len(pred), len(gold))


@settings(max_examples=200, deadline=None)
@given(st.integers())
def test_match_invariants(seed):
    pred, gold = random_fixture(random.Random(seed))
    m = match_entities(pred, gold)
    assert sorted(m.predictions) == sorted(pred)
    assert sorted(m.gold) == sorted(gold)
    partners = [g for _, g in m.true_positives] + [g for _, _, g in m.errors if g is not None]
    assert len(partners) == len(set(partners))
    for p, c, g in m.errors:
        if c == "Type":
            assert (p.start, p.end) == (g.start, g.end) and p.etype != g.etype
        elif c == "Span":
            assert p.overlaps(g) and p.etype == g.etype and (p.start, p.end) != (g.start, g.end)
        elif c == "TypeAndSpan":
            assert p.overlaps(g) and p.etype != g.etype and (p.start, p.end) != (g.start, g.end)
        else:
            assert g is None


def test_metrics_examples():
    one = compute_metrics(match_entities([E(0, 1, "A")], [E(0, 1, "A")]))
    assert (one.precision, one.recall, one.f1) == (1.0, 1.0, 1.0)
    none = compute_metrics(match_entities([], [E(0, 1, "A")]))
    assert (none.precision, none.recall, none.f1) == (0.0, 0.0, 0.0)
    empty = compute_metrics(match_entities([], []))
    assert (empty.precision, empty.recall, empty.f1) == (0.0, 0.0, 0.0)
    gold = [E(0, 1, "A"), E(2, 3, "A"), E(4, 5, "A"), E(6, 7, "A")]
    pred = gold[:3] + [E(10, 11, "A")]
    r = compute_metrics(match_entities(pred, gold))
    assert (r.precision, r.recall, r.f1) == (0.75, 0.75, 0.75)
    assert r.errors["Spurious"] == 1 and r.missed == 1


def exact_prf(tp, n_pred, n_gold):
    p = Fraction(tp, n_pred) if n_pred else Fraction(0)
    r = Fraction(tp, n_gold) if n_gold else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
def test_prf_matches_fractions(tp, extra_pred, extra_gold):
    sc = Scores(tp + extra_pred, tp + extra_gold, tp)
    for got, want in zip((sc.precision, sc.recall, sc.f1), exact_prf(tp, tp + extra_pred, tp + extra_gold)):
        assert abs(got - float(want)) <= 1e-12


def test_per_type_scores():
    gold = [E(0, 2, "A"), E(3, 5, "B")]
    pred = [E(0, 2, "A"), E(3, 5, "A")]
    r = compute_metrics(match_entities(pred, gold))
    assert (r.per_type["A"].tp, r.per_type["A"].n_pred, r.per_type["A"].n_gold) == (1, 2, 1)
    assert (r.per_type["B"].tp, r.per_type["B"].n_pred, r.per_type["B"].n_gold) == (0, 0, 1)


def construct_sentence(entities=()):
    return Sentence("f", CONSTRUCT, "en", "GENIA", tuple(entities))


def test_deviation_one_token():
    s = construct_sentence()
    m = match_entities([s.span(22, 33, "Protein")], [s.span(23, 33, "Protein")])
    assert boundary_deviation_histogram(m, s) == {1: 1}


def test_deviation_exact_contributes_nothing():
    s = construct_sentence()
    m = match_entities([s.span(23, 33, "Protein")], [s.span(23, 33, "Protein")])
    assert boundary_deviation_histogram(m, s) == {}


def test_deviation_two_tokens_each_side():
    text = "aa bb cc dd ee ff gg"
    tokens = tokenize(text, "en")
    gold = EntitySpan(6, 14, "T", "cc dd ee")
    pred = EntitySpan(0, 20, "T", text)
    m = match_entities([pred], [gold])
    assert boundary_deviation_histogram(m, tokens=tokens) == {2: 1}


def test_evaluate_corpus_and_reports(construct):
    gold = [construct, Sentence("g2", "IL-5 binds", "en", "GENIA", (EntitySpan(0, 4, "Protein", "IL-5"),))]
    preds = [construct.with_entities([construct.span(22, 33, "Protein"), construct.span(0, 48, "DNA")])]
    report, matches = evaluate_corpus(preds, gold)
    assert (report.overall.tp, report.overall.n_pred, report.overall.n_gold) == (1, 2, 4)
    assert report.errors["Span"] == 1 and report.missed == 2
    assert report.deviation == {1: 1}
    text = render_report(report, "text")
    assert text == render_report(report, "text")
    for c in CATEGORIES:
        assert f"{c}=" in text
    machine = load_report(render_report(report, "machine"))
    assert machine[0]["section"] == "overall" and machine[0]["tp"] == 1
    assert machine[-1] == {"section": "deviation", "histogram": [[1, 1]]}


def test_empty_report():
    report = compute_metrics([])
    assert report.overall == Scores(0, 0, 0)
    assert all(v == 0 for v in report.errors.values())
    assert "0.0000" in render_report(report)
    with pytest.raises(ValueError):
        render_report(report, "xml")


def test_evaluate_corpus_rejects_stray_predictions(construct):
    with pytest.raises(ValueError):
        evaluate_corpus([construct.with_entities(()), Sentence("zz", "x", "en", "GENIA", ())], [construct])


def test_match_result_addition_conserves():
    a = match_entities([E(0, 1, "A")], [E(0, 1, "A"), E(3, 4, "B")])
    b = match_entities([E(0, 2, "B")], [E(0, 1, "B")])
    (a + b).check_conservation(2, 3)
    with pytest.raises(AssertionError):
        MatchResult([], [], [E(0, 1, "A")]).check_conservation(0, 0)
