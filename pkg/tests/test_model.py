import pytest
from hypothesis import given, strategies as st

from bioner.errors import NoTokenOverlap
from bioner.model import DatasetSchema, EntitySpan, Sentence, char_span_to_token_span, tokenize, validate_sentence


def surfaces(tokens):
    return [(t.surface, t.start, t.end) for t in tokens]


def test_tokenize_empty():
    assert tokenize("", "en") == []
    assert tokenize("", "zh") == []


def test_tokenize_english():
    assert surfaces(tokenize("IL-5 binds", "en")) == [("IL", 0, 2), ("-", 2, 3), ("5", 3, 4), ("binds", 5, 10)]


def test_tokenize_chinese_is_per_character():
    assert surfaces(tokenize("使用IL-5", "zh")) == [
        ("使", 0, 1), ("用", 1, 2), ("I", 2, 3), ("L", 3, 4), ("-", 4, 5), ("5", 5, 6)
    ]


def test_tokenize_unknown_language():
    with pytest.raises(ValueError):
        tokenize("x", "fr")


@given(st.text(max_size=60), st.sampled_from(["en", "zh"]))
def test_tokens_cover_every_non_space_character(text, lang):
    tokens = tokenize(text, lang)
    covered = []
    prev_end = 0
    for t in tokens:
        assert prev_end <= t.start < t.end
        assert text[t.start:t.end] == t.surface
        assert not any(c.isspace() for c in t.surface)
        covered.extend(range(t.start, t.end))
        prev_end = t.end
    assert covered == [i for i, c in enumerate(text) if not c.isspace()]


def test_char_span_to_token_span():
    tokens = tokenize("IL-5 binds", "en")
    assert char_span_to_token_span((0, 2), tokens) == (0, 0)
    assert char_span_to_token_span((0, 4), tokens) == (0, 2)
    assert char_span_to_token_span(EntitySpan(5, 10, "X", "binds"), tokens) == (3, 3)
    with pytest.raises(NoTokenOverlap):
        char_span_to_token_span((4, 5), tokens)


def test_char_span_partial_token_overlap():
    tokens = tokenize("IL-5 binds", "en")
    # any shared character counts
    assert char_span_to_token_span((1, 7), tokens) == (0, 3)


@pytest.fixture
def tiny_schema():
    return DatasetSchema("Tiny", "en", (("Protein", "a protein"), ("DNA", "a DNA sequence")))


def test_validate_well_formed(tiny_schema):
    s = Sentence("a", "IL-5 binds", "en", "Tiny", (EntitySpan(0, 4, "Protein", "IL-5"),))
    assert validate_sentence(s, tiny_schema) == []


def test_validate_out_of_range(tiny_schema):
    s = Sentence("a", "IL-5", "en", "Tiny", (EntitySpan(0, 9, "Protein", "IL-5"),))
    assert [v.kind for v in validate_sentence(s, tiny_schema)] == ["OffsetOutOfRange"]


def test_validate_unknown_type(tiny_schema):
    s = Sentence("a", "IL-5", "en", "Tiny", (EntitySpan(0, 4, "Gene", "IL-5"),))
    kinds = validate_sentence(s, tiny_schema)
    assert [v.kind for v in kinds] == ["UnknownType"]
    assert "Gene" in kinds[0].message


def test_validate_text_mismatch_and_duplicates(tiny_schema):
    e = EntitySpan(0, 4, "Protein", "IL-5")
    s = Sentence("a", "IL-5", "en", "Tiny", (e, e, EntitySpan(0, 2, "DNA", "XX")))
    kinds = {v.kind for v in validate_sentence(s, tiny_schema)}
    assert kinds == {"DuplicateEntity", "TextMismatch"}


def test_validate_language_mismatch(tiny_schema):
    s = Sentence("a", "IL-5", "zh", "Tiny", ())
    assert [v.kind for v in validate_sentence(s, tiny_schema)] == ["LanguageMismatch"]


@pytest.mark.parametrize("name", ["", " X", "a:b", "a<b", "a]", "/x", "a\nb"])
def test_schema_rejects_bad_type_names(name):
    with pytest.raises(ValueError):
        DatasetSchema("S", "en", ((name, "d"),))


def test_schema_dict_round_trip(genia):
    assert DatasetSchema.from_dict(genia.to_dict()) == genia
    assert genia.type_names == ["DNA", "Protein", "RNA", "Cell_line", "Cell_type"]


def test_entity_relations():
    a, b, c = EntitySpan(0, 10, "T"), EntitySpan(2, 4, "T"), EntitySpan(8, 12, "T")
    assert a.contains(b) and not b.contains(a)
    assert a.crosses(c) and c.crosses(a)
    assert not a.crosses(b)
    assert a.overlaps(c) == 2 and b.overlaps(c) == 0
