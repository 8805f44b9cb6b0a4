"""
Tagging formats
===============

Three ways of writing the entities of a sentence as plain text, and the
decoders that read them back onto source offsets.
"""

# %%
from bioner import codec
from bioner.corpus import bundled_schemas
from bioner.model import EntitySpan, Sentence

schemas = bundled_schemas()
genia = schemas["GENIA"]
text = "IL-5 promoter/enhancer-luciferase gene construct"
s = Sentence("demo", text, "en", "GENIA", (
    EntitySpan(0, 48, "DNA", text),
    EntitySpan(0, 4, "Protein", "IL-5"),
    EntitySpan(23, 33, "Protein", "luciferase"),
))

# %%
# The JSON style lists one record per entity with explicit offsets.
print(codec.encode_json(s).payload)

# %%
# The HTML style wraps each mention in an opening and closing tag that carries
# its type and text. Nested mentions nest their tags.
print(codec.encode_html(s).payload)

# %%
# The symbolic style writes one line per entity type and marks mentions with
# square brackets. Types without mentions still get a line.
payload = codec.encode_symbolic(s, genia).payload
print(payload)

# %%
# Decoding maps everything back to character offsets in the source sentence.
for strategy in codec.STRATEGIES:
    out = codec.decode(strategy, codec.encode(strategy, s, genia), s, genia)
    print(strategy, out.entities == sorted(s.entities))

# %%
# Generated copies of the sentence are rarely perfect. Here the word "gene"
# went missing; the copy is aligned to the source by edit distance, so the
# protein offsets are still exact.
damaged = payload.replace("[luciferase] gene construct", "[luciferase] construct")
out = codec.decode_symbolic(damaged, genia, s)
print(out.entities)
print(out.diagnostics)

# %%
# Brackets that never close are thrown away and reported.
broken = payload.replace("-[luciferase]", "-[[luciferase]")
out = codec.decode_symbolic(broken, genia, s)
print(len(out.entities), [d.kind for d in out.diagnostics])
