"""
Error analysis
==============

Where predictions go wrong: the error categories and how far off the
boundaries are.
"""

# %%
import random

import numpy as np

from bioner.corpus import bundled_schemas
from bioner.evaluation import evaluate_corpus, match_entities, render_report
from bioner.model import EntitySpan, char_span_to_token_span, tokenize
from bioner.synthetic import random_corpus

schemas = bundled_schemas()
gold = random_corpus(9, [schemas["GENIA"]], 400)

# %%
# One small example of each category.
g = [EntitySpan(23, 33, "Protein")]
for p in ([EntitySpan(23, 33, "DNA")], [EntitySpan(22, 33, "Protein")], [EntitySpan(22, 33, "DNA")], [EntitySpan(40, 44, "Protein")]):
    m = match_entities(p, g)
    print(p[0], "->", m.errors[0][1])

# %%
# Simulate a model that gets the type right but drifts on boundaries by a
# geometric number of tokens.
rng = random.Random(0)
np_rng = np.random.default_rng(0)
preds = []
for s in gold:
    tokens = tokenize(s.text, s.language)
    out = {}
    for e in s.entities:
        a, b = char_span_to_token_span(e, tokens)
        if rng.random() < 0.4:
            shift = int(np_rng.geometric(0.45))
            a = max(0, a - shift) if rng.random() < 0.5 else a
            b = min(len(tokens) - 1, b + shift) if a == char_span_to_token_span(e, tokens)[0] else b
        cand = s.span(tokens[a].start, tokens[b].end, e.etype)
        out[cand.key] = cand
    preds.append(s.with_entities(out.values()))

report, matches = evaluate_corpus(preds, gold)
print(render_report(report))

# %%
# The histogram counts Span and TypeAndSpan errors by their token deviation.
dev = np.array(sorted(report.deviation.items()))
if len(dev):
    share = dev[dev[:, 0] <= 2, 1].sum() / dev[:, 1].sum()
    print(f"{share:.0%} of boundary errors are within two tokens")
