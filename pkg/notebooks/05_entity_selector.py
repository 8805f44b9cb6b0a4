"""
Entity selector
===============

A second-pass classifier that looks at one marked candidate at a time and
keeps it only if it looks right.
"""

# %%
from collections import Counter

from bioner.corpus import bundled_schemas
from bioner.evaluation import evaluate_corpus
from bioner.selector import GoldOracleScorer, filter_predictions, gen_selector_dataset, mark_candidate
from bioner.synthetic import random_corpus

schemas = bundled_schemas()
corpus = random_corpus(4, [schemas["GENIA"], schemas["CMeEE-V2"]], 500)

# %%
# The selector sees the type, a separator and the sentence with the mention
# wrapped in markers.
s = next(x for x in corpus if x.entities)
print(mark_candidate(s, s.entities[0]).selector_input)

# %%
# Training data: gold mentions as positives, and negatives made by moving a
# boundary one or two tokens or by swapping the type.
samples = gen_selector_dataset(corpus, schemas, seed=0, total=2000)
print(Counter(x.label for x in samples))
print(Counter(x.provenance.kind for x in samples))
neg = next(x for x in samples if x.provenance.kind == "shift_end")
print(neg.candidate.selector_input, neg.provenance)

# %%
# Filtering with a perfect scorer removes every wrong candidate and keeps
# every right one, which is the ceiling a trained selector can reach.
noisy = []
for x in corpus:
    extra = [x.span(e.start, e.end, t) for e in x.entities[:1] for t in schemas[x.dataset].type_names[:2] if t != e.etype]
    merged = {e.key: e for e in list(x.entities) + extra}
    noisy.append(x.with_entities(merged.values()))
before, _ = evaluate_corpus(noisy, corpus)
after, _ = evaluate_corpus(filter_predictions(noisy, GoldOracleScorer(corpus)).sentences, corpus)
print(f"before: P={before.precision:.3f} R={before.recall:.3f}")
print(f"after:  P={after.precision:.3f} R={after.recall:.3f}")
