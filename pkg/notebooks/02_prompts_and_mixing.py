"""
Prompts and dataset mixing
==========================

Turning annotated sentences into instruction-tuning records, and interleaving
Chinese and English corpora.
"""

# %%
from collections import Counter

from bioner.corpus import bundled_schemas
from bioner.prompts import PromptTemplate, build_training_records, mix_datasets, render_prompt
from bioner.synthetic import random_corpus

schemas = bundled_schemas()
zh = random_corpus(1, [schemas["CMeEE-V2"]], 6)
en = random_corpus(2, [schemas["GENIA"], schemas["BioRED"]], 4)

# %%
# Each dataset gets the same template with its own name and type definitions.
tmpl = PromptTemplate.default("symbolic")
print(render_prompt(en[0], schemas[en[0].dataset], tmpl))

# %%
# A dataset the model never saw only needs its schema to get a prompt.
from bioner.model import Sentence

unseen = Sentence("u1", "Cisplatin nephrotoxicity was observed.", "en", "BC5CDR-Chemical", ())
print(render_prompt(unseen, schemas["BC5CDR-Chemical"], tmpl).splitlines()[3:5])

# %%
# Sentences are pooled by language, shuffled with a seed and alternated,
# Chinese first, until the smaller pool runs out.
mixed = mix_datasets({"CMeEE-V2": zh, "GENIA+BioRED": en}, seed=3)
print([s.language for s in mixed])
print(Counter(s.dataset for s in mixed))

# %%
# The training file pairs every prompt with its gold payload. Sentences whose
# mentions cross each other cannot be bracketed and are skipped.
records, skipped = build_training_records(mixed, schemas, tmpl)
print(len(records), "records,", len(skipped), "skipped")
print(records[0].output)
