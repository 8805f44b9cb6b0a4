"""
Inference and decoding
======================

Batch generation against a backend, with a noisy stand-in for a real model.
"""

# %%
from bioner import codec
from bioner.corpus import bundled_schemas
from bioner.evaluation import evaluate_corpus, render_report
from bioner.inference import EchoGoldBackend, PerturbingBackend, run_batch
from bioner.prompts import PromptTemplate, render_prompt
from bioner.synthetic import random_corpus

schemas = bundled_schemas()
corpus = random_corpus(5, [schemas["GENIA"], schemas["CMeEE-V2"]], 300)
tmpl = PromptTemplate.default("symbolic")
prompts = [render_prompt(s, schemas[s.dataset], tmpl) for s in corpus]

# %%
# The echo-gold backend answers every prompt with the gold payload, so it
# behaves like a perfect model.
perfect = EchoGoldBackend(corpus, schemas, "symbolic", tmpl)
outputs = run_batch(prompts, perfect, parallelism=8)
preds = [s.with_entities(codec.decode_symbolic(o, schemas[s.dataset], s).entities) for s, o in zip(corpus, outputs)]
report, _ = evaluate_corpus(preds, corpus)
print(f"perfect backend F1 = {report.f1:.4f}")

# %%
# Wrapping it in seeded character noise gives a rough model of typos. The
# decoder recovers most entities whose brackets survived.
for rate in (0.005, 0.02, 0.05):
    noisy = PerturbingBackend(perfect, rate, seed=1)
    outputs = run_batch(prompts, noisy, parallelism=8)
    preds = [s.with_entities(codec.decode_symbolic(o, schemas[s.dataset], s).entities) for s, o in zip(corpus, outputs)]
    report, _ = evaluate_corpus(preds, corpus)
    print(f"noise {rate:.1%}: P={report.precision:.3f} R={report.recall:.3f} F1={report.f1:.3f}")

# %%
# A real model sits behind an OpenAI-style chat-completions endpoint:
#
#     from bioner.inference import WireBackend
#     backend = WireBackend("http://localhost:8000/v1", "my-ner-model")
#
# The token is read from LLM_API_KEY unless another variable is named.
print(render_report(report))
