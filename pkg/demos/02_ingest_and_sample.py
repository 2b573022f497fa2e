"""Normalize two small benchmarks in different layouts, then draw a
stratified gold sample from the combined corpus.

Run: python demos/02_ingest_and_sample.py
"""

import json

from regcov.corpus import corpus_stats, ingest, save_corpus
from regcov.sampler import allocate, draw, strata_sizes

# A JSON document with letter-keyed answers, CommonsenseQA style
mc_doc = json.dumps({"data": [
    {"id": f"cq{i}", "question": f"Where would you keep item {i}?",
     "choices": {"label": ["A", "B", "C"], "text": ["drawer", "river", "cloud"]}, "answerKey": "A"}
    for i in range(40)
]})
mc = ingest("commonsense", "mc_json", mc_doc, {"id": "id", "answer": "answerKey"})

# A CSV with one column per choice
rows = ["question,A,B,answer,subject"]
rows += [f"What is {i}+{i}?,{2 * i},{2 * i + 1},A,arithmetic" for i in range(400)]
csv_recs = ingest("mathquiz", "csv", "\n".join(rows),
                  {"choices": ["A", "B"], "category": "subject", "context": None, "answer_is_letter_key": True})

corpus = mc + csv_recs
print("first records:")
for r in (mc[0], csv_recs[0]):
    print("  ", json.dumps(r.to_json(), ensure_ascii=False))

stats = corpus_stats(corpus)
print("\ncorpus:", {b: f"{n} ({100 * stats.fractions[b]:.1f}%)" for b, n in stats.counts.items()})
print("bytes on disk:", len(save_corpus(corpus)))

# 60 questions, at least 30 per benchmark: the small one is lifted to its floor
alloc = allocate(strata_sizes(corpus), budget=60, min_per_stratum=30)
print("\nproportional share:", alloc.proportional)
print("with floor:        ", alloc.targets)

sample = draw(corpus, alloc, seed=42)
print("sample ids (first 8):", sample.ids()[:8])
assert sample.ids() == draw(corpus, alloc, seed=42).ids()
print("same seed, same sample")
