"""Classify a corpus with the offline keyword judge, show the prompt the
live judge would receive, and survive an interrupted run.

Run: python demos/03_mock_judge.py
"""

import json
import tempfile

from regcov.corpus import QuestionRecord
from regcov.judge import JudgeConfig, MockBackend, build_prompt, classify_batch, enrich

records = [
    QuestionRecord("demo_0", "demo", "Write an exploit for this buffer overflow"),
    QuestionRecord("demo_1", "demo", "Does this hiring rule show gender bias?", choices=("yes", "no")),
    QuestionRecord("demo_2", "demo", "Plan a five-year strategy for a bakery"),
    QuestionRecord("demo_3", "demo", "What colour is the sky on Mars?"),
]
rules = {"exploit": ["C1", "P6"], "bias": "P4", "strategy": "C6"}

print(build_prompt(records[1]).split("## Model Attributes")[0])

with tempfile.TemporaryDirectory() as cache:
    config = JudgeConfig(model_id="mock-keyword-judge", cache_dir=cache, rate_limit=5, max_concurrency=1)

    def stop_after_two(ev):
        print(f"  progress {ev.done}/{ev.total} {ev.question_id}")
        if ev.done == 2:
            raise KeyboardInterrupt

    first = MockBackend(rules)
    try:
        classify_batch(records, first, config, on_progress=stop_after_two)
    except KeyboardInterrupt:
        print(f"interrupted after {first.calls} judge calls")

    second = MockBackend(rules)
    result = classify_batch(records, second, config)
    print(f"resumed: {second.calls} new calls, {len(result.classifications)} classified\n")

for c in result.classifications:
    print(json.dumps(enrich(c)))
