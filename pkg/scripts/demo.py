#!/usr/bin/env python3
"""Run both reasoning tracks on the bundled movie fixture and print the
explored tree, the verification results, and the final answers.

Everything is scripted and offline: the stub LLM answers from
data/stub_script.json and the KG is data/movies.triples.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

from dualtrack import Engine, Question, load_config


def main() -> int:
    config = load_config(ROOT / "data" / "config.json")
    config.triples_file = str(ROOT / "data" / "movies.triples")
    engine = Engine(config, stub_script=ROOT / "data" / "stub_script.json")

    chained = Question(id="demo-1", text="When was the wife of the Inception director born?")
    print(f"== {chained.text}")
    decision = engine.classify(chained)
    print(f"   routed to: {decision.track.value}")
    trace: list = []
    answer = engine.chain(chained, trace=trace)
    for depth, description, score in trace:
        print(f"   {'  ' * depth}{description} (score={score:.4f})")
    print(f"   answer: {answer.text}")
    for path in answer.supporting_paths:
        print(f"   path:   {path.verbalize()}")

    parallel = Question(id="demo-2", text="Who directed Inception and when was it released?")
    print(f"\n== {parallel.text}")
    decision = engine.classify(parallel)
    print(f"   routed to: {decision.track.value}")
    answer = engine.verify(parallel)
    print(f"   draft:  {answer.draft}")
    for result in answer.verification:
        line = f"   [{result.status.value}] {result.fact.text}"
        if result.revised_text:
            line += f" -> {result.revised_text}"
        print(line)
    print(f"   answer: {answer.text}")

    print("\n== batch evaluation over data/questions.jsonl")
    from dualtrack.evaluation import format_report, load_dataset

    questions, skipped = load_dataset(ROOT / "data" / "questions.jsonl")
    report = engine.evaluate(questions)
    print(format_report(report))
    out = ROOT / "data" / "report.json"
    out.write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(f"report written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
