#!/usr/bin/env python3
"""Stress the path search on random fixture graphs and time it against the
brute-force enumeration oracle.

Usage: python scripts/stress_search.py [graphs] [max_nodes] [seed]
"""

import random
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import build_store, enumerate_paths, random_graph_lines, random_question

from dualtrack.chain import SearchConfig, search_paths
from dualtrack.classifier import Question
from dualtrack.denoise import DenoiseConfig
from dualtrack.engine import PACKAGED_PROMPTS
from dualtrack.kg import EntityRef
from dualtrack.llm import StubLLM, load_templates
from dualtrack.scoring import HashEmbedding, OverlapRerank, ScoringConfig


def main() -> int:
    graphs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    max_nodes = int(sys.argv[2]) if len(sys.argv) > 2 else 30
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    rng = random.Random(seed)

    templates = load_templates(PACKAGED_PROMPTS)
    scoring = ScoringConfig(alpha=0.5, dimension=48)
    search = SearchConfig(d_max=3, w_max=3, theta_search=0.12, llm_select_trigger=10_000)
    embedder = HashEmbedding(dimension=48)
    reranker = OverlapRerank()
    denoising = DenoiseConfig(theta_necessity=0.0)

    search_time = oracle_time = 0.0
    paths = mismatches = 0
    for index in range(graphs):
        lines, n = random_graph_lines(rng, max_nodes=max_nodes)
        store = build_store(lines)
        question = Question(id=f"g{index}", text=random_question(rng, n))
        origin = EntityRef("Q1", "node1")

        t0 = time.perf_counter()
        completed, _ = search_paths(
            origin, question, search, scoring, store,
            StubLLM(default="no"), templates, embedder, reranker, denoising,
        )
        search_time += time.perf_counter() - t0

        t0 = time.perf_counter()
        expected = enumerate_paths(
            store, origin, question.text,
            d_max=search.d_max, w_max=search.w_max, theta=search.theta_search,
            scoring=scoring, embedder=embedder, reranker=reranker,
            k_invalid=frozenset({"id", "source", "version", "metadata"}),
        )
        oracle_time += time.perf_counter() - t0

        paths += len(completed)
        if {p.signature() for p in completed} != expected:
            mismatches += 1
            print(f"MISMATCH on graph {index} (seed {seed})")

    print(f"graphs={graphs} max_nodes={max_nodes} seed={seed}")
    print(f"paths emitted: {paths}")
    print(f"search time:   {search_time:.3f}s")
    print(f"oracle time:   {oracle_time:.3f}s")
    print(f"mismatches:    {mismatches}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
