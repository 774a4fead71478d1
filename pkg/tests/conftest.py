"""Shared fixtures: the movie fixture graph, packaged prompt templates, and
deterministic provider doubles."""

import pytest

from dualtrack.engine import PACKAGED_PROMPTS
from dualtrack.kg import InMemoryTripleStore, parse_triples
from dualtrack.llm import CompletionRequest, LLMProvider, ProviderError, load_templates
from dualtrack.scoring import RerankProvider

MOVIE_LINES = [
    "QF1|Inception|PF1|director|QF2|Christopher Nolan",
    "QF2|Christopher Nolan|PF2|spouse|QF3|Emma Thomas",
    "QF3|Emma Thomas|PF3|birthdate|1975-05-26|",
    "QF1|Inception|PF4|publication date|2010-07-16|",
    "QF1|Inception|PF5|genre|QF9|science fiction film",
    "QF8|Leonardo DiCaprio|PF6|cast member|QF1|Inception",
    "QF1|Inception|PF7|wikidata:id|Q1375011|",
]


@pytest.fixture
def movie_triples():
    return parse_triples(MOVIE_LINES)


@pytest.fixture
def movie_store(movie_triples):
    return InMemoryTripleStore(movie_triples)


@pytest.fixture(scope="session")
def templates():
    return load_templates(PACKAGED_PROMPTS)


class MappingRerank(RerankProvider):
    """Fixed text -> score mapping; unknown texts get the default."""

    def __init__(self, mapping, default=0.0):
        self.mapping = dict(mapping)
        self.default = default

    def rerank(self, query, texts):
        return [self.mapping.get(t, self.default) for t in texts]


class CountingRerank(RerankProvider):
    """Wraps another reranker and records every batch it is asked to score."""

    def __init__(self, inner):
        self.inner = inner
        self.batches = []

    def rerank(self, query, texts):
        self.batches.append(list(texts))
        return self.inner.rerank(query, texts)


class FailingLLM(LLMProvider):
    name = "failing"

    def complete(self, request: CompletionRequest):
        raise ProviderError("scripted provider failure")


class FailingSession:
    """Network guard: any HTTP verb trips an assertion."""

    def get(self, *args, **kwargs):
        raise AssertionError("network access attempted")

    def post(self, *args, **kwargs):
        raise AssertionError("network access attempted")

    request = get
