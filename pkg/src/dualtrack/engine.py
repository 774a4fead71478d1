"""Top-level orchestration: classify each question, dispatch it to the
matching track, and surface branch failures as flagged answers instead of
crashes."""

from __future__ import annotations

import logging
from pathlib import Path

from .chain import Answer, run_chain_branch
from .classifier import Classification, Question, QuestionType, classify
from .config import EngineConfig
from .denoise import denoise, rule_filter
from .evaluation import AccScorer, evaluate
from .kg import (
    InMemoryTripleStore,
    KGStore,
    MalformedResponse,
    SparqlClient,
    TransportError,
    Triple,
)
from .llm import EchoLLM, HttpLLM, LLMProvider, ProviderError, StubLLM, load_templates
from .scoring import (
    ConstantRerank,
    HashEmbedding,
    HttpEmbedding,
    HttpRerank,
    OverlapRerank,
)
from .verify import run_parallel_branch

log = logging.getLogger(__name__)

PACKAGED_PROMPTS = Path(__file__).parent / "prompts"


def _build_store(cfg: EngineConfig) -> KGStore:
    if cfg.triples_file:
        return InMemoryTripleStore.from_file(cfg.triples_file)
    return SparqlClient(cfg.sparql_url, cache_dir=cfg.cache_dir or None)


def _build_llm(cfg: EngineConfig, stub_script: str | Path | None) -> LLMProvider:
    if cfg.llm_provider == "http":
        return HttpLLM(cfg.llm_url)
    if cfg.llm_provider == "echo":
        return EchoLLM()
    if stub_script:
        return StubLLM.from_script_file(stub_script)
    return StubLLM()


def _build_embedder(cfg: EngineConfig):
    if cfg.embedding_provider == "http":
        return HttpEmbedding(cfg.embedding_url, dimension=cfg.dimension)
    return HashEmbedding(dimension=cfg.dimension)


def _build_reranker(cfg: EngineConfig):
    if cfg.rerank_provider == "http":
        return HttpRerank(cfg.rerank_url)
    if cfg.rerank_provider == "constant":
        return ConstantRerank()
    return OverlapRerank()


class Engine:
    """One configured question-answering engine.

    Providers may be injected (tests do), otherwise they are built from the
    config. In stub mode with a triples file nothing here touches the
    network.
    """

    def __init__(
        self,
        config: EngineConfig | None = None,
        *,
        store: KGStore | None = None,
        llm: LLMProvider | None = None,
        embedder=None,
        reranker=None,
        templates=None,
        stub_script: str | Path | None = None,
    ):
        self.config = config or EngineConfig()
        self.templates = templates or load_templates(self.config.prompts_dir or PACKAGED_PROMPTS)
        self.store = store or _build_store(self.config)
        self.llm = llm or _build_llm(self.config, stub_script)
        self.embedder = embedder or _build_embedder(self.config)
        self.reranker = reranker or _build_reranker(self.config)
        self.scoring = self.config.scoring_config()
        self.search = self.config.search_config()
        self.denoising = self.config.denoise_config()

    # -- pieces ----------------------------------------------------------

    def classify(self, question: Question) -> Classification:
        return classify(
            question,
            self.llm,
            self.templates["classification"],
            default_track=QuestionType(self.config.default_track),
        )

    def chain(self, question: Question, trace: list | None = None) -> Answer:
        return run_chain_branch(
            question,
            store=self.store,
            llm=self.llm,
            templates=self.templates,
            embedder=self.embedder,
            reranker=self.reranker,
            scoring=self.scoring,
            search=self.search,
            denoising=self.denoising,
            link_floor=self.config.link_floor,
            trace=trace,
        )

    def verify(self, question: Question) -> Answer:
        return run_parallel_branch(
            question,
            store=self.store,
            llm=self.llm,
            templates=self.templates,
            embedder=self.embedder,
            reranker=self.reranker,
            scoring=self.scoring,
            denoising=self.denoising,
            top_k=self.config.verify_top_k,
            link_floor=self.config.link_floor,
        )

    def denoise(self, triples: list[Triple], question: Question) -> list[Triple]:
        return denoise(
            triples, question.text, self.denoising, self.llm, self.templates["necessity"]
        )

    def explain_denoise(self, triples: list[Triple], question: Question) -> list[tuple[Triple, bool, str]]:
        """Per-triple (triple, kept, reason) breakdown for the CLI."""
        kept = {t.key() for t in self.denoise(triples, question)}
        rows = []
        for t in triples:
            if t.key() in kept:
                rows.append((t, True, "kept"))
            elif rule_filter(t.relation, self.denoising):
                rows.append((t, False, "rule: label matches k_invalid"))
            else:
                rows.append((t, False, f"necessity below {self.denoising.theta_necessity}"))
        return rows

    # -- the route ---------------------------------------------------------

    def answer(self, question: Question) -> Answer:
        """classify -> dispatch -> Answer.

        Logic-level branch failures become flagged answers so one bad
        question never aborts a run. Transport and provider failures are
        infrastructure problems and propagate (the eval loop records them
        per question; the CLI maps them to exit code 2).
        """
        decision = self.classify(question)
        try:
            if decision.track is QuestionType.CHAINED:
                answer = self.chain(question)
            else:
                answer = self.verify(question)
        except (TransportError, MalformedResponse, ProviderError):
            raise
        except Exception:
            log.exception("branch failed for %s", question.id)
            answer = Answer(text="", flags={"error"})
        answer.track = decision.track
        if decision.fallback:
            answer.flags.add("classifier_fallback")
        return answer

    def evaluate(self, questions, scorer: AccScorer | None = None) -> dict:
        return evaluate(
            questions,
            self.answer,
            scorer=scorer or AccScorer(tau=self.config.tau),
            parallelism=self.config.parallelism,
        )
