"""Parallel fact-verification track.

Draft an answer, decompose it into atomic claims, then ground and judge
every claim against the KG independently: no claim's outcome feeds
another's. Mismatched claims are rewritten from the retrieved triples; the
final answer is synthesized from the draft plus all verification results.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from .chain import Answer
from .classifier import Question, QuestionType
from .denoise import DenoiseConfig, denoise
from .kg import EntityRef, KGStore, Triple, fetch_relations
from .linking import DEFAULT_SIMILARITY_FLOOR, LinkFailure, link_surface
from .llm import LLMProvider, PromptTemplate, Unparseable, ask, parse_yes_no
from .scoring import (
    EmbeddingProvider,
    RerankProvider,
    ScoringConfig,
    score_candidates,
    verbalize,
)

log = logging.getLogger(__name__)

DEFAULT_VERIFY_TOP_K = 3


class VerificationStatus(str, Enum):
    VERIFIED = "verified"
    REVISED = "revised"
    UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True)
class AtomicFact:
    """A minimal verifiable claim extracted from a draft response."""

    text: str
    subject_surface: str
    origin_index: int


@dataclass
class VerificationResult:
    fact: AtomicFact
    status: VerificationStatus
    best_triples: list[Triple] = field(default_factory=list)
    revised_text: str | None = None

    def to_dict(self) -> dict:
        return {
            "fact": self.fact.text,
            "subject": self.fact.subject_surface,
            "origin_index": self.fact.origin_index,
            "status": self.status.value,
            "best_triples": [verbalize(t) for t in self.best_triples],
            "revised_text": self.revised_text,
        }


def draft_response(question: Question, llm: LLMProvider, templates: dict[str, PromptTemplate]) -> str:
    """Initial unverified LLM answer; this is what gets decomposed."""
    return ask(llm, templates["draft"], question=question.text)


def decompose(response: str, llm: LLMProvider, templates: dict[str, PromptTemplate]) -> list[AtomicFact]:
    """Split a response into atomic facts via the LLM.

    The prompt requests one ``fact | subject`` line per claim; malformed
    lines are skipped with a warning rather than guessed at.
    """
    if not response.strip():
        return []
    reply = ask(llm, templates["decompose"], response=response)
    facts: list[AtomicFact] = []
    for raw in reply.splitlines():
        line = raw.strip().lstrip("-*").strip()
        if not line:
            continue
        text, sep, subject = line.partition("|")
        text, subject = text.strip(), subject.strip()
        if not sep or not text or not subject:
            log.warning("skipping malformed fact line %r", raw)
            continue
        if subject not in text:
            log.warning("skipping fact whose subject %r is not in the text %r", subject, text)
            continue
        facts.append(AtomicFact(text=text, subject_surface=subject, origin_index=len(facts)))
    return facts


def link_entity(fact: AtomicFact, store: KGStore, floor: float = DEFAULT_SIMILARITY_FLOOR) -> EntityRef:
    """Resolve the fact's subject surface form to a KG entity."""
    return link_surface(fact.subject_surface, store, floor)


def verify_fact(
    fact: AtomicFact,
    *,
    store: KGStore,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
    embedder: EmbeddingProvider,
    reranker: RerankProvider,
    scoring: ScoringConfig,
    denoising: DenoiseConfig,
    top_k: int = DEFAULT_VERIFY_TOP_K,
    link_floor: float = DEFAULT_SIMILARITY_FLOOR,
) -> VerificationResult:
    """Ground one claim: retrieve the linked entity's triples, denoise, score,
    and let the LLM judge the best ones against the claim.

    Unlinkable subjects and empty candidate sets come back unverifiable; a
    mismatch triggers the rewrite prompt. The rewrite must actually change
    the claim, otherwise the result is downgraded to unverifiable.
    """
    try:
        entity = link_entity(fact, store, link_floor)
    except LinkFailure as exc:
        log.info("fact %d unverifiable: %s", fact.origin_index, exc)
        return VerificationResult(fact=fact, status=VerificationStatus.UNVERIFIABLE)

    pool = fetch_relations(store, entity).all()
    pool = denoise(pool, fact.text, denoising)  # rule layer only
    if not pool:
        return VerificationResult(fact=fact, status=VerificationStatus.UNVERIFIABLE)
    scored = score_candidates(fact.text, pool, scoring, embedder, reranker)
    # necessity layer runs after the scorer's top-N cut to bound LLM calls
    scored = denoise(scored, fact.text, denoising, llm, templates["necessity"])
    if not scored:
        return VerificationResult(fact=fact, status=VerificationStatus.UNVERIFIABLE)

    best = [c.payload for c in scored[:top_k]]
    evidence = "\n".join(verbalize(t) for t in best)
    reply = ask(llm, templates["judge"], fact=fact.text, triples=evidence)
    try:
        matched = parse_yes_no(reply)
    except Unparseable:
        log.warning("judgment reply %r unparseable for fact %d", reply, fact.origin_index)
        return VerificationResult(fact=fact, status=VerificationStatus.UNVERIFIABLE, best_triples=best)
    if matched:
        return VerificationResult(fact=fact, status=VerificationStatus.VERIFIED, best_triples=best)

    revised = ask(llm, templates["rewrite"], fact=fact.text, triples=evidence).strip()
    if not revised or revised == fact.text:
        log.warning("rewrite produced no change for fact %d", fact.origin_index)
        return VerificationResult(fact=fact, status=VerificationStatus.UNVERIFIABLE, best_triples=best)
    return VerificationResult(
        fact=fact, status=VerificationStatus.REVISED, best_triples=best, revised_text=revised
    )


def _summarize(results: list[VerificationResult]) -> str:
    lines = []
    for r in results:
        lines.append(f"- claim: {r.fact.text}")
        lines.append(f"  status: {r.status.value}")
        if r.revised_text:
            lines.append(f"  revision: {r.revised_text}")
        if r.best_triples:
            lines.append("  evidence: " + "; ".join(verbalize(t) for t in r.best_triples))
    return "\n".join(lines)


def run_parallel_branch(
    question: Question,
    *,
    store: KGStore,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
    embedder: EmbeddingProvider,
    reranker: RerankProvider,
    scoring: ScoringConfig,
    denoising: DenoiseConfig,
    top_k: int = DEFAULT_VERIFY_TOP_K,
    link_floor: float = DEFAULT_SIMILARITY_FLOOR,
) -> Answer:
    """Full parallel track: draft, decompose, verify each fact independently,
    synthesize. If nothing was verifiable the draft comes back flagged."""
    draft = draft_response(question, llm, templates)
    facts = decompose(draft, llm, templates)
    results = [
        verify_fact(
            fact,
            store=store,
            llm=llm,
            templates=templates,
            embedder=embedder,
            reranker=reranker,
            scoring=scoring,
            denoising=denoising,
            top_k=top_k,
            link_floor=link_floor,
        )
        for fact in facts
    ]
    if not facts or all(r.status is VerificationStatus.UNVERIFIABLE for r in results):
        return Answer(
            text=draft,
            track=QuestionType.PARALLEL,
            verification=results,
            draft=draft,
            flags={"unverified"},
        )
    text = ask(
        llm,
        templates["synthesize"],
        question=question.text,
        draft=draft,
        verifications=_summarize(results),
    ).strip()
    return Answer(text=text, track=QuestionType.PARALLEL, verification=results, draft=draft)
