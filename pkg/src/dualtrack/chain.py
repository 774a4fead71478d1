"""Chained multi-hop track: scored depth-first path expansion from a central
entity, with dynamic pruning and sufficiency-based early stopping.

Search constraints: depth capped at ``d_max``; per step only the top
``w_max`` relations above ``theta_search`` survive, and when too many do, an
LLM picks at most three. After every expansion the freshly extended path is
checked for sufficiency; a "yes" ends the search immediately. The final
answer is generated strictly from the triples of the best-scoring paths.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

from .classifier import Question, QuestionType
from .denoise import DenoiseConfig, denoise
from .kg import EntityRef, KGStore, LiteralValue, ObjectTerm, Triple, fetch_relations
from .linking import DEFAULT_SIMILARITY_FLOOR, LinkFailure, link_surface
from .llm import LLMProvider, PromptTemplate, Unparseable, ask, parse_yes_no
from .scoring import (
    EmbeddingProvider,
    RerankProvider,
    ScoredCandidate,
    ScoringConfig,
    score_candidates,
    top_n,
)

log = logging.getLogger(__name__)

HEAD = "head"
TAIL = "tail"


def _term_label(term) -> str:
    if isinstance(term, LiteralValue):
        return term.value
    return term.label or term.id


@dataclass(frozen=True)
class Hop:
    triple: Triple
    direction: str  # HEAD: moved subject->object; TAIL: moved object->subject
    score: float

    @property
    def target(self) -> ObjectTerm:
        return self.triple.object if self.direction == HEAD else self.triple.subject

    def triple_text(self) -> str:
        parts = ", ".join(
            _term_label(t) for t in (self.triple.subject, self.triple.relation, self.triple.object)
        )
        return f"({parts})"

    def describe(self) -> str:
        text = self.triple_text()
        return text + " [inverse]" if self.direction == TAIL else text


@dataclass(frozen=True)
class ReasoningPath:
    origin: EntityRef
    hops: tuple[Hop, ...] = ()

    def depth(self) -> int:
        return len(self.hops)

    def tip(self) -> ObjectTerm:
        return self.hops[-1].target if self.hops else self.origin

    def extend(self, hop: Hop) -> "ReasoningPath":
        return ReasoningPath(origin=self.origin, hops=self.hops + (hop,))

    def visited_ids(self) -> set[str]:
        visited = {self.origin.id}
        for hop in self.hops:
            target = hop.target
            if isinstance(target, EntityRef):
                visited.add(target.id)
        return visited

    def signature(self) -> tuple[tuple[str, str], ...]:
        """Order-stable identity: the (triple key, direction) of every hop."""
        return tuple((hop.triple.key(), hop.direction) for hop in self.hops)

    def verbalize(self) -> str:
        return " -> ".join(hop.describe() for hop in self.hops)

    def to_dict(self) -> dict:
        return {
            "origin": {"id": self.origin.id, "label": self.origin.label},
            "score": path_score(self),
            "hops": [
                {
                    "triple": hop.triple_text(),
                    "direction": hop.direction,
                    "score": hop.score,
                }
                for hop in self.hops
            ],
        }


def path_score(path: ReasoningPath) -> float:
    """Product of the hop relation scores (1.0 for an empty path)."""
    return math.prod(hop.score for hop in path.hops)


@dataclass
class SearchConfig:
    d_max: int = 3
    w_max: int = 5
    theta_search: float = 0.3
    llm_select_trigger: int = 8
    top_k_paths: int = 3
    max_expansions: int = 500  # global budget per question
    # sufficiency is checked after each completed expansion; a per-layer mode
    # is reserved but not implemented
    sufficiency_mode: str = "per_expansion"

    def __post_init__(self):
        if self.d_max < 1:
            raise ValueError(f"d_max must be >= 1, got {self.d_max}")
        if self.w_max < 1:
            raise ValueError(f"w_max must be >= 1, got {self.w_max}")
        if not 0.0 <= self.theta_search <= 1.0:
            raise ValueError(f"theta_search must be in [0, 1], got {self.theta_search}")
        if self.llm_select_trigger < 1:
            raise ValueError(f"llm_select_trigger must be >= 1, got {self.llm_select_trigger}")
        if self.top_k_paths < 1:
            raise ValueError(f"top_k_paths must be >= 1, got {self.top_k_paths}")
        if self.max_expansions < 1:
            raise ValueError(f"max_expansions must be >= 1, got {self.max_expansions}")
        if self.sufficiency_mode != "per_expansion":
            raise ValueError(f"unsupported sufficiency_mode {self.sufficiency_mode!r}")


@dataclass
class Answer:
    """Final engine output for either track."""

    text: str
    track: QuestionType | None = None
    supporting_paths: list[ReasoningPath] = field(default_factory=list)
    verification: list = field(default_factory=list)  # VerificationResult items
    draft: str | None = None  # parallel track only
    flags: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "track": self.track.value if self.track else None,
            "flags": sorted(self.flags),
            "draft": self.draft,
            "supporting_paths": [p.to_dict() for p in self.supporting_paths],
            "verification": [v.to_dict() for v in self.verification],
        }


def extract_central_entity(
    question: Question,
    store: KGStore,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
    floor: float = DEFAULT_SIMILARITY_FLOOR,
) -> EntityRef:
    """LLM-extract the question's core entity surface form and link it."""
    reply = ask(llm, templates["extract_entity"], question=question.text)
    lines = [line.strip().strip('"') for line in reply.splitlines()]
    surface = next((line for line in lines if line), "")
    if not surface:
        raise LinkFailure(f"entity extraction produced nothing for {question.id}")
    return link_surface(surface, store, floor)


def expand(
    path: ReasoningPath,
    question: Question,
    search: SearchConfig,
    scoring: ScoringConfig,
    store: KGStore,
    embedder: EmbeddingProvider,
    reranker: RerankProvider,
    denoising: DenoiseConfig,
    llm: LLMProvider | None = None,
    templates: dict[str, PromptTemplate] | None = None,
) -> list[ReasoningPath]:
    """One expansion step: retrieve, denoise, score, prune, extend.

    Returns one extended path per surviving relation, best score first.
    Passing no LLM disables the necessity layer and the selection prompt
    (used by oracle tests and model-free runs).
    """
    tip = path.tip()
    if not isinstance(tip, EntityRef) or path.depth() >= search.d_max:
        return []
    relations = fetch_relations(store, tip)
    visited = path.visited_ids()
    candidates: list[Triple] = []
    direction_by_key: dict[str, tuple[str, ObjectTerm]] = {}
    for direction, triples in ((HEAD, relations.head), (TAIL, relations.tail)):
        for triple in triples:
            far = triple.object if direction == HEAD else triple.subject
            if isinstance(far, EntityRef) and far.id in visited:
                continue  # cycle guard: never revisit an entity
            if triple.key() in direction_by_key:
                continue
            direction_by_key[triple.key()] = (direction, far)
            candidates.append(triple)

    pool = denoise(candidates, question.text, denoising)  # rule layer only
    scored = score_candidates(question.text, pool, scoring, embedder, reranker)
    if llm is not None and templates is not None:
        # necessity layer sits after the scorer's top-N cut to bound LLM calls
        scored = denoise(scored, question.text, denoising, llm, templates["necessity"])
    survivors = [c for c in scored if c.combined >= search.theta_search]
    survivors = top_n(survivors, search.w_max, key="combined")
    if llm is not None and templates is not None and len(survivors) > search.llm_select_trigger:
        survivors = _llm_select(survivors, question, llm, templates)
    return [
        path.extend(
            Hop(
                triple=c.payload,
                direction=direction_by_key[c.payload.key()][0],
                score=c.combined,
            )
        )
        for c in survivors
    ]


def _llm_select(
    survivors: list[ScoredCandidate],
    question: Question,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
) -> list[ScoredCandidate]:
    """Ask the LLM to pick at most three relations from a crowded candidate
    set; on a reply naming nothing recognizable, keep the top three by score."""
    listing = "\n".join(f"- {_relation_label(c)}" for c in survivors)
    reply = ask(llm, templates["select_relations"], question=question.text, relations=listing)
    named = {token.strip().lower() for token in re.split(r"[,;\n]", reply) if token.strip()}
    picked = [c for c in survivors if _relation_label(c).lower() in named]
    if not picked:
        log.warning("relation selection reply %r named no candidate; keeping top 3", reply)
        picked = list(survivors)
    return picked[:3]


def _relation_label(candidate: ScoredCandidate) -> str:
    relation = candidate.payload.relation if isinstance(candidate.payload, Triple) else candidate.payload
    return relation.label or relation.id


def check_sufficiency(
    path: ReasoningPath,
    question: Question,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
) -> bool:
    """LLM judgment: does the path already hold every fact the question
    needs? Unparseable replies mean "keep searching"."""
    reply = ask(llm, templates["sufficiency"], question=question.text, path=path.verbalize())
    try:
        return parse_yes_no(reply)
    except Unparseable:
        return False


def search_paths(
    origin: EntityRef,
    question: Question,
    search: SearchConfig,
    scoring: ScoringConfig,
    store: KGStore,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
    embedder: EmbeddingProvider,
    reranker: RerankProvider,
    denoising: DenoiseConfig,
    trace: list | None = None,
) -> tuple[list[ReasoningPath], bool]:
    """Depth-first search from the origin honoring all constraints.

    Returns every maximal path found (paths at full depth, dead ends, literal
    tips, and at most one path that passed the sufficiency check, which
    terminates the search early) plus whether that early stop fired. Children
    are visited in descending score order so high-score paths are reached
    before the budget runs out.
    """
    completed: list[ReasoningPath] = []
    expansions = 0
    stopped = False

    def visit(path: ReasoningPath) -> None:
        nonlocal expansions, stopped
        if stopped:
            return
        if expansions >= search.max_expansions:
            log.warning("expansion budget %d exhausted for %s", search.max_expansions, question.id)
            if path.depth():
                completed.append(path)
            return
        expansions += 1
        children = expand(
            path, question, search, scoring, store, embedder, reranker, denoising, llm, templates
        )
        if not children:
            if path.depth():
                completed.append(path)  # dead end: maximal as-is
            return
        for child in children:
            if stopped:
                return
            if trace is not None:
                trace.append((child.depth(), child.hops[-1].describe(), child.hops[-1].score))
            if check_sufficiency(child, question, llm, templates):
                completed.append(child)
                stopped = True
                return
            if child.depth() >= search.d_max or not isinstance(child.tip(), EntityRef):
                completed.append(child)
            else:
                visit(child)

    visit(ReasoningPath(origin=origin))
    return completed, stopped


def run_chain_branch(
    question: Question,
    *,
    store: KGStore,
    llm: LLMProvider,
    templates: dict[str, PromptTemplate],
    embedder: EmbeddingProvider,
    reranker: RerankProvider,
    scoring: ScoringConfig,
    search: SearchConfig,
    denoising: DenoiseConfig,
    link_floor: float = DEFAULT_SIMILARITY_FLOOR,
    trace: list | None = None,
) -> Answer:
    """Full chained track: extract and link the central entity, search, then
    generate an answer grounded strictly in the best paths' triples.

    The ``insufficient`` flag marks runs where no path was ever judged
    sufficient: either nothing was found at all, or the search exhausted its
    constraints (depth, width, threshold, budget) with only partial paths.
    """
    try:
        origin = extract_central_entity(question, store, llm, templates, link_floor)
    except LinkFailure as exc:
        log.warning("chain run aborted for %s: %s", question.id, exc)
        return Answer(
            text="",
            track=QuestionType.CHAINED,
            flags={"no_central_entity", "insufficient"},
        )
    completed, stopped_early = search_paths(
        origin, question, search, scoring, store, llm, templates, embedder, reranker, denoising, trace
    )
    if not completed:
        return Answer(text="", track=QuestionType.CHAINED, flags={"insufficient"})
    ranked = sorted(completed, key=lambda p: (-path_score(p), p.signature()))
    best = ranked[: search.top_k_paths]
    context = "\n".join(p.verbalize() for p in best)
    text = ask(llm, templates["generate"], question=question.text, triples=context).strip()
    flags = set() if stopped_early else {"insufficient"}
    return Answer(text=text, track=QuestionType.CHAINED, supporting_paths=best, flags=flags)
