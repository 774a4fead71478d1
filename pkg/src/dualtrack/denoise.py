"""Dual-layer task-aware relation denoising.

Layer one is a provider-free keyword rule that drops administrative
relations ("entity ID", "data source", ...). Layer two asks the LLM for a
necessity score of each remaining relation against the question and drops
the ones below a threshold. Failures never drop evidence: unresolved labels,
unparseable scores and provider errors all keep the item and log a warning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

from .kg import RelationRef, Triple
from .llm import LLMProvider, PromptTemplate, ProviderError, Unparseable, ask, parse_score
from .scoring import ScoredCandidate

log = logging.getLogger(__name__)

DEFAULT_INVALID_KEYWORDS = ("id", "source", "version", "metadata")

Denoisable = Union[Triple, RelationRef, ScoredCandidate]


@dataclass
class DenoiseConfig:
    k_invalid: frozenset[str] = field(default_factory=lambda: frozenset(DEFAULT_INVALID_KEYWORDS))
    theta_necessity: float = 0.5

    def __post_init__(self):
        keywords = frozenset(k.lower() for k in self.k_invalid)
        if not keywords or any(not k for k in keywords):
            raise ValueError("k_invalid must be a set of non-empty keywords")
        self.k_invalid = keywords
        if not 0.0 <= self.theta_necessity <= 1.0:
            raise ValueError(f"theta_necessity must be in [0, 1], got {self.theta_necessity}")


def _relation_of(item: Denoisable) -> RelationRef:
    if isinstance(item, ScoredCandidate):
        item = item.payload
    if isinstance(item, Triple):
        return item.relation
    return item


def rule_filter(relation: RelationRef, cfg: DenoiseConfig) -> bool:
    """True when the relation should be dropped by the keyword rule."""
    if not relation.label:
        log.warning("relation %s has no label; keeping it unfiltered", relation.id)
        return False
    label = relation.label.lower()
    return any(keyword in label for keyword in cfg.k_invalid)


def necessity_score(
    relation: RelationRef,
    question: str,
    llm: LLMProvider,
    template: PromptTemplate,
) -> float:
    """LLM-judged necessity of the relation for the question, in [0, 1].

    An unparseable reply scores 1.0 (keep) so parse failures can never
    silently delete evidence.
    """
    reply = ask(llm, template, relation=relation.label or relation.id, question=question)
    try:
        return parse_score(reply)
    except Unparseable:
        log.warning("unparseable necessity reply %r for relation %s; keeping", reply, relation.id)
        return 1.0


def denoise(
    candidates: Sequence[Denoisable],
    question: str,
    cfg: DenoiseConfig,
    llm: LLMProvider | None = None,
    template: PromptTemplate | None = None,
) -> list[Denoisable]:
    """Apply the keyword rule, then (when an LLM is supplied) the necessity
    threshold. Survivor order follows input order.

    With no LLM, or with ``theta_necessity`` at 0, only the rule layer runs
    and no provider call is made.
    """
    kept = [c for c in candidates if not rule_filter(_relation_of(c), cfg)]
    if llm is None or template is None or cfg.theta_necessity == 0.0:
        return kept
    survivors = []
    for candidate in kept:
        relation = _relation_of(candidate)
        try:
            score = necessity_score(relation, question, llm, template)
        except ProviderError as exc:
            log.warning("necessity scoring failed for %s (%s); keeping", relation.id, exc)
            survivors.append(candidate)
            continue
        if score >= cfg.theta_necessity:
            survivors.append(candidate)
        else:
            log.debug("dropping %s: necessity %.2f < %.2f", relation.id, score, cfg.theta_necessity)
    return survivors
