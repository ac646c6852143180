"""End-to-end linking shared by the CLI and the evaluation harness:
retrieve, rerank over the union of coarse and fine candidates, vote.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Dataset, KnowledgeBase, MentionRecord
from .ensemble import Prediction, VoteInput, vote
from .reranker import DualEncoder, EntityEmbeddingStore, rerank
from .retriever import RetrievalResult, Retriever, merge_coarse

# Pipeline pieces that ablations may disable.
TOGGLES = ("ensemble", "at_bm25", "kb_bm25", "desc_bm25")

# decided_by label used when the ensemble is disabled and the reranker's
# top-1 is taken directly.
RERANKER_ONLY = "reranker_only"


@dataclass
class LinkedMention:
    doc_id: str
    gold_id: str | None
    retrieval: RetrievalResult
    votes: VoteInput
    reranked: list[tuple[str, float]]
    prediction: Prediction | None  # None when no stage produced a hypothesis


@dataclass
class Pipeline:
    kb: KnowledgeBase
    retriever: Retriever
    model: DualEncoder
    store: EntityEmbeddingStore

    def link(self, m: MentionRecord, disabled: frozenset[str] = frozenset()) -> LinkedMention:
        unknown = disabled.difference(TOGGLES)
        if unknown:
            raise ValueError(f"unknown toggles: {sorted(unknown)}")
        result = self.retriever.retrieve(self.kb, m, disabled=disabled)
        pool = merge_coarse(result.cand1, result.cand2)
        reranked = rerank(self.model, self.store, m, pool)
        top_reranked = reranked[0][0] if reranked else None
        votes = VoteInput(
            at=result.top1_at,
            kb=result.top1_kb,
            desc=result.top1_desc,
            reranker=top_reranked,
        )
        if "ensemble" in disabled:
            prediction = (
                Prediction(entity_id=top_reranked, decided_by=RERANKER_ONLY)
                if top_reranked is not None
                else None
            )
        elif votes == VoteInput():
            prediction = None
        else:
            prediction = vote(votes)
        return LinkedMention(
            doc_id=m.doc_id,
            gold_id=m.gold_id,
            retrieval=result,
            votes=votes,
            reranked=reranked,
            prediction=prediction,
        )

    def link_dataset(self, ds: Dataset, disabled: frozenset[str] = frozenset()) -> list[LinkedMention]:
        return [self.link(record, disabled=disabled) for record in ds.records]
