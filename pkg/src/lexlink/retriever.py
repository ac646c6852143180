"""Coarse-to-fine candidate retrieval.

The coarse layer runs two BM25 models over the mention string: one across
alias-table surface forms, one across knowledge-base entity names. The
survivors are merged into a duplicate-free candidate list, and the fine layer
re-retrieves from it with a transient BM25 index over the candidates'
descriptions, queried with the mention's document text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .bm25 import Bm25Index, Bm25Params
from .corpus import AliasEntry, AliasTable, KnowledgeBase, MentionRecord
from .errors import ArtifactFormatError
from .tokenizer import tokenize

AT_FORMAT_TAG = "lexlink.at-index/1"
KB_FORMAT_TAG = "lexlink.kb-index/1"

# The fine stage queries with at most this many document tokens; mirrors the
# encoder sequence cap.
FINE_QUERY_TOKEN_LIMIT = 128

# Ordered duplicate-free list of entity ids.
CandidateSet = list[str]

_EXPANSION_MODES = ("all", "best")


@dataclass(frozen=True)
class RetrieverConfig:
    k_at: int = 10
    k_kb: int = 10
    k_desc: int = 10
    bm25_params: Bm25Params = field(default_factory=Bm25Params)
    # "all": a hit alias expands to every entity it maps to, prior-descending;
    # "best": only its top-prior entity. Full expansion favors tail entities.
    alias_expansion: str = "all"

    def __post_init__(self):
        for name in ("k_at", "k_kb", "k_desc"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.alias_expansion not in _EXPANSION_MODES:
            raise ValueError(f"alias_expansion must be one of {_EXPANSION_MODES}")


@dataclass(frozen=True)
class RetrievalResult:
    cand_at: CandidateSet
    cand_kb: CandidateSet
    cand1: CandidateSet
    cand2: CandidateSet
    top1_at: str | None
    top1_kb: str | None
    top1_desc: str | None


def merge_coarse(cand_at: CandidateSet, cand_kb: CandidateSet) -> CandidateSet:
    """Stable duplicate-free union: alias candidates first, then unseen
    name candidates in their rank order."""
    merged = list(cand_at)
    seen = set(cand_at)
    for entity_id in cand_kb:
        if entity_id not in seen:
            seen.add(entity_id)
            merged.append(entity_id)
    return merged


class Retriever:
    """Immutable two-index retriever; safe for concurrent queries."""

    def __init__(
        self,
        at_index: Bm25Index,
        kb_index: Bm25Index,
        alias_table: AliasTable,
        kb_rows: list[str],
        config: RetrieverConfig,
    ):
        self.at_index = at_index
        self.kb_index = kb_index
        self.alias_table = alias_table
        self.alias_rows = alias_table.entries  # doc index -> AliasEntry
        self.kb_rows = kb_rows  # doc index -> entity id
        self.config = config

    @classmethod
    def build(cls, kb: KnowledgeBase, at: AliasTable, config: RetrieverConfig = RetrieverConfig()) -> "Retriever":
        """One alias document per table entry (not deduplicated), one name
        document per entity, both tokenized with the shared tokenizer."""
        at_index = Bm25Index.build([tokenize(entry.alias) for entry in at.entries], config.bm25_params)
        kb_index = Bm25Index.build([tokenize(entity.name) for entity in kb.entities], config.bm25_params)
        return cls(at_index, kb_index, at, [entity.id for entity in kb.entities], config)

    def retrieve_coarse(self, mention: str) -> tuple[CandidateSet, CandidateSet]:
        query = tokenize(mention)
        if not query:
            return [], []

        kb_hits = self.kb_index.top_k(query, self.config.k_kb) if self.kb_index.doc_count else []
        cand_kb = [self.kb_rows[hit.doc_index] for hit in kb_hits]

        at_hits = self.at_index.top_k(query, self.config.k_at) if self.at_index.doc_count else []
        cand_at: CandidateSet = []
        seen: set[str] = set()
        for hit in at_hits:
            bucket = self.alias_table.entries_for(self.alias_rows[hit.doc_index].alias)
            if self.config.alias_expansion == "best":
                bucket = bucket[:1]
            for entry in bucket:
                if entry.entity_id in seen:
                    continue
                seen.add(entry.entity_id)
                cand_at.append(entry.entity_id)
                if len(cand_at) == self.config.k_at:
                    return cand_at, cand_kb
        return cand_at, cand_kb

    def retrieve_fine(self, kb: KnowledgeBase, doc_text: str, cand1: CandidateSet) -> CandidateSet:
        """Rank ``cand1`` by description relevance to the document text.

        The description corpus changes per mention, so the index is transient;
        rebuilding over a handful of candidates is cheap.
        """
        if not cand1:
            return []
        docs = [tokenize(kb.lookup(entity_id).description) for entity_id in cand1]
        index = Bm25Index.build(docs, self.config.bm25_params)
        query = tokenize(doc_text)[:FINE_QUERY_TOKEN_LIMIT]
        hits = index.top_k(query, self.config.k_desc) if query else []
        return [cand1[hit.doc_index] for hit in hits]

    def retrieve(self, kb: KnowledgeBase, mention: MentionRecord, disabled: frozenset[str] = frozenset()) -> RetrievalResult:
        """Full cascade. ``disabled`` may name BM25 stages to leave out
        (``at_bm25``, ``kb_bm25``, ``desc_bm25``), used by ablations."""
        cand_at, cand_kb = self.retrieve_coarse(mention.mention)
        if "at_bm25" in disabled:
            cand_at = []
        if "kb_bm25" in disabled:
            cand_kb = []
        cand1 = merge_coarse(cand_at, cand_kb)
        cand2 = [] if "desc_bm25" in disabled else self.retrieve_fine(kb, mention.text, cand1)
        return RetrievalResult(
            cand_at=cand_at,
            cand_kb=cand_kb,
            cand1=cand1,
            cand2=cand2,
            top1_at=cand_at[0] if cand_at else None,
            top1_kb=cand_kb[0] if cand_kb else None,
            top1_desc=cand2[0] if cand2 else None,
        )

    def save(self, at_path, kb_path) -> None:
        at_obj = {
            "format": AT_FORMAT_TAG,
            "index": self.at_index.to_dict(),
            "entries": [
                {"alias": e.alias, "entity_id": e.entity_id, "prior": e.prior}
                for e in self.alias_rows
            ],
        }
        kb_obj = {
            "format": KB_FORMAT_TAG,
            "index": self.kb_index.to_dict(),
            "entity_ids": self.kb_rows,
        }
        Path(at_path).write_text(json.dumps(at_obj, ensure_ascii=False) + "\n", encoding="utf-8")
        Path(kb_path).write_text(json.dumps(kb_obj, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, at_path, kb_path, config: RetrieverConfig = RetrieverConfig()) -> "Retriever":
        at_obj = _read_json(at_path)
        kb_obj = _read_json(kb_path)
        if at_obj.get("format") != AT_FORMAT_TAG:
            raise ArtifactFormatError(f"{at_path}: expected {AT_FORMAT_TAG!r}, got {at_obj.get('format')!r}")
        if kb_obj.get("format") != KB_FORMAT_TAG:
            raise ArtifactFormatError(f"{kb_path}: expected {KB_FORMAT_TAG!r}, got {kb_obj.get('format')!r}")
        alias_table = AliasTable(
            [AliasEntry(alias=e["alias"], entity_id=e["entity_id"], prior=float(e["prior"])) for e in at_obj["entries"]]
        )
        return cls(
            Bm25Index.from_dict(at_obj["index"]),
            Bm25Index.from_dict(kb_obj["index"]),
            alias_table,
            list(kb_obj["entity_ids"]),
            config,
        )


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactFormatError(f"{path}: not a JSON artifact: {exc.msg}") from exc
