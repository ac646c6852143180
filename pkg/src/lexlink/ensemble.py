"""Four-way vote over the stage top-1 predictions.

The voters are the alias-table retriever, the name retriever, the
description retriever, and the reranker. Absent votes (a stage that returned
nothing) are dropped from the multiset rather than treated as a value, since
absence carries no entity hypothesis.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import NoVotes


@dataclass(frozen=True)
class VoteInput:
    at: str | None = None
    kb: str | None = None
    desc: str | None = None
    reranker: str | None = None


@dataclass(frozen=True)
class Prediction:
    entity_id: str
    decided_by: str  # majority | pair_with_reranker | reranker_fallback | only_available


def vote(v: VoteInput) -> Prediction:
    """Resolve the four votes.

    1. A value with strictly greater multiplicity than every other, at least
       2, wins (covers 4:0, 3:1, 2:1, 2:1:1).
    2. A 2:2 split goes to the side containing the reranker's vote.
    3. All-distinct votes fall back to the reranker, or to the first present
       retriever vote (at, kb, desc) when the reranker abstained.
    """
    present = [x for x in (v.at, v.kb, v.desc, v.reranker) if x is not None]
    if not present:
        raise NoVotes("all four votes are absent")
    ranked = Counter(present).most_common()
    top_value, top_count = ranked[0]
    if top_count >= 2 and (len(ranked) == 1 or ranked[1][1] < top_count):
        return Prediction(entity_id=top_value, decided_by="majority")
    if top_count == 2:
        # Two values at multiplicity 2 means all four voted; the reranker is
        # on one side by construction.
        return Prediction(entity_id=v.reranker, decided_by="pair_with_reranker")
    if v.reranker is not None:
        return Prediction(entity_id=v.reranker, decided_by="reranker_fallback")
    for value in (v.at, v.kb, v.desc):
        if value is not None:
            return Prediction(entity_id=value, decided_by="only_available")
    raise AssertionError("unreachable: present votes were nonempty")
