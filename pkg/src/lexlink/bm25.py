"""Okapi BM25 over token streams, backed by an inverted index.

The score of a document ``d`` for a query is

    sum over unique query terms t of
        IDF(t) * tf(t, d) * (k1 + 1) / (tf(t, d) + k1 * (1 - b + b * |d| / avgdl))

with ``IDF(t) = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))``. The +1-inside-log
IDF variant keeps every score non-negative, so zero-score documents can be
excluded from rankings and tie-breaking stays well defined.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import ArtifactFormatError, DocOutOfRange
from .tokenizer import TokenStream

FORMAT_TAG = "lexlink.bm25-index/1"


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class ScoredDoc:
    doc_index: int
    score: float


def _unique(tokens: TokenStream) -> list[str]:
    # Duplicated query terms carry no extra signal for short mention queries.
    return list(dict.fromkeys(tokens))


class Bm25Index:
    """Immutable inverted index; safe for concurrent queries once built."""

    def __init__(self, postings: dict[str, list[tuple[int, int]]], doc_lengths: list[int], params: Bm25Params):
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.doc_count = len(doc_lengths)
        self.avg_doc_length = sum(doc_lengths) / self.doc_count if self.doc_count else 0.0
        self.params = params

    @classmethod
    def build(cls, docs: list[TokenStream], params: Bm25Params = Bm25Params()) -> "Bm25Index":
        postings: dict[str, list[tuple[int, int]]] = {}
        doc_lengths: list[int] = []
        for doc_index, doc in enumerate(docs):
            doc_lengths.append(len(doc))
            counts = Counter(doc)
            for token in _unique(doc):
                postings.setdefault(token, []).append((doc_index, counts[token]))
        return cls(postings, doc_lengths, params)

    def _idf(self, df: int) -> float:
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def _contribution(self, idf: float, tf: int, doc_length: int) -> float:
        k1, b = self.params.k1, self.params.b
        norm = k1 * (1.0 - b + b * doc_length / self.avg_doc_length)
        return idf * tf * (k1 + 1.0) / (tf + norm)

    def score(self, query: TokenStream, doc_index: int) -> float:
        """Score one document; absent query terms contribute zero."""
        if not 0 <= doc_index < self.doc_count:
            raise DocOutOfRange(doc_index, self.doc_count)
        total = 0.0
        for token in _unique(query):
            posting = self.postings.get(token)
            if not posting:
                continue
            tf = next((f for d, f in posting if d == doc_index), 0)
            if tf == 0:
                continue
            total += self._contribution(self._idf(len(posting)), tf, self.doc_lengths[doc_index])
        return total

    def top_k(self, query: TokenStream, k: int) -> list[ScoredDoc]:
        """Up to ``k`` positive-scoring documents, score-descending, ties by
        ascending doc index."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores: dict[int, float] = {}
        for token in _unique(query):
            posting = self.postings.get(token)
            if not posting:
                continue
            idf = self._idf(len(posting))
            for doc_index, tf in posting:
                contribution = self._contribution(idf, tf, self.doc_lengths[doc_index])
                scores[doc_index] = scores.get(doc_index, 0.0) + contribution
        ranked = sorted(
            (item for item in scores.items() if item[1] > 0.0),
            key=lambda item: (-item[1], item[0]),
        )
        return [ScoredDoc(doc_index=d, score=s) for d, s in ranked[:k]]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "k1": self.params.k1,
            "b": self.params.b,
            "doc_lengths": self.doc_lengths,
            "postings": {token: [[d, f] for d, f in posting] for token, posting in self.postings.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Bm25Index":
        if obj.get("format") != FORMAT_TAG:
            raise ArtifactFormatError(f"expected {FORMAT_TAG!r}, got {obj.get('format')!r}")
        postings = {
            token: [(int(d), int(f)) for d, f in posting]
            for token, posting in obj["postings"].items()
        }
        return cls(postings, [int(n) for n in obj["doc_lengths"]], Bm25Params(k1=obj["k1"], b=obj["b"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Bm25Index":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ArtifactFormatError(f"{path}: not a JSON index artifact: {exc.msg}") from exc
        return cls.from_dict(obj)
