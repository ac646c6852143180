"""Exception types shared across the package.

Everything data-shaped derives from :class:`DataError` so the CLI can map it
to exit code 2; plain I/O failures surface as ``OSError`` and map to exit
code 1.
"""

from __future__ import annotations


class LexlinkError(Exception):
    """Base class for package-specific errors."""


class DataError(LexlinkError):
    """Invalid input data or a violated data contract."""


class MalformedLine(DataError):
    def __init__(self, path, line_no: int, reason: str = ""):
        self.path = str(path)
        self.line_no = line_no
        detail = f": {reason}" if reason else ""
        super().__init__(f"{self.path}:{line_no}: malformed line{detail}")


class DuplicateId(DataError):
    def __init__(self, entity_id: str):
        self.entity_id = entity_id
        super().__init__(f"duplicate entity id {entity_id!r}")


class PriorOutOfRange(DataError):
    def __init__(self, path, line_no: int, prior: float):
        self.path = str(path)
        self.line_no = line_no
        self.prior = prior
        super().__init__(f"{self.path}:{line_no}: prior {prior!r} not in [0, 1]")


class PriorSumExceeded(DataError):
    def __init__(self, alias: str, total: float):
        self.alias = alias
        self.total = total
        super().__init__(f"priors for alias {alias!r} sum to {total:.6f} > 1")


class SpanMismatch(DataError):
    def __init__(self, doc_id: str, reason: str = "mention does not match its span"):
        self.doc_id = doc_id
        super().__init__(f"doc {doc_id!r}: {reason}")


class DocOutOfRange(DataError):
    def __init__(self, doc_index: int, doc_count: int):
        self.doc_index = doc_index
        self.doc_count = doc_count
        super().__init__(f"doc index {doc_index} out of range for {doc_count} documents")


class MentionTooLong(DataError):
    pass


class NameTooLong(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class MissingGold(DataError):
    pass


class EmptyKb(DataError):
    pass


class UnknownCandidate(DataError):
    def __init__(self, entity_id: str):
        self.entity_id = entity_id
        super().__init__(f"candidate {entity_id!r} not present in the entity store")


class NoVotes(DataError):
    pass


class LengthMismatch(DataError):
    pass


class InfeasibleSpec(DataError):
    pass


class StaleStore(DataError):
    pass


class ArtifactFormatError(DataError):
    pass
