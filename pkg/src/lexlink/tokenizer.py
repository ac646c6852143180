"""Deterministic text segmentation shared by the BM25 indexes and the encoders.

CJK ideographs become single-character tokens, which keeps retrieval robust
for unseen names without pulling in a word-segmentation dependency. Every
other alphanumeric codepoint is grouped into maximal lowercased runs;
remaining codepoints separate tokens and are dropped.
"""

from __future__ import annotations

TokenStream = list[str]

# CJK Unified Ideographs, Extension A, Compatibility Ideographs. Codepoints
# outside these blocks fall through to the run-based rule.
_CJK_RANGES = (
    (0x4E00, 0x9FFF),
    (0x3400, 0x4DBF),
    (0xF900, 0xFAFF),
)


def _is_cjk(codepoint: int) -> bool:
    return any(lo <= codepoint <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> TokenStream:
    """Split ``text`` into single CJK characters and lowercased alphanumeric runs.

    >>> tokenize("GPT-4中文")
    ['gpt', '4', '中', '文']
    """
    tokens: list[str] = []
    run: list[str] = []

    def flush() -> None:
        if run:
            tokens.append("".join(run).lower())
            run.clear()

    for ch in text:
        if _is_cjk(ord(ch)):
            flush()
            tokens.append(ch)
        elif ch.isalnum():
            run.append(ch)
        else:
            flush()
    flush()
    return tokens
