"""Case-folding and occurrence-matching helpers shared by extraction,
registry tokenization and corpus statistics.

All matching in the package is case-insensitive and offset-preserving:
the folded copy of a string always has the same length as the original,
so offsets found in the folded text index directly into the source text.
"""

from __future__ import annotations

import os
from typing import Iterable, Iterator, Sequence

from .errors import CorpusIoError


def fold_case(text: str) -> str:
    """Lowercase `text` without changing its length.

    Uses the full lowercase mapping when it is length-preserving (the
    overwhelmingly common case) and falls back to a per-code-point fold
    that skips length-changing mappings otherwise. The fallback keeps
    match offsets valid for oddities like U+0130.
    """
    folded = text.lower()
    if len(folded) == len(text):
        return folded
    out = []
    for ch in text:
        low = ch.lower()
        out.append(low if len(low) == 1 else ch)
    return "".join(out)


def is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def iter_corpus_lines(path: str) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, line text) from a line-oriented file.

    Lines are byte sequences separated by 0x0A; the separator is not part
    of the line and carriage returns are kept as content. Invalid UTF-8 is
    replaced, never fatal.
    """
    try:
        stream = open(path, "rb")
    except OSError as exc:
        raise CorpusIoError(f"cannot read corpus {path!r}: {exc}") from exc
    with stream:
        line_number = 0
        pending = b""
        while True:
            chunk = stream.read(1 << 20)
            if not chunk:
                break
            pending += chunk
            pieces = pending.split(b"\n")
            pending = pieces.pop()
            for raw in pieces:
                line_number += 1
                yield line_number, raw.decode("utf-8", errors="replace")
        if pending:
            line_number += 1
            yield line_number, pending.decode("utf-8", errors="replace")


def grep_match_offset(line: str, folded_patterns: Sequence[str]) -> int | None:
    """First offset where any pattern occurs preceded by a space or the
    line start, the same semantics as a `grep -i " <phrase>"` retrieval.

    Returns the offset of the pattern itself (not the leading space), or
    None when nothing matches. Ties at the same offset prefer the longest
    pattern; remaining ties prefer earlier patterns.
    """
    folded = fold_case(line)
    best: tuple[int, int, int] | None = None
    for idx, pattern in enumerate(folded_patterns):
        if not pattern:
            continue
        start = 0
        while True:
            pos = folded.find(pattern, start)
            if pos < 0:
                break
            if pos == 0 or folded[pos - 1] == " ":
                key = (pos, -len(pattern), idx)
                if best is None or key < best:
                    best = key
                break
            start = pos + 1
    return best[0] if best is not None else None


def find_word_bounded(folded_text: str, folded_pattern: str, start: int = 0) -> int:
    """Offset of the next occurrence of `folded_pattern` bounded by
    non-word characters on both sides, or -1."""
    n = len(folded_text)
    m = len(folded_pattern)
    pos = start
    while True:
        pos = folded_text.find(folded_pattern, pos)
        if pos < 0:
            return -1
        left_ok = pos == 0 or not is_word_char(folded_text[pos - 1])
        end = pos + m
        right_ok = end == n or not is_word_char(folded_text[end])
        if left_ok and right_ok:
            return pos
        pos += 1


def count_word_bounded(folded_text: str, folded_pattern: str) -> int:
    """Number of word-bounded occurrences (non-overlapping scan)."""
    count = 0
    pos = 0
    while True:
        pos = find_word_bounded(folded_text, folded_pattern, pos)
        if pos < 0:
            return count
        count += 1
        pos += len(folded_pattern)


def source_name(path: str) -> str:
    """Canonical source_file value for records mined from `path`."""
    return os.path.basename(path)


def normalize_spaces(words: Iterable[str]) -> str:
    return " ".join(words)
