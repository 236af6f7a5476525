"""MWE inventory and single-token tokenization.

Each registered multi-word expression owns one canonical token name;
`tokenize_with_mwes` rewrites every word-bounded, case-insensitive
occurrence of a registered surface (or variant) into that single token
and leaves the rest of the sentence to the base tokenizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import CorpusIoError, InvalidMwe, MissingTokenId, NameCollision
from .textmatch import fold_case, is_word_char

SUPPORTED_LANGUAGES = ("en", "pt", "gl")


def token_name_for(surface: str) -> str:
    """Canonical token name: lowercase, single spaces to underscores."""
    return "idiom_" + "_".join(fold_case(surface).split())


@dataclass
class MweEntry:
    surface: str
    language: str
    token_name: str
    variants: list[str] = field(default_factory=list)
    token_id: int | None = None

    def patterns(self) -> list[str]:
        """Folded match patterns, surface first."""
        return [fold_case(self.surface)] + [fold_case(v) for v in self.variants]


class MweRegistry:
    """Insertion-ordered collection of MWE entries, unique by token name."""

    def __init__(self, language: str = "en"):
        self.language = language
        self._entries: list[MweEntry] = []
        self._by_name: dict[str, MweEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def get(self, token_name: str) -> MweEntry | None:
        return self._by_name.get(token_name)

    def register(self, surface: str, language: str | None = None,
                 variants: list[str] | None = None) -> MweEntry:
        """Register one MWE; idempotent for an identical surface."""
        language = language or self.language
        if language not in SUPPORTED_LANGUAGES:
            raise InvalidMwe(f"unsupported language: {language!r}")
        words = surface.split()
        if len(words) < 2 or any(not w for w in words):
            raise InvalidMwe(f"surface must have at least two words: {surface!r}")
        name = token_name_for(surface)
        existing = self._by_name.get(name)
        if existing is not None:
            if fold_case(existing.surface) != fold_case(surface):
                raise NameCollision(
                    f"{surface!r} collides with {existing.surface!r} on {name}")
            return existing
        variants = list(variants or [])
        folded_surface = fold_case(surface)
        cleaned: list[str] = []
        for variant in variants:
            if not variant:
                raise InvalidMwe("variants must be non-empty")
            if fold_case(variant) == folded_surface:
                continue
            cleaned.append(variant)
        entry = MweEntry(surface=surface, language=language,
                         token_name=name, variants=cleaned)
        self._entries.append(entry)
        self._by_name[name] = entry
        return entry

    def save(self, path: str) -> None:
        rows = [
            {"surface": e.surface, "language": e.language,
             "variants": e.variants, "token_name": e.token_name}
            for e in self._entries
        ]
        try:
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(rows, handle, ensure_ascii=False, indent=2)
                handle.write("\n")
        except OSError as exc:
            raise CorpusIoError(f"cannot write registry {path!r}: {exc}") from exc

    @classmethod
    def load(cls, path: str, language: str = "en") -> "MweRegistry":
        try:
            with open(path, encoding="utf-8") as handle:
                rows = json.load(handle)
        except OSError as exc:
            raise CorpusIoError(f"cannot read registry {path!r}: {exc}") from exc
        registry = cls(language=language)
        for row in rows:
            registry.register(row["surface"], row.get("language", language),
                              row.get("variants", []))
        return registry


def _match_spans(sentence: str, registry: MweRegistry):
    """Non-overlapping (start, end, entry) spans, longest match first with
    earlier-registered entries winning ties."""
    folded = fold_case(sentence)
    n = len(folded)
    patterns: list[tuple[str, int, MweEntry]] = []
    for order, entry in enumerate(registry):
        for pat in entry.patterns():
            if pat:
                patterns.append((pat, order, entry))
    spans = []
    i = 0
    while i < n:
        best: tuple[int, int, MweEntry] | None = None
        if i == 0 or not is_word_char(folded[i - 1]):
            for pat, order, entry in patterns:
                end = i + len(pat)
                if end > n or not folded.startswith(pat, i):
                    continue
                if end < n and is_word_char(folded[end]):
                    continue
                if best is None or (-len(pat), order) < (-(best[0] - i), best[1]):
                    best = (end, order, entry)
        if best is None:
            i += 1
        else:
            spans.append((i, best[0], best[2]))
            i = best[0]
    return spans


def tokenize_with_mwes(sentence: str, registry: MweRegistry,
                       base_tokenizer) -> list[str]:
    """Tokenize `sentence`, emitting one token per MWE occurrence.

    Text outside matched spans is tokenized by `base_tokenizer` unchanged;
    a sentence without registered MWEs tokenizes identically to the base
    tokenizer's output.
    """
    tokens: list[str] = []
    cursor = 0
    for start, end, entry in _match_spans(sentence, registry):
        if start > cursor:
            tokens.extend(base_tokenizer.tokenize(sentence[cursor:start]))
        tokens.append(entry.token_name)
        cursor = end
    if cursor < len(sentence):
        tokens.extend(base_tokenizer.tokenize(sentence[cursor:]))
    return tokens


def encode_with_mwes(sentence: str, registry: MweRegistry, base_tokenizer,
                     strict: bool = True) -> list[int]:
    """Token ids for `tokenize_with_mwes` output.

    In strict mode an MWE token whose entry has no assigned id raises
    MissingTokenId; otherwise the placeholder mask id is used (dry runs).
    """
    ids: list[int] = []
    for token in tokenize_with_mwes(sentence, registry, base_tokenizer):
        entry = registry.get(token)
        if entry is None:
            ids.extend(base_tokenizer.convert_tokens_to_ids([token]))
            continue
        idx = base_tokenizer.token_to_id(token)
        if idx is not None:
            ids.append(idx)
        elif entry.token_id is not None:
            ids.append(entry.token_id)
        elif strict:
            raise MissingTokenId(f"no token id assigned for {token}")
        else:
            ids.append(base_tokenizer.mask_id)
    return ids
