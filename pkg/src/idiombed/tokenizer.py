"""Minimal word-piece tokenizer used by the desk-scale encoders.

Whole words from the build corpus are single tokens; anything unseen is
broken into greedy longest-prefix character pieces ("##x" continuations),
so arbitrary text can always be encoded. Injected idiom tokens are added
after construction and decode back to their surface form.
"""

from __future__ import annotations

import json

from .errors import CorpusIoError
from .textmatch import fold_case

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
MASK_TOKEN = "[MASK]"
_SPECIALS = (PAD_TOKEN, UNK_TOKEN, MASK_TOKEN)


class WordPieceTokenizer:
    """Lowercasing whitespace + greedy word-piece tokenizer."""

    def __init__(self, tokens: list[str], added_display: dict[str, str] | None = None):
        self._tokens = list(tokens)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ValueError("duplicate tokens in vocabulary")
        for special in _SPECIALS:
            if special not in self._ids:
                raise ValueError(f"vocabulary must contain {special}")
        # Display text for tokens added after construction (idiom tokens).
        self._added_display = dict(added_display or {})

    @classmethod
    def build(cls, texts) -> "WordPieceTokenizer":
        """Build a vocabulary from an iterable of texts.

        Every distinct (folded) word becomes a token; every character seen
        becomes both a word-initial piece and a "##" continuation piece, so
        unseen words still encode without loss.
        """
        words: set[str] = set()
        chars: set[str] = set()
        for text in texts:
            for word in fold_case(text).split():
                words.add(word)
                chars.update(word)
        tokens = list(_SPECIALS)
        tokens.extend(sorted(words))
        for ch in sorted(chars):
            if ch not in words:
                tokens.append(ch)
            tokens.append(f"##{ch}")
        return cls(tokens)

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    @property
    def pad_id(self) -> int:
        return self._ids[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self._ids[UNK_TOKEN]

    @property
    def mask_id(self) -> int:
        return self._ids[MASK_TOKEN]

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def token_to_id(self, token: str) -> int | None:
        return self._ids.get(token)

    def id_to_token(self, idx: int) -> str:
        return self._tokens[idx]

    def add_token(self, token: str, display: str | None = None) -> int:
        """Append one token to the vocabulary and return its id."""
        if token in self._ids:
            raise ValueError(f"token already in vocabulary: {token!r}")
        idx = len(self._tokens)
        self._tokens.append(token)
        self._ids[token] = idx
        if display is not None:
            self._added_display[token] = display
        return idx

    def tokenize(self, text: str) -> list[str]:
        out: list[str] = []
        for word in fold_case(text).split():
            out.extend(self._tokenize_word(word))
        return out

    def _tokenize_word(self, word: str) -> list[str]:
        if word in self._ids:
            return [word]
        pieces: list[str] = []
        pos = 0
        while pos < len(word):
            end = len(word)
            piece = None
            while end > pos:
                cand = word[pos:end] if pos == 0 else f"##{word[pos:end]}"
                if cand in self._ids:
                    piece = cand
                    break
                end -= 1
            if piece is None:
                return [UNK_TOKEN]
            pieces.append(piece)
            pos = end
        return pieces

    def convert_tokens_to_ids(self, tokens: list[str]) -> list[int]:
        unk = self.unk_id
        return [self._ids.get(tok, unk) for tok in tokens]

    def encode(self, text: str) -> list[int]:
        return self.convert_tokens_to_ids(self.tokenize(text))

    def decode(self, ids) -> str:
        words: list[str] = []
        for idx in ids:
            tok = self._tokens[idx]
            if tok == PAD_TOKEN:
                continue
            if tok in self._added_display:
                words.append(self._added_display[tok])
            elif tok.startswith("##") and words:
                words[-1] += tok[2:]
            else:
                words.append(tok)
        return " ".join(words)

    def save(self, path: str) -> None:
        payload = {"tokens": self._tokens, "added_display": self._added_display}
        try:
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, ensure_ascii=False)
        except OSError as exc:
            raise CorpusIoError(f"cannot write tokenizer {path!r}: {exc}") from exc

    @classmethod
    def load(cls, path: str) -> "WordPieceTokenizer":
        try:
            with open(path, encoding="utf-8") as handle:
                payload = json.load(handle)
        except OSError as exc:
            raise CorpusIoError(f"cannot read tokenizer {path!r}: {exc}") from exc
        return cls(payload["tokens"], payload.get("added_display"))
