"""Vocabulary and embedding-matrix extension with learned idiom vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import torch

from .encoder import TinyTransformerEncoder
from .errors import AlreadyInjected, DimMismatch, UnregisteredMwe
from .mimic import EmbeddingBundle
from .registry import MweRegistry
from .textmatch import fold_case


@dataclass
class InjectionReport:
    old_vocab_size: int
    new_vocab_size: int
    assigned_ids: dict[str, int] = field(default_factory=dict)
    checksum_before: str = ""
    checksum_after_existing_rows: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "old_vocab_size": self.old_vocab_size,
            "new_vocab_size": self.new_vocab_size,
            "assigned_ids": self.assigned_ids,
            "checksum_before": self.checksum_before,
            "checksum_after_existing_rows": self.checksum_after_existing_rows,
        }, indent=2)


def inject_embeddings(encoder: TinyTransformerEncoder, bundle: EmbeddingBundle,
                      registry: MweRegistry, tokenizer) -> InjectionReport:
    """Append the bundle's vectors as new vocabulary rows.

    Rows are appended in manifest order and ids assigned accordingly, so
    id assignment is reproducible across runs. Pre-existing rows are
    untouched (checksummed before and after); the tokenizer learns each
    token name and decodes it back to the idiom surface.
    """
    if bundle.dimension != encoder.d_model:
        raise DimMismatch(f"bundle dim {bundle.dimension} vs encoder {encoder.d_model}")
    for embedding in bundle.entries:
        name = embedding.mwe_token_name
        if registry.get(name) is None:
            raise UnregisteredMwe(name)
        if name in tokenizer:
            raise AlreadyInjected(name)

    old_size = encoder.vocab_size
    checksum_before = encoder.embedding_checksum()
    rows = torch.from_numpy(bundle.matrix())
    encoder.append_embedding_rows(rows)

    assigned: dict[str, int] = {}
    for offset, embedding in enumerate(bundle.entries):
        name = embedding.mwe_token_name
        entry = registry.get(name)
        token_id = old_size + offset
        tokenizer_id = tokenizer.add_token(name, display=fold_case(entry.surface))
        if tokenizer_id != token_id:
            raise AlreadyInjected(
                f"tokenizer id {tokenizer_id} disagrees with embedding row {token_id}")
        entry.token_id = token_id
        assigned[name] = token_id

    return InjectionReport(
        old_vocab_size=old_size,
        new_vocab_size=encoder.vocab_size,
        assigned_ids=assigned,
        checksum_before=checksum_before,
        checksum_after_existing_rows=encoder.embedding_checksum(rows=old_size),
    )
