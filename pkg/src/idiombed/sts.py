"""Siamese sentence-similarity training and scoring.

Sentences are encoded by mean-pooling the encoder's final layer, pairs
are scored by cosine similarity, and training minimizes the mean squared
error between the cosine and the gold score. The pretrain regime rejects
idiom-subset data; fine-tuning accepts anything.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import torch

from .encoder import TinyTransformerEncoder
from .errors import (
    CorpusIoError,
    DegenerateVector,
    InvalidArgument,
    SettingViolation,
)
from .registry import MweRegistry, encode_with_mwes

SUBSETS = ("general", "idiom")
TSV_HEADER = ("sentence_a", "sentence_b", "gold_score", "language", "subset")


@dataclass
class StsPair:
    sentence_a: str
    sentence_b: str
    gold_score: float
    language: str = "en"
    subset: str = "general"

    def __post_init__(self):
        if not self.sentence_a or not self.sentence_b:
            raise InvalidArgument("sentences must be non-empty")
        if not 0.0 <= self.gold_score <= 1.0:
            raise InvalidArgument(f"gold score {self.gold_score} outside [0,1]")
        if self.subset not in SUBSETS:
            raise InvalidArgument(f"unknown subset {self.subset!r}")


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    regime: str = "pretrain"

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgument("epochs must be >= 0")
        if self.regime not in ("pretrain", "finetune"):
            raise InvalidArgument(f"unknown regime {self.regime!r}")


def read_sts_tsv(path: str, scale: float | None = None) -> list[StsPair]:
    """Read tab-separated pairs (header required).

    Gold scores are normalized into [0,1]: pass the source scale, or leave
    it None to infer 0-5 data from any score above 1.
    """
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle, delimiter="\t")
            header = next(reader, None)
            if header is None or tuple(header) != TSV_HEADER:
                raise CorpusIoError(f"{path!r}: expected header {TSV_HEADER}")
            rows = [row for row in reader if row]
    except OSError as exc:
        raise CorpusIoError(f"cannot read STS file {path!r}: {exc}") from exc
    scores = [float(row[2]) for row in rows]
    if scale is None:
        scale = 5.0 if any(s > 1.0 for s in scores) else 1.0
    return [
        StsPair(sentence_a=row[0], sentence_b=row[1], gold_score=score / scale,
                language=row[3], subset=row[4])
        for row, score in zip(rows, scores)
    ]


def write_sts_tsv(path: str, pairs: list[StsPair]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
            writer.writerow(TSV_HEADER)
            for pair in pairs:
                writer.writerow([pair.sentence_a, pair.sentence_b,
                                 f"{pair.gold_score:.6f}", pair.language, pair.subset])
    except OSError as exc:
        raise CorpusIoError(f"cannot write STS file {path!r}: {exc}") from exc


def _batch_encode(encoder: TinyTransformerEncoder, sentences: list[str],
                  registry: MweRegistry, tokenizer) -> torch.Tensor:
    """Mean-pooled final-layer vectors for a batch, padding excluded."""
    id_lists = [encode_with_mwes(s, registry, tokenizer) for s in sentences]
    if any(not ids for ids in id_lists):
        raise InvalidArgument("sentence tokenized to nothing")
    max_len = min(max(len(ids) for ids in id_lists), encoder.config.max_len)
    pad = encoder.config.pad_id
    batch_ids = torch.full((len(id_lists), max_len), pad, dtype=torch.long)
    mask = torch.zeros((len(id_lists), max_len))
    for i, ids in enumerate(id_lists):
        ids = ids[:max_len]
        batch_ids[i, :len(ids)] = torch.tensor(ids, dtype=torch.long)
        mask[i, :len(ids)] = 1.0
    hidden = encoder(batch_ids, attention_mask=mask)
    mask = mask.to(hidden.dtype)
    summed = (hidden * mask[:, :, None]).sum(dim=1)
    return summed / mask.sum(dim=1, keepdim=True)


def encode_sentence(encoder: TinyTransformerEncoder, sentence: str,
                    registry: MweRegistry, tokenizer) -> torch.Tensor:
    """Mean over final-layer token outputs for one sentence."""
    if not sentence or not sentence.strip():
        raise InvalidArgument("sentence must be non-empty")
    with torch.no_grad():
        return _batch_encode(encoder, [sentence], registry, tokenizer)[0]


def similarity(a: torch.Tensor, b: torch.Tensor) -> float:
    """Cosine of the angle between two vectors."""
    norm_a = float(torch.linalg.vector_norm(a))
    norm_b = float(torch.linalg.vector_norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVector("cosine undefined for the zero vector")
    value = float(torch.dot(a, b) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


def _pair_cosines(encoder, pairs, registry, tokenizer) -> torch.Tensor:
    left = _batch_encode(encoder, [p.sentence_a for p in pairs], registry, tokenizer)
    right = _batch_encode(encoder, [p.sentence_b for p in pairs], registry, tokenizer)
    return torch.nn.functional.cosine_similarity(left, right, dim=1)


def train_sts(encoder: TinyTransformerEncoder, pairs: list[StsPair],
              config: TrainConfig, registry: MweRegistry,
              tokenizer) -> TinyTransformerEncoder:
    """Minimize mean squared error between pair cosines and gold scores.

    Updates all encoder weights including injected rows; epochs=0 returns
    the encoder unchanged. Fixed seeds reproduce runs exactly.
    """
    if not pairs:
        raise InvalidArgument("pairs must be non-empty")
    if config.regime == "pretrain":
        offenders = sum(1 for p in pairs if p.subset == "idiom")
        if offenders:
            raise SettingViolation(
                f"{offenders} idiom-subset pairs in pretrain training data")
    if config.epochs == 0:
        return encoder
    for param in encoder.parameters():
        param.requires_grad_(True)
    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(encoder.parameters(), lr=config.learning_rate)
    encoder.train()
    for epoch in range(config.epochs):
        generator = torch.Generator().manual_seed(config.seed * 100003 + epoch)
        order = torch.randperm(len(pairs), generator=generator).tolist()
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[i] for i in order[start:start + config.batch_size]]
            gold = torch.tensor([p.gold_score for p in batch])
            optimizer.zero_grad()
            cosines = _pair_cosines(encoder, batch, registry, tokenizer)
            loss = torch.mean((cosines - gold.to(cosines.dtype)) ** 2)
            loss.backward()
            optimizer.step()
    encoder.eval()
    return encoder


def predict_scores(encoder: TinyTransformerEncoder, pairs: list[StsPair],
                   registry: MweRegistry, tokenizer) -> list[float]:
    """Cosine similarity per pair, order preserved."""
    if not pairs:
        return []
    scores: list[float] = []
    with torch.no_grad():
        for start in range(0, len(pairs), 64):
            chunk = pairs[start:start + 64]
            left = _batch_encode(encoder, [p.sentence_a for p in chunk],
                                 registry, tokenizer)
            right = _batch_encode(encoder, [p.sentence_b for p in chunk],
                                  registry, tokenizer)
            for a, b in zip(left, right):
                scores.append(similarity(a, b))
    return scores
