"""Few-shot idiom embedding induction by form+context mimicking.

A form path composes character n-gram vectors of the expression, a
context path reads the frozen encoder's output at the expression's
position, and a learned attention scorer fuses one vector per context
into the final embedding. Training mimics gold embeddings of common
words in three stages: context only, form only, then combined.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .encoder import TinyTransformerEncoder
from .errors import CorpusIoError, InvalidArgument, MatchLost, NotMimickable
from .extraction import ContextRecord, ContextSet
from .registry import MweEntry, MweRegistry, tokenize_with_mwes
from .textmatch import fold_case

DEFAULT_SCHEDULE = (3, 10, 3)


def surface_key(surface: str) -> str:
    """Join the words with "_" and add boundary markers before n-gram
    extraction, so n-grams can see word edges."""
    return "<" + "_".join(fold_case(surface).split()) + ">"


def char_ngrams(key: str, n_min: int, n_max: int) -> list[str]:
    out = []
    for n in range(n_min, n_max + 1):
        for i in range(len(key) - n + 1):
            out.append(key[i:i + n])
    return out


class FormEmbedder(nn.Module):
    """Projected mean of character n-gram vectors."""

    def __init__(self, ngram_vocab: list[str], d_form: int, d_model: int,
                 n_min: int = 3, n_max: int = 5):
        super().__init__()
        if n_min > n_max:
            raise InvalidArgument("n_min must be <= n_max")
        self.n_min = n_min
        self.n_max = n_max
        self.ngram_vocab = list(ngram_vocab)
        self._ngram_ids = {g: i for i, g in enumerate(self.ngram_vocab)}
        self.table = nn.Embedding(max(len(self.ngram_vocab), 1), d_form)
        self.projection = nn.Linear(d_form, d_model, bias=False)

    @classmethod
    def build(cls, surfaces, d_form: int, d_model: int,
              n_min: int = 3, n_max: int = 5) -> "FormEmbedder":
        vocab: set[str] = set()
        for surface in surfaces:
            vocab.update(char_ngrams(surface_key(surface), n_min, n_max))
        return cls(sorted(vocab), d_form, d_model, n_min, n_max)

    def forward(self, surface: str) -> torch.Tensor:
        if not surface or not surface.strip():
            raise InvalidArgument("surface must be non-empty")
        ids = [self._ngram_ids[g]
               for g in char_ngrams(surface_key(surface), self.n_min, self.n_max)
               if g in self._ngram_ids]
        if not ids:
            weight = self.projection.weight
            return torch.zeros(weight.shape[0], dtype=weight.dtype,
                               device=weight.device)
        rows = self.table(torch.tensor(ids, dtype=torch.long))
        return self.projection(rows.mean(dim=0))


class ContextScorer(nn.Module):
    """Scalar relevance score for one context embedding."""

    def __init__(self, d_model: int):
        super().__init__()
        self.score = nn.Linear(d_model, 1)

    def forward(self, vectors: torch.Tensor) -> torch.Tensor:
        return self.score(vectors).squeeze(-1)


class MimicModel(nn.Module):
    """Form embedder + context scorer + learned placeholder input vector.

    The encoder and tokenizer are held by reference outside the module
    graph: mimic training never updates them and checkpoints stay small.
    """

    def __init__(self, encoder: TinyTransformerEncoder, tokenizer,
                 form: FormEmbedder, schedule: tuple[int, int, int] = DEFAULT_SCHEDULE,
                 seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.form = form
        self.scorer = ContextScorer(encoder.d_model)
        self.mask_input = nn.Parameter(torch.randn(encoder.d_model) * 0.02)
        self.stage_schedule = tuple(schedule)
        self.training_log: dict = {}
        self.__dict__["encoder"] = encoder
        self.__dict__["tokenizer"] = tokenizer
        for param in encoder.parameters():
            param.requires_grad_(False)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in sorted(self.state_dict().items()):
            digest.update(name.encode("utf-8"))
            digest.update(tensor.detach().to(torch.float32).contiguous().numpy().tobytes())
        digest.update(self.encoder.parameter_fingerprint().encode("utf-8"))
        return digest.hexdigest()[:16]

    def save(self, path: str) -> None:
        torch.save({
            "ngram_vocab": self.form.ngram_vocab,
            "n_min": self.form.n_min,
            "n_max": self.form.n_max,
            "d_form": self.form.table.embedding_dim,
            "d_model": self.encoder.d_model,
            "schedule": list(self.stage_schedule),
            "state": self.state_dict(),
        }, path)

    @classmethod
    def load(cls, path: str, encoder: TinyTransformerEncoder, tokenizer) -> "MimicModel":
        payload = torch.load(path, weights_only=True)
        form = FormEmbedder(payload["ngram_vocab"], payload["d_form"],
                            payload["d_model"], payload["n_min"], payload["n_max"])
        model = cls(encoder, tokenizer, form, tuple(payload["schedule"]))
        model.load_state_dict(payload["state"])
        return model


def form_embedding(surface: str, form: FormEmbedder) -> torch.Tensor:
    return form(surface)


def _locate_target(record: ContextRecord, target, model: MimicModel) -> tuple[list[int], int]:
    """Token ids for the context plus the target's token position.

    For an MWE the matched span becomes a single placeholder position; for
    a single mimic-training word the word's own token is the target.
    """
    tokenizer = model.tokenizer
    if isinstance(target, MweEntry):
        registry = MweRegistry(language=target.language)
        probe = registry.register(target.surface, target.language, target.variants)
        tokens = tokenize_with_mwes(record.text, registry, tokenizer)
        try:
            position = tokens.index(probe.token_name)
        except ValueError:
            raise MatchLost(f"{target.surface!r} not found in context") from None
        ids = []
        for i, token in enumerate(tokens):
            if i == position:
                ids.append(tokenizer.mask_id)
            else:
                ids.extend(tokenizer.convert_tokens_to_ids([token]))
        return ids, position
    word = fold_case(target)
    tokens = tokenizer.tokenize(record.text)
    try:
        position = tokens.index(word)
    except ValueError:
        raise MatchLost(f"{target!r} not found in context") from None
    return tokenizer.convert_tokens_to_ids(tokens), position


def context_embedding(record: ContextRecord, target, model: MimicModel,
                      input_vector: torch.Tensor) -> torch.Tensor:
    """Encoder output at the target position, with the target's input
    embedding replaced by `input_vector`.

    Sequences longer than the encoder's max length are truncated to a
    window centered on the target so the occurrence always survives.
    """
    encoder = model.encoder
    ids, position = _locate_target(record, target, model)
    max_len = encoder.config.max_len
    if len(ids) > max_len:
        start = min(max(position - max_len // 2, 0), len(ids) - max_len)
        ids = ids[start:start + max_len]
        position -= start
    id_tensor = torch.tensor([ids], dtype=torch.long)
    embeds = encoder.token_embedding(id_tensor)
    embeds = embeds.clone()
    embeds[0, position] = input_vector
    hidden = encoder(inputs_embeds=embeds)
    return hidden[0, position]


def fuse_contexts(vectors, scorer: ContextScorer) -> tuple[torch.Tensor, torch.Tensor]:
    """Softmax-weighted sum of the per-context vectors."""
    if isinstance(vectors, (list, tuple)):
        if not vectors:
            raise InvalidArgument("need at least one context vector")
        stacked = torch.stack(list(vectors))
    else:
        stacked = vectors
        if stacked.ndim != 2 or stacked.shape[0] == 0:
            raise InvalidArgument("need a non-empty (n, d_model) stack")
    weights = torch.softmax(scorer(stacked), dim=0)
    fused = weights @ stacked
    return weights, fused


@dataclass
class MimicOptimizerConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8


def _word_loss(model: MimicModel, word: str, gold: torch.Tensor,
               contexts: ContextSet, stage: str) -> torch.Tensor:
    if stage == "form":
        predicted = model.form(word)
    else:
        input_vector = model.mask_input if stage == "context" else model.form(word)
        vectors = [context_embedding(rec, word, model, input_vector)
                   for rec in contexts.records]
        _, predicted = fuse_contexts(vectors, model.scorer)
    return torch.mean((predicted - gold) ** 2)


def _stage_loss(model: MimicModel, samples, stage: str) -> float:
    with torch.no_grad():
        losses = [_word_loss(model, w, g, c, stage) for w, g, c in samples]
    return float(torch.stack(losses).mean())


def mimic_train(model: MimicModel, training_words,
                schedule: tuple[int, int, int] | None = None,
                optimizer_config: MimicOptimizerConfig | None = None,
                seed: int = 0) -> MimicModel:
    """Three-stage mimicking of gold embeddings for common words.

    Stage 1 trains the scorer and placeholder input on contexts alone,
    stage 2 trains the n-gram table and projection on form alone, stage 3
    trains everything with the form embedding feeding the context path.
    The encoder is frozen throughout; identical seeds give identical runs.
    """
    if not training_words:
        raise InvalidArgument("training_words must be non-empty")
    schedule = tuple(schedule if schedule is not None else model.stage_schedule)
    config = optimizer_config or MimicOptimizerConfig()
    tokenizer = model.tokenizer
    samples = []
    for word, gold_vector, contexts in training_words:
        tokens = tokenizer.tokenize(word)
        if len(tokens) != 1 or tokenizer.token_to_id(tokens[0]) is None:
            raise NotMimickable(f"{word!r} is not a single encoder token")
        if not contexts.records:
            raise InvalidArgument(f"{word!r} has no contexts")
        gold = torch.as_tensor(np.asarray(gold_vector),
                               dtype=model.mask_input.dtype).detach()
        samples.append((fold_case(word), gold, contexts))

    torch.manual_seed(seed)
    rng = random.Random(seed)
    stages = (
        ("context", schedule[0], [*model.scorer.parameters(), model.mask_input]),
        ("form", schedule[1], list(model.form.parameters())),
        ("combined", schedule[2], list(model.parameters())),
    )
    log: dict = {"stages": {}}
    for stage, epochs, params in stages:
        log["stages"][stage] = []
        if stage == "combined":
            log["combined_initial"] = _stage_loss(model, samples, stage)
        if epochs == 0:
            continue
        optimizer = torch.optim.Adam(params, lr=config.learning_rate)
        for _ in range(epochs):
            order = list(range(len(samples)))
            rng.shuffle(order)
            epoch_losses = []
            for chunk_start in range(0, len(order), config.batch_size):
                chunk = order[chunk_start:chunk_start + config.batch_size]
                optimizer.zero_grad()
                loss = torch.stack([
                    _word_loss(model, *samples[i], stage) for i in chunk
                ]).mean()
                loss.backward()
                optimizer.step()
                epoch_losses.append(float(loss.detach()))
            log["stages"][stage].append(sum(epoch_losses) / len(epoch_losses))
    log["combined_final"] = _stage_loss(model, samples, "combined")
    model.training_log = log
    return model


@dataclass
class TrainedEmbedding:
    mwe_token_name: str
    vector: np.ndarray
    num_contexts: int
    model_fingerprint: str
    created_from: str = "auto"


def infer_embedding(entry: MweEntry, contexts: ContextSet, model: MimicModel,
                    created_from: str = "auto") -> TrainedEmbedding:
    """Fused form+context embedding for one registered MWE."""
    if not contexts.records:
        raise InvalidArgument("contexts must be non-empty (minimum is 1 example)")
    with torch.no_grad():
        input_vector = model.form(entry.surface)
        vectors = [context_embedding(rec, entry, model, input_vector)
                   for rec in contexts.records]
        _, fused = fuse_contexts(vectors, model.scorer)
    return TrainedEmbedding(
        mwe_token_name=entry.token_name,
        vector=fused.to(torch.float32).numpy().copy(),
        num_contexts=len(contexts.records),
        model_fingerprint=model.fingerprint(),
        created_from=created_from,
    )


class EmbeddingBundle:
    """Versioned on-disk collection of trained embeddings, keyed by MWE.

    Directory layout: manifest.json plus vectors.f32 holding row-major
    little-endian float32 rows in manifest order.
    """

    MANIFEST = "manifest.json"
    VECTORS = "vectors.f32"

    def __init__(self, entries: list[TrainedEmbedding], model_fingerprint: str):
        if not entries:
            raise InvalidArgument("bundle needs at least one embedding")
        dims = {e.vector.shape for e in entries}
        if len(dims) != 1:
            raise InvalidArgument(f"mixed vector shapes: {dims}")
        self.entries = list(entries)
        self.model_fingerprint = model_fingerprint

    @property
    def dimension(self) -> int:
        return int(self.entries[0].vector.shape[0])

    def __len__(self) -> int:
        return len(self.entries)

    def matrix(self) -> np.ndarray:
        return np.stack([e.vector.astype(np.float32) for e in self.entries])

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        manifest = {
            "model_fingerprint": self.model_fingerprint,
            "dimension": self.dimension,
            "entries": [
                {"token_name": e.mwe_token_name,
                 "num_contexts": e.num_contexts,
                 "created_from": e.created_from}
                for e in self.entries
            ],
        }
        try:
            with open(os.path.join(directory, self.MANIFEST), "w",
                      encoding="utf-8") as handle:
                json.dump(manifest, handle, ensure_ascii=False, indent=2)
            data = self.matrix().astype("<f4").tobytes()
            with open(os.path.join(directory, self.VECTORS), "wb") as handle:
                handle.write(data)
        except OSError as exc:
            raise CorpusIoError(f"cannot write bundle {directory!r}: {exc}") from exc

    @classmethod
    def load(cls, directory: str) -> "EmbeddingBundle":
        try:
            with open(os.path.join(directory, cls.MANIFEST), encoding="utf-8") as handle:
                manifest = json.load(handle)
            raw = np.fromfile(os.path.join(directory, cls.VECTORS), dtype="<f4")
        except OSError as exc:
            raise CorpusIoError(f"cannot read bundle {directory!r}: {exc}") from exc
        dim = manifest["dimension"]
        rows = raw.reshape(-1, dim)
        if rows.shape[0] != len(manifest["entries"]):
            raise CorpusIoError("vector file row count disagrees with manifest")
        entries = [
            TrainedEmbedding(
                mwe_token_name=row["token_name"],
                vector=rows[i].copy(),
                num_contexts=row["num_contexts"],
                model_fingerprint=manifest["model_fingerprint"],
                created_from=row["created_from"],
            )
            for i, row in enumerate(manifest["entries"])
        ]
        return cls(entries, manifest["model_fingerprint"])
