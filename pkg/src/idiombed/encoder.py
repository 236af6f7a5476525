"""Small deterministic transformer encoder for desk-scale experiments.

Post-layer-norm architecture with learned positional embeddings and a
masked-token prediction head tied to the input embedding matrix. The
embedding matrix can grow in place, which is how learned idiom vectors
enter the vocabulary.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass
class EncoderConfig:
    vocab_size: int
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 64
    max_len: int = 128
    pad_id: int = 0


class SelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(d_model, d_model)
        self.value = nn.Linear(d_model, d_model)
        self.output = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor, attention_mask: torch.Tensor | None) -> torch.Tensor:
        batch, length, d_model = x.shape

        def split(t):
            return t.view(batch, length, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = q @ k.transpose(-2, -1) / self.d_head ** 0.5
        if attention_mask is not None:
            bias = (1.0 - attention_mask.to(x.dtype))[:, None, None, :] * -1e9
            scores = scores + bias
        weights = torch.softmax(scores, dim=-1)
        context = (weights @ v).transpose(1, 2).reshape(batch, length, d_model)
        return self.output(context)


class EncoderLayer(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.attention = SelfAttention(config.d_model, config.n_heads)
        self.ffn_in = nn.Linear(config.d_model, config.d_ff)
        self.ffn_out = nn.Linear(config.d_ff, config.d_model)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.activation = nn.GELU()

    def forward(self, x: torch.Tensor, attention_mask: torch.Tensor | None) -> torch.Tensor:
        x = self.norm1(x + self.attention(x, attention_mask))
        return self.norm2(x + self.ffn_out(self.activation(self.ffn_in(x))))


class TinyTransformerEncoder(nn.Module):
    def __init__(self, config: EncoderConfig, seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.d_model)
        self.position_embedding = nn.Embedding(config.max_len, config.d_model)
        self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.n_layers))
        self.mlm_bias = nn.Parameter(torch.zeros(config.vocab_size))

    @property
    def d_model(self) -> int:
        return self.config.d_model

    @property
    def vocab_size(self) -> int:
        return self.token_embedding.num_embeddings

    def forward(self, ids: torch.Tensor | None = None,
                attention_mask: torch.Tensor | None = None,
                inputs_embeds: torch.Tensor | None = None) -> torch.Tensor:
        """Final-layer hidden states, shape (batch, length, d_model).

        `inputs_embeds` replaces the token-embedding lookup (positional
        embeddings are still added), which is how a context's target
        position gets an externally supplied input vector.
        """
        if inputs_embeds is None:
            if ids is None:
                raise ValueError("either ids or inputs_embeds is required")
            inputs_embeds = self.token_embedding(ids)
        length = inputs_embeds.shape[1]
        if length > self.config.max_len:
            raise ValueError(f"sequence length {length} exceeds max_len")
        positions = torch.arange(length, device=inputs_embeds.device)
        x = inputs_embeds + self.position_embedding(positions)[None, :, :]
        for layer in self.layers:
            x = layer(x, attention_mask)
        return x

    def mlm_logits(self, hidden: torch.Tensor) -> torch.Tensor:
        """Tied masked-token head: hidden @ E^T + bias."""
        return hidden @ self.token_embedding.weight.t() + self.mlm_bias

    @torch.no_grad()
    def append_embedding_rows(self, rows: torch.Tensor) -> None:
        """Grow the vocabulary by appending `rows` to the embedding matrix.

        The tied prediction head grows with it (bias rows start at zero);
        all pre-existing rows are carried over bitwise.
        """
        if rows.ndim != 2 or rows.shape[1] != self.config.d_model:
            raise ValueError("rows must be (k, d_model)")
        old = self.token_embedding.weight
        merged = torch.cat([old.detach(), rows.to(old.dtype)], dim=0)
        new_embedding = nn.Embedding(merged.shape[0], self.config.d_model)
        new_embedding = new_embedding.to(dtype=old.dtype)
        new_embedding.weight.copy_(merged)
        new_embedding.weight.requires_grad_(old.requires_grad)
        self.token_embedding = new_embedding
        bias = torch.zeros(merged.shape[0], dtype=self.mlm_bias.dtype)
        bias[: old.shape[0]] = self.mlm_bias.detach()
        self.mlm_bias = nn.Parameter(bias, requires_grad=self.mlm_bias.requires_grad)
        self.config.vocab_size = merged.shape[0]

    def embedding_checksum(self, rows: int | None = None) -> str:
        """SHA-256 over the first `rows` embedding rows as float32 bytes."""
        weight = self.token_embedding.weight.detach()
        if rows is not None:
            weight = weight[:rows]
        data = weight.to(torch.float32).contiguous().numpy().tobytes()
        return hashlib.sha256(data).hexdigest()

    def parameter_fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in sorted(self.state_dict().items()):
            digest.update(name.encode("utf-8"))
            digest.update(tensor.detach().to(torch.float32).contiguous().numpy().tobytes())
        return digest.hexdigest()[:16]

    def save(self, path: str) -> None:
        torch.save({"config": asdict(self.config), "state": self.state_dict()}, path)

    @classmethod
    def load(cls, path: str) -> "TinyTransformerEncoder":
        payload = torch.load(path, weights_only=True)
        encoder = cls(EncoderConfig(**payload["config"]))
        encoder.load_state_dict(payload["state"])
        encoder.eval()
        return encoder
