"""Synthetic desk-scale world for end-to-end runs.

Builds a corpus whose sentences are drawn from overlapping topic
clusters arranged on a ring, plus a handful of two-word idioms whose
contexts reveal a known single-word meaning while their constituent
words live in unrelated clusters. A tiny encoder is pretrained on the
corpus by masked-token prediction, giving every common word a gold
embedding worth mimicking. All outputs are deterministic in the seed.
"""

from __future__ import annotations

import itertools
import json
import os
import random
from dataclasses import asdict, dataclass, field

import torch

from .encoder import EncoderConfig, TinyTransformerEncoder
from .registry import MweRegistry
from .sts import StsPair, write_sts_tsv
from .tokenizer import WordPieceTokenizer

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _word_inventory(count: int, rng: random.Random) -> list[str]:
    syllables = [c + v for c, v in itertools.product(_CONSONANTS, _VOWELS)]
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        word = "".join(rng.choice(syllables) for _ in range(rng.choice((2, 3))))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


@dataclass
class HarnessConfig:
    seed: int = 0
    n_clusters: int = 12
    words_per_cluster: int = 14
    cluster_stride: int = 10
    n_fillers: int = 6
    filler_rate: float = 0.15
    n_idioms: int = 10
    n_sentences: int = 2000
    min_sentence_words: int = 6
    max_sentence_words: int = 11
    idiom_sentences_each: int = 30
    # Fraction of idiom occurrences whose surrounding line is off-topic
    # (drawn from a random cluster). Few-shot estimates then hinge on how
    # many contexts are averaged, which is the effect under study.
    idiom_context_noise: float = 0.4
    general_train_pairs: int = 240
    idiom_train_pairs_each: int = 8
    dev_general_pairs: int = 240
    dev_idiom_pairs_each: int = 10
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 64
    max_len: int = 64
    mlm_epochs: int = 40
    mlm_learning_rate: float = 3e-3
    mlm_batch_size: int = 64
    mask_prob: float = 0.15


@dataclass
class SynthIdiom:
    surface: str
    meaning_word: str
    meaning_cluster: int
    constituent_clusters: tuple[int, int]


@dataclass
class SynthWorld:
    config: HarnessConfig
    clusters: list[list[str]]
    fillers: list[str]
    idioms: list[SynthIdiom]
    corpus_lines: list[str]
    general_train: list[StsPair] = field(default_factory=list)
    idiom_train: list[StsPair] = field(default_factory=list)
    dev_pairs: list[StsPair] = field(default_factory=list)

    def registry(self) -> MweRegistry:
        registry = MweRegistry(language="en")
        for idiom in self.idioms:
            registry.register(idiom.surface, "en", [])
        return registry


def _ring_distance(a: int, b: int, n: int) -> int:
    d = abs(a - b) % n
    return min(d, n - d)


# Gold similarity for a pair of cluster-topic sentences, by ring distance.
_DISTANCE_GOLD = {0: 0.9, 1: 0.5, 2: 0.2}
_FAR_GOLD = 0.05


def _cluster_gold(a: int, b: int, n: int) -> float:
    return _DISTANCE_GOLD.get(_ring_distance(a, b, n), _FAR_GOLD)


class _SentenceFactory:
    def __init__(self, world_words: list[list[str]], fillers: list[str],
                 filler_rate: float, min_words: int, max_words: int,
                 rng: random.Random):
        self.cluster_words = world_words
        self.fillers = fillers
        self.filler_rate = filler_rate
        self.min_words = min_words
        self.max_words = max_words
        self.rng = rng

    def sentence(self, cluster: int, exclude: set[str] | None = None) -> str:
        length = self.rng.randint(self.min_words, self.max_words)
        pool = self.cluster_words[cluster]
        if exclude:
            pool = [w for w in pool if w not in exclude]
        words = []
        for _ in range(length):
            if self.rng.random() < self.filler_rate:
                words.append(self.rng.choice(self.fillers))
            else:
                words.append(self.rng.choice(pool))
        return " ".join(words)

    def sentence_with(self, cluster: int, inserted: str,
                      exclude: set[str] | None = None) -> str:
        words = self.sentence(cluster, exclude).split()
        pos = self.rng.randint(0, len(words))
        return " ".join(words[:pos] + inserted.split() + words[pos:])

    def neutral_frame(self, inserted: str) -> str:
        """Filler-only sentence around `inserted`: the insertion is the
        only topical signal, so rankings hinge on its embedding."""
        length = self.rng.randint(3, 5)
        words = [self.rng.choice(self.fillers) for _ in range(length)]
        pos = self.rng.randint(0, length)
        return " ".join(words[:pos] + inserted.split() + words[pos:])


def build_world(config: HarnessConfig) -> SynthWorld:
    """Generate the corpus, idioms and STS datasets (no training yet)."""
    rng = random.Random(config.seed)
    if config.words_per_cluster >= 2 * config.cluster_stride:
        raise ValueError("clusters overlap completely; lower words_per_cluster")
    ring_size = config.n_clusters * config.cluster_stride
    ring = _word_inventory(ring_size + config.n_fillers, rng)
    fillers = ring[ring_size:]
    ring = ring[:ring_size]
    clusters = []
    for k in range(config.n_clusters):
        start = k * config.cluster_stride
        clusters.append([ring[(start + i) % ring_size]
                         for i in range(config.words_per_cluster)])

    # Idiom constituents live in clusters far from each other and from the
    # meaning cluster, so the bigram never occurs naturally and contexts
    # are dominated by the meaning topic.
    idioms: list[SynthIdiom] = []
    used: set[str] = set()
    meaning_cluster_cycle = rng.sample(range(config.n_clusters), config.n_clusters)
    attempt = 0
    while len(idioms) < config.n_idioms:
        meaning_cluster = meaning_cluster_cycle[len(idioms) % config.n_clusters]
        cluster_a = rng.randrange(config.n_clusters)
        cluster_b = rng.randrange(config.n_clusters)
        attempt += 1
        if attempt > 10000:
            raise RuntimeError("could not place idioms; relax the config")
        if _ring_distance(cluster_a, cluster_b, config.n_clusters) < 3:
            continue
        if min(_ring_distance(cluster_a, meaning_cluster, config.n_clusters),
               _ring_distance(cluster_b, meaning_cluster, config.n_clusters)) < 3:
            continue
        # Core words only (no overlap region) keep constituents out of
        # neighboring clusters' sentences.
        core = slice(config.words_per_cluster - config.cluster_stride,
                     config.cluster_stride)
        word_a = rng.choice(clusters[cluster_a][core])
        word_b = rng.choice(clusters[cluster_b][core])
        meaning_word = rng.choice(clusters[meaning_cluster][core])
        if {word_a, word_b, meaning_word} & used or word_a == word_b:
            continue
        if meaning_word in (word_a, word_b):
            continue
        used.update((word_a, word_b, meaning_word))
        idioms.append(SynthIdiom(
            surface=f"{word_a} {word_b}",
            meaning_word=meaning_word,
            meaning_cluster=meaning_cluster,
            constituent_clusters=(cluster_a, cluster_b),
        ))

    factory = _SentenceFactory(clusters, fillers, config.filler_rate,
                               config.min_sentence_words,
                               config.max_sentence_words, rng)

    lines: list[str] = []
    for idiom in idioms:
        exclude = set(idiom.surface.split())
        for _ in range(config.idiom_sentences_each):
            if rng.random() < config.idiom_context_noise:
                cluster = rng.randrange(config.n_clusters)
            else:
                cluster = idiom.meaning_cluster
            lines.append(factory.sentence_with(cluster, idiom.surface, exclude))
    while len(lines) < config.n_sentences:
        lines.append(factory.sentence(rng.randrange(config.n_clusters)))
    rng.shuffle(lines)

    world = SynthWorld(config=config, clusters=clusters, fillers=fillers,
                       idioms=idioms, corpus_lines=lines)
    _build_sts_data(world, factory, rng)
    return world


def _build_sts_data(world: SynthWorld, factory: _SentenceFactory,
                    rng: random.Random) -> None:
    config = world.config
    n = config.n_clusters

    def general_pairs(count: int) -> list[StsPair]:
        pairs = []
        distances = [0, 1, 2, 3]
        for i in range(count):
            dist = distances[i % len(distances)]
            a = rng.randrange(n)
            b = (a + dist) % n if rng.random() < 0.5 else (a - dist) % n
            pairs.append(StsPair(
                sentence_a=factory.sentence(a),
                sentence_b=factory.sentence(b),
                gold_score=_cluster_gold(a, b, n),
                language="en",
                subset="general",
            ))
        return pairs

    def idiom_pairs(idiom: SynthIdiom, count: int, kinds: list[str]) -> list[StsPair]:
        exclude = set(idiom.surface.split()) | {idiom.meaning_word}
        pairs = []
        for i in range(count):
            kind = kinds[i % len(kinds)]
            base = factory.neutral_frame(idiom.surface)
            if kind == "paraphrase":
                other = factory.neutral_frame(idiom.meaning_word)
                gold = 0.95
            elif kind == "same_topic":
                other = factory.sentence(idiom.meaning_cluster, exclude)
                gold = 0.6
            elif kind in ("literal_a", "literal_b"):
                constituent = idiom.surface.split()[0 if kind == "literal_a" else 1]
                other = factory.neutral_frame(constituent)
                gold = 0.1
            elif kind == "cross_idiom":
                others = [x for x in world.idioms if x is not idiom]
                other = factory.neutral_frame(rng.choice(others).surface)
                gold = 0.05
            else:
                far = (idiom.meaning_cluster + n // 2) % n
                other = factory.sentence(far)
                gold = 0.05
            pairs.append(StsPair(sentence_a=base, sentence_b=other,
                                 gold_score=gold, language="en", subset="idiom"))
        return pairs

    dev_kinds = ["paraphrase", "same_topic", "literal_a", "literal_b", "far"]
    train_kinds = ["paraphrase", "same_topic", "literal_a", "literal_b",
                   "cross_idiom"]
    world.general_train = general_pairs(config.general_train_pairs)
    world.idiom_train = [
        pair for idiom in world.idioms
        for pair in idiom_pairs(idiom, config.idiom_train_pairs_each, train_kinds)
    ]
    dev = general_pairs(config.dev_general_pairs)
    for idiom in world.idioms:
        dev.extend(idiom_pairs(idiom, config.dev_idiom_pairs_each, dev_kinds))
    world.dev_pairs = dev


def pretrain_mlm(encoder: TinyTransformerEncoder, tokenizer: WordPieceTokenizer,
                 lines: list[str], epochs: int, learning_rate: float = 3e-3,
                 batch_size: int = 64, mask_prob: float = 0.15,
                 seed: int = 0) -> list[float]:
    """Masked-token pretraining; returns the per-epoch mean loss."""
    encoded = [tokenizer.encode(line)[:encoder.config.max_len] for line in lines]
    encoded = [ids for ids in encoded if len(ids) >= 2]
    pad = tokenizer.pad_id
    mask_id = tokenizer.mask_id
    optimizer = torch.optim.Adam(encoder.parameters(), lr=learning_rate)
    losses: list[float] = []
    encoder.train()
    for epoch in range(epochs):
        generator = torch.Generator().manual_seed(seed * 7919 + epoch)
        order = torch.randperm(len(encoded), generator=generator).tolist()
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(order), batch_size):
            chunk = [encoded[i] for i in order[start:start + batch_size]]
            width = max(len(ids) for ids in chunk)
            ids = torch.full((len(chunk), width), pad, dtype=torch.long)
            attn = torch.zeros((len(chunk), width))
            for row, seq in enumerate(chunk):
                ids[row, :len(seq)] = torch.tensor(seq, dtype=torch.long)
                attn[row, :len(seq)] = 1.0
            scores = torch.rand(ids.shape, generator=generator)
            masked = (scores < mask_prob) & (attn > 0)
            for row in range(len(chunk)):
                if not masked[row].any():
                    real = attn[row] > 0
                    pick = torch.where(real, scores[row],
                                       torch.full_like(scores[row], 2.0)).argmin()
                    masked[row, pick] = True
            inputs = ids.clone()
            inputs[masked] = mask_id
            optimizer.zero_grad()
            hidden = encoder(inputs, attention_mask=attn)
            logits = encoder.mlm_logits(hidden)
            loss = torch.nn.functional.cross_entropy(
                logits[masked], ids[masked])
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            batches += 1
        losses.append(epoch_loss / max(batches, 1))
    encoder.eval()
    return losses


def build_workspace(config: HarnessConfig, out_dir: str) -> dict:
    """Materialize a full synthetic workspace on disk.

    Writes corpus.txt, registry.json, tokenizer.json, encoder.pt, the three
    STS files and world.json; returns the world metadata dictionary.
    """
    torch.set_num_threads(1)
    world = build_world(config)
    os.makedirs(out_dir, exist_ok=True)

    corpus_path = os.path.join(out_dir, "corpus.txt")
    with open(corpus_path, "w", encoding="utf-8") as handle:
        for line in world.corpus_lines:
            handle.write(line + "\n")

    registry = world.registry()
    registry.save(os.path.join(out_dir, "registry.json"))

    tokenizer = WordPieceTokenizer.build(world.corpus_lines)
    tokenizer.save(os.path.join(out_dir, "tokenizer.json"))

    encoder = TinyTransformerEncoder(
        EncoderConfig(vocab_size=tokenizer.vocab_size, d_model=config.d_model,
                      n_layers=config.n_layers, n_heads=config.n_heads,
                      d_ff=config.d_ff, max_len=config.max_len,
                      pad_id=tokenizer.pad_id),
        seed=config.seed,
    )
    mlm_losses = pretrain_mlm(encoder, tokenizer, world.corpus_lines,
                              epochs=config.mlm_epochs,
                              learning_rate=config.mlm_learning_rate,
                              batch_size=config.mlm_batch_size,
                              mask_prob=config.mask_prob, seed=config.seed)
    encoder.save(os.path.join(out_dir, "encoder.pt"))

    write_sts_tsv(os.path.join(out_dir, "sts_general_train.tsv"),
                  world.general_train)
    write_sts_tsv(os.path.join(out_dir, "sts_idiom_train.tsv"), world.idiom_train)
    write_sts_tsv(os.path.join(out_dir, "sts_dev.tsv"), world.dev_pairs)

    meta = {
        "config": asdict(config),
        "idioms": [asdict(idiom) for idiom in world.idioms],
        "fillers": world.fillers,
        "mlm_final_loss": mlm_losses[-1] if mlm_losses else None,
        "files": {
            "corpus": "corpus.txt",
            "registry": "registry.json",
            "tokenizer": "tokenizer.json",
            "encoder": "encoder.pt",
            "sts_general_train": "sts_general_train.tsv",
            "sts_idiom_train": "sts_idiom_train.tsv",
            "sts_dev": "sts_dev.tsv",
        },
    }
    with open(os.path.join(out_dir, "world.json"), "w", encoding="utf-8") as handle:
        json.dump(meta, handle, ensure_ascii=False, indent=2)
    return meta
