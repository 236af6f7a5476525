"""Single-token idiom embeddings for sentence-similarity models."""

from .encoder import EncoderConfig, TinyTransformerEncoder
from .errors import IdiombedError
from .evaluation import EvalReport, evaluate, per_idiom_analysis, rarity_stats, spearman
from .extraction import (
    ContextRecord,
    ContextSet,
    apply_curation,
    emit_annotation_template,
    extract_contexts,
    gold_sample,
    sample_contexts,
)
from .injection import InjectionReport, inject_embeddings
from .mimic import (
    ContextScorer,
    EmbeddingBundle,
    FormEmbedder,
    MimicModel,
    MimicOptimizerConfig,
    TrainedEmbedding,
    context_embedding,
    form_embedding,
    fuse_contexts,
    infer_embedding,
    mimic_train,
)
from .pipeline import PipelineConfig, run_pipeline, sweep_contexts, sweep_epochs
from .registry import MweEntry, MweRegistry, encode_with_mwes, tokenize_with_mwes
from .sts import (
    StsPair,
    TrainConfig,
    encode_sentence,
    predict_scores,
    read_sts_tsv,
    similarity,
    train_sts,
    write_sts_tsv,
)
from .tokenizer import WordPieceTokenizer

__version__ = "0.1.0"

__all__ = [
    "ContextRecord",
    "ContextScorer",
    "ContextSet",
    "EmbeddingBundle",
    "EncoderConfig",
    "EvalReport",
    "FormEmbedder",
    "IdiombedError",
    "InjectionReport",
    "MimicModel",
    "MimicOptimizerConfig",
    "MweEntry",
    "MweRegistry",
    "PipelineConfig",
    "StsPair",
    "TinyTransformerEncoder",
    "TrainConfig",
    "TrainedEmbedding",
    "WordPieceTokenizer",
    "apply_curation",
    "context_embedding",
    "emit_annotation_template",
    "encode_sentence",
    "encode_with_mwes",
    "evaluate",
    "extract_contexts",
    "form_embedding",
    "fuse_contexts",
    "gold_sample",
    "infer_embedding",
    "inject_embeddings",
    "mimic_train",
    "per_idiom_analysis",
    "predict_scores",
    "rarity_stats",
    "read_sts_tsv",
    "run_pipeline",
    "sample_contexts",
    "similarity",
    "spearman",
    "sweep_contexts",
    "sweep_epochs",
    "tokenize_with_mwes",
    "train_sts",
    "write_sts_tsv",
]
