"""End-to-end orchestration: mine, sample, mimic, inject, train, evaluate.

Every stage writes its artifacts under the run's output directory and
records a content hash in manifest.json; re-running a stage with
unchanged inputs is a cache hit. Reports are byte-identical across
reruns with the same config and seed.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import torch

from . import mimic as mimic_ops
from .encoder import TinyTransformerEncoder
from .errors import InvalidArgument, MissingGrouping, PipelineStageError
from .evaluation import EvalReport, evaluate, per_idiom_analysis
from .extraction import (
    ContextSet,
    apply_curation,
    context_set_path,
    extract_contexts,
    gold_sample,
    sample_contexts,
)
from .injection import inject_embeddings
from .mimic import EmbeddingBundle, MimicModel, MimicOptimizerConfig, mimic_train
from .registry import MweRegistry
from .sts import TrainConfig, predict_scores, read_sts_tsv, train_sts
from .textmatch import find_word_bounded, fold_case, iter_corpus_lines
from .tokenizer import WordPieceTokenizer

DEFAULT_PRETRAIN_EPOCHS = {"en": 35, "pt": 45, "gl": 45}

# Shared stage caches (mined contexts, mimic model) default to the run's
# output directory; point this at a common location to share them across
# runs with identical inputs.
CACHE_DIR_ENV = "IDIOMBED_CACHE_DIR"


def cache_root(config: "PipelineConfig") -> str:
    return os.environ.get(CACHE_DIR_ENV) or config.output_dir


@dataclass
class PipelineConfig:
    language: str = "en"
    corpus_path: str = ""
    registry_path: str = ""
    encoder_path: str = ""
    tokenizer_path: str = ""
    sts_general_path: str = ""
    sts_idiom_path: str = ""
    sts_eval_path: str = ""
    output_dir: str = ""
    contexts_per_idiom: int = 150
    max_matches: int = 250
    mimic_schedule: tuple[int, int, int] = (3, 10, 3)
    pretrain_epochs: int | None = None
    finetune_epochs: int = 1
    seed: int = 0
    sts_learning_rate: float = 1e-3
    finetune_learning_rate: float | None = None
    sts_batch_size: int = 16
    mimic_learning_rate: float = 1e-3
    mimic_batch_size: int = 8
    mimic_train_words: int = 40
    mimic_contexts_per_word: int = 5
    mimic_min_frequency: int = 20
    mimic_skip_top: int = 6
    mimic_d_form: int = 32
    min_occurrences: int = 5
    gold_annotations_dir: str | None = None
    gold_n: int = 10

    def __post_init__(self):
        if self.contexts_per_idiom > self.max_matches:
            raise InvalidArgument("contexts_per_idiom must be <= max_matches")
        self.mimic_schedule = tuple(self.mimic_schedule)

    def resolved_pretrain_epochs(self) -> int:
        if self.pretrain_epochs is not None:
            return self.pretrain_epochs
        return DEFAULT_PRETRAIN_EPOCHS.get(self.language, 35)

    def require_paths(self, *names: str) -> None:
        for name in names:
            if not getattr(self, name):
                raise InvalidArgument(f"config field {name!r} must be set")

    @classmethod
    def from_json(cls, path: str, **overrides) -> "PipelineConfig":
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        payload.update(overrides)
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise InvalidArgument(f"unknown config fields: {sorted(unknown)}")
        base = os.path.dirname(os.path.abspath(path))
        config = cls(**payload)
        for name in ("corpus_path", "registry_path", "encoder_path",
                     "tokenizer_path", "sts_general_path", "sts_idiom_path",
                     "sts_eval_path", "output_dir", "gold_annotations_dir"):
            value = getattr(config, name)
            if value and not os.path.isabs(value):
                setattr(config, name, os.path.join(base, value))
        return config


def _hash_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def _hash_inputs(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:16]


class RunManifest:
    """Content-addressed record of stage outputs inside one output_dir."""

    def __init__(self, output_dir: str):
        self.path = os.path.join(output_dir, "manifest.json")
        self.stages: dict[str, dict] = {}
        if os.path.exists(self.path):
            with open(self.path, encoding="utf-8") as handle:
                self.stages = json.load(handle)

    def is_fresh(self, stage: str, key: str) -> bool:
        entry = self.stages.get(stage)
        return (entry is not None and entry["key"] == key
                and all(os.path.exists(p) for p in entry["outputs"]))

    def record(self, stage: str, key: str, outputs: list[str]) -> None:
        self.stages[stage] = {"key": key, "outputs": outputs}
        with open(self.path, "w", encoding="utf-8") as handle:
            json.dump(self.stages, handle, indent=2)


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineStageError:
                raise
            except Exception as exc:
                raise PipelineStageError(name, exc) from exc
        return run
    return wrap


@_stage("mine")
def stage_mine(config: PipelineConfig, registry: MweRegistry,
               manifest: RunManifest) -> dict[str, str]:
    """Extract raw context sets for every registered idiom."""
    out_dir = os.path.join(cache_root(config), "contexts")
    os.makedirs(out_dir, exist_ok=True)
    key = _hash_inputs({"corpus": _hash_file(config.corpus_path),
                        "registry": _hash_file(config.registry_path),
                        "max_matches": config.max_matches})
    paths = {entry.token_name: context_set_path(out_dir, entry.token_name)
             for entry in registry}
    if not manifest.is_fresh("mine", key):
        for entry in registry:
            contexts = extract_contexts(config.corpus_path, entry,
                                        config.max_matches)
            contexts.save(paths[entry.token_name])
        manifest.record("mine", key, sorted(paths.values()))
    return paths


@_stage("sample")
def stage_sample(config: PipelineConfig, mined: dict[str, str],
                 k: int | None = None) -> dict[str, ContextSet]:
    """Seeded subsample per idiom, optionally curated to gold contexts."""
    k = k if k is not None else config.contexts_per_idiom
    sampled: dict[str, ContextSet] = {}
    for token_name, path in mined.items():
        contexts = ContextSet.load(path, token_name)
        if config.gold_annotations_dir:
            annotation_path = os.path.join(config.gold_annotations_dir,
                                           f"{token_name}.jsonl")
            if os.path.exists(annotation_path):
                contexts = apply_curation(contexts, annotation_path)
                contexts = gold_sample(contexts, config.gold_n, config.seed)
        sampled[token_name] = sample_contexts(contexts, k, config.seed)
    return sampled


def select_training_words(corpus_path: str, tokenizer: WordPieceTokenizer,
                          max_words: int, min_frequency: int,
                          skip_top: int) -> list[str]:
    """Mimic-training words: frequent single-token words, minus the very
    top of the frequency table (stopword-like fillers)."""
    counts: Counter[str] = Counter()
    for _, line in iter_corpus_lines(corpus_path):
        counts.update(fold_case(line).split())
    ranked = [w for w, c in counts.most_common()
              if c >= min_frequency and len(tokenizer.tokenize(w)) == 1]
    return sorted(ranked[skip_top:skip_top + max_words])


def _word_contexts(corpus_path: str, words: list[str],
                   per_word: int) -> dict[str, ContextSet]:
    from .extraction import ContextRecord
    from .textmatch import source_name

    folded = {fold_case(w): w for w in words}
    sets = {w: ContextSet(mwe_token_name=w) for w in folded}
    source = source_name(corpus_path)
    for line_number, line in iter_corpus_lines(corpus_path):
        text = fold_case(line)
        for key, original in folded.items():
            records = sets[key].records
            if len(records) >= per_word:
                continue
            offset = find_word_bounded(text, key)
            if offset >= 0:
                records.append(ContextRecord(
                    mwe_token_name=key, text=line, source_file=source,
                    line_number=line_number, match_offset=offset))
    return sets


@_stage("mimic")
def stage_mimic(config: PipelineConfig, encoder: TinyTransformerEncoder,
                tokenizer: WordPieceTokenizer, registry: MweRegistry,
                manifest: RunManifest) -> MimicModel:
    """Train (or reload) the mimicking model on gold-word embeddings."""
    model_path = os.path.join(cache_root(config), "mimic_model.pt")
    key = _hash_inputs({
        "corpus": _hash_file(config.corpus_path),
        "encoder": _hash_file(config.encoder_path),
        "schedule": list(config.mimic_schedule),
        "seed": config.seed,
        "words": [config.mimic_train_words, config.mimic_contexts_per_word,
                  config.mimic_min_frequency, config.mimic_skip_top],
        "optim": [config.mimic_learning_rate, config.mimic_batch_size,
                  config.mimic_d_form],
    })
    if manifest.is_fresh("mimic", key):
        return MimicModel.load(model_path, encoder, tokenizer)
    words = select_training_words(config.corpus_path, tokenizer,
                                  config.mimic_train_words,
                                  config.mimic_min_frequency,
                                  config.mimic_skip_top)
    if not words:
        raise InvalidArgument("no mimic-training words survive the filters")
    context_sets = _word_contexts(config.corpus_path, words,
                                  config.mimic_contexts_per_word)
    surfaces = words + [entry.surface for entry in registry]
    torch.manual_seed(config.seed)  # form table init must not depend on history
    form = mimic_ops.FormEmbedder.build(surfaces, config.mimic_d_form,
                                        encoder.d_model)
    model = MimicModel(encoder, tokenizer, form,
                       schedule=config.mimic_schedule, seed=config.seed)
    training = []
    with torch.no_grad():
        for word in words:
            token_id = tokenizer.token_to_id(word)
            gold = encoder.token_embedding.weight[token_id].detach().clone()
            contexts = context_sets[fold_case(word)]
            if contexts.records:
                training.append((word, gold, contexts))
    mimic_train(model, training, schedule=config.mimic_schedule,
                optimizer_config=MimicOptimizerConfig(
                    learning_rate=config.mimic_learning_rate,
                    batch_size=config.mimic_batch_size),
                seed=config.seed)
    model.save(model_path)
    manifest.record("mimic", key, [model_path])
    return model


@_stage("embed")
def stage_embed(config: PipelineConfig, model: MimicModel,
                registry: MweRegistry,
                sampled: dict[str, ContextSet]) -> EmbeddingBundle:
    """Infer one embedding per idiom and persist the bundle."""
    embeddings = []
    created_from = "gold" if config.gold_annotations_dir else "auto"
    for entry in registry:
        contexts = sampled[entry.token_name]
        embeddings.append(mimic_ops.infer_embedding(
            entry, contexts, model, created_from=created_from))
    bundle = EmbeddingBundle(embeddings, model.fingerprint())
    bundle.save(os.path.join(config.output_dir, "bundle"))
    return bundle


@_stage("inject")
def stage_inject(config: PipelineConfig, encoder: TinyTransformerEncoder,
                 tokenizer: WordPieceTokenizer, registry: MweRegistry,
                 bundle: EmbeddingBundle):
    report = inject_embeddings(encoder, bundle, registry, tokenizer)
    with open(os.path.join(config.output_dir, "injection_report.json"), "w",
              encoding="utf-8") as handle:
        handle.write(report.to_json())
    return report


@_stage("train")
def stage_train(config: PipelineConfig, setting: str,
                encoder: TinyTransformerEncoder, registry: MweRegistry,
                tokenizer: WordPieceTokenizer,
                epochs: int | None = None) -> TinyTransformerEncoder:
    if setting == "pretrain":
        pairs = read_sts_tsv(config.sts_general_path)
        train_config = TrainConfig(
            epochs=epochs if epochs is not None else config.resolved_pretrain_epochs(),
            learning_rate=config.sts_learning_rate,
            batch_size=config.sts_batch_size,
            seed=config.seed, regime="pretrain")
    else:
        pairs = read_sts_tsv(config.sts_idiom_path)
        finetune_lr = (config.finetune_learning_rate
                       if config.finetune_learning_rate is not None
                       else config.sts_learning_rate)
        train_config = TrainConfig(
            epochs=epochs if epochs is not None else config.finetune_epochs,
            learning_rate=finetune_lr,
            batch_size=config.sts_batch_size,
            seed=config.seed, regime="finetune")
    return train_sts(encoder, pairs, train_config, registry, tokenizer)


def assign_idioms(pairs, registry: MweRegistry) -> dict[int, str]:
    """Map idiom-subset pair indices to the idiom they contain."""
    mapping: dict[int, str] = {}
    for i, pair in enumerate(pairs):
        if pair.subset != "idiom":
            continue
        text = fold_case(pair.sentence_a + " ␞ " + pair.sentence_b)
        for entry in registry:
            if any(find_word_bounded(text, pattern) >= 0
                   for pattern in entry.patterns()):
                mapping[i] = entry.token_name
                break
        else:
            raise MissingGrouping(
                f"idiom pair {i} contains no registered expression")
    return mapping


@_stage("evaluate")
def stage_evaluate(config: PipelineConfig, encoder: TinyTransformerEncoder,
                   registry: MweRegistry, tokenizer: WordPieceTokenizer,
                   report_name: str) -> EvalReport:
    pairs = read_sts_tsv(config.sts_eval_path)
    predictions = predict_scores(encoder, pairs, registry, tokenizer)
    report = evaluate(predictions, pairs)
    idiom_of = assign_idioms(pairs, registry)
    report.per_idiom = per_idiom_analysis(predictions, pairs, idiom_of,
                                          config.min_occurrences)
    path = os.path.join(config.output_dir, report_name)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(report.to_json())
        handle.write("\n")
    return report


def _load_parts(config: PipelineConfig):
    registry = MweRegistry.load(config.registry_path, config.language)
    tokenizer = WordPieceTokenizer.load(config.tokenizer_path)
    encoder = TinyTransformerEncoder.load(config.encoder_path)
    return registry, tokenizer, encoder


def pretrain_checkpoint_path(config: PipelineConfig) -> str:
    return os.path.join(config.output_dir, "checkpoints", "pretrain.pt")


def _sub_config(config: PipelineConfig, output_dir: str) -> PipelineConfig:
    payload = asdict(config)
    payload["output_dir"] = output_dir
    return PipelineConfig(**payload)


def _pipeline_head(config: PipelineConfig):
    """Stages shared by every sweep point: mine contexts, train mimic."""
    config.require_paths("corpus_path", "registry_path", "encoder_path",
                         "tokenizer_path", "output_dir")
    torch.set_num_threads(1)
    os.makedirs(config.output_dir, exist_ok=True)
    os.makedirs(cache_root(config), exist_ok=True)
    manifest = RunManifest(cache_root(config))
    registry, tokenizer, encoder = _load_parts(config)
    mined = stage_mine(config, registry, manifest)
    mimic_model = stage_mimic(config, encoder, tokenizer, registry, manifest)
    return mined, mimic_model


def _pretrain_tail(config: PipelineConfig, mined: dict[str, str],
                   mimic_model: MimicModel, k: int | None,
                   train_epochs: int | None,
                   report_name: str) -> EvalReport:
    """Per-run stages: sample, embed, inject, train, evaluate.

    Loads fresh model parts from disk so sweep points never see each
    other's injected vocabularies.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    registry, tokenizer, encoder = _load_parts(config)
    sampled = stage_sample(config, mined, k=k)
    bundle = stage_embed(config, mimic_model, registry, sampled)
    stage_inject(config, encoder, tokenizer, registry, bundle)
    encoder = stage_train(config, "pretrain", encoder, registry, tokenizer,
                          epochs=train_epochs)
    checkpoint_dir = os.path.join(config.output_dir, "checkpoints")
    os.makedirs(checkpoint_dir, exist_ok=True)
    encoder.save(pretrain_checkpoint_path(config))
    tokenizer.save(os.path.join(checkpoint_dir, "tokenizer.json"))
    return stage_evaluate(config, encoder, registry, tokenizer, report_name)


def _finetune_run(config: PipelineConfig, train_epochs: int | None,
                  report_name: str) -> EvalReport:
    config.require_paths("registry_path", "sts_idiom_path", "sts_eval_path",
                         "output_dir")
    torch.set_num_threads(1)
    checkpoint_dir = os.path.join(config.output_dir, "checkpoints")
    pretrain_path = pretrain_checkpoint_path(config)
    if not os.path.exists(pretrain_path):
        raise PipelineStageError(
            "train", FileNotFoundError(
                f"finetune requires a pretrain checkpoint at {pretrain_path}"))
    registry = MweRegistry.load(config.registry_path, config.language)
    encoder = TinyTransformerEncoder.load(pretrain_path)
    tokenizer = WordPieceTokenizer.load(
        os.path.join(checkpoint_dir, "tokenizer.json"))
    for entry in registry:
        entry.token_id = tokenizer.token_to_id(entry.token_name)
    encoder = stage_train(config, "finetune", encoder, registry, tokenizer,
                          epochs=train_epochs)
    encoder.save(os.path.join(checkpoint_dir, "finetune.pt"))
    return stage_evaluate(config, encoder, registry, tokenizer, report_name)


def run_pipeline(config: PipelineConfig, setting: str = "pretrain",
                 contexts_override: int | None = None,
                 train_epochs: int | None = None,
                 report_name: str | None = None) -> EvalReport:
    """Full run: mine, sample, mimic, embed, inject, train, evaluate."""
    if setting not in ("pretrain", "finetune"):
        raise InvalidArgument(f"unknown setting {setting!r}")
    if setting == "finetune":
        return _finetune_run(config, train_epochs,
                             report_name or "report_finetune.json")
    config.require_paths("sts_general_path", "sts_eval_path")
    mined, mimic_model = _pipeline_head(config)
    return _pretrain_tail(config, mined, mimic_model, contexts_override,
                          train_epochs, report_name or "report_pretrain.json")


def sweep_contexts(config: PipelineConfig, ks: list[int]) -> dict[int, EvalReport]:
    """Pipeline at several context counts, shared mined pool and mimic model."""
    if not ks:
        raise InvalidArgument("ks must be non-empty")
    if any(k < 1 for k in ks):
        raise InvalidArgument("every k must be >= 1")
    config.require_paths("sts_general_path", "sts_eval_path")
    mined, mimic_model = _pipeline_head(config)
    reports: dict[int, EvalReport] = {}
    base_out = config.output_dir
    for k in ks:
        sub = _sub_config(config, os.path.join(base_out, f"k{k:04d}"))
        try:
            reports[k] = _pretrain_tail(sub, mined, mimic_model, k, None,
                                        "report_pretrain.json")
        except PipelineStageError as exc:
            raise PipelineStageError(f"{exc.stage}[k={k}]", exc.cause) from exc
    _write_series(os.path.join(base_out, "sweep_contexts.tsv"),
                  "contexts", reports)
    return reports


def sweep_epochs(config: PipelineConfig, setting: str,
                 epoch_grid: list[int]) -> dict[int, EvalReport]:
    """Evaluate checkpoints trained for each epoch count in the grid.

    For the finetune setting the grid points all start from the pretrain
    checkpoint in the base output directory.
    """
    if not epoch_grid:
        raise InvalidArgument("epoch_grid must be non-empty")
    if setting not in ("pretrain", "finetune"):
        raise InvalidArgument(f"unknown setting {setting!r}")
    reports: dict[int, EvalReport] = {}
    base_out = config.output_dir
    if setting == "pretrain":
        config.require_paths("sts_general_path", "sts_eval_path")
        mined, mimic_model = _pipeline_head(config)
        for epochs in epoch_grid:
            sub = _sub_config(config, os.path.join(base_out, f"e{epochs:04d}"))
            reports[epochs] = _pretrain_tail(sub, mined, mimic_model, None,
                                             epochs, "report_pretrain.json")
    else:
        for epochs in epoch_grid:
            sub = _sub_config(config, os.path.join(base_out, f"e{epochs:04d}"))
            os.makedirs(os.path.join(sub.output_dir, "checkpoints"),
                        exist_ok=True)
            source_dir = os.path.join(base_out, "checkpoints")
            for name in ("pretrain.pt", "tokenizer.json"):
                src = os.path.join(source_dir, name)
                dst = os.path.join(sub.output_dir, "checkpoints", name)
                with open(src, "rb") as fin, open(dst, "wb") as fout:
                    fout.write(fin.read())
            reports[epochs] = _finetune_run(sub, epochs, "report_finetune.json")
    _write_series(os.path.join(base_out, f"sweep_epochs_{setting}.tsv"),
                  "epochs", reports)
    return reports


def _write_series(path: str, x_name: str, reports: dict[int, EvalReport]) -> None:
    """Plot-ready TSV series: one row per sweep point."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{x_name}\tsr_all\tsr_idiom\tsr_sts\n")
        for x in sorted(reports):
            report = reports[x]

            def fmt(v):
                return "-" if v is None else f"{v:.6f}"

            handle.write(f"{x}\t{fmt(report.sr_all)}\t{fmt(report.sr_idiom)}"
                         f"\t{fmt(report.sr_sts)}\n")
