"""Command-line interface for the idiom-embedding pipeline."""

from __future__ import annotations

import json
import os
import sys

import click

from .encoder import TinyTransformerEncoder
from .errors import IdiombedError
from .evaluation import rarity_stats
from .extraction import (
    ContextSet,
    apply_curation,
    context_set_path,
    emit_annotation_template,
    extract_contexts,
    gold_sample,
    sample_contexts,
)
from .harness import HarnessConfig, build_workspace
from .mimic import EmbeddingBundle, MimicModel
from .pipeline import (
    PipelineConfig,
    run_pipeline,
    stage_mimic,
    sweep_contexts,
    sweep_epochs,
)
from .registry import MweRegistry
from .tokenizer import WordPieceTokenizer


@click.group()
def main():
    """Single-token idiom embeddings for sentence-similarity models."""


def _load_config(path: str, **overrides) -> PipelineConfig:
    return PipelineConfig.from_json(path, **{k: v for k, v in overrides.items()
                                             if v is not None})


def _fail(stage: str, error: Exception):
    click.echo(f"error [{stage}]: {error}", err=True)
    sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--max-matches", type=int, default=None)
def mine(config_path, max_matches):
    """Extract context sets for every registered idiom."""
    config = _load_config(config_path, max_matches=max_matches)
    registry = MweRegistry.load(config.registry_path, config.language)
    out_dir = os.path.join(config.output_dir, "contexts")
    os.makedirs(out_dir, exist_ok=True)
    try:
        for entry in registry:
            contexts = extract_contexts(config.corpus_path, entry,
                                        config.max_matches)
            path = context_set_path(out_dir, entry.token_name)
            contexts.save(path)
            note = "  (no matches)" if contexts.warned_empty else ""
            click.echo(f"{entry.token_name}: {len(contexts)} contexts -> {path}{note}")
    except IdiombedError as exc:
        _fail("mine", exc)


@main.command()
@click.argument("context_file", type=click.Path(exists=True))
@click.option("-k", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def sample(context_file, k, seed, out):
    """Seeded subsample of one context set."""
    try:
        contexts = ContextSet.load(context_file)
        sample_contexts(contexts, k, seed).save(out)
        click.echo(f"wrote {out}")
    except IdiombedError as exc:
        _fail("sample", exc)


@main.command()
@click.argument("context_file", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def annotate(context_file, out):
    """Emit an editable annotation template for manual curation."""
    try:
        emit_annotation_template(ContextSet.load(context_file), out)
        click.echo(f"wrote {out}")
    except IdiombedError as exc:
        _fail("annotate", exc)


@main.command()
@click.argument("context_file", type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--gold-n", type=int, default=None,
              help="Also draw a gold sample of this size after curation.")
@click.option("--seed", type=int, default=0)
def curate(context_file, annotations, out, gold_n, seed):
    """Apply curation labels; optionally select the gold sample."""
    try:
        contexts = apply_curation(ContextSet.load(context_file), annotations)
        if gold_n is not None:
            contexts = gold_sample(contexts, gold_n, seed)
        contexts.save(out)
        click.echo(f"kept {len(contexts)} records -> {out}")
    except IdiombedError as exc:
        _fail("curate", exc)


@main.command("mimic-train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def mimic_train_cmd(config_path):
    """Train the mimicking model on gold-word embeddings."""
    from .pipeline import RunManifest, cache_root

    config = _load_config(config_path)
    try:
        registry = MweRegistry.load(config.registry_path, config.language)
        tokenizer = WordPieceTokenizer.load(config.tokenizer_path)
        encoder = TinyTransformerEncoder.load(config.encoder_path)
        os.makedirs(config.output_dir, exist_ok=True)
        os.makedirs(cache_root(config), exist_ok=True)
        manifest = RunManifest(cache_root(config))
        model = stage_mimic(config, encoder, tokenizer, registry, manifest)
        log = model.training_log
        if log:
            click.echo(f"combined-stage loss {log['combined_initial']:.5f}"
                       f" -> {log['combined_final']:.5f}")
        click.echo(f"model at {os.path.join(cache_root(config), 'mimic_model.pt')}")
    except IdiombedError as exc:
        _fail("mimic-train", exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("-k", "contexts", type=int, default=None,
              help="Contexts per idiom (default: config value).")
def embed(config_path, contexts):
    """Infer idiom embeddings and write the bundle."""
    from .pipeline import _pipeline_head, stage_embed, stage_sample

    config = _load_config(config_path)
    try:
        mined, model = _pipeline_head(config)
        sampled = stage_sample(config, mined, k=contexts)
        bundle = stage_embed(config, model, MweRegistry.load(
            config.registry_path, config.language), sampled)
        click.echo(f"bundle of {len(bundle)} embeddings "
                   f"-> {os.path.join(config.output_dir, 'bundle')}")
    except IdiombedError as exc:
        _fail("embed", exc)


@main.command()
@click.option("--encoder", "encoder_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True))
@click.option("--out-encoder", required=True, type=click.Path())
@click.option("--out-tokenizer", required=True, type=click.Path())
@click.option("--report", type=click.Path(), default=None)
def inject(encoder_path, tokenizer_path, bundle_dir, registry_path,
           out_encoder, out_tokenizer, report):
    """Append bundle vectors to an encoder's vocabulary."""
    from .injection import inject_embeddings

    try:
        encoder = TinyTransformerEncoder.load(encoder_path)
        tokenizer = WordPieceTokenizer.load(tokenizer_path)
        registry = MweRegistry.load(registry_path)
        bundle = EmbeddingBundle.load(bundle_dir)
        result = inject_embeddings(encoder, bundle, registry, tokenizer)
        encoder.save(out_encoder)
        tokenizer.save(out_tokenizer)
        if report:
            with open(report, "w", encoding="utf-8") as handle:
                handle.write(result.to_json())
        click.echo(f"vocab {result.old_vocab_size} -> {result.new_vocab_size}")
    except IdiombedError as exc:
        _fail("inject", exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--setting", type=click.Choice(["pretrain", "finetune"]),
              default="pretrain")
@click.option("--epochs", type=int, default=None)
def train(config_path, setting, epochs):
    """Run the full pipeline for one setting and print the report."""
    config = _load_config(config_path)
    try:
        report = run_pipeline(config, setting, train_epochs=epochs)
        click.echo(report.to_table())
    except IdiombedError as exc:
        _fail("train", exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True),
              required=True)
@click.option("--out", type=click.Path(), default=None)
def evaluate(config_path, checkpoint, tokenizer_path, out):
    """Score the eval split with a trained checkpoint."""
    from .pipeline import stage_evaluate

    config = _load_config(config_path)
    try:
        registry = MweRegistry.load(config.registry_path, config.language)
        tokenizer = WordPieceTokenizer.load(tokenizer_path)
        encoder = TinyTransformerEncoder.load(checkpoint)
        for entry in registry:
            entry.token_id = tokenizer.token_to_id(entry.token_name)
        os.makedirs(config.output_dir, exist_ok=True)
        report = stage_evaluate(config, encoder, registry, tokenizer,
                                out or "report_eval.json")
        click.echo(report.to_table())
    except IdiombedError as exc:
        _fail("evaluate", exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--setting", type=click.Choice(["pretrain", "finetune"]),
              default="pretrain")
@click.option("--min-occurrences", type=int, default=None)
def analyze(config_path, setting, min_occurrences):
    """Per-idiom Spearman breakdown from the latest report."""
    config = _load_config(config_path, min_occurrences=min_occurrences)
    report_path = os.path.join(config.output_dir, f"report_{setting}.json")
    if not os.path.exists(report_path):
        _fail("analyze", FileNotFoundError(report_path))
    with open(report_path, encoding="utf-8") as handle:
        payload = json.load(handle)
    rows = sorted(payload.get("per_idiom", {}).items(),
                  key=lambda item: item[1]["sr"])
    click.echo(f"{'idiom':<28} {'n':>4} {'sr':>8}")
    for name, row in rows:
        click.echo(f"{name:<28} {row['n']:>4} {row['sr']:>8.4f}")


@main.command("sweep-contexts")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--ks", required=True, help="Comma-separated context counts.")
def sweep_contexts_cmd(config_path, ks):
    """Pipeline sweep over the number of contexts per idiom."""
    config = _load_config(config_path)
    grid = [int(x) for x in ks.split(",") if x]
    try:
        reports = sweep_contexts(config, grid)
    except IdiombedError as exc:
        _fail("sweep-contexts", exc)
    for k in sorted(reports):
        click.echo(f"k={k}: {reports[k].to_table().splitlines()[1]}")


@main.command("sweep-epochs")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--setting", type=click.Choice(["pretrain", "finetune"]),
              default="pretrain")
@click.option("--grid", required=True, help="Comma-separated epoch counts.")
def sweep_epochs_cmd(config_path, setting, grid):
    """Evaluate checkpoints across a training-epoch grid."""
    config = _load_config(config_path)
    epoch_grid = [int(x) for x in grid.split(",") if x]
    try:
        reports = sweep_epochs(config, setting, epoch_grid)
    except IdiombedError as exc:
        _fail("sweep-epochs", exc)
    for epochs in sorted(reports):
        click.echo(f"epochs={epochs}: {reports[epochs].to_table().splitlines()[1]}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def stats(config_path):
    """Rarity of each idiom relative to its constituent words."""
    config = _load_config(config_path)
    registry = MweRegistry.load(config.registry_path, config.language)
    try:
        for entry in registry:
            ratio = rarity_stats(config.corpus_path, entry)
            click.echo(f"{entry.token_name}: {ratio:.4f}")
    except IdiombedError as exc:
        _fail("stats", exc)


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--sentences", type=int, default=2000)
@click.option("--mlm-epochs", type=int, default=40)
def synth(out, seed, sentences, mlm_epochs):
    """Build a synthetic desk-scale workspace (corpus, data, encoder)."""
    config = HarnessConfig(seed=seed, n_sentences=sentences,
                           mlm_epochs=mlm_epochs)
    meta = build_workspace(config, out)
    config_path = os.path.join(out, "pipeline.json")
    with open(config_path, "w", encoding="utf-8") as handle:
        json.dump({
            "language": "en",
            "corpus_path": "corpus.txt",
            "registry_path": "registry.json",
            "encoder_path": "encoder.pt",
            "tokenizer_path": "tokenizer.json",
            "sts_general_path": "sts_general_train.tsv",
            "sts_idiom_path": "sts_idiom_train.tsv",
            "sts_eval_path": "sts_dev.tsv",
            "output_dir": "runs",
            "contexts_per_idiom": 15,
            "max_matches": 250,
            "pretrain_epochs": 12,
            "finetune_epochs": 1,
            "mimic_min_frequency": 20,
            "seed": seed,
        }, handle, indent=2)
    click.echo(f"workspace at {out} ({len(meta['idioms'])} idioms); "
               f"pipeline config at {config_path}")


if __name__ == "__main__":
    main()
