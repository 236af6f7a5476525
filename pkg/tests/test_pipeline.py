import json
import os

import pytest

from idiombed import MweRegistry, StsPair, read_sts_tsv, write_sts_tsv
from idiombed.errors import (
    InvalidArgument,
    MissingGrouping,
    PipelineStageError,
    SettingViolation,
)
from idiombed.pipeline import (
    PipelineConfig,
    RunManifest,
    assign_idioms,
    run_pipeline,
    select_training_words,
    sweep_contexts,
    sweep_epochs,
)

import wsutil


@pytest.fixture(scope="module")
def pretrain_run(small_workspace, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run_base"))
    config = wsutil.pipeline_config(small_workspace, out, **wsutil.SMALL_RUN)
    report = run_pipeline(config, "pretrain")
    return config, report


class TestConfig:
    def test_contexts_bounded_by_max_matches(self):
        with pytest.raises(InvalidArgument):
            PipelineConfig(contexts_per_idiom=300, max_matches=250)

    def test_pretrain_epoch_defaults_by_language(self):
        assert PipelineConfig(language="en").resolved_pretrain_epochs() == 35
        assert PipelineConfig(language="pt").resolved_pretrain_epochs() == 45
        assert PipelineConfig(language="gl").resolved_pretrain_epochs() == 45
        assert PipelineConfig(language="en",
                              pretrain_epochs=3).resolved_pretrain_epochs() == 3

    def test_from_json_resolves_relative_paths(self, tmp_path):
        config_path = tmp_path / "conf.json"
        config_path.write_text(json.dumps({
            "corpus_path": "corpus.txt", "output_dir": "runs", "seed": 5,
        }), encoding="utf-8")
        config = PipelineConfig.from_json(str(config_path))
        assert config.corpus_path == str(tmp_path / "corpus.txt")
        assert config.output_dir == str(tmp_path / "runs")
        assert config.seed == 5

    def test_from_json_rejects_unknown_fields(self, tmp_path):
        config_path = tmp_path / "conf.json"
        config_path.write_text('{"no_such_field": 1}', encoding="utf-8")
        with pytest.raises(InvalidArgument):
            PipelineConfig.from_json(str(config_path))

    def test_production_defaults(self):
        config = PipelineConfig()
        assert config.contexts_per_idiom == 150
        assert config.max_matches == 250
        assert config.mimic_schedule == (3, 10, 3)
        assert config.finetune_epochs == 1
        assert config.min_occurrences == 5


class TestRunPipeline:
    def test_report_and_artifacts(self, pretrain_run):
        config, report = pretrain_run
        assert -1.0 <= report.sr_all <= 1.0
        assert report.sr_idiom is not None
        assert report.sr_sts is not None
        assert report.per_idiom
        out = config.output_dir
        assert os.path.exists(os.path.join(out, "manifest.json"))
        assert os.path.exists(os.path.join(out, "report_pretrain.json"))
        assert os.path.exists(os.path.join(out, "bundle", "manifest.json"))
        assert os.path.exists(os.path.join(out, "bundle", "vectors.f32"))
        assert os.path.exists(os.path.join(out, "checkpoints", "pretrain.pt"))
        assert os.path.exists(os.path.join(out, "injection_report.json"))
        contexts = [f for f in os.listdir(os.path.join(out, "contexts"))
                    if f.endswith(".jsonl")]
        assert len(contexts) == 6

    def test_matches_pinned_golden_report(self, pretrain_run, golden_dir):
        config, _ = pretrain_run
        produced = open(os.path.join(config.output_dir,
                                     "report_pretrain.json"), "rb").read()
        golden = open(os.path.join(golden_dir,
                                   "report_pretrain_golden.json"), "rb").read()
        assert produced == golden

    def test_rerun_in_fresh_dir_is_byte_identical(self, small_workspace,
                                                  pretrain_run, tmp_path):
        config, _ = pretrain_run
        fresh = wsutil.pipeline_config(small_workspace, str(tmp_path / "again"),
                                       **wsutil.SMALL_RUN)
        run_pipeline(fresh, "pretrain")
        first = open(os.path.join(config.output_dir,
                                  "report_pretrain.json"), "rb").read()
        second = open(os.path.join(fresh.output_dir,
                                   "report_pretrain.json"), "rb").read()
        assert first == second

    def test_rerun_hits_stage_caches(self, pretrain_run):
        config, _ = pretrain_run
        out = config.output_dir
        mined = os.path.join(out, "contexts")
        stamps = {name: os.path.getmtime(os.path.join(mined, name))
                  for name in os.listdir(mined)}
        mimic_stamp = os.path.getmtime(os.path.join(out, "mimic_model.pt"))
        run_pipeline(config, "pretrain")
        for name, stamp in stamps.items():
            assert os.path.getmtime(os.path.join(mined, name)) == stamp
        assert os.path.getmtime(os.path.join(out, "mimic_model.pt")) == mimic_stamp

    def test_finetune_requires_pretrain_checkpoint(self, small_workspace,
                                                   tmp_path):
        config = wsutil.pipeline_config(small_workspace, str(tmp_path / "cold"),
                                        **wsutil.SMALL_RUN)
        with pytest.raises(PipelineStageError) as info:
            run_pipeline(config, "finetune")
        assert info.value.stage == "train"

    def test_finetune_after_pretrain(self, pretrain_run):
        config, pretrain_report = pretrain_run
        report = run_pipeline(config, "finetune", train_epochs=1)
        assert os.path.exists(os.path.join(config.output_dir,
                                           "report_finetune.json"))
        assert os.path.exists(os.path.join(config.output_dir, "checkpoints",
                                           "finetune.pt"))
        assert report.sr_idiom is not None

    def test_pretrain_rejects_idiom_training_data(self, small_workspace,
                                                  tmp_path):
        poisoned = tmp_path / "poisoned.tsv"
        pairs = read_sts_tsv(os.path.join(small_workspace,
                                          "sts_general_train.tsv"))
        pairs.append(StsPair("idiom frame here", "other sentence", 0.9,
                             "en", "idiom"))
        write_sts_tsv(str(poisoned), pairs)
        config = wsutil.pipeline_config(
            small_workspace, str(tmp_path / "run"),
            sts_general_path=str(poisoned), **wsutil.SMALL_RUN)
        with pytest.raises(PipelineStageError) as info:
            run_pipeline(config, "pretrain")
        assert isinstance(info.value.cause, SettingViolation)

    def test_unknown_setting_rejected(self, small_workspace, tmp_path):
        config = wsutil.pipeline_config(small_workspace, str(tmp_path / "x"),
                                        **wsutil.SMALL_RUN)
        with pytest.raises(InvalidArgument):
            run_pipeline(config, "zero-shot")


class TestSweeps:
    def test_sweep_contexts_single_k(self, small_workspace, tmp_path):
        config = wsutil.pipeline_config(small_workspace, str(tmp_path / "sweep"),
                                        **wsutil.SMALL_RUN)
        reports = sweep_contexts(config, [1])
        assert list(reports) == [1]
        series = (tmp_path / "sweep" / "sweep_contexts.tsv").read_text(
            encoding="utf-8").splitlines()
        assert series[0] == "contexts\tsr_all\tsr_idiom\tsr_sts"
        assert len(series) == 2
        assert series[1].startswith("1\t")

    def test_sweep_contexts_rejects_bad_grid(self, small_workspace, tmp_path):
        config = wsutil.pipeline_config(small_workspace, str(tmp_path / "s"),
                                        **wsutil.SMALL_RUN)
        with pytest.raises(InvalidArgument):
            sweep_contexts(config, [])
        with pytest.raises(InvalidArgument):
            sweep_contexts(config, [0, 5])

    def test_sweep_epochs_zero_grid_point(self, small_workspace, tmp_path):
        config = wsutil.pipeline_config(small_workspace, str(tmp_path / "se"),
                                        **wsutil.SMALL_RUN)
        reports = sweep_epochs(config, "pretrain", [0])
        assert list(reports) == [0]
        series_path = tmp_path / "se" / "sweep_epochs_pretrain.tsv"
        assert series_path.exists()

    def test_sweep_epochs_finetune_uses_base_checkpoint(self, pretrain_run):
        config, _ = pretrain_run
        reports = sweep_epochs(config, "finetune", [0, 1])
        assert set(reports) == {0, 1}
        # Epoch 0 evaluates the pretrain checkpoint untouched.
        base = json.load(open(os.path.join(config.output_dir,
                                           "report_pretrain.json")))
        assert reports[0].sr_all == pytest.approx(base["sr_all"], abs=1e-9)


class TestHelpers:
    def test_select_training_words_filters(self, small_workspace):
        from idiombed.tokenizer import WordPieceTokenizer

        tokenizer = WordPieceTokenizer.load(
            os.path.join(small_workspace, "tokenizer.json"))
        corpus = os.path.join(small_workspace, "corpus.txt")
        words = select_training_words(corpus, tokenizer, max_words=20,
                                      min_frequency=10, skip_top=6)
        assert 0 < len(words) <= 20
        assert words == sorted(words)
        assert all(len(tokenizer.tokenize(w)) == 1 for w in words)

    def test_assign_idioms_maps_and_raises(self, small_workspace):
        registry = MweRegistry.load(
            os.path.join(small_workspace, "registry.json"))
        entry = next(iter(registry))
        pairs = [
            StsPair(f"frame with {entry.surface} inside", "other", 0.9,
                    "en", "idiom"),
            StsPair("a general pair", "another", 0.5, "en", "general"),
        ]
        mapping = assign_idioms(pairs, registry)
        assert mapping == {0: entry.token_name}
        stray = [StsPair("no expression here", "none", 0.5, "en", "idiom")]
        with pytest.raises(MissingGrouping):
            assign_idioms(stray, registry)

    def test_manifest_freshness(self, tmp_path):
        manifest = RunManifest(str(tmp_path))
        target = tmp_path / "artifact.bin"
        target.write_bytes(b"data")
        manifest.record("stage", "key1", [str(target)])
        assert manifest.is_fresh("stage", "key1")
        assert not manifest.is_fresh("stage", "key2")
        target.unlink()
        assert not manifest.is_fresh("stage", "key1")

    def test_cache_dir_env_shares_mined_contexts(self, small_workspace,
                                                 tmp_path, monkeypatch):
        cache = tmp_path / "shared_cache"
        monkeypatch.setenv("IDIOMBED_CACHE_DIR", str(cache))
        first = wsutil.pipeline_config(small_workspace, str(tmp_path / "run_a"),
                                       **wsutil.SMALL_RUN)
        run_pipeline(first, "pretrain")
        assert (cache / "contexts").is_dir()
        assert (cache / "mimic_model.pt").exists()
        stamps = {p.name: p.stat().st_mtime
                  for p in (cache / "contexts").iterdir()}
        second = wsutil.pipeline_config(small_workspace, str(tmp_path / "run_b"),
                                        **wsutil.SMALL_RUN)
        report = run_pipeline(second, "pretrain")
        for p in (cache / "contexts").iterdir():
            assert p.stat().st_mtime == stamps[p.name]
        assert not (tmp_path / "run_b" / "contexts").exists()
        assert report.sr_all is not None
