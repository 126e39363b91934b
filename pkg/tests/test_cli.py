"""Tests for run configuration, model persistence, and the command-line
interface (exit codes, output headers, manifests, determinism)."""

import numpy as np
import pytest

from nerrank import __version__
from nerrank.baseline.crf import crf_train, kbest_decode, load_crf, save_crf
from nerrank.baseline.features import FeatureTemplateSet
from nerrank.baseline.nbest import read_nbest
from nerrank.cli import (
    EXIT_BAD_CONFIG,
    EXIT_BAD_DATA,
    EXIT_CHECKPOINT,
    EXIT_MISSING_FILE,
    EXIT_OK,
    main,
)
from nerrank.config import (
    RunConfig,
    config_hash,
    format_config,
    parse_config_text,
    resolve_config,
)
from nerrank.corpus import Dataset, format_conll, normalize_to_bio2, parse_conll
from nerrank.errors import CheckpointMismatchError, ConfigError
from nerrank.pipeline import TrainConfig

from toycorpus import make_corpus

HEADER_PREFIX = f"# nerrank {__version__} config "


# ---------------------------------------------------------------------------
# config parsing and resolution


def test_parse_config_text_basics():
    text = "\n".join(
        [
            "# comment",
            "",
            "seed = 7",
            "train_path = data/train.conll",
            "dropout=0.3",
        ]
    )
    assert parse_config_text(text) == {
        "seed": "7",
        "train_path": "data/train.conll",
        "dropout": "0.3",
    }


def test_parse_config_rejects_junk_and_duplicates():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="empty key"):
        parse_config_text("= 3\n")


def test_resolve_overrides_win_and_lambda_alias():
    cfg, explicit = resolve_config(
        {"seed": "1", "lambda": "0.5"}, {"seed": "2"}
    )
    assert cfg.seed == 2
    assert cfg.l2 == 0.5
    assert explicit == {"seed", "l2"}


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="zzz"):
        resolve_config({"zzz": "1"})


def test_value_coercion():
    cfg, _ = resolve_config(
        {
            "peepholes": "yes",
            "use_lstm": "false",
            "epochs": "3",
            "dropout": "0.25",
            "alpha": "none",
            "train_path": "none",
            "model_path": "m.npz",
        }
    )
    assert cfg.peepholes is True
    assert cfg.use_lstm is False
    assert cfg.epochs == 3
    assert cfg.dropout == 0.25
    assert cfg.alpha is None
    assert cfg.train_path is None
    assert cfg.model_path == "m.npz"
    for bad in ({"epochs": "three"}, {"dropout": "heavy"}, {"use_lstm": "2"}):
        with pytest.raises(ConfigError):
            resolve_config(bad)


def test_config_round_trips_through_rendering():
    cfg, _ = resolve_config(
        {"seed": "9", "alpha": "0.45", "folds": "3", "train_path": "x.conll"}
    )
    again, _ = resolve_config(parse_config_text(format_config(cfg)))
    assert again == cfg


def test_config_hash_is_stable_and_sensitive():
    base, _ = resolve_config({})
    assert len(config_hash(base)) == 12
    assert int(config_hash(base), 16) >= 0
    assert config_hash(base) == config_hash(RunConfig())
    changed, _ = resolve_config({"seed": "1"})
    assert config_hash(changed) != config_hash(base)


def test_default_values_are_pinned():
    cfg = RunConfig()
    assert cfg.train_config() == TrainConfig()
    assert (cfg.folds, cfg.crf_epochs) == (5, 20)


def test_template_set_mapping():
    cfg, _ = resolve_config({"feat_word_bigrams": "false", "feat_shape": "false"})
    templates = cfg.template_set()
    assert templates.word_bigrams is False
    assert templates.shape is False
    assert templates.word_grams is True
    with_clusters = cfg.template_set({"word": "0101"})
    assert with_clusters.clusters == {"word": "0101"}


def test_runconfig_validation():
    with pytest.raises(ConfigError):
        RunConfig(folds=1)
    with pytest.raises(ConfigError):
        RunConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        RunConfig(bucket_width=0)
    with pytest.raises(ConfigError):
        RunConfig(epochs=-1)  # delegated to the training block


# ---------------------------------------------------------------------------
# baseline model persistence


@pytest.fixture(scope="module")
def tiny_crf():
    train = make_corpus(12, seed=5, split="train")
    templates = FeatureTemplateSet(clusters=None)
    return train, crf_train(train, templates, epochs=2, seed=5)


def test_crf_checkpoint_roundtrip(tmp_path, tiny_crf):
    train, model = tiny_crf
    path = tmp_path / "model.npz"
    save_crf(path, model, extra_meta={"version": __version__})
    loaded = load_crf(path)
    assert loaded.tags == model.tags
    assert loaded.feature_vocab == model.feature_vocab
    assert loaded.templates == model.templates
    assert np.array_equal(loaded.emit, model.emit)
    assert np.array_equal(loaded.trans, model.trans)
    sentence = train.sentences[0]
    a = kbest_decode(model, sentence, 5)
    b = kbest_decode(loaded, sentence, 5)
    assert a.candidates == b.candidates


def test_crf_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_crf(tmp_path / "absent.npz")
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointMismatchError):
        load_crf(bad)


# ---------------------------------------------------------------------------
# full command-line pipeline


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Run the whole toolchain once on a small corpus; tests inspect it."""
    root = tmp_path_factory.mktemp("cli")
    paths = {
        "train": root / "train.conll",
        "dev": root / "dev.conll",
        "test": root / "test.conll",
        "model": root / "crf.npz",
        "jk": root / "jk.nbest",
        "dev_nbest": root / "dev.nbest",
        "test_nbest": root / "test.nbest",
        "bundle": root / "bundle",
        "pred": root / "pred.conll",
        "metrics": root / "metrics.txt",
    }
    for split, n in (("train", 24), ("dev", 12), ("test", 12)):
        ds = make_corpus(n, seed=3, split=split)
        paths[split].write_text(format_conll(ds), encoding="utf-8")
    fast_crf = ["--crf-epochs", "3", "--seed", "0"]
    assert main(
        ["baseline-train", "--train-path", str(paths["train"]),
         "--model-path", str(paths["model"]), *fast_crf]
    ) == EXIT_OK
    for split, out in (("dev", "dev_nbest"), ("test", "test_nbest")):
        assert main(
            ["baseline-decode", "--model-path", str(paths["model"]),
             "--input-path", str(paths[split]), "--output-path", str(paths[out]),
             "--n-best", "10"]
        ) == EXIT_OK
    assert main(
        ["jackknife", "--train-path", str(paths["train"]),
         "--output-path", str(paths["jk"]), "--folds", "2", "--n-best", "10",
         *fast_crf]
    ) == EXIT_OK
    assert main(
        ["rerank-train", "--train-nbest-path", str(paths["jk"]),
         "--dev-nbest-path", str(paths["dev_nbest"]),
         "--bundle-path", str(paths["bundle"]),
         "--word-dim", "8", "--char-dim", "6", "--lstm-hidden", "8",
         "--char-cnn-filters", "4", "--word-cnn-filters", "6",
         "--batch-size", "32", "--learning-rate", "0.01", "--dropout", "0.1",
         "--epochs", "1", "--seed", "0"]
    ) == EXIT_OK
    assert main(
        ["rerank-decode", "--bundle-path", str(paths["bundle"]),
         "--nbest-path", str(paths["test_nbest"]),
         "--output-path", str(paths["pred"])]
    ) == EXIT_OK
    return paths


def test_pipeline_outputs_have_headers(pipeline_dir):
    for name in ("jk", "dev_nbest", "test_nbest", "pred"):
        first = pipeline_dir[name].read_text(encoding="utf-8").splitlines()[0]
        assert first.startswith(HEADER_PREFIX), name


def test_pipeline_manifests(pipeline_dir):
    manifest = (
        pipeline_dir["pred"].parent / (pipeline_dir["pred"].name + ".manifest")
    ).read_text(encoding="utf-8")
    lines = dict(
        line.split(" = ", 1)
        for line in manifest.splitlines()
        if " = " in line and not line.startswith("#")
    )
    assert lines["command"] == "rerank-decode"
    assert lines["version"] == __version__
    assert len(lines["config_hash"]) == 12
    assert "input_nbest_path_sha256" in lines
    assert lines["output_output_path"] == str(pipeline_dir["pred"])
    assert "config_seed" in lines


def test_predictions_parse_and_align(pipeline_dir):
    gold = parse_conll(pipeline_dir["test"].read_text(encoding="utf-8"))
    pred = parse_conll(pipeline_dir["pred"].read_text(encoding="utf-8"))
    assert len(pred) == len(gold)
    for (gs, _), (ps, _) in zip(gold, pred):
        assert gs.surfaces == ps.surfaces


def test_eval_identical_files_reports_perfect(pipeline_dir, capsys):
    rc = main(
        ["eval", "--gold-path", str(pipeline_dir["test"]),
         "--pred-path", str(pipeline_dir["test"])]
    )
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "F1 = 100.00" in out
    assert "ssa = 100.00" in out


def test_eval_writes_metrics_file(pipeline_dir, capsys):
    rc = main(
        ["eval", "--gold-path", str(pipeline_dir["test"]),
         "--pred-path", str(pipeline_dir["pred"]),
         "--output-path", str(pipeline_dir["metrics"])]
    )
    capsys.readouterr()
    assert rc == EXIT_OK
    text = pipeline_dir["metrics"].read_text(encoding="utf-8")
    assert text.startswith(HEADER_PREFIX)
    assert "\nF1 = " in text
    assert "ssa_len_5 = " in text


def test_alpha_zero_decode_matches_baseline_top_candidates(pipeline_dir, tmp_path):
    out = tmp_path / "alpha0.conll"
    rc = main(
        ["rerank-decode", "--bundle-path", str(pipeline_dir["bundle"]),
         "--nbest-path", str(pipeline_dir["test_nbest"]),
         "--output-path", str(out), "--alpha", "0"]
    )
    assert rc == EXIT_OK
    corpus = read_nbest(pipeline_dir["test_nbest"])
    top = [normalize_to_bio2(cs.candidates[0][0]) for cs in corpus.sets]
    expected = format_conll(Dataset(list(corpus.sentences), top))
    body = out.read_text(encoding="utf-8").split("\n", 1)[1]
    assert body == expected


def test_decode_runs_are_byte_identical(pipeline_dir, tmp_path):
    out = tmp_path / "pred.conll"
    outs = []
    for _ in range(2):
        assert main(
            ["rerank-decode", "--bundle-path", str(pipeline_dir["bundle"]),
             "--nbest-path", str(pipeline_dir["test_nbest"]),
             "--output-path", str(out)]
        ) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_collapse_prints_patterns(pipeline_dir, capsys):
    rc = main(["collapse", "--nbest-path", str(pipeline_dir["dev_nbest"])])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    first = out.splitlines()[0].split("\t")
    assert first[0] == "0" and first[1] == "0"
    assert len(first) == 3 and first[2]


def test_oracle_curves_csv(pipeline_dir, capsys):
    rc = main(["oracle", "--nbest-path", str(pipeline_dir["test_nbest"])])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "n,oba,obf,owf"
    assert lines[1].startswith("1,")


def test_alpha_search_reports_grid(pipeline_dir, capsys):
    rc = main(
        ["alpha-search", "--bundle-path", str(pipeline_dir["bundle"]),
         "--nbest-path", str(pipeline_dir["dev_nbest"])]
    )
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    values = dict(line.split(" = ") for line in out.splitlines())
    assert values["grid_points"] == "201"
    alpha = float(values["alpha"])
    assert abs(alpha * 200 - round(alpha * 200)) < 1e-9


# ---------------------------------------------------------------------------
# failure exit codes


def test_missing_input_file_exit_code(tmp_path, capsys):
    rc = main(
        ["baseline-train", "--train-path", str(tmp_path / "absent.conll"),
         "--model-path", str(tmp_path / "m.npz")]
    )
    capsys.readouterr()
    assert rc == EXIT_MISSING_FILE


def test_missing_required_key_exit_code(capsys):
    rc = main(["baseline-train"])
    err = capsys.readouterr().err
    assert rc == EXIT_BAD_CONFIG
    assert "train_path" in err


def test_unknown_config_key_exit_code(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("no_such_option = 1\n", encoding="utf-8")
    rc = main(["oracle", "--config", str(cfg), "--nbest-path", "x"])
    capsys.readouterr()
    assert rc == EXIT_BAD_CONFIG


def test_checkpoint_mismatch_exit_code(pipeline_dir, tmp_path, capsys):
    rc = main(
        ["rerank-decode", "--bundle-path", str(pipeline_dir["bundle"]),
         "--nbest-path", str(pipeline_dir["test_nbest"]),
         "--output-path", str(tmp_path / "p.conll"), "--lstm-hidden", "500"]
    )
    capsys.readouterr()
    assert rc == EXIT_CHECKPOINT


def test_malformed_data_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.nbest"
    bad.write_text("garbage\n", encoding="utf-8")
    rc = main(["oracle", "--nbest-path", str(bad)])
    capsys.readouterr()
    assert rc == EXIT_BAD_DATA


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert __version__ in capsys.readouterr().out
