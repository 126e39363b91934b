"""Flat `key = value` run configuration shared by every command.

A run is described by one RunConfig: reranker hyperparameters, baseline
training options, feature-template switches, and file paths. Values come
from an optional config file plus command-line overrides, unknown keys are
rejected, and the fully resolved config has a stable 12-hex digest that is
stamped into every output file header.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .baseline.features import FeatureTemplateSet
from .errors import ConfigError
from .pipeline import TrainConfig

# accepted spellings that differ from the field name
ALIASES = {"lambda": "l2"}

_BOOL_FIELDS = frozenset(
    {
        "feat_word_grams",
        "feat_word_bigrams",
        "feat_shape",
        "feat_capital",
        "feat_capital_word",
        "feat_connect",
        "feat_capital_connect",
        "feat_cluster_grams",
        "feat_prefix_suffix",
        "feat_pos_grams",
        "feat_pos_word",
        "peepholes",
        "use_lstm",
        "use_char_cnn",
        "use_word_cnn",
        "freeze_embeddings",
    }
)
_INT_FIELDS = frozenset(
    {
        "seed",
        "crf_epochs",
        "crf_batch_size",
        "folds",
        "n_best",
        "word_dim",
        "char_dim",
        "lstm_hidden",
        "char_cnn_filters",
        "word_cnn_filters",
        "char_cnn_window",
        "word_cnn_window",
        "batch_size",
        "epochs",
        "char_pad_cap",
        "bucket_width",
    }
)
_FLOAT_FIELDS = frozenset(
    {
        "crf_lr",
        "crf_l2",
        "dropout",
        "learning_rate",
        "l2",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
    }
)
_OPT_FLOAT_FIELDS = frozenset({"alpha"})
_TRUE_WORDS = frozenset({"true", "yes", "on", "1"})
_FALSE_WORDS = frozenset({"false", "no", "off", "0"})


@dataclass(frozen=True)
class RunConfig:
    """Every knob of every command, with pinned defaults."""

    seed: int = 0

    # file paths (unset = none)
    train_path: str | None = None
    input_path: str | None = None
    output_path: str | None = None
    model_path: str | None = None
    bundle_path: str | None = None
    nbest_path: str | None = None
    train_nbest_path: str | None = None
    dev_nbest_path: str | None = None
    gold_path: str | None = None
    pred_path: str | None = None
    embeddings_path: str | None = None
    clusters_path: str | None = None
    manifest_path: str | None = None

    # baseline tagger
    crf_epochs: int = 20
    crf_batch_size: int = 8
    crf_lr: float = 0.05
    crf_l2: float = 1e-4
    folds: int = 5

    # baseline feature templates
    feat_word_grams: bool = True
    feat_word_bigrams: bool = True
    feat_shape: bool = True
    feat_capital: bool = True
    feat_capital_word: bool = True
    feat_connect: bool = True
    feat_capital_connect: bool = True
    feat_cluster_grams: bool = True
    feat_prefix_suffix: bool = True
    feat_pos_grams: bool = True
    feat_pos_word: bool = True

    # reranker
    n_best: int = 10
    word_dim: int = 50
    char_dim: int = 50
    lstm_hidden: int = 100
    dropout: float = 0.2
    char_cnn_filters: int = 50
    word_cnn_filters: int = 100
    char_cnn_window: int = 3
    word_cnn_window: int = 3
    learning_rate: float = 0.001
    batch_size: int = 128
    l2: float = 0.001
    adam_beta1: float = 0.1
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    peepholes: bool = False
    epochs: int = 5
    use_lstm: bool = True
    use_char_cnn: bool = True
    use_word_cnn: bool = True
    freeze_embeddings: bool = False
    char_pad_cap: int = 32

    # decoding / evaluation
    alpha: float | None = None
    bucket_width: int = 5

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        if self.crf_epochs < 0:
            raise ConfigError(f"crf_epochs cannot be negative, got {self.crf_epochs}")
        if self.crf_batch_size < 1:
            raise ConfigError(
                f"crf_batch_size must be positive, got {self.crf_batch_size}"
            )
        if self.bucket_width < 1:
            raise ConfigError(f"bucket_width must be positive, got {self.bucket_width}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        # delegate range checks on the training block
        self.train_config()

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_best=self.n_best,
            word_dim=self.word_dim,
            char_dim=self.char_dim,
            lstm_hidden=self.lstm_hidden,
            dropout=self.dropout,
            char_cnn_filters=self.char_cnn_filters,
            word_cnn_filters=self.word_cnn_filters,
            char_cnn_window=self.char_cnn_window,
            word_cnn_window=self.word_cnn_window,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            l2=self.l2,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            peepholes=self.peepholes,
            epochs=self.epochs,
            seed=self.seed,
            use_lstm=self.use_lstm,
            use_char_cnn=self.use_char_cnn,
            use_word_cnn=self.use_word_cnn,
            freeze_embeddings=self.freeze_embeddings,
            char_pad_cap=self.char_pad_cap,
        )

    def template_set(self, clusters: dict | None = None) -> FeatureTemplateSet:
        return FeatureTemplateSet(
            word_grams=self.feat_word_grams,
            word_bigrams=self.feat_word_bigrams,
            shape=self.feat_shape,
            capital=self.feat_capital,
            capital_word=self.feat_capital_word,
            connect=self.feat_connect,
            capital_connect=self.feat_capital_connect,
            cluster_grams=self.feat_cluster_grams,
            prefix_suffix=self.feat_prefix_suffix,
            pos_grams=self.feat_pos_grams,
            pos_word=self.feat_pos_word,
            clusters=clusters,
        )


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
_FIELD_SET = frozenset(FIELD_NAMES)


def _coerce(name: str, raw: str):
    """Parse one raw string value for the named field."""
    text = raw.strip()
    if name in _BOOL_FIELDS:
        low = text.lower()
        if low in _TRUE_WORDS:
            return True
        if low in _FALSE_WORDS:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if name in _INT_FIELDS:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if name in _FLOAT_FIELDS or name in _OPT_FLOAT_FIELDS:
        if name in _OPT_FLOAT_FIELDS and text.lower() == "none":
            return None
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    # remaining fields are optional paths
    if text.lower() == "none" or not text:
        return None
    return text


def parse_config_text(text: str) -> dict[str, str]:
    """`key = value` per line; blank lines and `#` comments are ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def resolve_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> tuple[RunConfig, frozenset[str]]:
    """Merge file values and overrides (overrides win) into a RunConfig.

    Returns the config plus the set of field names that were explicitly
    given, which commands use to tell deliberate choices from defaults.
    """
    merged: dict[str, str] = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            merged[ALIASES.get(key, key)] = value
    unknown = sorted(set(merged) - _FIELD_SET)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    typed = {name: _coerce(name, raw) for name, raw in merged.items()}
    return RunConfig(**typed), frozenset(typed)


def read_config_file(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def format_config(config: RunConfig) -> str:
    """Canonical flat rendering: one `key = value` line per field, sorted."""
    lines = []
    for name in sorted(FIELD_NAMES):
        value = getattr(config, name)
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{name} = {text}\n")
    return "".join(lines)


def config_hash(config: RunConfig) -> str:
    """12-hex digest of the canonical rendering; stamped into output files."""
    return hashlib.sha256(format_config(config).encode("utf-8")).hexdigest()[:12]
