"""Reranker training and decoding: example construction from n-best lists,
the MSE + L2 objective, mini-batch Adam with per-epoch model selection,
mixture decoding, and the interpolation-weight grid search.

The final selection rule mixes both systems per candidate,

    chosen = argmax_i  alpha * s(C_i) + (1 - alpha) * p(L_i),

where s is the neural score of the collapsed pattern and p the baseline's
sequence probability; alpha is tuned by exhaustive search over the 201-point
grid {0, 0.005, ..., 1.0} against dev chunk F1.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .baseline.nbest import NBestCorpus
from .collapse import CollapsedSequence, collapse, collapsed_to_labels
from .corpus import EntitySpan, LabelSeq, extract_spans, normalize_to_bio2, tag_accuracy
from .errors import ConfigError, NerrankError
from .evaluation import PrfCounts
from .numerics import (
    AdamState,
    Tensor,
    backward,
    load_checkpoint,
    save_checkpoint,
    scale,
    sum_all,
)
from .reranker import PatternScorer, ScoredCandidate, ScorerConfig, Vocab, build_vocab

SHUFFLE_STREAM = 23
ALPHA_GRID = tuple(i / 200.0 for i in range(201))
WEIGHTS_FILE = "weights.bin"
META_FILE = "meta.json"
SCORE_CHUNK = 64


@dataclass(frozen=True)
class RerankExample:
    """One candidate as a training instance: its collapsed pattern, the
    tag-accuracy regression target, and the baseline probability."""

    collapsed: CollapsedSequence
    target: float
    baseline_prob: float

    def __post_init__(self):
        if not 0.0 <= self.target <= 1.0:
            raise NerrankError(f"target must be in [0, 1]: {self.target}")
        if not 0.0 < self.baseline_prob <= 1.0:
            raise NerrankError(
                f"baseline probability must be in (0, 1]: {self.baseline_prob}"
            )

    @cached_property
    def tokens(self) -> list[str]:
        return [item.token_string() for item in self.collapsed.items]

    @property
    def sentence_id(self) -> int:
        return self.collapsed.sentence_id

    @property
    def candidate_index(self) -> int:
        return self.collapsed.candidate_index


@dataclass(frozen=True)
class TrainConfig:
    """Reranker hyperparameters with pinned defaults, plus run plumbing."""

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
    seed: int = 0
    use_lstm: bool = True
    use_char_cnn: bool = True
    use_word_cnn: bool = True
    freeze_embeddings: bool = False
    char_pad_cap: int = 32

    def __post_init__(self):
        if self.n_best < 1:
            raise ConfigError(f"n_best must be positive, got {self.n_best}")
        if self.epochs < 0:
            raise ConfigError(f"epochs cannot be negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l2 < 0:
            raise ConfigError(f"l2 cannot be negative, got {self.l2}")
        for name in ("adam_beta1", "adam_beta2"):
            beta = getattr(self, name)
            if not 0.0 <= beta < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {beta}")
        if self.adam_eps <= 0:
            raise ConfigError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.char_pad_cap < 1:
            raise ConfigError(f"char_pad_cap must be positive, got {self.char_pad_cap}")

    def scorer_config(self, char_pad: int) -> ScorerConfig:
        return ScorerConfig(
            word_dim=self.word_dim,
            char_dim=self.char_dim,
            lstm_hidden=self.lstm_hidden,
            char_filters=self.char_cnn_filters,
            char_window=self.char_cnn_window,
            word_filters=self.word_cnn_filters,
            word_window=self.word_cnn_window,
            dropout=self.dropout,
            char_pad=char_pad,
            use_lstm=self.use_lstm,
            use_char_cnn=self.use_char_cnn,
            use_word_cnn=self.use_word_cnn,
            peepholes=self.peepholes,
            freeze_embeddings=self.freeze_embeddings,
        )


@dataclass(frozen=True)
class EpochEval:
    """Dev-set result after one epoch (epoch 0 = the initialized model)."""

    epoch: int
    alpha: float
    dev_f1: float


@dataclass(frozen=True)
class AlphaSearchResult:
    alpha: float
    f1: float
    points: int


def _on_grid(alpha: float) -> bool:
    return abs(alpha * 200.0 - round(alpha * 200.0)) < 1e-9 and 0.0 <= alpha <= 1.0


@dataclass
class RerankerBundle:
    """A trained scorer with its chosen interpolation weight."""

    scorer: PatternScorer
    alpha: float
    config: TrainConfig
    history: list[EpochEval]

    def __post_init__(self):
        if not _on_grid(self.alpha):
            raise ConfigError(
                f"alpha {self.alpha} is outside the 0.005 search grid"
            )


# ---------------------------------------------------------------------------
# dataset construction


def make_examples(nbest: NBestCorpus) -> list[RerankExample]:
    """One example per candidate; the target is the candidate's per-token
    label accuracy against gold (both sides normalized)."""
    out = []
    for sentence, cs in nbest:
        if cs.gold is None:
            raise NerrankError(
                f"sentence {sentence.id}: supervised examples need gold labels"
            )
        gold = normalize_to_bio2(cs.gold)
        for idx, (labels, prob) in enumerate(cs.candidates):
            out.append(
                RerankExample(
                    collapsed=collapse(sentence, labels, candidate_index=idx),
                    target=tag_accuracy(gold, normalize_to_bio2(labels)),
                    baseline_prob=prob,
                )
            )
    return out


# ---------------------------------------------------------------------------
# objective


def batch_loss(
    scorer: PatternScorer,
    batch: list[RerankExample],
    l2: float,
    *,
    train: bool = True,
) -> Tensor:
    """Mean squared error over the batch plus (l2/2) * ||params||^2."""
    if not batch:
        raise NerrankError("cannot compute the loss of an empty batch")
    scores = scorer.score_batch([ex.tokens for ex in batch], train=train)
    total = None
    for ex, s in zip(batch, scores):
        diff = s - Tensor(np.array([[ex.target]]))
        sq = diff * diff
        total = sq if total is None else total + sq
    loss = scale(total, 1.0 / len(batch))
    if l2 > 0.0:
        reg = None
        for _, p in scorer.trainable():
            term = sum_all(p * p)
            reg = term if reg is None else reg + term
        loss = loss + scale(reg, l2 / 2.0)
    return loss


# ---------------------------------------------------------------------------
# scoring and selection


def score_sets(scorer: PatternScorer, nbest: NBestCorpus) -> list[list[ScoredCandidate]]:
    """Evaluation-mode scores for every candidate in the corpus.

    Each distinct collapsed pattern is scored once; duplicates (very common
    after collapsing) reuse the cached value.
    """
    collapsed_rows = []
    order: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    for sentence, cs in nbest:
        row = []
        for idx, (labels, prob) in enumerate(cs.candidates):
            seq = collapse(sentence, labels, candidate_index=idx)
            key = tuple(item.token_string() for item in seq.items)
            row.append((seq, key, prob))
            if key not in seen:
                seen.add(key)
                order.append(key)
        collapsed_rows.append(row)

    values: dict[tuple[str, ...], float] = {}
    for start in range(0, len(order), SCORE_CHUNK):
        chunk = order[start : start + SCORE_CHUNK]
        for key, s in zip(chunk, scorer.score_batch([list(k) for k in chunk])):
            values[key] = s.item()

    out = []
    for row in collapsed_rows:
        out.append(
            [
                ScoredCandidate(
                    index=i,
                    collapsed=seq,
                    score=values[key],
                    baseline_prob=prob,
                )
                for i, (seq, key, prob) in enumerate(row)
            ]
        )
    return out


def mixture_select(candidates: list[ScoredCandidate], alpha: float) -> int:
    """Index of the candidate maximizing alpha*s + (1-alpha)*p; ties go to
    the lower index, i.e. the higher baseline rank."""
    if not candidates:
        raise NerrankError("cannot select from an empty candidate list")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    best_i = 0
    best_v = None
    for i, c in enumerate(candidates):
        v = alpha * c.score + (1.0 - alpha) * c.baseline_prob
        if best_v is None or v > best_v:
            best_i, best_v = i, v
    return best_i


def _candidate_spans(seq: CollapsedSequence) -> set[EntitySpan]:
    return {
        EntitySpan(start, end, item.entity_type)
        for item, (start, end) in zip(seq.items, seq.spans)
        if item.is_type_token
    }


def alpha_search(
    scored: list[list[ScoredCandidate]],
    golds: list[LabelSeq],
) -> AlphaSearchResult:
    """Best interpolation weight by dev chunk F1 over the full 0.005 grid.

    Candidate span statistics are computed once; each grid point only
    re-runs the argmax selection. Ties prefer the smallest alpha.
    """
    if len(scored) != len(golds):
        raise NerrankError(
            f"{len(scored)} scored sentences vs {len(golds)} gold sequences"
        )
    per_sentence = []
    total_gold = 0
    for row, gold in zip(scored, golds):
        if not row:
            raise NerrankError("cannot search with an empty candidate list")
        gspans = extract_spans(normalize_to_bio2(gold))
        total_gold += len(gspans)
        stats = []
        for cand in row:
            spans = _candidate_spans(cand.collapsed)
            stats.append(
                (cand.score, cand.baseline_prob, len(spans & gspans), len(spans))
            )
        per_sentence.append(stats)

    best_alpha = None
    best_f1 = -1.0
    points = 0
    for alpha in ALPHA_GRID:
        points += 1
        tp = pred = 0
        for stats in per_sentence:
            pick = 0
            pick_v = None
            for i, (s, p, _, _) in enumerate(stats):
                v = alpha * s + (1.0 - alpha) * p
                if pick_v is None or v > pick_v:
                    pick, pick_v = i, v
            tp += stats[pick][2]
            pred += stats[pick][3]
        f1 = PrfCounts(tp, pred, total_gold).f1
        if f1 > best_f1:
            best_alpha, best_f1 = alpha, f1
    return AlphaSearchResult(alpha=best_alpha, f1=best_f1, points=points)


# ---------------------------------------------------------------------------
# training


def train_reranker(
    train_examples: list[RerankExample],
    dev: NBestCorpus,
    config: TrainConfig,
    *,
    pretrained: dict[str, np.ndarray] | None = None,
) -> RerankerBundle:
    """Mini-batch Adam over shuffled examples; after every epoch the dev set
    is rescored and alpha re-tuned, and the epoch with the best dev F1 wins
    (ties -> the earlier epoch; epoch 0 is the untrained model)."""
    if not train_examples:
        raise NerrankError("no training examples")
    if len(dev) == 0:
        raise NerrankError("empty dev corpus")
    if any(cs.gold is None for cs in dev.sets):
        raise NerrankError("dev corpus needs gold labels for model selection")

    token_lists = [ex.tokens for ex in train_examples]
    vocab = build_vocab(token_lists)
    longest = max(len(t) for tokens in token_lists for t in tokens)
    char_pad = min(config.char_pad_cap, longest)
    scorer = PatternScorer(
        vocab,
        config.scorer_config(char_pad),
        seed=config.seed,
        pretrained=pretrained,
    )
    adam = AdamState(
        [t for _, t in scorer.trainable()],
        lr=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
    )
    dev_golds = [cs.gold for cs in dev.sets]

    history: list[EpochEval] = []
    best: tuple[float, int, float, dict] | None = None

    def evaluate(epoch: int):
        nonlocal best
        result = alpha_search(score_sets(scorer, dev), dev_golds)
        history.append(EpochEval(epoch=epoch, alpha=result.alpha, dev_f1=result.f1))
        if best is None or result.f1 > best[0]:
            best = (result.f1, epoch, result.alpha, scorer.params.copy_arrays())

    evaluate(0)
    rng = np.random.default_rng([config.seed, SHUFFLE_STREAM])
    order = np.arange(len(train_examples))
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [train_examples[i] for i in order[start : start + config.batch_size]]
            scorer.params.zero_grad()
            loss = batch_loss(scorer, batch, config.l2, train=True)
            if not np.isfinite(loss.data).all():
                raise NerrankError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}"
                )
            backward(loss)
            adam.step()
        evaluate(epoch)

    scorer.params.load_arrays(best[3])
    return RerankerBundle(
        scorer=scorer, alpha=best[2], config=config, history=history
    )


# ---------------------------------------------------------------------------
# decoding


def rerank(bundle: RerankerBundle, nbest: NBestCorpus) -> list[LabelSeq]:
    """Mixture-select a candidate per sentence and return its label sequence."""
    scored = score_sets(bundle.scorer, nbest)
    predictions = []
    for (sentence, _), row in zip(nbest, scored):
        if not row:
            raise NerrankError(f"sentence {sentence.id}: no candidates to rerank")
        pick = mixture_select(row, bundle.alpha)
        predictions.append(collapsed_to_labels(row[pick].collapsed))
    return predictions


# ---------------------------------------------------------------------------
# persistence


def save_bundle(path, bundle: RerankerBundle, *, provenance: dict | None = None):
    """Write the bundle as a directory: weights plus a JSON description."""
    os.makedirs(path, exist_ok=True)
    save_checkpoint(os.path.join(path, WEIGHTS_FILE), bundle.scorer.params)
    meta = {
        "provenance": provenance or {},
        "alpha": bundle.alpha,
        "char_pad": bundle.scorer.config.char_pad,
        "config": asdict(bundle.config),
        "vocab": {
            "words": bundle.scorer.vocab.word_list(),
            "chars": bundle.scorer.vocab.char_list(),
        },
        "history": [asdict(h) for h in bundle.history],
    }
    with open(os.path.join(path, META_FILE), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_bundle(path) -> RerankerBundle:
    meta_path = os.path.join(path, META_FILE)
    if not os.path.exists(meta_path):
        raise NerrankError(f"{path} does not contain a reranker bundle")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    config = TrainConfig(**meta["config"])
    vocab = Vocab.from_lists(meta["vocab"]["words"], meta["vocab"]["chars"])
    scorer = PatternScorer(
        vocab, config.scorer_config(meta["char_pad"]), seed=config.seed
    )
    load_checkpoint(os.path.join(path, WEIGHTS_FILE), scorer.params)
    history = [EpochEval(**h) for h in meta["history"]]
    return RerankerBundle(
        scorer=scorer, alpha=meta["alpha"], config=config, history=history
    )
