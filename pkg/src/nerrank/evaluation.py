"""Measurement: span precision/recall/F1, sentence-selection accuracy,
oracle curves over n-best lists, and sentence-length breakdowns.

A predicted span counts as a true positive only when an identical
(start, end, type) span exists in gold — conlleval-style exact matching.
Label sequences are normalized before span extraction, so raw decoder
output with stray I- tags is scored the same way conlleval would score it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .baseline.nbest import NBestCorpus
from .corpus import (
    ENTITY_TYPES,
    LabelSeq,
    extract_spans,
    normalize_to_bio2,
    tag_accuracy,
)
from .errors import NerrankError


@dataclass(frozen=True)
class PrfCounts:
    """True-positive / predicted / gold span counts and their ratios."""

    tp: int
    pred: int
    gold: int

    def __post_init__(self):
        if min(self.tp, self.pred, self.gold) < 0:
            raise NerrankError("span counts cannot be negative")
        if self.tp > min(self.pred, self.gold):
            raise NerrankError(
                f"tp={self.tp} exceeds pred={self.pred} or gold={self.gold}"
            )

    @property
    def precision(self) -> float:
        return self.tp / self.pred if self.pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class PrfReport:
    """Overall counts plus a per-entity-type breakdown."""

    overall: PrfCounts
    by_type: dict[str, PrfCounts]

    @property
    def precision(self) -> float:
        return self.overall.precision

    @property
    def recall(self) -> float:
        return self.overall.recall

    @property
    def f1(self) -> float:
        return self.overall.f1


@dataclass(frozen=True)
class OracleRow:
    n: int
    oba: float
    obf: float
    owf: float


@dataclass(frozen=True)
class OracleReport:
    """Oracle curves per truncation depth n.

    Decoder-generated n-best corpora give non-decreasing OBA/OBF and
    non-increasing OWF; arbitrary hand-built candidate sets need not.
    """

    rows: list[OracleRow]

    def row(self, n: int) -> OracleRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(f"no oracle row for n={n}")


@dataclass(frozen=True)
class BucketRow:
    """Sentences of length in (upper - width, upper]."""

    upper: int
    total: int
    correct: int

    @property
    def ssa(self) -> float:
        return self.correct / self.total if self.total else 0.0


def _check_aligned(gold: list[LabelSeq], pred: list[LabelSeq]):
    if len(gold) != len(pred):
        raise NerrankError(
            f"corpus misalignment: {len(gold)} gold vs {len(pred)} predicted sentences"
        )
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise NerrankError(
                f"sentence {i}: gold has {len(g)} tokens, prediction has {len(p)}"
            )


def chunk_prf(
    gold: list[LabelSeq],
    pred: list[LabelSeq],
    type_filter: str | None = None,
) -> PrfReport:
    """Exact span-match precision/recall/F1 over aligned corpora.

    With ``type_filter`` both sides are restricted to spans of that type
    (the report's overall numbers then equal that type's numbers).
    """
    _check_aligned(gold, pred)
    types = (type_filter,) if type_filter else ENTITY_TYPES
    tp = {t: 0 for t in types}
    n_pred = {t: 0 for t in types}
    n_gold = {t: 0 for t in types}
    for g, p in zip(gold, pred):
        gspans = extract_spans(normalize_to_bio2(g))
        pspans = extract_spans(normalize_to_bio2(p))
        for t in types:
            gt = {s for s in gspans if s.entity_type == t}
            pt = {s for s in pspans if s.entity_type == t}
            tp[t] += len(gt & pt)
            n_gold[t] += len(gt)
            n_pred[t] += len(pt)
    by_type = {t: PrfCounts(tp[t], n_pred[t], n_gold[t]) for t in types}
    overall = PrfCounts(
        sum(tp.values()), sum(n_pred.values()), sum(n_gold.values())
    )
    return PrfReport(overall=overall, by_type=by_type)


def ssa(selections: list[LabelSeq], gold: list[LabelSeq]) -> float:
    """Fraction of sentences whose whole selected sequence equals gold
    (after normalization); 0.0 for an empty corpus."""
    _check_aligned(gold, selections)
    if not gold:
        return 0.0
    correct = sum(
        normalize_to_bio2(s) == normalize_to_bio2(g)
        for s, g in zip(selections, gold)
    )
    return correct / len(gold)


def oracle(nbest: NBestCorpus, n_max: int | None = None) -> OracleReport:
    """Oracle curves: for each n, pick per sentence the candidate among the
    top n with the highest (OBA/OBF) or lowest (OWF) tag accuracy against
    gold, ties going to the lower index, and measure the selections."""
    if any(cs.gold is None for cs in nbest.sets):
        raise NerrankError("oracle curves need gold labels on every sentence")
    per_sentence = []
    for cs in nbest.sets:
        gold = normalize_to_bio2(cs.gold)
        gspans = extract_spans(gold)
        cands = []
        for labels, _ in cs.candidates:
            norm = normalize_to_bio2(labels)
            spans = extract_spans(norm)
            cands.append(
                (tag_accuracy(gold, norm), len(spans & gspans), len(spans))
            )
        per_sentence.append((len(gspans), cands))

    kmax = max(len(cands) for _, cands in per_sentence)
    depth = min(n_max, kmax) if n_max is not None else kmax
    best = [0] * len(per_sentence)  # per-sentence argmax index so far
    worst = [0] * len(per_sentence)
    rows = []
    for n in range(1, depth + 1):
        tp_b = pred_b = tp_w = pred_w = total_gold = exact = 0
        for s, (n_gold, cands) in enumerate(per_sentence):
            if n - 1 < len(cands):
                if cands[n - 1][0] > cands[best[s]][0]:
                    best[s] = n - 1
                if cands[n - 1][0] < cands[worst[s]][0]:
                    worst[s] = n - 1
            acc, tp, pred = cands[best[s]]
            tp_b += tp
            pred_b += pred
            exact += acc == 1.0
            _, tp, pred = cands[worst[s]]
            tp_w += tp
            pred_w += pred
            total_gold += n_gold
        rows.append(
            OracleRow(
                n=n,
                oba=exact / len(per_sentence),
                obf=PrfCounts(tp_b, pred_b, total_gold).f1,
                owf=PrfCounts(tp_w, pred_w, total_gold).f1,
            )
        )
    return OracleReport(rows)


def length_bucket_ssa(
    selections: list[LabelSeq],
    gold: list[LabelSeq],
    bucket_width: int = 5,
) -> list[BucketRow]:
    """Sentence-selection accuracy per length bucket (low, high], labeled
    by the upper bound; buckets with no sentences are omitted."""
    if bucket_width < 1:
        raise NerrankError(f"bucket width must be positive, got {bucket_width}")
    _check_aligned(gold, selections)
    totals: dict[int, int] = {}
    correct: dict[int, int] = {}
    for s, g in zip(selections, gold):
        upper = -(-len(g) // bucket_width) * bucket_width
        totals[upper] = totals.get(upper, 0) + 1
        if normalize_to_bio2(s) == normalize_to_bio2(g):
            correct[upper] = correct.get(upper, 0) + 1
    return [
        BucketRow(upper=u, total=totals[u], correct=correct.get(u, 0))
        for u in sorted(totals)
    ]


# ---------------------------------------------------------------------------
# report serialization


def format_metrics(values: dict) -> str:
    """Flat ``key = value`` lines, keys in the given order."""
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def write_metrics(path, values: dict, header: str | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        fh.write(format_metrics(values))


def prf_csv(report: PrfReport) -> str:
    lines = ["type,tp,pred,gold,precision,recall,f1"]
    rows = [("ALL", report.overall)] + sorted(report.by_type.items())
    for name, c in rows:
        lines.append(
            f"{name},{c.tp},{c.pred},{c.gold},{c.precision!r},{c.recall!r},{c.f1!r}"
        )
    return "\n".join(lines) + "\n"


def oracle_csv(report: OracleReport) -> str:
    lines = ["n,oba,obf,owf"]
    for r in report.rows:
        lines.append(f"{r.n},{r.oba!r},{r.obf!r},{r.owf!r}")
    return "\n".join(lines) + "\n"


def bucket_csv(rows: list[BucketRow]) -> str:
    lines = ["bucket,total,correct,ssa"]
    for r in rows:
        lines.append(f"{r.upper},{r.total},{r.correct},{r.ssa!r}")
    return "\n".join(lines) + "\n"
