"""Confusion counting, precision/recall/F1, abstract-level aggregation,
and bootstrap confidence intervals.

The task is binary: class 1 = positive association, class 0 =
negative/neutral. Reports always carry all three averaging modes
(positive-class, macro, micro) so the choice is auditable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import Corpus
from .preprocess import Level, encode_labels
from .train import PredictionRecord


class EvalError(Exception):
    pass


class MissingGold(EvalError):
    pass


class DuplicatePrediction(EvalError):
    pass


class Averaging(str, Enum):
    POSITIVE_CLASS = "POSITIVE_CLASS"
    MACRO = "MACRO"
    MICRO = "MICRO"


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionCounts":
        """The class-0 view of the same predictions."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def confusion(
    preds: list[PredictionRecord], golds: dict[str, int]
) -> ConfusionCounts:
    """Exact counts by enumeration, order-invariant. Class 1 is positive."""
    seen: set[str] = set()
    c = ConfusionCounts()
    for p in preds:
        if p.candidate_ref in seen:
            raise DuplicatePrediction(p.candidate_ref)
        seen.add(p.candidate_ref)
        if p.candidate_ref not in golds:
            raise MissingGold(p.candidate_ref)
        gold = golds[p.candidate_ref]
        if p.class_id == 1 and gold == 1:
            c.tp += 1
        elif p.class_id == 1 and gold == 0:
            c.fp += 1
        elif p.class_id == 0 and gold == 1:
            c.fn += 1
        else:
            c.tn += 1
    return c


def precision(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0


def recall(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0


def f1(c: ConfusionCounts) -> float:
    p, r = precision(c), recall(c)
    return 2 * p * r / (p + r) if p + r else 0.0


def prf_with_flags(c: ConfusionCounts, tag: str = "") -> tuple[float, float, float, set[str]]:
    """P/R/F1 with the 0/0 -> 0.0 convention made explicit via flags."""
    flags = set()
    if c.tp + c.fp == 0:
        flags.add(f"{tag}precision_undefined")
    if c.tp + c.fn == 0:
        flags.add(f"{tag}recall_undefined")
    p, r = precision(c), recall(c)
    if p + r == 0:
        flags.add(f"{tag}f1_undefined")
    return p, r, f1(c), flags


@dataclass
class MetricsReport:
    level: Level
    averaging: Averaging
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    n_instances: int
    undefined_flags: set[str] = field(default_factory=set)
    all_modes: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def to_json(self, **extra) -> str:
        obj = {
            "level": self.level.value,
            "averaging": self.averaging.value,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp,
                       "fn": self.counts.fn, "tn": self.counts.tn},
            "n_instances": self.n_instances,
            "undefined_flags": sorted(self.undefined_flags),
            "all_modes": {k: {"precision": v[0], "recall": v[1], "f1": v[2]}
                          for k, v in sorted(self.all_modes.items())},
        }
        obj.update(extra)
        return json.dumps(obj, indent=2, sort_keys=True)

    def to_csv_line(self) -> str:
        return ",".join([
            self.level.value, self.averaging.value,
            f"{self.precision:.6f}", f"{self.recall:.6f}", f"{self.f1:.6f}",
            str(self.n_instances),
        ])


def evaluate(
    preds: list[PredictionRecord],
    golds: dict[str, int],
    level: Level = Level.SENTENCE,
    averaging: Averaging = Averaging.MACRO,
) -> MetricsReport:
    """Score predictions against gold class ids. All three averaging modes
    are computed; the requested one populates the headline fields."""
    c = confusion(preds, golds)
    p1, r1, f1_1, flags1 = prf_with_flags(c, "pos_")
    c0 = c.swapped()
    p0, r0, f1_0, flags0 = prf_with_flags(c0, "neg_")
    macro = ((p1 + p0) / 2, (r1 + r0) / 2, (f1_1 + f1_0) / 2)
    # single-label binary micro: P = R = F1 = accuracy
    acc = (c.tp + c.tn) / c.total if c.total else 0.0
    modes = {
        Averaging.POSITIVE_CLASS.value: (p1, r1, f1_1),
        Averaging.MACRO.value: macro,
        Averaging.MICRO.value: (acc, acc, acc),
    }
    p, r, f = modes[averaging.value]
    return MetricsReport(
        level=level, averaging=averaging, precision=p, recall=r, f1=f,
        counts=c, n_instances=c.total,
        undefined_flags=flags1 | flags0, all_modes=modes,
    )


def _pair_key(doc_id: str, snp, pheno) -> str:
    snp_key = (snp.normalized or snp.surface).lower()
    pheno_key = (pheno.normalized or pheno.surface).lower()
    return f"{doc_id}|{snp_key}|{pheno_key}"


def aggregate_to_abstract(
    sentence_preds: list[PredictionRecord], corpus: Corpus
) -> tuple[list[PredictionRecord], dict[str, int]]:
    """Group sentence-level candidates to document-level pairs keyed by
    (document, normalized SNP, normalized phenotype) under the ANY-POSITIVE
    rule, for predictions and gold labels alike."""
    pred_by_ref = {p.candidate_ref: p for p in sentence_preds}
    grouped_pred: dict[str, int] = {}
    grouped_prob1: dict[str, float] = {}
    grouped_gold: dict[str, int] = {}
    for doc, sent, pair in corpus.iter_candidates():
        if pair.id not in pred_by_ref:
            continue
        snp = sent.mention_by_id(pair.snp_ref)
        pheno = sent.mention_by_id(pair.pheno_ref)
        key = _pair_key(doc.id, snp, pheno)
        pred = pred_by_ref[pair.id]
        grouped_pred[key] = max(grouped_pred.get(key, 0), pred.class_id)
        grouped_prob1[key] = max(grouped_prob1.get(key, 0.0), pred.probs[1])
        grouped_gold[key] = max(grouped_gold.get(key, 0), encode_labels(pair.label))
    abstract_preds = [
        PredictionRecord(key, cls, (1.0 - grouped_prob1[key], grouped_prob1[key]))
        for key, cls in grouped_pred.items()
    ]
    return abstract_preds, grouped_gold


def bootstrap_ci(
    preds: list[PredictionRecord],
    golds: dict[str, int],
    metric=f1,
    n_resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap (2.5/97.5) over instance-level resampling with
    replacement; deterministic given the seed."""
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    for p in preds:
        if p.candidate_ref not in golds:
            raise MissingGold(p.candidate_ref)
    rng = np.random.default_rng(seed)
    n = len(preds)
    values = np.empty(n_resamples)
    pred_cls = np.array([p.class_id for p in preds])
    gold_cls = np.array([golds[p.candidate_ref] for p in preds])
    for i in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        pc, gc = pred_cls[idx], gold_cls[idx]
        c = ConfusionCounts(
            tp=int(np.sum((pc == 1) & (gc == 1))),
            fp=int(np.sum((pc == 1) & (gc == 0))),
            fn=int(np.sum((pc == 0) & (gc == 1))),
            tn=int(np.sum((pc == 0) & (gc == 0))),
        )
        values[i] = metric(c)
    return float(np.percentile(values, 2.5)), float(np.percentile(values, 97.5))


def gold_labels(corpus: Corpus) -> dict[str, int]:
    """Candidate id -> merged binary class id over a corpus."""
    return {pair.id: encode_labels(pair.label) for _, _, pair in corpus.iter_candidates()}
