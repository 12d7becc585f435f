"""Confusion counts and the accuracy / precision / recall / F1 report.

All metrics are exact ``Fraction`` values; rounding happens only when a
report is rendered.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .core import Decision
from .errors import EmptyCounts, MissingTruth

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
SHORT_NAMES = {"accuracy": "Acc", "precision": "Pr", "recall": "Rec", "f1": "F1-s"}


@dataclass(frozen=True)
class ConfusionCounts:
    tpa: int = 0
    tna: int = 0
    fpa: int = 0
    fna: int = 0

    def __post_init__(self):
        for name in ("tpa", "tna", "fpa", "fna"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")

    @property
    def total(self) -> int:
        return self.tpa + self.tna + self.fpa + self.fna

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tpa + other.tpa, self.tna + other.tna,
                               self.fpa + other.fpa, self.fna + other.fna)


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: Fraction
    precision: Fraction
    recall: Fraction
    f1: Fraction
    # metrics whose denominator was zero and were set to 0
    zero_division: frozenset = frozenset()

    def rounded(self, ndigits: int = 3) -> dict:
        return {m: float(round(getattr(self, m), ndigits)) for m in METRIC_NAMES}

    def formatted(self, ndigits: int = 3) -> dict:
        return {m: f"{v:.{ndigits}f}" for m, v in self.rounded(ndigits).items()}


def _ratio(num: int, den: int):
    return (Fraction(num, den), False) if den else (Fraction(0), True)


def compute_metrics(counts: ConfusionCounts) -> MetricsReport:
    c = counts
    if c.total == 0:
        raise EmptyCounts("no scored decisions")
    accuracy = Fraction(c.tpa + c.tna, c.total)
    precision, p0 = _ratio(c.tpa, c.tpa + c.fpa)
    recall, r0 = _ratio(c.tpa, c.tpa + c.fna)
    if precision + recall:
        f1, f0 = 2 * precision * recall / (precision + recall), False
    else:
        f1, f0 = Fraction(0), True
    flags = frozenset(n for n, hit in (("precision", p0), ("recall", r0), ("f1", f0)) if hit)
    return MetricsReport(counts, accuracy, precision, recall, f1, flags)


def _pair(item) -> tuple:
    if isinstance(item, tuple):
        return item
    return item.verdict, item.request.truth


def score(decisions: Iterable, strict: bool = False) -> ConfusionCounts:
    """Tally decisions against their truth labels.

    Items are ``InferenceDecision`` objects or ``(predicted, truth)`` outcome
    pairs.  Grant versus Deny decides the cell.  With ``strict`` a Grant whose
    permission set differs from the true one counts as a false positive.
    """
    tpa = tna = fpa = fna = 0
    for item in decisions:
        pred, truth = _pair(item)
        if truth is None:
            raise MissingTruth("decision without a truth label")
        pos_pred = pred.decision is Decision.GRANT
        pos_true = truth.decision is Decision.GRANT
        if pos_pred and pos_true:
            if strict and pred.permissions != truth.permissions:
                fpa += 1
            else:
                tpa += 1
        elif pos_pred:
            fpa += 1
        elif pos_true:
            fna += 1
        else:
            tna += 1
    return ConfusionCounts(tpa, tna, fpa, fna)


# -- reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    dataset: str
    strategy: str
    learner: str
    report: MetricsReport
    train_seconds: float = 0.0
    infer_seconds: float = 0.0


RESULT_HEADER = ["dataset", "strategy", "learner", "tpa", "tna", "fpa", "fna",
                 "accuracy", "precision", "recall", "f1"]


def write_results_csv(rows: Sequence[ResultRow], path, ndigits: int = 3) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in rows:
            c = r.report.counts
            w.writerow([r.dataset, r.strategy, r.learner, c.tpa, c.tna, c.fpa, c.fna]
                       + list(r.report.formatted(ndigits).values()))


def write_timings_csv(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "strategy", "learner", "train_seconds", "infer_seconds"])
        for r in rows:
            w.writerow([r.dataset, r.strategy, r.learner,
                        f"{r.train_seconds:.3f}", f"{r.infer_seconds:.3f}"])


def format_table(rows: Sequence[ResultRow], ndigits: int = 3) -> str:
    """Learner rows by strategy column groups of Acc / Pr / Rec / F1-s."""
    datasets = list(dict.fromkeys(r.dataset for r in rows))
    out = []
    for ds in datasets:
        sub = [r for r in rows if r.dataset == ds]
        strategies = list(dict.fromkeys(r.strategy for r in sub))
        learners = list(dict.fromkeys(r.learner for r in sub))
        cell = {(r.strategy, r.learner): r.report.formatted(ndigits) for r in sub}
        width = ndigits + 2
        group = len(METRIC_NAMES) * (width + 1) - 1
        out.append(f"Results: {ds}")
        out.append("Clfr | " + " | ".join(s.center(group) for s in strategies))
        metric_row = " ".join(SHORT_NAMES[m].rjust(width) for m in METRIC_NAMES)
        out.append("     | " + " | ".join(metric_row for _ in strategies))
        out.append("-" * len(out[-1]))
        for lr in learners:
            parts = []
            for s in strategies:
                vals = cell.get((s, lr))
                parts.append(" ".join((vals[m] if vals else "-").rjust(width)
                                      for m in METRIC_NAMES))
            out.append(f"{lr:<4} | " + " | ".join(parts))
        out.append("")
    return "\n".join(out)
