"""Train on a deployed policy, decide new access requests, emit rules.

Two workflows share the same pipeline: augmentation (append the emitted
rules to the policy they were learned from) and adaptation (learn from a
reference organisation's policy and build a fresh policy for a target
organisation with a structurally similar catalog).
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .core import (AccessRequest, AttributeCatalog, NegativeMode, Outcome,
                   Policy, RequestLog, Rule, Sampled, covered_mask, negative_codes, DENY)
from .encoding import Encoder, EncoderConfig, build_dataset, class_table, fit_encoder
from .errors import AbacError, EmptyLog
from .learners import LearnerSpec, TrainedModel, predict_many, train
from .metrics import MetricsReport, compute_metrics, score

log = logging.getLogger(__name__)


class SkipReason(Enum):
    ALREADY_COVERED = "AlreadyCovered"


@dataclass(frozen=True)
class InferenceDecision:
    request: AccessRequest
    verdict: Outcome
    confidence: float


@dataclass(frozen=True)
class Pipeline:
    """A model trained on one policy plus the encoder that feeds it."""

    model: TrainedModel
    encoder: Encoder
    classes: tuple          # Outcome per model class index
    n_training_rows: int
    train_seconds: float = 0.0


@dataclass(frozen=True)
class InferenceRun:
    pipeline: Pipeline
    catalog: AttributeCatalog
    decisions: tuple
    emitted_rules: tuple
    skipped: tuple          # (request, SkipReason)
    metrics: Optional[MetricsReport] = None
    infer_seconds: float = 0.0

    @property
    def model(self) -> TrainedModel:
        return self.pipeline.model


def training_table(policy: Policy, neg_mode: NegativeMode) -> tuple:
    """(codes, outcome per row) for the grounded policy plus derived negatives."""
    g = policy.grounded
    neg = negative_codes(policy, neg_mode)
    if len(neg):
        # explicit Deny rules of the policy may coincide with derived negatives
        neg = neg[g.find(neg) < 0]
    codes = np.concatenate([g.codes, neg]) if len(neg) else g.codes
    outcomes = [g.outcomes[i] for i in g.outcome_ids.tolist()] + [DENY] * len(neg)
    return codes, outcomes


def fit_pipeline(policy: Policy, spec: LearnerSpec, config: EncoderConfig,
                 neg_mode: NegativeMode = Sampled(), catalog: Optional[AttributeCatalog] = None,
                 backend=None) -> Pipeline:
    """Ground, add negatives, encode and train.

    ``catalog`` is the (possibly extended) catalog the encoder is fitted on;
    it has to extend the policy catalog, so training codes stay valid.
    """
    catalog = catalog or policy.catalog
    if not policy.catalog.is_prefix_of(catalog):
        raise AbacError("encoder catalog does not extend the policy catalog")
    encoder = fit_encoder(catalog, config)
    codes, outcomes = training_table(policy, neg_mode)
    classes = class_table(outcomes)
    index = {o: k for k, o in enumerate(classes)}
    labels = np.array([index[o] for o in outcomes], dtype=np.int64)
    data = build_dataset(encoder, codes, labels, classes)
    t0 = time.perf_counter()
    model = train(spec, data, backend=backend)
    return Pipeline(model, encoder, classes, len(data), time.perf_counter() - t0)


def classify(pipeline: Pipeline, codes: np.ndarray, backend=None) -> tuple:
    """(outcomes, confidences) for catalog-code rows."""
    if len(codes) == 0:
        return [], np.empty(0)
    X = pipeline.encoder.transform(codes)
    labels, proba = predict_many(pipeline.model, X, backend)
    conf = proba[np.arange(len(labels)), labels]
    return [pipeline.classes[k] for k in labels.tolist()], conf


def _emit(decisions: Sequence[InferenceDecision]) -> tuple:
    seen = {}
    for d in decisions:
        seen.setdefault(d.request.values, Rule.of(d.request.values, d.verdict))
    return tuple(seen.values())


def classify_log(policy: Policy, log_: RequestLog, pipeline: Pipeline, strict_metrics=False,
                 backend=None) -> InferenceRun:
    if len(log_) == 0:
        raise EmptyLog("request log is empty")
    t0 = time.perf_counter()
    covered = covered_mask(policy, log_)
    todo = np.flatnonzero(~covered)
    outcomes, conf = classify(pipeline, log_.codes[todo], backend)
    decisions = tuple(InferenceDecision(log_.requests[i], o, float(c))
                      for i, o, c in zip(todo.tolist(), outcomes, conf.tolist()))
    elapsed = time.perf_counter() - t0
    skipped = tuple((log_.requests[i], SkipReason.ALREADY_COVERED)
                    for i in np.flatnonzero(covered).tolist())
    metrics = None
    if decisions and all(d.request.truth is not None for d in decisions):
        metrics = compute_metrics(score(decisions, strict=strict_metrics))
    return InferenceRun(pipeline, log_.catalog, decisions, _emit(decisions), skipped, metrics,
                        elapsed)


def solve_abac_pip(policy: Policy, log_: RequestLog, spec: LearnerSpec, config: EncoderConfig,
                   neg_mode: NegativeMode = Sampled(), strict_metrics: bool = False,
                   backend=None) -> InferenceRun:
    """Decide every request of ``log_`` not already decided by ``policy``.

    The log's catalog may extend the policy catalog with new values; the
    encoder is fitted on the log catalog so new values get codes (and, under
    AVC, cluster positions) before training.
    """
    if len(log_) == 0:
        raise EmptyLog("request log is empty")
    pipeline = fit_pipeline(policy, spec, config, neg_mode, log_.catalog, backend)
    return classify_log(policy, log_, pipeline, strict_metrics, backend)


def augment_policy(policy: Policy, run: InferenceRun) -> Policy:
    """Policy plus the run's emitted rules (exact duplicates dropped)."""
    catalog = run.catalog if policy.catalog.is_prefix_of(run.catalog) else policy.catalog
    existing = set(policy.rules)
    extra = tuple(r for r in run.emitted_rules if r not in existing)
    if not extra and catalog == policy.catalog:
        return policy
    perms = policy.permission_universe.union(*(r.permissions for r in extra))
    out = Policy(catalog, policy.rules + extra, perms)
    out.grounded  # raises ConsistencyViolation on conflicts
    return out


def adapt_with_run(reference: Policy, target_log: RequestLog, additions: Sequence[tuple],
                   spec: LearnerSpec, config: EncoderConfig,
                   neg_mode: NegativeMode = Sampled(), strict_metrics: bool = False,
                   backend=None) -> tuple:
    target_catalog = reference.catalog.extend(additions)
    if target_log.catalog != target_catalog:
        if not target_catalog.is_prefix_of(target_log.catalog):
            raise AbacError("target log catalog is not the reference catalog plus additions")
        target_catalog = target_log.catalog
    run = solve_abac_pip(reference, target_log, spec, config, neg_mode, strict_metrics, backend)
    target = Policy(target_catalog, run.emitted_rules, reference.permission_universe)
    target.grounded
    return target, run


def adapt_policy(reference: Policy, target_log: RequestLog, additions: Sequence[tuple],
                 spec: LearnerSpec, config: EncoderConfig,
                 neg_mode: NegativeMode = Sampled(), backend=None) -> Policy:
    """Target policy holding only the rules decided for the target's requests."""
    return adapt_with_run(reference, target_log, additions, spec, config, neg_mode,
                          backend=backend)[0]


REPORT_HEADER = ["request-id", "verdict", "permissions", "confidence", "skipped-reason"]


def write_run_report(run: InferenceRun, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for d in run.decisions:
            w.writerow([d.request.request_id, d.verdict.decision.value,
                        ";".join(sorted(d.verdict.permissions)), f"{d.confidence:.6f}", ""])
        for q, reason in run.skipped:
            w.writerow([q.request_id, "", "", "", reason.value])
