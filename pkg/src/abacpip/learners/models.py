"""Learner specs, the four tree learners, and prediction."""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..encoding import EncodedDataset
from ..errors import AbacError, EmptyPartition, FormatError, WidthMismatch
from ._kernels import Backend, get_backend
from .tree import grow_classifier, grow_regressor

_NO_LIMIT = 2**31


class LearnerKind(Enum):
    DECISION_TREE = "dt"
    RANDOM_FOREST = "rf"
    EXTRA_TREES = "et"
    GRADIENT_BOOSTING = "gb"

    @classmethod
    def parse(cls, text: Union[str, "LearnerKind"]) -> "LearnerKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        aliases = {"dt": "dt", "decisiontree": "dt", "rf": "rf", "randomforest": "rf",
                   "et": "et", "extratrees": "et", "gb": "gb", "gradientboosting": "gb"}
        if key not in aliases:
            raise ValueError(f"unknown learner {text!r}")
        return cls(aliases[key])

    @property
    def label(self) -> str:
        return self.value.upper()


ENSEMBLES = (LearnerKind.RANDOM_FOREST, LearnerKind.EXTRA_TREES, LearnerKind.GRADIENT_BOOSTING)


@dataclass(frozen=True)
class LearnerSpec:
    kind: LearnerKind
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    n_trees: int = 100
    feature_subsample: Union[str, float] = "sqrt"
    learning_rate: float = 0.1
    n_stages: int = 100
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LearnerKind.parse(self.kind))
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        if self.n_trees < 1 or self.n_stages < 1:
            raise ValueError("n_trees and n_stages must be positive")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        fs = self.feature_subsample
        if isinstance(fs, str):
            if fs != "sqrt":
                object.__setattr__(self, "feature_subsample", float(fs))
        if not isinstance(self.feature_subsample, str) and not 0 < self.feature_subsample <= 1:
            raise ValueError("feature_subsample must be 'sqrt' or a fraction in (0, 1]")
        if self.kind in ENSEMBLES and self.seed is None:
            raise ValueError(f"{self.kind.name} needs an explicit seed")
        if self.seed is not None and not 0 <= self.seed < 2**63:
            raise ValueError("seed must be a non-negative 63-bit integer")

    @property
    def depth_limit(self) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return 3 if self.kind is LearnerKind.GRADIENT_BOOSTING else _NO_LIMIT

    def mtry(self, n_features: int) -> int:
        if self.kind not in (LearnerKind.RANDOM_FOREST, LearnerKind.EXTRA_TREES):
            return n_features
        if self.feature_subsample == "sqrt":
            return max(1, int(math.isqrt(n_features)))
        return max(1, int(self.feature_subsample * n_features))

    def to_mapping(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, LearnerKind) else v
        return out

    @classmethod
    def from_mapping(cls, items) -> "LearnerSpec":
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, raw in dict(items).items():
            key = key.strip().lower()
            if key not in known:
                raise FormatError(f"unknown learner option {key!r}")
            if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
                kw[key] = None
                continue
            if key in ("max_depth", "min_samples_split", "n_trees", "n_stages", "seed"):
                kw[key] = int(raw)
            elif key == "learning_rate":
                kw[key] = float(raw)
            elif key == "feature_subsample":
                kw[key] = raw if raw == "sqrt" else float(raw)
            else:
                kw[key] = raw
        if "kind" not in kw:
            raise FormatError("learner config needs a 'kind'")
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"invalid learner config: {exc}") from None

    @classmethod
    def from_config(cls, path) -> "LearnerSpec":
        """Read ``key = value`` lines (``#`` comments allowed)."""
        text = Path(path).read_text(encoding="utf-8")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            parser.read_string("[learner]\n" + text)
        except configparser.Error as exc:
            raise FormatError(f"{path}: {exc}") from None
        return cls.from_mapping(parser["learner"])

    def with_seed(self, seed: Optional[int]) -> "LearnerSpec":
        return replace(self, seed=seed)


def default_spec(kind, seed: Optional[int] = 0) -> LearnerSpec:
    kind = LearnerKind.parse(kind)
    return LearnerSpec(kind, seed=seed if kind in ENSEMBLES else None)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """``classes`` maps the model's internal class slots to dataset class indices."""

    spec: LearnerSpec
    class_names: tuple
    n_features: int
    classes: np.ndarray
    trees: tuple
    init_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    degenerate: bool = False

    @property
    def kind(self) -> LearnerKind:
        return self.spec.kind

    def same_as(self, other: "TrainedModel") -> bool:
        return (self.spec == other.spec and self.class_names == other.class_names
                and self.n_features == other.n_features and self.degenerate == other.degenerate
                and np.array_equal(self.classes, other.classes)
                and np.array_equal(self.init_scores, other.init_scores)
                and len(self.trees) == len(other.trees)
                and all(a.same_as(b) for a, b in zip(self.trees, other.trees)))


def gini(counts: Sequence[int]) -> float:
    c = np.asarray(counts, dtype=np.float64)
    if (c < 0).any():
        raise ValueError("label counts must be non-negative")
    total = c.sum()
    if total == 0:
        raise EmptyPartition("gini of an empty partition")
    p = c / total
    return float(1.0 - (p * p).sum())


def _tree_seeds(seed: int, n: int) -> list:
    return np.random.SeedSequence(seed).spawn(n)


def train(spec: LearnerSpec, data: EncodedDataset, backend: Union[str, Backend, None] = None
          ) -> TrainedModel:
    backend = get_backend(backend)
    X = np.ascontiguousarray(data.X, dtype=np.int64)
    n, n_feat = X.shape
    if n == 0:
        raise AbacError("cannot train on an empty dataset")
    if (X < 0).any():
        raise ValueError("feature codes must be non-negative")
    present, y = np.unique(data.y, return_inverse=True)
    y = y.ravel().astype(np.int64)
    K = len(present)
    common = dict(spec=spec, class_names=tuple(data.class_names), n_features=n_feat,
                  classes=present.astype(np.int64))
    if K == 1:
        warnings.warn(f"only class {data.class_names[present[0]]!r} present; "
                      "returning a constant model", RuntimeWarning, stacklevel=2)
        return TrainedModel(trees=(), degenerate=True, **common)

    XT = np.ascontiguousarray(X.T)
    max_codes = X.max(axis=0).astype(np.int64)
    depth = spec.depth_limit
    kind = spec.kind

    if kind is LearnerKind.GRADIENT_BOOSTING:
        trees, init = _train_gb(spec, backend, XT, y, K, max_codes)
        return TrainedModel(trees=trees, init_scores=init, **common)

    mtry = spec.mtry(n_feat)
    if kind is LearnerKind.DECISION_TREE:
        tree = grow_classifier(backend, XT, y, np.ones(n), np.arange(n, dtype=np.int64), K,
                               max_codes, depth, spec.min_samples_split, mtry, False, 0)
        return TrainedModel(trees=(tree,), **common)

    trees = []
    for child in _tree_seeds(spec.seed, spec.n_trees):
        tree_seed = int(child.generate_state(1, dtype=np.uint64)[0])
        if kind is LearnerKind.RANDOM_FOREST:
            rng = np.random.default_rng(child)
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
            idx = np.flatnonzero(w > 0).astype(np.int64)
        else:
            w, idx = np.ones(n), np.arange(n, dtype=np.int64)
        trees.append(grow_classifier(backend, XT, y, w, idx, K, max_codes, depth,
                                     spec.min_samples_split, mtry,
                                     kind is LearnerKind.EXTRA_TREES, tree_seed))
    return TrainedModel(trees=tuple(trees), **common)


def _softmax(F):
    z = np.exp(F - F.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def _train_gb(spec, backend, XT, y, K, max_codes):
    """Multinomial deviance boosting: K regression trees per stage."""
    n = XT.shape[1]
    prior = np.bincount(y, minlength=K) / n
    init = np.log(prior)
    F = np.tile(init, (n, 1))
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0
    idx = np.arange(n, dtype=np.int64)
    scale = (K - 1) / K
    trees = []
    for _ in range(spec.n_stages):
        P = _softmax(F)
        step = np.empty_like(F)
        for k in range(K):
            r = Y[:, k] - P[:, k]
            hess = np.abs(r) * (1.0 - np.abs(r))
            tree, per_row = grow_regressor(backend, XT, r, hess, idx, max_codes,
                                           spec.depth_limit, spec.min_samples_split, scale)
            trees.append(tree)
            step[:, k] = per_row
        F += spec.learning_rate * step
    return tuple(trees), init


def _check_width(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.int64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise WidthMismatch(f"expected {model.n_features} features, got {X.shape[-1]}")
    return X


def predict_proba(model: TrainedModel, X, backend: Union[str, Backend, None] = None) -> np.ndarray:
    """Per-class probabilities over the full class list of the training data."""
    backend = get_backend(backend)
    X = _check_width(model, X)
    n = len(X)
    K = len(model.classes)
    inner = np.zeros((n, K))
    kind = model.kind
    if model.degenerate:
        inner[:, 0] = 1.0
    elif kind is LearnerKind.DECISION_TREE:
        tree = model.trees[0]
        inner = tree.value[tree.apply(X, backend)]
    elif kind is LearnerKind.GRADIENT_BOOSTING:
        F = np.tile(model.init_scores, (n, 1))
        lr = model.spec.learning_rate
        for s in range(0, len(model.trees), K):
            step = np.empty((n, K))
            for k in range(K):
                tree = model.trees[s + k]
                step[:, k] = tree.value[tree.apply(X, backend)]
            F += lr * step
        inner = _softmax(F)
    else:
        votes = np.zeros((n, K))
        rows = np.arange(n)
        for tree in model.trees:
            votes[rows, np.argmax(tree.value[tree.apply(X, backend)], axis=1)] += 1.0
        inner = votes / len(model.trees)
    out = np.zeros((n, len(model.class_names)))
    out[:, model.classes] = inner
    return out


def predict_many(model: TrainedModel, X, backend=None) -> tuple:
    """(class indices, probability matrix); ties go to the lowest class index."""
    proba = predict_proba(model, X, backend)
    return np.argmax(proba, axis=1).astype(np.int64), proba


def predict(model: TrainedModel, row: Sequence[int], backend=None) -> tuple:
    row = np.asarray(row, dtype=np.int64)
    if row.ndim != 1 or len(row) != model.n_features:
        raise WidthMismatch(f"expected {model.n_features} features, got {row.size}")
    labels, proba = predict_many(model, row[None, :], backend)
    return int(labels[0]), [float(p) for p in proba[0]]
