"""Native tree learners: decision tree, random forest, extra trees, gradient boosting."""

from ._kernels import available_backends, get_backend
from .models import (ENSEMBLES, LearnerKind, LearnerSpec, TrainedModel, default_spec,
                     gini, predict, predict_many, predict_proba, train)
from .serialize import load_model, save_model
from .tree import Leaf, Split, Tree

__all__ = [
    "ENSEMBLES", "LearnerKind", "LearnerSpec", "TrainedModel", "Leaf", "Split", "Tree",
    "available_backends", "default_spec", "get_backend", "gini", "load_model", "predict",
    "predict_many", "predict_proba", "save_model", "train",
]
