"""Flattened tree representation and single-tree growth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ._kernels import Backend


@dataclass(frozen=True)
class Leaf:
    class_index: int
    probabilities: tuple


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: int
    left: int
    right: int


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True, eq=False)
class Tree:
    """Parallel node arrays; ``feature[i] < 0`` marks a leaf.

    ``value`` is (n_nodes, n_classes) leaf class frequencies for
    classification trees and (n_nodes,) leaf outputs for regression trees.
    Internal nodes carry zeros.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):  # children always follow their parent
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def node(self, i: int) -> TreeNode:
        if self.feature[i] >= 0:
            return Split(int(self.feature[i]), int(self.threshold[i]),
                         int(self.left[i]), int(self.right[i]))
        row = self.value[i]
        probs = tuple(float(p) for p in np.atleast_1d(row))
        return Leaf(int(np.argmax(row)) if row.ndim else 0, probs)

    def apply(self, X: np.ndarray, backend: Backend) -> np.ndarray:
        return backend.apply(X, self.feature, self.threshold, self.left, self.right)

    def same_as(self, other: "Tree") -> bool:
        return all(np.array_equal(a, b) and a.dtype == b.dtype for a, b in
                   zip(self.arrays(), other.arrays()))

    def arrays(self) -> tuple:
        return (self.feature, self.threshold, self.left, self.right, self.value)


def _leaf_positions(feature, start, end):
    """Leaf id for each position of the grower's final work order."""
    leaves = np.flatnonzero(feature < 0)
    leaves = leaves[np.argsort(start[leaves], kind="stable")]
    return np.repeat(leaves, end[leaves] - start[leaves])


def grow_classifier(backend: Backend, XT, y, w, idx, n_classes, max_codes, max_depth,
                    min_split, mtry, random_thr, seed) -> Tree:
    feature, threshold, left, right, start, end, work = backend.grow(
        XT, y, w, idx, n_classes, max_codes, max_depth, min_split, mtry, random_thr, seed, False)
    n_nodes = len(feature)
    leaf_of = _leaf_positions(feature, start, end)
    counts = np.bincount(leaf_of * n_classes + y[work], weights=w[work],
                         minlength=n_nodes * n_classes).reshape(n_nodes, n_classes)
    totals = counts.sum(axis=1, keepdims=True)
    value = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return Tree(feature, threshold, left, right, value)


def grow_regressor(backend: Backend, XT, r, hess, idx, max_codes, max_depth, min_split,
                   scale):
    """Least-squares tree on ``r``; leaf value = scale * sum(r) / sum(hess).

    Returns the tree and, per training row, the value of its leaf.
    """
    w = np.ones(XT.shape[1], dtype=np.float64)
    feature, threshold, left, right, start, end, work = backend.grow(
        XT, r, w, idx, 1, max_codes, max_depth, min_split, XT.shape[0], False, 0, True)
    n_nodes = len(feature)
    leaf_of = _leaf_positions(feature, start, end)
    num = np.bincount(leaf_of, weights=r[work], minlength=n_nodes)
    den = np.bincount(leaf_of, weights=hess[work], minlength=n_nodes)
    safe = np.abs(den) > 1e-150
    value = np.zeros(n_nodes)
    value[safe] = scale * num[safe] / den[safe]
    value[feature >= 0] = 0.0
    per_row = np.empty(XT.shape[1])
    per_row[work] = value[leaf_of]
    return Tree(feature, threshold, left, right, value), per_row
