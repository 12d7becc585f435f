"""Integer feature encoding of grounded rules and access requests.

Feature layout of a fitted encoder, in column order:

1. one code column per catalog attribute (NA -> 0, named values 1..n);
2. with ARFE, one relation column ``F_<name>`` per attribute name shared by
   the subject and the object side: 1 when both sides carry the same named
   value, 0 when they differ, 2 when either side is NA;
3. with AVC, one cluster column ``C_<column>`` per clustered attribute
   holding the 1-based cluster code (0 for NA).

Under AVC the value codes of a clustered attribute are also reassigned so
that every cluster occupies a contiguous code range.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (AttributeCatalog, Category, Decision, Outcome, Rule, ANY,
                   DENY)
from .errors import InvalidClusterMap, WidthMismatch

STRATEGIES = ("naive", "arfe", "avc", "arfe+avc")


@dataclass(frozen=True)
class EncoderConfig:
    arfe_enabled: bool = False
    avc_enabled: bool = False
    clusters: Mapping = field(default_factory=dict)

    @classmethod
    def from_strategy(cls, strategy: str, clusters: Optional[Mapping] = None) -> "EncoderConfig":
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        avc = "avc" in strategy
        return cls("arfe" in strategy, avc, dict(clusters or {}) if avc else {})

    @property
    def strategy(self) -> str:
        parts = [n for n, on in (("arfe", self.arfe_enabled), ("avc", self.avc_enabled)) if on]
        return "+".join(parts) or "naive"

    def restricted_to(self, catalog: AttributeCatalog) -> "EncoderConfig":
        """Drop cluster entries whose value the catalog does not (yet) know."""
        keep = {}
        for (col, value), name in self.clusters.items():
            try:
                i = catalog.index(col)
            except Exception:
                continue
            if catalog.knows(i, value):
                keep[(col, value)] = name
        return EncoderConfig(self.arfe_enabled, self.avc_enabled, keep)


@dataclass(frozen=True)
class FeatureRow:
    features: tuple
    label: int


@dataclass(frozen=True)
class EncodedDataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    class_names: tuple

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise WidthMismatch("feature matrix width does not match feature names")
        if len(self.y) != len(self.X):
            raise ValueError("label count does not match row count")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class names must be distinct")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= len(self.class_names)):
            raise ValueError("label outside the class range")

    def __len__(self):
        return len(self.y)

    @property
    def rows(self) -> list:
        return [FeatureRow(tuple(int(v) for v in x), int(c)) for x, c in zip(self.X, self.y)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.feature_names) + ["label"])
            for x, c in zip(self.X.tolist(), self.y.tolist()):
                w.writerow(x + [c])


@dataclass(frozen=True)
class Encoder:
    catalog: AttributeCatalog
    config: EncoderConfig
    # value_codes[j][c] = feature code of the value with catalog code c
    value_codes: tuple
    # per clustered attribute: (attribute index, cluster names, cluster code per catalog code)
    cluster_columns: tuple
    # per shared name: (name, subject index, object index, subject ids, object ids)
    arfe_pairs: tuple

    @property
    def feature_names(self) -> tuple:
        names = list(self.catalog.columns)
        names += [f"F_{p[0]}" for p in self.arfe_pairs]
        names += [f"C_{self.catalog.columns[c[0]]}" for c in self.cluster_columns]
        return tuple(names)

    @property
    def n_features(self) -> int:
        return len(self.catalog) + len(self.arfe_pairs) + len(self.cluster_columns)

    def code_of(self, column: str, value: str) -> int:
        i = self.catalog.index(column)
        return self.value_codes[i][self.catalog.code(i, value)]

    def decode(self, column: str, code: int) -> str:
        i = self.catalog.index(column)
        return self.catalog.value(i, self.value_codes[i].index(code))

    def cluster_of(self, column: str, value: str) -> int:
        i = self.catalog.index(column)
        for j, _, codes in self.cluster_columns:
            if j == i:
                return codes[self.catalog.code(i, value)]
        raise KeyError(f"{column} is not clustered")

    def transform(self, codes: np.ndarray) -> np.ndarray:
        """Catalog-code rows (n, d) -> feature rows (n, n_features)."""
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(self.catalog):
            raise WidthMismatch(f"expected {len(self.catalog)} catalog columns")
        out = np.empty((len(codes), self.n_features), dtype=np.int64)
        d = len(self.catalog)
        for j, table in enumerate(self.value_codes):
            out[:, j] = np.asarray(table, dtype=np.int64)[codes[:, j]]
        for k, (_, si, oi, s_ids, o_ids) in enumerate(self.arfe_pairs):
            s = np.asarray(s_ids, dtype=np.int64)[codes[:, si]]
            o = np.asarray(o_ids, dtype=np.int64)[codes[:, oi]]
            out[:, d + k] = np.where((s == 0) | (o == 0), 2, (s == o).astype(np.int64))
        base = d + len(self.arfe_pairs)
        for k, (j, _, table) in enumerate(self.cluster_columns):
            out[:, base + k] = np.asarray(table, dtype=np.int64)[codes[:, j]]
        return out


def _validate_clusters(catalog: AttributeCatalog, clusters: Mapping) -> dict:
    """Group cluster entries per attribute index, checking every reference."""
    per_attr: dict = {}
    for (col, value), name in clusters.items():
        try:
            i = catalog.index(col)
        except Exception:
            raise InvalidClusterMap(f"unknown attribute {col!r} in cluster map") from None
        if not catalog.knows(i, value) or value == "NA":
            raise InvalidClusterMap(f"unknown value {value!r} for {col} in cluster map")
        if not name:
            raise InvalidClusterMap(f"empty cluster name for {col}={value}")
        per_attr.setdefault(i, {})[value] = name
    for i, assigned in per_attr.items():
        missing = [v for v in catalog.attributes[i].values if v not in assigned]
        if missing:
            raise InvalidClusterMap(
                f"{catalog.columns[i]}: values without a cluster: {missing}")
    return per_attr


def _arfe_pairs(catalog: AttributeCatalog) -> tuple:
    pairs = []
    for name in catalog.common_names():
        si = catalog.index(f"{Category.SUBJECT.prefix}_{name}")
        oi = catalog.index(f"{Category.OBJECT.prefix}_{name}")
        ids: dict = {}
        s_vals, o_vals = catalog.attributes[si].values, catalog.attributes[oi].values
        s_ids = (0,) + tuple(ids.setdefault(v, len(ids) + 1) for v in s_vals)
        o_ids = (0,) + tuple(ids.setdefault(v, len(ids) + 1) for v in o_vals)
        pairs.append((name, si, oi, s_ids, o_ids))
    return tuple(pairs)


def fit_encoder(catalog: AttributeCatalog, config: EncoderConfig = EncoderConfig()) -> Encoder:
    per_attr = _validate_clusters(catalog, config.clusters) if config.avc_enabled else {}
    value_codes = []
    cluster_columns = []
    for i, attr in enumerate(catalog.attributes):
        n = len(attr.values)
        if i not in per_attr:
            value_codes.append(tuple(range(n + 1)))
            continue
        assigned = per_attr[i]
        names = list(dict.fromkeys(assigned[v] for v in attr.values))
        rank = {name: k for k, name in enumerate(names)}
        # stable sort by cluster rank keeps catalog order inside each cluster
        order = sorted(range(n), key=lambda k: rank[assigned[attr.values[k]]])
        table = [0] * (n + 1)
        for new_code, k in enumerate(order, start=1):
            table[k + 1] = new_code
        value_codes.append(tuple(table))
        cluster_columns.append((i, tuple(names),
                                (0,) + tuple(rank[assigned[v]] + 1 for v in attr.values)))
    arfe = _arfe_pairs(catalog) if config.arfe_enabled else ()
    return Encoder(catalog, config, tuple(value_codes), tuple(cluster_columns), arfe)


def extend_catalog(encoder: Encoder, additions: Sequence[tuple],
                   clusters: Optional[Mapping] = None) -> Encoder:
    """Register new values with the next free codes; existing codes never move.

    Under AVC each new value of a clustered attribute needs a cluster, taken
    from ``clusters`` (or the encoder's own map).
    """
    additions = list(additions)
    if not additions:
        return encoder
    catalog = encoder.catalog.extend(additions)
    merged = dict(encoder.config.clusters)
    if clusters:
        merged.update(clusters)
    value_codes = [list(t) for t in encoder.value_codes]
    for column, _ in additions:
        i = catalog.index(column)
        value_codes[i].append(max(value_codes[i]) + 1)
    cluster_columns = []
    for i, names, table in encoder.cluster_columns:
        names, table = list(names), list(table)
        for value in catalog.attributes[i].values[len(table) - 1:]:
            name = merged.get((catalog.columns[i], value))
            if name is None:
                raise InvalidClusterMap(
                    f"new value {value!r} of clustered attribute {catalog.columns[i]} "
                    "has no cluster")
            if name not in names:
                names.append(name)
            table.append(names.index(name) + 1)
        cluster_columns.append((i, tuple(names), tuple(table)))
    config = EncoderConfig(encoder.config.arfe_enabled, encoder.config.avc_enabled,
                           merged if encoder.config.avc_enabled else {})
    arfe = _arfe_pairs(catalog) if config.arfe_enabled else ()
    return Encoder(catalog, config, tuple(tuple(t) for t in value_codes),
                   tuple(cluster_columns), arfe)


def encode_row(encoder: Encoder, assignments: Sequence[str]) -> list:
    if ANY in assignments:
        raise ValueError("cannot encode 'Any'; ground the rule first")
    codes = np.array([encoder.catalog.encode(assignments)], dtype=np.int64)
    return encoder.transform(codes)[0].tolist()


def class_table(outcomes: Sequence[Outcome]) -> tuple:
    """DENY first, then permission sets in first-appearance order."""
    table = {DENY: 0}
    for o in outcomes:
        if o.decision is Decision.GRANT:
            table.setdefault(o, len(table))
    return tuple(sorted(table, key=table.get))


def build_dataset(encoder: Encoder, codes: np.ndarray, labels: np.ndarray,
                  classes: Sequence[Outcome]) -> EncodedDataset:
    return EncodedDataset(encoder.transform(codes), np.asarray(labels, dtype=np.int64),
                          encoder.feature_names, tuple(o.name for o in classes))


def encode_dataset(encoder: Encoder, rules: Sequence[Rule]) -> EncodedDataset:
    rules = list(rules)
    if any(not r.is_grounded for r in rules):
        raise ValueError("encode_dataset expects grounded rules")
    classes = class_table([r.outcome for r in rules])
    index = {o: k for k, o in enumerate(classes)}
    codes = encoder.catalog.encode_many(r.values for r in rules)
    labels = np.array([index[r.outcome] for r in rules], dtype=np.int64)
    if not rules:
        codes = np.empty((0, len(encoder.catalog)), dtype=np.int64)
    return build_dataset(encoder, codes, labels, classes)
