"""ABAC data model, policy store, grounding and negative-rule derivation.

Conventions used throughout the package:

* ``NA`` (Not Applicable) is an ordinary member of every attribute's domain
  and always carries catalog code 0.
* ``Any`` is a rule-authoring wildcard.  It stands for every *named* value of
  the attribute in the policy's current catalog (never for ``NA``) and is
  removed by grounding before anything is learned or matched.

Rules and requests are stored as tuples of value names aligned with the
catalog's attribute order.  Bulk work happens on integer arrays of catalog
codes, where a whole condition tuple collapses to a single mixed-radix key.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (AbacError, ConsistencyViolation, DuplicateValue,
                     EmptyComplement, UniverseOverflow, UnknownAttribute,
                     UnknownValue)

log = logging.getLogger(__name__)

NA = "NA"
ANY = "Any"
RESERVED = frozenset({NA, ANY})
DEFAULT_UNIVERSE_CAP = 10**7
# mixed-radix keys must stay inside int64
_KEY_LIMIT = 2**62


class Category(Enum):
    SUBJECT = "Subject"
    OBJECT = "Object"
    ENVIRONMENT = "Environment"

    @property
    def prefix(self) -> str:
        return self.value[0]

    @classmethod
    def parse(cls, text: str) -> "Category":
        key = text.strip().lower()
        for cat in cls:
            if key in (cat.value.lower(), cat.prefix.lower()):
                return cat
        raise ValueError(f"unknown attribute category {text!r}")


class Decision(Enum):
    GRANT = "GRANT"
    DENY = "DENY"


@dataclass(frozen=True)
class Outcome:
    """A decision together with its permission set (empty for DENY)."""

    decision: Decision
    permissions: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "permissions", frozenset(self.permissions))
        if self.decision is Decision.DENY and self.permissions:
            raise ValueError("DENY outcomes carry no permissions")
        if self.decision is Decision.GRANT and not self.permissions:
            raise ValueError("GRANT outcomes need at least one permission")

    @property
    def name(self) -> str:
        if self.decision is Decision.DENY:
            return "DENY"
        return ";".join(sorted(self.permissions))


DENY = Outcome(Decision.DENY)


def grant(*permissions: str) -> Outcome:
    return Outcome(Decision.GRANT, frozenset(permissions))


@dataclass(frozen=True)
class AttributeDef:
    name: str
    category: Category
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.name:
            raise ValueError("attribute name must be non-empty")
        seen = set()
        for v in self.values:
            if not v:
                raise ValueError(f"{self.column}: empty value name")
            if v in RESERVED:
                raise ValueError(f"{self.column}: {v!r} is reserved")
            if v in seen:
                raise ValueError(f"{self.column}: duplicate value {v!r}")
            seen.add(v)

    @property
    def column(self) -> str:
        return f"{self.category.prefix}_{self.name}"


@dataclass(frozen=True)
class AttributeCatalog:
    """Ordered attribute schema; value codes are 1..n in listed order, NA is 0."""

    attributes: tuple

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("attribute (category, name) pairs must be unique")

    @cached_property
    def columns(self) -> tuple:
        return tuple(a.column for a in self.attributes)

    @cached_property
    def _column_index(self) -> dict:
        return {c: i for i, c in enumerate(self.columns)}

    @cached_property
    def _codes(self) -> tuple:
        return tuple({v: i + 1 for i, v in enumerate(a.values)} | {NA: 0}
                     for a in self.attributes)

    def __len__(self):
        return len(self.attributes)

    def index(self, column: str) -> int:
        try:
            return self._column_index[column]
        except KeyError:
            raise UnknownAttribute(f"unknown attribute {column!r}") from None

    def code(self, i: int, value: str) -> int:
        try:
            return self._codes[i][value]
        except KeyError:
            raise UnknownValue(self.columns[i], value) from None

    def value(self, i: int, code: int) -> str:
        return NA if code == 0 else self.attributes[i].values[code - 1]

    def knows(self, i: int, value: str) -> bool:
        return value in self._codes[i]

    @property
    def codebook(self) -> dict:
        return {(a.column, v): c for a, codes in zip(self.attributes, self._codes)
                for v, c in codes.items()}

    @cached_property
    def radices(self) -> tuple:
        return tuple(len(a.values) + 1 for a in self.attributes)

    @property
    def universe_size(self) -> int:
        return math.prod(self.radices)

    def names_in(self, category: Category) -> list:
        return [a.name for a in self.attributes if a.category is category]

    def common_names(self) -> list:
        """Attribute names present both as subject and as object attribute."""
        objects = set(self.names_in(Category.OBJECT))
        return [n for n in self.names_in(Category.SUBJECT) if n in objects]

    def encode(self, values: Sequence[str]) -> tuple:
        if len(values) != len(self.attributes):
            raise ValueError(f"expected {len(self.attributes)} values, got {len(values)}")
        return tuple(self.code(i, v) for i, v in enumerate(values))

    def encode_many(self, rows: Iterable[Sequence[str]]) -> np.ndarray:
        rows = list(rows)
        out = np.empty((len(rows), len(self.attributes)), dtype=np.int64)
        for j, codes in enumerate(self._codes):
            try:
                out[:, j] = [codes[r[j]] for r in rows]
            except KeyError as exc:
                raise UnknownValue(self.columns[j], exc.args[0]) from None
        return out

    def decode(self, codes: Sequence[int]) -> tuple:
        return tuple(self.value(i, int(c)) for i, c in enumerate(codes))

    def extend(self, additions: Iterable[tuple]) -> "AttributeCatalog":
        """Append new values; existing codes are left untouched."""
        extra: dict = {}
        for column, value in additions:
            i = self.index(column)
            if value in RESERVED:
                raise ValueError(f"{value!r} is reserved")
            if self.knows(i, value) or value in extra.get(i, ()):
                raise DuplicateValue(f"{column} already has value {value!r}")
            extra.setdefault(i, []).append(value)
        if not extra:
            return self
        attrs = [AttributeDef(a.name, a.category, a.values + tuple(extra.get(i, ())))
                 for i, a in enumerate(self.attributes)]
        return AttributeCatalog(tuple(attrs))

    def is_prefix_of(self, other: "AttributeCatalog") -> bool:
        """True when ``other`` equals this catalog plus appended values."""
        if self.columns != other.columns:
            return False
        return all(b.values[:len(a.values)] == a.values
                   for a, b in zip(self.attributes, other.attributes))

    def additions_to(self, other: "AttributeCatalog") -> list:
        if not self.is_prefix_of(other):
            raise AbacError("catalog is not an extension of the policy catalog")
        return [(b.column, v) for a, b in zip(self.attributes, other.attributes)
                for v in b.values[len(a.values):]]

    def fingerprint(self) -> str:
        doc = [[a.category.value, a.name, list(a.values)] for a in self.attributes]
        return hashlib.sha256(json.dumps(doc, separators=(",", ":")).encode()).hexdigest()

    # -- mixed-radix keys ------------------------------------------------
    @cached_property
    def _strides(self) -> Optional[np.ndarray]:
        if self.universe_size >= _KEY_LIMIT:
            return None
        strides = np.ones(len(self.radices), dtype=np.int64)
        for j in range(len(self.radices) - 2, -1, -1):
            strides[j] = strides[j + 1] * self.radices[j + 1]
        return strides

    def keys(self, codes: np.ndarray) -> np.ndarray:
        """One key per code row; int64 when the universe fits, bytes otherwise."""
        codes = np.ascontiguousarray(codes, dtype=np.int64)
        if self._strides is not None:
            return codes @ self._strides
        return codes.view(np.dtype((np.void, codes.dtype.itemsize * codes.shape[1]))).ravel()

    def decode_keys(self, keys: np.ndarray) -> np.ndarray:
        strides = self._strides
        if strides is None:
            raise UniverseOverflow("universe too large for integer keys")
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty((len(keys), len(self.radices)), dtype=np.int64)
        for j, (s, r) in enumerate(zip(strides, self.radices)):
            out[:, j] = (keys // s) % r
        return out


@dataclass(frozen=True)
class Condition:
    attribute: str
    value: str


@dataclass(frozen=True)
class Rule:
    """A total assignment of conditions plus the outcome it prescribes."""

    values: tuple
    decision: Decision
    permissions: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "permissions", frozenset(self.permissions))
        Outcome(self.decision, self.permissions)  # validates the pairing

    @classmethod
    def of(cls, values: Sequence[str], outcome: Outcome) -> "Rule":
        return cls(tuple(values), outcome.decision, outcome.permissions)

    @property
    def outcome(self) -> Outcome:
        return Outcome(self.decision, self.permissions)

    @property
    def is_grounded(self) -> bool:
        return ANY not in self.values

    def conditions(self, catalog: AttributeCatalog) -> tuple:
        return tuple(Condition(c, v) for c, v in zip(catalog.columns, self.values))


@dataclass(frozen=True)
class AccessRequest:
    values: tuple
    truth: Optional[Outcome] = None
    request_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if ANY in self.values:
            raise ValueError("access requests must not contain 'Any'")


@dataclass(frozen=True)
class GroundedRules:
    """Concrete, deduplicated rule table of a policy in catalog-code form."""

    catalog: AttributeCatalog
    codes: np.ndarray          # (n, d) catalog codes, NA = 0
    outcome_ids: np.ndarray    # (n,) index into ``outcomes``
    outcomes: tuple

    def __len__(self):
        return len(self.codes)

    @cached_property
    def keys(self) -> np.ndarray:
        return self.catalog.keys(self.codes)

    @cached_property
    def _index(self) -> dict:
        return {k: i for i, k in enumerate(self.keys.tolist())}

    @property
    def positive_mask(self) -> np.ndarray:
        grant_ids = [i for i, o in enumerate(self.outcomes) if o.decision is Decision.GRANT]
        return np.isin(self.outcome_ids, grant_ids)

    def rule_at(self, i: int) -> Rule:
        return Rule.of(self.catalog.decode(self.codes[i]), self.outcomes[self.outcome_ids[i]])

    def to_rules(self) -> list:
        return [self.rule_at(i) for i in range(len(self))]

    @cached_property
    def _sorted(self) -> tuple:
        order = np.argsort(self.keys, kind="stable")
        return self.keys[order], order

    def find(self, codes: np.ndarray) -> np.ndarray:
        """Row index of each code row in the table, -1 where absent."""
        if len(codes) == 0:
            return np.empty(0, dtype=np.int64)
        keys = self.catalog.keys(codes)
        if keys.dtype != np.int64:
            idx = self._index
            return np.array([idx.get(k, -1) for k in keys.tolist()], dtype=np.int64)
        table, order = self._sorted
        if len(table) == 0:
            return np.full(len(keys), -1, dtype=np.int64)
        pos = np.minimum(np.searchsorted(table, keys), len(table) - 1)
        return np.where(table[pos] == keys, order[pos], -1).astype(np.int64)


@dataclass(frozen=True)
class Policy:
    catalog: AttributeCatalog
    rules: tuple
    permission_universe: frozenset = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        d = len(self.catalog)
        used = frozenset().union(*(r.permissions for r in self.rules)) if self.rules else frozenset()
        if self.permission_universe is None:
            object.__setattr__(self, "permission_universe", used)
        else:
            object.__setattr__(self, "permission_universe", frozenset(self.permission_universe))
            stray = used - self.permission_universe
            if stray:
                raise ValueError(f"permissions outside the universe: {sorted(stray)}")
        for r in self.rules:
            if len(r.values) != d:
                raise ValueError(f"rule width {len(r.values)} != catalog width {d}")
            for i, v in enumerate(r.values):
                if v != ANY and not self.catalog.knows(i, v):
                    raise UnknownValue(self.catalog.columns[i], v)

    def rebase(self, catalog: AttributeCatalog) -> "Policy":
        """Same rules interpreted over an extended catalog."""
        if catalog == self.catalog:
            return self
        if not self.catalog.is_prefix_of(catalog):
            raise AbacError("target catalog is not an extension of the policy catalog")
        out = Policy(catalog, self.rules, self.permission_universe)
        if "rule_codes" in self.__dict__:
            # appended values leave every existing code unchanged
            out.__dict__["rule_codes"] = self.rule_codes
        return out

    @cached_property
    def grounded(self) -> GroundedRules:
        return _ground(self)

    @cached_property
    def rule_codes(self) -> np.ndarray:
        """(n_rules, d) catalog codes with -1 for ``Any``."""
        return _rule_codes(self)

    @property
    def positive_rules(self) -> list:
        return [r for r in self.rules if r.decision is Decision.GRANT]


@dataclass(frozen=True)
class RequestLog:
    catalog: AttributeCatalog
    requests: tuple

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))
        for q in self.requests:
            if len(q.values) != len(self.catalog):
                raise ValueError("request width does not match the catalog")

    def __len__(self):
        return len(self.requests)

    @cached_property
    def codes(self) -> np.ndarray:
        return self.catalog.encode_many(q.values for q in self.requests)

    @property
    def has_truth(self) -> bool:
        return bool(self.requests) and all(q.truth is not None for q in self.requests)


# -- grounding -------------------------------------------------------------

def _rule_codes(policy: Policy) -> np.ndarray:
    cat = policy.catalog
    raw = np.empty((len(policy.rules), len(cat)), dtype=np.int64)
    for j in range(len(cat)):
        codes = cat._codes[j]
        raw[:, j] = [-1 if r.values[j] == ANY else codes[r.values[j]] for r in policy.rules]
    return raw


def _wildcard_groups(wild: np.ndarray) -> np.ndarray:
    """Group id per rule; rules share a group iff their ``Any`` columns agree."""
    d = wild.shape[1]
    if d < 63:
        bits = wild.astype(np.int64) @ (np.int64(1) << np.arange(d, dtype=np.int64))
        return np.unique(bits, return_inverse=True)[1].ravel()
    return np.unique(wild, axis=0, return_inverse=True)[1].ravel()


def _ground(policy: Policy) -> GroundedRules:
    cat = policy.catalog
    d = len(cat)
    outcomes: dict = {}
    rule_outcome = np.array([outcomes.setdefault(r.outcome, len(outcomes)) for r in policy.rules],
                            dtype=np.int64)
    if not policy.rules:
        return GroundedRules(cat, np.empty((0, d), np.int64), np.empty(0, np.int64), ())
    raw = policy.rule_codes
    wild = raw < 0
    sizes = np.array([len(a.values) for a in cat.attributes], dtype=np.int64)

    # expand each group of rules sharing the same wildcard columns at once
    groups = _wildcard_groups(wild)
    parts_codes, parts_src = [], []
    for g in np.unique(groups):
        members = np.flatnonzero(groups == g)
        cols = np.flatnonzero(wild[members[0]])
        base = raw[members]
        if len(cols) == 0:
            parts_codes.append(base)
            parts_src.append(np.stack([members, np.zeros_like(members)], axis=1))
            continue
        combos = np.indices(sizes[cols]).reshape(len(cols), -1).T + 1
        k = len(combos)
        block = np.repeat(base, k, axis=0)
        block[:, cols] = np.tile(combos, (len(members), 1))
        parts_codes.append(block)
        parts_src.append(np.stack([np.repeat(members, k), np.tile(np.arange(k), len(members))],
                                  axis=1))
    codes = np.concatenate(parts_codes)
    src = np.concatenate(parts_src)
    order = np.lexsort((src[:, 1], src[:, 0]))
    codes = codes[order]
    outcome_ids = rule_outcome[src[order, 0]]

    keys = cat.keys(codes)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    lo = np.full(len(first), np.iinfo(np.int64).max)
    hi = np.full(len(first), -1)
    np.minimum.at(lo, inverse, outcome_ids)
    np.maximum.at(hi, inverse, outcome_ids)
    clash = np.flatnonzero(lo != hi)
    if len(clash):
        u = clash[0]
        row = codes[first[u]]
        names = sorted({outcome_list(outcomes)[i].name for i in (lo[u], hi[u])})
        raise ConsistencyViolation(
            f"conflicting outcomes {names} for {dict(zip(cat.columns, cat.decode(row)))}")
    keep = np.sort(first)
    return GroundedRules(cat, codes[keep], outcome_ids[keep], outcome_list(outcomes))


def outcome_list(table: dict) -> tuple:
    return tuple(sorted(table, key=table.get))


def ground_rules(policy: Policy) -> list:
    """Expand every ``Any`` condition; duplicates are dropped in first-seen order."""
    if len(policy.catalog) == 0:
        raise AbacError("policy catalog is empty")
    return policy.grounded.to_rules()


# -- negative rules ----------------------------------------------------------

@dataclass(frozen=True)
class Exhaustive:
    cap: int = DEFAULT_UNIVERSE_CAP


@dataclass(frozen=True)
class Sampled:
    ratio: float = 2.0
    seed: int = 0
    cap: int = DEFAULT_UNIVERSE_CAP

    def __post_init__(self):
        if not self.ratio > 0:
            raise ValueError("sampling ratio must be positive")


NegativeMode = Union[Exhaustive, Sampled]


def _positive_keys(policy: Policy) -> np.ndarray:
    g = policy.grounded
    keys = g.keys[g.positive_mask]
    if len(keys) == 0:
        raise AbacError("policy contains no positive rules")
    return np.sort(keys)


def negative_codes(policy: Policy, mode: NegativeMode = Sampled()) -> np.ndarray:
    """Catalog-code rows of the derived negative rules, sorted by key."""
    cat = policy.catalog
    pos = _positive_keys(policy)
    universe = cat.universe_size
    if universe >= _KEY_LIMIT:
        raise UniverseOverflow(f"universe of {universe} tuples cannot be indexed")
    complement_size = universe - len(pos)
    if complement_size == 0:
        raise EmptyComplement("positive rules cover the whole attribute universe")

    if isinstance(mode, Exhaustive):
        if universe > mode.cap:
            raise UniverseOverflow(f"|U| = {universe} exceeds the cap of {mode.cap}")
        return cat.decode_keys(np.setdiff1d(np.arange(universe, dtype=np.int64), pos,
                                            assume_unique=True))

    k = math.ceil(mode.ratio * len(pos))
    if k > complement_size:
        log.warning("requested %d negatives but only %d exist; using all", k, complement_size)
        k = complement_size
    rng = np.random.default_rng(mode.seed)
    if universe <= mode.cap:
        complement = np.setdiff1d(np.arange(universe, dtype=np.int64), pos, assume_unique=True)
        picked = complement[rng.choice(len(complement), size=k, replace=False)]
    else:
        chunks, have = [], np.empty(0, dtype=np.int64)
        while len(have) < k:
            draw = rng.integers(0, universe, size=2 * (k - len(have)) + 16, dtype=np.int64)
            draw = draw[~np.isin(draw, pos)]
            _, first = np.unique(draw, return_index=True)
            draw = draw[np.sort(first)]
            draw = draw[~np.isin(draw, have)]
            chunks.append(draw[:k - len(have)])
            have = np.concatenate([have, chunks[-1]])
        picked = have
    return cat.decode_keys(np.sort(picked))


def derive_negative_rules(policy: Policy, mode: NegativeMode = Sampled()) -> list:
    cat = policy.catalog
    return [Rule(cat.decode(row), Decision.DENY) for row in negative_codes(policy, mode)]


# -- coverage ------------------------------------------------------------------

def covering_rule(policy: Policy, request: AccessRequest) -> Optional[Rule]:
    cat = policy.catalog
    if len(request.values) != len(cat):
        raise ValueError("request width does not match the policy catalog")
    if not all(cat.knows(i, v) for i, v in enumerate(request.values)):
        return None
    row = policy.grounded.find(np.array([cat.encode(request.values)], dtype=np.int64))[0]
    return None if row < 0 else policy.grounded.rule_at(int(row))


def _member(keys: np.ndarray, table: np.ndarray) -> np.ndarray:
    if keys.dtype == np.int64:
        return np.isin(keys, table)
    known = set(table.tolist())  # byte keys of universes beyond int64
    return np.array([k in known for k in keys.tolist()], dtype=bool)


def covered_mask(policy: Policy, log_: RequestLog) -> np.ndarray:
    """Per request: is it already decided by the policy (over the log catalog)?

    Matches rules directly instead of grounding: ``Any`` widens to values the
    log catalog added.  Rules are grouped by their wildcard columns; within a
    group a request matches when its fixed columns equal some rule's and its
    wildcard columns are not NA.
    """
    cat = log_.catalog
    if cat != policy.catalog and not policy.catalog.is_prefix_of(cat):
        raise AbacError("log catalog is not an extension of the policy catalog")
    q = log_.codes
    out = np.zeros(len(q), dtype=bool)
    if len(q) == 0 or not policy.rules:
        return out
    raw = policy.rule_codes
    wild = raw < 0
    inverse = _wildcard_groups(wild)
    for g in range(inverse.max() + 1):
        members = inverse == g
        mask = wild[np.argmax(members)]
        fixed = np.where(mask, 0, raw[members])
        probe = np.where(mask, 0, q)
        hit = _member(cat.keys(probe), cat.keys(fixed))
        if mask.any():
            hit &= (q[:, mask] != 0).all(axis=1)
        out |= hit
    return out
