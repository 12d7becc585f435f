"""CSV readers and writers for catalogs, policies, request logs and clusters."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Optional, Union

from .core import (AccessRequest, AttributeCatalog, AttributeDef, Category,
                   Decision, Outcome, Policy, RequestLog, Rule)
from .errors import FormatError

PathLike = Union[str, Path]

CATALOG_HEADER = ["category", "attribute", "value"]
CLUSTER_HEADER = ["category", "attribute", "value", "cluster"]


def _reader(path: PathLike):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def _write(path: PathLike, header: list, rows: Iterable[list]) -> None:
    # fixed "\n" terminator keeps files byte-identical across platforms
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _column(category: str, attribute: str) -> str:
    return f"{Category.parse(category).prefix}_{attribute}"


# -- catalog -------------------------------------------------------------------

def parse_catalog_rows(rows: list, source="catalog") -> list:
    """(category, attribute, value) triples in file order."""
    out = []
    for n, row in enumerate(rows, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise FormatError(f"{source}:{n}: expected 3 fields, got {len(row)}")
        try:
            cat = Category.parse(row[0])
        except ValueError as exc:
            raise FormatError(f"{source}:{n}: {exc}") from None
        out.append((cat, row[1].strip(), row[2].strip()))
    return out


def read_catalog(path: PathLike) -> AttributeCatalog:
    header, rows = _reader(path)
    if [h.strip() for h in header] != CATALOG_HEADER:
        raise FormatError(f"{path}: header must be {','.join(CATALOG_HEADER)}")
    order: dict = {}
    for cat, name, value in parse_catalog_rows(rows, str(path)):
        order.setdefault((cat, name), []).append(value)
    try:
        return AttributeCatalog(tuple(AttributeDef(n, c, tuple(v)) for (c, n), v in order.items()))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_additions(path: PathLike) -> list:
    """New values in catalog-file format, as (column, value) pairs."""
    header, rows = _reader(path)
    if [h.strip() for h in header] != CATALOG_HEADER:
        raise FormatError(f"{path}: header must be {','.join(CATALOG_HEADER)}")
    return [(f"{c.prefix}_{n}", v) for c, n, v in parse_catalog_rows(rows, str(path))]


def write_catalog(catalog: AttributeCatalog, path: PathLike) -> None:
    _write(path, CATALOG_HEADER,
           ([a.category.value, a.name, v] for a in catalog.attributes for v in a.values))


def write_additions(additions: list, path: PathLike) -> None:
    cats = {c.prefix: c.value for c in Category}
    _write(path, CATALOG_HEADER,
           ([cats[col[0]], col[2:], v] for col, v in additions))


# -- clusters ------------------------------------------------------------------

def read_clusters(path: PathLike) -> dict:
    header, rows = _reader(path)
    if [h.strip() for h in header] != CLUSTER_HEADER:
        raise FormatError(f"{path}: header must be {','.join(CLUSTER_HEADER)}")
    clusters = {}
    for n, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise FormatError(f"{path}:{n}: expected 4 fields")
        try:
            key = (_column(row[0], row[1].strip()), row[2].strip())
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from None
        clusters[key] = row[3].strip()
    return clusters


def write_clusters(clusters: dict, path: PathLike) -> None:
    cats = {c.prefix: c.value for c in Category}
    _write(path, CLUSTER_HEADER,
           ([cats[col[0]], col[2:], v, name] for (col, v), name in clusters.items()))


# -- policy ----------------------------------------------------------------------

def _permissions(cell: str) -> frozenset:
    return frozenset(p.strip() for p in cell.split(";") if p.strip())


def _outcome(decision: str, perms: str, where: str) -> Outcome:
    try:
        return Outcome(Decision(decision.strip().upper()), _permissions(perms))
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def _attribute_positions(header: list, catalog: AttributeCatalog, where: str) -> list:
    pos = {h.strip(): i for i, h in enumerate(header)}
    missing = [c for c in catalog.columns if c not in pos]
    if missing:
        raise FormatError(f"{where}: missing attribute columns {missing}")
    return [pos[c] for c in catalog.columns]


def read_policy(path: PathLike, catalog: AttributeCatalog) -> Policy:
    header, rows = _reader(path)
    cols = _attribute_positions(header, catalog, str(path))
    names = [h.strip() for h in header]
    if "decision" not in names or "permissions" not in names:
        raise FormatError(f"{path}: policy needs 'decision' and 'permissions' columns")
    di, pi = names.index("decision"), names.index("permissions")
    rules = []
    for n, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        out = _outcome(row[di], row[pi], f"{path}:{n}")
        rules.append(Rule.of(tuple(row[i].strip() for i in cols), out))
    try:
        return Policy(catalog, tuple(rules))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_policy(policy: Policy, path: PathLike) -> None:
    header = list(policy.catalog.columns) + ["decision", "permissions"]
    _write(path, header, (list(r.values) + [r.decision.value, ";".join(sorted(r.permissions))]
                          for r in policy.rules))


# -- request log -------------------------------------------------------------------

def read_log(path: PathLike, catalog: AttributeCatalog) -> RequestLog:
    """Attribute columns plus optional ``id``, ``truth`` and ``truth_permissions``.

    A ``decision`` column is accepted as an alias of ``truth``.
    """
    header, rows = _reader(path)
    cols = _attribute_positions(header, catalog, str(path))
    names = [h.strip() for h in header]
    ti = names.index("truth") if "truth" in names else (
        names.index("decision") if "decision" in names else None)
    tpi = names.index("truth_permissions") if "truth_permissions" in names else None
    ii = names.index("id") if "id" in names else None
    reqs = []
    for n, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        truth = None
        if ti is not None and row[ti].strip():
            truth = _outcome(row[ti], row[tpi] if tpi is not None else "", f"{path}:{n}")
        rid = row[ii].strip() if ii is not None else str(len(reqs))
        try:
            reqs.append(AccessRequest(tuple(row[i].strip() for i in cols), truth, rid))
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from None
    return RequestLog(catalog, tuple(reqs))


def write_log(log_: RequestLog, path: PathLike) -> None:
    header = ["id"] + list(log_.catalog.columns)
    with_truth = any(q.truth is not None for q in log_.requests)
    if with_truth:
        header += ["truth", "truth_permissions"]
    rows = []
    for q in log_.requests:
        row = [q.request_id] + list(q.values)
        if with_truth:
            t = q.truth
            row += ["", ""] if t is None else [t.decision.value, ";".join(sorted(t.permissions))]
        rows.append(row)
    _write(path, header, rows)


def policy_to_text(policy: Policy) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(policy.catalog.columns) + ["decision", "permissions"])
    for r in policy.rules:
        w.writerow(list(r.values) + [r.decision.value, ";".join(sorted(r.permissions))])
    return buf.getvalue()


def write_rows(path: PathLike, header: list, rows: Iterable[list]) -> None:
    _write(path, header, rows)


def read_rows(path: PathLike) -> tuple:
    return _reader(path)


def maybe(path: Optional[PathLike], fn, *args):
    return None if path is None else fn(path, *args)
