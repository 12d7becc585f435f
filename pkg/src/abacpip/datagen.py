"""Synthetic ABAC datasets shaped like three reference organisations.

A template fixes the attribute schema (training values plus the new values
that appear only in access requests), an admin cluster map, and a list of
relation patterns.  A pattern is a conjunction of predicates:

``Eq(name)``
    subject and object carry the same named value for ``name``;
``In(column, values)``
    the value (``NA`` allowed) is in a fixed set;
``InCluster(column, clusters)``
    the value belongs to one of the named clusters.

Attributes a pattern does not mention must carry some named value (never
``NA``), mirroring how ``Any`` reads in rules.  A tuple is granted iff some
pattern matches it; this oracle labels both the policy and the requests.
"""

from __future__ import annotations

import configparser
import itertools
import logging
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (ANY, NA, AccessRequest, AttributeCatalog, AttributeDef, Category,
                   Decision, Outcome, Policy, RequestLog, Rule)
from .errors import FormatError, InfeasibleCounts

log = logging.getLogger(__name__)

S, O = Category.SUBJECT, Category.OBJECT


@dataclass(frozen=True)
class Eq:
    name: str


@dataclass(frozen=True)
class In:
    column: str
    values: tuple


@dataclass(frozen=True)
class InCluster:
    column: str
    clusters: tuple


@dataclass(frozen=True)
class Pattern:
    name: str
    conditions: tuple


@dataclass(frozen=True)
class SchemaTemplate:
    name: str
    attributes: tuple           # AttributeDef, training values only
    additions: tuple            # (column, value) present only in requests
    clusters: Mapping           # (column, value) -> cluster, for new values too
    patterns: tuple
    training_rules: int
    positive_requests: int
    negative_requests: int
    permission: str = "access"
    seed: int = 0

    @property
    def catalog(self) -> AttributeCatalog:
        return AttributeCatalog(self.attributes)

    @property
    def extended_catalog(self) -> AttributeCatalog:
        return self.catalog.extend(self.additions)

    @property
    def outcome(self) -> Outcome:
        return Outcome(Decision.GRANT, frozenset({self.permission}))


@dataclass(frozen=True)
class SyntheticDataset:
    template: SchemaTemplate
    policy: Policy
    log: RequestLog

    @property
    def additions(self) -> list:
        return self.policy.catalog.additions_to(self.log.catalog)


# -- pattern evaluation ------------------------------------------------------------

def _eq_columns(name: str) -> tuple:
    return f"{S.prefix}_{name}", f"{O.prefix}_{name}"


def _constrained(pattern: Pattern) -> set:
    cols = set()
    for c in pattern.conditions:
        cols.update(_eq_columns(c.name) if isinstance(c, Eq) else (c.column,))
    return cols


def _name_ids(cat: AttributeCatalog, si: int, oi: int) -> tuple:
    ids: dict = {}
    s = np.array([0] + [ids.setdefault(v, len(ids) + 1) for v in cat.attributes[si].values])
    o = np.array([0] + [ids.setdefault(v, len(ids) + 1) for v in cat.attributes[oi].values])
    return s, o


def _code_set(cat: AttributeCatalog, j: int, cond, clusters: Mapping) -> np.ndarray:
    col = cat.columns[j]
    if isinstance(cond, In):
        return np.array(sorted(cat.code(j, v) for v in cond.values if cat.knows(j, v)), np.int64)
    wanted = set(cond.clusters)
    return np.array([cat.code(j, v) for v in cat.attributes[j].values
                     if clusters.get((col, v)) in wanted], np.int64)


def pattern_mask(pattern: Pattern, cat: AttributeCatalog, codes: np.ndarray,
                 clusters: Mapping) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    ok = np.ones(len(codes), dtype=bool)
    constrained = _constrained(pattern)
    for j, col in enumerate(cat.columns):
        if col not in constrained:
            ok &= codes[:, j] != 0
    for cond in pattern.conditions:
        if isinstance(cond, Eq):
            si, oi = (cat.index(c) for c in _eq_columns(cond.name))
            s_ids, o_ids = _name_ids(cat, si, oi)
            a, b = s_ids[codes[:, si]], o_ids[codes[:, oi]]
            ok &= (a != 0) & (a == b)
        else:
            j = cat.index(cond.column)
            ok &= np.isin(codes[:, j], _code_set(cat, j, cond, clusters))
    return ok


def oracle_mask(template: SchemaTemplate, cat: AttributeCatalog, codes: np.ndarray) -> np.ndarray:
    """Grant mask of the template's relation patterns over catalog-code rows."""
    out = np.zeros(len(codes), dtype=bool)
    for p in template.patterns:
        out |= pattern_mask(p, cat, codes, template.clusters)
    return out


def oracle(template: SchemaTemplate, cat: AttributeCatalog, values: Sequence[str]) -> Outcome:
    granted = oracle_mask(template, cat, np.array([cat.encode(values)]))[0]
    return template.outcome if granted else Outcome(Decision.DENY)


def _slots(pattern: Pattern, cat: AttributeCatalog, clusters: Mapping) -> list:
    """Independent choice slots: (columns, option rows, wildcard?) per slot."""
    d = len(cat)
    constrained = _constrained(pattern)
    allowed = [np.arange(1, len(a.values) + 1) if cat.columns[j] not in constrained
               else np.arange(len(a.values) + 1) for j, a in enumerate(cat.attributes)]
    eqs = []
    for cond in pattern.conditions:
        if isinstance(cond, Eq):
            eqs.append(tuple(cat.index(c) for c in _eq_columns(cond.name)))
        else:
            j = cat.index(cond.column)
            allowed[j] = np.intersect1d(allowed[j], _code_set(cat, j, cond, clusters))
    slots, used = [], set()
    for si, oi in eqs:
        s_ids, o_ids = _name_ids(cat, si, oi)
        o_by_id = {int(o_ids[c]): int(c) for c in allowed[oi] if c}
        pairs = [(int(c), o_by_id[int(s_ids[c])]) for c in allowed[si]
                 if c and int(s_ids[c]) in o_by_id]
        slots.append(((si, oi), np.array(pairs, np.int64).reshape(-1, 2), False))
        used.update((si, oi))
    for j in range(d):
        if j not in used:
            wild = cat.columns[j] not in constrained
            slots.append(((j,), allowed[j][:, None].astype(np.int64), wild))
    return slots


def enumerate_pattern(pattern: Pattern, cat: AttributeCatalog, clusters: Mapping) -> np.ndarray:
    slots = _slots(pattern, cat, clusters)
    sizes = [len(opt) for _, opt, _ in slots]
    if 0 in sizes:
        return np.empty((0, len(cat)), np.int64)
    idx = np.indices(sizes).reshape(len(sizes), -1).T
    out = np.empty((len(idx), len(cat)), np.int64)
    for s, (cols, opt, _) in enumerate(slots):
        out[:, list(cols)] = opt[idx[:, s]]
    return out


def positive_codes(template: SchemaTemplate, cat: AttributeCatalog) -> np.ndarray:
    """Every granted tuple of ``cat``, sorted by key."""
    parts = [enumerate_pattern(p, cat, template.clusters) for p in template.patterns]
    codes = np.concatenate(parts) if parts else np.empty((0, len(cat)), np.int64)
    _, first = np.unique(cat.keys(codes), return_index=True)
    return codes[first]


# -- policy construction ----------------------------------------------------------

def _pattern_rules(pattern: Pattern, cat: AttributeCatalog, clusters: Mapping) -> list:
    """Rules covering exactly the pattern's tuples, ``Any`` on free attributes."""
    slots = _slots(pattern, cat, clusters)
    fixed = [s for s in slots if not s[2]]
    if any(len(opt) == 0 for _, opt, _ in fixed):
        return []
    rules = []
    for choice in itertools.product(*(range(len(opt)) for _, opt, _ in fixed)):
        values = [ANY] * len(cat)
        for (cols, opt, _), k in zip(fixed, choice):
            for j, c in zip(cols, opt[k]):
                values[j] = cat.value(j, int(c))
        rules.append(tuple(values))
    return rules


def _pad(rules: list, target: int, cat: AttributeCatalog) -> list:
    """Add redundant partial specialisations (one ``Any`` fixed at a time)."""
    rules = list(rules)
    present = set(rules)
    queue = deque(r for r in rules if ANY in r)
    while queue and len(rules) < target:
        r = queue.popleft()
        for j, v in enumerate(r):
            if v != ANY:
                continue
            for value in cat.attributes[j].values:
                extra = r[:j] + (value,) + r[j + 1:]
                if extra in present:
                    continue
                present.add(extra)
                rules.append(extra)
                if ANY in extra:
                    queue.append(extra)
                if len(rules) == target:
                    return rules
    return rules


def _fit_rule_count(rules: list, target: int, cat: AttributeCatalog) -> list:
    """Rewrite ``rules`` into exactly ``target`` rules with the same grounded set.

    ``Any`` conditions are expanded into one rule per value while that fits;
    any remainder is made up with redundant specialisations.
    """
    if len(rules) > target:
        raise InfeasibleCounts(f"the patterns need at least {len(rules)} rules; "
                               f"{target} requested")
    base = list(rules)
    rules = list(rules)
    sizes = [len(a.values) for a in cat.attributes]
    queue = deque(range(len(rules)))
    while queue and len(rules) < target:
        i = queue.popleft()
        remaining = target - len(rules)
        r = rules[i]
        cols = [j for j, v in enumerate(r) if v == ANY and sizes[j] - 1 <= remaining]
        if not cols:
            continue
        j = cols[0]
        values = cat.attributes[j].values
        rules[i] = r[:j] + (values[0],) + r[j + 1:]
        queue.append(i)
        for v in values[1:]:
            queue.append(len(rules))
            rules.append(r[:j] + (v,) + r[j + 1:])
    if len(rules) < target:
        rules = _pad(rules, target, cat)
    if len(rules) < target:
        rules = _pad(base, target, cat)
    if len(rules) != target:
        raise InfeasibleCounts(f"cannot express the policy with {target} rules "
                               f"(at most {len(rules)})")
    return rules


def build_policy(template: SchemaTemplate) -> Policy:
    cat = template.catalog
    rules = []
    for p in template.patterns:
        rules.extend(_pattern_rules(p, cat, template.clusters))
    rules = list(dict.fromkeys(rules))
    rules = _fit_rule_count(rules, template.training_rules, cat)
    out = template.outcome
    return Policy(cat, tuple(Rule.of(r, out) for r in rules), frozenset({template.permission}))


# -- request log ---------------------------------------------------------------------

def _has_new(train: AttributeCatalog, codes: np.ndarray) -> np.ndarray:
    limits = np.array([len(a.values) for a in train.attributes], np.int64)
    return (codes > limits).any(axis=1)


def _sample_negatives(template, ext, train, pool, covered_keys, k, rng) -> np.ndarray:
    """Near misses: granted tuples with one attribute re-drawn, now denied."""
    radices = np.array(ext.radices, np.int64)
    chosen = np.empty((0, len(ext)), np.int64)
    seen = set()
    for _ in range(200):
        if len(chosen) >= k:
            break
        m = 4 * (k - len(chosen)) + 64
        rows = pool[rng.integers(0, len(pool), size=m)].copy()
        col = rng.integers(0, len(ext), size=m)
        rows[np.arange(m), col] = rng.integers(0, radices[col])
        keep = ~oracle_mask(template, ext, rows) & _has_new(train, rows)
        rows = rows[keep]
        fresh = []
        for row, key in zip(rows, ext.keys(rows).tolist()):
            if key in seen or key in covered_keys:
                continue
            seen.add(key)
            fresh.append(row)
        if fresh:
            chosen = np.concatenate([chosen, np.array(fresh)[:k - len(chosen)]])
    if len(chosen) < k:
        raise InfeasibleCounts(f"found only {len(chosen)} of {k} negative requests")
    return chosen


def build_log(template: SchemaTemplate, policy: Policy, rng) -> RequestLog:
    train, ext = policy.catalog, template.extended_catalog
    covered = policy.rebase(ext).grounded
    pos = positive_codes(template, ext)
    cand = pos[_has_new(train, pos) & (covered.find(pos) < 0)]
    if len(cand) < template.positive_requests:
        raise InfeasibleCounts(f"only {len(cand)} uncovered positive requests exist; "
                               f"{template.positive_requests} requested")
    picked = cand[np.sort(rng.choice(len(cand), template.positive_requests, replace=False))]
    neg = _sample_negatives(template, ext, train, pos, set(covered.keys.tolist()),
                            template.negative_requests, rng)
    codes = np.concatenate([picked, neg])
    truth = [template.outcome] * len(picked) + [Outcome(Decision.DENY)] * len(neg)
    order = rng.permutation(len(codes))
    width = len(str(len(codes)))
    reqs = tuple(AccessRequest(ext.decode(codes[i]), truth[i], f"q{n + 1:0{width}d}")
                 for n, i in enumerate(order.tolist()))
    return RequestLog(ext, reqs)


def generate(template: SchemaTemplate) -> SyntheticDataset:
    rng = np.random.default_rng(template.seed)
    policy = build_policy(template)
    return SyntheticDataset(template, policy, build_log(template, policy, rng))


def synthesize(template: SchemaTemplate) -> tuple:
    """(policy over the training catalog, labelled log over the extended catalog)."""
    ds = generate(template)
    return ds.policy, ds.log


# -- templates -----------------------------------------------------------------------

def _attr(cat, name, values):
    return AttributeDef(name, cat, tuple(values))


def _clusters(column: str, groups: Mapping) -> dict:
    return {(column, v): name for name, vs in groups.items() for v in vs}


def university1(seed: int = 0) -> SchemaTemplate:
    years = ("1", "2", "3", "4")
    attrs = (
        _attr(S, "Designation", ("Student", "Teaching-Assistant", "Professor")),
        _attr(S, "Department", ("CSE", "ECE", "ME", "CE")),
        _attr(S, "Degree", ("BTech", "MTech")),
        _attr(S, "Year", years),
        _attr(O, "Resource-Type", ("Assignment", "Quiz", "Lecture-Notes", "Question-Paper",
                                   "Answer-Script", "Mark-Sheet", "Department-Budget")),
        _attr(O, "Department", ("CSE", "ECE", "ME", "CE")),
        _attr(O, "Degree", ("BTech", "MTech")),
        _attr(O, "Year", years),
    )
    additions = (("S_Designation", "Associate-Professor"), ("S_Designation", "Lab-Assistant"),
                 ("S_Department", "IT"), ("S_Degree", "PhD"),
                 ("O_Resource-Type", "Presentation"), ("O_Resource-Type", "Grade-Report"),
                 ("O_Resource-Type", "Office-Record"),
                 ("O_Department", "IT"), ("O_Degree", "PhD"))
    clusters = {}
    clusters |= _clusters("S_Designation", {
        "Learner": ("Student",), "Assistant": ("Teaching-Assistant", "Lab-Assistant"),
        "Faculty": ("Professor", "Associate-Professor")})
    for side in "SO":
        clusters |= _clusters(f"{side}_Degree", {"Undergraduate": ("BTech",),
                                                 "Postgraduate": ("MTech", "PhD")})
        clusters |= _clusters(f"{side}_Department", {
            "Computing": ("CSE", "ECE", "IT"), "Core": ("ME", "CE")})
    clusters |= _clusters("O_Resource-Type", {
        "Coursework": ("Assignment", "Quiz", "Lecture-Notes", "Presentation"),
        "Assessment": ("Question-Paper", "Answer-Script", "Mark-Sheet", "Grade-Report"),
        "Administration": ("Department-Budget", "Office-Record")})
    des, rt = "S_Designation", "O_Resource-Type"
    patterns = (
        Pattern("learner-coursework", (InCluster(des, ("Learner",)), Eq("Department"),
                                       Eq("Degree"), InCluster(rt, ("Coursework",)))),
        Pattern("assistant-coursework", (InCluster(des, ("Assistant",)), Eq("Department"),
                                         InCluster("S_Degree", ("Postgraduate",)),
                                         InCluster(rt, ("Coursework",)))),
        Pattern("faculty-assessment", (InCluster(des, ("Faculty",)), Eq("Department"),
                                       In("S_Degree", (NA,)), In("S_Year", (NA,)),
                                       InCluster(rt, ("Assessment",)))),
        Pattern("faculty-administration", (InCluster(des, ("Faculty",)), Eq("Department"),
                                           In("S_Degree", (NA,)), In("S_Year", (NA,)),
                                           In("O_Degree", (NA,)), In("O_Year", (NA,)),
                                           InCluster(rt, ("Administration",)))),
    )
    return SchemaTemplate("University1", attrs, additions, clusters, patterns,
                          training_rules=53, positive_requests=598, negative_requests=412,
                          seed=seed)


def company(seed: int = 0) -> SchemaTemplate:
    attrs = (
        _attr(S, "Designation", ("Intern", "Junior-Developer", "Developer", "Senior-Developer",
                                 "Tech-Lead", "Tester", "Senior-Tester", "Project-Manager",
                                 "HR-Executive", "HR-Manager", "Accountant",
                                 "Finance-Manager")),
        _attr(S, "Project-Name", ("Apollo", "Zephyr")),
        _attr(S, "Department", ("Development", "Quality-Assurance", "Human-Resources",
                                "Finance", "Management")),
        _attr(O, "Resource-Type", ("Source-Code", "Design-Doc", "Test-Plan", "Bug-Report",
                                   "Employee-Record", "Payroll", "Invoice", "Budget")),
        _attr(O, "Project-Name", ("Apollo", "Zephyr")),
        _attr(O, "Department", ("Development", "Quality-Assurance", "Human-Resources",
                                "Finance")),
    )
    additions = (("S_Designation", "Architect"), ("S_Designation", "QA-Lead"),
                 ("S_Project-Name", "Orion"), ("O_Resource-Type", "Release-Notes"),
                 ("O_Resource-Type", "Test-Report"), ("O_Project-Name", "Orion"))
    clusters = {}
    clusters |= _clusters("S_Designation", {
        "Engineering": ("Intern", "Junior-Developer", "Developer", "Senior-Developer",
                        "Tech-Lead", "Architect"),
        "QA": ("Tester", "Senior-Tester", "QA-Lead"),
        "Management": ("Project-Manager",),
        "HR": ("HR-Executive", "HR-Manager"),
        "Finance": ("Accountant", "Finance-Manager")})
    clusters |= _clusters("O_Resource-Type", {
        "Engineering-Docs": ("Source-Code", "Design-Doc", "Release-Notes"),
        "QA-Docs": ("Test-Plan", "Bug-Report", "Test-Report"),
        "HR-Docs": ("Employee-Record", "Payroll"),
        "Finance-Docs": ("Invoice", "Budget")})
    des, rt = "S_Designation", "O_Resource-Type"
    tech = ("Engineering-Docs", "QA-Docs")
    patterns = (
        Pattern("engineering", (InCluster(des, ("Engineering",)), Eq("Project-Name"),
                                In("S_Department", ("Development", "Management")),
                                In("O_Department", ("Development", "Quality-Assurance")),
                                InCluster(rt, tech))),
        Pattern("qa", (InCluster(des, ("QA",)), Eq("Project-Name"),
                       In("S_Department", ("Quality-Assurance",)),
                       In("O_Department", ("Development", "Quality-Assurance")),
                       InCluster(rt, tech))),
        Pattern("manager", (InCluster(des, ("Management",)),
                            In("S_Department", ("Management",)),
                            InCluster(rt, tech + ("Finance-Docs",)))),
        Pattern("hr", (InCluster(des, ("HR",)), In("S_Project-Name", (NA,)),
                       In("O_Project-Name", (NA,)), In("S_Department", ("Human-Resources",)),
                       In("O_Department", ("Human-Resources", "Finance")),
                       In(rt, ("Employee-Record", "Payroll", "Invoice")))),
        Pattern("finance", (InCluster(des, ("Finance",)), In("S_Project-Name", (NA,)),
                            In("S_Department", ("Finance",)), In("O_Department", ("Finance",)),
                            In(rt, ("Invoice", "Budget", "Payroll")))),
    )
    return SchemaTemplate("Company", attrs, additions, clusters, patterns,
                          training_rules=384, positive_requests=93, negative_requests=198,
                          seed=seed)


UNIVERSITY2_FULL_RULES = 156_775


def university2(seed: int = 0, full_scale: bool = False) -> SchemaTemplate:
    years = ("1", "2", "3", "4")
    courses = tuple(f"C{i:03d}" for i in range(1, 121))
    depts = ("CSE", "ECE", "EE", "ME", "CE")
    attrs = (
        _attr(S, "Designation", ("Student", "Teaching-Assistant", "Assistant-Professor",
                                 "Associate-Professor", "Professor")),
        _attr(S, "Post", ("Head-of-Department", "Course-Coordinator")),
        _attr(S, "Department", depts),
        _attr(S, "Course", courses),
        _attr(S, "Degree", ("BTech", "MTech")),
        _attr(S, "Year", years),
        _attr(O, "Resource-Type", ("Assignment", "Quiz", "Lecture-Notes", "Lab-Manual",
                                   "Question-Paper", "Answer-Script", "Mark-Sheet",
                                   "Department-Budget")),
        _attr(O, "Department", depts),
        _attr(O, "Course", courses),
        _attr(O, "Degree", ("BTech", "MTech")),
        _attr(O, "Year", years),
    )
    additions = (("S_Designation", "Lab-Assistant"), ("S_Designation", "Adjunct-Professor"),
                 ("S_Post", "Dean"), ("S_Department", "IT"),
                 ("S_Course", "C121"), ("S_Course", "C122"),
                 ("O_Resource-Type", "Presentation"), ("O_Resource-Type", "Grade-Report"),
                 ("O_Department", "IT"), ("O_Course", "C121"), ("O_Course", "C122"))
    clusters = {}
    clusters |= _clusters("S_Designation", {
        "Learner": ("Student",), "Assistant": ("Teaching-Assistant", "Lab-Assistant"),
        "Faculty": ("Assistant-Professor", "Associate-Professor", "Professor",
                    "Adjunct-Professor")})
    clusters |= _clusters("S_Post", {"Administrative": ("Head-of-Department", "Dean"),
                                     "Academic": ("Course-Coordinator",)})
    for side in "SO":
        clusters |= _clusters(f"{side}_Department", {
            "Computing": ("CSE", "ECE", "EE", "IT"), "Core": ("ME", "CE")})
    clusters |= _clusters("O_Resource-Type", {
        "Coursework": ("Assignment", "Quiz", "Lecture-Notes", "Lab-Manual", "Presentation"),
        "Assessment": ("Question-Paper", "Answer-Script", "Grade-Report"),
        "Administration": ("Mark-Sheet", "Department-Budget")})
    des, rt = "S_Designation", "O_Resource-Type"
    patterns = (
        Pattern("learner-coursework", (InCluster(des, ("Learner",)), In("S_Post", (NA,)),
                                       Eq("Course"), In("O_Department", (NA,)),
                                       In("O_Degree", (NA,)), InCluster(rt, ("Coursework",)))),
        Pattern("assistant-course", (InCluster(des, ("Assistant",)), In("S_Post", (NA,)),
                                     Eq("Course"), In("S_Degree", ("MTech",)),
                                     In("O_Department", (NA,)), In("O_Degree", (NA,)),
                                     InCluster(rt, ("Coursework", "Assessment")))),
        Pattern("head-administration", (InCluster(des, ("Faculty",)),
                                        InCluster("S_Post", ("Administrative",)),
                                        Eq("Department"), In("S_Course", (NA,)),
                                        In("S_Degree", (NA,)), In("S_Year", (NA,)),
                                        InCluster(rt, ("Administration",)))),
    )
    rules = UNIVERSITY2_FULL_RULES if full_scale else 2000
    return SchemaTemplate("University2", attrs, additions, clusters, patterns,
                          training_rules=rules, positive_requests=308, negative_requests=175,
                          seed=seed)


TEMPLATES = {"University1": university1, "University2": university2, "Company": company}


def get_template(name: str, seed: int = 0, full_scale: bool = False, **overrides) -> SchemaTemplate:
    key = {k.lower(): k for k in TEMPLATES}.get(name.strip().lower())
    if key is None:
        raise ValueError(f"unknown template {name!r}; expected one of {sorted(TEMPLATES)}")
    tpl = university2(seed, full_scale) if key == "University2" else TEMPLATES[key](seed)
    return replace(tpl, **overrides) if overrides else tpl


def template_from_config(path) -> SchemaTemplate:
    """``key = value`` lines: name, seed, full_scale and count overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[template]\n" + Path(path).read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    sec = parser["template"]
    if "name" not in sec:
        raise FormatError(f"{path}: template config needs a 'name'")
    counts = {k: sec.getint(k) for k in ("training_rules", "positive_requests",
                                          "negative_requests") if k in sec}
    unknown = set(sec) - {"name", "seed", "full_scale", "permission"} - set(counts)
    if unknown:
        raise FormatError(f"{path}: unknown template keys {sorted(unknown)}")
    if "permission" in sec:
        counts["permission"] = sec["permission"]
    return get_template(sec["name"], seed=sec.getint("seed", 0),
                        full_scale=sec.getboolean("full_scale", False), **counts)
