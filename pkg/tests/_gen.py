"""Random catalogs and policies shared by the test modules, plus brute-force oracles."""

import itertools

import numpy as np
from hypothesis import strategies as st

from abacpip.core import (ANY, NA, AttributeCatalog, AttributeDef, Category, Exhaustive,
                          Policy, Rule, DENY, grant)
from abacpip.encoding import EncoderConfig, build_dataset, class_table, fit_encoder
from abacpip.errors import ConsistencyViolation, EmptyComplement
from abacpip.inference import training_table

NAMES = ("Dept", "Degree", "Year", "Role", "Kind")
OUTCOMES = (DENY, grant("read"), grant("read", "write"))


def make_catalog(subject_sizes, object_sizes, names=NAMES):
    attrs = []
    for cat, sizes in ((Category.SUBJECT, subject_sizes), (Category.OBJECT, object_sizes)):
        for name, n in zip(names, sizes):
            attrs.append(AttributeDef(name, cat, tuple(f"{name[0]}{k}" for k in range(n))))
    return AttributeCatalog(tuple(attrs))


def random_catalog(rng, max_universe=10_000, max_side=3, max_values=4):
    while True:
        s = rng.integers(1, max_values + 1, size=rng.integers(1, max_side + 1)).tolist()
        o = rng.integers(1, max_values + 1, size=rng.integers(1, max_side + 1)).tolist()
        cat = make_catalog(s, o)
        if cat.universe_size <= max_universe:
            return cat


def random_rule(rng, cat, any_rate=0.15, na_rate=0.1, outcomes=OUTCOMES):
    vals = []
    for a in cat.attributes:
        u = rng.random()
        if u < any_rate:
            vals.append(ANY)
        elif u < any_rate + na_rate:
            vals.append(NA)
        else:
            vals.append(a.values[rng.integers(len(a.values))])
    return Rule.of(vals, outcomes[rng.integers(len(outcomes))])


def random_policy(rng, cat, n_rules, any_rate=0.15, outcomes=OUTCOMES):
    """Consistent policy with at least one positive rule (conflicting draws are dropped)."""
    rules = []
    for _ in range(8 * n_rules):
        if len(rules) == n_rules:
            break
        r = random_rule(rng, cat, any_rate, outcomes=outcomes)
        try:
            Policy(cat, rules + [r]).grounded
        except ConsistencyViolation:
            continue
        rules.append(r)
    while not any(r.outcome != DENY for r in rules):
        r = random_rule(rng, cat, 0.0, outcomes=(grant("read"),))
        try:
            Policy(cat, rules + [r]).grounded
        except ConsistencyViolation:
            rules.pop(0)
            continue
        rules.append(r)
    return Policy(cat, rules)


def universe(cat):
    domains = [(NA,) + a.values for a in cat.attributes]
    return list(itertools.product(*domains))


def expand(rule, cat):
    """Brute-force ``Any`` expansion of one rule."""
    domains = [a.values if v == ANY else (v,) for v, a in zip(rule.values, cat.attributes)]
    return list(itertools.product(*domains))


def grounded_table(policy):
    """Oracle dict tuple -> outcome built directly from rule expansion."""
    table = {}
    for r in policy.rules:
        for t in expand(r, policy.catalog):
            table.setdefault(t, r.outcome)
    return table


@st.composite
def catalogs(draw, max_side=3, max_values=5, shared=True):
    """Hypothesis catalogs; with ``shared`` subject and object names overlap."""
    n_s = draw(st.integers(1, max_side))
    n_o = draw(st.integers(1, max_side))
    s_sizes = draw(st.lists(st.integers(1, max_values), min_size=n_s, max_size=n_s))
    o_sizes = draw(st.lists(st.integers(1, max_values), min_size=n_o, max_size=n_o))
    o_names = NAMES if shared else tuple(reversed(NAMES))
    attrs = [AttributeDef(n, Category.SUBJECT, tuple(f"v{k}" for k in range(m)))
             for n, m in zip(NAMES, s_sizes)]
    attrs += [AttributeDef(n, Category.OBJECT, tuple(f"v{k}" for k in range(m)))
              for n, m in zip(o_names, o_sizes)]
    return AttributeCatalog(tuple(attrs))


@st.composite
def cluster_maps(draw, cat):
    """Random cluster assignment for a random subset of attributes."""
    clusters = {}
    for a in cat.attributes:
        if draw(st.booleans()):
            k = draw(st.integers(1, len(a.values)))
            for v in a.values:
                clusters[(a.column, v)] = f"c{draw(st.integers(0, k - 1))}"
    return clusters


def code_rows(rng, cat, n):
    return np.stack([rng.integers(0, r, size=n) for r in cat.radices], axis=1).astype(np.int64)


def memorization_case(rng, max_rows=5000):
    """(dataset, oracle labels) for a random consistent policy.

    Training rows come from the pipeline's own training table; the expected
    label of each row is looked up in a brute-force expansion of the rules,
    with every other tuple denied.
    """
    while True:
        cat = random_catalog(rng, max_universe=max_rows)
        p = random_policy(rng, cat, int(rng.integers(2, 12)), any_rate=0.25)
        try:
            codes, outcomes = training_table(p, Exhaustive())
        except EmptyComplement:
            continue
        if len(codes) <= max_rows:
            break
    classes = class_table(outcomes)
    index = {o: k for k, o in enumerate(classes)}
    table = grounded_table(p)
    expected = np.array([index[table.get(cat.decode(r), DENY)] for r in codes])
    labels = np.array([index[o] for o in outcomes], dtype=np.int64)
    strategy = ("naive", "arfe")[int(rng.integers(2))]
    enc = fit_encoder(cat, EncoderConfig.from_strategy(strategy))
    return build_dataset(enc, codes, labels, classes), expected
