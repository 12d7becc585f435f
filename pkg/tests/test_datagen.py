import numpy as np
import pytest

from abacpip import datagen
from abacpip.core import Category, covered_mask, covering_rule
from abacpip.errors import FormatError, InfeasibleCounts

TEMPLATES = ("University1", "Company", "University2")


@pytest.fixture(scope="module", params=TEMPLATES)
def synth(request):
    tpl = datagen.get_template(request.param, seed=0)
    return tpl, datagen.generate(tpl)


def sizes(cat, category):
    return tuple(len(a.values) for a in cat.attributes if a.category is category)


def test_university1_schema():
    cat = datagen.university1().catalog
    assert sizes(cat, Category.SUBJECT) == (3, 4, 2, 4)
    assert sizes(cat, Category.OBJECT) == (7, 4, 2, 4)


def test_company_schema():
    cat = datagen.company().catalog
    assert sizes(cat, Category.SUBJECT) == (12, 2, 5)
    assert sizes(cat, Category.OBJECT) == (8, 2, 4)


def test_counts_match_targets(synth):
    tpl, ds = synth
    assert len(ds.policy.rules) == tpl.training_rules
    truths = [q.truth for q in ds.log.requests]
    n_pos = sum(t == tpl.outcome for t in truths)
    assert n_pos == tpl.positive_requests
    assert len(truths) - n_pos == tpl.negative_requests


def test_default_counts():
    assert (datagen.university1().training_rules, len(datagen.synthesize(
        datagen.university1())[1])) == (53, 1010)
    c = datagen.company()
    assert (c.training_rules, c.positive_requests + c.negative_requests) == (384, 291)
    assert datagen.university2().training_rules == 2000
    assert datagen.university2(full_scale=True).training_rules == 156_775


def test_requests_uncovered_and_carry_a_new_value(synth):
    tpl, ds = synth
    assert not covered_mask(ds.policy, ds.log).any()
    cat = ds.policy.catalog
    for q in ds.log.requests[:200]:
        assert covering_rule(ds.policy, q) is None
        assert any(not cat.knows(i, v) for i, v in enumerate(q.values))


def test_truth_matches_generation_oracle(synth):
    tpl, ds = synth
    for q in ds.log.requests:
        assert datagen.oracle(tpl, ds.log.catalog, q.values) == q.truth


def test_positive_rules_follow_patterns(synth):
    tpl, ds = synth
    g = ds.policy.grounded
    mask = datagen.oracle_mask(tpl, ds.policy.catalog, g.codes)
    assert np.array_equal(mask, g.positive_mask)


def test_deterministic_per_seed():
    a = datagen.generate(datagen.company(5))
    b = datagen.generate(datagen.company(5))
    c = datagen.generate(datagen.company(6))
    assert a.policy.rules == b.policy.rules and a.log.requests == b.log.requests
    assert a.log.requests != c.log.requests


def test_infeasible_counts():
    tpl = datagen.get_template("Company", training_rules=10**7)
    with pytest.raises(InfeasibleCounts):
        datagen.generate(tpl)


def test_template_config(tmp_path):
    p = tmp_path / "t.cfg"
    p.write_text("name = university1\nseed = 3\npositive_requests = 100\n")
    tpl = datagen.template_from_config(p)
    assert (tpl.name, tpl.seed, tpl.positive_requests) == ("University1", 3, 100)
    p.write_text("name = university1\ncolour = blue\n")
    with pytest.raises(FormatError):
        datagen.template_from_config(p)
    with pytest.raises(ValueError):
        datagen.get_template("Hospital")
