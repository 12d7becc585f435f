import pytest

from abacpip import datagen
from abacpip.errors import FormatError, UnknownValue
from abacpip.policy_io import (read_additions, read_catalog, read_clusters, read_log,
                               read_policy, write_additions, write_catalog, write_clusters,
                               write_log, write_policy)


@pytest.fixture(scope="module")
def ds():
    return datagen.generate(datagen.university1(1))


def test_round_trip(tmp_path, ds):
    write_catalog(ds.policy.catalog, tmp_path / "c.csv")
    write_additions(ds.additions, tmp_path / "a.csv")
    write_clusters(ds.template.clusters, tmp_path / "k.csv")
    write_policy(ds.policy, tmp_path / "p.csv")
    write_log(ds.log, tmp_path / "l.csv")
    cat = read_catalog(tmp_path / "c.csv")
    assert cat == ds.policy.catalog
    adds = read_additions(tmp_path / "a.csv")
    assert adds == ds.additions
    assert read_clusters(tmp_path / "k.csv") == dict(ds.template.clusters)
    assert read_policy(tmp_path / "p.csv", cat).rules == ds.policy.rules
    log_ = read_log(tmp_path / "l.csv", cat.extend(adds))
    assert log_.requests == ds.log.requests


def test_policy_header_format(tmp_path, ds):
    write_policy(ds.policy, tmp_path / "p.csv")
    head = (tmp_path / "p.csv").read_text().splitlines()[0].split(",")
    assert head[:4] == ["S_Designation", "S_Department", "S_Degree", "S_Year"]
    assert head[-2:] == ["decision", "permissions"]


def test_decision_alias_in_log(tmp_path):
    cat_csv = tmp_path / "c.csv"
    cat_csv.write_text("category,attribute,value\nSubject,Role,a\nObject,Kind,b\n")
    (tmp_path / "l.csv").write_text("S_Role,O_Kind,decision\na,b,DENY\nNA,b,\n")
    log_ = read_log(tmp_path / "l.csv", read_catalog(cat_csv))
    assert [q.truth.name if q.truth else None for q in log_.requests] == ["DENY", None]


def test_malformed_files(tmp_path):
    bad = tmp_path / "c.csv"
    bad.write_text("cat,attr\nSubject,Role\n")
    with pytest.raises(FormatError):
        read_catalog(bad)
    bad.write_text("category,attribute,value\nAlien,Role,a\n")
    with pytest.raises(FormatError):
        read_catalog(bad)
    bad.write_text("category,attribute,value\nSubject,Role,a\nObject,Kind,b\n")
    cat = read_catalog(bad)
    p = tmp_path / "p.csv"
    p.write_text("S_Role,O_Kind,decision,permissions\na,b,MAYBE,\n")
    with pytest.raises(FormatError):
        read_policy(p, cat)
    p.write_text("S_Role,decision,permissions\na,GRANT,read\n")
    with pytest.raises(FormatError):
        read_policy(p, cat)
    p.write_text("S_Role,O_Kind,decision,permissions\na,zzz,GRANT,read\n")
    with pytest.raises(UnknownValue):
        read_policy(p, cat)
    p.write_text("S_Role,O_Kind,decision,permissions\na,b,DENY,read\n")
    with pytest.raises(FormatError):
        read_policy(p, cat)
