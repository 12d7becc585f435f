import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abacpip import datagen
from abacpip.core import AttributeCatalog, AttributeDef, Category, Rule, DENY, grant
from abacpip.encoding import (EncoderConfig, encode_dataset, encode_row, extend_catalog,
                              fit_encoder)
from abacpip.errors import DuplicateValue, InvalidClusterMap, UnknownValue, WidthMismatch

from _gen import catalogs, cluster_maps, make_catalog
from _props import check_encoder_invariants

S, O = Category.SUBJECT, Category.OBJECT


def dept_catalog():
    return AttributeCatalog((
        AttributeDef("Department", S, ("CS", "EE", "ME", "CE")),
        AttributeDef("Degree", S, ("BTech", "MTech")),
        AttributeDef("Department", O, ("CS", "EE", "ME", "CE")),
        AttributeDef("Degree", O, ("BTech", "MTech")),
    ))


def test_university1_column_counts():
    cat = datagen.university1().catalog
    assert fit_encoder(cat).n_features == 8
    enc = fit_encoder(cat, EncoderConfig(arfe_enabled=True))
    assert enc.n_features == 11
    assert enc.feature_names[8:] == ("F_Department", "F_Degree", "F_Year")


def test_baseline_codes_follow_catalog_order():
    cat = AttributeCatalog((AttributeDef("Designation", S, (
        "Assistant Professor", "Associate Professor", "Professor")),))
    enc = fit_encoder(cat)
    assert [enc.code_of("S_Designation", v) for v in cat.attributes[0].values] == [1, 2, 3]


@pytest.mark.parametrize("s,o,want", [("CS", "CS", 1), ("CS", "EE", 0), ("NA", "EE", 2),
                                      ("NA", "NA", 2)])
def test_arfe_values(s, o, want):
    enc = fit_encoder(dept_catalog(), EncoderConfig(arfe_enabled=True))
    row = encode_row(enc, (s, "BTech", o, "BTech"))
    assert row[4] == want


def test_na_degree_relation():
    enc = fit_encoder(dept_catalog(), EncoderConfig(arfe_enabled=True))
    assert encode_row(enc, ("CS", "NA", "CS", "BTech"))[5] == 2


def test_unknown_value_names_attribute():
    enc = fit_encoder(dept_catalog())
    with pytest.raises(UnknownValue) as exc:
        encode_row(enc, ("IT", "BTech", "CS", "BTech"))
    assert exc.value.attribute == "S_Department" and exc.value.value == "IT"


def test_transform_width_checked():
    enc = fit_encoder(dept_catalog())
    with pytest.raises(WidthMismatch):
        enc.transform(np.zeros((2, 3), dtype=np.int64))


def test_avc_reorders_codes_and_adds_column():
    cat = AttributeCatalog((AttributeDef("Type", O, ("Quiz", "Lab", "Assignment", "Exam")),))
    clusters = {("O_Type", "Quiz"): "eval", ("O_Type", "Lab"): "work",
                ("O_Type", "Assignment"): "eval", ("O_Type", "Exam"): "eval"}
    enc = fit_encoder(cat, EncoderConfig(avc_enabled=True, clusters=clusters))
    codes = {v: enc.code_of("O_Type", v) for v in cat.attributes[0].values}
    assert codes == {"Quiz": 1, "Assignment": 2, "Exam": 3, "Lab": 4}
    assert enc.feature_names == ("O_Type", "C_O_Type")
    assert encode_row(enc, ("Lab",)) == [4, 2]
    assert encode_row(enc, ("NA",)) == [0, 0]


def test_invalid_cluster_maps():
    cat = dept_catalog()
    with pytest.raises(InvalidClusterMap):
        fit_encoder(cat, EncoderConfig(avc_enabled=True, clusters={("S_Nope", "CS"): "x"}))
    with pytest.raises(InvalidClusterMap):
        fit_encoder(cat, EncoderConfig(avc_enabled=True,
                                       clusters={("S_Department", "IT"): "x"}))
    # a clustered attribute must cluster every value
    with pytest.raises(InvalidClusterMap):
        fit_encoder(cat, EncoderConfig(avc_enabled=True,
                                       clusters={("S_Department", "CS"): "x"}))


def test_extend_catalog_appends_next_code():
    cat = AttributeCatalog((AttributeDef("Department", S, ("CS", "EE", "ME", "CE")),))
    enc = fit_encoder(cat)
    ext = extend_catalog(enc, [("S_Department", "Information Technology")])
    assert ext.code_of("S_Department", "Information Technology") == 5
    assert all(ext.code_of("S_Department", v) == enc.code_of("S_Department", v)
               for v in cat.attributes[0].values)
    assert extend_catalog(enc, []) is enc
    with pytest.raises(DuplicateValue):
        extend_catalog(enc, [("S_Department", "CS")])


def test_extend_under_avc_needs_cluster():
    cat = AttributeCatalog((AttributeDef("Type", O, ("Quiz", "Assignment")),))
    clusters = {("O_Type", "Quiz"): "eval", ("O_Type", "Assignment"): "work"}
    enc = fit_encoder(cat, EncoderConfig(avc_enabled=True, clusters=clusters))
    with pytest.raises(InvalidClusterMap):
        extend_catalog(enc, [("O_Type", "Presentation")])
    ext = extend_catalog(enc, [("O_Type", "Presentation")], {("O_Type", "Presentation"): "work"})
    assert ext.cluster_of("O_Type", "Presentation") == ext.cluster_of("O_Type", "Assignment")
    # models trained before stay valid: old codes unchanged
    assert ext.code_of("O_Type", "Quiz") == enc.code_of("O_Type", "Quiz")


def test_encode_dataset_classes():
    cat = make_catalog([2], [2])
    enc = fit_encoder(cat)
    deny = [Rule.of(("D0", "D0"), DENY), Rule.of(("D1", "D0"), DENY)]
    assert encode_dataset(enc, deny).y.tolist() == [0, 0]
    one = deny + [Rule.of(("D0", "D1"), grant("read"))]
    assert encode_dataset(enc, one).class_names == ("DENY", "read")
    two = one + [Rule.of(("D1", "D1"), grant("read", "write"))]
    ds = encode_dataset(enc, two)
    assert ds.class_names == ("DENY", "read", "read;write")
    assert ds.y.tolist() == [0, 0, 1, 2]


def test_dataset_csv(tmp_path):
    cat = make_catalog([2], [2])
    ds = encode_dataset(fit_encoder(cat), [Rule.of(("D0", "D1"), grant("read"))])
    ds.to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines() == ["S_Dept,O_Dept,label", "1,2,1"]


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_encoding_invariants(data):
    cat = data.draw(catalogs())
    clusters = data.draw(cluster_maps(cat))
    check_encoder_invariants(cat, clusters, data.draw(st.integers(0, 2**32 - 1)))


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_extension_preserves_old_features(data):
    cat = data.draw(catalogs())
    clusters = data.draw(cluster_maps(cat))
    enc = fit_encoder(cat, EncoderConfig(True, True, clusters))
    col = cat.columns[data.draw(st.integers(0, len(cat) - 1))]
    extra = {(col, "new"): "fresh"} if any(c == col for c, _ in clusters) else {}
    ext = extend_catalog(enc, [(col, "new")], extra)
    rng = np.random.default_rng(0)
    codes = np.stack([rng.integers(0, r, 32) for r in cat.radices], axis=1)
    assert np.array_equal(enc.transform(codes), ext.transform(codes))
