from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from abacpip.core import DENY, grant
from abacpip.errors import EmptyCounts, MissingTruth
from abacpip.metrics import (ConfusionCounts, ResultRow, compute_metrics, format_table, score,
                             write_results_csv)

READ = grant("read")
RW = grant("read", "write")
counts = st.builds(ConfusionCounts, *(st.integers(0, 10_000) for _ in range(4))).filter(
    lambda c: c.total > 0)


def test_perfect_and_inverted():
    pairs = [(READ, READ)] * 598 + [(DENY, DENY)] * 412
    assert score(pairs) == ConfusionCounts(598, 412, 0, 0)
    inverted = [(DENY, READ)] * 598 + [(READ, DENY)] * 412
    assert score(inverted) == ConfusionCounts(0, 0, 412, 598)


def test_hand_enumerated_toy_set():
    pairs = [(READ, READ), (READ, DENY), (DENY, READ), (DENY, DENY), (RW, READ), (DENY, DENY)]
    assert score(pairs) == ConfusionCounts(tpa=2, tna=2, fpa=1, fna=1)
    assert score(pairs, strict=True) == ConfusionCounts(tpa=1, tna=2, fpa=2, fna=1)


def test_missing_truth():
    with pytest.raises(MissingTruth):
        score([(READ, None)])


def test_all_ones():
    r = compute_metrics(ConfusionCounts(1, 1, 0, 0))
    assert (r.accuracy, r.precision, r.recall, r.f1) == (1, 1, 1, 1)


def test_zero_division_arms():
    r = compute_metrics(ConfusionCounts(tpa=0, tna=10, fpa=0, fna=5))
    assert (r.precision, r.recall, r.f1) == (0, 0, 0)
    assert r.zero_division == frozenset({"precision", "f1"})


def test_derived_example():
    r = compute_metrics(ConfusionCounts(tpa=598, tna=370, fpa=42, fna=0))
    assert r.precision == Fraction(598, 640)
    assert float(r.precision) == pytest.approx(0.9344, abs=5e-5)
    assert r.recall == 1
    assert float(r.accuracy) == pytest.approx(0.9584, abs=5e-5)
    assert float(r.f1) == pytest.approx(0.9661, abs=5e-5)
    assert r.formatted() == {"accuracy": "0.958", "precision": "0.934", "recall": "1.000",
                             "f1": "0.966"}


def test_empty_counts():
    with pytest.raises(EmptyCounts):
        compute_metrics(ConfusionCounts())


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


@given(counts)
def test_accuracy_is_exact_ratio(c):
    assert compute_metrics(c).accuracy == Fraction(c.tpa + c.tna, c.total)


@given(counts)
def test_f1_between_precision_and_recall(c):
    r = compute_metrics(c)
    if r.precision > 0 and r.recall > 0:
        assert min(r.precision, r.recall) <= r.f1 <= max(r.precision, r.recall)


@given(st.lists(st.tuples(st.sampled_from([READ, DENY]), st.sampled_from([READ, DENY])),
                min_size=1, max_size=50))
def test_swapping_labels_swaps_cells(pairs):
    flip = {READ: DENY, DENY: READ}
    a = score(pairs)
    b = score([(flip[p], flip[t]) for p, t in pairs])
    assert (b.tpa, b.tna, b.fpa, b.fna) == (a.tna, a.tpa, a.fna, a.fpa)
    assert compute_metrics(a).accuracy == compute_metrics(b).accuracy


def test_result_outputs(tmp_path):
    rows = [ResultRow("U", s, lr, compute_metrics(ConfusionCounts(5, 3, 1, 1)))
            for s in ("naive", "arfe") for lr in ("DT", "RF")]
    write_results_csv(rows, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 5
    assert lines[1] == "U,naive,DT,5,3,1,1,0.800,0.833,0.833,0.833"
    table = format_table(rows)
    assert "Acc" in table and "F1-s" in table
    assert [ln.split("|")[0].strip() for ln in table.splitlines()[4:6]] == ["DT", "RF"]
