import pytest
from hypothesis import given, strategies as st

from decoyanon.collusion import (attack_report, bin_count, class_sizes, close_to_k_census, collude,
                                 guess_success_rate, infer_levels, link_counts,
                                 risk_outlier_screen, size_histogram)
from decoyanon.dataset import AttributeSchema, Dataset, Table
from decoyanon.decoys import DecoyPolicy, HardeningPolicy, make_releases
from decoyanon.errors import ValidationError
from decoyanon.hierarchy import MappingHierarchy

from oracles import brute_force_unmatched

HS = {"g": MappingHierarchy("g", {v: ["*"] for v in "abcdef"})}


def table(*groups):
    rows = [(v, "x") for v, n in groups for _ in range(n)]
    return Table(["g", "dx"], rows)


def test_constructed_pair():
    base = [("a", 3), ("b", 4)]
    r1, r2 = table(*base, ("c", 3)), table(*base, ("d", 3))
    assert collude([r1, r2], ["g"], HS) == [[("c",)], [("d",)]]


def test_identical_releases_have_no_suspects():
    r = table(("a", 3), ("b", 4))
    assert collude([r, r, r], ["g"], HS) == [[], [], []]


def test_any_versus_all():
    r1 = table(("a", 2), ("b", 2))
    r2 = table(("a", 2))
    r3 = table(("a", 2), ("b", 2))
    assert collude([r1, r2, r3], ["g"], HS, mode="any")[0] == [("b",)]
    assert collude([r1, r2, r3], ["g"], HS, mode="all")[0] == []


def test_generalized_peer_counts_as_match():
    r1 = table(("a", 2))
    r2 = table(("*", 2))
    assert collude([r1, r2], ["g"], HS) == [[], []]
    assert collude([r1, r2], ["g"], HS, strict=True) == [[], []]
    # strict mode ignores the equal-value case
    assert collude([r1, r1], ["g"], HS, strict=True) == [[("a",)], [("a",)]]


def test_collude_needs_two():
    with pytest.raises(ValidationError):
        collude([table(("a", 1))], ["g"], HS)
    with pytest.raises(ValidationError):
        collude([table(("a", 1))] * 2, ["g"], HS, mode="some")


def test_close_to_k_band():
    assert close_to_k_census([9, 10, 11, 12], 10) == 2
    assert close_to_k_census([50, 50, 50], 10) == 0
    assert close_to_k_census({"x": 22, "y": 20}, 20) == 2
    with pytest.raises(ValidationError):
        close_to_k_census([1], 0)


@given(sizes=st.lists(st.integers(1, 40), max_size=60), k=st.integers(1, 30))
def test_census_matches_naive(sizes, k):
    assert close_to_k_census(sizes, k) == len([s for s in sizes if k <= s <= int(1.1 * k + 1e-9)])


def test_census_on_view(scenario):
    pop, view, hs = scenario
    naive = sum(1 for c in view.classes if 10 <= c.size <= 11)
    assert close_to_k_census(view, 10) == naive


def test_histogram():
    h = size_histogram([10, 10, 11, 25], bin_width=5)
    assert h == [(10, 15, 3), (25, 30, 1)]
    assert bin_count(h, 12) == 3 and bin_count(h, 20) == 0
    assert size_histogram([3, 3, 4]) == [(3, 4, 2), (4, 5, 1)]


@given(sizes=st.lists(st.integers(1, 200), max_size=80), w=st.integers(1, 20))
def test_histogram_conserves_counts(sizes, w):
    h = size_histogram(sizes, w)
    assert sum(n for _, _, n in h) == len(sizes)
    assert all(hi - lo == w and lo % w == 0 for lo, hi, _ in h)


def test_infer_levels(scenario):
    pop, view, hs = scenario
    t = view.to_table()
    assert infer_levels(t, view.quasi, view.hierarchy_list()) == view.level_vector


def test_link_counts_and_screen():
    schema = (AttributeSchema("g", "quasi"),)
    pop = Dataset(schema, [(v,) for v in "a" * 20 + "b" * 18 + "c" * 19 + "d" * 8])
    release = table(("a", 2), ("b", 2), ("c", 2), ("d", 2))
    assert link_counts(release, pop, ["g"], HS) == {("a",): 20, ("b",): 18, ("c",): 19, ("d",): 8}
    flagged = risk_outlier_screen(release, pop, ["g"], HS, 1.5)
    assert [f["tuple"] for f in flagged] == [("d",)]
    assert risk_outlier_screen(release, pop, ["g"], HS, 2.5) == []
    med = risk_outlier_screen(release, pop, ["g"], HS, 1.5, reference="median")
    assert [f["tuple"] for f in med] == [("d",)]


def test_guess_success_rate():
    suspects = [("a",), ("b",), ("c",), ("d",)]
    rate = guess_success_rate(suspects, [("a",)], 10_000, 3)
    assert abs(rate - 0.25) <= 0.02
    with pytest.raises(ValidationError):
        guess_success_rate([], [], 10, 0)


def test_suspects_match_brute_force_on_synthetic(scenario):
    pop, view, hs = scenario
    plan = make_releases(view, pop, 3, DecoyPolicy(n_d=2, seed=5), HardeningPolicy("random", 2))
    tables = [r.table.project(view.quasi) for r in plan.releases]
    expected = brute_force_unmatched(tables, view.hierarchy_list())
    got = collude(plan.releases, view.quasi, view.hierarchies)
    assert [set(g) for g in got] == [set(e) for e in expected]
    for r, s in zip(plan.releases, got):
        assert len(s) == 4


def test_attack_report_shape(scenario):
    pop, view, hs = scenario
    plan = make_releases(view, pop, 2, DecoyPolicy(n_d=1, seed=2))
    rep = attack_report(plan.releases, ["A", "B"], view.quasi, view.hierarchies, view.k)
    assert [r["release"] for r in rep["releases"]] == ["A", "B"]
    for r, rel in zip(rep["releases"], plan.releases):
        assert [tuple(s["tuple"]) for s in r["suspects"]] == rel.decoy_signatures
        assert r["classes"] == len(class_sizes(rel, view.quasi))
        assert sum(b[2] for b in r["size_histogram"]) == r["classes"]
