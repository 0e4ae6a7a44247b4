import itertools
import math

import pytest

from selective_family import (
    SIZE_SWEEP, ExhaustiveCapExceeded, FamilyFormatError, SelectiveFamily, SelectiveFamilyBuilder,
    brute_force_violation,
    build_selective_family, parse_family, size_tracking, verify_selective, witness_count,
)

SMALL = [(k, N) for N in (2, 4, 8, 16) for k in range(1, 5) if k <= N]


def family_of(k, N, *sets):
    return SelectiveFamily(k, N, tuple(frozenset(s) for s in sets))


def test_too_few_sets_yield_counterexample():
    verdict = verify_selective(family_of(2, 2, {1, 2}), mode='exhaustive')
    assert not verdict.valid
    assert verdict.counterexample == (1, 2)


def test_singletons_are_selective():
    family = family_of(3, 3, {1}, {2}, {3})
    assert verify_selective(family).valid
    assert brute_force_violation(family) is None


def test_witness_count():
    assert witness_count(2, 4) == 4 + 6
    assert witness_count(5, 3) == 7


@pytest.mark.parametrize('k, N', SMALL)
def test_built_families_pass_exhaustive_check(k, N):
    family = build_selective_family(k, N, seed=0)
    verdict = verify_selective(family, mode='exhaustive')
    assert verdict.valid
    assert verdict.is_proof
    assert all(s and s <= set(range(1, N + 1)) for s in family.sets)


def test_exhaustive_check_agrees_with_brute_force():
    builder = SelectiveFamilyBuilder()
    for seed in range(5):
        family = builder.random_sets(3, 8, 4, seed)
        verdict = verify_selective(family, mode='exhaustive')
        assert verdict.counterexample == brute_force_violation(family)


def test_universe_family_for_k_one():
    family = build_selective_family(1, 10)
    assert family.size == 1
    assert family.method == 'universe'


def test_binary_representation_family():
    builder = SelectiveFamilyBuilder(greedy_cap=0)
    family = builder.build(6, 6)
    assert family.method == 'binary'
    assert brute_force_violation(family) is None


def test_random_family_is_verified():
    builder = SelectiveFamilyBuilder(greedy_cap=0)
    family = builder.build(3, 16, seed=4)
    assert family.method == 'random'
    assert verify_selective(family).valid


def test_construction_is_deterministic():
    builder = SelectiveFamilyBuilder(greedy_cap=0)
    assert builder.build(4, 32, seed=2).sets == builder.build(4, 32, seed=2).sets


def test_builder_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SelectiveFamilyBuilder().build(5, 4)


def test_exhaustive_cap():
    family = build_selective_family(2, 8)
    with pytest.raises(ExhaustiveCapExceeded):
        verify_selective(family, mode='exhaustive', cap=10)


def test_sampled_mode_checks_every_singleton():
    family = family_of(2, 5, {1, 2}, {3, 4}, {1}, {3})
    verdict = verify_selective(family, mode='sampled', trials=0)
    assert not verdict.valid
    assert verdict.counterexample == (5,)
    assert not verdict.is_proof


def test_selects_and_slots():
    family = family_of(2, 4, {1, 2}, {2, 3}, {4})
    assert family.slots_of(2) == [0, 1]
    assert family.slots_of(9) == []
    assert family.selects({1, 3})
    assert family.selects({1, 2, 3, 4})
    assert not family.selects({1, 2, 3})
    assert family.matrix().shape == (3, 5)


@pytest.mark.parametrize('k, N', SMALL)
def test_built_families_stay_selective_for_smaller_k(k, N):
    family = build_selective_family(k, N, seed=0)
    for smaller in range(1, k + 1):
        verdict = verify_selective(family, mode='exhaustive', k=smaller)
        assert verdict.valid, (smaller, verdict.counterexample)
        assert verdict.checked == witness_count(smaller, N)


def test_smaller_k_can_hold_where_k_fails():
    family = family_of(2, 2, {1, 2})
    assert verify_selective(family, k=1).valid
    assert not verify_selective(family, k=2).valid


def test_exact_selection_semantics():
    family = family_of(2, 3, {1, 2, 3})
    for subset in itertools.combinations(range(1, 4), 2):
        assert not family.selects(subset)
    assert family.selects({2})


def test_family_text_format():
    family = build_selective_family(2, 8)
    parsed = parse_family(family.to_text())
    assert parsed.sets == tuple(frozenset(s) for s in family.sets)
    assert (parsed.k, parsed.N) == (2, 8)


@pytest.mark.parametrize('text', ["", "2 4 2\n1 2\n", "2 4 1\n1 5\n", "a b c\n"])
def test_parse_family_rejects_malformed(text):
    with pytest.raises(FamilyFormatError):
        parse_family(text)


def test_size_tracking_reports_measured_f_across_sweep():
    report = size_tracking(SIZE_SWEEP, seed=0)
    first = build_selective_family(2, 8, seed=0)
    assert report.f == pytest.approx(first.size / (2 * math.log2(8)))
    assert [(row.k, row.N) for row in report.rows] == list(SIZE_SWEEP)
    assert report.rows[0].ratio == pytest.approx(1.0)
    assert report.rows[0].within
    for row in report.rows:
        family = build_selective_family(row.k, row.N, seed=0)
        assert row.size == family.size
        assert row.method == family.method
        assert row.bound == pytest.approx(report.f * row.k * math.log2(2 * row.N / row.k))
    assert report.holds == all(row.within for row in report.rows)
    assert report.exceeding == [row for row in report.rows if row.ratio > 1 and not row.within]
    assert report.worst == pytest.approx(max(row.size / row.bound for row in report.rows))


def test_size_tracking_sweep_is_greedy_where_feasible():
    report = size_tracking(SIZE_SWEEP, seed=0)
    methods = {(row.k, row.N): row.method for row in report.rows}
    assert all(methods[(k, N)] == 'greedy' for k, N in SIZE_SWEEP if N <= 32)
    assert methods[(8, 64)] == 'random'


def test_size_tracking_empty_sweep():
    report = size_tracking([])
    assert report.f == 0.0
    assert report.holds
    assert report.worst == 0.0
