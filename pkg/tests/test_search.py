"""Frame enumeration, countermodel search, calibration, differential suite."""

import json

import pytest

from onevar.formulas import FormulaStore, parse
from onevar.kripke import Frame1, check_naive
from onevar.search import (CALIBRATION_CORPUS, REFUTABLE_CORPUS,
                           VALID_CORPUS_TT,
                           FactorClass, NoPassingVariant, SearchBudget,
                           calibrate_variants, differential_suite,
                           enumerate_frames, find_all_countermodels,
                           is_member, random_formula, search_countermodel)
from onevar.translation import (DEFAULT_VARIANT, K_MODE_DEFAULT_VARIANT,
                                VARIANT_GRID, TranslationContext,
                                VariantConfig)

TT = (FactorClass.T, FactorClass.T)
TS5 = (FactorClass.T, FactorClass.S5)
KK = (FactorClass.K, FactorClass.K)


def brute_count(size, predicate):
    """Independent oracle: filter every relation on ``size`` worlds."""
    cells = [(a, b) for a in range(size) for b in range(size)]
    count = 0
    for mask in range(1 << len(cells)):
        edges = [cells[i] for i in range(len(cells)) if mask >> i & 1]
        if predicate(Frame1(size, edges)):
            count += 1
    return count


class TestEnumeration:
    def test_hand_counts(self):
        assert len(enumerate_frames(FactorClass.T, 1)) == 1
        assert len(enumerate_frames(FactorClass.K, 1)) == 2
        assert len(enumerate_frames(FactorClass.T, 2)) == 4

    def test_counts_against_brute_filter(self):
        for size in (1, 2, 3):
            for cls in FactorClass:
                expected = brute_count(size, lambda fr: is_member(fr, cls))
                assert len(enumerate_frames(cls, size)) == expected

    def test_known_class_sizes(self):
        # equivalence relations on 3 points; preorders on 3 points
        assert len(enumerate_frames(FactorClass.S5, 3)) == 5
        assert len(enumerate_frames(FactorClass.S4, 3)) == 29

    def test_every_emitted_frame_is_a_member(self):
        for size in (1, 2, 3):
            for cls in FactorClass:
                for frame in enumerate_frames(cls, size):
                    assert is_member(frame, cls)

    def test_deterministic_order(self):
        a = enumerate_frames(FactorClass.S4, 3)
        b = enumerate_frames(FactorClass.S4, 3)
        assert [f.edges for f in a] == [f.edges for f in b]

    def test_size_zero_rejected(self):
        with pytest.raises(ValueError):
            enumerate_frames(FactorClass.T, 0)


class TestSearch:
    def test_reflexivity_axiom_has_no_countermodel(self, store):
        f = parse("[1]p1 -> p1", 2, store)
        out = search_countermodel(f, TT, SearchBudget(max_worlds_per_factor=2))
        assert out.status == "none-within-bounds"

    def test_converse_found_on_two_point_factor(self, store):
        f = parse("p1 -> [1]p1", 2, store)
        out = search_countermodel(f, TT, SearchBudget(max_worlds_per_factor=2))
        assert out.found
        assert out.model.factors[0].worlds == 2
        assert out.model.factors[0].is_reflexive

    def test_left_commutation_valid(self, store):
        f = parse("[1][2]p1 -> [2][1]p1", 2, store)
        out = search_countermodel(f, TT, SearchBudget(max_worlds_per_factor=2))
        assert out.status == "none-within-bounds"

    def test_found_models_verified_naively(self, store):
        f = parse("p1 -> [2]p1", 2, store)
        out = search_countermodel(f, TT, SearchBudget())
        assert out.found
        assert not check_naive(out.model, out.model.point, f)

    def test_determinism_and_monotonicity(self, store):
        f = parse("p1 -> [1]p1", 2, store)
        small = search_countermodel(f, TT, SearchBudget(max_worlds_per_factor=2))
        large = search_countermodel(f, TT, SearchBudget(max_worlds_per_factor=3))
        assert small.found and large.found
        # deterministic ordering: the larger budget finds the same model
        assert small.model.to_json() == large.model.to_json()

    def test_budget_exhaustion_reported_distinctly(self, store):
        f = parse("[1]p1 -> p1", 2, store)
        out = search_countermodel(
            f, TT, SearchBudget(max_worlds_per_factor=3, time_limit=0.0))
        assert out.status == "budget-exhausted"

    def test_zero_budget_rejected(self, store):
        f = parse("p1", 2, store)
        with pytest.raises(ValueError):
            search_countermodel(f, TT, SearchBudget(max_worlds_per_factor=0))

    def test_exhaustive_mode_refuses_sampling(self, store):
        f = parse("p1 & p2", 2, store)
        oversized = SearchBudget(per_factor_max=(5, 4), exhaustive=True)
        with pytest.raises(ValueError):
            search_countermodel(f, TT, oversized)
        # within the cutoff the flag changes nothing
        small = SearchBudget(max_worlds_per_factor=2, exhaustive=True)
        assert search_countermodel(f, TT, small).found

    def test_whole_refutable_corpus_found(self, store):
        budget = SearchBudget(max_worlds_per_factor=3)
        for text in REFUTABLE_CORPUS:
            f = parse(text, 2, store)
            out = search_countermodel(f, TT, budget)
            assert out.found, text

    def test_whole_valid_corpus_certified(self, store):
        budget = SearchBudget(max_worlds_per_factor=2, exhaustive=True)
        for text in VALID_CORPUS_TT:
            f = parse(text, 2, store)
            out = search_countermodel(f, TT, budget)
            assert out.status == "none-within-bounds", text

    def test_find_all_collects_every_model(self, store):
        f = parse("p1", 2, store)
        found, status = find_all_countermodels(
            f, TT, SearchBudget(max_worlds_per_factor=1))
        # one T frame per factor, two valuations of one variable over one
        # world; only the empty one refutes p1 at the point
        assert status == "none-within-bounds"
        assert len(found) == 1


class TestRandomFormula:
    def test_deterministic_and_bounded(self, store):
        import random as _random
        a = [random_formula(store, _random.Random(9), 2, 3, 3)
             for _ in range(20)]
        b = [random_formula(store, _random.Random(9), 2, 3, 3)
             for _ in range(20)]
        assert a == b
        for f in a:
            assert f.depth <= 3
            assert all(1 <= v <= 3 for v in f.var_set)


class TestCalibration:
    def test_default_variant_selected(self, store):
        budget = SearchBudget(max_worlds_per_factor=3, seed=7)
        report = calibrate_variants(VARIANT_GRID, CALIBRATION_CORPUS,
                                    [TT, TS5], budget, store)
        assert report.selected == DEFAULT_VARIANT.name
        assert report.ties == (DEFAULT_VARIANT.name,)
        assert report.passed_all(report.selected)

    def test_wrong_variants_fail_with_witnesses(self, store):
        budget = SearchBudget(max_worlds_per_factor=2, seed=7)
        report = calibrate_variants(VARIANT_GRID, ("p1", "p1 -> [1]p1"),
                                    [TT], budget, store)
        for variant in VARIANT_GRID:
            if variant.name == DEFAULT_VARIANT.name:
                continue
            assert not report.passed_all(variant.name)
            assert variant.name in report.witnesses

    def test_agreement_failure_witnessed_on_positive_instance(self, store):
        # an instance whose countermodel forces a true source variable;
        # keeping the first rung unmarked starves the marker, so the lone
        # grid entry fails and the error carries the verdict table
        budget = SearchBudget(max_worlds_per_factor=2, seed=7)
        with pytest.raises(NoPassingVariant) as err:
            calibrate_variants([VariantConfig(mark_first_rung=False)],
                               ("p1 -> [1]p1",), [TT], budget, store)
        report = err.value.report
        name = VariantConfig(mark_first_rung=False).name
        assert name in report.witnesses
        row = report.rows[name]
        assert row["marker-agreement"][0] < row["marker-agreement"][1]

    def test_report_json_deterministic(self, store):
        budget = SearchBudget(max_worlds_per_factor=2, seed=13)
        docs = []
        for _ in range(2):
            fresh = FormulaStore()
            report = calibrate_variants(VARIANT_GRID, ("p1", "p1 -> [1]p1"),
                                        [TT], budget, fresh)
            docs.append(json.dumps(report.to_json(), sort_keys=True))
        assert docs[0] == docs[1]

    def test_k_mode_ties_surfaced(self, store):
        budget = SearchBudget(max_worlds_per_factor=2, seed=7)
        report = calibrate_variants(VARIANT_GRID,
                                    CALIBRATION_CORPUS + ("[1]p1 -> p1",),
                                    [KK], budget, store, k_mode=True)
        assert report.selected == K_MODE_DEFAULT_VARIANT.name
        assert set(report.ties) == {"composite+rung0",
                                    "composite+rung0+shield"}


class TestDifferentialSuite:
    def test_both_directions_on_bottom(self, store):
        report = differential_suite(
            ("F",), TT,
            SearchBudget(max_worlds_per_factor=1),
            SearchBudget(per_factor_max=(4, 1)),
            store)
        row = report.rows[0]
        assert row.source_search == "found"
        assert row.transfer == "verified"
        assert row.round_trip == "verified"
        assert row.reduction_search == "found"
        assert row.extraction == "verified"
        assert report.passed

    def test_valid_formula_vacuous(self, store):
        report = differential_suite(
            ("[1]p1 -> p1",), TT,
            SearchBudget(max_worlds_per_factor=2),
            SearchBudget(per_factor_max=(2, 1)),
            store)
        row = report.rows[0]
        assert row.source_search == "none-within-bounds"
        assert row.transfer == "vacuous"
        assert report.passed

    def test_transfer_exercised_end_to_end(self, store):
        report = differential_suite(
            ("p1 -> [2]p1",), TT,
            SearchBudget(max_worlds_per_factor=2),
            SearchBudget(per_factor_max=(2, 1)),
            store)
        row = report.rows[0]
        assert row.source_search == "found"
        assert row.transfer == "verified"
        assert row.round_trip == "verified"
        assert report.passed

    def test_shipped_corpus_passes(self, store):
        # both directions at 100% over the default corpus; the reduction
        # direction sweeps a 4-world first factor, so this is the slowest
        # test in the module
        from onevar.cli import DEFAULT_SUITE_CORPUS
        report = differential_suite(
            DEFAULT_SUITE_CORPUS, TT,
            SearchBudget(max_worlds_per_factor=2),
            SearchBudget(per_factor_max=(4, 1)),
            store)
        assert report.passed
        exercised = [r for r in report.rows if r.transfer == "verified"]
        assert len(exercised) >= 5
        extracted = [r for r in report.rows if r.extraction == "verified"]
        assert len(extracted) >= 2
