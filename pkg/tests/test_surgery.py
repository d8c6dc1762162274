"""Countermodel surgeries: gadget attachment, transfer, extraction, scans."""

import pytest

from onevar.formulas import parse
from onevar.kripke import (Frame1, ProductModel, check, check_naive, ladder,
                           restrict, sat_set)
from onevar.surgery import (PreconditionFailed,
                            TransferFailed, attach_gadgets, build_transfer,
                            check_kept_points_marked, check_marker_agreement,
                            check_marker_exactness,
                            check_subformula_preservation,
                            extract_countermodel, gadget_points,
                            lift_valuation, transfer_countermodel)
from onevar.translation import (DEFAULT_VARIANT, K_MODE_DEFAULT_VARIANT,
                                TranslationContext, VariantConfig)

REFLEXIVE_POINT = Frame1(1, [(0, 0)])
REFLEXIVE_CHAIN = Frame1(2, [(0, 0), (1, 1), (0, 1)])


def make_ctx(store, text, variant=DEFAULT_VARIANT):
    f = parse(text, 2, store)
    return f, TranslationContext.for_formula(store, f, 2, variant)


class TestAttachGadgets:
    def test_world_count(self):
        # one base world, limit 1: ladders of length 1 and 2 hang below it
        ext = attach_gadgets(REFLEXIVE_POINT, 1)
        assert ext.worlds == 1 + 4 + 6

    def test_restriction_recovers_base(self):
        base = Frame1(3, [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)])
        ext = attach_gadgets(base, 2)
        assert restrict(ext, range(base.worlds)) == base

    def test_roots_one_step_from_base(self):
        base = REFLEXIVE_CHAIN
        m = 2
        ext = attach_gadgets(base, m)
        gadgets = gadget_points(ext)
        for x in range(base.worlds):
            succ = set(ext.succ[x])
            for k in range(1, m + 2):
                roots = [w for w, gp in gadgets.items()
                         if gp.base == x and gp.ladder == k
                         and gp.role == "v" and gp.rung == 0]
                assert len(roots) == 1 and roots[0] in succ

    def test_copies_isomorphic_to_ladder(self):
        ext = attach_gadgets(REFLEXIVE_POINT, 1)
        gadgets = gadget_points(ext)
        for k in (1, 2):
            copy = sorted(w for w, gp in gadgets.items() if gp.ladder == k)
            sub = restrict(ext, copy)
            # drop the gadget labels to compare the bare frames
            assert Frame1(sub.worlds, sub.edges) == \
                Frame1(ladder(k).worlds, ladder(k).edges)

    def test_reflexive(self):
        assert attach_gadgets(REFLEXIVE_CHAIN, 1).is_reflexive

    def test_irreflexive_base_rejected_outside_k_mode(self):
        bad = Frame1(2, [(0, 1)])
        with pytest.raises(PreconditionFailed):
            attach_gadgets(bad, 1)
        ext = attach_gadgets(bad, 1, k_mode=True)
        assert not ext.is_reflexive

    def test_k_mode_ladders_are_chains(self):
        ext = attach_gadgets(Frame1(1, []), 0, k_mode=True)
        gadgets = gadget_points(ext)
        for w in gadgets:
            assert (w, w) not in set(ext.edges)


class TestLiftValuation:
    def base_model(self):
        return ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (1, 0))

    def test_base_points_never_marked(self):
        base = self.base_model()
        ext = attach_gadgets(base.factors[0], 1)
        marked = lift_valuation(base, ext, 1, DEFAULT_VARIANT)
        for coords in marked:
            assert coords[0] >= base.factors[0].worlds

    def test_inactive_copy_unmarked(self):
        # p1 false at (1, 0): no point of the ladder-1 copy over base world 1
        # carries the variable
        base = self.base_model()
        ext = attach_gadgets(base.factors[0], 1)
        gadgets = gadget_points(ext)
        marked = lift_valuation(base, ext, 1, DEFAULT_VARIANT)
        for coords in marked:
            gp = gadgets[coords[0]]
            if gp.ladder == 1:
                assert gp.base == 0  # only over the world where p1 holds

    def test_top_ladder_marked_over_every_column(self):
        base = ProductModel.from_coords(
            [REFLEXIVE_POINT, REFLEXIVE_CHAIN], {}, (0, 0))
        ext = attach_gadgets(base.factors[0], 0)
        gadgets = gadget_points(ext)
        marked = lift_valuation(base, ext, 0, DEFAULT_VARIANT)
        w_points = [w for w, gp in gadgets.items()
                    if gp.ladder == 1 and gp.role == "w"]
        for w in w_points:
            for col in (0, 1):
                assert (w, col) in marked

    def test_first_rung_follows_variant(self):
        base = self.base_model()
        ext = attach_gadgets(base.factors[0], 1)
        gadgets = gadget_points(ext)
        with_rung = lift_valuation(base, ext, 1, DEFAULT_VARIANT)
        without = lift_valuation(
            base, ext, 1,
            VariantConfig(mark_first_rung=False, guards=()))
        rung0 = {c for c in with_rung if gadgets[c[0]].rung == 0}
        assert rung0 and all(gadgets[c[0]].rung >= 1 for c in without)


class TestTransfer:
    def test_simplest_instance(self, store):
        # source variable refuted on the one-point product
        f, ctx = make_ctx(store, "p1")
        base = ProductModel.from_coords([REFLEXIVE_POINT, REFLEXIVE_POINT],
                                        {}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        assert result.checks == {"refutes-reduction": True,
                                 "guard-at-point": True}
        assert not check(result.model, result.point, ctx.reduce(f))

    def test_boxed_instance(self, store):
        f, ctx = make_ctx(store, "[1]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        assert not check(result.model, result.point, ctx.reduce(f))

    def test_verification_by_naive_evaluator(self, store):
        f, ctx = make_ctx(store, "p1 -> [1]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        assert not check_naive(result.model, result.point, ctx.reduce(f))
        assert check_naive(result.model, result.point, ctx.uniform_guard())

    def test_subformula_preservation_exhaustive(self, store):
        for text, val in [("p1 -> [1]p1", {1: [(0, 0)]}),
                          ("[2]p1 -> p1", {1: [(1, 0)]}),
                          ("p1 & p2 -> [1](p1 & p2)",
                           {1: [(0, 0)], 2: [(0, 0)]})]:
            f, ctx = make_ctx(store, text)
            base = ProductModel.from_coords(
                [REFLEXIVE_CHAIN, REFLEXIVE_POINT], val, (0, 0))
            if check(base, base.point, f):
                continue
            result = transfer_countermodel(base, f, ctx)
            report = check_subformula_preservation(base, result, f, ctx)
            assert report.passed

    def test_non_countermodel_rejected(self, store):
        f, ctx = make_ctx(store, "p1")
        base = ProductModel.from_coords([REFLEXIVE_POINT, REFLEXIVE_POINT],
                                        {1: [(0, 0)]}, (0, 0))
        with pytest.raises(PreconditionFailed):
            transfer_countermodel(base, f, ctx)

    def test_miscalibrated_variant_fails_loudly(self, store):
        plain = VariantConfig(marker_diamond="plain")
        f, ctx = make_ctx(store, "p1", plain)
        base = ProductModel.from_coords([REFLEXIVE_POINT, REFLEXIVE_POINT],
                                        {}, (0, 0))
        with pytest.raises(TransferFailed):
            transfer_countermodel(base, f, ctx)

    def test_k_mode_transfer(self, store):
        f, ctx = make_ctx(store, "[1]p1 -> p1", K_MODE_DEFAULT_VARIANT)
        irreflexive = Frame1(2, [(0, 1)])
        point = Frame1(1, [])
        base = ProductModel.from_coords([irreflexive, point],
                                        {1: [(1, 0)]}, (0, 0))
        assert not check(base, base.point, f)
        result = transfer_countermodel(base, f, ctx, k_mode=True)
        assert result.checks["refutes-reduction"]

    def test_unimodal_round_trip(self, store):
        # arity 1: the rest-dimension modalities are degenerate but the
        # surgeries still close the loop
        f = parse("p1 -> [1]p1", 1, store)
        ctx = TranslationContext.for_formula(store, f, 1, DEFAULT_VARIANT)
        base = ProductModel.from_coords([REFLEXIVE_CHAIN], {1: [(0,)]}, (0,))
        assert not check(base, base.point, f)
        result = transfer_countermodel(base, f, ctx)
        assert check_marker_exactness(result, ctx).passed
        extraction = extract_countermodel(result.model, f, ctx)
        assert extraction.checks["refutes-source"]


class TestMarkerScans:
    def transferred(self, store, text, val, variant=DEFAULT_VARIANT):
        f, ctx = make_ctx(store, text, variant)
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], val, (0, 0))
        assert not check(base, base.point, f)
        return base, f, ctx

    def test_agreement_on_empty_valuation(self, store):
        base, f, ctx = self.transferred(store, "p1", {})
        result = transfer_countermodel(base, f, ctx)
        report = check_marker_agreement(result, base, ctx)
        assert report.passed
        for bw in range(base.frame.worlds):
            coords = base.coords_of(bw)
            assert not check(result.model, result.model.index_of(coords),
                             ctx.var_marker(1))

    def test_agreement_on_calibrated_instance(self, store):
        base, f, ctx = self.transferred(store, "p1 -> [1]p1", {1: [(0, 0)]})
        result = transfer_countermodel(base, f, ctx)
        assert check_marker_agreement(result, base, ctx).passed

    def test_agreement_fails_on_wrong_variant(self, store):
        # keeping the first rung unmarked starves the marker at base points
        wrong = VariantConfig(mark_first_rung=False)
        base, f, ctx = self.transferred(store, "p1 -> [1]p1", {1: [(0, 0)]},
                                        wrong)
        result = build_transfer(base, f, ctx)
        report = check_marker_agreement(result, base, ctx)
        assert not report.passed
        coords, k, got, want = report.violations[0]
        assert k == 1 and got is False and want is True

    def test_exactness_on_calibrated_instance(self, store):
        base, f, ctx = self.transferred(store, "p1 -> [1]p1", {1: [(0, 0)]})
        result = transfer_countermodel(base, f, ctx)
        report = check_marker_exactness(result, ctx)
        assert report.passed
        assert sat_set(result.model, ctx.base_marker()) == result.base_points

    def test_exactness_classifies_leaks(self, store):
        # without the shield conjunct the marker leaks at gadget roots
        unshielded = VariantConfig(guards=())
        base, f, ctx = self.transferred(store, "p1", {}, unshielded)
        result = build_transfer(base, f, ctx)
        report = check_marker_exactness(result, ctx)
        assert not report.passed
        kinds = {v[0] for v in report.violations}
        assert kinds == {"extra"}
        labels = {v[2] for v in report.violations}
        assert all(label.startswith("v0.k2.") for label in labels)


class TestExtraction:
    def test_round_trip(self, store):
        for text, val in [("p1", {}),
                          ("p1 -> [1]p1", {1: [(0, 0)]}),
                          ("p1 -> [1][2]p1", {1: [(0, 0)]})]:
            f, ctx = make_ctx(store, text)
            base = ProductModel.from_coords(
                [REFLEXIVE_CHAIN, REFLEXIVE_POINT], val, (0, 0))
            result = transfer_countermodel(base, f, ctx)
            extraction = extract_countermodel(result.model, f, ctx)
            assert extraction.checks["refutes-source"]
            assert not check(extraction.model, extraction.point, f)

    def test_point_first_coordinate_survives(self, store):
        f, ctx = make_ctx(store, "p1 -> [1]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        extraction = extract_countermodel(result.model, f, ctx)
        u1 = result.model.coords_of(result.point)[0]
        assert u1 in extraction.kept_first_factor

    def test_guard_precondition_checked(self, store):
        f, ctx = make_ctx(store, "p1")
        # an arbitrary model without ladder structure cannot satisfy the guard
        flat = ProductModel.from_coords([REFLEXIVE_POINT, REFLEXIVE_POINT],
                                        {}, (0, 0))
        with pytest.raises(PreconditionFailed):
            extract_countermodel(flat, f, ctx)

    def test_restricted_factor_stays_reflexive(self, store):
        f, ctx = make_ctx(store, "p1 -> [1]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        extraction = extract_countermodel(result.model, f, ctx)
        assert extraction.model.factors[0].is_reflexive

    def test_variable_valuation_read_off_markers(self, store):
        f, ctx = make_ctx(store, "p1 -> [1]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        extraction = extract_countermodel(result.model, f, ctx)
        marker_sat = sat_set(result.model, ctx.var_marker(1))
        for w in extraction.model.valuation.get(1, ()):
            coords = extraction.model.coords_of(w)
            original = (extraction.kept_first_factor[coords[0]], *coords[1:])
            assert result.model.index_of(original) in marker_sat


class TestKeptPointsScan:
    def test_passes_on_round_trip(self, store):
        f, ctx = make_ctx(store, "p1 -> [1][2]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        extraction = extract_countermodel(result.model, f, ctx)
        report = check_kept_points_marked(result.model, extraction, ctx)
        assert report.passed and report.checked > 0

    def test_trace_records_witnesses(self, store):
        f, ctx = make_ctx(store, "p1 -> [1]p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {1: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        extraction = extract_countermodel(result.model, f, ctx)
        report = check_kept_points_marked(result.model, extraction, ctx,
                                          trace=True)
        assert report.passed
        for point, sibling, common in report.trace:
            assert sibling is not None
            assert common is not None
            assert sibling[0] == point[0] == common[0]

    def test_vacuous_when_nothing_kept_in_reach(self, store):
        # depth 0: reach is the point itself, which is always kept and marked
        f, ctx = make_ctx(store, "p1")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT], {}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        extraction = extract_countermodel(result.model, f, ctx)
        report = check_kept_points_marked(result.model, extraction, ctx)
        assert report.passed and report.checked == 1


class TestGadgetSelectivity:
    def test_no_cross_ladder_probe_hits(self, store):
        # On a transferred model, a probe of one index never fires on the
        # w0 level of a different ladder copy.
        f, ctx = make_ctx(store, "p1 & p2 -> [1](p1 & p2)")
        base = ProductModel.from_coords(
            [REFLEXIVE_CHAIN, REFLEXIVE_POINT],
            {1: [(0, 0)], 2: [(0, 0)]}, (0, 0))
        result = transfer_countermodel(base, f, ctx)
        gadgets = gadget_points(result.extended_first_factor)
        p = store.var(0)
        for k in range(1, ctx.var_limit + 2):
            hits = sat_set(result.model,
                           store.and_(p, ctx.ladder_probe(k)))
            for w in hits:
                first = result.model.coords_of(w)[0]
                gp = gadgets.get(first)
                if gp is not None and gp.rung == 0 and gp.role == "w":
                    assert gp.ladder == k
