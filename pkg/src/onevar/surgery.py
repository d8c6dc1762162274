"""Model surgeries converting countermodels across the reduction.

Two directions:

* :func:`transfer_countermodel` takes a product model refuting a source
  formula and grows its first factor with marker ladders, producing a model
  that refutes the reduced (single-variable) formula at the same point.
* :func:`extract_countermodel` takes a product model refuting the reduced
  formula and carves out the first-factor worlds marked by the base marker
  within bounded reach, producing a model refuting the source formula.

Both surgeries model-check their own output and raise instead of returning an
unverified result.  The ``check_*`` scanners verify the intermediate claims
the constructions rely on (marker/variable agreement at base points, marker
exactness, marking of all kept reachable points) and return violation
reports instead of raising, so a miscalibrated variant shows up as data.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from onevar.formulas import Formula, subformulas
from onevar.kripke import (Frame1, ProductModel, bounded_reach, check,
                           reflexive_closure, restrict, sat_set)
from onevar.translation import TranslationContext


class PreconditionFailed(ValueError):
    """The input model does not satisfy the surgery's entry conditions."""


class TransferFailed(RuntimeError):
    """The transferred model failed its own verification model check."""


class ExtractionFailed(RuntimeError):
    """The extracted model failed its own verification model check."""


@dataclass(frozen=True)
class GadgetPoint:
    """Decoded label of one ladder point in an extended first factor."""

    ladder: int   # which ladder copy (1 .. m+1)
    base: int     # the first-factor base world the copy hangs below
    role: str     # "v" or "w"
    rung: int     # position along the ladder (0 .. ladder)


_GADGET_LABEL = re.compile(r"^([vw])(\d+)\.k(\d+)\.x(\d+)$")


def _gadget_label(role: str, rung: int, ladder: int, base: int) -> str:
    return f"{role}{rung}.k{ladder}.x{base}"


def gadget_points(frame: Frame1) -> dict[int, GadgetPoint]:
    """Decode the gadget labels of a frame built by :func:`attach_gadgets`.

    Labels carried over from the original frame do not match the gadget
    naming scheme and are ignored.
    """
    out: dict[int, GadgetPoint] = {}
    for name, world in frame.labels.items():
        match = _GADGET_LABEL.match(name)
        if match:
            out[world] = GadgetPoint(ladder=int(match.group(3)),
                                     base=int(match.group(4)),
                                     role=match.group(1),
                                     rung=int(match.group(2)))
    return out


def attach_gadgets(f1: Frame1, m: int, k_mode: bool = False) -> Frame1:
    """Extend a first factor with ladder copies of lengths ``1 .. m+1`` below
    every world.

    The original worlds keep their indices; each copy is isomorphic to
    ``ladder(k)`` (an irreflexive chain in K-mode) and is entered by a single
    edge from its base world to the copy's ``v0``.  Outside K-mode the input
    must be reflexive and the result is closed under reflexivity, so the
    extended frame stays a T-frame and restricting it to the original worlds
    gives back exactly ``f1``.
    """
    if m < 0:
        raise ValueError("variable limit must be >= 0")
    if not k_mode and not f1.is_reflexive:
        raise PreconditionFailed(
            "the first factor must be reflexive (use k_mode for K frames)")
    base = f1.worlds
    edges: list[tuple[int, int]] = list(f1.edges)
    labels = dict(f1.labels)
    worlds = base
    for k in range(1, m + 2):
        for x in range(base):
            start = worlds
            # v_i at start + 2i, w_i at start + 2i + 1
            for i in range(k + 1):
                labels[_gadget_label("v", i, k, x)] = start + 2 * i
                labels[_gadget_label("w", i, k, x)] = start + 2 * i + 1
                edges.append((start + 2 * i, start + 2 * i + 1))
            for i in range(k):
                edges.append((start + 2 * i + 1, start + 2 * i + 2))
            edges.append((x, start))  # entry edge to v0 of this copy
            worlds += 2 * (k + 1)
    if not k_mode:
        edges = list(reflexive_closure(edges, worlds))
    return Frame1(worlds, edges, labels)


def lift_valuation(base: ProductModel, ext_f1: Frame1, m: int,
                   variant) -> set[tuple[int, ...]]:
    """Coordinates of the extended product where the reserved variable holds.

    The ``m+1`` ladder's w-points carry the variable over every column; the
    w-points of ladder ``k <= m`` over base world ``z1`` carry it in column
    ``(z2, ..., zn)`` exactly when the base point ``(z1, z2, ..., zn)``
    satisfies variable ``k``.  Whether rung 0 is included is the variant's
    choice.  Base points never carry the variable.
    """
    gadgets = gadget_points(ext_f1)
    lowest_rung = 0 if variant.mark_first_rung else 1
    rest_sizes = [f.worlds for f in base.factors[1:]]
    all_columns = list(itertools.product(*(range(s) for s in rest_sizes)))

    marked: set[tuple[int, ...]] = set()
    for world, gp in gadgets.items():
        if gp.role != "w" or gp.rung < lowest_rung:
            continue
        if gp.ladder == m + 1:
            for column in all_columns:
                marked.add((world, *column))
        else:
            var_worlds = base.valuation.get(gp.ladder, frozenset())
            for bw in var_worlds:
                coords = base.coords_of(bw)
                if coords[0] == gp.base:
                    marked.add((world, *coords[1:]))
    return marked


@dataclass
class TransferResult:
    """Verified output of :func:`transfer_countermodel`."""

    extended_first_factor: Frame1
    model: ProductModel
    base_points: frozenset[int]   # image of the original worlds, ext indexing
    point: int                    # image of the refuting point
    checks: dict

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "point": list(self.model.coords_of(self.point)),
            "base_points": sorted(list(self.model.coords_of(w))
                                  for w in self.base_points),
            "checks": dict(sorted(self.checks.items())),
        }


def build_transfer(base: ProductModel, f: Formula,
                   ctx: TranslationContext,
                   k_mode: bool = False) -> TransferResult:
    """Construct the extended model without enforcing verification.

    The ``checks`` dict records whether the result refutes the reduction and
    satisfies the guard at its point; calibration scans miscalibrated
    variants through this entry point.  Use :func:`transfer_countermodel`
    for the verified contract.
    """
    if check(base, base.point, f):
        raise PreconditionFailed("the input model does not refute the formula "
                                 "at its point")
    if len(base.factors) != ctx.arity:
        raise PreconditionFailed("model arity differs from context arity")
    m = ctx.var_limit
    ext_f1 = attach_gadgets(base.factors[0], m, k_mode=k_mode)
    marked = lift_valuation(base, ext_f1, m, ctx.variant)
    factors = [ext_f1, *base.factors[1:]]
    model = ProductModel.from_coords(factors, {0: marked},
                                     base.coords_of(base.point))
    base_count = base.factors[0].worlds
    base_points = frozenset(
        w for w in range(model.frame.worlds)
        if model.coords_of(w)[0] < base_count)

    refuted = not check(model, model.point, ctx.reduce(f))
    guarded = check(model, model.point, ctx.uniform_guard())
    checks = {"refutes-reduction": refuted, "guard-at-point": guarded}
    return TransferResult(ext_f1, model, base_points, model.point, checks)


def transfer_countermodel(base: ProductModel, f: Formula,
                          ctx: TranslationContext,
                          k_mode: bool = False) -> TransferResult:
    """Grow a countermodel of ``f`` into a verified countermodel of
    ``ctx.reduce(f)`` at the same point; never returns unverified output."""
    result = build_transfer(base, f, ctx, k_mode=k_mode)
    if not all(result.checks.values()):
        raise TransferFailed(
            f"transfer verification failed for variant "
            f"{ctx.variant.name!r}: {result.checks}")
    return result


@dataclass
class SurgeryReport:
    """Outcome of one exhaustive scan; empty ``violations`` means pass.

    ``trace`` optionally carries per-point witness data when a scan is run
    with tracing enabled.
    """

    name: str
    checked: int
    violations: tuple
    trace: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"name": self.name, "checked": self.checked,
                "passed": self.passed,
                "violations": [list(v) for v in self.violations]}


def check_marker_agreement(result: TransferResult, base: ProductModel,
                           ctx: TranslationContext) -> SurgeryReport:
    """At every original point, each variable marker must agree with the
    variable it stands for."""
    violations = []
    checked = 0
    model = result.model
    for bw in range(base.frame.worlds):
        coords = base.coords_of(bw)
        ext_w = model.index_of(coords)
        for k in range(1, ctx.var_limit + 1):
            got = check(model, ext_w, ctx.var_marker(k))
            want = bw in base.valuation.get(k, frozenset())
            checked += 1
            if got != want:
                violations.append((coords, k, got, want))
    return SurgeryReport("marker-agreement", checked, tuple(violations))


def check_marker_exactness(result: TransferResult,
                           ctx: TranslationContext) -> SurgeryReport:
    """The base marker must hold at exactly the original points.

    Extra points are classified by their gadget label so a leak names the
    ladder position responsible.
    """
    model = result.model
    sat = sat_set(model, ctx.base_marker())
    missing = sorted(result.base_points - sat)
    extras = sorted(sat - result.base_points)
    gadgets = gadget_points(result.extended_first_factor)
    violations = []
    for w in missing:
        violations.append(("missing", model.coords_of(w)))
    for w in extras:
        first = model.coords_of(w)[0]
        gp = gadgets.get(first)
        label = (f"{gp.role}{gp.rung}.k{gp.ladder}.x{gp.base}"
                 if gp else "base?")
        violations.append(("extra", model.coords_of(w), label))
    return SurgeryReport("marker-exactness",
                         model.frame.worlds, tuple(violations))


@dataclass
class ExtractionResult:
    """Verified output of :func:`extract_countermodel`."""

    kept_first_factor: tuple[int, ...]  # original first-factor world ids
    model: ProductModel
    point: int
    checks: dict

    def to_json(self) -> dict:
        return {
            "kept_first_factor": list(self.kept_first_factor),
            "model": self.model.to_json(),
            "point": list(self.model.coords_of(self.point)),
            "checks": dict(sorted(self.checks.items())),
        }


def build_extraction(counter: ProductModel, f: Formula,
                     ctx: TranslationContext) -> ExtractionResult:
    """Construct the carved model without enforcing verification.

    Keeps the first-factor worlds that appear as first coordinate of some
    marked point within ``depth`` steps of the refuting point, restricts the
    first factor to them, and reads each variable's valuation off its marker.
    Preconditions (guard at the point, reduction refuted) still raise; only
    the final verification becomes a ``checks`` flag.
    """
    if len(counter.factors) != ctx.arity:
        raise PreconditionFailed("model arity differs from context arity")
    if not check(counter, counter.point, ctx.uniform_guard()):
        raise PreconditionFailed(
            "the refuting point does not satisfy the uniformity guard")
    if check(counter, counter.point, ctx.lower(f)):
        raise PreconditionFailed(
            "the model does not refute the reduced formula at its point")

    reach = bounded_reach(counter.frame, counter.point, ctx.depth,
                          range(1, ctx.arity + 1))
    marked = sat_set(counter, ctx.base_marker())
    kept = sorted({counter.coords_of(w)[0] for w in reach & marked})
    # the refuting point itself is marked and reachable in 0 steps
    assert counter.coords_of(counter.point)[0] in kept

    remap = {old: new for new, old in enumerate(kept)}
    new_f1 = restrict(counter.factors[0], kept)
    factors = [new_f1, *counter.factors[1:]]

    def project(coords: tuple[int, ...]) -> tuple[int, ...] | None:
        first = remap.get(coords[0])
        if first is None:
            return None
        return (first, *coords[1:])

    valuation: dict[int, list[tuple[int, ...]]] = {}
    for k in range(1, ctx.var_limit + 1):
        marker_sat = sat_set(counter, ctx.var_marker(k))
        coords_list = []
        for w in marker_sat:
            projected = project(counter.coords_of(w))
            if projected is not None:
                coords_list.append(projected)
        valuation[k] = coords_list

    point_coords = project(counter.coords_of(counter.point))
    assert point_coords is not None
    model = ProductModel.from_coords(factors, valuation, point_coords)

    refuted = not check(model, model.point, f)
    checks = {"guard-at-point": True, "refutes-source": refuted}
    return ExtractionResult(tuple(kept), model, model.point, checks)


def extract_countermodel(counter: ProductModel, f: Formula,
                         ctx: TranslationContext) -> ExtractionResult:
    """Carve a verified countermodel of ``f`` out of a countermodel of
    ``ctx.reduce(f)``; never returns unverified output."""
    result = build_extraction(counter, f, ctx)
    if not result.checks["refutes-source"]:
        raise ExtractionFailed(
            f"extraction verification failed for variant "
            f"{ctx.variant.name!r}: the carved model does not refute the "
            f"source formula")
    return result


def check_kept_points_marked(counter: ProductModel,
                             extraction: ExtractionResult,
                             ctx: TranslationContext,
                             trace: bool = False) -> SurgeryReport:
    """Every kept point within reach of the refuting point must satisfy the
    base marker in the source model.

    With ``trace`` on, each checked point records a sibling marked point with
    the same first coordinate and, if one exists, a common point reachable
    from both without moving the first coordinate (the intermediate step the
    marker-propagation argument pivots on).
    """
    kept = set(extraction.kept_first_factor)
    reach = bounded_reach(counter.frame, counter.point, ctx.depth,
                          range(1, ctx.arity + 1))
    marked = sat_set(counter, ctx.base_marker())
    rest_dims = range(2, ctx.arity + 1)
    violations = []
    checked = 0
    traces = []
    for w in sorted(reach):
        if counter.coords_of(w)[0] not in kept:
            continue
        checked += 1
        if w not in marked:
            violations.append((counter.coords_of(w),))
            continue
        if trace:
            sibling = next(
                (x for x in sorted(reach & marked)
                 if counter.coords_of(x)[0] == counter.coords_of(w)[0]),
                None)
            common = None
            if sibling is not None:
                from_sibling = bounded_reach(counter.frame, sibling,
                                             ctx.depth, rest_dims)
                from_w = bounded_reach(counter.frame, w, ctx.depth, rest_dims)
                shared = sorted(from_sibling & from_w)
                common = shared[0] if shared else None
            traces.append((counter.coords_of(w),
                           counter.coords_of(sibling) if sibling is not None
                           else None,
                           counter.coords_of(common) if common is not None
                           else None))
    return SurgeryReport("kept-points-marked", checked, tuple(violations),
                         trace=tuple(traces))


def check_subformula_preservation(base: ProductModel,
                                  result: TransferResult, f: Formula,
                                  ctx: TranslationContext) -> SurgeryReport:
    """Exhaustive check that lowering preserves truth pointwise: for every
    subformula of ``f`` and every original point, the source model satisfies
    the subformula iff the extended model satisfies its lowering."""
    model = result.model
    violations = []
    checked = 0
    for sub in subformulas(f):
        lowered = ctx.lower(sub)
        for bw in range(base.frame.worlds):
            coords = base.coords_of(bw)
            checked += 1
            if check(base, bw, sub) != check(model, model.index_of(coords),
                                             lowered):
                violations.append((coords, sub.uid))
    return SurgeryReport("subformula-preservation", checked, tuple(violations))
