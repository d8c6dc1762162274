"""Finite Kripke frames, products, valuations and model checking.

Worlds are 0-based integers.  A :class:`Frame1` is a unimodal frame; a
:class:`NFrame` carries one accessibility relation per modality and, for
product frames, tags every world with its tuple of factor coordinates.
Frames, models and satisfaction sets are immutable after construction.

The model checker :func:`sat_set` labels the shared formula DAG bottom-up
using bitmask world sets.  :func:`check_naive` is an independent oracle: a
direct recursive evaluator with no sharing and no caching, kept deliberately
separate so the two can be differenced against each other.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Mapping, Sequence

from onevar.formulas import (AND, BOT, BOX, IMP, OR, VAR, Formula,
                             ModalityError)


class ModelFormatError(ValueError):
    """Malformed JSON frame or model description."""


def _normalize_edges(edges: Iterable[tuple[int, int]], worlds: int,
                     what: str = "edge") -> tuple[tuple[int, int], ...]:
    out = set()
    for a, b in edges:
        if not (0 <= a < worlds and 0 <= b < worlds):
            raise ValueError(f"{what} ({a}, {b}) outside worlds 0..{worlds - 1}")
        out.add((int(a), int(b)))
    return tuple(sorted(out))


class Frame1:
    """Finite unimodal frame: ``worlds`` points and a sorted edge set.

    Equality and hashing consider ``(worlds, edges)`` only; ``labels`` are
    annotations (gadget point names) and do not affect identity.
    """

    __slots__ = ("worlds", "edges", "succ", "labels")

    def __init__(self, worlds: int, edges: Iterable[tuple[int, int]],
                 labels: Mapping[str, int] | None = None):
        if worlds < 1:
            raise ValueError("a frame needs at least one world")
        self.worlds = worlds
        self.edges = _normalize_edges(edges, worlds)
        succ: list[list[int]] = [[] for _ in range(worlds)]
        for a, b in self.edges:
            succ[a].append(b)
        self.succ = tuple(tuple(s) for s in succ)
        if labels:
            for name, w in labels.items():
                if not 0 <= w < worlds:
                    raise ValueError(f"label {name!r} points at missing world {w}")
            self.labels = dict(labels)
        else:
            self.labels = {}

    @property
    def is_reflexive(self) -> bool:
        edge_set = set(self.edges)
        return all((w, w) in edge_set for w in range(self.worlds))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame1):
            return NotImplemented
        return self.worlds == other.worlds and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.worlds, self.edges))

    def __repr__(self) -> str:
        return f"Frame1(worlds={self.worlds}, edges={len(self.edges)})"

    def to_json(self) -> dict:
        doc: dict = {"worlds": self.worlds,
                     "edges": [list(e) for e in self.edges]}
        if self.labels:
            doc["labels"] = dict(sorted(self.labels.items()))
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "Frame1":
        try:
            worlds = int(doc["worlds"])
            edges = [(int(a), int(b)) for a, b in doc["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad frame description: {exc}") from exc
        labels = doc.get("labels")
        try:
            return cls(worlds, edges, labels)
        except ValueError as exc:
            raise ModelFormatError(str(exc)) from exc


def reflexive_closure(edges: Iterable[tuple[int, int]],
                      worlds: int) -> tuple[tuple[int, int], ...]:
    """The relation plus the identity on ``0..worlds-1``; idempotent."""
    out = set(edges)
    out.update((w, w) for w in range(worlds))
    return _normalize_edges(out, worlds)


def symmetric_closure(edges: Iterable[tuple[int, int]],
                      worlds: int) -> tuple[tuple[int, int], ...]:
    out = set(edges)
    out.update((b, a) for a, b in edges)
    return _normalize_edges(out, worlds)


def transitive_closure(edges: Iterable[tuple[int, int]],
                       worlds: int) -> tuple[tuple[int, int], ...]:
    reach = [set() for _ in range(worlds)]
    for a, b in edges:
        reach[a].add(b)
    changed = True
    while changed:
        changed = False
        for a in range(worlds):
            extra = set()
            for b in reach[a]:
                extra |= reach[b] - reach[a]
            if extra:
                reach[a] |= extra
                changed = True
    return _normalize_edges(((a, b) for a in range(worlds) for b in reach[a]),
                            worlds)


def ladder(k: int) -> Frame1:
    """The reflexive chain gadget with rungs ``v0 -> w0 -> v1 -> ... -> vk -> wk``.

    ``2*(k+1)`` points; point ``v_i`` is world ``2*i`` and ``w_i`` is world
    ``2*i + 1``, with matching labels.  Every point carries a self-loop; the
    only world without a non-loop outgoing edge is ``w_k``.
    """
    if k < 1:
        raise ValueError("ladder size must be >= 1")
    worlds = 2 * (k + 1)
    chain = [(2 * i, 2 * i + 1) for i in range(k + 1)]          # v_i -> w_i
    chain += [(2 * i + 1, 2 * i + 2) for i in range(k)]         # w_i -> v_{i+1}
    labels = {f"v{i}": 2 * i for i in range(k + 1)}
    labels.update({f"w{i}": 2 * i + 1 for i in range(k + 1)})
    return Frame1(worlds, reflexive_closure(chain, worlds), labels)


class NFrame:
    """Frame with ``arity`` accessibility relations over a common world set.

    ``tags`` optionally records, for product frames, the factor coordinates
    of each world.
    """

    __slots__ = ("arity", "worlds", "succs", "tags", "_succ_masks")

    def __init__(self, arity: int, worlds: int,
                 succs: Sequence[Sequence[Sequence[int]]],
                 tags: Sequence[tuple[int, ...]] | None = None):
        if arity < 1:
            raise ValueError("arity must be >= 1")
        if worlds < 1:
            raise ValueError("a frame needs at least one world")
        if len(succs) != arity:
            raise ValueError("one successor table per modality required")
        self.arity = arity
        self.worlds = worlds
        self.succs = tuple(tuple(tuple(sorted(set(s))) for s in table)
                           for table in succs)
        for table in self.succs:
            if len(table) != worlds:
                raise ValueError("successor table size mismatch")
            for s in table:
                for y in s:
                    if not 0 <= y < worlds:
                        raise ValueError(f"successor {y} out of range")
        self.tags = tuple(tags) if tags is not None else None
        self._succ_masks: tuple[tuple[int, ...], ...] | None = None

    def edges(self, modality: int) -> tuple[tuple[int, int], ...]:
        """Sorted edge set of relation ``modality`` (1-based)."""
        table = self.succs[modality - 1]
        return tuple((a, b) for a in range(self.worlds) for b in table[a])

    def succ_masks(self) -> tuple[tuple[int, ...], ...]:
        if self._succ_masks is None:
            masks = []
            for table in self.succs:
                row = []
                for s in table:
                    m = 0
                    for y in s:
                        m |= 1 << y
                    row.append(m)
                masks.append(tuple(row))
            self._succ_masks = tuple(masks)
        return self._succ_masks

    def __repr__(self) -> str:
        return f"NFrame(arity={self.arity}, worlds={self.worlds})"


def product(factors: Sequence[Frame1]) -> NFrame:
    """Product frame: worlds are coordinate tuples, relation ``i`` moves
    exactly coordinate ``i`` along the i-th factor's relation."""
    if not factors:
        raise ValueError("a product needs at least one factor")
    sizes = [f.worlds for f in factors]
    tags = list(itertools.product(*(range(s) for s in sizes)))
    index = {t: i for i, t in enumerate(tags)}
    n = len(factors)
    worlds = len(tags)
    succs: list[list[list[int]]] = [[[] for _ in range(worlds)] for _ in range(n)]
    for w, coords in enumerate(tags):
        for i, factor in enumerate(factors):
            base = coords[i]
            row = succs[i][w]
            for y in factor.succ[base]:
                moved = list(coords)
                moved[i] = y
                row.append(index[tuple(moved)])
    return NFrame(n, worlds, succs, tags)


def restrict(frame: Frame1 | NFrame, keep: Iterable[int]):
    """Subframe on ``keep``: relations intersected with ``keep`` squared.

    Worlds are renumbered in increasing order of their old indices; labels
    and coordinate tags follow the renumbering.
    """
    kept = sorted(set(keep))
    if not kept:
        raise ValueError("cannot restrict to an empty world set")
    if isinstance(frame, Frame1):
        if any(not 0 <= w < frame.worlds for w in kept):
            raise ValueError("keep set mentions missing worlds")
        remap = {old: new for new, old in enumerate(kept)}
        edges = [(remap[a], remap[b]) for a, b in frame.edges
                 if a in remap and b in remap]
        labels = {name: remap[w] for name, w in frame.labels.items()
                  if w in remap}
        return Frame1(len(kept), edges, labels)
    if isinstance(frame, NFrame):
        if any(not 0 <= w < frame.worlds for w in kept):
            raise ValueError("keep set mentions missing worlds")
        remap = {old: new for new, old in enumerate(kept)}
        succs = [[[remap[y] for y in table[old] if y in remap]
                  for old in kept]
                 for table in frame.succs]
        tags = None
        if frame.tags is not None:
            tags = [frame.tags[old] for old in kept]
        return NFrame(frame.arity, len(kept), succs, tags)
    raise TypeError(f"cannot restrict {type(frame).__name__}")


class ProductModel:
    """A product frame with a valuation and a distinguished point.

    ``valuation`` maps variable indices to world-index sets; variables
    without an entry evaluate as false everywhere.  The satisfaction cache is
    per-model and keyed by interned formula ids, so repeated checks over the
    shared DAG cost one pass.
    """

    __slots__ = ("factors", "frame", "valuation", "point", "_sat_cache",
                 "_var_masks")

    def __init__(self, factors: Sequence[Frame1],
                 valuation: Mapping[int, Iterable[int]],
                 point: int,
                 frame: NFrame | None = None):
        self.factors = tuple(factors)
        self.frame = frame if frame is not None else product(self.factors)
        val: dict[int, frozenset[int]] = {}
        for var, ws in valuation.items():
            ws = frozenset(int(w) for w in ws)
            for w in ws:
                if not 0 <= w < self.frame.worlds:
                    raise ValueError(f"valuation of variable {var} mentions "
                                     f"missing world {w}")
            val[int(var)] = ws
        self.valuation = val
        if not 0 <= point < self.frame.worlds:
            raise ValueError(f"point {point} outside worlds")
        self.point = point
        self._sat_cache: dict[int, int] = {}
        self._var_masks: dict[int, int] = {}

    # -- coordinate helpers -------------------------------------------------

    def index_of(self, coords: Sequence[int]) -> int:
        coords = tuple(coords)
        if self.frame.tags is None:
            raise ValueError("model frame carries no coordinate tags")
        if len(coords) != len(self.factors):
            raise ValueError("coordinate arity mismatch")
        idx = 0
        for c, factor in zip(coords, self.factors):
            if not 0 <= c < factor.worlds:
                raise ValueError(f"coordinate {coords} outside factors")
            idx = idx * factor.worlds + c
        return idx

    def coords_of(self, world: int) -> tuple[int, ...]:
        if self.frame.tags is None:
            raise ValueError("model frame carries no coordinate tags")
        return self.frame.tags[world]

    @classmethod
    def from_coords(cls, factors: Sequence[Frame1],
                    valuation: Mapping[int, Iterable[Sequence[int]]],
                    point: Sequence[int]) -> "ProductModel":
        """Build a model giving the valuation and point by coordinate tuples."""
        frame = product(factors)
        sizes = [f.worlds for f in factors]

        def index(coords: Sequence[int]) -> int:
            coords = tuple(coords)
            if len(coords) != len(sizes):
                raise ValueError("coordinate arity mismatch")
            idx = 0
            for c, s in zip(coords, sizes):
                if not 0 <= c < s:
                    raise ValueError(f"coordinate {coords} outside factors")
                idx = idx * s + c
            return idx

        val = {var: [index(c) for c in coords_list]
               for var, coords_list in valuation.items()}
        return cls(factors, val, index(point), frame)

    def with_valuation(self, valuation: Mapping[int, Iterable[int]]
                       ) -> "ProductModel":
        """Same frame and point, new valuation (shares the built frame)."""
        return ProductModel(self.factors, valuation, self.point, self.frame)

    def with_point(self, point: int) -> "ProductModel":
        model = ProductModel(self.factors, {}, point, self.frame)
        model.valuation = self.valuation
        model._sat_cache = self._sat_cache
        model._var_masks = self._var_masks
        return model

    def __repr__(self) -> str:
        shape = "x".join(str(f.worlds) for f in self.factors)
        return f"ProductModel({shape}, point={self.point})"

    # -- JSON ----------------------------------------------------------------

    def to_json(self) -> dict:
        val: dict[str, list] = {}
        for var in sorted(self.valuation):
            name = "p" if var == 0 else f"p{var}"
            val[name] = sorted(list(self.coords_of(w))
                               for w in self.valuation[var])
        return {
            "factors": [f.to_json() for f in self.factors],
            "valuation": val,
            "point": list(self.coords_of(self.point)),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ProductModel":
        try:
            factors = [Frame1.from_json(fdoc) for fdoc in doc["factors"]]
            raw_val = doc.get("valuation", {})
            point = doc["point"]
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"bad model description: {exc}") from exc
        valuation: dict[int, list] = {}
        for name, coords_list in raw_val.items():
            if name == "p":
                var = 0
            elif name.startswith("p") and name[1:].isdigit() and int(name[1:]) > 0:
                var = int(name[1:])
            else:
                raise ModelFormatError(f"bad variable name {name!r}")
            valuation[var] = [tuple(int(c) for c in coords)
                              for coords in coords_list]
        try:
            return cls.from_coords(factors, valuation,
                                   tuple(int(c) for c in point))
        except ValueError as exc:
            raise ModelFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Model checking
# ---------------------------------------------------------------------------

def _var_mask(model: ProductModel, var: int) -> int:
    mask = model._var_masks.get(var)
    if mask is None:
        mask = 0
        for w in model.valuation.get(var, ()):
            mask |= 1 << w
        model._var_masks[var] = mask
    return mask


def _sat_mask(model: ProductModel, f: Formula) -> int:
    cache = model._sat_cache
    hit = cache.get(f.uid)
    if hit is not None:
        return hit
    frame = model.frame
    full = (1 << frame.worlds) - 1
    # iterative post-order over the shared DAG
    stack: list[Formula] = [f]
    while stack:
        node = stack[-1]
        if node.uid in cache:
            stack.pop()
            continue
        pending = [c for c in node.children if c.uid not in cache]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        kind = node.kind
        if kind == BOT:
            mask = 0
        elif kind == VAR:
            mask = _var_mask(model, node.idx)
        elif kind == AND:
            mask = cache[node.children[0].uid] & cache[node.children[1].uid]
        elif kind == OR:
            mask = cache[node.children[0].uid] | cache[node.children[1].uid]
        elif kind == IMP:
            mask = (~cache[node.children[0].uid] | cache[node.children[1].uid]) & full
        else:  # BOX
            if node.idx > frame.arity:
                raise ModalityError(
                    f"box index {node.idx} exceeds frame arity {frame.arity}")
            body = cache[node.children[0].uid]
            succ_masks = frame.succ_masks()[node.idx - 1]
            mask = 0
            for w in range(frame.worlds):
                if succ_masks[w] & ~body == 0:
                    mask |= 1 << w
        cache[node.uid] = mask
    return cache[f.uid]


def sat_set(model: ProductModel, f: Formula) -> frozenset[int]:
    """Worlds of the model where ``f`` holds."""
    mask = _sat_mask(model, f)
    return frozenset(w for w in range(model.frame.worlds) if mask >> w & 1)


def check(model: ProductModel, world: int, f: Formula) -> bool:
    """Truth of ``f`` at one world."""
    if not 0 <= world < model.frame.worlds:
        raise ValueError(f"unknown world {world}")
    return bool(_sat_mask(model, f) >> world & 1)


def check_at_point(model: ProductModel, f: Formula) -> bool:
    return check(model, model.point, f)


def check_naive(model: ProductModel, world: int, f: Formula) -> bool:
    """Independent reference evaluator: plain recursion, no sharing, no cache.

    Deliberately structured differently from :func:`sat_set` (per-world
    recursion instead of bottom-up labeling) so the two implementations can
    serve as oracles for each other.
    """
    if not 0 <= world < model.frame.worlds:
        raise ValueError(f"unknown world {world}")
    kind = f.kind
    if kind == BOT:
        return False
    if kind == VAR:
        return world in model.valuation.get(f.idx, ())
    if kind == AND:
        return (check_naive(model, world, f.children[0])
                and check_naive(model, world, f.children[1]))
    if kind == OR:
        return (check_naive(model, world, f.children[0])
                or check_naive(model, world, f.children[1]))
    if kind == IMP:
        return ((not check_naive(model, world, f.children[0]))
                or check_naive(model, world, f.children[1]))
    if f.idx > model.frame.arity:
        raise ModalityError(
            f"box index {f.idx} exceeds frame arity {model.frame.arity}")
    return all(check_naive(model, y, f.children[0])
               for y in model.frame.succs[f.idx - 1][world])


def bounded_reach(frame: NFrame, start: int, k: int,
                  dims: Iterable[int]) -> frozenset[int]:
    """Worlds reachable from ``start`` in at most ``k`` steps along ``dims``.

    ``dims`` is a set of 1-based modality indices; ``dims = 1..n`` gives full
    bounded reachability, ``dims = 2..n`` the first-coordinate-preserving
    variant.
    """
    dims = sorted(set(dims))
    for d in dims:
        if not 1 <= d <= frame.arity:
            raise ValueError(f"dimension {d} outside 1..{frame.arity}")
    if not 0 <= start < frame.worlds:
        raise ValueError(f"unknown world {start}")
    seen = {start}
    frontier = [start]
    for _ in range(k):
        new: list[int] = []
        for w in frontier:
            for d in dims:
                for y in frame.succs[d - 1][w]:
                    if y not in seen:
                        seen.add(y)
                        new.append(y)
        if not new:
            break
        frontier = new
    return frozenset(seen)
