"""Hash-consed n-modal propositional formulas.

Formulas are built over the falsum ``F``, variables, the connectives
``&``, ``|``, ``->`` and the box operators ``[1]`` .. ``[n]``.  Negation and
diamonds are derived: ``~f`` abbreviates ``f -> F`` and ``<i>f`` abbreviates
``~[i]~f``.  Variable index 0 is the reserved variable and prints as ``p``;
index k >= 1 prints as ``pK``.

Every formula lives in a :class:`FormulaStore` that interns nodes, so two
structurally equal terms built in the same store are the same object, and the
per-node metrics (modal depth, variable set, tree size) are computed once at
interning time.  The expanded tree can be exponentially larger than the
interned DAG; ``tree_size`` is a number, never a materialized tree.
"""

from __future__ import annotations

from typing import Iterator, Sequence

BOT = "bot"
VAR = "var"
AND = "and"
OR = "or"
IMP = "imp"
BOX = "box"

_BINARY = (AND, OR, IMP)


class ParseError(ValueError):
    """Syntax error in the external formula syntax, with a character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ModalityError(ValueError):
    """A box index lies outside the ambient arity ``1..n``."""


class Formula:
    """One interned formula node.  Create only through a :class:`FormulaStore`.

    Equality and hashing are by identity: within one store, structural
    equality coincides with ``is``.
    """

    __slots__ = ("kind", "idx", "children", "uid", "depth", "tree_size",
                 "var_set", "_dag_size")

    kind: str
    idx: int          # variable index for VAR, modality for BOX, 0 otherwise
    children: tuple
    uid: int          # serial number within the owning store
    depth: int        # modal depth
    tree_size: int    # node count of the fully expanded tree
    var_set: frozenset

    def __repr__(self) -> str:
        if self.tree_size <= 40:
            return f"<{render(self)}>"
        return f"<formula uid={self.uid} tree={self.tree_size}>"


class FormulaStore:
    """Append-only interning table for formulas.

    A store is a unit of confinement: formulas from different stores must not
    be mixed, and the constructors reject foreign children.  Nodes are
    immutable once interned.
    """

    def __init__(self) -> None:
        self._table: dict[tuple, Formula] = {}
        self._nodes: list[Formula] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _check_owned(self, f: Formula) -> None:
        nodes = self._nodes
        if not (0 <= f.uid < len(nodes)) or nodes[f.uid] is not f:
            raise ValueError("formula belongs to a different store")

    def _intern(self, kind: str, idx: int, children: tuple) -> Formula:
        key = (kind, idx, tuple(c.uid for c in children))
        hit = self._table.get(key)
        if hit is not None:
            return hit
        node = Formula.__new__(Formula)
        node.kind = kind
        node.idx = idx
        node.children = children
        node.uid = len(self._nodes)
        if kind == BOX:
            node.depth = 1 + children[0].depth
        elif children:
            node.depth = max(c.depth for c in children)
        else:
            node.depth = 0
        node.tree_size = 1 + sum(c.tree_size for c in children)
        if kind == VAR:
            node.var_set = frozenset((idx,))
        elif children:
            node.var_set = frozenset().union(*(c.var_set for c in children))
        else:
            node.var_set = frozenset()
        node._dag_size = 0  # computed lazily by dag_size()
        self._table[key] = node
        self._nodes.append(node)
        return node

    def bottom(self) -> Formula:
        return self._intern(BOT, 0, ())

    def var(self, index: int) -> Formula:
        if index < 0:
            raise ValueError(f"variable index must be >= 0, got {index}")
        return self._intern(VAR, index, ())

    def and_(self, left: Formula, right: Formula) -> Formula:
        self._check_owned(left)
        self._check_owned(right)
        return self._intern(AND, 0, (left, right))

    def or_(self, left: Formula, right: Formula) -> Formula:
        self._check_owned(left)
        self._check_owned(right)
        return self._intern(OR, 0, (left, right))

    def imp(self, left: Formula, right: Formula) -> Formula:
        self._check_owned(left)
        self._check_owned(right)
        return self._intern(IMP, 0, (left, right))

    def box(self, modality: int, body: Formula) -> Formula:
        if modality < 1:
            raise ModalityError(f"box index must be >= 1, got {modality}")
        self._check_owned(body)
        return self._intern(BOX, modality, (body,))

    # Derived connectives: builder sugar, not distinct node kinds.

    def not_(self, f: Formula) -> Formula:
        return self.imp(f, self.bottom())

    def dia(self, modality: int, body: Formula) -> Formula:
        return self.not_(self.box(modality, self.not_(body)))

    def conj(self, items: Sequence[Formula]) -> Formula:
        """Left-associated conjunction of one or more formulas."""
        if not items:
            raise ValueError("conj() needs at least one conjunct")
        acc = items[0]
        for f in items[1:]:
            acc = self.and_(acc, f)
        return acc


def modal_depth(f: Formula) -> int:
    """Maximal nesting of box operators in ``f``."""
    return f.depth


def variables(f: Formula) -> frozenset:
    """Exact set of variable indices occurring in ``f``."""
    return f.var_set


def subformulas(f: Formula) -> Iterator[Formula]:
    """All distinct subformulas of ``f`` (each interned node once)."""
    seen: set[int] = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if node.uid in seen:
            continue
        seen.add(node.uid)
        yield node
        stack.extend(node.children)


def dag_size(f: Formula) -> int:
    """Number of distinct interned nodes reachable from ``f``."""
    if f._dag_size:
        return f._dag_size
    count = sum(1 for _ in subformulas(f))
    f._dag_size = count
    return count


def sizes(f: Formula) -> tuple[int, int]:
    """``(tree_size, dag_size)`` of ``f``."""
    return f.tree_size, dag_size(f)


def max_modality(f: Formula) -> int:
    """Largest box index occurring in ``f`` (0 if none)."""
    best = 0
    for node in subformulas(f):
        if node.kind == BOX and node.idx > best:
            best = node.idx
    return best


# ---------------------------------------------------------------------------
# Defined modalities
# ---------------------------------------------------------------------------

def composite_dia(store: FormulaStore, f: Formula) -> Formula:
    """Two-step first-modality diamond alternating the reserved variable.

    ``composite_dia(f) = <1>(~p & <1>(p & f))``.  The polarity alternation is
    what lets the formula count steps even in reflexive frames, where a plain
    diamond chain collapses onto self-loops.
    """
    p = store.var(0)
    inner = store.dia(1, store.and_(p, f))
    return store.dia(1, store.and_(store.not_(p), inner))


def box_upto(store: FormulaStore, n: int, k: int, f: Formula) -> Formula:
    """``f`` holds everywhere within ``k`` steps along any of the ``n`` modalities.

    Level 0 is ``f`` itself; each level conjoins the previous one with its
    image under every box.  The interned form shares all levels, so the DAG
    grows linearly in ``n * k`` while the expanded tree grows like ``(n+1)^k``.
    """
    if n < 1:
        raise ValueError("arity must be >= 1")
    if k < 0:
        raise ValueError("level must be >= 0")
    g = f
    for _ in range(k):
        g = store.conj([g] + [store.box(i, g) for i in range(1, n + 1)])
    return g


def dia_upto(store: FormulaStore, n: int, k: int, f: Formula) -> Formula:
    """``f`` holds somewhere within ``k`` steps along any modality."""
    if k == 0:
        return f
    return store.not_(box_upto(store, n, k, store.not_(f)))


def box_upto_rest(store: FormulaStore, n: int, k: int, f: Formula) -> Formula:
    """Like :func:`box_upto` but stepping only along modalities ``2..n``.

    For ``n == 1`` the quantified set is empty and every level equals ``f``.
    """
    if n < 1:
        raise ValueError("arity must be >= 1")
    if k < 0:
        raise ValueError("level must be >= 0")
    g = f
    for _ in range(k):
        g = store.conj([g] + [store.box(i, g) for i in range(2, n + 1)])
    return g


def dia_upto_rest(store: FormulaStore, n: int, k: int, f: Formula) -> Formula:
    """Dual of :func:`box_upto_rest`."""
    if k == 0 or n == 1:
        return f
    return store.not_(box_upto_rest(store, n, k, store.not_(f)))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOK_END = "end"


def _tokenize(text: str) -> list[tuple[str, int, int]]:
    """Return ``(kind, value, position)`` triples.

    Kinds: arrow, or, and, not, box, dia, bot, var, lparen, rparen, end.
    """
    out: list[tuple[str, int, int]] = []
    i = 0
    size = len(text)
    while i < size:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "-":
            if text.startswith("->", i):
                out.append(("arrow", 0, i))
                i += 2
                continue
            raise ParseError("expected '->'", i)
        if ch == "|":
            out.append(("or", 0, i))
            i += 1
            continue
        if ch == "&":
            out.append(("and", 0, i))
            i += 1
            continue
        if ch == "~":
            out.append(("not", 0, i))
            i += 1
            continue
        if ch == "(":
            out.append(("lparen", 0, i))
            i += 1
            continue
        if ch == ")":
            out.append(("rparen", 0, i))
            i += 1
            continue
        if ch == "F":
            out.append(("bot", 0, i))
            i += 1
            continue
        if ch in "[<":
            close = "]" if ch == "[" else ">"
            j = i + 1
            while j < size and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise ParseError("expected a modality index", i + 1)
            if j >= size or text[j] != close:
                raise ParseError(f"expected '{close}'", j)
            out.append(("box" if ch == "[" else "dia", int(text[i + 1:j]), i))
            i = j + 1
            continue
        if ch == "p":
            j = i + 1
            while j < size and text[j].isdigit():
                j += 1
            if j == i + 1:
                out.append(("var", 0, i))
            else:
                index = int(text[i + 1:j])
                if index == 0:
                    raise ParseError("variable indices start at 1; "
                                     "the reserved variable is written 'p'", i)
                out.append(("var", index, i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    out.append((_TOK_END, 0, size))
    return out


class _Parser:
    def __init__(self, tokens: list[tuple[str, int, int]], arity: int,
                 store: FormulaStore):
        self.tokens = tokens
        self.pos = 0
        self.arity = arity
        self.store = store

    def peek(self) -> tuple[str, int, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, int, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek()[0] == "arrow":
            self.advance()
            return self.store.imp(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        acc = self.conjunction()
        while self.peek()[0] == "or":
            self.advance()
            acc = self.store.or_(acc, self.conjunction())
        return acc

    def conjunction(self) -> Formula:
        acc = self.unary()
        while self.peek()[0] == "and":
            self.advance()
            acc = self.store.and_(acc, self.unary())
        return acc

    def unary(self) -> Formula:
        kind, value, pos = self.peek()
        if kind == "not":
            self.advance()
            return self.store.not_(self.unary())
        if kind in ("box", "dia"):
            self.advance()
            if not 1 <= value <= self.arity:
                raise ModalityError(
                    f"modality index {value} out of range 1..{self.arity} "
                    f"(at position {pos})")
            body = self.unary()
            if kind == "box":
                return self.store.box(value, body)
            return self.store.dia(value, body)
        return self.atom()

    def atom(self) -> Formula:
        kind, value, pos = self.advance()
        if kind == "bot":
            return self.store.bottom()
        if kind == "var":
            return self.store.var(value)
        if kind == "lparen":
            inner = self.formula()
            kind, _, pos = self.advance()
            if kind != "rparen":
                raise ParseError("expected ')'", pos)
            return inner
        raise ParseError("expected a formula", pos)


def parse(text: str, arity: int, store: FormulaStore) -> Formula:
    """Parse the external syntax into an interned formula.

    Grammar (tightest first): ``~``/``[i]``/``<i>``, then ``&``, then ``|``,
    then right-associative ``->``.  Box and diamond indices must lie in
    ``1..arity``.
    """
    if arity < 1:
        raise ValueError("arity must be >= 1")
    parser = _Parser(_tokenize(text), arity, store)
    result = parser.formula()
    kind, _, pos = parser.peek()
    if kind != _TOK_END:
        raise ParseError("trailing input", pos)
    return result


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PREC = {IMP: 1, OR: 2, AND: 3, BOX: 4, BOT: 5, VAR: 5}


def render(f: Formula) -> str:
    """Minimal-parenthesis external syntax; ``parse(render(f))`` re-interns ``f``.

    Derived connectives are not reconstructed: a formula built with ``~`` or
    ``<i>`` prints in its expanded ``-> F`` form, which parses back to the
    same node.
    """
    memo: dict[int, str] = {}
    return _render(f, memo)


def _render(f: Formula, memo: dict[int, str]) -> str:
    cached = memo.get(f.uid)
    if cached is not None:
        return cached
    kind = f.kind
    if kind == BOT:
        text = "F"
    elif kind == VAR:
        text = "p" if f.idx == 0 else f"p{f.idx}"
    elif kind == BOX:
        body = f.children[0]
        inner = _render(body, memo)
        if _PREC[body.kind] < _PREC[BOX]:
            inner = f"({inner})"
        text = f"[{f.idx}]{inner}"
    else:
        prec = _PREC[kind]
        left, right = f.children
        ltext = _render(left, memo)
        rtext = _render(right, memo)
        if kind == IMP:
            # right-associative: parenthesize the left child at equal level
            if _PREC[left.kind] <= prec:
                ltext = f"({ltext})"
        else:
            # left-associative: parenthesize the right child at equal level
            if _PREC[left.kind] < prec:
                ltext = f"({ltext})"
            if _PREC[right.kind] <= prec:
                rtext = f"({rtext})"
        op = {AND: "&", OR: "|", IMP: "->"}[kind]
        text = f"{ltext} {op} {rtext}"
    memo[f.uid] = text
    return text


def dag_listing(f: Formula) -> list[dict]:
    """Shared (DAG) listing of ``f``: one entry per distinct node.

    Entries are topologically ordered (children first) with store-independent
    local ids, so the listing is stable across stores for structurally equal
    formulas.  The last entry is the root.
    """
    order: list[Formula] = []
    seen: set[int] = set()

    def walk(node: Formula) -> None:
        if node.uid in seen:
            return
        seen.add(node.uid)
        for child in node.children:
            walk(child)
        order.append(node)

    walk(f)
    local = {node.uid: i for i, node in enumerate(order)}
    out = []
    for node in order:
        entry: dict = {"id": local[node.uid], "kind": node.kind}
        if node.kind == VAR:
            entry["index"] = node.idx
        elif node.kind == BOX:
            entry["modality"] = node.idx
        if node.children:
            entry["children"] = [local[c.uid] for c in node.children]
        out.append(entry)
    return out
