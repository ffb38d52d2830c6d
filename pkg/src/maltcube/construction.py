"""Absorbing extensions that preserve subpower-membership hardness.

Given a finite algebra A over signature F and a consistent, cube-free
condition M = (H, Sigma) with fresh symbol names, `extend` builds the
algebra A_M on A plus one new absorbing element:

  * every F-operation keeps its base table and returns the absorbing
    element as soon as any argument is absorbing (nullary operations
    keep their base value);
  * every H-operation looks only at the equality pattern of its
    argument tuple: with x-bar the canonical variables realizing the
    pattern, the value is the argument at the least position i such
    that Sigma derives h(x-bar) = x_i, and absorbing when no position
    is derivable.

Consistency makes the position choice canonical: two derivable
positions in different pattern blocks would merge two distinct
variables in the closure.  `well_definedness_audit` re-derives that
fact per pattern and reports the first violation, which only an
artificially broken extension can produce.

Because membership instances over A are verbatim instances over A_M,
subpower membership for A reduces to subpower membership for A_M; the
converse direction rewrites an extended witness into one over F alone.
`eliminate_H` performs that rewrite: repeatedly take an H-labeled node
of maximal height, compare its value tuple z with its children's value
tuples at the given generators, and splice in any child agreeing with z
in every coordinate.  Cube-freeness guarantees such a child exists; the
sets B_j of children agreeing at coordinate j otherwise form the rows
of a derivable cube identity, and the empty intersection is surfaced as
a diagnostic.  Splicing a value-equal subterm never changes an ancestor
value, and each step removes one H node, so the loop terminates with an
F-term evaluating to the same target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

from .algebras import (
    DEFAULT_BUDGET,
    FiniteAlgebra,
    SmpAnswer,
    SmpInstance,
    TermTree,
    _fold_tree,
    evaluate_on_power,
    smp_decide,
    tree_symbols,
)
from .cube import check_condition
from .entailment import condition_index, entails
from .terms import (
    Identity,
    LinearTerm,
    MaltsevCondition,
    OperationSymbol,
    app,
    equality_pattern,
    pattern_representative,
    var,
)


class ConstructionError(ValueError):
    """The extension's preconditions do not hold."""


class EliminationError(RuntimeError):
    """No child can replace an H-node; carries the offending B_j family."""

    def __init__(self, symbol: OperationSymbol, b_sets: tuple[frozenset[int], ...]):
        self.symbol = symbol
        self.b_sets = b_sets
        rendered = ", ".join(
            "{" + ",".join(map(str, sorted(b))) + "}" for b in b_sets
        )
        super().__init__(
            f"no common replacement position for {symbol}: B sets {rendered} "
            "have empty intersection (the condition entails cube identities)"
        )


PatternTable = dict[tuple[int, ...], int | None]


@dataclass(frozen=True)
class ExtendedAlgebra:
    """A base algebra together with its absorbing extension."""

    base: FiniteAlgebra
    condition: MaltsevCondition
    extended: FiniteAlgebra
    absorbing: int
    pattern_tables: dict[OperationSymbol, PatternTable]


def _symbol_patterns(arity: int) -> list[tuple[int, ...]]:
    """All equality patterns of arity-length tuples, in first-seen order."""
    out: list[tuple[int, ...]] = []
    seen = set()
    for values in product(range(max(arity, 1)), repeat=arity):
        pattern = equality_pattern(values)
        if pattern not in seen:
            seen.add(pattern)
            out.append(pattern)
    return out


def _pattern_positions(
    condition: MaltsevCondition, symbol: OperationSymbol, pattern: tuple[int, ...]
) -> list[int]:
    """All 1-based positions i with Sigma deriving h(x-bar) = x_i."""
    index = condition_index(condition)
    rep = pattern_representative(pattern)
    term = app(symbol, *rep)
    return [
        i
        for i in range(1, symbol.arity + 1)
        if entails(index, Identity(term, var(rep[i - 1]))).derivable
    ]


def _build_extension(
    algebra: FiniteAlgebra, condition: MaltsevCondition
) -> ExtendedAlgebra:
    """Table construction alone; `extend` adds the precondition checks."""
    n = algebra.size
    absorbing = n
    operations: dict[OperationSymbol, tuple[int, ...]] = {}
    for symbol, table in algebra.operations.items():
        if symbol.arity == 0:
            operations[symbol] = table
            continue
        extended_table = []
        for args in product(range(n + 1), repeat=symbol.arity):
            if absorbing in args:
                extended_table.append(absorbing)
            else:
                index = 0
                for a in args:
                    index = index * n + a
                extended_table.append(table[index])
        operations[symbol] = tuple(extended_table)

    pattern_tables: dict[OperationSymbol, PatternTable] = {}
    for symbol in condition.signature:
        table_for_symbol: PatternTable = {}
        for pattern in _symbol_patterns(symbol.arity):
            positions = _pattern_positions(condition, symbol, pattern)
            table_for_symbol[pattern] = positions[0] if positions else None
        pattern_tables[symbol] = table_for_symbol
        if symbol.arity == 0:
            # a derivable h() = x would need a variable on the right; the
            # closure never merges a nullary term with a variable unless
            # inconsistent, so nullary H-operations are constantly absorbing
            operations[symbol] = (absorbing,)
            continue
        h_table = []
        for args in product(range(n + 1), repeat=symbol.arity):
            position = table_for_symbol[equality_pattern(args)]
            h_table.append(args[position - 1] if position is not None else absorbing)
        operations[symbol] = tuple(h_table)

    return ExtendedAlgebra(
        base=algebra,
        condition=condition,
        extended=FiniteAlgebra(n + 1, operations),
        absorbing=absorbing,
        pattern_tables=pattern_tables,
    )


def extend(algebra: FiniteAlgebra, condition: MaltsevCondition) -> ExtendedAlgebra:
    """Build the absorbing extension of the algebra by the condition.

    Requires name-disjoint signatures and a consistent condition none of
    whose symbols entails cube identities.
    """
    base_names = {s.name for s in algebra.operations}
    clashes = [s for s in condition.signature if s.name in base_names]
    if clashes:
        raise ConstructionError(
            f"condition symbols collide with the algebra: {', '.join(map(str, clashes))}"
        )
    report = check_condition(condition)
    if not report.consistent:
        raise ConstructionError("the condition is inconsistent")
    if not report.applicable:
        bad = ", ".join(s.name for s in report.cube_symbols)
        raise ConstructionError(f"the condition entails cube identities for {bad}")
    return _build_extension(algebra, condition)


@dataclass(frozen=True)
class AuditResult:
    """Outcome of the well-definedness audit; falsy with a counterexample."""

    ok: bool
    symbol: OperationSymbol | None = None
    pattern: tuple[int, ...] | None = None
    positions: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def well_definedness_audit(ext: ExtendedAlgebra) -> AuditResult:
    """Re-derive every pattern's derivable positions and check one value.

    All positions i with Sigma deriving h(x-bar) = x_i must lie in a
    single block of the pattern, so every realization assigns them the
    same value.  Consistency proves this; the audit asserts it against
    the stored condition and catches injected breakage.
    """
    for symbol in ext.condition.signature:
        for pattern in _symbol_patterns(symbol.arity):
            positions = _pattern_positions(ext.condition, symbol, pattern)
            blocks = {pattern[i - 1] for i in positions}
            if len(blocks) > 1:
                return AuditResult(False, symbol, pattern, tuple(positions))
            stored = ext.pattern_tables.get(symbol, {}).get(pattern)
            expected = positions[0] if positions else None
            if stored != expected and (
                stored is None
                or expected is None
                or pattern[stored - 1] != pattern[expected - 1]
            ):
                return AuditResult(False, symbol, pattern, tuple(positions))
    return AuditResult(True)


def evaluate_linear_via_pattern(
    w: LinearTerm, ext: ExtendedAlgebra, values: Sequence[int]
) -> int:
    """Value of a linear H-term read off the equality pattern of its arguments.

    Substitutes the argument row into the term, takes the equality
    pattern of the resulting tuple, and queries the closure for a
    derivable result position.  Must agree with direct table evaluation.
    """
    if w.symbol is None:
        return values[w.args[0]]
    if w.symbol not in ext.condition.signature:
        raise ValueError(f"{w.symbol} is not an H-symbol of the extension")
    row = tuple(values[a] for a in w.args)
    if any(not 0 <= v <= ext.absorbing for v in row):
        raise ValueError("argument values leave the extended universe")
    index = condition_index(ext.condition)
    pattern = equality_pattern(row)
    rep = pattern_representative(pattern)
    term = app(w.symbol, *rep)
    for j in range(1, w.symbol.arity + 1):
        if entails(index, Identity(term, var(rep[j - 1]))).derivable:
            return row[j - 1]
    return ext.absorbing


def _h_nodes_by_height(tree: TermTree, h_symbols) -> TermTree | None:
    """Leftmost H-node of maximal height, or None."""
    heights = _fold_tree(tree, lambda n: 0, lambda n, hs: 1 + max(hs, default=0))
    best: TermTree | None = None
    best_height = -1
    stack = [tree]
    order: list[TermTree] = []
    seen: set[int] = set()
    while stack:
        current = stack.pop()
        if id(current) in seen or current.symbol is None:
            continue
        seen.add(id(current))
        order.append(current)
        stack.extend(reversed(current.children))
    for current in order:
        if current.symbol in h_symbols and heights[id(current)] > best_height:
            best = current
            best_height = heights[id(current)]
    return best


def _splice(tree: TermTree, target: TermTree, replacement_child: int) -> TermTree:
    """Replace every occurrence of `target` by its chosen child."""

    def apply_fn(current: TermTree, new_children: list[TermTree]) -> TermTree:
        if current is target:
            return new_children[replacement_child]
        return TermTree(current.symbol, tuple(new_children))

    if tree.symbol is None:
        return tree
    return _fold_tree(tree, lambda n: n, apply_fn)[id(tree)]


def eliminate_H(
    tree: TermTree,
    ext: ExtendedAlgebra,
    generators: Sequence[tuple[int, ...]],
    target: tuple[int, ...],
) -> TermTree:
    """Rewrite a witness term over F and H into one over F alone.

    The generators may use the absorbing element, the target must not,
    and the input term must evaluate to the target coordinatewise.
    """
    target = tuple(target)
    if any(v == ext.absorbing for v in target):
        raise ValueError("the target must avoid the absorbing element")
    if evaluate_on_power(tree, ext.extended, generators) != target:
        raise ValueError("the term does not evaluate to the target")
    m = len(target)
    h_symbols = set(ext.condition.signature)

    def value_fn(n: TermTree, vs: list) -> tuple[int, ...]:
        if not vs:  # nullary node, constant in every coordinate
            return (ext.extended.value(n.symbol, ()),) * m
        return tuple(ext.extended.value(n.symbol, column) for column in zip(*vs))

    while True:
        chosen = _h_nodes_by_height(tree, h_symbols)
        if chosen is None:
            return tree
        values = _fold_tree(
            tree, lambda n: tuple(generators[n.position]), value_fn
        )
        z = values[id(chosen)]
        children_values = [values[id(c)] for c in chosen.children]
        b_sets = tuple(
            frozenset(
                i + 1 for i, cv in enumerate(children_values) if cv[j] == z[j]
            )
            for j in range(len(z))
        )
        common = frozenset.intersection(*b_sets) if b_sets else frozenset()
        if not common:
            raise EliminationError(chosen.symbol, b_sets)
        tree = _splice(tree, chosen, min(common) - 1)


@dataclass(frozen=True)
class ReductionCertificate:
    """Same-instance answers over the base and extended algebras."""

    instance: SmpInstance
    answer_base: bool
    answer_extended: bool
    eliminated_witness: TermTree | None = None

    @property
    def ok(self) -> bool:
        return self.answer_base == self.answer_extended


def reduce_and_certify(
    algebra: FiniteAlgebra,
    condition: MaltsevCondition,
    instance: SmpInstance,
    *,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> ReductionCertificate:
    """Decide one instance over A and over A_M and cross-check the answers.

    When the extension answers yes, its witness is rewritten over F and
    re-verified against the base algebra before certifying.
    """
    for t in instance.generators + (instance.target,):
        if any(not 0 <= v < algebra.size for v in t):
            raise ValueError(f"instance tuple {t} leaves the base universe")
    ext = extend(algebra, condition)
    base = smp_decide(algebra, instance, budget=budget, threads=threads)
    extended = smp_decide(ext.extended, instance, budget=budget, threads=threads)
    eliminated: TermTree | None = None
    if extended.answer:
        eliminated = eliminate_H(
            extended.witness, ext, instance.generators, instance.target
        )
        if tree_symbols(eliminated) & set(condition.signature):
            raise RuntimeError("elimination left an H symbol in the witness")
        if (
            evaluate_on_power(eliminated, algebra, instance.generators)
            != instance.target
        ):
            raise RuntimeError("the eliminated witness failed re-verification")
    return ReductionCertificate(
        instance=instance,
        answer_base=base.answer,
        answer_extended=extended.answer,
        eliminated_witness=eliminated,
    )
