"""The two-element dual implication algebra and interpretations into it.

The algebra has universe {0, 1} and one binary operation a ->d b that
is 1 exactly when a = 0 and b = 1.  Its clone members are exactly the
boolean functions that are constant 0 or bounded above by a projection,
which keeps the per-arity enumeration small (2, 6, 38, 942 for arities
1 through 4).

`clone_enumerate` generates the k-ary members breadth-first over
composition depth, carrying a defining term for each; truth tables are
packed into bitmasks so a composition round is one bit operation per
pair.  `find_interpretation` searches those members for a simultaneous
assignment to all symbols of a condition that satisfies its identities
over {0, 1}; a consistent condition admits one exactly when no symbol
entails cube identities, which `preserves_relation` cross-checks
against the complement-of-all-ones relations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .algebras import FiniteAlgebra, TermTree, evaluate, leaf, node, tree_size
from .terms import LinearTerm, MaltsevCondition, OperationSymbol

DUAL_IMPLICATION = OperationSymbol("impd", 2)

_MAX_CLONE_ARITY = 4


def dual_implication_algebra() -> FiniteAlgebra:
    """Universe {0, 1} with a ->d b = 1 iff a = 0 and b = 1."""
    return FiniteAlgebra(2, {DUAL_IMPLICATION: (0, 1, 0, 0)})


@dataclass(frozen=True)
class BooleanOperationEntry:
    """A clone member: truth table plus one term over ->d defining it."""

    arity: int
    truth_table: tuple[int, ...]
    defining_term: TermTree

    def value(self, args) -> int:
        index = 0
        for a in args:
            index = index * 2 + a
        return self.truth_table[index]


def _term_for_mask(
    mask: int, parents: dict[int, tuple[int, int] | int]
) -> TermTree:
    memo: dict[int, TermTree] = {}
    stack = [mask]
    while stack:
        m = stack.pop()
        if m in memo:
            continue
        parent = parents[m]
        if isinstance(parent, int):
            memo[m] = leaf(parent)
            continue
        a, b = parent
        if a in memo and b in memo:
            memo[m] = node(DUAL_IMPLICATION, memo[a], memo[b])
        else:
            stack.extend((m, a, b))
    return memo[mask]


@lru_cache(maxsize=None)
def clone_enumerate(k: int) -> tuple[BooleanOperationEntry, ...]:
    """All k-ary members of the clone, breadth-first over composition depth.

    Truth tables are packed little-endian by argument index: bit of
    table position p is the value at the argument row whose lexicographic
    rank is p.
    """
    if not 1 <= k <= _MAX_CLONE_ARITY:
        raise ValueError(f"arity {k} outside the supported range 1..{_MAX_CLONE_ARITY}")
    rows = 1 << k
    full = (1 << rows) - 1
    parents: dict[int, tuple[int, int] | int] = {}
    order: list[int] = []
    for i in range(k):
        mask = 0
        for p in range(rows):
            if (p >> (k - 1 - i)) & 1:
                mask |= 1 << p
        if mask not in parents:
            parents[mask] = i
            order.append(mask)
    old = 0
    while True:
        current = len(order)
        if old == current:
            break
        fresh: list[int] = []
        for ia in range(current):
            for ib in range(current):
                if ia < old and ib < old:
                    continue
                composed = ~order[ia] & order[ib] & full
                if composed not in parents:
                    parents[composed] = (order[ia], order[ib])
                    fresh.append(composed)
        old = current
        order.extend(fresh)

    entries = []
    for mask in order:
        table = tuple((mask >> p) & 1 for p in range(rows))
        entries.append(BooleanOperationEntry(k, table, _term_for_mask(mask, parents)))
    return tuple(entries)


@lru_cache(maxsize=None)
def _relation_row_indices(m: int, k: int) -> list[np.ndarray]:
    """Per row, the truth-table index each member combination induces."""
    members = np.array([t for t in range(1 << m) if t != (1 << m) - 1], dtype=np.int64)
    out = []
    for i in range(m):
        bits = (members >> (m - 1 - i)) & 1
        index = bits
        for _ in range(k - 1):
            index = index[..., None] * 2 + bits
        out.append(index.reshape(-1))
    return out


def preserves_relation(entry: BooleanOperationEntry, m: int) -> bool:
    """Whether the entry preserves the m-tuples that are not all ones.

    Applies the entry coordinatewise to every choice of m-tuples from
    the relation and checks no all-ones tuple appears.  A violation, if
    any exists, already occurs at m equal to the arity.
    """
    if m < 1:
        raise ValueError("the relation needs at least one coordinate")
    count = ((1 << m) - 1) ** entry.arity
    if count > 20_000_000:
        raise ValueError("relation cross-check too large at this arity")
    table = np.asarray(entry.truth_table, dtype=np.int8)
    all_ones = np.ones(count, dtype=bool)
    for index in _relation_row_indices(m, entry.arity):
        all_ones &= table[index] == 1
        if not all_ones.any():
            return True
    return not all_ones.any()


@dataclass(frozen=True)
class Interpretation:
    """A satisfying assignment of clone members to condition symbols."""

    condition: MaltsevCondition
    assignment: dict[OperationSymbol, BooleanOperationEntry]

    def as_algebra(self) -> FiniteAlgebra:
        return FiniteAlgebra(
            2, {s: entry.truth_table for s, entry in self.assignment.items()}
        )


def _identity_holds(
    identity, assignment: dict[OperationSymbol, BooleanOperationEntry]
) -> bool:
    variables = identity.variables()

    def side(term: LinearTerm, env: dict[int, int]) -> int:
        if term.symbol is None:
            return env[term.args[0]]
        return assignment[term.symbol].value([env[a] for a in term.args])

    for bits in product((0, 1), repeat=len(variables)):
        env = dict(zip(variables, bits))
        if side(identity.lhs, env) != side(identity.rhs, env):
            return False
    return True


def find_interpretation(condition: MaltsevCondition) -> Interpretation | None:
    """Search the clone for a simultaneous model of the condition on {0, 1}.

    Symbols are assigned in descending order of identity participation,
    candidates in ascending term size; each identity prunes as soon as
    all its symbols are assigned.  Returns None when no assignment
    exists, which for consistent conditions means some symbol entails
    cube identities.
    """
    for s in condition.signature:
        if s.arity == 0:
            raise ValueError("nullary symbols are outside the interpretation search")
        if s.arity > _MAX_CLONE_ARITY:
            raise ValueError(
                f"arity {s.arity} of {s} exceeds the supported bound {_MAX_CLONE_ARITY}"
            )
    participation = {s: 0 for s in condition.signature}
    for identity in condition.identities:
        for s in identity.symbols():
            participation[s] += 1
    symbols = sorted(
        condition.signature, key=lambda s: (-participation[s], s.name)
    )
    rank = {s: i for i, s in enumerate(symbols)}
    checkpoint: dict[int, list] = {i: [] for i in range(len(symbols))}
    immediate = []
    for identity in condition.identities:
        used = identity.symbols()
        if used:
            checkpoint[max(rank[s] for s in used)].append(identity)
        else:
            immediate.append(identity)
    for identity in immediate:
        if not _identity_holds(identity, {}):
            return None

    candidates = {
        s: sorted(
            clone_enumerate(s.arity),
            key=lambda e: (tree_size(e.defining_term), e.truth_table),
        )
        for s in symbols
    }
    assignment: dict[OperationSymbol, BooleanOperationEntry] = {}

    def search(position: int) -> bool:
        if position == len(symbols):
            return True
        symbol = symbols[position]
        for entry in candidates[symbol]:
            assignment[symbol] = entry
            if all(
                _identity_holds(identity, assignment)
                for identity in checkpoint[position]
            ) and search(position + 1):
                return True
        assignment.pop(symbol, None)
        return False

    if not search(0):
        return None
    return Interpretation(condition, dict(assignment))
