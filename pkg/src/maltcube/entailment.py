"""Weak-closure engine deciding entailment between linear identities.

The closure of a condition's identities over a variable set X is the
least partition of all linear terms over X (every variable, every symbol
applied to every argument tuple) that identifies both sides of each
listed identity and is stable under every substitution gamma: X -> X.
Reflexivity, symmetry and transitivity come free with a partition, so
only substitution stability needs saturating.

An identity between linear terms is a semantic consequence of the
condition exactly when, over a large enough X, it lands in one class or
the closure has collapsed two distinct variables (an inconsistent
condition entails everything).  Large enough means: at least two
variables, at least the arity of every declared symbol, and at least the
number of distinct variables of any identity involved; any two sets this
large produce the same verdicts.

Saturation runs over a generating set of the full transformation monoid
on X (a transposition, the full cycle, one rank-collapsing map) rather
than all |X|^|X| maps: a partition stable under generators is stable
under arbitrary composites, so the fixpoint is the same.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from .terms import (
    Identity,
    LinearTerm,
    MaltsevCondition,
    app,
    canonical_variable_set,
    render_term,
    substitute,
    var,
)


class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def normalize_identity(ident: Identity) -> Identity:
    """Rename variables by first occurrence across both sides to 0, 1, 2, ..."""
    mapping: dict[int, int] = {}
    for a in ident.lhs.args + ident.rhs.args:
        mapping.setdefault(a, len(mapping))
    return Identity(substitute(ident.lhs, mapping), substitute(ident.rhs, mapping))


def _monoid_generators(nvars: int) -> list[tuple[int, ...]]:
    if nvars == 1:
        return []
    swap = list(range(nvars))
    swap[0], swap[1] = 1, 0
    cycle = [(i + 1) % nvars for i in range(nvars)]
    collapse = list(range(nvars))
    collapse[0] = 1
    return [t for t in dict.fromkeys(map(tuple, (swap, cycle, collapse)))]


@dataclass(frozen=True, eq=False)
class EntailmentVerdict:
    """Outcome of one entailment query."""

    derivable: bool
    inconsistent: bool

    @property
    def semantic(self) -> bool:
        return self.derivable or self.inconsistent


class EntailmentIndex:
    """Frozen weak closure of one condition over a fixed variable set.

    Immutable after construction, so instances can be shared across
    threads.  Classes are exposed sorted by their smallest term id, where
    ids enumerate variables first and then each symbol's argument tuples
    in lexicographic order.
    """

    def __init__(self, condition: MaltsevCondition, nvars: int):
        if nvars < 2:
            raise ValueError("the variable set needs at least two variables")
        if condition.max_arity() > nvars:
            raise ValueError(
                f"variable set of size {nvars} is smaller than the maximal arity"
            )
        self.condition = condition
        self.nvars = nvars
        terms: list[LinearTerm] = [var(i) for i in range(nvars)]
        for s in condition.signature:
            terms += [app(s, *args) for args in product(range(nvars), repeat=s.arity)]
        self.terms: tuple[LinearTerm, ...] = tuple(terms)
        self._ids: dict[LinearTerm, int] = {t: i for i, t in enumerate(terms)}

        uf = _UnionFind(len(terms))
        merges = 0
        for ident in condition.identities:
            norm = normalize_identity(ident)
            if len(norm.variables()) > nvars:
                raise ValueError(
                    f"identity {ident} uses more than {nvars} distinct variables"
                )
            merges += uf.union(self._ids[norm.lhs], self._ids[norm.rhs])
        self._images = [
            [self._ids[substitute(t, gamma)] for t in terms]
            for gamma in _monoid_generators(nvars)
        ]
        merges += self._saturate(uf)
        self.saturation_merges = merges

        rep_of_root: dict[int, int] = {}
        reps = []
        for i in range(len(terms)):
            root = uf.find(i)
            reps.append(rep_of_root.setdefault(root, i))
        self._rep: tuple[int, ...] = tuple(reps)
        self.inconsistent = any(
            self._rep[i] == self._rep[j]
            for i in range(nvars)
            for j in range(i + 1, nvars)
        )

    def _saturate(self, uf: _UnionFind) -> int:
        """Merge images of merged classes until a full pass changes nothing."""
        total = 0
        size = len(self.terms)
        changed = True
        while changed:
            changed = False
            for image in self._images:
                for i in range(size):
                    if uf.union(image[i], image[uf.find(i)]):
                        changed = True
                        total += 1
        return total

    def resaturate_once(self) -> int:
        """Number of merges one more saturation pass would make (0 once frozen)."""
        uf = _UnionFind(len(self.terms))
        for i, r in enumerate(self._rep):
            uf.union(i, r)
        merges = 0
        for image in self._images:
            for i in range(len(self.terms)):
                merges += uf.union(image[i], image[uf.find(i)])
        return merges

    def term_id(self, term: LinearTerm) -> int:
        try:
            return self._ids[term]
        except KeyError:
            raise ValueError(f"term {render_term(term)} lies outside the universe") from None

    def same_class(self, lhs: LinearTerm, rhs: LinearTerm) -> bool:
        return self._rep[self.term_id(lhs)] == self._rep[self.term_id(rhs)]

    def classes(self) -> list[tuple[LinearTerm, ...]]:
        by_rep: dict[int, list[LinearTerm]] = {}
        for i, t in enumerate(self.terms):
            by_rep.setdefault(self._rep[i], []).append(t)
        return [tuple(by_rep[r]) for r in sorted(by_rep)]


def weak_closure(condition: MaltsevCondition, nvars: int) -> EntailmentIndex:
    """Build the weak closure of the condition over nvars canonical variables."""
    return EntailmentIndex(condition, nvars)


@lru_cache(maxsize=None)
def condition_index(condition: MaltsevCondition, nvars: int | None = None) -> EntailmentIndex:
    """Memoized closure per (condition, variable-set size)."""
    return weak_closure(condition, nvars or canonical_variable_set(condition))


def entails(index: EntailmentIndex, ident: Identity) -> EntailmentVerdict:
    """Entailment verdict for one identity against a prebuilt closure.

    The identity is renamed by first occurrence before lookup, so callers
    may use any variable indices as long as the distinct count fits the
    index's variable set.
    """
    norm = normalize_identity(ident)
    if len(norm.variables()) > index.nvars:
        raise ValueError(
            f"identity {ident} needs more than {index.nvars} variables"
        )
    return EntailmentVerdict(
        derivable=index.same_class(norm.lhs, norm.rhs),
        inconsistent=index.inconsistent,
    )


def derives(condition: MaltsevCondition, ident: Identity) -> bool:
    """Semantic consequence: derivable over a large enough set, or inconsistency."""
    needed = max(
        canonical_variable_set(condition),
        len(normalize_identity(ident).variables()),
    )
    return entails(condition_index(condition, needed), ident).semantic


def is_consistent(condition: MaltsevCondition) -> bool:
    """True when the condition does not entail x = y for distinct variables."""
    return not condition_index(condition).inconsistent


def render_classes(index: EntailmentIndex) -> str:
    """One line per class, members space-separated, sorted by representative."""
    lines = [
        " ".join(render_term(t) for t in cls) for cls in index.classes()
    ]
    return "\n".join(lines) + "\n"
