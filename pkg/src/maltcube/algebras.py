"""Finite algebras, term evaluation, and subpower membership.

Algebras live on universes {0, ..., n-1}; each operation is a flat table
in row-major order over lexicographic argument tuples.  The text format:

    universe: 3
    op f/2:
    0 1 2
    1 2 0
    2 0 1

Subpower-membership instances pair generator tuples with a target tuple:

    m: 2
    generators:
    0 1
    1 0
    target:
    0 0

`generate_subpower` computes the subalgebra of the m-th power generated
by the given tuples with a semi-naive (frontier) closure: each round
applies every operation to argument tuples touching at least one member
discovered in the previous round.  Members are packed into base-n
integers and rounds run vectorized over numpy; operations are lifted to
packed codes chunk by chunk so the hot loop is a handful of gathers into
cache-sized tables.  A pure-python engine backs instances whose packed
codes do not fit machine integers and doubles as a test oracle.

Derivations are recorded per member (one operation plus argument member
indices), and witness term trees are materialized from them on demand;
trees share subterm objects, so a witness is linear in the member count
even when its unfolding is not.
"""

from __future__ import annotations

import re
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from math import prod
from random import Random
from typing import Iterable, Mapping, Sequence

import numpy as np

from .terms import Identity, MaltsevCondition, OperationSymbol

DEFAULT_BUDGET = 1_000_000
_TABLE_CAP = 1 << 18      # max entries in a lifted chunk table
_CHUNK_TARGET = 1 << 16   # tuple applications per vectorized call
_BITMAP_CAP = 1 << 26     # largest packed-id space tracked by a byte map


@dataclass(frozen=True)
class FiniteAlgebra:
    """A finite universe {0..size-1} with finitely many table operations."""

    size: int
    operations: Mapping[OperationSymbol, tuple[int, ...]]

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("universe must be nonempty")
        object.__setattr__(self, "operations", dict(self.operations))
        for symbol, table in self.operations.items():
            if len(table) != self.size ** symbol.arity:
                raise ValueError(
                    f"table for {symbol} has {len(table)} entries, "
                    f"expected {self.size ** symbol.arity}"
                )
            if any(not 0 <= v < self.size for v in table):
                raise ValueError(f"table for {symbol} leaves the universe")

    def value(self, symbol: OperationSymbol, args: Sequence[int]) -> int:
        try:
            table = self.operations[symbol]
        except KeyError:
            raise ValueError(f"no interpretation for {symbol}") from None
        index = 0
        for a in args:
            if not 0 <= a < self.size:
                raise ValueError(f"argument {a} outside the universe")
            index = index * self.size + a
        return table[index]

    def symbol(self, name: str) -> OperationSymbol:
        for s in self.operations:
            if s.name == name:
                return s
        raise KeyError(name)


def random_algebra(
    rng: Random, *, max_size: int = 3, max_operations: int = 2, max_arity: int = 2
) -> FiniteAlgebra:
    """A random algebra, sized for exhaustive cross-checking."""
    size = rng.randint(1, max_size)
    operations = {}
    for i in range(rng.randint(1, max_operations)):
        arity = rng.randint(0, max_arity)
        table = tuple(rng.randrange(size) for _ in range(size**arity))
        operations[OperationSymbol(f"f{i}", arity)] = table
    return FiniteAlgebra(size, operations)


# --- term trees -------------------------------------------------------------


@dataclass(frozen=True)
class TermTree:
    """A term over an algebra's signature; leaves name argument positions."""

    symbol: OperationSymbol | None
    children: tuple["TermTree", ...] = ()
    position: int | None = None

    def __post_init__(self) -> None:
        if self.symbol is None:
            if self.children or self.position is None or self.position < 0:
                raise ValueError("a leaf carries just an argument position")
        elif len(self.children) != self.symbol.arity or self.position is not None:
            raise ValueError(f"malformed node for {self.symbol}")


def leaf(position: int) -> TermTree:
    return TermTree(None, (), position)


def node(symbol: OperationSymbol, *children: TermTree) -> TermTree:
    return TermTree(symbol, tuple(children))


def _fold_tree(tree: TermTree, leaf_fn, apply_fn) -> dict[int, object]:
    """Bottom-up values for every distinct node, keyed by object id.

    Iterative so that chains as deep as a closure run do not hit the
    recursion limit; shared subtrees are folded once.
    """
    vals: dict[int, object] = {}
    stack: list[tuple[TermTree, bool]] = [(tree, False)]
    while stack:
        current, ready = stack.pop()
        nid = id(current)
        if nid in vals:
            continue
        if current.symbol is None:
            vals[nid] = leaf_fn(current)
        elif ready:
            vals[nid] = apply_fn(current, [vals[id(c)] for c in current.children])
        else:
            stack.append((current, True))
            stack.extend((c, False) for c in current.children)
    return vals


def evaluate(tree: TermTree, algebra: FiniteAlgebra, args: Sequence[int]) -> int:
    """Value of the term at the given argument row."""

    def leaf_fn(n: TermTree) -> int:
        if n.position >= len(args):
            raise ValueError(f"leaf x{n.position + 1} beyond {len(args)} arguments")
        return args[n.position]

    vals = _fold_tree(tree, leaf_fn, lambda n, vs: algebra.value(n.symbol, vs))
    return vals[id(tree)]


def evaluate_on_power(
    tree: TermTree, algebra: FiniteAlgebra, args: Sequence[tuple[int, ...]]
) -> tuple[int, ...]:
    """Coordinatewise value of the term in a finite power of the algebra."""
    if not args:
        raise ValueError("evaluation in a power needs at least one argument tuple")
    m = len(args[0])
    if any(len(t) != m for t in args):
        raise ValueError("argument tuples must share one length")

    def leaf_fn(n: TermTree) -> tuple[int, ...]:
        if n.position >= len(args):
            raise ValueError(f"leaf x{n.position + 1} beyond {len(args)} arguments")
        return tuple(args[n.position])

    def apply_fn(n: TermTree, vs: list[tuple[int, ...]]) -> tuple[int, ...]:
        if not vs:  # a nullary node is constant in every coordinate
            return (algebra.value(n.symbol, ()),) * m
        return tuple(algebra.value(n.symbol, column) for column in zip(*vs))

    if tree.symbol is None:
        return leaf_fn(tree)
    return _fold_tree(tree, leaf_fn, apply_fn)[id(tree)]


def tree_size(tree: TermTree) -> int:
    """Node count of the unfolded term (shared subtrees counted by multiplicity)."""
    vals = _fold_tree(tree, lambda n: 1, lambda n, vs: 1 + sum(vs))
    return vals[id(tree)]


def tree_symbols(tree: TermTree) -> frozenset[OperationSymbol]:
    out: set[OperationSymbol] = set()
    stack = [tree]
    seen: set[int] = set()
    while stack:
        current = stack.pop()
        if id(current) in seen:
            continue
        seen.add(id(current))
        if current.symbol is not None:
            out.add(current.symbol)
            stack.extend(current.children)
    return frozenset(out)


def render_tree(tree: TermTree) -> str:
    """Plain prefix rendering with leaves x1, x2, ...; unfolds shared subtrees."""
    parts: list[str] = []
    stack: list[object] = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        if item.symbol is None:
            parts.append(f"x{item.position + 1}")
            continue
        parts.append(item.symbol.name + "(")
        stack.append(")")
        for i, child in enumerate(reversed(item.children)):
            stack.append(child)
            if i < len(item.children) - 1:
                stack.append(",")
    return "".join(parts)


# --- model checking ---------------------------------------------------------


@dataclass(frozen=True)
class ModelCheckResult:
    """Outcome of checking a condition in an algebra; falsy on failure."""

    holds: bool
    identity: Identity | None = None
    assignment: dict[int, int] | None = None

    def __bool__(self) -> bool:
        return self.holds


def _linear_value(term, algebra: FiniteAlgebra, env: Mapping[int, int]) -> int:
    if term.symbol is None:
        return env[term.args[0]]
    return algebra.value(term.symbol, [env[a] for a in term.args])


def satisfies(algebra: FiniteAlgebra, condition: MaltsevCondition) -> ModelCheckResult:
    """Check every identity under every assignment; first failure is reported."""
    for s in condition.signature:
        if s not in algebra.operations:
            raise ValueError(f"no interpretation for {s}")
    for ident in condition.identities:
        variables = ident.variables()
        for values in product(range(algebra.size), repeat=len(variables)):
            env = dict(zip(variables, values))
            if _linear_value(ident.lhs, algebra, env) != _linear_value(
                ident.rhs, algebra, env
            ):
                return ModelCheckResult(False, ident, env)
    return ModelCheckResult(True)


# --- text formats -----------------------------------------------------------


class AlgebraFormatError(ValueError):
    """Raised for malformed algebra or instance files."""

    def __init__(self, message: str, *, source: str = "<string>", line: int | None = None):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")


def _clean_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append((lineno, body))
    return out


def parse_algebra(text: str, source: str = "<string>") -> FiniteAlgebra:
    lines = _clean_lines(text)
    if not lines or not lines[0][1].startswith("universe:"):
        raise AlgebraFormatError("expected a universe: line first", source=source,
                                 line=lines[0][0] if lines else None)
    lineno, head = lines[0]
    try:
        size = int(head[len("universe:"):].strip())
    except ValueError:
        raise AlgebraFormatError("universe wants an integer", source=source, line=lineno) from None
    operations: dict[OperationSymbol, tuple[int, ...]] = {}
    current: OperationSymbol | None = None
    values: list[int] = []

    def finish(at_line: int) -> None:
        nonlocal current, values
        if current is None:
            return
        expected = size ** current.arity
        if len(values) != expected:
            raise AlgebraFormatError(
                f"table for {current} has {len(values)} entries, expected {expected}",
                source=source, line=at_line,
            )
        operations[current] = tuple(values)
        current, values = None, []

    for lineno, body in lines[1:]:
        m = re.fullmatch(r"op\s+([A-Za-z_][A-Za-z0-9_]*)\s*/\s*(\d+)\s*:(.*)", body)
        if m is not None:
            finish(lineno)
            symbol = OperationSymbol(m.group(1), int(m.group(2)))
            if symbol in operations:
                raise AlgebraFormatError(f"duplicate operation {symbol}", source=source, line=lineno)
            current = symbol
            rest = m.group(3).strip()
            body = rest
            if not body:
                continue
        if current is None:
            raise AlgebraFormatError(f"unexpected line {body!r}", source=source, line=lineno)
        for token in body.split():
            try:
                values.append(int(token))
            except ValueError:
                raise AlgebraFormatError(f"bad table entry {token!r}", source=source, line=lineno) from None
    finish(lines[-1][0])
    try:
        return FiniteAlgebra(size, operations)
    except ValueError as exc:
        raise AlgebraFormatError(str(exc), source=source) from None


def render_algebra(algebra: FiniteAlgebra, comments: Iterable[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"universe: {algebra.size}")
    for symbol, table in algebra.operations.items():
        lines.append(f"op {symbol.name}/{symbol.arity}:")
        width = algebra.size if symbol.arity else 1
        for start in range(0, len(table), width):
            lines.append(" ".join(str(v) for v in table[start:start + width]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SmpInstance:
    """A subpower-membership instance: generators and target in A^m."""

    m: int
    generators: tuple[tuple[int, ...], ...]
    target: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("power must be at least 1")
        object.__setattr__(self, "generators", tuple(map(tuple, self.generators)))
        object.__setattr__(self, "target", tuple(self.target))
        for t in self.generators + (self.target,):
            if len(t) != self.m:
                raise ValueError(f"tuple {t} does not have length {self.m}")


def parse_instance(text: str, source: str = "<string>") -> SmpInstance:
    lines = _clean_lines(text)
    if not lines or not lines[0][1].startswith("m:"):
        raise AlgebraFormatError("expected an m: line first", source=source,
                                 line=lines[0][0] if lines else None)
    try:
        m = int(lines[0][1][len("m:"):].strip())
    except ValueError:
        raise AlgebraFormatError("m wants an integer", source=source, line=lines[0][0]) from None
    if len(lines) < 2 or lines[1][1] != "generators:":
        raise AlgebraFormatError("expected a generators: line", source=source, line=lines[0][0])

    def parse_tuple(body: str, lineno: int) -> tuple[int, ...]:
        try:
            return tuple(int(tok) for tok in body.split())
        except ValueError:
            raise AlgebraFormatError(f"bad tuple line {body!r}", source=source, line=lineno) from None

    generators = []
    rest = lines[2:]
    i = 0
    while i < len(rest) and rest[i][1] != "target:":
        generators.append(parse_tuple(rest[i][1], rest[i][0]))
        i += 1
    if i == len(rest) or i + 1 != len(rest) - 1:
        raise AlgebraFormatError("expected target: followed by one tuple line",
                                 source=source, line=rest[i][0] if i < len(rest) else None)
    target = parse_tuple(rest[i + 1][1], rest[i + 1][0])
    try:
        return SmpInstance(m, tuple(generators), target)
    except ValueError as exc:
        raise AlgebraFormatError(str(exc), source=source) from None


def render_instance(instance: SmpInstance) -> str:
    lines = [f"m: {instance.m}", "generators:"]
    lines += [" ".join(map(str, g)) for g in instance.generators]
    lines.append("target:")
    lines.append(" ".join(map(str, instance.target)))
    return "\n".join(lines) + "\n"


# --- subpower closure -------------------------------------------------------


@dataclass(frozen=True)
class ClosureStats:
    members: int
    rounds: int


class BudgetExceededError(RuntimeError):
    """Closure grew past the member budget; membership stays undecided."""

    def __init__(self, members: int, rounds: int, budget: int):
        self.stats = ClosureStats(members, rounds)
        self.budget = budget
        super().__init__(
            f"budget of {budget} members exhausted after {rounds} rounds "
            f"({members} members found)"
        )


class ClosureResult:
    """Members of a generated subpower plus per-member derivations.

    Immutable once returned.  `members` materializes the tuple set
    lazily; `witness_tree` rebuilds one member's derivation as a
    TermTree whose leaves name generator positions.
    """

    def __init__(self, algebra, m, ids, prov, op_symbols, stats):
        self.algebra: FiniteAlgebra = algebra
        self.m = m
        self._ids = ids                      # packed base-size codes, python ints
        self._prov = prov                    # int leaf position | (op_index, *members)
        self._op_symbols = op_symbols
        self.stats: ClosureStats = stats
        self._members: frozenset[tuple[int, ...]] | None = None
        self._positions: dict[int, int] | None = None

    def _unpack(self, code: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.m):
            code, digit = divmod(code, self.algebra.size)
            out.append(digit)
        return tuple(reversed(out))

    def _pack(self, member: Sequence[int]) -> int:
        code = 0
        for digit in member:
            code = code * self.algebra.size + digit
        return code

    @property
    def member_list(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self._unpack(c) for c in self._ids)

    @property
    def members(self) -> frozenset[tuple[int, ...]]:
        if self._members is None:
            self._members = frozenset(self.member_list)
        return self._members

    def position(self, member: Sequence[int]) -> int | None:
        if self._positions is None:
            self._positions = {c: i for i, c in enumerate(self._ids)}
        member = tuple(member)
        if len(member) != self.m or any(not 0 <= v < self.algebra.size for v in member):
            return None
        return self._positions.get(self._pack(member))

    def __contains__(self, member: Sequence[int]) -> bool:
        return self.position(member) is not None

    def witness_tree(self, member: Sequence[int]) -> TermTree:
        pos = self.position(member)
        if pos is None:
            raise KeyError(f"{tuple(member)} is not a member")
        memo: dict[int, TermTree] = {}
        stack = [pos]
        while stack:
            p = stack.pop()
            if p in memo:
                continue
            derivation = self._prov[p]
            if isinstance(derivation, int):
                memo[p] = leaf(derivation)
                continue
            op_index, *args = derivation
            missing = [a for a in args if a not in memo]
            if missing:
                stack.append(p)
                stack.extend(missing)
            else:
                memo[p] = TermTree(self._op_symbols[op_index], tuple(memo[a] for a in args))
        return memo[pos]

    def witness_trees(self) -> dict[tuple[int, ...], TermTree]:
        """Every member's witness; intended for small closures."""
        return {member: self.witness_tree(member) for member in self.member_list}


class _BitmapSeen:
    def __init__(self, space: int):
        self._seen = np.zeros(space, dtype=bool)

    def new_mask(self, codes: np.ndarray) -> np.ndarray:
        return ~self._seen[codes]

    def add(self, codes: np.ndarray) -> None:
        self._seen[codes] = True


class _SortedSeen:
    def __init__(self) -> None:
        self._sorted = np.empty(0, dtype=np.int64)

    def new_mask(self, codes: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._sorted, codes)
        inside = idx < len(self._sorted)
        mask = np.ones(len(codes), dtype=bool)
        mask[inside] = self._sorted[idx[inside]] != codes[inside]
        return mask

    def add(self, codes: np.ndarray) -> None:
        self._sorted = np.union1d(self._sorted, codes)


@dataclass(frozen=True)
class _ChunkSpec:
    shift: int     # weight of this chunk's code in the packed member
    modulus: int   # number of codes for this chunk
    table: np.ndarray


class _NumpyEngine:
    """Vectorized semi-naive closure over packed member codes."""

    def __init__(self, algebra: FiniteAlgebra, m: int, budget: int, threads: int):
        self.algebra = algebra
        self.n = algebra.size
        self.m = m
        self.budget = budget
        self.threads = max(1, threads)
        self.space = self.n ** m
        self.seen = _BitmapSeen(self.space) if self.space <= _BITMAP_CAP else _SortedSeen()
        self.ids: list[int] = []
        self.ids_np = np.empty(0, dtype=np.int64)
        self.prov: list = []
        self.op_symbols = tuple(algebra.operations)
        self._lift_cache: dict[tuple[int, int], np.ndarray] = {}
        self._plans: dict[int, list[_ChunkSpec]] = {}
        self._comps: dict[tuple[int, int], np.ndarray] = {}

    # -- lifted tables --------------------------------------------------

    def _chunk_lengths(self, arity: int) -> list[tuple[int, int]]:
        """(start, length) chunks of the m coordinates for one arity."""
        length = 1
        while length < self.m and (self.n ** (length + 1)) ** arity <= _TABLE_CAP:
            length += 1
        out = []
        start = 0
        while start < self.m:
            step = min(length, self.m - start)
            out.append((start, step))
            start += step
        return out

    def _lifted(self, op_index: int, length: int) -> np.ndarray:
        key = (op_index, length)
        if key in self._lift_cache:
            return self._lift_cache[key]
        symbol = self.op_symbols[op_index]
        k = symbol.arity
        base_flat = np.asarray(self.algebra.operations[symbol], dtype=np.int32)
        base = base_flat.reshape((self.n,) * k)
        cur = base
        size = self.n
        for _ in range(length - 1):
            outer = np.add.outer(cur.ravel() * np.int32(self.n), base.ravel())
            outer = outer.reshape((size,) * k + (self.n,) * k)
            perm = [axis for pair in zip(range(k), range(k, 2 * k)) for axis in pair]
            outer = np.ascontiguousarray(outer.transpose(perm))
            size *= self.n
            cur = outer.reshape((size,) * k)
        flat = np.ascontiguousarray(cur.reshape(-1))
        self._lift_cache[key] = flat
        return flat

    def _plan(self, op_index: int) -> list[_ChunkSpec]:
        if op_index in self._plans:
            return self._plans[op_index]
        symbol = self.op_symbols[op_index]
        specs = []
        for start, length in self._chunk_lengths(symbol.arity):
            shift = self.n ** (self.m - start - length)
            modulus = self.n ** length
            specs.append(_ChunkSpec(shift, modulus, self._lifted(op_index, length)))
        self._plans[op_index] = specs
        return specs

    # -- members --------------------------------------------------------

    def _append_members(self, codes: Sequence[int], provs: Sequence) -> None:
        if len(self.ids) + len(codes) > self.budget:
            raise BudgetExceededError(len(self.ids), self.rounds, self.budget)
        self.ids.extend(codes)
        self.prov.extend(provs)
        fresh = np.asarray(codes, dtype=np.int64)
        self.ids_np = np.concatenate([self.ids_np, fresh])
        for (shift, modulus), comp in self._comps.items():
            extra = ((fresh // shift) % modulus).astype(np.int32)
            self._comps[(shift, modulus)] = np.concatenate([comp, extra])

    def _comp(self, spec: _ChunkSpec) -> np.ndarray:
        key = (spec.shift, spec.modulus)
        comp = self._comps.get(key)
        if comp is None or len(comp) < len(self.ids):
            comp = ((self.ids_np // spec.shift) % spec.modulus).astype(np.int32)
            self._comps[key] = comp
        return comp

    # -- rounds ---------------------------------------------------------

    def _block_chunks(self, sizes: list[int], bases: list[int]):
        """Split a block of argument tuples into bounded leading-axis slices."""
        suffix = prod(sizes[1:]) if len(sizes) > 1 else 1
        rows = max(1, _CHUNK_TARGET // max(1, suffix))
        if suffix > _CHUNK_TARGET * 64:
            # degenerate wide block: fall back to flat slicing
            total = prod(sizes)
            for start in range(0, total, _CHUNK_TARGET):
                yield ("flat", start, min(_CHUNK_TARGET, total - start), sizes, bases)
        else:
            for r0 in range(0, sizes[0], rows):
                height = min(rows, sizes[0] - r0)
                yield ("rows", r0, height, sizes, bases)

    def _apply_chunk(self, op_index: int, chunk) -> np.ndarray:
        kind, start, extent, sizes, bases = chunk
        specs = self._plan(op_index)
        k = len(sizes)
        if kind == "rows":
            positions = [np.arange(start, start + extent, dtype=np.int64) + bases[0]]
            positions += [
                np.arange(s, dtype=np.int64) + b for s, b in zip(sizes[1:], bases[1:])
            ]
        else:
            flat = np.arange(start, start + extent, dtype=np.int64)
            positions = []
            for s, b in zip(reversed(sizes), reversed(bases)):
                positions.append(flat % s + b)
                flat = flat // s
            positions.reverse()
        result = None
        for spec in specs:
            comp = self._comp(spec)
            if kind == "rows":
                idx = comp[positions[0]].astype(np.int64)
                for axis in range(1, k):
                    idx = idx[..., None] * spec.modulus + comp[positions[axis]]
            else:
                idx = comp[positions[0]].astype(np.int64)
                for axis in range(1, k):
                    idx = idx * spec.modulus + comp[positions[axis]]
            part = spec.table[idx.reshape(-1)].astype(np.int64) * spec.shift
            result = part if result is None else result + part
        return result

    def _decode(self, flat: np.ndarray, sizes: list[int], bases: list[int]) -> list[np.ndarray]:
        positions = []
        for s, b in zip(reversed(sizes), reversed(bases)):
            positions.append(flat % s + b)
            flat = flat // s
        positions.reverse()
        return positions

    def run(self, generators: Sequence[tuple[int, ...]]) -> ClosureResult:
        self.rounds = 0
        seed_codes: list[int] = []
        seed_provs: list = []
        seen_seed: set[int] = set()
        for position, g in enumerate(generators):
            code = 0
            for digit in g:
                code = code * self.n + digit
            if code not in seen_seed:
                seen_seed.add(code)
                seed_codes.append(code)
                seed_provs.append(position)
        for op_index, symbol in enumerate(self.op_symbols):
            if symbol.arity == 0:
                value = self.algebra.operations[symbol][0]
                code = sum(value * self.n ** j for j in range(self.m))
                if code not in seen_seed:
                    seen_seed.add(code)
                    seed_codes.append(code)
                    seed_provs.append((op_index,))
        if seed_codes:
            self.seen.add(np.asarray(seed_codes, dtype=np.int64))
            self._append_members(seed_codes, seed_provs)

        arity_ops = [
            (i, s.arity) for i, s in enumerate(self.op_symbols) if s.arity >= 1
        ]
        executor = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        try:
            old = 0
            while old < len(self.ids):
                current = len(self.ids)
                pending_codes: list[int] = []
                pending_provs: list = []
                round_provisional = len(self.ids)
                for op_index, k in arity_ops:
                    for axis in range(k):
                        sizes = [old] * axis + [current - old] + [current] * (k - 1 - axis)
                        if any(s == 0 for s in sizes):
                            continue
                        bases = [0] * axis + [old] + [0] * (k - 1 - axis)
                        chunks = list(self._block_chunks(sizes, bases))
                        if executor is not None and len(chunks) > 1:
                            results = _windowed_map(
                                executor,
                                lambda c: self._apply_chunk(op_index, c),
                                chunks,
                                self.threads * 2,
                            )
                        else:
                            results = (self._apply_chunk(op_index, c) for c in chunks)
                        for chunk, codes in zip(chunks, results):
                            kind, start, extent, csizes, cbases = chunk
                            mask = self.seen.new_mask(codes)
                            if not mask.any():
                                continue
                            fresh, first = np.unique(codes[mask], return_index=True)
                            flat_local = np.flatnonzero(mask)[first]
                            if kind == "rows":
                                suffix = prod(csizes[1:]) if len(csizes) > 1 else 1
                                flat_global = flat_local + start * suffix
                            else:
                                flat_global = flat_local + start
                            arg_positions = self._decode(flat_global, csizes, cbases)
                            self.seen.add(fresh)
                            fresh_list = fresh.tolist()
                            pending_codes.extend(fresh_list)
                            pending_provs.extend(
                                (op_index, *(int(p[i]) for p in arg_positions))
                                for i in range(len(fresh_list))
                            )
                            if round_provisional + len(pending_codes) > self.budget:
                                raise BudgetExceededError(
                                    len(self.ids) + len(pending_codes),
                                    self.rounds,
                                    self.budget,
                                )
                old = current
                if pending_codes:
                    self.rounds += 1
                    self._append_members(pending_codes, pending_provs)
        finally:
            if executor is not None:
                executor.shutdown(wait=False, cancel_futures=True)
        return ClosureResult(
            self.algebra,
            self.m,
            self.ids,
            self.prov,
            self.op_symbols,
            ClosureStats(len(self.ids), self.rounds),
        )


def _windowed_map(executor, fn, items, window):
    futures: deque = deque()
    items = iter(items)
    for item in items:
        futures.append(executor.submit(fn, item))
        if len(futures) >= window:
            yield futures.popleft().result()
    while futures:
        yield futures.popleft().result()


def _closure_python(
    algebra: FiniteAlgebra, generators, m: int, budget: int
) -> ClosureResult:
    """Dict-based reference engine; also covers members too wide to pack."""
    n = algebra.size
    op_symbols = tuple(algebra.operations)
    positions: dict[tuple[int, ...], int] = {}
    order: list[tuple[int, ...]] = []
    prov: list = []

    def add(member: tuple[int, ...], derivation) -> bool:
        if member in positions:
            return False
        if len(order) + 1 > budget:
            raise BudgetExceededError(len(order), rounds, budget)
        positions[member] = len(order)
        order.append(member)
        prov.append(derivation)
        return True

    rounds = 0
    for i, g in enumerate(generators):
        add(tuple(g), i)
    for op_index, symbol in enumerate(op_symbols):
        if symbol.arity == 0:
            value = algebra.operations[symbol][0]
            add((value,) * m, (op_index,))

    tables = {s: algebra.operations[s] for s in op_symbols}
    old = 0
    while old < len(order):
        current = len(order)
        pending: list[tuple[tuple[int, ...], tuple]] = []
        pending_set: set[tuple[int, ...]] = set()
        for op_index, symbol in enumerate(op_symbols):
            k = symbol.arity
            if k == 0:
                continue
            table = tables[symbol]
            for axis in range(k):
                ranges = (
                    [range(0, old)] * axis
                    + [range(old, current)]
                    + [range(0, current)] * (k - 1 - axis)
                )
                for combo in product(*ranges):
                    rows = [order[i] for i in combo]
                    value = []
                    for j in range(m):
                        index = 0
                        for row in rows:
                            index = index * n + row[j]
                        value.append(table[index])
                    member = tuple(value)
                    if member not in positions and member not in pending_set:
                        pending_set.add(member)
                        pending.append((member, (op_index, *combo)))
                        if len(order) + len(pending) > budget:
                            raise BudgetExceededError(
                                len(order) + len(pending), rounds, budget
                            )
        old = current
        if pending:
            rounds += 1
            for member, derivation in pending:
                add(member, derivation)

    ids = [0] * len(order)
    for member, i in positions.items():
        code = 0
        for digit in member:
            code = code * n + digit
        ids[i] = code
    return ClosureResult(
        algebra, m, ids, prov, op_symbols, ClosureStats(len(order), rounds)
    )


def generate_subpower(
    algebra: FiniteAlgebra,
    generators: Sequence[Sequence[int]],
    *,
    m: int | None = None,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
    engine: str = "auto",
) -> ClosureResult:
    """Close the generators under all operations in the m-th power.

    Runs breadth-first rounds; every member records the operation and
    argument members that produced it.  Raises BudgetExceededError once
    more than `budget` members appear.
    """
    generators = [tuple(g) for g in generators]
    if m is None:
        if not generators:
            raise ValueError("the power m is required when there are no generators")
        m = len(generators[0])
    if m < 1:
        raise ValueError("power must be at least 1")
    for g in generators:
        if len(g) != m:
            raise ValueError(f"generator {g} does not have length {m}")
        if any(not 0 <= v < algebra.size for v in g):
            raise ValueError(f"generator {g} leaves the universe")
    if budget < 1:
        raise ValueError("budget must be positive")
    if engine not in ("auto", "numpy", "python"):
        raise ValueError(f"unknown engine {engine!r}")
    fits = algebra.size ** m <= 2 ** 62
    if engine == "numpy" and not fits:
        raise ValueError("packed codes do not fit the numpy engine")
    if engine == "python" or not fits:
        return _closure_python(algebra, generators, m, budget)
    return _NumpyEngine(algebra, m, budget, threads).run(generators)


@dataclass(frozen=True, eq=False)
class SmpAnswer:
    """Subpower-membership answer with an optional witness term."""

    answer: bool
    witness: TermTree | None
    stats: ClosureStats


def smp_decide(
    algebra: FiniteAlgebra,
    instance: SmpInstance,
    *,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
    engine: str = "auto",
) -> SmpAnswer:
    """Decide whether the target lies in the subpower the generators generate."""
    for t in instance.generators + (instance.target,):
        if any(not 0 <= v < algebra.size for v in t):
            raise ValueError(f"tuple {t} leaves the universe")
    closure = generate_subpower(
        algebra, instance.generators, m=instance.m,
        budget=budget, threads=threads, engine=engine,
    )
    if instance.target in closure:
        return SmpAnswer(True, closure.witness_tree(instance.target), closure.stats)
    return SmpAnswer(False, None, closure.stats)
