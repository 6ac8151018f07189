"""Finite conditions (g, pi) and the scheduler that builds a descending chain.

A condition pairs a finite bijection ``g`` (triples ``(alpha, a, b)`` with
``a`` in ``A_alpha`` and ``b`` in ``B_alpha``) with a permutation ``pi`` of the
words of length ``n`` such that ``pi(a|n) = b|n``.  The permutation is held as
a ``Tower`` whose top level is ``n``; refining a condition appends a level.

The scheduler meets requirements ``Level(l)``, ``Dom(a)`` and ``Ran(b)`` in a
fixed round-robin order, and the tower of the resulting chain is the limit map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import count
from typing import Iterator, Sequence, Union

from .bitspace import PointSpec, Word, first_difference, word_to_int, words
from .denseset import DenseSetSpec, DisjointFamily, cantor_pair, cantor_unpair
from .tower import (
    BlockPerm,
    IncoherentTower,
    Tower,
    TowerError,
    check_coherent,
    equal_at,
    from_tables,
    with_level,
)

Pairs = tuple[DisjointFamily, DisjointFamily]
Triple = tuple[int, PointSpec, PointSpec]

# scheduled steps tried while waiting for a new level before giving up
EXACT_STEP_LIMIT = 20000


class PosetError(ValueError):
    pass


@dataclass(frozen=True)
class Level:
    ell: int

    def __str__(self):
        return f"Level({self.ell})"


@dataclass(frozen=True)
class Dom:
    a: PointSpec
    alpha: int

    def __str__(self):
        return f"Dom({self.a}, {self.alpha})"


@dataclass(frozen=True)
class Ran:
    b: PointSpec
    alpha: int

    def __str__(self):
        return f"Ran({self.b}, {self.alpha})"


Requirement = Union[Level, Dom, Ran]


@dataclass(frozen=True, eq=False)
class Condition:
    g: tuple[Triple, ...]
    pi: Tower

    @property
    def n(self) -> int:
        return self.pi.top

    def dom(self) -> set[PointSpec]:
        return {a for _, a, _ in self.g}

    def ran(self) -> set[PointSpec]:
        return {b for _, _, b in self.g}

    def triples(self) -> set[Triple]:
        return set(self.g)


def root() -> Condition:
    return Condition((), Tower([0], [{}]))


def make_condition(g: Sequence[Triple], levels: Sequence[int], perms: Sequence[Sequence[Word]]) -> Condition:
    """Condition from explicit permutation tables (the top table is pi)."""
    return Condition(tuple(g), from_tables(levels, perms))


def condition_errors(p: Condition, pairs: Pairs) -> list[str]:
    A, B = pairs
    errs = []
    if not check_coherent(p.pi):
        errs.append("pi is not a coherent permutation tower")
        return errs
    for alpha, a, b in p.g:
        if not 0 <= alpha < min(len(A), len(B)):
            errs.append(f"index {alpha} outside the family")
            continue
        if not A[alpha].membership(a):
            errs.append(f"{a} is not in A_{alpha} ({A[alpha].tag})")
        if not B[alpha].membership(b):
            errs.append(f"{b} is not in B_{alpha} ({B[alpha].tag})")
    if len(p.dom()) != len(p.g):
        errs.append("g is not injective on its domain side")
    if len(p.ran()) != len(p.g):
        errs.append("g is not injective on its range side")
    n = p.n
    for alpha, a, b in p.g:
        if p.pi.image(a.prefix(n)) != b.prefix(n):
            errs.append(f"pi({a.prefix(n)}) != {b.prefix(n)} for the pair {a} -> {b}")
    return errs


def validate_condition(p: Condition, pairs: Pairs) -> bool:
    return not condition_errors(p, pairs)


def pi_refines(big: Tower, small: Tower) -> bool:
    """pi_big(t)|n = pi_small(t|n) for every t, with n the top of ``small``."""
    n = small.top
    if big.top < n:
        return False
    try:
        refined = with_level(big, n)
        return equal_at(refined, small, n)
    except IncoherentTower:
        return False


def leq(q: Condition, p: Condition) -> bool:
    """q <= p: q extends g_p and its permutation projects onto pi_p."""
    if not p.triples() <= q.triples():
        return False
    return pi_refines(q.pi, p.pi)


def _spread(points: Sequence[PointSpec]) -> int:
    """Least n at which the given distinct points have pairwise distinct prefixes."""
    if len(points) < 2:
        return 0
    periods = math.lcm(*(len(p.period) for p in points))
    if periods > 4096:
        return max(first_difference(a, b) + 1 for i, a in enumerate(points) for b in points[i + 1:])
    L = 2 * max(len(p.head) for p in points) + periods
    keys = sorted(p.prefix(L) for p in points)
    best = 0
    for a, b in zip(keys, keys[1:]):
        d = next(i for i in range(L) if a[i] != b[i])
        best = max(best, d + 1)
    return best


def extend_level(p: Condition, ell: int, pairs: Pairs | None = None) -> Condition:
    """Meet Level(ell).  Blocks below each constrained word are completed in increasing order."""
    n = p.n
    if ell <= n:
        return p
    new_n = max(ell, _spread([a for _, a, _ in p.g]), _spread([b for _, _, b in p.g]))
    width = new_n - n
    exc: dict[Word, dict[int, int]] = {}
    for _, a, b in p.g:
        ta, tb = a.prefix(new_n), b.prefix(new_n)
        exc.setdefault(ta[:n], {})[word_to_int(ta[n:])] = word_to_int(tb[n:])
    layer = {}
    for s, e in exc.items():
        blk = BlockPerm(width, e)
        if not blk.is_identity():
            layer[s] = blk
    return Condition(p.g, p.pi.with_new_level(new_n, layer))


def _member(family: DisjointFamily, alpha: int, point: PointSpec, side: str) -> DenseSetSpec:
    if not 0 <= alpha < len(family):
        raise PosetError(f"no {side}_{alpha} in this family")
    spec = family[alpha]
    if not spec.membership(point):
        raise PosetError(f"{point} is not in {side}_{alpha} ({spec.tag})")
    return spec


def extend_dom(p: Condition, a: PointSpec, alpha: int, pairs: Pairs) -> Condition:
    _member(pairs[0], alpha, a, "A")
    if a in p.dom():
        return p
    target = p.pi.image(a.prefix(p.n))
    b = pairs[1][alpha].fresh_query(target, p.ran())
    return Condition(p.g + ((alpha, a, b),), p.pi)


def extend_ran(p: Condition, b: PointSpec, alpha: int, pairs: Pairs) -> Condition:
    _member(pairs[1], alpha, b, "B")
    if b in p.ran():
        return p
    source = p.pi.preimage(b.prefix(p.n))
    a = pairs[0][alpha].fresh_query(source, p.dom())
    return Condition(p.g + ((alpha, a, b),), p.pi)


def meets(p: Condition, req: Requirement) -> bool:
    if isinstance(req, Level):
        return p.n >= req.ell
    if isinstance(req, Dom):
        return req.a in p.dom()
    return req.b in p.ran()


def meet(p: Condition, req: Requirement, pairs: Pairs) -> Condition:
    if isinstance(req, Level):
        return extend_level(p, req.ell, pairs)
    if isinstance(req, Dom):
        return extend_dom(p, req.a, req.alpha, pairs)
    return extend_ran(p, req.b, req.alpha, pairs)


def roundrobin(pairs: Pairs) -> Iterator[Requirement]:
    """Level(k), then Dom/Ran of the k-th point of each pair, for k = 0, 1, ..."""
    A, B = pairs
    for k in count():
        yield Level(k)
        for alpha in range(len(A)):
            yield Dom(A[alpha].enumerate(k), alpha)
            yield Ran(B[alpha].enumerate(k), alpha)


SCHEDULES = {"roundrobin": roundrobin}


def audit_pairs(pairs: Pairs, bound: int = 20) -> None:
    A, B = pairs
    if len(A) != len(B):
        raise PosetError("the two families must have the same length")
    for side, fam in (("A", A), ("B", B)):
        bad = fam.audit(bound)
        if bad:
            i, j, p = bad[0]
            raise PosetError(f"disjointness audit failed: {p} lies in {side}_{i} and {side}_{j}")


class GenericRun:
    """A deterministic descending chain meeting scheduled requirements."""

    def __init__(self, pairs: Pairs, schedule: str = "roundrobin", audit: bool = True,
                 check_steps: bool = False):
        if schedule not in SCHEDULES:
            raise PosetError(f"unknown schedule {schedule!r}")
        if audit:
            audit_pairs(pairs)
        self.pairs = pairs
        self.schedule = schedule
        self.condition = root()
        self.transcript: list[Requirement] = []
        self._reqs = SCHEDULES[schedule](pairs)
        self._fwd: dict[PointSpec, PointSpec] = {}
        self._bwd: dict[PointSpec, PointSpec] = {}
        self._check = check_steps

    def step(self) -> Requirement:
        return self._apply(next(self._reqs))

    def force(self, req: Requirement) -> Requirement:
        """Meet a requirement out of schedule (the chain still only descends)."""
        return self._apply(req)

    def _apply(self, req: Requirement) -> Requirement:
        old = self.condition
        new = meet(old, req, self.pairs)
        if self._check:
            assert validate_condition(new, self.pairs), condition_errors(new, self.pairs)
            assert leq(new, old)
            assert meets(new, req)
        for _, a, b in new.g[len(old.g):]:
            self._fwd[a] = b
            self._bwd[b] = a
        self.condition = new
        self.transcript.append(req)
        return req

    def run(self, budget: int) -> "GenericRun":
        for _ in range(budget):
            self.step()
        return self

    def _chase(self, p: PointSpec, table: dict, family: DisjointFamily, req) -> PointSpec | None:
        if p in table:
            return table[p]
        alpha = next((k for k, spec in enumerate(family) if spec.membership(p)), None)
        if alpha is None:
            return None
        self.force(req(p, alpha))
        return table.get(p)

    def exact_image(self, p: PointSpec) -> PointSpec | None:
        return self._chase(p, self._fwd, self.pairs[0], Dom)

    def exact_preimage(self, p: PointSpec) -> PointSpec | None:
        return self._chase(p, self._bwd, self.pairs[1], Ran)

    def tower(self, name: str = "") -> Tower:
        pi = self.condition.pi
        emitted = {"n": pi.top}

        def extender():
            for _ in range(EXACT_STEP_LIMIT):
                if self.condition.n > emitted["n"]:
                    break
                self.step()
            else:
                return None
            cur = self.condition.pi
            k = cur.levels.index(emitted["n"]) + 1
            n = cur.levels[k]
            emitted["n"] = n
            return n, cur.blocks_at(n)

        return Tower(pi.levels, [pi.blocks_at(n) for n in pi.levels], extender=extender,
                     exact=self.exact_image, exact_inv=self.exact_preimage, name=name)


def run_generic(pairs: Pairs, budget: int, schedule: str = "roundrobin", name: str = "",
                check_steps: bool = False) -> Tower:
    run = GenericRun(pairs, schedule, check_steps=check_steps).run(budget)
    T = run.tower(name)
    T.run = run
    return T


# -- independent family and sigma-centering cells -----------------------------


def list_code(xs: Sequence[int]) -> int:
    """Nested pairing code of a finite sequence: [] -> 0, [x, *rest] -> 1 + <x, code(rest)>."""
    c = 0
    for x in reversed(xs):
        c = 1 + cantor_pair(x, c)
    return c


def list_decode(c: int) -> list[int]:
    if c < 0:
        raise PosetError("codes are non-negative")
    out = []
    while c:
        x, c = cantor_unpair(c - 1)
        out.append(x)
    return out


def encode(phi: dict[int, int]) -> int:
    """Code of a finite partial function from indices to naturals."""
    return list_code(sorted(cantor_pair(alpha, j) for alpha, j in phi.items()))


def decode(e: int) -> dict[int, int]:
    phi: dict[int, int] = {}
    for entry in list_decode(e):
        alpha, j = cantor_unpair(entry)
        if phi.get(alpha, j) != j:
            raise PosetError(f"code does not describe a function (two values at {alpha})")
        phi[alpha] = j
    return phi


def independent_eval(alpha: int, e: int) -> int:
    """f_alpha(e): the value the coded function assigns to alpha, default 0."""
    return decode(e).get(alpha, 0)


def bijection_code(part: Sequence[tuple[PointSpec, PointSpec]], A: DenseSetSpec, B: DenseSetSpec,
                   bound: int = 4096) -> int:
    """Index j of a finite bijection in the enumeration d_j (sorted index pairs, list-coded)."""
    try:
        return list_code(sorted(cantor_pair(A.index_of(a, bound), B.index_of(b, bound)) for a, b in part))
    except ValueError as exc:
        raise PosetError(f"enumeration bound exceeded: {exc}") from None


def decode_bijection(j: int, A: DenseSetSpec, B: DenseSetSpec) -> set[tuple[PointSpec, PointSpec]]:
    """d_j; codes that are not bijections stand for the empty bijection."""
    pairs = set(cantor_unpair(x) for x in list_decode(j))
    if len({i for i, _ in pairs}) != len(pairs) or len({k for _, k in pairs}) != len(pairs):
        return set()
    return {(A.enumerate(i), B.enumerate(k)) for i, k in pairs}


def x_e(e: int, families: Pairs) -> set[Triple]:
    A, B = families
    out = set()
    for alpha, j in decode(e).items():
        if alpha < len(A):
            out |= {(alpha, a, b) for a, b in decode_bijection(j, A[alpha], B[alpha])}
    return out


@dataclass(frozen=True, eq=False)
class Cell:
    e: int
    n: int
    pi: Tower

    def __eq__(self, other):
        if not isinstance(other, Cell):
            return NotImplemented
        return self.e == other.e and self.n == other.n and _same_pi(self.pi, other.pi)


def _same_pi(a: Tower, b: Tower) -> bool:
    if a.top != b.top:
        return False
    try:
        return equal_at(with_level(a, a.top), b, a.top)
    except TowerError:
        return False


def _code_for(g: Sequence[Triple], families: Pairs, bound: int) -> int:
    A, B = families
    parts: dict[int, list] = {}
    for alpha, a, b in g:
        parts.setdefault(alpha, []).append((a, b))
    return encode({alpha: bijection_code(part, A[alpha], B[alpha], bound) for alpha, part in parts.items()})


def cell_of(p: Condition, families: Pairs, bound: int = 4096) -> Cell:
    """Canonical cell: e codes exactly the alpha-parts of g_p."""
    return Cell(_code_for(p.g, families, bound), p.n, p.pi)


def in_cell(p: Condition, cell: Cell, families: Pairs) -> bool:
    return p.n == cell.n and _same_pi(p.pi, cell.pi) and p.triples() <= x_e(cell.e, families)


@dataclass
class MergeConflict:
    reason: str
    witness: object = None

    def __bool__(self):
        return False


def _union(p: Condition, q: Condition) -> tuple[Triple, ...] | MergeConflict:
    fwd = {a: (alpha, b) for alpha, a, b in p.g}
    bwd = {b: a for _, a, b in p.g}
    extra = []
    for alpha, a, b in q.g:
        if a in fwd:
            if fwd[a] != (alpha, b):
                return MergeConflict("domain clash", (a, fwd[a][1], b))
            continue
        if b in bwd:
            return MergeConflict("range clash", (b, bwd[b], a))
        fwd[a] = (alpha, b)
        bwd[b] = a
        extra.append((alpha, a, b))
    return p.g + tuple(extra)


def _pi_witness(a: Tower, b: Tower, n: int) -> Word | None:
    if n > 16:
        return None
    return next((t for t in words(n) if a.image(t) != b.image(t)), None)


def centered_check(p: Condition, q: Condition, families: Pairs) -> Condition | MergeConflict:
    """A common extension of p and q, or the first reason none exists."""
    if p is q:
        return p
    g = _union(p, q)
    if isinstance(g, MergeConflict):
        return g
    big, small = (p, q) if p.n >= q.n else (q, p)
    if p.n == q.n:
        if not _same_pi(p.pi, q.pi):
            return MergeConflict("permutation clash", _pi_witness(p.pi, q.pi, p.n))
    elif not pi_refines(big.pi, small.pi):
        return MergeConflict(f"permutation clash between levels {small.n} and {big.n}")
    r = Condition(g, big.pi)
    errs = condition_errors(r, families)
    if errs:
        return MergeConflict("merged condition invalid", errs[0])
    if not (leq(r, p) and leq(r, q)):  # pragma: no cover - follows from the checks above
        return MergeConflict("merged condition is not below both")
    return r
