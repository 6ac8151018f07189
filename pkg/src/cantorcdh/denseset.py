"""Computable countable dense subsets of 2^omega.

Every set here is made of eventually periodic points and supports three
queries: exact membership, an injective enumeration, and ``fresh_query`` which
returns a member inside a given cylinder avoiding a finite exclusion list.

Concrete sets:

* ``Q`` -- eventually-zero points that carry no tail marker (see below).
* ``R`` -- eventually-one points.
* ``tail:a`` -- points ``w 1 0^(a+1) 1 0^inf``.  The gap between the last two
  ones is the marker; gap 0 (a terminal ``11``) is reserved for ``Q``, so ``Q``
  and the tail sets partition the eventually-zero points.
* ``D`` -- a dense subset of the square (on the interleaved space) whose first
  coordinates are pairwise distinct.
* ``part:<tag>:<i>:<m>`` and ``pair(<tag>,<tag>)`` -- partitions and products.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import count, islice
from typing import Iterable, Iterator, Sequence

from .bitspace import (
    PointSpec,
    Word,
    all_words,
    deinterleave,
    interleave,
    split_word,
    words,
)


class DenseSetError(ValueError):
    pass


class DenseSetSpec:
    """Base class.  Subclasses implement ``membership`` and ``candidates``."""

    tag: str = "?"
    #: points live on the interleaved square rather than on 2^omega itself
    planar = False

    def __init__(self):
        self._cache: list[PointSpec] = []
        self._iter: Iterator[PointSpec] | None = None
        self._index: dict[PointSpec, int] = {}

    def membership(self, p: PointSpec) -> bool:
        raise NotImplementedError

    def __contains__(self, p: PointSpec) -> bool:
        return self.membership(p)

    def candidates(self, w: Word) -> Iterator[PointSpec]:
        """Distinct members inside the cylinder ``[w]``, in a fixed order."""
        raise NotImplementedError

    def _all(self) -> Iterator[PointSpec]:
        return self.candidates("")

    def enumerate(self, k: int) -> PointSpec:
        if self._iter is None:
            self._iter = self._all()
        while len(self._cache) <= k:
            p = next(self._iter)
            self._index[p] = len(self._cache)
            self._cache.append(p)
        return self._cache[k]

    def first(self, n: int) -> list[PointSpec]:
        if n > 0:
            self.enumerate(n - 1)
        return self._cache[:n]

    def index_of(self, p: PointSpec, bound: int = 4096) -> int:
        if p in self._index:
            return self._index[p]
        if not self.membership(p):
            raise DenseSetError(f"{p} is not in {self.tag}")
        while len(self._cache) < bound:
            if self.enumerate(len(self._cache)) == p:
                return self._index[p]
        raise DenseSetError(f"{p} not among the first {bound} points of {self.tag}")

    def fresh_query(self, w: Word, excl: Iterable[PointSpec] = ()) -> PointSpec:
        excl = set(excl)
        for p in self.candidates(w):
            if p not in excl:
                return p
        raise DenseSetError("candidate stream ended")  # pragma: no cover

    def __repr__(self):
        return f"<{type(self).__name__} {self.tag}>"


def _eventually(w: Word, tail: str) -> Iterator[PointSpec]:
    # w+u with u empty or ending in the non-tail bit gives each point once
    other = "1" if tail == "0" else "0"
    yield PointSpec(w, tail)
    for u in all_words():
        if u and u[-1] == other:
            yield PointSpec(w + u, tail)


class QSet(DenseSetSpec):
    tag = "Q"

    def membership(self, p):
        if p.period != "0":
            return False
        return p.head.count("1") <= 1 or p.head.endswith("11")

    def candidates(self, w):
        return (p for p in _eventually(w, "0") if self.membership(p))


class RSet(DenseSetSpec):
    tag = "R"

    def membership(self, p):
        return p.period == "1"

    def candidates(self, w):
        return _eventually(w, "1")


def tail_index(p: PointSpec) -> int | None:
    """Decode the terminal marker of an eventually-zero point, if it has one."""
    h = p.head
    if p.period != "0" or not h:
        return None
    body = h[:-1]
    zeros = len(body) - len(body.rstrip("0"))
    if zeros == 0 or zeros == len(body):
        return None
    return zeros - 1


class TailSet(DenseSetSpec):
    def __init__(self, alpha: int):
        super().__init__()
        if alpha < 0:
            raise DenseSetError("tail index must be non-negative")
        self.alpha = alpha
        self.tag = f"tail:{alpha}"
        self.marker = "1" + "0" * (alpha + 1) + "1"

    def membership(self, p):
        return tail_index(p) == self.alpha

    def candidates(self, w):
        for u in all_words():
            yield PointSpec(w + u + self.marker, "0")


class PartSet(DenseSetSpec):
    """Part ``i`` of ``m``: members of the base whose head has ``i`` ones mod ``m``."""

    def __init__(self, base: DenseSetSpec, i: int, m: int):
        super().__init__()
        if m < 1:
            raise DenseSetError("partition needs m >= 1")
        if not 0 <= i < m:
            raise DenseSetError("part index out of range")
        self.base, self.i, self.m = base, i, m
        self.planar = base.planar
        self.tag = f"part:{base.tag}:{i}:{m}"

    def _part(self, p):
        return p.head.count("1") % self.m

    def membership(self, p):
        return self.base.membership(p) and self._part(p) == self.i

    def candidates(self, w):
        return (p for p in self.base.candidates(w) if self._part(p) == self.i)


class UnionSet(DenseSetSpec):
    """Union of pairwise disjoint specs plus finitely many extra points."""

    def __init__(self, members: Sequence[DenseSetSpec], extras: Iterable[PointSpec] = ()):
        super().__init__()
        self.members = tuple(members)
        self.extras = tuple(
            p for p in dict.fromkeys(extras) if not any(m.membership(p) for m in self.members)
        )
        if not self.members:
            raise DenseSetError("union needs at least one dense member")
        self.planar = self.members[0].planar
        self.tag = "union(" + ",".join(m.tag for m in self.members) + ")"

    def membership(self, p):
        return p in self.extras or any(m.membership(p) for m in self.members)

    def candidates(self, w):
        for p in self.extras:
            if p.prefix(len(w)) == w:
                yield p
        streams = [m.candidates(w) for m in self.members]
        while True:
            for s in streams:
                yield next(s)


def cantor_unpair(k: int) -> tuple[int, int]:
    """k -> (i, j) walking anti-diagonals with i increasing: 0->(0,0), 1->(0,1)."""
    d = (math.isqrt(8 * k + 1) - 1) // 2
    i = k - d * (d + 1) // 2
    return i, d - i


def cantor_pair(i: int, j: int) -> int:
    d = i + j
    return d * (d + 1) // 2 + i


class PairSet(DenseSetSpec):
    """The product of two specs, seen on the interleaved space."""

    planar = True

    def __init__(self, left: DenseSetSpec, right: DenseSetSpec):
        super().__init__()
        self.left, self.right = left, right
        self.tag = f"pair({left.tag},{right.tag})"

    def membership(self, p):
        x, y = deinterleave(p)
        return self.left.membership(x) and self.right.membership(y)

    def _all(self):
        for k in count():
            i, j = cantor_unpair(k)
            yield interleave(self.left.enumerate(i), self.right.enumerate(j))

    def candidates(self, w):
        wx, wy = split_word(w)
        x = next(self.left.candidates(wx))
        for y in self.right.candidates(wy):
            yield interleave(x, y)


def boxes() -> Iterator[tuple[Word, Word]]:
    """Product boxes (u, v): by total length, then |u|, then u, then v."""
    for total in count():
        for lu in range(total + 1):
            for u in words(lu):
                for v in words(total - lu):
                    yield u, v


def _box_code(v: Word) -> Word:
    return "01" + "".join("00" if b == "0" else "10" for b in v) + "11"


def _decode_box(x: PointSpec, y: PointSpec) -> tuple[Word, Word] | None:
    if x.period != "0" or y.period != "0":
        return None
    h = x.head
    if not h.endswith("11"):
        return None
    h = h[:-2]
    bits = []
    while True:
        if len(h) < 2:
            return None
        pair, h = h[-2:], h[:-2]
        if pair == "01":
            break
        if pair == "00":
            bits.append("0")
        elif pair == "10":
            bits.append("1")
        else:
            return None
    return h, "".join(reversed(bits))


def _box_point(u: Word, v: Word) -> tuple[PointSpec, PointSpec]:
    return PointSpec(u + _box_code(v), "0"), PointSpec(v + "011", "0")


class DSet(DenseSetSpec):
    """Dense subset of Q x Q with injective first projection.

    The box (u, v) contributes ``(u S(v) 0^inf, v 011 0^inf)`` where ``S(v)``
    is a right-decodable code of ``v`` ending in ``11``; the first coordinate
    therefore determines the whole pair.
    """

    tag = "D"
    planar = True

    def membership(self, p):
        x, y = deinterleave(p)
        box = _decode_box(x, y)
        return box is not None and _box_point(*box) == (x, y)

    def _all(self):
        for u, v in boxes():
            yield interleave(*_box_point(u, v))

    def candidates(self, w):
        wx, wy = split_word(w)
        for s in all_words():
            yield interleave(*_box_point(wx + s, wy))


class DisjointFamily:
    """A finite sequence of pairwise disjoint dense specs."""

    def __init__(self, members: Sequence[DenseSetSpec]):
        self.members = tuple(members)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    def audit(self, bound: int = 50) -> list[tuple[int, int, PointSpec]]:
        """Return (owner, intruder, point) for every overlap seen; empty means ok."""
        bad = []
        for i, m in enumerate(self.members):
            for p in m.first(bound):
                for j, other in enumerate(self.members):
                    if j != i and other.membership(p):
                        bad.append((i, j, p))
        return bad


def tail_coded_family(m: int, start: int = 0) -> DisjointFamily:
    if m < 1:
        raise DenseSetError("empty family")
    return DisjointFamily([TailSet(start + a) for a in range(m)])


@lru_cache(maxsize=None)
def _qr() -> tuple[QSet, RSet]:
    return QSet(), RSet()


def canonical_QR() -> tuple[DenseSetSpec, DenseSetSpec]:
    return _qr()


def partition_spec(D: DenseSetSpec, m: int) -> DisjointFamily:
    if m < 1:
        raise DenseSetError("partition needs m >= 1")
    if m == 1:
        return DisjointFamily([D])
    return DisjointFamily([PartSet(D, i, m) for i in range(m)])


def distinct_first_dense(N: int) -> list[tuple[PointSpec, PointSpec]]:
    return [deinterleave(p) for p in parse_tag("D").first(N)]


def _split_top(s: str) -> list[str]:
    depth, parts, cur = 0, [], []
    for c in s:
        if c == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        depth += c == "("
        depth -= c == ")"
        cur.append(c)
    parts.append("".join(cur))
    return parts


@lru_cache(maxsize=None)
def parse_tag(tag: str) -> DenseSetSpec:
    """Resolve a tag string to a (shared, cached) spec object."""
    tag = tag.strip()
    if tag == "Q":
        return _qr()[0]
    if tag == "R":
        return _qr()[1]
    if tag == "D":
        return DSet()
    try:
        if tag.startswith("tail:"):
            return TailSet(int(tag[5:]))
        if tag.startswith("part:"):
            base, i, m = tag[5:].rsplit(":", 2)
            return PartSet(parse_tag(base), int(i), int(m))
        if tag.startswith("pair(") and tag.endswith(")"):
            args = _split_top(tag[5:-1])
            if len(args) == 2:
                return PairSet(parse_tag(args[0]), parse_tag(args[1]))
        if tag.startswith("union(") and tag.endswith(")"):
            return UnionSet([parse_tag(t) for t in _split_top(tag[6:-1])])
    except ValueError as exc:
        raise DenseSetError(f"bad tag {tag!r}: {exc}") from None
    raise DenseSetError(f"unknown dense-set tag {tag!r}")


def density_audit(spec: DenseSetSpec, max_len: int) -> list[Word]:
    """Words of length <= max_len where fresh_query misbehaves (empty = dense)."""
    bad = []
    for n in range(max_len + 1):
        for w in words(n):
            p = spec.fresh_query(w)
            if p.prefix(n) != w or not spec.membership(p):
                bad.append(w)
    return bad


def take(it: Iterable, n: int) -> list:
    return list(islice(it, n))
