"""Finite binary words, cylinders and eventually periodic points of 2^omega.

Words are plain ``str`` objects over the alphabet ``'0'``/``'1'``.  A point is
stored as ``head * period`` and is always kept in canonical form (primitive
period, shortest head), so two ``PointSpec`` objects denote the same sequence
exactly when they compare equal.  ``point_eq`` does the comparison the slow way,
by prefixes, and is kept as the reference equality oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import count, product
from math import lcm
from typing import Iterator

Word = str


class BitspaceError(ValueError):
    pass


def check_word(w: str) -> Word:
    if any(c not in "01" for c in w):
        raise BitspaceError(f"not a binary word: {w!r}")
    return w


def words(n: int) -> Iterator[Word]:
    """All words of length ``n`` in lexicographic order."""
    if n == 0:
        yield ""
        return
    for bits in product("01", repeat=n):
        yield "".join(bits)


def all_words() -> Iterator[Word]:
    """Every word, in length-lexicographic order (starting with the empty word)."""
    for n in count():
        yield from words(n)


def extends(w2: Word, w1: Word) -> bool:
    return len(w2) >= len(w1) and w2.startswith(w1)


def word_to_int(w: Word) -> int:
    return int(w, 2) if w else 0


def int_to_word(x: int, n: int) -> Word:
    return format(x, "0%db" % n) if n else ""


def flip(bit: str) -> str:
    return "1" if bit == "0" else "0"


def _primitive_root(s: str) -> str:
    n = len(s)
    for d in range(1, n + 1):
        if n % d == 0 and s[:d] * (n // d) == s:
            return s[:d]
    return s


@dataclass(frozen=True)
class PointSpec:
    """The eventually periodic point ``head + period + period + ...``."""

    head: Word
    period: Word

    def __post_init__(self):
        check_word(self.head)
        check_word(self.period)
        if not self.period:
            raise BitspaceError("period must be non-empty")
        head, period = self.head, _primitive_root(self.period)
        while head and head[-1] == period[-1]:
            head = head[:-1]
            period = period[-1] + period[:-1]
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "period", period)

    def bit(self, i: int) -> str:
        if i < len(self.head):
            return self.head[i]
        return self.period[(i - len(self.head)) % len(self.period)]

    def prefix(self, n: int) -> Word:
        h = self.head
        if n <= len(h):
            return h[:n]
        rest = n - len(h)
        reps = -(-rest // len(self.period))
        return h + (self.period * reps)[:rest]

    def __str__(self):
        return f"{self.head} * {self.period}"

    @classmethod
    def parse(cls, text: str) -> "PointSpec":
        if "*" not in text:
            raise BitspaceError(f"point must look like 'head * period': {text!r}")
        head, period = text.split("*", 1)
        return cls(head.strip(), period.strip())

    @classmethod
    def constant(cls, bit: str) -> "PointSpec":
        return cls("", bit)

    @classmethod
    def from_word(cls, w: Word, tail: str = "0") -> "PointSpec":
        """``w`` followed by the constant tail."""
        return cls(w, tail)


ZERO = PointSpec("", "0")
ONE = PointSpec("", "1")


def prefix(p: PointSpec, n: int) -> Word:
    return p.prefix(n)


def equality_bound(p: PointSpec, q: PointSpec) -> int:
    """Length past which two distinct points must already have differed."""
    return len(p.head) + len(q.head) + lcm(len(p.period), len(q.period))


def point_eq(p: PointSpec, q: PointSpec) -> bool:
    n = equality_bound(p, q)
    return p.prefix(n) == q.prefix(n)


def first_difference(p: PointSpec, q: PointSpec) -> int | None:
    """Index of the first bit where ``p`` and ``q`` differ, ``None`` if equal."""
    n = equality_bound(p, q)
    a, b = p.prefix(n), q.prefix(n)
    for i in range(n):
        if a[i] != b[i]:
            return i
    return None


@dataclass(frozen=True)
class Cylinder:
    base: Word

    def __contains__(self, p: PointSpec) -> bool:
        return p.prefix(len(self.base)) == self.base

    def point(self) -> PointSpec:
        """Canonical member: the base padded with zeros."""
        return PointSpec(self.base, "0")


def _unrolled(p: PointSpec, head_len: int, period_len: int) -> tuple[Word, Word]:
    head = p.prefix(head_len)
    period = p.prefix(head_len + period_len)[head_len:]
    return head, period


def interleave(x: PointSpec, y: PointSpec) -> PointSpec:
    """J(x, y): even bits from ``x``, odd bits from ``y``."""
    h = max(len(x.head), len(y.head))
    per = lcm(len(x.period), len(y.period))
    hx, px = _unrolled(x, h, per)
    hy, py = _unrolled(y, h, per)
    return PointSpec(interleave_words(hx, hy), interleave_words(px, py))


def deinterleave(z: PointSpec) -> tuple[PointSpec, PointSpec]:
    h = len(z.head) + len(z.head) % 2
    per = len(z.period) * (2 if len(z.period) % 2 else 1)
    hz, pz = _unrolled(z, h, per)
    return PointSpec(hz[0::2], pz[0::2]), PointSpec(hz[1::2], pz[1::2])


def interleave_words(u: Word, v: Word) -> Word:
    """Interleave two words; needs ``len(v) <= len(u) <= len(v) + 1``."""
    if not len(v) <= len(u) <= len(v) + 1:
        raise BitspaceError("word lengths do not interleave")
    out = []
    for i, a in enumerate(u):
        out.append(a)
        if i < len(v):
            out.append(v[i])
    return "".join(out)


def split_word(w: Word) -> tuple[Word, Word]:
    """Inverse of ``interleave_words``: the two coordinate prefixes of ``w``."""
    return w[0::2], w[1::2]
