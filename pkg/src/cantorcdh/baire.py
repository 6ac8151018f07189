"""Finite Baire-category avoidance.

A ``NowhereDenseOracle`` describes a closed nowhere dense set ``C`` by two
procedures: ``refine(w)`` returns an extension ``w'`` of ``w`` with
``[w']`` disjoint from ``C``, and ``refute(p, k)`` decides from the length-k
prefix of ``p`` that ``p`` lies outside ``C`` (``False`` means "not shown").
``avoid`` threads a word through a finite list of oracles.

Oracles on the square work on the interleaved space: even positions carry the
first coordinate, odd positions the second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .bitspace import PointSpec, Word, deinterleave, extends, flip, interleave, split_word
from .denseset import DenseSetSpec
from .tower import ProductMap, Tower, check_pi0_injective


class BaireError(RuntimeError):
    pass


class PreconditionError(BaireError):
    pass


class BudgetExhausted(BaireError):
    """No disagreement found within the allowed precision."""


@dataclass
class NowhereDenseOracle:
    refine: Callable[[Word], Word]
    refute: Callable[[PointSpec, int], bool]
    descriptor: dict = field(default_factory=dict)


def point_oracle(points: Iterable[PointSpec]) -> NowhereDenseOracle:
    """The finite set ``points`` of 2^omega."""
    points = list(points)

    def refine(w):
        for z in points:
            if z.prefix(len(w)) == w:
                w = w + flip(z.bit(len(w)))
        return w

    def refute(p, k):
        t = p.prefix(k)
        return all(z.prefix(k) != t for z in points)

    return NowhereDenseOracle(refine, refute, {"kind": "point", "points": [str(z) for z in points]})


def coordinate_oracle(i: int, z: PointSpec) -> NowhereDenseOracle:
    """``{(x, y) : pi_i(x, y) = z}`` on the interleaved space."""
    if i not in (0, 1):
        raise ValueError("coordinate must be 0 or 1")

    def refine(w):
        seen = w[i::2]
        if seen != z.prefix(len(seen)):
            return w
        pos = len(w) if len(w) % 2 == i else len(w) + 1
        return w + "0" * (pos - len(w)) + flip(z.bit(pos // 2))

    def refute(p, k):
        seen = p.prefix(k)[i::2]
        return seen != z.prefix(len(seen))

    return NowhereDenseOracle(refine, refute, {"kind": "coordinate", "i": i, "z": str(z)})


def point_line_oracle(G: ProductMap, z: PointSpec) -> NowhereDenseOracle:
    """``{(x, y) : pi_0(G(x, y)) = z}``: push the box through G, split off a
    disagreeing first coordinate, pull back."""
    T = G.inner

    def refine(w):
        n = T.level_above(len(w) - 1) if w else 0
        t = w + "0" * (n - len(w))
        u = T.image(t)
        if u[0::2] != z.prefix(len(u[0::2])):
            return t
        pos = len(u) + len(u) % 2
        u2 = u + "0" * (pos - len(u)) + flip(z.bit(pos // 2))
        m = T.level_above(len(u2) - 1)
        return T.preimage(u2 + "0" * (m - len(u2)))

    def refute(p, k):
        n = T.level_at_most(k)
        firsts = T.image(p.prefix(n))[0::2]
        return firsts != z.prefix(len(firsts))

    return NowhereDenseOracle(refine, refute, {"kind": "point-line", "z": str(z)})


def _doubling(depth: int) -> list[int]:
    ks, k = [], 1
    while k < depth:
        ks.append(k)
        k *= 2
    if depth:
        ks.append(depth)
    return ks


def chi_oracle(h: Tower, G: ProductMap, i: int, Q: DenseSetSpec, depth: int,
               check_n: int = 4, prechecked: bool = False) -> NowhereDenseOracle:
    """``{(x, y) : h(pi_i(x, y)) = pi_0(G(x, y))}``.

    Inside a box, fix a point q of Q in coordinate i and two distinct points
    r, r' of Q in the other coordinate.  h(q) is the same for both pairs while
    pi_0 G differs between them, so one pair disagrees with h(q) at some bit.
    """
    if i not in (0, 1):
        raise ValueError("coordinate must be 0 or 1")
    if not prechecked and not check_pi0_injective(G, Q, check_n, depth):
        raise PreconditionError("pi_0 o G is not separated on Q x Q at this depth")

    def pair(q, r):
        return interleave(q, r) if i == 0 else interleave(r, q)

    def refine(w):
        halves = split_word(w)
        q = Q.fresh_query(halves[i])
        r = Q.fresh_query(halves[1 - i])
        r2 = Q.fresh_query(halves[1 - i], {r})
        for k in _doubling(depth):
            hq = h.image_prefix(q, k)
            for other in (r, r2):
                pt = pair(q, other)
                g0 = G.first_coordinate_prefix(pt, k)
                j = next((m for m in range(k) if hq[m] != g0[m]), None)
                if j is not None:
                    size = max(len(w), 2 * h.level_above(j), G.inner.level_above(2 * j))
                    return pt.prefix(size)
        raise BudgetExhausted(
            f"no disagreement up to bit {depth} for {pair(q, r)} and {pair(q, r2)}")

    def refute(p, k):
        coord = deinterleave(p)[i]
        firsts = G.inner.image(p.prefix(G.inner.level_at_most(k)))[0::2]
        hv = h.image(coord.prefix(h.level_at_most(k // 2)))
        return any(a != b for a, b in zip(firsts, hv))

    return NowhereDenseOracle(refine, refute, {"kind": "chi", "h": h.name or "id", "i": i})


def avoid_trace(oracles: Sequence[NowhereDenseOracle], base: Word = "", min_len: int = 0,
                audit: bool = False) -> tuple[Word, list[int]]:
    """Word avoiding every oracle, and the length reached after each refinement."""
    w = base
    precisions = []
    for o in oracles:
        nxt = o.refine(w)
        if not extends(nxt, w):
            raise BaireError("oracle refinement does not extend its input")
        w = nxt
        precisions.append(len(w))
    if len(w) < min_len:
        w += "0" * (min_len - len(w))
    if audit:
        point = PointSpec(w, "0")
        for o, k in zip(oracles, precisions):
            if not o.refute(point, len(w)) or not o.refute(point, k):
                raise BaireError(f"avoided set {o.descriptor} not refuted")
    return w, precisions


def avoid(oracles: Sequence[NowhereDenseOracle], base: Word = "", min_len: int = 0,
          audit: bool = False) -> Word:
    return avoid_trace(oracles, base, min_len, audit)[0]
