"""Level-determined homeomorphisms of 2^omega.

A ``Tower`` is stored as a permutation tree.  Between consecutive levels
``lo < hi`` every word ``s`` of length ``lo`` owns a block: the permutation of
length-``(hi - lo)`` suffixes applied below ``s``.  Only non-identity blocks are
stored, and each block is a ``BlockPerm`` (finitely many listed exceptions, the
rest matched up in increasing order).  Level permutations are then

    pi_hi(s u) = pi_lo(s) + sigma_s(u)

which is coherent by construction.  Long towers built by the generic-filter
scheduler store a few hundred exceptions where explicit tables would need
billions of entries.

Level 0 (the empty word) is always present.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

from .bitspace import (
    PointSpec,
    Word,
    deinterleave,
    int_to_word,
    interleave,
    word_to_int,
    words,
)

# explicit tables are built for merged segments up to this width
MAX_GAP = 18


class TowerError(ValueError):
    pass


class IncoherentTower(TowerError):
    pass


class TowerDepthError(TowerError):
    """The tower has no level deep enough and cannot be extended."""


class BlockPerm:
    """Permutation of ``range(2**width)``: listed exceptions plus an order-preserving rest."""

    __slots__ = ("width", "fwd", "bwd", "_srcs", "_dsts")

    def __init__(self, width: int, exceptions: dict[int, int]):
        size = 1 << width
        fwd = dict(exceptions)
        bwd = {v: k for k, v in fwd.items()}
        if len(bwd) != len(fwd):
            raise IncoherentTower("block exceptions are not injective")
        if any(not (0 <= x < size and 0 <= y < size) for x, y in fwd.items()):
            raise IncoherentTower("block exception out of range")
        self.width = width
        self.fwd = fwd
        self.bwd = bwd
        self._srcs = sorted(fwd)
        self._dsts = sorted(bwd)

    @classmethod
    def from_table(cls, width: int, table: Sequence[int]) -> "BlockPerm":
        if sorted(table) != list(range(1 << width)):
            raise IncoherentTower("block table is not a permutation")
        # the moved points form an invariant set; the identity covers the rest
        return cls(width, {x: y for x, y in enumerate(table) if x != y})

    @staticmethod
    def _select(x: int, srcs: list[int], dsts: list[int]) -> int:
        r = x - bisect.bisect_left(srcs, x)
        y = r
        for d in dsts:
            if d <= y:
                y += 1
            else:
                break
        return y

    def apply(self, x: int) -> int:
        if x in self.fwd:
            return self.fwd[x]
        return self._select(x, self._srcs, self._dsts)

    def inverse_apply(self, y: int) -> int:
        if y in self.bwd:
            return self.bwd[y]
        return self._select(y, self._dsts, self._srcs)

    def apply_word(self, u: Word) -> Word:
        return int_to_word(self.apply(word_to_int(u)), self.width)

    def inverse_word(self, u: Word) -> Word:
        return int_to_word(self.inverse_apply(word_to_int(u)), self.width)

    def inverse(self) -> "BlockPerm":
        return BlockPerm(self.width, self.bwd)

    def after(self, other: "BlockPerm") -> "BlockPerm":
        """``self`` composed after ``other``."""
        moved = set(other.fwd) | {other.inverse_apply(s) for s in self.fwd}
        return BlockPerm(self.width, {x: self.apply(other.apply(x)) for x in moved})

    def is_identity(self) -> bool:
        return all(x == y for x, y in self.fwd.items())

    def table(self) -> list[int]:
        return [self.apply(x) for x in range(1 << self.width)]

    def __eq__(self, other):
        if not isinstance(other, BlockPerm) or other.width != self.width:
            return NotImplemented
        return other.inverse().after(self).is_identity()

    def __hash__(self):  # pragma: no cover - blocks are not used as keys
        raise TypeError("BlockPerm is unhashable")

    def __repr__(self):
        return f"BlockPerm({self.width}, {self.fwd})"


def _blocks_equal(a: BlockPerm | None, b: BlockPerm | None) -> bool:
    if a is None:
        return b is None or b.is_identity()
    if b is None:
        return a.is_identity()
    return a == b


def _compose_blocks(outer: BlockPerm | None, inner: BlockPerm | None) -> BlockPerm | None:
    if outer is None:
        return inner
    if inner is None:
        return outer
    return outer.after(inner)


Extender = Callable[[], "tuple[int, dict[Word, BlockPerm]] | None"]
ExactMap = Callable[[PointSpec], "PointSpec | None"]


class Tower:
    """A coherent sequence of level permutations, optionally extendable on demand.

    ``extender()`` returns the next ``(level, blocks)`` or ``None`` once
    exhausted.  ``exact``/``exact_inv`` return exactly known images of points
    (for towers that came out of a generic filter) or ``None``.
    """

    def __init__(self, levels: Sequence[int], blocks: Sequence[dict], extender: Extender | None = None,
                 exact: ExactMap | None = None, exact_inv: ExactMap | None = None,
                 name: str = "", truncated: bool = False):
        levels = list(levels)
        blocks = [dict(b) for b in blocks]
        if len(levels) != len(blocks):
            raise TowerError("levels and blocks differ in length")
        if not levels or levels[0] != 0:
            levels.insert(0, 0)
            blocks.insert(0, {})
        if blocks[0]:
            raise TowerError("level 0 carries no blocks")
        self._levels = levels
        self._blocks = blocks
        self._extender = extender
        self._exact = exact
        self._exact_inv = exact_inv
        self.name = name
        # set when a composite could not be aligned past its recorded depth
        self.truncated = truncated
        for k in range(1, len(levels)):
            self._check_level(k)

    def _check_level(self, k):
        lo, hi = self._levels[k - 1], self._levels[k]
        if hi <= lo:
            raise TowerError("levels must increase strictly")
        for key, blk in self._blocks[k].items():
            if len(key) != lo or blk.width != hi - lo:
                raise TowerError(f"malformed block at level {hi}")

    # -- levels -------------------------------------------------------------

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(self._levels)

    @property
    def top(self) -> int:
        return self._levels[-1]

    def blocks_at(self, level: int) -> dict[Word, BlockPerm]:
        return self._blocks[self._levels.index(level)]

    @property
    def extendable(self) -> bool:
        return self._extender is not None

    def _extend_once(self) -> bool:
        if self._extender is None:
            return False
        nxt = self._extender()
        if nxt is None:
            self._extender = None
            return False
        n, blk = nxt
        self._levels.append(n)
        self._blocks.append(dict(blk))
        self._check_level(len(self._levels) - 1)
        return True

    def try_ensure(self, n: int) -> bool:
        while self.top < n:
            if not self._extend_once():
                return False
        return True

    def ensure(self, n: int) -> None:
        if not self.try_ensure(n):
            raise TowerDepthError(f"tower {self.name or ''} has no level >= {n}".replace("  ", " "))

    def next_level(self, x: int) -> int | None:
        """Smallest level strictly above ``x``, extending if needed."""
        if not self.try_ensure(x + 1):
            return None
        return self._levels[bisect.bisect_right(self._levels, x)]

    def level_above(self, i: int) -> int:
        n = self.next_level(i)
        if n is None:
            raise TowerDepthError(f"no level above {i}")
        return n

    def level_at_most(self, k: int) -> int:
        self.try_ensure(k)
        return self._levels[bisect.bisect_right(self._levels, k) - 1]

    # -- action -------------------------------------------------------------

    def image(self, t: Word) -> Word:
        """pi_n(t) for ``n = len(t)``, which must be a level."""
        k = self._index(len(t))
        out = []
        for j in range(1, k + 1):
            lo, hi = self._levels[j - 1], self._levels[j]
            blk = self._blocks[j].get(t[:lo])
            seg = t[lo:hi]
            out.append(blk.apply_word(seg) if blk else seg)
        return "".join(out)

    def preimage(self, t: Word) -> Word:
        k = self._index(len(t))
        s = ""
        for j in range(1, k + 1):
            lo, hi = self._levels[j - 1], self._levels[j]
            blk = self._blocks[j].get(s)
            seg = t[lo:hi]
            s += blk.inverse_word(seg) if blk else seg
        return s

    def _index(self, n: int) -> int:
        i = bisect.bisect_left(self._levels, n)
        if i == len(self._levels) or self._levels[i] != n:
            raise TowerError(f"{n} is not a level of this tower")
        return i

    def image_prefix(self, p: PointSpec, m: int, level: int | None = None) -> Word:
        """First ``m`` bits of the image of ``p``."""
        if m == 0:
            return ""
        n = self.level_above(m - 1) if level is None else level
        if n < m:
            raise TowerDepthError(f"level {n} does not determine {m} bits")
        return self.image(p.prefix(n))[:m]

    def preimage_prefix(self, p: PointSpec, m: int) -> Word:
        if m == 0:
            return ""
        return self.preimage(p.prefix(self.level_above(m - 1)))[:m]

    def exact_image(self, p: PointSpec) -> PointSpec | None:
        return self._exact(p) if self._exact else None

    def exact_preimage(self, p: PointSpec) -> PointSpec | None:
        return self._exact_inv(p) if self._exact_inv else None

    def with_new_level(self, n: int, layer: dict[Word, BlockPerm]) -> "Tower":
        """A finite copy of this tower with one more level on top."""
        return Tower(self._levels + [n], self._blocks + [layer], name=self.name)

    def truncate(self, n: int) -> "Tower":
        k = self._index(n)
        return Tower(self._levels[: k + 1], self._blocks[: k + 1], name=self.name)

    def __repr__(self):
        return f"<Tower {self.name or ''} levels={self.levels}>"


def identity_tower() -> Tower:
    """The identity, coherent at every level."""
    state = {"n": 0}

    def extender():
        state["n"] += 1
        return state["n"], {}

    return Tower([0], [{}], extender=extender, exact=lambda p: p, exact_inv=lambda p: p, name="id")


def eval(T: Tower, p: PointSpec, i: int, level: int | None = None) -> str:  # noqa: A001
    """Bit ``i`` of T(p), read off the given level (default: least level above i)."""
    n = T.level_above(i) if level is None else level
    if n <= i:
        raise TowerDepthError(f"level {n} does not determine bit {i}")
    T.ensure(n)
    return T.image(p.prefix(n))[i]


# -- tables ---------------------------------------------------------------


@dataclass
class PermTable:
    """Raw explicit level permutations, possibly incoherent (used for checking input)."""

    levels: list[int]
    perms: list[list[Word]]


def check_coherent(T: "Tower | PermTable") -> bool:
    if isinstance(T, Tower):
        try:
            for k in range(1, len(T._levels)):
                T._check_level(k)
        except TowerError:
            return False
        return True
    levels, perms = list(T.levels), list(T.perms)
    if len(levels) != len(perms) or any(b <= a for a, b in zip(levels, levels[1:])):
        return False
    for n, perm in zip(levels, perms):
        if len(perm) != 1 << n or sorted(perm) != list(words(n)):
            return False
    for k in range(1, len(levels)):
        lo = levels[k - 1]
        prev, cur = perms[k - 1], perms[k]
        for x, img in enumerate(cur):
            t = int_to_word(x, levels[k])
            if img[:lo] != prev[word_to_int(t[:lo])]:
                return False
    return True


def from_tables(levels: Sequence[int], perms: Sequence[Sequence[Word]], name: str = "") -> Tower:
    """Build a tower from explicit permutation tables (lex input order)."""
    table = PermTable(list(levels), [list(p) for p in perms])
    if not check_coherent(table):
        raise IncoherentTower("permutation tables are not a coherent tower")
    levels = list(levels)
    perms = [list(p) for p in perms]
    if not levels or levels[0] != 0:
        levels.insert(0, 0)
        perms.insert(0, [""])
    blocks = [{}]
    for k in range(1, len(levels)):
        lo, hi = levels[k - 1], levels[k]
        w = hi - lo
        layer = {}
        for s in words(lo):
            tab = [word_to_int(perms[k][word_to_int(s + int_to_word(u, w))][lo:]) for u in range(1 << w)]
            blk = BlockPerm.from_table(w, tab)
            if not blk.is_identity():
                layer[s] = blk
        blocks.append(layer)
    return Tower(levels, blocks, name=name)


def to_tables(T: Tower, max_level: int | None = None) -> PermTable:
    levels = [n for n in T.levels if max_level is None or n <= max_level]
    return PermTable(levels, [[T.image(t) for t in words(n)] for n in levels])


# -- structural operations ------------------------------------------------


def segment_map(T: Tower, lo: int, hi: int) -> dict[Word, BlockPerm]:
    """Blocks of T between two of its levels, merging the levels in between."""
    i, j = T._index(lo), T._index(hi)
    if j == i + 1:
        return T._blocks[j]
    w = hi - lo
    keys = set()
    for k in range(i + 1, j + 1):
        keys.update(key[:lo] for key in T._blocks[k])
    if keys and w > MAX_GAP:
        raise TowerDepthError(f"cannot merge levels {lo}..{hi}: gap too wide")
    out = {}
    for s in sorted(keys):
        tab = []
        for u in range(1 << w):
            t = s + int_to_word(u, w)
            seg = []
            for k in range(i + 1, j + 1):
                a, b = T._levels[k - 1], T._levels[k]
                blk = T._blocks[k].get(t[:a])
                piece = t[a:b]
                seg.append(blk.apply_word(piece) if blk else piece)
            tab.append(word_to_int("".join(seg)))
        blk = BlockPerm.from_table(w, tab)
        if not blk.is_identity():
            out[s] = blk
    return out


def with_level(T: Tower, n: int) -> Tower:
    """The same map with ``n`` recorded as a level; raises if it is not coherent there."""
    T.ensure(n)
    if n in T._levels:
        return T
    j = bisect.bisect_left(T._levels, n)
    lo, hi = T._levels[j - 1], T._levels[j]
    w, d = hi - lo, n - lo
    upper, lower = {}, {}
    for s, blk in T._blocks[j].items():
        if w > MAX_GAP:
            raise TowerDepthError("block too wide to split")
        top: dict[int, int] = {}
        for u in range(1 << w):
            v = blk.apply(u)
            a, b = u >> (w - d), v >> (w - d)
            if top.setdefault(a, b) != b:
                raise IncoherentTower(f"not coherent at level {n}")
        up = BlockPerm(d, {a: b for a, b in top.items() if a != b})
        if not up.is_identity():
            upper[s] = up
        mask = (1 << (w - d)) - 1
        for a in range(1 << d):
            tab = [blk.apply((a << (w - d)) | x) & mask for x in range(1 << (w - d))]
            low = BlockPerm.from_table(w - d, tab)
            if not low.is_identity():
                lower[s + int_to_word(a, d)] = low
    levels = T._levels[:j] + [n] + T._levels[j:]
    blocks = T._blocks[:j] + [upper, lower] + T._blocks[j + 1:]
    return Tower(levels, blocks, name=T.name)


def _common_levels(A: Tower, B: Tower, upto: int) -> list[int]:
    return sorted(set(n for n in A.levels if n <= upto) & set(n for n in B.levels if n <= upto))


def equal_at(A: Tower, B: Tower, n: int) -> bool:
    """Do the level-n permutations of A and B agree?  ``n`` must be a level of both."""
    common = _common_levels(A, B, n)
    if common[-1] != n:
        raise TowerError(f"{n} is not a common level")
    for lo, hi in zip(common, common[1:]):
        sa, sb = segment_map(A, lo, hi), segment_map(B, lo, hi)
        for key in set(sa) | set(sb):
            if not _blocks_equal(sa.get(key), sb.get(key)):
                return False
    return True


def deepest_common_level(A: Tower, B: Tower) -> int:
    target = max(A.top, B.top)
    A.try_ensure(target)
    B.try_ensure(target)
    return _common_levels(A, B, min(A.top, B.top))[-1]


def towers_equal(A: Tower, B: Tower) -> bool:
    """Levelwise equality at the deepest common level currently recorded."""
    return equal_at(A, B, deepest_common_level(A, B))


def invert(T: Tower) -> Tower:
    if not check_coherent(T):
        raise IncoherentTower("cannot invert an incoherent tower")

    def inv_layer(k):
        return {T.image(s): blk.inverse() for s, blk in T._blocks[k].items()}

    state = {"k": len(T._levels)}

    def extender():
        k = state["k"]
        if len(T._levels) <= k and not T._extend_once():
            return None
        state["k"] = k + 1
        return T._levels[k], inv_layer(k)

    layers = [{}] + [inv_layer(k) for k in range(1, len(T._levels))]
    if T.name.endswith("^-1"):
        name = T.name[:-3]
    else:
        name = T.name + "^-1" if T.name and T.name != "id" else T.name
    return Tower(T._levels, layers, extender=extender if T.extendable else None,
                 exact=T._exact_inv, exact_inv=T._exact, name=name, truncated=T.truncated)


def _next_common(S: Tower, T: Tower, c: int, limit: int = 4096) -> int | None:
    x = c
    for _ in range(limit):
        a = S.next_level(x)
        if a is None:
            return None
        b = T.next_level(a - 1)
        if b is None:
            return None
        if a == b:
            return a
        x = b - 1
    return None


def _compose_segment(S: Tower, T: Tower, lo: int, hi: int) -> dict[Word, BlockPerm]:
    seg_s, seg_t = segment_map(S, lo, hi), segment_map(T, lo, hi)
    keys = set(seg_t) | {T.preimage(k) for k in seg_s}
    out = {}
    for s in keys:
        blk = _compose_blocks(seg_s.get(T.image(s)), seg_t.get(s))
        if blk is not None and not blk.is_identity():
            out[s] = blk
    return out


def compose(S: Tower, T: Tower, name: str | None = None) -> Tower:
    """S after T, recorded at the levels the two towers share."""
    if not (check_coherent(S) and check_coherent(T)):
        raise IncoherentTower("cannot compose incoherent towers")
    depth = max(S.top, T.top)
    S.try_ensure(depth)
    T.try_ensure(depth)
    common = _common_levels(S, T, min(S.top, T.top))
    layers = [{}] + [_compose_segment(S, T, lo, hi) for lo, hi in zip(common, common[1:])]
    state = {"c": common[-1]}
    can_grow = S.extendable or T.extendable

    def extender():
        c = state["c"]
        n = _next_common(S, T, c)
        if n is None:
            result.truncated = True
            return None
        state["c"] = n
        return n, _compose_segment(S, T, c, n)

    def exact(p):
        q = T.exact_image(p)
        return None if q is None else S.exact_image(q)

    def exact_inv(p):
        q = S.exact_preimage(p)
        return None if q is None else T.exact_preimage(q)

    if name is None:
        name = " ".join(x for x in (S.name, T.name) if x and x != "id") or "id"
    result = Tower(common, layers, extender=extender if can_grow else None,
                   exact=exact, exact_inv=exact_inv, name=name)
    if not can_grow and common[-1] < max(S.top, T.top):
        result.truncated = True
    return result


def _gen_name(i: int, sign: int) -> str:
    return f"g{i}" + ("" if sign > 0 else "^-1")


def group_words(generators: Sequence[Tower], depth: int) -> list[Tower]:
    """All reduced words of length <= depth, deduplicated levelwise.

    Elements are named by their word (``g0 g1^-1``); a word that agrees with an
    earlier element at the deepest common level is merged into it.
    """
    letters = []
    for i, g in enumerate(generators):
        letters.append(((i, 1), g))
        letters.append(((i, -1), invert(g)))
    found = [((), identity_tower())]
    frontier = list(found)
    for _ in range(depth):
        nxt = []
        for word, tw in frontier:
            for letter, lt in letters:
                if word and word[-1] == (letter[0], -letter[1]):
                    continue
                new_word = word + (letter,)
                cand = compose(tw, lt, name=" ".join(_gen_name(*x) for x in new_word))
                if any(towers_equal(cand, old) for _, old in found):
                    continue
                found.append((new_word, cand))
                nxt.append((new_word, cand))
        frontier = nxt
    return [tw for _, tw in found]


# -- product space ----------------------------------------------------------


@dataclass
class ProductMap:
    """Self-map of the square, conjugated through bit interleaving."""

    inner: Tower
    # (A tag, B tag) pairs the inner tower was synthesized from, if any
    pairs: list[tuple[str, str]] = field(default_factory=list)
    budget: int | None = None

    def image(self, x: PointSpec, y: PointSpec) -> tuple[PointSpec, PointSpec] | None:
        z = self.inner.exact_image(interleave(x, y))
        return None if z is None else deinterleave(z)

    def first_coordinate_prefix(self, z: PointSpec, m: int) -> Word:
        """First m bits of pi_0(G(point)) for an interleaved point."""
        return self.inner.image_prefix(z, 2 * m)[0::2] if m else ""


def product_identity() -> ProductMap:
    return ProductMap(identity_tower())


def product_eval(G: ProductMap, x: PointSpec, y: PointSpec, coord: int, i: int) -> str:
    if coord not in (0, 1):
        raise ValueError("coord must be 0 or 1")
    return eval(G.inner, interleave(x, y), 2 * i + coord)


@dataclass
class InjectivityAudit:
    ok: bool
    depth: int
    points: list[PointSpec]
    # position of the first differing bit of the first coordinates, per pair
    separations: dict[tuple[int, int], int]
    witness: tuple[PointSpec, PointSpec] | None = None

    def __bool__(self):
        return self.ok


def check_pi0_injective(G: ProductMap, Q, N: int, depth: int) -> InjectivityAudit:
    """Separate the first coordinates of G on the first N points of Q x Q."""
    from .denseset import PairSet

    pts = PairSet(Q, Q).first(N)
    firsts = [G.first_coordinate_prefix(p, depth) for p in pts] if depth else [""] * len(pts)
    seps = {}
    for (i, a), (j, b) in combinations(enumerate(firsts), 2):
        diff = next((k for k in range(depth) if a[k] != b[k]), None)
        if diff is None:
            return InjectivityAudit(False, depth, pts, seps, (pts[i], pts[j]))
        seps[(i, j)] = diff
    return InjectivityAudit(True, depth, pts, seps)


# -- serialization ---------------------------------------------------------

TABLE_LIMIT = 8


def tower_to_json(T: Tower, interleaved: bool = False) -> dict:
    out = {
        "levels": list(T.levels),
        "blocks": [
            {s: {int_to_word(x, blk.width): int_to_word(y, blk.width) for x, y in sorted(blk.fwd.items())}
             for s, blk in sorted(layer.items())}
            for layer in T._blocks[1:]
        ],
    }
    if T.top <= TABLE_LIMIT:
        out["perms"] = to_tables(T).perms
    if interleaved:
        out["interleaved"] = True
    return out


def tower_from_json(data: dict, name: str = "") -> Tower:
    levels = list(data["levels"])
    layers = [{}]
    for k, layer in enumerate(data["blocks"], start=1):
        width = levels[k] - levels[k - 1]
        layers.append({s: BlockPerm(width, {word_to_int(a): word_to_int(b) for a, b in exc.items()})
                       for s, exc in layer.items()})
    T = Tower(levels, layers, name=name)
    if "perms" in data:
        table = PermTable(levels, data["perms"])
        if not check_coherent(table):
            raise IncoherentTower("recorded permutation tables are not coherent")
        if to_tables(T).perms != table.perms:
            raise IncoherentTower("recorded tables disagree with recorded blocks")
    return T


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


__all__ = [
    "BlockPerm", "Tower", "PermTable", "ProductMap", "InjectivityAudit",
    "TowerError", "IncoherentTower", "TowerDepthError",
    "identity_tower", "eval", "check_coherent", "from_tables", "to_tables", "invert", "compose",
    "group_words", "interleave", "deinterleave", "product_eval", "check_pi0_injective",
    "product_identity", "towers_equal", "equal_at", "with_level", "segment_map", "tower_to_json", "tower_from_json",
]
