"""Finite stages of the recursion building X and Y.

A ``StageState`` holds the two sides ``X`` and ``Y`` (each a union of dense
specs plus finitely many extra points) and the generators of the group ``H``
found so far.  ``cdh_step`` adds a generator carrying one union of X-specs onto
another while fixing the rest of X and all of Y setwise; ``kill_step`` finds a
pair (x, y) for a given self-map G of the square with ``pi_0 G(x, y)`` put on
the Y side, recording the avoidance in a ``KillCertificate``.

Tail-coded specs not yet on either side form a reserve.  Every generator
preserves each reserved spec, so a reserve spec can later join X or Y without
breaking the invariance of either side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .baire import (
    NowhereDenseOracle,
    avoid_trace,
    chi_oracle,
    coordinate_oracle,
    point_line_oracle,
)
from .bitspace import PointSpec, interleave
from .denseset import (
    DenseSetSpec,
    DisjointFamily,
    UnionSet,
    density_audit,
    parse_tag,
)
from .poset import run_generic
from .tower import ProductMap, Tower, check_pi0_injective, group_words

RESERVE = 4
AUDIT_N = 10


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class StageState:
    stage: int
    X_specs: tuple[DenseSetSpec, ...]
    X_extra: frozenset = frozenset()
    Y_specs: tuple[DenseSetSpec, ...] = ()
    Y_extra: frozenset = frozenset()
    generators: tuple[Tower, ...] = ()
    audit_precision: int = 32
    orbit_depth: int = 1
    # tail indices not yet placed on either side
    reserve: tuple[int, ...] = ()
    # one record per step: dicts for cdh steps, KillCertificate for kill steps
    history: tuple = ()
    # specs added by each step, for the density audit of condition (4)
    added: tuple = ()

    def in_X(self, p: PointSpec) -> bool:
        return p in self.X_extra or any(s.membership(p) for s in self.X_specs)

    def in_Y(self, p: PointSpec) -> bool:
        return p in self.Y_extra or any(s.membership(p) for s in self.Y_specs)

    def X(self) -> DenseSetSpec:
        return _union(self.X_specs, self.X_extra)

    def Y(self) -> DenseSetSpec:
        return _union(self.Y_specs, self.Y_extra)

    def sample(self, side: str, N: int) -> list[PointSpec]:
        """First N points of each spec of a side, then all its extras."""
        specs, extra = (self.X_specs, self.X_extra) if side == "X" else (self.Y_specs, self.Y_extra)
        pts = [p for s in specs for p in s.first(N)]
        return list(dict.fromkeys(pts + sorted(extra, key=str)))


@dataclass
class KillCertificate:
    x: PointSpec
    y: PointSpec
    image: PointSpec
    # [{"descriptor": ..., "precision": k}] in the order avoided
    avoided: list
    group_depth: int
    word: str = ""
    witness: tuple[str, str] = ("", "")
    group: list = field(default_factory=list)
    # the group elements themselves, by name, for serialization
    towers: dict = field(default_factory=dict, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "x": str(self.x), "y": str(self.y), "image": str(self.image),
            "avoided": self.avoided, "group_depth": self.group_depth,
            "word": self.word, "witness": list(self.witness), "group": self.group,
        }


def _union(specs: Sequence[DenseSetSpec], extras: Iterable[PointSpec] = ()) -> DenseSetSpec:
    extras = [p for p in extras if not any(s.membership(p) for s in specs)]
    if len(specs) == 1 and not extras:
        return specs[0]
    return UnionSet(specs, extras)


def init_stage(reserve: int = RESERVE, audit_precision: int = 32, orbit_depth: int = 1) -> StageState:
    Q, R = parse_tag("Q"), parse_tag("R")
    return StageState(0, (Q,), frozenset(), (R,), frozenset(), (), audit_precision, orbit_depth,
                      tuple(range(reserve)), (), ((Q, R),))


def _select(s: StageState, tags: Sequence[str]) -> list[DenseSetSpec]:
    by_tag = {spec.tag: spec for spec in s.X_specs}
    chosen = []
    for t in tags:
        spec = parse_tag(t)
        if spec.tag not in by_tag:
            raise ConstructionError(f"{t!r} is not a whole member of X")
        if spec not in chosen:
            chosen.append(by_tag[spec.tag])
    if not chosen:
        raise ConstructionError("empty selection")
    return chosen


def cdh_pairs(s: StageState, A_tags: Sequence[str], B_tags: Sequence[str]):
    """The pairs a cdh step synthesizes from: (A, B), (X-A, X-B), (Y, Y), reserve."""
    A, B = _select(s, A_tags), _select(s, B_tags)
    rest_A = [m for m in s.X_specs if m not in A]
    rest_B = [m for m in s.X_specs if m not in B]
    if bool(rest_A) != bool(rest_B):
        raise ConstructionError("X-A and X-B must be both empty or both nonempty")
    loose = [p for p in s.X_extra if not any(m.membership(p) for m in s.X_specs)]
    left = [_union(A), _union(s.Y_specs, s.Y_extra)]
    right = [_union(B), _union(s.Y_specs, s.Y_extra)]
    if rest_A:
        left.insert(1, _union(rest_A, loose))
        right.insert(1, _union(rest_B, loose))
    elif loose:
        raise ConstructionError("extra X points need a nonempty X-A to live in")
    for k in s.reserve:
        t = parse_tag(f"tail:{k}")
        left.append(t)
        right.append(t)
    return DisjointFamily(left), DisjointFamily(right)


def _maps_into(f: Tower, pts: Iterable[PointSpec], target: DenseSetSpec) -> list[str]:
    bad = []
    for p in pts:
        q = f.exact_image(p)
        if q is None or not target.membership(q):
            bad.append(f"{p} -> {q}")
    return bad


def cdh_step(s: StageState, A: Sequence[str], B: Sequence[str], budget: int,
             N: int = AUDIT_N) -> StageState:
    pairs = cdh_pairs(s, A, B)
    f = run_generic(pairs, budget, name=f"g{len(s.generators)}")
    audit = {}
    for a, b in zip(*pairs):
        audit[f"{a.tag}->{b.tag}"] = _maps_into(f, a.first(N), b)
    failures = {k: v for k, v in audit.items() if v}
    if failures:
        raise ConstructionError(f"cdh audit failed: {failures}")
    record = {
        "op": "cdh", "stage": s.stage, "A": list(A), "B": list(B), "budget": budget,
        "pairs": [[a.tag, b.tag] for a, b in zip(*pairs)], "audit_N": N,
        "audit": sorted(audit), "levels": list(f.levels),
    }
    return replace(s, stage=s.stage + 1, generators=s.generators + (f,),
                   history=s.history + (record,), added=s.added + ((),))


# -- orbits -----------------------------------------------------------------


@dataclass
class Orbit:
    points: frozenset
    # (word, point) pairs whose image is known only prefix-wise
    approximants: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, p):
        return p in self.points

    def __len__(self):
        return len(self.points)


def orbit_closure(s: StageState, pts: Iterable[PointSpec], depth: int) -> Orbit:
    pts = list(pts)
    if not s.generators:
        return Orbit(frozenset(pts))
    found = set(pts)
    approx = []
    for h in group_words(s.generators, depth)[1:]:
        for p in pts:
            q = h.exact_image(p)
            if q is None:
                approx.append((h.name, p))
            else:
                found.add(q)
    return Orbit(frozenset(found), approx)


# -- kill step --------------------------------------------------------------


def _reserve_witness(s: StageState, G: ProductMap) -> tuple[DenseSetSpec, DenseSetSpec]:
    """A pair of G of the form (S x S -> V x ...) with S, V reserved."""
    reserved = {f"tail:{k}" for k in s.reserve}
    for a_tag, b_tag in G.pairs:
        A, B = parse_tag(a_tag), parse_tag(b_tag)
        left = getattr(A, "left", None)
        right = getattr(A, "right", None)
        target = getattr(B, "left", None)
        if left is None or target is None or left is not right:
            continue
        if left.tag in reserved and target.tag in reserved and left.tag != target.tag:
            return left, target
    raise ConstructionError("G has no pair mapping a reserved square into a reserved column")


def kill_oracles(s: StageState, G: ProductMap, N: int, depth: int,
                 group: Sequence[Tower] | None = None) -> list[NowhereDenseOracle]:
    oracles = [point_line_oracle(G, z) for z in s.sample("X", N)]
    for z in s.sample("Y", N):
        for i in (0, 1):
            oracles.append(coordinate_oracle(i, z))
    if s.generators:
        Q = parse_tag("Q")
        for h in group if group is not None else group_words(s.generators, s.orbit_depth):
            for i in (0, 1):
                oracles.append(chi_oracle(h, G, i, Q, depth, prechecked=True))
    return oracles


def kill_step(s: StageState, G: ProductMap, N: int, depth: int = 32,
              check_n: int = AUDIT_N) -> tuple[StageState, KillCertificate]:
    Q = parse_tag("Q")
    if s.generators:
        audit = check_pi0_injective(G, Q, check_n, depth)
        if not audit:
            a, b = audit.witness
            raise ConstructionError(f"depth budget {depth} exhausted: pi_0 o G does not separate "
                                    f"{a} and {b}")
    S, V = _reserve_witness(s, G)
    group = group_words(s.generators, s.orbit_depth) if s.generators else []
    oracles = kill_oracles(s, G, N, depth, group)
    w, precisions = avoid_trace(oracles)
    wx, wy = w[0::2], w[1::2]
    x = S.fresh_query(wx)
    y = S.fresh_query(wy, {x})
    image = G.image(x, y)
    if image is None:
        raise ConstructionError(f"G({x}, {y}) is not exactly determined")
    z = image[0]
    pair = interleave(x, y)
    for o, k in zip(oracles, precisions):
        if not o.refute(pair, k):
            raise ConstructionError(f"({x}, {y}) is not refuted by {o.descriptor}")
    new_x = orbit_closure(s, [x, y], s.orbit_depth)
    new_y = orbit_closure(s, [z], s.orbit_depth)
    reserve = tuple(k for k in s.reserve if f"tail:{k}" not in (S.tag, V.tag))
    cert = KillCertificate(
        x, y, z,
        [{"descriptor": o.descriptor, "precision": k} for o, k in zip(oracles, precisions)],
        s.orbit_depth, w, (S.tag, V.tag), [h.name for h in group], {h.name: h for h in group},
    )
    new = replace(
        s, stage=s.stage + 1,
        X_specs=s.X_specs + (S,), X_extra=s.X_extra | new_x.points,
        Y_specs=s.Y_specs + (V,), Y_extra=s.Y_extra | new_y.points,
        reserve=reserve, history=s.history + (cert,), added=s.added + ((S, V),),
    )
    clash = _disjointness(new, AUDIT_N)
    if clash:
        raise ConstructionError(f"kill step would break X/Y disjointness: {clash[0]}")
    return new, cert


# -- invariants -------------------------------------------------------------


def _disjointness(s: StageState, N: int) -> list[str]:
    bad = [f"{p} is in X and Y" for p in s.sample("X", N) if s.in_Y(p)]
    bad += [f"{p} is in X and Y" for p in s.sample("Y", N) if s.in_X(p)]
    return list(dict.fromkeys(bad))


def _preservation(s: StageState, N: int) -> list[str]:
    bad = []
    for f in s.generators:
        for side, member in (("X", s.in_X), ("Y", s.in_Y)):
            for p in s.sample(side, N):
                for name, q in ((f.name, f.exact_image(p)), (f.name + "^-1", f.exact_preimage(p))):
                    if q is None or not member(q):
                        bad.append(f"{name}({p}) = {q} leaves {side}")
    return bad


def verify_invariants(s: StageState, N: int) -> dict:
    """Per-condition verdicts, each ``{"ok": bool, "detail": [...]}``."""
    report = {"scope": f"checked on the first {N} points of each spec and all extra points; "
                       "cardinal density conditions are replaced by finite audits"}
    report["1"] = {"ok": True, "detail": [
        f"{len(s.X_specs)} X specs, {len(s.X_extra)} X extras, {len(s.Y_specs)} Y specs, "
        f"{len(s.Y_extra)} Y extras, {len(s.generators)} generators"]}
    bad = _disjointness(s, N)
    report["2"] = {"ok": not bad, "detail": bad}
    bad = _preservation(s, N)
    report["3"] = {"ok": not bad, "detail": bad}
    L = max(1, math.ceil(math.log2(max(N, 2))))
    bad = [f"{spec.tag} misses [{w}]" for specs in s.added for spec in specs
           for w in density_audit(spec, L)]
    report["4"] = {"ok": not bad, "detail": bad, "word_length": L}
    cdh = [h for h in s.history if isinstance(h, dict) and h.get("op") == "cdh"]
    report["5"] = {"ok": all(not h.get("failures") for h in cdh),
                   "detail": [f"stage {h['stage']}: {h['A']} -> {h['B']}" for h in cdh],
                   "applicable": bool(cdh)}
    kills = [h for h in s.history if isinstance(h, KillCertificate)]
    bad = [f"image {c.image} not in Y" for c in kills if not s.in_Y(c.image)]
    bad += [f"{p} not in X" for c in kills for p in (c.x, c.y) if not s.in_X(p)]
    report["6"] = {"ok": not bad, "detail": bad, "applicable": bool(kills)}
    report["ok"] = all(report[k]["ok"] for k in "123456")
    return report


def inject_y_fault(s: StageState, p: PointSpec | None = None) -> StageState:
    """Corrupt Y with a point of X (the first point of Q by default)."""
    p = p or parse_tag("Q").enumerate(0)
    return replace(s, Y_extra=s.Y_extra | {p})


def replay_certificate(cert: KillCertificate, oracles: Sequence[NowhereDenseOracle]) -> list[str]:
    """Recheck every recorded avoidance with freshly built oracles."""
    bad = []
    pair = interleave(cert.x, cert.y)
    if len(oracles) != len(cert.avoided):
        bad.append(f"{len(oracles)} oracles rebuilt, {len(cert.avoided)} recorded")
    for o, rec in zip(oracles, cert.avoided):
        if o.descriptor != rec["descriptor"]:
            bad.append(f"oracle mismatch: {o.descriptor} vs {rec['descriptor']}")
        elif not o.refute(pair, rec["precision"]):
            bad.append(f"not refuted: {rec['descriptor']} at {rec['precision']}")
    return bad


def demo_G(budget: int = 80) -> ProductMap:
    """A map of the square carrying Q x Q onto D and tail:0 squared onto tail:1 squared."""
    tags = [("pair(Q,Q)", "D"), ("pair(tail:0,tail:0)", "pair(tail:1,tail:1)")]
    pairs = (DisjointFamily([parse_tag(a) for a, _ in tags]),
             DisjointFamily([parse_tag(b) for _, b in tags]))
    return ProductMap(run_generic(pairs, budget, name="G"), tags, budget)


__all__ = [
    "StageState", "KillCertificate", "ConstructionError", "Orbit",
    "init_stage", "cdh_step", "cdh_pairs", "kill_step", "kill_oracles", "orbit_closure",
    "verify_invariants", "inject_y_fault", "replay_certificate", "demo_G",
]
