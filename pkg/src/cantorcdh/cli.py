"""Command-line front end.

    cantorcdh synth --pairs '[{"A":"Q","B":"R"}]' --budget 40 --out synth.json
    cantorcdh verify synth.json
    cantorcdh kill-demo --N 5 --depth 32 --budget 80 --out kill.json
    cantorcdh avoid oracles.json
    cantorcdh simulate --scenario steps.json --out trace.json

Exit codes: 0 ok, 1 a verification check failed, 2 precondition or budget
failure, 3 input/output error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from .baire import BaireError, avoid_trace, chi_oracle, coordinate_oracle, point_line_oracle, point_oracle
from .bitspace import BitspaceError, PointSpec, interleave
from .construction import (
    ConstructionError,
    KillCertificate,
    StageState,
    cdh_step,
    demo_G,
    init_stage,
    kill_step,
    verify_invariants,
)
from .denseset import DenseSetError, DisjointFamily, parse_tag
from .poset import Condition, PosetError, condition_errors, run_generic
from .tower import (
    ProductMap,
    TowerError,
    check_coherent,
    check_pi0_injective,
    compose,
    dumps,
    identity_tower,
    invert,
    tower_from_json,
    tower_to_json,
    towers_equal,
)

FORMAT_VERSION = 1
OK, VERIFY_FAIL, PRECONDITION, IO_ERROR = 0, 1, 2, 3
# errors that mean "the requested run is impossible as configured"
RUN_ERRORS = (ConstructionError, PosetError, DenseSetError, BaireError, TowerError, BitspaceError)


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    output_path: str | None = None
    budget: int = 40
    depth: int = 32
    N: int = 5
    pairs: str | None = None
    scenario: str | None = None


# -- io -----------------------------------------------------------------------


def _read_json(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _write(doc: dict, path: str | None) -> None:
    text = dumps(doc) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _pairs_arg(text) -> list[tuple[str, str]]:
    if isinstance(text, str):
        try:
            text = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DenseSetError(f"--pairs is not JSON: {exc}") from None
    try:
        return [(str(d["A"]), str(d["B"])) for d in text]
    except (TypeError, KeyError):
        raise DenseSetError('pairs must be a list of {"A": tag, "B": tag}') from None


def _families(tags: list[tuple[str, str]]):
    return (DisjointFamily([parse_tag(a) for a, _ in tags]),
            DisjointFamily([parse_tag(b) for _, b in tags]))


def _triples_json(g) -> list:
    return [[alpha, str(a), str(b)] for alpha, a, b in g]


# -- synth --------------------------------------------------------------------


def synth_document(tags: list[tuple[str, str]], budget: int) -> dict:
    T = run_generic(_families(tags), budget)
    run = T.run
    return {
        "format_version": FORMAT_VERSION,
        "kind": "synth",
        "pairs": [{"A": a, "B": b} for a, b in tags],
        "budget": budget,
        "schedule": run.schedule,
        "tower": tower_to_json(run.condition.pi),
        "g": _triples_json(run.condition.g),
        "transcript": [str(r) for r in run.transcript],
    }


def cmd_synth(config: RunConfig) -> int:
    if config.budget < 0:
        raise PosetError("budget must be non-negative")
    tags = _pairs_arg(config.pairs or "[]")
    if not tags:
        raise DenseSetError("no pairs given")
    _write(synth_document(tags, config.budget), config.output_path)
    return OK


# -- kill demo ------------------------------------------------------------------


def state_json(s: StageState) -> dict:
    return {
        "stage": s.stage,
        "X_specs": [m.tag for m in s.X_specs],
        "X_extra": sorted(str(p) for p in s.X_extra),
        "Y_specs": [m.tag for m in s.Y_specs],
        "Y_extra": sorted(str(p) for p in s.Y_extra),
        "generators": [g.name for g in s.generators],
        "reserve": list(s.reserve),
        "orbit_depth": s.orbit_depth,
    }


def _history_json(s: StageState) -> list:
    return [h.to_json() if isinstance(h, KillCertificate) else h for h in s.history]


def kill_record(s: StageState, cert: KillCertificate, G: ProductMap, depth: int,
                check_n: int = 10) -> dict:
    audit = check_pi0_injective(G, parse_tag("Q"), check_n, depth)
    return {
        "certificate": cert.to_json(),
        "G": {"pairs": [{"A": a, "B": b} for a, b in G.pairs], "budget": G.budget,
              "tower": tower_to_json(G.inner, interleaved=True)},
        "group": {name: tower_to_json(h) for name, h in sorted(cert.towers.items())},
        "injectivity": {"N": check_n, "depth": depth, "ok": audit.ok,
                        "separations": sorted(audit.separations.values())},
    }


def _finish(s: StageState, kills: list, N: int) -> dict:
    # tower JSON is taken last so every level used by any check is recorded
    return {
        "format_version": FORMAT_VERSION,
        "final": state_json(s),
        "history": _history_json(s),
        "generators": [tower_to_json(g) for g in s.generators],
        "invariants": verify_invariants(s, max(N, 1) * 4),
        "kills": [kill_record(*k) for k in kills],
    }


def kill_demo_document(N: int, depth: int, budget: int) -> dict:
    G = demo_G(budget)
    s0 = init_stage()
    s1 = cdh_step(s0, ["Q"], ["Q"], budget)
    s2, cert = kill_step(s1, G, N, depth)
    doc = _finish(s2, [(s2, cert, G, depth)], N)
    doc.update({"kind": "kill-demo", "config": {"N": N, "depth": depth, "budget": budget},
                "stages": [state_json(s) for s in (s0, s1, s2)]})
    return doc


def cmd_kill_demo(config: RunConfig) -> int:
    if config.depth < 1 or config.budget < 0 or config.N < 0:
        raise ConstructionError("depth must be positive, budget and N non-negative")
    _write(kill_demo_document(config.N, config.depth, config.budget), config.output_path)
    return OK


# -- simulate ---------------------------------------------------------------------


def _G_from(spec: str, budget: int) -> ProductMap:
    if not spec.startswith("synth:"):
        raise ConstructionError(f"kill step needs g of the form synth:<pairs>, got {spec!r}")
    body = spec[len("synth:"):]
    if body == "demo":
        return demo_G(budget)
    tags = _pairs_arg(body)
    return ProductMap(run_generic(_families(tags), budget, name="G"), tags, budget)


def simulate_document(steps: list, depth: int) -> dict:
    s = init_stage()
    stages = [state_json(s)]
    kills = []
    for i, step in enumerate(steps):
        op = step.get("op") if isinstance(step, dict) else None
        if op == "cdh":
            s = cdh_step(s, step["A"], step["B"], int(step.get("budget", 40)))
        elif op == "kill":
            G = _G_from(step.get("g", "synth:demo"), int(step.get("budget", 80)))
            d = int(step.get("depth", depth))
            s, cert = kill_step(s, G, int(step.get("N", 5)), d)
            kills.append((s, cert, G, d))
        else:
            raise ConstructionError(f"step {i}: unknown op {op!r}")
        stages.append(state_json(s))
    doc = _finish(s, kills, 5)
    doc.update({"kind": "simulate", "steps": steps, "stages": stages})
    return doc


def cmd_simulate(config: RunConfig) -> int:
    if not config.scenario:
        raise ConstructionError("simulate needs --scenario")
    data = _read_json(config.scenario)
    steps = data.get("steps") if isinstance(data, dict) else data
    if not isinstance(steps, list):
        raise ConstructionError("scenario must be a list of steps or {steps: [...]}")
    try:
        doc = simulate_document(steps, config.depth)
    except KeyError as exc:
        raise ConstructionError(f"scenario step is missing {exc}") from None
    _write(doc, config.output_path)
    return OK


# -- avoid ------------------------------------------------------------------------


def _oracle_from(desc: dict, G: ProductMap | None, depth: int):
    kind = desc.get("kind")
    if kind == "point":
        return point_oracle(PointSpec.parse(z) for z in desc["points"])
    if kind == "coordinate":
        return coordinate_oracle(int(desc["i"]), PointSpec.parse(desc["z"]))
    if G is None:
        raise ConstructionError(f"{kind} oracles need a map G")
    if kind == "point-line":
        return point_line_oracle(G, PointSpec.parse(desc["z"]))
    if kind == "chi":
        if desc.get("h", "id") != "id":
            raise ConstructionError("only h = id is available from the command line")
        return chi_oracle(identity_tower(), G, int(desc["i"]), parse_tag("Q"), int(desc.get("depth", depth)))
    raise ConstructionError(f"unknown oracle kind {kind!r}")


def avoid_document(data, depth: int) -> dict:
    if isinstance(data, list):
        data = {"oracles": data}
    G = None
    if "G" in data:
        g = data["G"]
        G = _G_from(g if isinstance(g, str) else "synth:" + json.dumps(g["pairs"]), int(data.get("budget", 80)))
    try:
        oracles = [_oracle_from(d, G, depth) for d in data["oracles"]]
    except (KeyError, TypeError) as exc:
        raise ConstructionError(f"malformed oracle descriptor: {exc}") from None
    word, precisions = avoid_trace(oracles, data.get("base", ""), int(data.get("min_len", 0)), audit=True)
    return {"format_version": FORMAT_VERSION, "kind": "avoid", "word": word,
            "per_oracle_precision": precisions}


def cmd_avoid(config: RunConfig) -> int:
    if not config.input_path:
        raise ConstructionError("avoid needs an input file of oracle descriptors")
    _write(avoid_document(_read_json(config.input_path), config.depth), config.output_path)
    return OK


# -- verify -----------------------------------------------------------------------


def _check(results: list, name: str, fn) -> None:
    try:
        bad = fn()
    except (ValueError, KeyError, TypeError, IndexError, RuntimeError) as exc:
        bad = [f"{type(exc).__name__}: {exc}"]
    if bad is True:
        bad = []
    elif bad is False:
        bad = ["failed"]
    results.append((name, not bad, "; ".join(bad[:3])))


def _verify_synth(doc: dict) -> list:
    results = []
    tags = _pairs_arg(doc["pairs"])
    pairs = _families(tags)
    state = {}

    def coherence():
        state["T"] = tower_from_json(doc["tower"])
        return check_coherent(state["T"])

    def condition():
        g = tuple((int(a), PointSpec.parse(x), PointSpec.parse(y)) for a, x, y in doc["g"])
        return condition_errors(Condition(g, state["T"]), pairs)

    def transcript():
        again = synth_document(tags, int(doc["budget"]))
        bad = []
        for key in ("transcript", "g", "tower"):
            if again[key] != doc[key]:
                bad.append(f"{key} does not replay")
        return bad

    _check(results, "tower coherence", coherence)
    if "T" in state:
        _check(results, "condition validity", condition)
    _check(results, "requirement transcript", transcript)
    return results


def _oracle_for_replay(desc: dict, G: ProductMap, group: dict):
    kind = desc["kind"]
    if kind == "point-line":
        return point_line_oracle(G, PointSpec.parse(desc["z"]))
    if kind == "coordinate":
        return coordinate_oracle(int(desc["i"]), PointSpec.parse(desc["z"]))
    if kind == "chi":
        # refute only reads the two towers
        return chi_oracle(group[desc["h"]], G, int(desc["i"]), parse_tag("Q"), 0, prechecked=True)
    if kind == "point":
        return point_oracle(PointSpec.parse(z) for z in desc["points"])
    raise ValueError(f"unknown oracle kind {kind!r}")


def _side_member(final: dict, side: str):
    specs = [parse_tag(t) for t in final[f"{side}_specs"]]
    extra = {PointSpec.parse(p) for p in final[f"{side}_extra"]}
    return lambda p: p in extra or any(s.membership(p) for s in specs)


def _verify_kill(final: dict, rec: dict, generators: list, k: int) -> list:
    results = []
    cert = rec["certificate"]
    x, y, image = (PointSpec.parse(cert[key]) for key in ("x", "y", "image"))
    pair = interleave(x, y)
    in_X, in_Y = _side_member(final, "X"), _side_member(final, "Y")
    towers = {}

    def coherence():
        towers["G"] = ProductMap(tower_from_json(rec["G"]["tower"], name="G"),
                                 [(p["A"], p["B"]) for p in rec["G"]["pairs"]])
        towers["group"] = {name: tower_from_json(t, name=name) for name, t in rec["group"].items()}
        return check_coherent(towers["G"].inner) and all(check_coherent(h) for h in towers["group"].values())

    def group_words():
        bad = []
        for name, h in towers["group"].items():
            if name == "id":
                ok = all(not h.blocks_at(n) for n in h.levels)
            else:
                w = identity_tower()
                for letter in name.split():
                    g = generators[int(letter[1:].split("^")[0])]
                    w = compose(w, invert(g) if letter.endswith("^-1") else g)
                ok = towers_equal(w, h)
            if not ok:
                bad.append(f"{name} is not the named word in the generators")
        return bad

    def sides():
        bad = [f"{p} not in X" for p in (x, y) if not in_X(p)]
        bad += [f"{p} also in Y" for p in (x, y) if in_Y(p)]
        if not in_Y(image):
            bad.append(f"image {image} not in Y")
        if in_X(image):
            bad.append(f"image {image} also in X")
        return bad

    def image_prefix():
        T = towers["G"].inner
        n = T.top
        firsts = T.image(pair.prefix(n))[0::2]
        return [] if firsts == image.prefix(len(firsts)) else [f"G({x}, {y}) disagrees with {image}"]

    def avoidance():
        bad = []
        for entry in cert["avoided"]:
            o = _oracle_for_replay(entry["descriptor"], towers["G"], towers["group"])
            if not o.refute(pair, int(entry["precision"])):
                bad.append(f"{entry['descriptor']} not refuted at {entry['precision']}")
        return bad

    def injectivity():
        inj = rec["injectivity"]
        audit = check_pi0_injective(towers["G"], parse_tag("Q"), int(inj["N"]), int(inj["depth"]))
        return [] if audit.ok else [f"{audit.witness[0]} and {audit.witness[1]} not separated"]

    _check(results, f"kill {k}: tower coherence", coherence)
    if "G" in towers:
        _check(results, f"kill {k}: group words", group_words)
        _check(results, f"kill {k}: image prefix", image_prefix)
        _check(results, f"kill {k}: avoidance replay", avoidance)
        _check(results, f"kill {k}: pi_0 injectivity", injectivity)
    _check(results, f"kill {k}: sides", sides)
    return results


def _verify_stage(doc: dict) -> list:
    results = []
    gens = []

    def generators():
        gens.extend(tower_from_json(t, name=f"g{i}") for i, t in enumerate(doc["generators"]))
        return all(check_coherent(g) for g in gens)

    def disjoint():
        final = doc["final"]
        in_Y = _side_member(final, "Y")
        in_X = _side_member(final, "X")
        bad = [f"{p} in X and Y" for p in final["X_extra"] if in_Y(PointSpec.parse(p))]
        bad += [f"{p} in X and Y" for p in final["Y_extra"] if in_X(PointSpec.parse(p))]
        for t in final["X_specs"]:
            bad += [f"{p} in X and Y" for p in parse_tag(t).first(20) if in_Y(p)]
        return bad

    _check(results, "generator coherence", generators)
    _check(results, "X/Y disjointness", disjoint)
    for k, rec in enumerate(doc["kills"]):
        results.extend(_verify_kill(doc["final"], rec, gens, k))
    return results


def verify_document(doc: dict) -> list:
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise InputError("not a format_version 1 certificate")
    kind = doc.get("kind")
    try:
        if kind == "synth":
            return _verify_synth(doc)
        if kind in ("kill-demo", "simulate"):
            return _verify_stage(doc)
    except (KeyError, TypeError) as exc:
        raise InputError(f"certificate is missing data: {exc}") from None
    raise InputError(f"cannot verify documents of kind {kind!r}")


def cmd_verify(config: RunConfig) -> int:
    if not config.input_path:
        raise InputError("verify needs a certificate path")
    results = verify_document(_read_json(config.input_path))
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        line = f"{name.ljust(width)}  {'ok' if ok else 'FAIL'}"
        print(line + (f"  {detail}" if detail else ""))
    return OK if all(ok for _, ok, _ in results) else VERIFY_FAIL


# -- entry point --------------------------------------------------------------------

COMMANDS = {
    "synth": cmd_synth,
    "verify": cmd_verify,
    "kill-demo": cmd_kill_demo,
    "avoid": cmd_avoid,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cantorcdh", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = {"synth": (40, 32, 5), "kill-demo": (80, 32, 5), "simulate": (80, 32, 5),
                "avoid": (80, 32, 5), "verify": (0, 32, 5)}
    for name, (budget, depth, n) in defaults.items():
        p = sub.add_parser(name)
        if name in ("verify", "avoid"):
            p.add_argument("input", nargs="?", help="JSON input file ('-' for stdin)")
        p.add_argument("--pairs", help='JSON list of {"A": tag, "B": tag}')
        p.add_argument("--budget", type=int, default=budget)
        p.add_argument("--depth", type=int, default=depth)
        p.add_argument("--N", type=int, default=n)
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--scenario", help="scenario JSON for simulate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(args.command, getattr(args, "input", None), args.out, args.budget,
                       args.depth, args.N, args.pairs, args.scenario)
    try:
        return COMMANDS[config.command](config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    except RUN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PRECONDITION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
