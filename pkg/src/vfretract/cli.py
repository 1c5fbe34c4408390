"""Command-line front end: input documents, word problem, certificates.

Input documents are JSON with named finite groups (multiplication table or
permutation generators), an optional graph of groups, an optional double,
subgroup generator words, a prime, and per-stage budget caps. Words are
arrays of letter objects: {"v": vertex, "g": index} or {"t": edge, "exp": k}
for graph-of-groups words, {"side": "left"|"right", "g": index} for
amalgam words.

Exit codes: 0 success, 1 failed verification or violated hypothesis,
2 parse or validation error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .double import AmalgamWord, Double
from .errors import BudgetExceeded, CapExceeded, MalformedWord, SizeMismatch, VfretractError
from .gog import GogEdge, GogWord, GraphOfGroups
from .perm import (
    DEFAULT_COSET_CAP,
    DEFAULT_ORDER_CAP,
    FiniteGroup,
    FiniteHom,
    closure,
    group_from_perm_gens,
)
from .pipeline import (
    DEFAULT_BALL_CAP,
    DEFAULT_EXPONENT_CAP,
    DEFAULT_SERIES_DEPTH_CAP,
    embedding_certificate,
    verify_embedding_cert,
)
from .retraction import lr_for_vfree, verify_certificate, virtual_retraction

SIDE_NAMES = ("left", "right")

DEFAULT_BUDGETS = {
    "order_cap": DEFAULT_ORDER_CAP,
    "coset_cap": DEFAULT_COSET_CAP,
    "series_depth_cap": DEFAULT_SERIES_DEPTH_CAP,
    "exponent_cap": DEFAULT_EXPONENT_CAP,
    "ball_cap": DEFAULT_BALL_CAP,
}


@dataclass
class InputDocument:
    """A parsed and validated problem statement.

    group_defs keeps the original per-group definition dicts so that
    serialize() round-trips the document instead of normalizing
    permutation generators into tables.
    """

    groups: Dict[str, FiniteGroup]
    group_defs: Dict[str, dict]
    gog: Optional[GraphOfGroups] = None
    double: Optional[Double] = None
    double_def: Optional[dict] = None
    subgroup: List[list] = field(default_factory=list)
    word: Optional[list] = None
    prime: int = 2
    budgets: Dict[str, int] = field(default_factory=dict)

    def budget(self, key: str, override: Optional[int] = None) -> int:
        if override is not None:
            return override
        return self.budgets.get(key, DEFAULT_BUDGETS[key])

    def serialize(self) -> dict:
        out: dict = {"groups": {n: d for n, d in sorted(self.group_defs.items())}}
        if self.gog is not None:
            out["graph_of_groups"] = {
                "vertices": {v: self.gog.groups[v].name for v in self.gog.vertex_names},
                "edges": [
                    {
                        "name": e.name,
                        "u": e.u,
                        "v": e.v,
                        "group": e.group.name,
                        "into_u": [int(e.into_u(x)) for x in e.group.elements()],
                        "into_v": [int(e.into_v(x)) for x in e.group.elements()],
                    }
                    for e in (self.gog.edges[n] for n in self.gog.edge_names)
                ],
                "spanning_tree": sorted(self.gog.tree),
            }
        if self.double_def is not None:
            out["double"] = self.double_def
        if self.subgroup:
            out["subgroup"] = self.subgroup
        if self.word is not None:
            out["word"] = self.word
        out["prime"] = self.prime
        if self.budgets:
            out["budgets"] = self.budgets
        return out


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise MalformedWord(msg)


def _parse_group(name: str, data: dict, order_cap: int) -> FiniteGroup:
    _require(isinstance(data, dict), f"group {name!r} must be an object")
    if "table" in data:
        return FiniteGroup(data["table"], name=name, order_cap=order_cap)
    if "perm_gens" in data:
        degree = data.get("degree")
        _require(isinstance(degree, int) and degree > 0,
                 f"group {name!r} needs a positive integer degree")
        gens = [tuple(int(v) for v in p) for p in data["perm_gens"]]
        _require(all(len(p) == degree for p in gens),
                 f"group {name!r} has a generator of the wrong degree")
        return group_from_perm_gens(gens, degree, name=name, order_cap=order_cap)
    raise MalformedWord(f"group {name!r} needs a 'table' or 'perm_gens'")


def _hom_from_table(sub: FiniteGroup, big: FiniteGroup, table: Sequence) -> FiniteHom:
    image = tuple(int(v) for v in table)
    _require(len(image) == sub.order, "edge map table has the wrong length")
    try:
        hom = FiniteHom(sub, big, image)
    except ValueError as exc:
        raise MalformedWord(f"edge map is invalid: {exc}") from exc
    _require(hom.is_injective(), "edge map is not injective")
    return hom


def _validate_letter(doc: InputDocument, letter: dict) -> dict:
    _require(isinstance(letter, dict), "word letters must be objects")
    if "side" in letter:
        _require(doc.double is not None, "side letters need a 'double' block")
        _require(letter["side"] in SIDE_NAMES, "side must be 'left' or 'right'")
        g = letter.get("g")
        _require(isinstance(g, int) and 0 <= g < doc.double.group.order,
                 "letter index out of range")
        return {"side": letter["side"], "g": g}
    if "v" in letter:
        _require(doc.gog is not None, "vertex letters need a 'graph_of_groups' block")
        v = letter["v"]
        _require(v in doc.gog.groups, f"unknown vertex {v!r}")
        g = letter.get("g")
        _require(isinstance(g, int) and 0 <= g < doc.gog.groups[v].order,
                 "letter index out of range")
        return {"v": v, "g": g}
    if "t" in letter:
        _require(doc.gog is not None, "edge letters need a 'graph_of_groups' block")
        t = letter["t"]
        _require(t in doc.gog.edges, f"unknown edge {t!r}")
        exp = letter.get("exp", 1)
        _require(isinstance(exp, int), "edge letter exponent must be an integer")
        return {"t": t, "exp": exp}
    raise MalformedWord("letter needs 'v', 't' or 'side'")


def parse_document(data: dict) -> InputDocument:
    _require(isinstance(data, dict), "input document must be a JSON object")
    budgets = data.get("budgets", {})
    _require(isinstance(budgets, dict), "'budgets' must be an object")
    for k, v in budgets.items():
        _require(k in DEFAULT_BUDGETS, f"unknown budget {k!r}")
        _require(isinstance(v, int) and v > 0, f"budget {k!r} must be a positive integer")
    order_cap = budgets.get("order_cap", DEFAULT_ORDER_CAP)

    group_defs = data.get("groups", {})
    _require(isinstance(group_defs, dict), "'groups' must be an object")
    groups = {n: _parse_group(n, d, order_cap) for n, d in group_defs.items()}

    prime = data.get("prime", 2)
    _require(isinstance(prime, int) and prime >= 2, "'prime' must be an integer >= 2")

    doc = InputDocument(groups=groups, group_defs=group_defs,
                        prime=prime, budgets=dict(budgets))

    if "graph_of_groups" in data:
        gg = data["graph_of_groups"]
        _require(isinstance(gg, dict), "'graph_of_groups' must be an object")
        verts = gg.get("vertices", {})
        _require(isinstance(verts, dict) and verts, "graph needs vertices")
        vgroups = {}
        for vname, gname in verts.items():
            _require(gname in groups, f"vertex {vname!r} references unknown group {gname!r}")
            vgroups[vname] = groups[gname]
        edges = []
        for e in gg.get("edges", []):
            for key in ("name", "u", "v", "group", "into_u", "into_v"):
                _require(key in e, f"edge is missing {key!r}")
            _require(e["u"] in vgroups and e["v"] in vgroups,
                     f"edge {e['name']!r} endpoint is not a vertex")
            _require(e["group"] in groups,
                     f"edge {e['name']!r} references unknown group {e['group']!r}")
            eg = groups[e["group"]]
            edges.append(GogEdge(
                e["name"], e["u"], e["v"], eg,
                _hom_from_table(eg, vgroups[e["u"]], e["into_u"]),
                _hom_from_table(eg, vgroups[e["v"]], e["into_v"]),
            ))
        doc.gog = GraphOfGroups(vgroups, edges, spanning_tree=gg.get("spanning_tree"))

    if "double" in data:
        dd = data["double"]
        _require(isinstance(dd, dict), "'double' must be an object")
        _require(dd.get("group") in groups,
                 f"double references unknown group {dd.get('group')!r}")
        c = groups[dd["group"]]
        amal = dd.get("amalgamated", [])
        _require(isinstance(amal, list), "'amalgamated' must be a list of elements")
        for x in amal:
            _require(isinstance(x, int) and 0 <= x < c.order,
                     "amalgamated element out of range")
        doc.double = Double(c, closure(c, amal))
        doc.double_def = {"group": dd["group"],
                          "amalgamated": [int(x) for x in amal]}

    sub = data.get("subgroup", [])
    _require(isinstance(sub, list), "'subgroup' must be a list of words")
    doc.subgroup = [[_validate_letter(doc, letter) for letter in w] for w in sub]

    if "word" in data:
        _require(isinstance(data["word"], list), "'word' must be a list of letters")
        doc.word = [_validate_letter(doc, letter) for letter in data["word"]]

    return doc


# -- word conversion ----------------------------------------------------------


def gog_word_of(gog: GraphOfGroups, letters: Sequence[dict]) -> GogWord:
    out = []
    for letter in letters:
        if "v" in letter:
            out.append(("v", letter["v"], letter["g"]))
        else:
            exp = letter["exp"]
            out.extend([("t", letter["t"], 1 if exp > 0 else -1)] * abs(exp))
    return gog.reduce(out)


def amalgam_word_of(dbl: Double, letters: Sequence[dict]) -> AmalgamWord:
    return dbl.normal_form(
        [(SIDE_NAMES.index(letter["side"]), letter["g"]) for letter in letters]
    )


def gog_word_letters(gog: GraphOfGroups, w: GogWord) -> list:
    out = []
    for tok in gog.groupoid_tokens(w):
        if tok[0] == "g":
            if tok[2] != gog.groups[tok[1]].identity:
                out.append({"v": tok[1], "g": int(tok[2])})
        else:
            out.append({"t": tok[1], "exp": int(tok[2])})
    return out


def amalgam_word_letters(dbl: Double, w: AmalgamWord) -> list:
    return [{"side": SIDE_NAMES[s], "g": int(x)} for s, x in dbl.tokens_of(w)]


# -- commands -----------------------------------------------------------------


def _cmd_wp(doc: InputDocument, args) -> dict:
    _require(doc.word is not None, "wp needs a 'word' entry in the document")
    if doc.word and "side" in doc.word[0] or doc.gog is None:
        _require(doc.double is not None, "no engine available for this word")
        nf = amalgam_word_of(doc.double, doc.word)
        return {
            "kind": "word",
            "engine": "double",
            "trivial": nf == doc.double.identity,
            "normal_form": amalgam_word_letters(doc.double, nf),
        }
    nf = gog_word_of(doc.gog, doc.word)
    return {
        "kind": "word",
        "engine": "graph_of_groups",
        "trivial": nf == doc.gog.identity,
        "normal_form": gog_word_letters(doc.gog, nf),
    }


def _cmd_embed(doc: InputDocument, args) -> dict:
    _require(doc.gog is not None, "embed needs a 'graph_of_groups' block")
    cert = embedding_certificate(
        doc.gog,
        args.prime if args.prime is not None else doc.prime,
        stage=args.stage,
        ball_radius=args.ball_radius,
        ball_cap=doc.budget("ball_cap"),
        coset_cap=doc.budget("coset_cap", args.coset_cap),
        order_cap=doc.budget("order_cap"),
        depth_cap=doc.budget("series_depth_cap", args.series_depth_cap),
        exponent_cap=doc.budget("exponent_cap"),
    )
    return cert.to_data()


def _cmd_retract(doc: InputDocument, args) -> dict:
    _require(bool(doc.subgroup), "retract needs a nonempty 'subgroup' list")
    if doc.double is not None:
        h_gens = [amalgam_word_of(doc.double, w) for w in doc.subgroup]
        cert = virtual_retraction(
            doc.double, h_gens, coset_cap=doc.budget("coset_cap", args.coset_cap)
        )
        return cert.to_data()
    _require(doc.gog is not None, "retract needs a 'double' or 'graph_of_groups' block")
    h_gens = [gog_word_of(doc.gog, w) for w in doc.subgroup]
    cert = lr_for_vfree(
        doc.gog,
        h_gens,
        args.prime if args.prime is not None else doc.prime,
        coset_cap=doc.budget("coset_cap", args.coset_cap),
        order_cap=doc.budget("order_cap"),
        depth_cap=doc.budget("series_depth_cap", args.series_depth_cap),
        exponent_cap=doc.budget("exponent_cap"),
    )
    return cert.to_data()


def _cmd_verify(data: dict) -> Tuple[bool, List[str]]:
    _require(isinstance(data, dict), "certificate must be a JSON object")
    if data.get("kind") == "embedding":
        return verify_embedding_cert(data)
    return verify_certificate(data)


def _emit(payload: dict, out_path: Optional[str]) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vfretract",
        description="Word problems, double embeddings and certified virtual "
        "retractions for virtually free groups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("input", help="input document (JSON)")
        p.add_argument("--prime", type=int, default=None)
        p.add_argument("--coset-cap", type=int, default=None)
        p.add_argument("--series-depth-cap", type=int, default=None)
        p.add_argument("--out", default=None)

    p_wp = sub.add_parser("wp", help="print the canonical normal form of the word")
    add_common(p_wp)

    p_embed = sub.add_parser("embed", help="certify an embedding into a double")
    add_common(p_embed)
    p_embed.add_argument(
        "--stage", choices=("cone", "special", "single", "double"), default="double"
    )
    p_embed.add_argument("--ball-radius", type=int, default=3)

    p_retract = sub.add_parser("retract", help="certify a virtual retraction")
    add_common(p_retract)

    p_verify = sub.add_parser("verify", help="re-check a certificate file")
    p_verify.add_argument("input", help="certificate file (JSON)")
    p_verify.add_argument("--out", default=None)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "verify":
            ok, diags = _cmd_verify(data)
            _emit({"kind": "verdict", "ok": ok, "diagnoses": diags}, args.out)
            return 0 if ok else 1
        doc = parse_document(data)
        if args.command == "wp":
            payload = _cmd_wp(doc, args)
        elif args.command == "embed":
            payload = _cmd_embed(doc, args)
        else:
            payload = _cmd_retract(doc, args)
    except (MalformedWord, SizeMismatch, ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except CapExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except VfretractError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args.out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
