"""Embedding chain from a finite graph of finite groups into a double.

Stages, each an explicit homomorphism with a computable word map:

  1. cone: replace every vertex group by one common finite group (the
     compatible quotient from gog.sym_quotient) and keep a loop per original
     edge; the fundamental group embeds.
  2. special: straighten the one-vertex graph into a multiple HNN extension
     whose stable letters centralize their associated subgroups.
  3. single: pass to a finite quotient that separates a designated finite
     set, then embed into an HNN extension with a single stable letter,
     sending the old letters to powers of conjugates of the new one.
  4. double: replace the single HNN extension by a double of a finite group
     along a subgroup, adding a prime-order direct factor.

Injectivity of stages 3 and 4 rests on a power trick: conjugates of the
generator by coset representatives land in a free retraction kernel, and a
common power of them is a free basis; the checked exponent comes from
pingpong_exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

from .double import AmalgamWord, Double
from .errors import (
    BallTooLarge,
    BudgetExceeded,
    HypothesisViolated,
    MalformedWord,
    NotRetractive,
    TrivialGenerator,
)
from .free import (
    FreeWord,
    SchreierRewriter,
    cyclic_disjoint,
    free_reduce,
    is_free_basis,
    word_pow,
)
from .gog import GogEdge, GogWord, GraphOfGroups, SymQuotient, sym_quotient
from .hnn import HnnWord, MultiHnn
from .perm import (
    DEFAULT_COSET_CAP,
    DEFAULT_ORDER_CAP,
    CosetAction,
    FiniteGroup,
    FiniteHom,
    Subgroup,
    action_on_cosets,
    closure,
    cyclic_group,
    direct_product,
    elementary_abelian,
    p_by_a_check,
    pack_pair,
)

DEFAULT_SERIES_DEPTH_CAP = 6
DEFAULT_EXPONENT_CAP = 64
DEFAULT_BALL_CAP = 20000


# -- stage 1: cone ---------------------------------------------------------


@dataclass
class ConeStage:
    source: GraphOfGroups
    theta: GraphOfGroups
    quotient: SymQuotient

    def map_word(self, w: GogWord) -> GogWord:
        gog, q = self.source, self.quotient
        letters: list[tuple] = []

        def qpath(v: str, invert: bool = False) -> list[tuple]:
            steps = gog.tree_path[v]
            if invert:
                return [("t", e, -d) for e, d in reversed(steps)]
            return [("t", e, d) for e, d in steps]

        cur = gog.base
        for rep, name, d in w.syls:
            letters += qpath(cur)
            letters.append(("v", "u", q.embeddings[cur](rep)))
            letters += qpath(cur, invert=True)
            f_src = cur
            f_tgt = gog._oriented[(name, d)].tgt
            letters += qpath(f_src) + [("t", name, d)] + qpath(f_tgt, invert=True)
            cur = f_tgt
        letters.append(("v", "u", q.embeddings[gog.base](w.tail)))
        return self.theta.reduce(letters)


def embed_cone(gog: GraphOfGroups, order_cap: int = DEFAULT_ORDER_CAP) -> ConeStage:
    q = sym_quotient(gog, order_cap=order_cap)
    a = q.group
    loops = []
    for name in gog.edge_names:
        e = gog.edges[name]
        into_u = FiniteHom(
            e.group, a, tuple(q.embeddings[e.u](e.into_u(c)) for c in range(e.group.order))
        )
        into_v = FiniteHom(
            e.group, a, tuple(q.embeddings[e.v](e.into_v(c)) for c in range(e.group.order))
        )
        loops.append(GogEdge(name, "u", "u", e.group, into_u, into_v))
    theta = GraphOfGroups({"u": a}, loops, spanning_tree=())
    return ConeStage(gog, theta, q)


# -- stage 2: special multiple HNN -------------------------------------------


@dataclass
class SpecialStage:
    theta: GraphOfGroups
    hnn: MultiHnn
    edge_elems: Dict[str, int]

    def map_word(self, w: GogWord) -> HnnWord:
        base = self.hnn.base
        toks: list[tuple] = []
        for rep, name, d in w.syls:
            toks.append(("a", rep))
            if d == 1:
                toks.append(("a", self.edge_elems[name]))
                toks.append(("t", name, 1))
            else:
                toks.append(("t", name, -1))
                toks.append(("a", base.inverse(self.edge_elems[name])))
        toks.append(("a", w.tail))
        return self.hnn.reduce(toks)


def to_special_hnn(cone: ConeStage) -> SpecialStage:
    theta, q = cone.theta, cone.quotient
    a = theta.groups["u"]
    letters = []
    for name in theta.edge_names:
        e = theta.edges[name]
        s = cone.quotient.edge_elems[name]
        for c in range(e.group.order):
            if a.conj(s, e.into_v(c)) != e.into_u(c):
                raise NotRetractive(
                    f"edge element of {name!r} does not carry one edge image to the other"
                )
        letters.append((name, closure(a, list(e.into_v.image))))
    hnn = MultiHnn(a, letters)
    return SpecialStage(theta, hnn, dict(cone.quotient.edge_elems))


# -- stage 3 support: mod-p series and separating quotients -------------------


class ModPSeries:
    """Lazy chain F = K_0 > K_1 > ... with K_{j+1} = [K_j,K_j] K_j^p.

    Words live over integer-indexed free bases; level j+1 words are over the
    Schreier basis of the level-j mod-p abelianization kernel.
    """

    def __init__(
        self,
        rank: int,
        p: int,
        depth_cap: int = DEFAULT_SERIES_DEPTH_CAP,
        order_cap: int = DEFAULT_ORDER_CAP,
    ):
        self.p = p
        self.ranks = [rank]
        self.depth_cap = depth_cap
        self.order_cap = order_cap
        self._rewriters: List[SchreierRewriter] = []

    def rewriter(self, j: int) -> SchreierRewriter:
        if j >= self.depth_cap:
            raise BudgetExceeded(f"power series depth cap {self.depth_cap} reached")
        while len(self._rewriters) <= j:
            r = self.ranks[-1]
            target = elementary_abelian(self.p, r, order_cap=self.order_cap)
            images = [self.p ** (r - 1 - k) for k in range(r)]
            rw = SchreierRewriter(r, images, target)
            self._rewriters.append(rw)
            self.ranks.append(len(rw.basis))
        return self._rewriters[j]

    def exponents_vanish(self, w: FreeWord) -> bool:
        counts: Dict[int, int] = {}
        for i, e in w:
            counts[i] = counts.get(i, 0) + e
        return all(c % self.p == 0 for c in counts.values())

    def in_level(self, w: FreeWord, m: int) -> bool:
        cur = free_reduce(w)
        for j in range(m):
            if not self.exponents_vanish(cur):
                return False
            # the last layer is decided by the exponent check alone; the
            # rewrite is only needed to descend further
            if j + 1 < m:
                cur = self.rewriter(j).rewrite(cur)
        return True

    def depth_below(self, w: FreeWord) -> int:
        """Largest j with w in K_j, for a nontrivial w."""
        cur = free_reduce(w)
        if not cur:
            raise TrivialGenerator("depth of the identity is unbounded")
        j = 0
        while self.exponents_vanish(cur):
            cur = self.rewriter(j).rewrite(cur)
            j += 1
        return j


@dataclass
class SeparatingQuotient:
    hnn: MultiHnn
    p: int
    level: int
    group: FiniteGroup
    action: CosetAction
    gens: List[HnnWord]
    gen_elems: List[int]
    onto_base: FiniteHom
    _base_gen_index: Dict[int, int]

    def image(self, w: HnnWord) -> int:
        c = self.group
        acc = c.identity
        for tok in self.hnn.tokens_of(w):
            if tok[0] == "a":
                if tok[1] == self.hnn.base.identity:
                    continue
                g = self.gen_elems[self._base_gen_index[tok[1]]]
                acc = c.mul(acc, g)
            else:
                _, name, exp = tok
                g = self.gen_elems[len(self._base_gen_index) + self.hnn.index_of[name]]
                if exp < 0:
                    g = c.inverse(g)
                for _ in range(abs(exp)):
                    acc = c.mul(acc, g)
        return acc


def kernel_word_indices(hnn: MultiHnn) -> Dict[Tuple[str, int], int]:
    return {sym: i for i, sym in enumerate(hnn.kernel_symbols())}


def p_separating_quotient(
    hnn: MultiHnn,
    s_set: Sequence[HnnWord],
    p: int,
    *,
    coset_cap: int = DEFAULT_COSET_CAP,
    order_cap: int = DEFAULT_ORDER_CAP,
    depth_cap: int = DEFAULT_SERIES_DEPTH_CAP,
) -> SeparatingQuotient:
    """Finite quotient of the HNN group, injective on s_set, whose kernel is
    a term of the mod-p power series of the retraction kernel."""
    base = hnn.base
    sym_index = kernel_word_indices(hnn)

    def kernel_word(g: HnnWord) -> FreeWord:
        return tuple((sym_index[s], e) for s, e in hnn.rewrite_in_kernel(g))

    series = ModPSeries(len(sym_index), p, depth_cap=depth_cap, order_cap=order_cap)
    level = 0
    seen = set()
    for i, s in enumerate(s_set):
        for j, s2 in enumerate(s_set):
            if i == j:
                continue
            d = hnn.mul(hnn.inv(s), s2)
            if d == hnn.identity:
                raise HypothesisViolated("separating set has a repeated element")
            if hnn.retraction(d) != base.identity or d in seen:
                continue
            seen.add(d)
            level = max(level, series.depth_below(kernel_word(d)) + 1)

    # the coset count is |A| * prod p^rank(K_j), with ranks given by the
    # Nielsen-Schreier count; refuse oversized enumerations up front
    expected = base.order
    r = len(sym_index)
    for _ in range(level):
        expected *= p**r
        if expected > coset_cap:
            raise BudgetExceeded(
                f"separating quotient needs {expected} cosets, past cap {coset_cap}"
            )
        r = 1 + p**r * (r - 1)

    def in_n(g: HnnWord) -> bool:
        if hnn.retraction(g) != base.identity:
            return False
        return series.in_level(kernel_word(g), level)

    gens = [hnn.from_base(x) for x in base.elements() if x != base.identity]
    base_gen_index = {hnn.retraction(g): i for i, g in enumerate(gens)}
    gens += [hnn.letter(name) for name in hnn.names]

    def member(word) -> bool:
        g = hnn.identity
        for gi, e in word:
            g = hnn.mul(g, gens[gi] if e == 1 else hnn.inv(gens[gi]))
        return in_n(g)

    action = action_on_cosets(member, len(gens), coset_cap=coset_cap, order_cap=order_cap)
    c = action.group

    rho = [hnn.retraction(g) for g in gens]
    onto = []
    for w in action.elem_words:
        x = base.identity
        for gi in w:
            x = base.mul(x, rho[gi])
        onto.append(x)
    onto_base = FiniteHom(c, base, tuple(onto))
    if not p_by_a_check(c, onto_base, p):
        raise HypothesisViolated("quotient kernel does not have p-power order")

    sep = SeparatingQuotient(
        hnn, p, level, c, action, gens, list(action.gen_images), onto_base, base_gen_index
    )
    images = [sep.image(s) for s in s_set]
    if len(set(images)) != len(images):
        raise HypothesisViolated("finite quotient fails to separate the marked set")
    return sep


def special_s_set(hnn: MultiHnn) -> List[HnnWord]:
    """Base elements plus all t_i^-1 a t_j, without repeats."""
    out: Dict[HnnWord, None] = {}
    for x in hnn.base.elements():
        out.setdefault(hnn.from_base(x), None)
    for ni in hnn.names:
        for x in hnn.base.elements():
            for nj in hnn.names:
                w = hnn.reduce([("t", ni, -1), ("a", x), ("t", nj, 1)])
                out.setdefault(w, None)
    return list(out)


# -- power trick -------------------------------------------------------------


def pingpong_exponent(
    words: Sequence[FreeWord], exponent_cap: int = DEFAULT_EXPONENT_CAP
) -> int:
    """Least n with {w^n} a free basis; the words must generate pairwise
    distinct cyclic subgroups."""
    reduced = [free_reduce(w) for w in words]
    if any(not w for w in reduced):
        raise TrivialGenerator("power families need nontrivial words")
    for i in range(len(reduced)):
        for j in range(i + 1, len(reduced)):
            if not cyclic_disjoint(reduced[i], reduced[j]):
                raise HypothesisViolated(
                    "two of the words share a cyclic subgroup; no power is a basis"
                )
    if len(reduced) <= 1:
        return 1
    for n in range(1, exponent_cap + 1):
        if is_free_basis([word_pow(w, n) for w in reduced]):
            return n
    raise BudgetExceeded(f"no free power basis up to exponent {exponent_cap}")


# -- stage 3: single stable letter --------------------------------------------


@dataclass
class SingleStage:
    source: MultiHnn
    sep: SeparatingQuotient
    hnn: MultiHnn
    exponent: int
    letter_images: Dict[str, int]
    base_images: Dict[int, int]
    _psi_t: Dict[str, HnnWord] = field(default_factory=dict)

    def map_word(self, w: HnnWord) -> HnnWord:
        parts = [self.hnn.identity]
        for tok in self.source.tokens_of(w):
            if tok[0] == "a":
                parts.append(self.hnn.from_base(self.base_images[tok[1]]))
            else:
                _, name, exp = tok
                parts.append(self.hnn.pow(self._psi_t[name], exp))
        return self.hnn.mul(*parts)


def embed_single_hnn(
    special: MultiHnn,
    sep: SeparatingQuotient,
    exponent_cap: int = DEFAULT_EXPONENT_CAP,
) -> SingleStage:
    c = sep.group
    base_images = {x: sep.image(special.from_base(x)) for x in special.base.elements()}
    b_img = closure(c, [base_images[x] for x in special.base.elements()])
    single = MultiHnn(c, [("t", b_img)])

    letter_images = {name: sep.image(special.letter(name)) for name in special.names}
    h: Dict[str, HnnWord] = {}
    for name in special.names:
        s = letter_images[name]
        h[name] = single.reduce([("a", s), ("t", "t", 1), ("a", c.inverse(s))])

    conj_words = []
    for name, d in special.kernel_symbols():
        v = single.mul(
            single.from_base(base_images[d]), h[name],
            single.from_base(c.inverse(base_images[d])),
        )
        conj_words.append(single.rewrite_in_kernel(v))
    n = pingpong_exponent(conj_words, exponent_cap)

    stage = SingleStage(special, sep, single, n, letter_images, base_images)
    for name in special.names:
        stage._psi_t[name] = single.pow(h[name], n)
    return stage


# -- stage 4: double -----------------------------------------------------------


@dataclass
class DoubleStage:
    source: MultiHnn
    double: Double
    prime: int
    exponent: int
    h: AmalgamWord
    lift: Callable[[int], int]

    def map_word(self, w: HnnWord) -> AmalgamWord:
        dbl = self.double
        psi_t = dbl.pow(self.h, self.exponent)
        parts = [dbl.identity]
        for tok in self.source.tokens_of(w):
            if tok[0] == "a":
                parts.append(dbl.from_side(0, self.lift(tok[1])))
            else:
                parts.append(dbl.pow(psi_t, tok[2]))
        return dbl.mul(*parts)


def embed_double(
    single: MultiHnn,
    p: int,
    exponent_cap: int = DEFAULT_EXPONENT_CAP,
) -> DoubleStage:
    if len(single.names) != 1:
        raise HypothesisViolated("the double stage needs a single stable letter")
    a1 = single.base
    cp = cyclic_group(p)
    big = direct_product(a1, cp)

    def lift(x: int) -> int:
        return pack_pair(x, 0, p)

    bhat = closure(big, [lift(b) for b in single.subgroups[0].elems])
    dbl = Double(big, bhat)
    y = pack_pair(a1.identity, 1, p)
    h = dbl.normal_form([(0, big.inverse(y)), (1, y)])

    conj_words = []
    for d in single.transversal(0):
        dw = dbl.from_side(0, lift(d))
        v = dbl.mul(dw, h, dbl.inv(dw))
        conj_words.append(dbl.rewrite_in_kernel(v))
    n = pingpong_exponent(conj_words, exponent_cap)
    return DoubleStage(single, dbl, p, n, h, lift)


# -- full chain ----------------------------------------------------------------


@dataclass
class VfreePipeline:
    gog: GraphOfGroups
    cone: ConeStage
    special: SpecialStage
    sep: SeparatingQuotient
    single: SingleStage
    dbl: DoubleStage

    @property
    def double(self) -> Double:
        return self.dbl.double

    def map_word(self, w: GogWord) -> AmalgamWord:
        w1 = self.cone.map_word(w)
        w2 = self.special.map_word(w1)
        w3 = self.single.map_word(w2)
        return self.dbl.map_word(w3)


# -- ball checks -------------------------------------------------------------------


def ball_map_check(
    src_engine,
    img_engine,
    gen_pairs: Sequence[Tuple[object, object]],
    radius: int,
) -> Tuple[int, bool]:
    """Grow the word ball on the source side, mapping step by step.

    Raises HypothesisViolated when the same source element acquires two
    different images (the map is then not well defined). Returns the ball
    size and whether the map is injective on it.
    """
    alphabet = []
    for s, im in gen_pairs:
        alphabet.append((s, im))
        alphabet.append((src_engine.inv(s), img_engine.inv(im)))
    ball = {src_engine.identity: img_engine.identity}
    frontier = list(ball.items())
    for _ in range(radius):
        fresh = []
        for s, im in frontier:
            for gs, gi in alphabet:
                s2 = src_engine.mul(s, gs)
                i2 = img_engine.mul(im, gi)
                known = ball.get(s2)
                if known is None:
                    ball[s2] = i2
                    fresh.append((s2, i2))
                elif known != i2:
                    raise HypothesisViolated(
                        "source element received two distinct images"
                    )
        frontier = fresh
    images = set(ball.values())
    return len(ball), len(images) == len(ball)


def bounded_normal_forms(
    gog: GraphOfGroups, radius: int, cap: int = DEFAULT_BALL_CAP
) -> set:
    """All group elements whose canonical form has at most `radius` syllables.

    Sweeps decorated edge paths out of the base vertex and keeps the loops;
    every canonical form of syllable length k <= radius is itself such a
    path, so the sweep is exhaustive.
    """
    base = gog.base
    forms = {gog.reduce([("v", base, x)]) for x in gog.groups[base].elements()}
    paths: List[Tuple[tuple, str]] = [((), base)]
    for _ in range(radius):
        fresh: List[Tuple[tuple, str]] = []
        for letters, cur in paths:
            for name in gog.edge_names:
                e = gog.edges[name]
                for d, src, tgt in ((1, e.u, e.v), (-1, e.v, e.u)):
                    if src != cur:
                        continue
                    for x in gog.groups[cur].elements():
                        ext = letters + (("v", cur, x), ("t", name, d))
                        fresh.append((ext, tgt))
                        if tgt != base:
                            continue
                        for y in gog.groups[base].elements():
                            forms.add(gog.reduce(list(ext) + [("v", base, y)]))
        paths = fresh
        if len(paths) > cap or len(forms) > cap:
            raise BallTooLarge(f"normal-form ball exceeds the cap {cap}")
    return forms


# -- serialization helpers ----------------------------------------------------------


def group_data(g: FiniteGroup) -> dict:
    return {"name": g.name, "table": [[int(v) for v in row] for row in g.table]}


def group_from_data(data: dict) -> FiniteGroup:
    return FiniteGroup(data["table"], name=data.get("name", "G"))


def gog_data(gog: GraphOfGroups) -> dict:
    return {
        "vertices": {v: group_data(gog.groups[v]) for v in gog.vertex_names},
        "edges": [
            {
                "name": e.name,
                "u": e.u,
                "v": e.v,
                "group": group_data(e.group),
                "into_u": [int(e.into_u(x)) for x in e.group.elements()],
                "into_v": [int(e.into_v(x)) for x in e.group.elements()],
            }
            for e in (gog.edges[n] for n in gog.edge_names)
        ],
        "spanning_tree": sorted(gog.tree),
    }


def gog_from_data(data: dict) -> GraphOfGroups:
    groups = {v: group_from_data(d) for v, d in data["vertices"].items()}
    edges = []
    for e in data["edges"]:
        eg = group_from_data(e["group"])
        edges.append(
            GogEdge(
                e["name"],
                e["u"],
                e["v"],
                eg,
                FiniteHom(eg, groups[e["u"]], tuple(int(x) for x in e["into_u"])),
                FiniteHom(eg, groups[e["v"]], tuple(int(x) for x in e["into_v"])),
            )
        )
    return GraphOfGroups(groups, edges, spanning_tree=data["spanning_tree"])


def gog_word_data(gog: GraphOfGroups, w: GogWord) -> list:
    return [list(tok) for tok in gog.groupoid_tokens(w)]


def gog_word_from_data(gog: GraphOfGroups, data: Sequence) -> GogWord:
    return gog._scan([tuple(tok) for tok in data])


def amalgam_word_data(dbl: Double, w: AmalgamWord) -> list:
    return [[int(s), int(x)] for s, x in dbl.tokens_of(w)]


def amalgam_word_from_data(dbl: Double, data: Sequence) -> AmalgamWord:
    return dbl.normal_form([(int(s), int(x)) for s, x in data])


def _target_data(kind: str, target) -> dict:
    if kind == "graph_of_groups":
        return {"kind": kind, **gog_data(target)}
    if kind == "multi_hnn":
        return {
            "kind": kind,
            "base": group_data(target.base),
            "letters": [
                [n, [int(b) for b in sub.elems]]
                for n, sub in zip(target.names, target.subgroups)
            ],
        }
    if kind == "double":
        return {
            "kind": kind,
            "group": group_data(target.group),
            "amalgam": [int(b) for b in target.amalgam.elems],
        }
    raise MalformedWord(f"unknown target kind {kind!r}")


def _target_from_data(data: dict):
    kind = data["kind"]
    if kind == "graph_of_groups":
        return gog_from_data(data)
    if kind == "multi_hnn":
        base = group_from_data(data["base"])
        return MultiHnn(
            base,
            [(n, closure(base, [int(b) for b in elems])) for n, elems in data["letters"]],
        )
    if kind == "double":
        group = group_from_data(data["group"])
        return Double(group, closure(group, [int(b) for b in data["amalgam"]]))
    raise MalformedWord(f"unknown target kind {kind!r}")


def _target_word_data(kind: str, target, w) -> list:
    if kind == "graph_of_groups":
        return gog_word_data(target, w)
    if kind == "multi_hnn":
        return [list(tok) for tok in target.tokens_of(w)]
    return amalgam_word_data(target, w)


def _target_word_from_data(kind: str, target, data: Sequence):
    if kind == "graph_of_groups":
        return gog_word_from_data(target, data)
    if kind == "multi_hnn":
        return target.reduce([tuple(tok) for tok in data])
    return amalgam_word_from_data(target, data)


# -- embedding certificates -----------------------------------------------------------


def presentation_relations(gog: GraphOfGroups) -> Tuple[tuple, tuple]:
    """Generator letters and the full defining relation set over them.

    Relations are signed references into the letter list: the vertex
    multiplication tables, and one conjugation relation per edge and
    nontrivial edge-group element. Spanning-tree letters are the identity,
    so their conjugation relations drop the stable letter.
    """
    letters = tuple(gog.generator_letters())
    index = {l: i for i, l in enumerate(letters)}

    def vref(v: str, x: int) -> tuple:
        if x == gog.groups[v].identity:
            return ()
        return ((index[("v", v, x)], 1),)

    rels = []
    for v in gog.vertex_names:
        grp = gog.groups[v]
        for x in grp.elements():
            if x == grp.identity:
                continue
            for y in grp.elements():
                if y == grp.identity:
                    continue
                rels.append(
                    vref(v, x) + vref(v, y) + vref(v, grp.inverse(grp.mul(x, y)))
                )
    for name in gog.edge_names:
        e = gog.edges[name]
        if name in gog.tree:
            pre, post = (), ()
        else:
            pre = ((index[("t", name, 1)], -1),)
            post = ((index[("t", name, 1)], 1),)
        beta_inv = gog.groups[e.v].inverse
        for c in e.group.elements():
            if c == e.group.identity:
                continue
            rels.append(
                pre
                + vref(e.u, e.into_u(c))
                + post
                + vref(e.v, beta_inv(e.into_v(c)))
            )
    return letters, tuple(rels)


@dataclass
class EmbeddingCert:
    """Portable record of one stage map out of a graph-of-groups group.

    Carries the source presentation, the target description, the image of
    every generator letter, and the radius of the verified injectivity
    ball; all claims are re-checkable from these fields alone. `chain`
    holds the stage provenance (quotient data, transversals, the prime and
    the power-trick exponents). `pipeline` keeps the live stage objects
    when the certificate was produced in-process; it is not serialized.
    """

    stage: str
    prime: int
    source: GraphOfGroups
    target_kind: str
    target: object
    letters: Tuple[tuple, ...]
    images: Tuple[object, ...]
    relations: Tuple[Tuple[Tuple[int, int], ...], ...]
    ball_radius: int
    ball_size: int
    chain: Tuple[dict, ...]
    pipeline: object = None

    def __post_init__(self):
        self._index = {l: i for i, l in enumerate(self.letters)}

    def eval_refs(self, refs: Sequence[Tuple[int, int]]):
        t = self.target
        acc = t.identity
        for i, e in refs:
            img = self.images[i]
            acc = t.mul(acc, img if e == 1 else t.inv(img))
        return acc

    def map_form(self, w: GogWord):
        """Image of a source element, evaluated letter by letter."""
        gog, t = self.source, self.target
        acc = t.identity
        for tok in gog.groupoid_tokens(w):
            if tok[0] == "g":
                _, v, x = tok
                if x == gog.groups[v].identity:
                    continue
                acc = t.mul(acc, self.images[self._index[("v", v, x)]])
            else:
                _, name, d = tok
                if name in gog.tree:
                    continue
                img = self.images[self._index[("t", name, 1)]]
                acc = t.mul(acc, img if d == 1 else t.inv(img))
        return acc

    def to_data(self) -> dict:
        return {
            "kind": "embedding",
            "stage": self.stage,
            "prime": self.prime,
            "source": gog_data(self.source),
            "target": _target_data(self.target_kind, self.target),
            "letters": [list(l) for l in self.letters],
            "images": [
                _target_word_data(self.target_kind, self.target, im)
                for im in self.images
            ],
            "relations": [[[i, e] for i, e in rel] for rel in self.relations],
            "ball_radius": self.ball_radius,
            "ball_size": self.ball_size,
            "chain": list(self.chain),
        }


def _cone_record(cone: ConeStage) -> dict:
    q = cone.quotient
    src = cone.source
    return {
        "stage": "cone",
        "group": {"name": q.group.name, "order": q.group.order},
        "embeddings": {
            v: [int(q.embeddings[v](x)) for x in src.groups[v].elements()]
            for v in src.vertex_names
        },
        "edge_elems": {name: int(q.edge_elems[name]) for name in src.edge_names},
    }


def _special_record(special: SpecialStage) -> dict:
    hnn = special.hnn
    return {
        "stage": "special",
        "letters": [
            [n, [int(b) for b in sub.elems]]
            for n, sub in zip(hnn.names, hnn.subgroups)
        ],
    }


def _single_record(single: SingleStage) -> dict:
    sep = single.sep
    return {
        "stage": "single",
        "prime": sep.p,
        "series_level": sep.level,
        "quotient_order": sep.group.order,
        "onto_base": [int(x) for x in sep.onto_base.image],
        "transversal": [[[int(a), int(b)] for a, b in w] for w in sep.action.reps],
        "exponent": single.exponent,
        "letter_images": {n: int(single.letter_images[n]) for n in single.source.names},
    }


def _double_record(dbl_stage: DoubleStage) -> dict:
    dbl = dbl_stage.double
    return {
        "stage": "double",
        "prime": dbl_stage.prime,
        "exponent": dbl_stage.exponent,
        "h": amalgam_word_data(dbl, dbl_stage.h),
        "group_order": dbl.group.order,
        "amalgam": [int(b) for b in dbl.amalgam.elems],
    }


STAGE_ORDER = ("cone", "special", "single", "double")


def embedding_certificate(
    gog: GraphOfGroups,
    p: int = 2,
    *,
    stage: str = "double",
    ball_radius: int = 3,
    ball_cap: int = DEFAULT_BALL_CAP,
    coset_cap: int = DEFAULT_COSET_CAP,
    order_cap: int = DEFAULT_ORDER_CAP,
    depth_cap: int = DEFAULT_SERIES_DEPTH_CAP,
    exponent_cap: int = DEFAULT_EXPONENT_CAP,
) -> EmbeddingCert:
    """Run the chain up to `stage` and certify the composite generator map."""
    if stage not in STAGE_ORDER:
        raise MalformedWord(f"unknown stage {stage!r}")
    cone = embed_cone(gog, order_cap=order_cap)
    chain = [_cone_record(cone)]
    target, kind = cone.theta, "graph_of_groups"
    mapper = cone.map_word
    pipeline = None
    if stage != "cone":
        special = to_special_hnn(cone)
        chain.append(_special_record(special))
        target, kind = special.hnn, "multi_hnn"

        def mapper(w, _c=cone, _s=special):
            return _s.map_word(_c.map_word(w))

        if stage not in ("cone", "special"):
            sep = p_separating_quotient(
                special.hnn,
                special_s_set(special.hnn),
                p,
                coset_cap=coset_cap,
                order_cap=order_cap,
                depth_cap=depth_cap,
            )
            single = embed_single_hnn(special.hnn, sep, exponent_cap)
            chain.append(_single_record(single))
            target, kind = single.hnn, "multi_hnn"

            def mapper(w, _c=cone, _s=special, _1=single):
                return _1.map_word(_s.map_word(_c.map_word(w)))

            if stage == "double":
                dbl_stage = embed_double(single.hnn, p, exponent_cap)
                chain.append(_double_record(dbl_stage))
                target, kind = dbl_stage.double, "double"
                pipeline = VfreePipeline(gog, cone, special, sep, single, dbl_stage)
                mapper = pipeline.map_word

    letters, relations = presentation_relations(gog)
    images = tuple(mapper(gog.reduce([l])) for l in letters)
    cert = EmbeddingCert(
        stage=stage,
        prime=p,
        source=gog,
        target_kind=kind,
        target=target,
        letters=letters,
        images=images,
        relations=relations,
        ball_radius=ball_radius,
        ball_size=0,
        chain=tuple(chain),
        pipeline=pipeline,
    )
    for rel in relations:
        if cert.eval_refs(rel) != target.identity:
            raise HypothesisViolated("a defining relation fails in the target")
    forms = bounded_normal_forms(gog, ball_radius, ball_cap)
    seen = set()
    for w in forms:
        im = cert.map_form(w)
        if im in seen:
            raise HypothesisViolated("two source normal forms share an image")
        seen.add(im)
    cert.ball_size = len(forms)
    return cert


def embed_vfree_to_double(
    gog: GraphOfGroups,
    p: int = 2,
    *,
    ball_radius: int = 3,
    ball_cap: int = DEFAULT_BALL_CAP,
    coset_cap: int = DEFAULT_COSET_CAP,
    order_cap: int = DEFAULT_ORDER_CAP,
    depth_cap: int = DEFAULT_SERIES_DEPTH_CAP,
    exponent_cap: int = DEFAULT_EXPONENT_CAP,
) -> Tuple[Double, EmbeddingCert]:
    """Full chain into a double of a finite group, with a certificate."""
    cert = embedding_certificate(
        gog,
        p,
        stage="double",
        ball_radius=ball_radius,
        ball_cap=ball_cap,
        coset_cap=coset_cap,
        order_cap=order_cap,
        depth_cap=depth_cap,
        exponent_cap=exponent_cap,
    )
    return cert.target, cert


def embedding_cert_from_data(data: dict) -> EmbeddingCert:
    source = gog_from_data(data["source"])
    kind = data["target"]["kind"]
    target = _target_from_data(data["target"])
    return EmbeddingCert(
        stage=data["stage"],
        prime=int(data["prime"]),
        source=source,
        target_kind=kind,
        target=target,
        letters=tuple(tuple(l) for l in data["letters"]),
        images=tuple(
            _target_word_from_data(kind, target, w) for w in data["images"]
        ),
        relations=tuple(
            tuple((int(i), int(e)) for i, e in rel) for rel in data["relations"]
        ),
        ball_radius=int(data["ball_radius"]),
        ball_size=int(data["ball_size"]),
        chain=tuple(data["chain"]),
    )


def verify_embedding_ball(
    cert: EmbeddingCert, radius: int, *, cap: int = DEFAULT_BALL_CAP
) -> bool:
    """Desk audit of a certificate: every stored relation maps to the target
    identity, and the source normal forms with at most `radius` syllables
    have pairwise distinct images."""
    target = cert.target
    for rel in cert.relations:
        if cert.eval_refs(rel) != target.identity:
            return False
    forms = bounded_normal_forms(cert.source, radius, cap)
    images = {cert.map_form(w) for w in forms}
    return len(images) == len(forms)


def verify_embedding_cert(data) -> Tuple[bool, List[str]]:
    """Re-check a serialized embedding certificate from its own fields."""
    bad: List[str] = []
    if isinstance(data, EmbeddingCert):
        data = data.to_data()
    try:
        cert = embedding_cert_from_data(data)
    except Exception as exc:  # noqa: BLE001 - diagnosis, not control flow
        return False, [f"certificate does not deserialize: {exc}"]
    letters, relations = presentation_relations(cert.source)
    if cert.letters != letters:
        bad.append("generator letters are not the canonical list")
    if cert.relations != relations:
        bad.append("relation list is not the canonical presentation")
    if len(cert.images) != len(cert.letters):
        bad.append("image count disagrees with the letter count")
        return False, bad
    for ri, rel in enumerate(cert.relations):
        if cert.eval_refs(rel) != cert.target.identity:
            bad.append(f"relation {ri} does not map to the identity")
    try:
        forms = bounded_normal_forms(cert.source, cert.ball_radius)
    except BallTooLarge as exc:
        return False, bad + [str(exc)]
    if len(forms) != cert.ball_size:
        bad.append("stated ball size disagrees with the enumeration")
    images = {cert.map_form(w) for w in forms}
    if len(images) != len(forms):
        bad.append("two ball normal forms share an image")
    want_len = STAGE_ORDER.index(cert.stage) + 1
    stages = [rec.get("stage") for rec in cert.chain]
    if stages != list(STAGE_ORDER[:want_len]):
        bad.append("stage chain does not match the stated stage")
    for rec in cert.chain:
        if rec.get("stage") in ("single", "double") and rec.get("prime") != cert.prime:
            bad.append("a chain record carries the wrong prime")
        if rec.get("stage") in ("single", "double") and int(rec.get("exponent", 0)) < 1:
            bad.append("a power-trick exponent is not positive")
    return not bad, bad
