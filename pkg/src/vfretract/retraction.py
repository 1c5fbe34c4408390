"""Virtual retractions onto finitely generated subgroups of a double.

Given G = C *_B C' and a finitely generated H <= G, build an H-invariant
subtree U of the Bass-Serre tree, take N generated by the inversions in the
boundary edges of U, and retract K = NH onto H by stripping the N-part.
The construction is packaged as an independently checkable certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .double import AmalgamWord, Double, ExtElement, Vertex
from .errors import (
    BudgetExceeded,
    HypothesisViolated,
    MalformedWord,
    NotRetractive,
)
from .free import FreeWord, free_reduce, fold_subgroup_graph, member_and_rewrite
from .hnn import MultiHnn
from .perm import (
    DEFAULT_COSET_CAP,
    DEFAULT_ORDER_CAP,
    closure,
    coset_bfs,
)
from .pipeline import (
    amalgam_word_data,
    amalgam_word_from_data,
    embed_cone,
    embed_double,
    embed_single_hnn,
    gog_data,
    gog_from_data,
    gog_word_data,
    gog_word_from_data,
    group_data,
    group_from_data,
    p_separating_quotient,
    special_s_set,
    to_special_hnn,
)

Word = Tuple[Tuple[int, int], ...]


# -- membership in H -------------------------------------------------------------


class SubgroupOracle:
    """Decides membership in H = <gens> <= G and produces witness words.

    The double retracts onto C with free kernel F. H meets F in a finite-index
    subgroup whose Schreier generators fold into a Stallings graph; membership
    then reduces to one graph query plus a finite table lookup in C.
    """

    def __init__(self, dbl: Double, gens: Sequence[AmalgamWord]):
        self.dbl = dbl
        self.gens = list(gens)
        g = dbl.group
        rho = [dbl.retraction(w) for w in self.gens]

        # BFS transversal words for rho(H) <= C, identity first.
        tau: Dict[int, FreeWord] = {g.identity: ()}
        order = [g.identity]
        cursor = 0
        while cursor < len(order):
            x = order[cursor]
            cursor += 1
            for i, r in enumerate(rho):
                for sign, y in ((1, g.mul(x, r)), (-1, g.mul(x, g.inverse(r)))):
                    if y not in tau:
                        tau[y] = free_reduce(tau[x] + ((i, sign),))
                        order.append(y)
        self.tau = tau
        self.rho_order = order

        # Schreier generators of H n ker(rho), folded into a Stallings graph.
        sigma_wits: List[FreeWord] = []
        sigma_free: List[FreeWord] = []
        for d in order:
            for i, r in enumerate(rho):
                wit = free_reduce(
                    tau[d] + ((i, 1),) + tuple((s, -e) for s, e in reversed(tau[g.mul(d, r)]))
                )
                elem = self.element(wit)
                if elem == dbl.identity:
                    continue
                sigma_wits.append(wit)
                sigma_free.append(dbl.rewrite_in_kernel(elem))
        self.sigma_wits = sigma_wits
        self.graph = fold_subgroup_graph(sigma_free)
        self._memo: Dict[AmalgamWord, Optional[FreeWord]] = {}

    def element(self, witness: FreeWord) -> AmalgamWord:
        parts = [self.dbl.identity]
        for i, e in witness:
            w = self.gens[i]
            parts.append(w if e == 1 else self.dbl.inv(w))
        return self.dbl.mul(*parts)

    def member(self, g: AmalgamWord) -> Optional[FreeWord]:
        """Witness word over the H generators, or None when g is outside H."""
        if g in self._memo:
            return self._memo[g]
        wit = self._member(g)
        self._memo[g] = wit
        return wit

    def _member(self, g: AmalgamWord) -> Optional[FreeWord]:
        r = self.dbl.retraction(g)
        t = self.tau.get(r)
        if t is None:
            return None
        g1 = self.dbl.mul(g, self.dbl.inv(self.element(t)))
        expr = member_and_rewrite(self.graph, self.dbl.rewrite_in_kernel(g1))
        if expr is None:
            return None
        out: List[Tuple[int, int]] = []
        for s, e in expr:
            wit = self.sigma_wits[s]
            out.extend(wit if e == 1 else tuple((i, -d) for i, d in reversed(wit)))
        out.extend(t)
        return free_reduce(out)


def membership_H(
    dbl: Double, h_gens: Sequence[AmalgamWord], g: AmalgamWord
) -> Optional[FreeWord]:
    return SubgroupOracle(dbl, h_gens).member(g)


# -- the invariant subtree -------------------------------------------------------


@dataclass(frozen=True)
class SubtreeData:
    """Finite description of the H-invariant subtree U = H . core.

    `reach` records, for every vertex collected while building the core, which
    orbit representative absorbed it and an H-witness moving the rep there.
    `boundary` classifies the non-U edges around each core vertex; the
    entries indexed by `boundary_reps` are pairwise H-inequivalent.
    """

    base: Vertex
    core_vertices: Tuple[Vertex, ...]
    core_edges: Tuple[AmalgamWord, ...]
    reach: Tuple[Tuple[Vertex, int, FreeWord], ...]
    boundary: Tuple[Tuple[AmalgamWord, int], ...]
    boundary_reps: Tuple[int, ...]


def same_vertex_orbit(
    dbl: Double, oracle: SubgroupOracle, v: Vertex, q: Vertex
) -> Optional[FreeWord]:
    """Witness for some eta in H with eta.q = v; the candidates run over the
    finite vertex stabilizer, so |C| membership queries suffice."""
    if v[0] != q[0]:
        return None
    side = v[0]
    qi = dbl.inv(q[1])
    for c in dbl.group.elements():
        eta = dbl.mul(v[1], dbl.from_side(side, int(c)), qi)
        wit = oracle.member(eta)
        if wit is not None:
            return wit
    return None


def same_edge_orbit(
    dbl: Double, oracle: SubgroupOracle, z: AmalgamWord, z2: AmalgamWord
) -> Optional[FreeWord]:
    zi = dbl.inv(z)
    for b in dbl.amalgam.elems:
        eta = dbl.mul(z2, dbl.from_side(0, int(b)), zi)
        wit = oracle.member(eta)
        if wit is not None:
            return wit
    return None


def vertex_in_subtree(
    dbl: Double, oracle: SubgroupOracle, sub: SubtreeData, v: Vertex
) -> bool:
    return any(
        same_vertex_orbit(dbl, oracle, v, q) is not None for q in sub.core_vertices
    )


def edge_in_subtree(
    dbl: Double, oracle: SubgroupOracle, sub: SubtreeData, z: AmalgamWord
) -> bool:
    return any(
        same_edge_orbit(dbl, oracle, q, z) is not None for q in sub.core_edges
    )


def edge_between(dbl: Double, a: Vertex, b: Vertex) -> AmalgamWord:
    if a != dbl.root:
        p, z = dbl.parent(a)
        if p == b:
            return z
    if b != dbl.root:
        p, z = dbl.parent(b)
        if p == a:
            return z
    raise MalformedWord("vertices are not adjacent in the tree")


def invariant_subtree(
    dbl: Double,
    h_gens: Sequence[AmalgamWord],
    oracle: Optional[SubgroupOracle] = None,
) -> SubtreeData:
    """Core of the H-invariant subtree spanned by the base geodesics.

    U is the H-saturation of the geodesics from the base vertex to its
    generator translates; it is connected, H-invariant and H-cofinite, which
    is all the construction needs.
    """
    if oracle is None:
        oracle = SubgroupOracle(dbl, h_gens)
    u = dbl.root
    raw_vertices: List[Vertex] = [u]
    raw_edges: List[AmalgamWord] = []
    for h in h_gens:
        path = dbl.geodesic(u, dbl.act_vertex(dbl.ext(h), u))
        for v in path:
            if v not in raw_vertices:
                raw_vertices.append(v)
        for a, b in zip(path, path[1:]):
            z = edge_between(dbl, a, b)
            if z not in raw_edges:
                raw_edges.append(z)

    core_vertices: List[Vertex] = []
    reach: List[Tuple[Vertex, int, FreeWord]] = []
    for v in raw_vertices:
        placed = False
        for qi, q in enumerate(core_vertices):
            wit = same_vertex_orbit(dbl, oracle, v, q)
            if wit is not None:
                reach.append((v, qi, wit))
                placed = True
                break
        if not placed:
            core_vertices.append(v)
            reach.append((v, len(core_vertices) - 1, ()))

    core_edges: List[AmalgamWord] = []
    for z in raw_edges:
        if not any(
            same_edge_orbit(dbl, oracle, q, z) is not None for q in core_edges
        ):
            core_edges.append(z)

    boundary: List[Tuple[AmalgamWord, int]] = []
    for qi, q in enumerate(core_vertices):
        for z in dbl.incident_edges(q):
            if not any(
                same_edge_orbit(dbl, oracle, q2, z) is not None for q2 in core_edges
            ):
                boundary.append((z, qi))

    boundary_reps: List[int] = []
    for i, (z, _) in enumerate(boundary):
        if not any(
            same_edge_orbit(dbl, oracle, boundary[j][0], z) is not None
            for j in boundary_reps
        ):
            boundary_reps.append(i)

    return SubtreeData(
        u,
        tuple(core_vertices),
        tuple(core_edges),
        tuple(reach),
        tuple(boundary),
        tuple(boundary_reps),
    )


# -- reduction into U and membership in NH ---------------------------------------


def nh_reduce(
    dbl: Double,
    sub: SubtreeData,
    oracle: SubgroupOracle,
    g: ExtElement,
    step_cap: int = DEFAULT_COSET_CAP,
) -> Tuple[ExtElement, List[AmalgamWord]]:
    """Push g.base back into U by composing boundary-edge inversions.

    Each step crosses the boundary edge where the geodesic from the base
    leaves U, which strictly shrinks the distance to U.
    """
    log: List[AmalgamWord] = []
    while True:
        v = dbl.act_vertex(g, sub.base)
        path = dbl.geodesic(sub.base, v)
        k = 1
        while k < len(path) and vertex_in_subtree(dbl, oracle, sub, path[k]):
            k += 1
        if k >= len(path):
            return g, log
        e = edge_between(dbl, path[k - 1], path[k])
        g = dbl.ext_mul(dbl.edge_inversion(e), g)
        log.append(e)
        if len(log) > step_cap:
            raise BudgetExceeded("inversion reduction exceeded the step cap")


def nh_residue(
    dbl: Double, sub: SubtreeData, oracle: SubgroupOracle, g: ExtElement
) -> Optional[Tuple[AmalgamWord, FreeWord, List[AmalgamWord]]]:
    """H-part of g when g lies in NH: the reduced residue, an H witness for
    it, and the inversion log. None when g is outside NH."""
    r, log = nh_reduce(dbl, sub, oracle, g)
    if r.flip:
        return None
    wit = oracle.member(r.g)
    if wit is None:
        return None
    return r.g, wit, log


def membership_NH(
    dbl: Double,
    sub: SubtreeData,
    h_gens: Sequence[AmalgamWord],
    g: ExtElement,
    oracle: Optional[SubgroupOracle] = None,
) -> bool:
    if oracle is None:
        oracle = SubgroupOracle(dbl, h_gens)
    return nh_residue(dbl, sub, oracle, g) is not None


# -- the certificate --------------------------------------------------------------


@dataclass
class RetractionCert:
    """Virtual retraction of G onto H, with enough data to re-check it.

    `letters` is the generating alphabet (nontrivial elements of both sides,
    C first); `coset_reps`/`coset_table` enumerate the right cosets of
    K = NH n G; `schreier` lists the nontrivial Schreier generators of K with
    their H-residues and witnesses.
    """

    double: Double
    h_gens: Tuple[AmalgamWord, ...]
    subtree: SubtreeData
    letters: Tuple[Tuple[int, int], ...]
    coset_reps: Tuple[Word, ...]
    coset_table: Tuple[Tuple[int, ...], ...]
    schreier: Tuple[Tuple[int, int, AmalgamWord, FreeWord], ...]
    index: int
    k_orbits: int
    nh_bound: int
    nh_index: int

    def __post_init__(self):
        self._letter_index = {sx: i for i, sx in enumerate(self.letters)}
        self._images = {(i, li): (img, wit) for i, li, img, wit in self.schreier}

    def letter_elem(self, li: int) -> AmalgamWord:
        side, x = self.letters[li]
        return self.double.from_side(side, x)

    def eval_letters(self, word: Word) -> AmalgamWord:
        parts = [self.double.identity]
        for li, e in word:
            w = self.letter_elem(li)
            parts.append(w if e == 1 else self.double.inv(w))
        return self.double.mul(*parts)

    def _letter_path(self, w: AmalgamWord) -> List[int]:
        out = []
        for side, x in self.double.tokens_of(w):
            if x == self.double.group.identity:
                continue
            out.append(self._letter_index[(side, x)])
        return out

    def coset_of(self, w: AmalgamWord) -> int:
        i = 0
        for li in self._letter_path(w):
            i = self.coset_table[i][2 * li]
        return i

    def member(self, w: AmalgamWord) -> bool:
        return self.coset_of(w) == 0

    def _walk(self, w: AmalgamWord) -> Tuple[int, List[Tuple[int, int]]]:
        i = 0
        slots: List[Tuple[int, int]] = []
        for li in self._letter_path(w):
            slots.append((i, li))
            i = self.coset_table[i][2 * li]
        return i, slots

    def retract(self, w: AmalgamWord) -> AmalgamWord:
        """rho_H(w) for w in K, by Schreier rewriting over the coset table."""
        end, slots = self._walk(w)
        if end != 0:
            raise NotRetractive("word lies outside the retraction domain K")
        parts = [self.double.identity]
        for key in slots:
            hit = self._images.get(key)
            if hit is not None:
                parts.append(hit[0])
        return self.double.mul(*parts)

    def retract_witness(self, w: AmalgamWord) -> FreeWord:
        end, slots = self._walk(w)
        if end != 0:
            raise NotRetractive("word lies outside the retraction domain K")
        out: List[Tuple[int, int]] = []
        for key in slots:
            hit = self._images.get(key)
            if hit is not None:
                out.extend(hit[1])
        return free_reduce(out)

    def to_data(self) -> dict:
        dbl = self.double
        return {
            "kind": "retraction",
            "group": group_data(dbl.group),
            "amalgam": [int(b) for b in dbl.amalgam.elems],
            "h_gens": [amalgam_word_data(dbl, w) for w in self.h_gens],
            "subtree": {
                "base": _vertex_data(dbl, self.subtree.base),
                "core_vertices": [
                    _vertex_data(dbl, v) for v in self.subtree.core_vertices
                ],
                "core_edges": [amalgam_word_data(dbl, z) for z in self.subtree.core_edges],
                "reach": [
                    [_vertex_data(dbl, v), qi, _free_data(wit)]
                    for v, qi, wit in self.subtree.reach
                ],
                "boundary": [
                    [amalgam_word_data(dbl, z), qi] for z, qi in self.subtree.boundary
                ],
                "boundary_reps": list(self.subtree.boundary_reps),
            },
            "letters": [list(sx) for sx in self.letters],
            "coset_reps": [_free_data(w) for w in self.coset_reps],
            "coset_table": [list(row) for row in self.coset_table],
            "schreier": [
                [i, li, amalgam_word_data(dbl, img), _free_data(wit)]
                for i, li, img, wit in self.schreier
            ],
            "index": self.index,
            "k_orbits": self.k_orbits,
            "nh_bound": self.nh_bound,
            "nh_index": self.nh_index,
        }


def _vertex_data(dbl: Double, v: Vertex) -> list:
    return [int(v[0]), amalgam_word_data(dbl, v[1])]


def _vertex_from_data(dbl: Double, data: Sequence) -> Vertex:
    return (int(data[0]), amalgam_word_from_data(dbl, data[1]))


def _free_data(w: FreeWord) -> list:
    return [[int(s), int(e)] for s, e in w]


def _free_from_data(data: Sequence) -> FreeWord:
    return tuple((int(s), int(e)) for s, e in data)


def _subtree_from_data(dbl: Double, data: dict) -> SubtreeData:
    return SubtreeData(
        _vertex_from_data(dbl, data["base"]),
        tuple(_vertex_from_data(dbl, v) for v in data["core_vertices"]),
        tuple(amalgam_word_from_data(dbl, z) for z in data["core_edges"]),
        tuple(
            (_vertex_from_data(dbl, v), int(qi), _free_from_data(wit))
            for v, qi, wit in data["reach"]
        ),
        tuple(
            (amalgam_word_from_data(dbl, z), int(qi)) for z, qi in data["boundary"]
        ),
        tuple(int(i) for i in data["boundary_reps"]),
    )


def cert_from_data(data: dict) -> RetractionCert:
    group = group_from_data(data["group"])
    dbl = Double(group, closure(group, [int(b) for b in data["amalgam"]]))
    return RetractionCert(
        double=dbl,
        h_gens=tuple(amalgam_word_from_data(dbl, w) for w in data["h_gens"]),
        subtree=_subtree_from_data(dbl, data["subtree"]),
        letters=tuple((int(s), int(x)) for s, x in data["letters"]),
        coset_reps=tuple(_free_from_data(w) for w in data["coset_reps"]),
        coset_table=tuple(tuple(int(v) for v in row) for row in data["coset_table"]),
        schreier=tuple(
            (int(i), int(li), amalgam_word_from_data(dbl, img), _free_from_data(wit))
            for i, li, img, wit in data["schreier"]
        ),
        index=int(data["index"]),
        k_orbits=int(data["k_orbits"]),
        nh_bound=int(data["nh_bound"]),
        nh_index=int(data["nh_index"]),
    )


# -- construction ------------------------------------------------------------------


def _alphabet(dbl: Double) -> Tuple[Tuple[int, int], ...]:
    g = dbl.group
    return tuple(
        (side, x) for side in (0, 1) for x in g.elements() if x != g.identity
    )


def _enumerate_nh_cosets(
    dbl: Double,
    sub: SubtreeData,
    oracle: SubgroupOracle,
    letters: Sequence[Tuple[int, int]],
    cap: int,
) -> int:
    gens = [dbl.ext(dbl.from_side(s, x)) for s, x in letters] + [dbl.swap]
    reps: List[ExtElement] = [dbl.ext_identity]
    cursor = 0
    while cursor < len(reps):
        r = reps[cursor]
        cursor += 1
        for s in gens:
            cand = dbl.ext_mul(r, s)
            if any(
                nh_residue(dbl, sub, oracle, dbl.ext_mul(cand, dbl.ext_inv(v)))
                is not None
                for v in reps
            ):
                continue
            reps.append(cand)
            if len(reps) > cap:
                raise HypothesisViolated(
                    "NH coset count exceeds the orbit bound"
                )
    return len(reps)


def virtual_retraction(
    dbl: Double,
    h_gens: Sequence[AmalgamWord],
    *,
    coset_cap: int = DEFAULT_COSET_CAP,
) -> RetractionCert:
    """Build the finite-index K = NH n G together with rho_H: K -> H."""
    oracle = SubgroupOracle(dbl, h_gens)
    sub = invariant_subtree(dbl, h_gens, oracle)
    letters = _alphabet(dbl)
    elems = [dbl.from_side(s, x) for s, x in letters]

    def eval_word(word: Word) -> AmalgamWord:
        parts = [dbl.identity]
        for li, e in word:
            parts.append(elems[li] if e == 1 else dbl.inv(elems[li]))
        return dbl.mul(*parts)

    def is_member(word: Word) -> bool:
        return nh_residue(dbl, sub, oracle, dbl.ext(eval_word(word))) is not None

    reps, table = coset_bfs(is_member, len(letters), coset_cap=coset_cap)
    m = len(reps)

    schreier: List[Tuple[int, int, AmalgamWord, FreeWord]] = []
    for i in range(m):
        for li in range(len(letters)):
            j = table[i][2 * li]
            sigma = dbl.mul(
                eval_word(reps[i]), elems[li], dbl.inv(eval_word(reps[j]))
            )
            if sigma == dbl.identity:
                continue
            res = nh_residue(dbl, sub, oracle, dbl.ext(sigma))
            if res is None:
                raise HypothesisViolated("Schreier generator fell outside NH")
            schreier.append((i, li, res[0], res[1]))

    k = len(sub.core_vertices)
    bound = k * dbl.group.order
    nh_index = _enumerate_nh_cosets(dbl, sub, oracle, letters, bound)

    cert = RetractionCert(
        double=dbl,
        h_gens=tuple(h_gens),
        subtree=sub,
        letters=letters,
        coset_reps=tuple(tuple(w) for w in reps),
        coset_table=tuple(tuple(row) for row in table),
        schreier=tuple(schreier),
        index=m,
        k_orbits=k,
        nh_bound=bound,
        nh_index=nh_index,
    )
    for h in h_gens:
        if cert.retract(h) != h:
            raise HypothesisViolated("retraction failed to fix an H generator")
    return cert


# -- independent verification -------------------------------------------------------


def verify_certificate(data) -> Tuple[bool, List[str]]:
    """Re-check a serialized certificate using only its own fields.

    Rebuilds the double, the H oracle and the NH membership test from the
    serialized data, then audits the coset table, the Schreier images, the
    fixed generators, the subtree classification and the index bound.
    Returns (ok, diagnoses).
    """
    bad: List[str] = []
    if isinstance(data, RetractionCert):
        data = data.to_data()
    if data.get("kind") == "lr_composite":
        return verify_lr_certificate(data)
    try:
        cert = cert_from_data(data)
    except Exception as exc:  # noqa: BLE001 - diagnosis, not control flow
        return False, [f"certificate does not deserialize: {exc}"]
    dbl = cert.double
    oracle = SubgroupOracle(dbl, cert.h_gens)
    sub = cert.subtree
    m = cert.index
    letters = cert.letters

    def residue(g: ExtElement):
        return nh_residue(dbl, sub, oracle, g)

    # structure of the table
    if letters != _alphabet(dbl):
        bad.append("letter alphabet is not the canonical one")
    if m != len(cert.coset_reps) or m != len(cert.coset_table):
        bad.append("stated index disagrees with the table size")
    if cert.coset_reps and cert.coset_reps[0] != ():
        bad.append("coset 0 is not represented by the identity")
    for i, row in enumerate(cert.coset_table):
        if len(row) != 2 * len(letters) or any(not 0 <= v < m for v in row):
            bad.append(f"coset table row {i} malformed")
    if bad:
        return False, bad

    rep_elems = [cert.eval_letters(w) for w in cert.coset_reps]
    letter_elems = [cert.letter_elem(k) for k in range(len(letters))]

    # closure: every table entry is certified by the NH membership test
    for i in range(m):
        for li, elem in enumerate(letter_elems):
            for col, step in ((2 * li, elem), (2 * li + 1, dbl.inv(elem))):
                j = cert.coset_table[i][col]
                moved = dbl.mul(rep_elems[i], step, dbl.inv(rep_elems[j]))
                if residue(dbl.ext(moved)) is None:
                    bad.append(f"coset table entry ({i},{col}) not certified")

    # distinctness: no two representatives share a coset
    for i in range(m):
        for j in range(i + 1, m):
            if residue(dbl.ext(dbl.mul(rep_elems[i], dbl.inv(rep_elems[j])))) is not None:
                bad.append(f"cosets {i} and {j} collide")

    # Schreier images: recompute residues and re-certify membership in H
    seen = set()
    for i, li, img, wit in cert.schreier:
        seen.add((i, li))
        j = cert.coset_table[i][2 * li]
        sigma = dbl.mul(rep_elems[i], cert.letter_elem(li), dbl.inv(rep_elems[j]))
        res = residue(dbl.ext(sigma))
        if res is None or res[0] != img:
            bad.append(f"schreier image at ({i},{li}) is wrong")
            continue
        if oracle.member(img) is None:
            bad.append(f"schreier image at ({i},{li}) is outside H")
        if oracle.element(wit) != img:
            bad.append(f"schreier witness at ({i},{li}) evaluates wrongly")
    for i in range(m):
        for li in range(len(letters)):
            if (i, li) in seen:
                continue
            j = cert.coset_table[i][2 * li]
            sigma = dbl.mul(rep_elems[i], cert.letter_elem(li), dbl.inv(rep_elems[j]))
            if sigma != dbl.identity:
                bad.append(f"missing schreier entry at ({i},{li})")

    # the retraction fixes H pointwise
    for gi, h in enumerate(cert.h_gens):
        try:
            if cert.retract(h) != h:
                bad.append(f"H generator {gi} is not fixed")
        except NotRetractive:
            bad.append(f"H generator {gi} falls outside K")

    # subtree data: base placement, invariance, boundary classification
    if sub.base != dbl.root:
        bad.append("subtree base is not the root vertex")
    if not sub.core_vertices or sub.core_vertices[0] != sub.base:
        bad.append("base vertex is missing from the core")
    for gi, h in enumerate(cert.h_gens):
        for q in sub.core_vertices:
            if not vertex_in_subtree(dbl, oracle, sub, dbl.act_vertex(dbl.ext(h), q)):
                bad.append(f"generator {gi} moves a core vertex outside U")
    for v, qi, wit in sub.reach:
        if not 0 <= qi < len(sub.core_vertices):
            bad.append("reach label points at a missing representative")
            continue
        eta = dbl.ext(oracle.element(wit))
        target = dbl.act_vertex(eta, sub.core_vertices[qi])
        if same_vertex_orbit(dbl, oracle, v, target) is None:
            bad.append("reach label does not move its representative correctly")
    for bi, (z, qi) in enumerate(sub.boundary):
        if edge_in_subtree(dbl, oracle, sub, z):
            bad.append(f"boundary edge {bi} lies inside U")
            continue
        near, far = dbl.edge_endpoints(z)
        if sub.core_vertices[qi][0] == 1:
            near, far = far, near
        if same_vertex_orbit(dbl, oracle, near, sub.core_vertices[qi]) is None:
            bad.append(f"boundary edge {bi} is not anchored at its core vertex")
        if vertex_in_subtree(dbl, oracle, sub, far):
            bad.append(f"boundary edge {bi} has both endpoints in U")
        if not any(
            same_edge_orbit(dbl, oracle, sub.boundary[j][0], z) is not None
            for j in sub.boundary_reps
        ):
            bad.append(f"boundary edge {bi} matches no orbit representative")
    listed = {(z, qi) for z, qi in sub.boundary}
    for qi, q in enumerate(sub.core_vertices):
        for z in dbl.incident_edges(q):
            if (z, qi) in listed or edge_in_subtree(dbl, oracle, sub, z):
                continue
            bad.append(f"core vertex {qi} has an unclassified incident edge")

    # index bound of the extended group
    if cert.k_orbits != len(sub.core_vertices):
        bad.append("orbit count disagrees with the core")
    if cert.nh_bound != cert.k_orbits * dbl.group.order:
        bad.append("stated NH bound is not k times |C|")
    try:
        recount = _enumerate_nh_cosets(dbl, sub, oracle, letters, cert.nh_bound)
        if recount != cert.nh_index:
            bad.append("NH coset recount disagrees with the certificate")
    except HypothesisViolated:
        bad.append("NH coset enumeration exceeds the stated bound")

    return not bad, bad


# -- property (LR) for virtually free inputs ------------------------------------


@dataclass
class LrCert:
    """Composite certificate: virtually free input, finite-index domain and a
    retraction onto <h_gens>, factored through a double of a finite group.

    `letters_kept` lists the stable letters spanned by the H images; every
    other stable letter retracts to 1 before the double stage.
    """

    gog: object
    h_gens: Tuple[object, ...]
    prime: int
    letters_kept: Tuple[str, ...]
    inner: RetractionCert
    final_reps: Tuple[object, ...]
    final_index: int
    _chain: object = None

    def member(self, w) -> bool:
        return self.inner.member(self._chain(w))

    def retract(self, w):
        wit = self.inner.retract_witness(self._chain(w))
        gog = self.gog
        parts = [gog.identity]
        for i, e in wit:
            h = self.h_gens[i]
            parts.append(h if e == 1 else gog.inv(h))
        return gog.mul(*parts)

    def to_data(self) -> dict:
        gog = self.gog
        return {
            "kind": "lr_composite",
            "prime": self.prime,
            "graph_of_groups": gog_data(gog),
            "h_gens": [gog_word_data(gog, w) for w in self.h_gens],
            "letters_kept": list(self.letters_kept),
            "inner": self.inner.to_data(),
            "final_reps": [gog_word_data(gog, w) for w in self.final_reps],
            "final_index": self.final_index,
        }


def _build_lr_chain(gog, h_gens, p, coset_cap, order_cap, depth_cap, exponent_cap):
    """Stages shared by construction and verification: cone, stable-letter
    support retraction, separating quotient, single letter, double."""
    cone = embed_cone(gog, order_cap=order_cap)
    special = to_special_hnn(cone)

    def into_hnn(w):
        return special.map_word(cone.map_word(w))

    h_hnn = [into_hnn(w) for w in h_gens]
    kept = sorted(
        {tok[1] for w in h_hnn for tok in special.hnn.tokens_of(w) if tok[0] == "t"}
    )
    by_name = dict(zip(special.hnn.names, special.hnn.subgroups))
    sub_hnn = MultiHnn(special.hnn.base, [(n, by_name[n]) for n in kept])
    kept_set = set(kept)

    def support_retraction(w):
        toks = [
            t
            for t in special.hnn.tokens_of(w)
            if t[0] == "a" or t[1] in kept_set
        ]
        return sub_hnn.reduce(toks)

    sep = p_separating_quotient(
        sub_hnn,
        special_s_set(sub_hnn),
        p,
        coset_cap=coset_cap,
        order_cap=order_cap,
        depth_cap=depth_cap,
    )
    single = embed_single_hnn(sub_hnn, sep, exponent_cap)
    dbl_stage = embed_double(single.hnn, p, exponent_cap)

    def chain(w):
        return dbl_stage.map_word(single.map_word(support_retraction(into_hnn(w))))

    return kept, dbl_stage.double, chain


def lr_for_vfree(
    gog,
    h_gens: Sequence,
    p: int = 2,
    *,
    coset_cap: int = DEFAULT_COSET_CAP,
    order_cap: int = DEFAULT_ORDER_CAP,
    depth_cap: int = 6,
    exponent_cap: int = 64,
) -> LrCert:
    """Finite-index subgroup of the graph-of-groups group retracting onto
    <h_gens>, obtained by factoring through a double of a finite group."""
    h_gens = tuple(h_gens)
    kept, dbl, chain = _build_lr_chain(
        gog, h_gens, p, coset_cap, order_cap, depth_cap, exponent_cap
    )
    inner = virtual_retraction(dbl, [chain(w) for w in h_gens], coset_cap=coset_cap)

    def member(w) -> bool:
        return inner.member(chain(w))

    reps = [gog.identity]
    gens = []
    for letter in gog.generator_letters():
        g = gog.reduce([letter])
        gens.extend([g, gog.inv(g)])
    cursor = 0
    while cursor < len(reps):
        r = reps[cursor]
        cursor += 1
        for s in gens:
            cand = gog.mul(r, s)
            if any(member(gog.mul(cand, gog.inv(v))) for v in reps):
                continue
            reps.append(cand)
            if len(reps) > inner.index:
                raise HypothesisViolated(
                    "domain index exceeds the double-stage index"
                )

    cert = LrCert(
        gog=gog,
        h_gens=h_gens,
        prime=p,
        letters_kept=tuple(kept),
        inner=inner,
        final_reps=tuple(reps),
        final_index=len(reps),
        _chain=chain,
    )
    for h in h_gens:
        if cert.retract(h) != h:
            raise HypothesisViolated("composite retraction failed to fix H")
    return cert


def verify_lr_certificate(data: dict) -> Tuple[bool, List[str]]:
    """Re-run the deterministic stage chain from the serialized input and
    audit the composite against the inner certificate."""
    bad: List[str] = []
    try:
        gog = gog_from_data(data["graph_of_groups"])
        h_gens = [gog_word_from_data(gog, w) for w in data["h_gens"]]
        p = int(data["prime"])
        kept, dbl, chain = _build_lr_chain(
            gog, h_gens, p, DEFAULT_COSET_CAP, DEFAULT_ORDER_CAP, 6, 64
        )
    except Exception as exc:  # noqa: BLE001
        return False, [f"stage chain does not rebuild: {exc}"]
    if list(kept) != list(data["letters_kept"]):
        bad.append("kept stable letters disagree with the rebuilt chain")

    ok, inner_bad = verify_certificate(data["inner"])
    bad.extend(f"inner: {msg}" for msg in inner_bad)
    try:
        inner = cert_from_data(data["inner"])
    except Exception as exc:  # noqa: BLE001
        return False, bad + [f"inner certificate does not deserialize: {exc}"]
    if group_data(inner.double.group) != group_data(dbl.group):
        # the remaining audits evaluate chain images against the inner
        # alphabet, which is meaningless across different groups
        bad.append("inner double disagrees with the rebuilt chain")
        return False, bad

    for gi, h in enumerate(h_gens):
        img = chain(h)
        if not inner.member(img):
            bad.append(f"H generator {gi} image falls outside K")
            continue
        wit = inner.retract_witness(img)
        parts = [gog.identity]
        for i, e in wit:
            parts.append(h_gens[i] if e == 1 else gog.inv(h_gens[i]))
        if gog.mul(*parts) != h:
            bad.append(f"H generator {gi} is not fixed by the composite")

    try:
        reps = [gog_word_from_data(gog, w) for w in data["final_reps"]]
    except Exception as exc:  # noqa: BLE001
        return False, bad + [f"final representatives malformed: {exc}"]
    if len(reps) != int(data["final_index"]):
        bad.append("final index disagrees with the representative list")
    if not reps or reps[0] != gog.identity:
        bad.append("final coset 0 is not the identity")

    def member(w) -> bool:
        return inner.member(chain(w))

    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            if member(gog.mul(reps[i], gog.inv(reps[j]))):
                bad.append(f"final cosets {i} and {j} collide")
    gens = []
    for letter in gog.generator_letters():
        g = gog.reduce([letter])
        gens.extend([g, gog.inv(g)])
    for i, r in enumerate(reps):
        for s in gens:
            cand = gog.mul(r, s)
            if not any(member(gog.mul(cand, gog.inv(v))) for v in reps):
                bad.append(f"final coset {i} is not closed under the generators")
                break

    return not bad, bad
