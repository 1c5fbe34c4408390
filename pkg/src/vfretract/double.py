"""Doubles of a finite group along a subgroup, C *_B C'.

The two copies of C are glued along B. A word is kept as alternating
nontrivial left-coset representatives followed by a tail in B; this form is
unique, so equality of group elements is equality of forms. Side 0 is the
left copy, side 1 the mirrored copy; the mirror swap extends the double by
an order-two element, realized here as ExtElement with a flip bit.

The same class exposes the Bass-Serre tree of the splitting: vertices are
cosets gC and gC', edges are cosets gB, and the swap acts by exchanging
sides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MalformedWord, NotInKernel
from .free import FreeWord, free_reduce
from .perm import FiniteGroup, Subgroup, coset_decomposition

SideToken = tuple[int, int]  # (side 0/1, element of C)


@dataclass(frozen=True)
class AmalgamWord:
    """Alternating coset-rep syllables (side, rep) with a tail in B."""

    syls: tuple[tuple[int, int], ...]
    tail: int

    def length(self) -> int:
        return len(self.syls)


@dataclass(frozen=True)
class ExtElement:
    """Element g or g*swap of the extension of the double by the swap."""

    g: AmalgamWord
    flip: int


Vertex = tuple[int, AmalgamWord]  # (side, minimal coset representative)


class Double:
    def __init__(self, group: FiniteGroup, amalgam: Subgroup):
        if amalgam.parent is not group:
            raise ValueError("amalgamated subgroup must live in the given group")
        self.group = group
        self.amalgam = amalgam
        self.reps, self.rep_of, self.tail_of = coset_decomposition(group, amalgam)
        self.identity = AmalgamWord((), group.identity)
        self.ext_identity = ExtElement(self.identity, 0)
        self.swap = ExtElement(self.identity, 1)
        self.root: Vertex = (0, self.identity)

    # -- normal form ---------------------------------------------------------

    def normal_form(self, tokens: Iterable[SideToken]) -> AmalgamWord:
        g = self.group
        syls: list[tuple[int, int]] = []
        tail = g.identity
        for side, x in tokens:
            if side not in (0, 1):
                raise MalformedWord("side must be 0 or 1")
            y = g.mul(tail, x)
            if syls and syls[-1][0] == side:
                y = g.mul(syls.pop()[1], y)
            d = int(self.rep_of[y])
            b = int(self.tail_of[y])
            if d != g.identity:
                syls.append((side, d))
            tail = b
        return AmalgamWord(tuple(syls), tail)

    def tokens_of(self, w: AmalgamWord) -> list[SideToken]:
        out = list(w.syls)
        if w.tail != self.group.identity or not out:
            out.append((0, w.tail))
        return out

    def from_side(self, side: int, x: int) -> AmalgamWord:
        return self.normal_form([(side, x)])

    def mul(self, *ws: AmalgamWord) -> AmalgamWord:
        toks: list[SideToken] = []
        for w in ws:
            toks.extend(self.tokens_of(w))
        return self.normal_form(toks)

    def inv(self, w: AmalgamWord) -> AmalgamWord:
        toks = [(s, self.group.inverse(x)) for s, x in reversed(self.tokens_of(w))]
        return self.normal_form(toks)

    def pow(self, w: AmalgamWord, n: int) -> AmalgamWord:
        if n < 0:
            return self.pow(self.inv(w), -n)
        acc = self.identity
        for _ in range(n):
            acc = self.mul(acc, w)
        return acc

    def gamma(self, w: AmalgamWord) -> AmalgamWord:
        """The side swap; it fixes the amalgam pointwise."""
        return AmalgamWord(tuple((1 - s, x) for s, x in w.syls), w.tail)

    def retraction(self, w: AmalgamWord) -> int:
        """Fold both copies back onto C."""
        acc = self.group.identity
        for _, x in w.syls:
            acc = self.group.mul(acc, x)
        return self.group.mul(acc, w.tail)

    def in_amalgam(self, x: int) -> bool:
        return int(self.rep_of[x]) == self.group.identity

    # -- extension by the swap -----------------------------------------------

    def ext(self, w: AmalgamWord, flip: int = 0) -> ExtElement:
        return ExtElement(w, flip & 1)

    def ext_mul(self, *xs: ExtElement) -> ExtElement:
        acc = self.ext_identity
        for x in xs:
            g2 = self.gamma(x.g) if acc.flip else x.g
            acc = ExtElement(self.mul(acc.g, g2), acc.flip ^ x.flip)
        return acc

    def ext_inv(self, x: ExtElement) -> ExtElement:
        gi = self.inv(x.g)
        return ExtElement(self.gamma(gi) if x.flip else gi, x.flip)

    def ext_conj(self, a: ExtElement, b: ExtElement) -> ExtElement:
        """a * b * a^-1."""
        return self.ext_mul(a, b, self.ext_inv(a))

    # -- Bass-Serre tree ------------------------------------------------------

    def vertex_of(self, g: AmalgamWord, side: int) -> Vertex:
        syls = g.syls
        if syls and syls[-1][0] == side:
            syls = syls[:-1]
        return (side, AmalgamWord(syls, self.group.identity))

    def edge_of(self, g: AmalgamWord) -> AmalgamWord:
        return AmalgamWord(g.syls, self.group.identity)

    def edge_endpoints(self, z: AmalgamWord) -> tuple[Vertex, Vertex]:
        return self.vertex_of(z, 0), self.vertex_of(z, 1)

    def parent(self, v: Vertex) -> tuple[Vertex, AmalgamWord]:
        """Parent vertex and connecting edge, stepping toward the root."""
        side, r = v
        if not r.syls:
            if side == 0:
                raise ValueError("root has no parent")
            return self.root, self.identity
        z = r
        other = self.vertex_of(z, 1 - side)
        return other, z

    def path_to_root(self, v: Vertex) -> list[Vertex]:
        out = [v]
        while v != self.root:
            v, _ = self.parent(v)
            out.append(v)
        return out

    def geodesic(self, u: Vertex, v: Vertex) -> list[Vertex]:
        pu = self.path_to_root(u)
        pv = self.path_to_root(v)
        iu, iv = len(pu) - 1, len(pv) - 1
        while iu > 0 and iv > 0 and pu[iu - 1] == pv[iv - 1]:
            iu -= 1
            iv -= 1
        return pu[: iu + 1] + list(reversed(pv[:iv]))

    def act_vertex(self, x: ExtElement, v: Vertex) -> Vertex:
        side, r = v
        moved = self.mul(x.g, self.gamma(r) if x.flip else r)
        return self.vertex_of(moved, side ^ x.flip)

    def act_edge(self, x: ExtElement, z: AmalgamWord) -> AmalgamWord:
        moved = self.mul(x.g, self.gamma(z) if x.flip else z)
        return self.edge_of(moved)

    def incident_edges(self, v: Vertex) -> list[AmalgamWord]:
        side, r = v
        return [
            self.edge_of(self.mul(r, self.from_side(side, int(d))))
            for d in self.reps
        ]

    def edge_inversion(self, z: AmalgamWord) -> ExtElement:
        """The involution swapping the two endpoints of the edge zB."""
        return ExtElement(self.mul(z, self.gamma(self.inv(z))), 1)

    # -- free kernel of the retraction ---------------------------------------

    def kernel_symbols(self) -> list[int]:
        return [int(d) for d in self.reps if int(d) != self.group.identity]

    def kernel_gen(self, d: int) -> AmalgamWord:
        return self.normal_form([(0, d), (1, self.group.inverse(d))])

    def rewrite_in_kernel(self, w: AmalgamWord) -> FreeWord:
        """Word over kernel_symbols() equal to w, when w retracts to 1."""
        g = self.group
        out: list[tuple[int, int]] = []
        a = g.identity
        for side, x in self.tokens_of(w):
            if side == 1:
                d1 = int(self.rep_of[a])
                d2 = int(self.rep_of[g.mul(a, x)])
                if d1 != g.identity:
                    out.append((d1, 1))
                if d2 != g.identity:
                    out.append((d2, -1))
            a = g.mul(a, x)
        if a != g.identity:
            raise NotInKernel("word does not retract to the identity")
        return free_reduce(out)

    def expand_kernel_word(self, word: FreeWord) -> AmalgamWord:
        toks: list[SideToken] = []
        for d, e in word:
            if e == 1:
                toks.extend([(0, d), (1, self.group.inverse(d))])
            else:
                toks.extend([(1, d), (0, self.group.inverse(d))])
        return self.normal_form(toks)
