"""Finite graphs of finite groups and their fundamental groups.

A graph of groups here is an undirected multigraph with a finite group on
every vertex and edge and injective maps of each edge group into its two
endpoint groups. Elements of the fundamental group (relative to a spanning
tree) are represented as based loops in canonical form: alternating
coset-representative syllables along oriented edges, with a tail in the
base vertex group. Two elements are equal iff their forms are equal.

sym_quotient builds a finite quotient in which all vertex groups embed
compatibly: every vertex group acts freely on a common finite set, tree
edges act identically on both sides, and each non-tree edge contributes a
permutation conjugating one edge-group action to the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import CapExceeded, HypothesisViolated, MalformedWord
from .perm import (
    DEFAULT_ORDER_CAP,
    FiniteGroup,
    FiniteHom,
    Perm,
    Subgroup,
    closure,
    closure_with_words,
    coset_decomposition,
    intertwine_free_actions,
    right_transversal,
)

Letter = tuple  # ("v", vertex, elem) or ("t", edge, +1/-1)


@dataclass(frozen=True)
class GogEdge:
    name: str
    u: str
    v: str
    group: FiniteGroup
    into_u: FiniteHom
    into_v: FiniteHom


@dataclass(frozen=True)
class GogWord:
    """Syllables (coset rep in the current vertex group, edge, direction)
    tracing a based loop, then a tail in the base vertex group."""

    syls: tuple[tuple[int, str, int], ...]
    tail: int

    def length(self) -> int:
        return len(self.syls)


class _Oriented:
    """One direction of an edge: source/target vertex, the mono pair, the
    left-coset data of the source-side image, and the pull-through map."""

    def __init__(self, edge: GogEdge, direction: int):
        self.edge = edge
        self.direction = direction
        if direction == 1:
            self.src, self.tgt = edge.u, edge.v
            self.a, self.b = edge.into_u, edge.into_v
        else:
            self.src, self.tgt = edge.v, edge.u
            self.a, self.b = edge.into_v, edge.into_u
        src_group = self.a.target
        image = closure(src_group, list(self.a.image))
        self.reps, self.rep_of, self.tail_of = coset_decomposition(src_group, image)
        self.pull = {self.a(c): self.b(c) for c in range(edge.group.order)}


class GraphOfGroups:
    def __init__(
        self,
        vertex_groups: Mapping[str, FiniteGroup],
        edges: Sequence[GogEdge],
        spanning_tree: Optional[Iterable[str]] = None,
    ):
        if not vertex_groups:
            raise MalformedWord("a graph of groups needs at least one vertex")
        self.vertex_names = tuple(sorted(vertex_groups))
        self.groups = dict(vertex_groups)
        names = [e.name for e in edges]
        if len(set(names)) != len(names):
            raise MalformedWord("edge names must be distinct")
        self.edges = {e.name: e for e in edges}
        self.edge_names = tuple(sorted(self.edges))
        for e in edges:
            if e.u not in self.groups or e.v not in self.groups:
                raise MalformedWord(f"edge {e.name!r} touches an unknown vertex")
            for mono, end in ((e.into_u, e.u), (e.into_v, e.v)):
                if mono.source is not e.group or mono.target is not self.groups[end]:
                    raise MalformedWord(f"edge map of {e.name!r} has wrong endpoints")
                if not mono.is_injective():
                    raise HypothesisViolated(f"edge map of {e.name!r} is not injective")
        self._check_connected()
        self.base = self.vertex_names[0]
        self.tree = self._resolve_tree(spanning_tree)
        self.tree_path = self._tree_paths()
        self._oriented = {
            (name, d): _Oriented(self.edges[name], d)
            for name in self.edge_names
            for d in (1, -1)
        }
        self.identity = GogWord((), self.groups[self.base].identity)

    def _check_connected(self) -> None:
        seen = {self.vertex_names[0]}
        frontier = [self.vertex_names[0]]
        while frontier:
            v = frontier.pop()
            for e in self.edges.values():
                for a, b in ((e.u, e.v), (e.v, e.u)):
                    if a == v and b not in seen:
                        seen.add(b)
                        frontier.append(b)
        if len(seen) != len(self.vertex_names):
            raise MalformedWord("the underlying graph is not connected")

    def _resolve_tree(self, spanning_tree: Optional[Iterable[str]]) -> frozenset[str]:
        if spanning_tree is None:
            tree: set[str] = set()
            seen = {self.base}
            grew = True
            while grew:
                grew = False
                for name in self.edge_names:
                    e = self.edges[name]
                    if (e.u in seen) != (e.v in seen):
                        tree.add(name)
                        seen.update((e.u, e.v))
                        grew = True
            return frozenset(tree)
        tree = frozenset(spanning_tree)
        unknown = tree - set(self.edge_names)
        if unknown:
            raise MalformedWord(f"spanning tree names unknown edges: {sorted(unknown)}")
        if len(tree) != len(self.vertex_names) - 1:
            raise MalformedWord("spanning tree must have |V| - 1 edges")
        seen = {self.base}
        grew = True
        while grew:
            grew = False
            for name in sorted(tree):
                e = self.edges[name]
                if (e.u in seen) != (e.v in seen):
                    seen.update((e.u, e.v))
                    grew = True
        if len(seen) != len(self.vertex_names):
            raise MalformedWord("spanning tree does not span the graph")
        return tree

    def _tree_paths(self) -> dict[str, tuple[tuple[str, int], ...]]:
        paths: dict[str, tuple[tuple[str, int], ...]] = {self.base: ()}
        frontier = [self.base]
        while frontier:
            nxt: list[str] = []
            for v in sorted(frontier):
                for name in sorted(self.tree):
                    e = self.edges[name]
                    for a, b, d in ((e.u, e.v, 1), (e.v, e.u, -1)):
                        if a == v and b not in paths:
                            paths[b] = paths[v] + ((name, d),)
                            nxt.append(b)
            frontier = nxt
        return paths

    # -- canonical forms ------------------------------------------------------

    def _expand(self, letters: Iterable[Letter]) -> list[tuple]:
        toks: list[tuple] = []

        def qpath(v: str, invert: bool = False) -> list[tuple]:
            steps = self.tree_path[v]
            if invert:
                return [("f", e, -d) for e, d in reversed(steps)]
            return [("f", e, d) for e, d in steps]

        for L in letters:
            if L[0] == "v":
                _, v, x = L
                if v not in self.groups:
                    raise MalformedWord(f"unknown vertex {v!r}")
                toks += qpath(v) + [("g", v, x)] + qpath(v, invert=True)
            elif L[0] == "t":
                _, name, d = L
                if name not in self.edges:
                    raise MalformedWord(f"unknown edge {name!r}")
                if d not in (1, -1):
                    raise MalformedWord("edge letter direction must be +1 or -1")
                f = self._oriented[(name, d)]
                toks += qpath(f.src) + [("f", name, d)] + qpath(f.tgt, invert=True)
            else:
                raise MalformedWord(f"unknown letter kind {L[0]!r}")
        return toks

    def _scan(self, toks: Sequence[tuple]) -> GogWord:
        cur = self.base
        y = self.groups[cur].identity
        syls: list[tuple[int, str, int]] = []
        for tok in toks:
            if tok[0] == "g":
                _, v, x = tok
                if v != cur:
                    raise MalformedWord("letter sits at the wrong vertex")
                grp = self.groups[cur]
                if not 0 <= x < grp.order:
                    raise MalformedWord("vertex element out of range")
                y = grp.mul(y, x)
            else:
                _, name, d = tok
                f = self._oriented[(name, d)]
                if f.src != cur:
                    raise MalformedWord("edge letter does not start at the current vertex")
                grp = self.groups[cur]
                rep = int(f.rep_of[y])
                bc = f.pull[grp.mul(grp.inverse(rep), y)]
                if (
                    syls
                    and rep == grp.identity
                    and syls[-1][1] == name
                    and syls[-1][2] == -d
                ):
                    prev = syls.pop()[0]
                    y = self.groups[f.tgt].mul(prev, bc)
                else:
                    syls.append((rep, name, d))
                    y = bc
                cur = f.tgt
        if cur != self.base:
            raise MalformedWord("word does not describe a based loop")
        return GogWord(tuple(syls), y)

    def reduce(self, letters: Iterable[Letter]) -> GogWord:
        return self._scan(self._expand(letters))

    def groupoid_tokens(self, w: GogWord) -> list[tuple]:
        toks: list[tuple] = []
        cur = self.base
        for rep, name, d in w.syls:
            toks.append(("g", cur, rep))
            toks.append(("f", name, d))
            cur = self._oriented[(name, d)].tgt
        toks.append(("g", self.base, w.tail))
        return toks

    def syllable_path(self, w: GogWord) -> list[str]:
        """Vertices visited by the loop, starting and ending at the base."""
        out = [self.base]
        for _, name, d in w.syls:
            out.append(self._oriented[(name, d)].tgt)
        return out

    def mul(self, *ws: GogWord) -> GogWord:
        toks: list[tuple] = []
        for w in ws:
            toks.extend(self.groupoid_tokens(w))
        return self._scan(toks)

    def inv(self, w: GogWord) -> GogWord:
        toks = []
        for tok in reversed(self.groupoid_tokens(w)):
            if tok[0] == "g":
                toks.append(("g", tok[1], self.groups[tok[1]].inverse(tok[2])))
            else:
                toks.append(("f", tok[1], -tok[2]))
        return self._scan(toks)

    def pow(self, w: GogWord, n: int) -> GogWord:
        if n < 0:
            return self.pow(self.inv(w), -n)
        acc = self.identity
        for _ in range(n):
            acc = self.mul(acc, w)
        return acc

    def vertex_elem(self, v: str, x: int) -> GogWord:
        return self.reduce([("v", v, x)])

    def edge_letter(self, name: str, d: int = 1) -> GogWord:
        return self.reduce([("t", name, d)])

    def generator_letters(self) -> list[Letter]:
        """Vertex elements and non-tree edge letters; a generating set."""
        out: list[Letter] = []
        for v in self.vertex_names:
            for x in self.groups[v].elements():
                if x != self.groups[v].identity:
                    out.append(("v", v, x))
        for name in self.edge_names:
            if name not in self.tree:
                out.append(("t", name, 1))
        return out


# -- compatible finite quotient ------------------------------------------------


@dataclass(frozen=True)
class SymQuotient:
    """Finite permutation group receiving every vertex group.

    embeddings[v] identifies the vertex group with a freely acting subgroup;
    edge_elems[e] conjugates the target-side edge image onto the source-side
    one (the identity on tree edges).
    """

    group: FiniteGroup
    embeddings: dict[str, FiniteHom]
    edge_elems: dict[str, int]
    degree: int
    actions: dict[str, list[Perm]]


def _regular_blocks(group: FiniteGroup, degree: int) -> list[Perm]:
    n = group.order
    blocks = degree // n
    acts = []
    for g in range(n):
        perm = [0] * degree
        for blk in range(blocks):
            off = blk * n
            for x in range(n):
                perm[off + x] = off + group.mul(g, x)
        acts.append(tuple(perm))
    return acts


def sym_quotient(gog: GraphOfGroups, order_cap: int = DEFAULT_ORDER_CAP) -> SymQuotient:
    degree = math.lcm(*(g.order for g in gog.groups.values()))
    acts: dict[str, list[Perm]] = {gog.base: _regular_blocks(gog.groups[gog.base], degree)}

    # grow vertex actions along the spanning tree
    pending = {name for name in gog.tree}
    while pending:
        progressed = False
        for name in sorted(pending):
            e = gog.edges[name]
            for parent, child, pm, cm in (
                (e.u, e.v, e.into_u, e.into_v),
                (e.v, e.u, e.into_v, e.into_u),
            ):
                if parent in acts and child not in acts:
                    acts[child] = _extend_action(acts[parent], e.group, pm, cm, degree)
                    pending.discard(name)
                    progressed = True
                    break
            else:
                if e.u in acts and e.v in acts:
                    pending.discard(name)
                    progressed = True
        if not progressed:  # pragma: no cover - tree already validated
            raise MalformedWord("spanning tree does not reach every vertex")

    # non-tree edges: conjugators between the two edge-group actions
    conj: dict[str, Perm] = {}
    for name in gog.edge_names:
        if name in gog.tree:
            continue
        e = gog.edges[name]
        tgt_act = [acts[e.v][e.into_v(c)] for c in range(e.group.order)]
        src_act = [acts[e.u][e.into_u(c)] for c in range(e.group.order)]
        conj[name] = intertwine_free_actions(e.group, degree, tgt_act, src_act)

    gens: list[Perm] = []
    for v in gog.vertex_names:
        gens.extend(acts[v])
    gens.extend(conj.values())
    group, _ = closure_with_words(gens, degree, name="Q", order_cap=order_cap)
    lookup = {p: i for i, p in enumerate(group.perms)}

    embeddings = {
        v: FiniteHom(gog.groups[v], group, tuple(lookup[p] for p in acts[v]))
        for v in gog.vertex_names
    }
    edge_elems = {
        name: (group.identity if name in gog.tree else lookup[conj[name]])
        for name in gog.edge_names
    }

    # the defining compatibility: s_e (target-side c) s_e^-1 = source-side c
    for name in gog.edge_names:
        e = gog.edges[name]
        s = edge_elems[name]
        for c in range(e.group.order):
            lhs = group.conj(s, embeddings[e.v](e.into_v(c)))
            if lhs != embeddings[e.u](e.into_u(c)):  # pragma: no cover
                raise HypothesisViolated("edge conjugator fails on the edge group")

    return SymQuotient(group, embeddings, edge_elems, degree, acts)


def _extend_action(
    parent_act: list[Perm],
    edge_group: FiniteGroup,
    parent_mono: FiniteHom,
    child_mono: FiniteHom,
    degree: int,
) -> list[Perm]:
    """Free child action agreeing with the parent action on the edge group."""
    child = child_mono.target
    acted = [parent_act[parent_mono(c)] for c in range(edge_group.order)]
    image = closure(child, list(child_mono.image))
    rt = right_transversal(child, image)

    labels = [0] * degree
    block_of = [-1] * degree
    label_to_point: dict[tuple[int, int], int] = {}
    seen = [False] * degree
    orbit_count = 0
    for p in range(degree):
        if seen[p]:
            continue
        blk, slot = divmod(orbit_count, len(rt))
        orbit_count += 1
        r = rt[slot]
        for c in range(edge_group.order):
            q = acted[c][p]
            if seen[q]:  # pragma: no cover - actions are free
                raise HypothesisViolated("edge-group action is not free")
            seen[q] = True
            lab = child.mul(child_mono(c), r)
            labels[q] = lab
            block_of[q] = blk
            label_to_point[(blk, lab)] = q

    out = []
    for h in range(child.order):
        out.append(
            tuple(
                label_to_point[(block_of[p], child.mul(h, labels[p]))]
                for p in range(degree)
            )
        )
    return out
