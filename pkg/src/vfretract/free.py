"""Free words, Stallings graphs, and Schreier bases.

A FreeWord is a tuple of (symbol, +1/-1) letters with no adjacent
cancellation; symbols are arbitrary sortable hashables supplied by the
caller. Subgroup graphs are folded wedges; the fold history is retained so
that membership witnesses can be lifted back to the original generators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence

from .errors import TrivialGenerator
from .perm import FiniteGroup

Symbol = Hashable
FreeWord = tuple[tuple[Symbol, int], ...]


def free_reduce(letters: Iterable[tuple[Symbol, int]]) -> FreeWord:
    """Cancel adjacent inverse pairs; the result is freely reduced."""
    out: list[tuple[Symbol, int]] = []
    for sym, e in letters:
        if e not in (1, -1):
            raise ValueError("letter exponents must be +1 or -1")
        if out and out[-1][0] == sym and out[-1][1] == -e:
            out.pop()
        else:
            out.append((sym, e))
    return tuple(out)


def word_inv(w: FreeWord) -> FreeWord:
    return tuple((s, -e) for s, e in reversed(w))


def word_mul(*ws: FreeWord) -> FreeWord:
    acc: list[tuple[Symbol, int]] = []
    for w in ws:
        acc.extend(w)
    return free_reduce(acc)


def word_pow(w: FreeWord, n: int) -> FreeWord:
    if n < 0:
        return word_pow(word_inv(w), -n)
    return word_mul(*([w] * n)) if n else ()


def commutator(u: FreeWord, v: FreeWord) -> FreeWord:
    return word_mul(u, v, word_inv(u), word_inv(v))


# -- Stallings graphs --------------------------------------------------------

Edge = tuple[int, Symbol, int]  # (source, label, target)


def _adjacency(edges: Iterable[Edge]):
    out: dict[tuple[int, Symbol], list[int]] = {}
    inc: dict[tuple[int, Symbol], list[int]] = {}
    for u, s, v in edges:
        out.setdefault((u, s), []).append(v)
        inc.setdefault((v, s), []).append(u)
    return out, inc


class StallingsGraph:
    """Folded wedge of the generator loops, with fold history.

    `edges` is the folded edge set (core trimming never removes edges a
    reduced loop can use, so both views answer membership identically;
    core_vertices / core_edges expose the trimmed core used for rank).
    """

    def __init__(self, gens: Sequence[FreeWord]):
        self.gens = tuple(free_reduce(g) for g in gens)
        self.base = 0
        edges: set[Edge] = set()
        nontree: dict[Edge, tuple[int, int]] = {}
        next_v = 1
        for gi, g in enumerate(self.gens):
            if not g:
                continue
            cur = self.base
            for k, (s, e) in enumerate(g):
                last = k == len(g) - 1
                nxt = self.base if last else next_v
                if not last:
                    next_v += 1
                edge = (cur, s, nxt) if e == 1 else (nxt, s, cur)
                edges.add(edge)
                if last and edge not in nontree:
                    nontree[edge] = (gi, e)
                cur = nxt
        self._initial_nontree = nontree
        self.history: list[tuple[frozenset[Edge], str, int, Symbol, int, int]] = []
        self.edges = self._fold(edges)
        self._out, self._in = _adjacency(self.edges)
        self.vertices = sorted(
            {self.base} | {u for u, _, _ in self.edges} | {v for _, _, v in self.edges}
        )
        self.core_vertices, self.core_edges = self._trim_core()

    def _fold(self, edges: set[Edge]) -> set[Edge]:
        while True:
            out, inc = _adjacency(edges)
            merge = None
            for (u, s), targets in sorted(out.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))):
                uniq = sorted(set(targets))
                if len(uniq) > 1:
                    merge = ("out", u, s, uniq[0], uniq[1])
                    break
            if merge is None:
                for (v, s), sources in sorted(inc.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))):
                    uniq = sorted(set(sources))
                    if len(uniq) > 1:
                        merge = ("in", v, s, uniq[0], uniq[1])
                        break
            if merge is None:
                return edges
            kind, pivot, s, keep, gone = merge
            self.history.append((frozenset(edges), kind, pivot, s, keep, gone))
            renamed: set[Edge] = set()
            for a, lab, b in edges:
                a2 = keep if a == gone else a
                b2 = keep if b == gone else b
                renamed.add((a2, lab, b2))
            edges = renamed

    def _trim_core(self) -> tuple[set[int], set[Edge]]:
        verts = set(self.vertices)
        edges = set(self.edges)
        changed = True
        while changed:
            changed = False
            deg: dict[int, int] = {v: 0 for v in verts}
            for u, _, v in edges:
                deg[u] += 1
                deg[v] += 1
            for v in sorted(verts):
                if v != self.base and deg.get(v, 0) <= 1:
                    verts.discard(v)
                    edges = {e for e in edges if e[0] != v and e[2] != v}
                    changed = True
        return verts, edges

    # -- queries ----------------------------------------------------------

    def step(self, vertex: int, sym: Symbol, e: int) -> Optional[int]:
        if e == 1:
            hit = self._out.get((vertex, sym))
        else:
            hit = self._in.get((vertex, sym))
        return hit[0] if hit else None

    def trace(self, w: FreeWord) -> Optional[list[tuple[int, Symbol, int, int]]]:
        """Steps (depart, symbol, arrive, exp) reading w from the base back
        to the base, or None if w is not a member."""
        cur = self.base
        path = []
        for sym, e in w:
            nxt = self.step(cur, sym, e)
            if nxt is None:
                return None
            path.append((cur, sym, nxt, e))
            cur = nxt
        return path if cur == self.base else None

    def rank(self) -> int:
        return len(self.core_edges) - len(self.core_vertices) + 1

    # -- witness lifting ----------------------------------------------------

    def _lift_path(self, path, edges_before, kind, pivot, s0, keep, gone):
        """Rewrite a path of the folded graph as a path of the unfold,
        inserting cancelling detours through the pivot at the split vertex."""
        have = set(edges_before)

        def connector(frm: int) -> list[tuple[int, Symbol, int, int]]:
            to = gone if frm == keep else keep
            if kind == "out":  # pivot edges (pivot, s0, keep/gone)
                return [(frm, s0, pivot, -1), (pivot, s0, to, 1)]
            return [(frm, s0, pivot, 1), (pivot, s0, to, -1)]

        lifted: list[tuple[int, Symbol, int, int]] = []
        cur = self.base
        for _, sym, b, e in path:
            for attempt in range(2):
                targets = [b] + ([gone] if b == keep else [])
                if e == 1:
                    cands = [t for t in targets if (cur, sym, t) in have]
                else:
                    cands = [t for t in targets if (t, sym, cur) in have]
                if cands:
                    lifted.append((cur, sym, cands[0], e))
                    cur = cands[0]
                    break
                if attempt == 0 and cur in (keep, gone):
                    lifted.extend(connector(cur))
                    cur = gone if cur == keep else keep
                else:  # pragma: no cover - structural invariant
                    raise AssertionError("path lift failed")
        if cur != self.base:
            # the loop closed at the merged twin of the base; patch with a
            # cancelling detour so the lift is again a loop at the base
            lifted.extend(connector(cur))
            cur = gone if cur == keep else keep
        assert cur == self.base
        return lifted

    def rewrite(self, w: FreeWord) -> Optional[FreeWord]:
        """Express w over generator indices 0..len(gens)-1, or None.

        The witness expands back to w exactly after substitution and free
        reduction.
        """
        path = self.trace(free_reduce(w))
        if path is None:
            return None
        for edges_before, kind, pivot, s0, keep, gone in reversed(self.history):
            path = self._lift_path(path, edges_before, kind, pivot, s0, keep, gone)
        letters = []
        for a, sym, b, e in path:
            edge = (a, sym, b) if e == 1 else (b, sym, a)
            hit = self._initial_nontree.get(edge)
            if hit is not None:
                petal, sign = hit
                letters.append((petal, sign * e))
        return free_reduce(letters)


def fold_subgroup_graph(gens: Sequence[FreeWord]) -> StallingsGraph:
    return StallingsGraph(gens)


def member_and_rewrite(graph: StallingsGraph, w: FreeWord) -> Optional[FreeWord]:
    return graph.rewrite(w)


def graph_rank(graph: StallingsGraph) -> int:
    return graph.rank()


def is_free_basis(gens: Sequence[FreeWord]) -> bool:
    """True when the (nontrivial) words freely generate a subgroup of rank
    equal to their count."""
    reduced = [free_reduce(g) for g in gens]
    if any(not g for g in reduced):
        raise TrivialGenerator("free basis candidates must be nontrivial")
    if not reduced:
        return True
    return fold_subgroup_graph(reduced).rank() == len(reduced)


def cyclic_disjoint(u: FreeWord, v: FreeWord) -> bool:
    """True when <u> and <v> intersect trivially, i.e. [u, v] != 1."""
    u, v = free_reduce(u), free_reduce(v)
    if not u or not v:
        raise TrivialGenerator("cyclic_disjoint needs nontrivial words")
    return commutator(u, v) != ()


# -- Schreier machinery -------------------------------------------------------


class SchreierRewriter:
    """Schreier transversal and basis for the kernel of a map from a free
    group of the given rank onto a subgroup of a finite group.

    The transversal is shortlex-minimal over the letter order
    x0 < x0^-1 < x1 < x1^-1 < ...; being breadth-first it is prefix-closed,
    so the nontrivial Schreier generators freely generate the kernel.
    """

    def __init__(self, rank: int, images: Sequence[int], target: FiniteGroup):
        if len(images) != rank:
            raise ValueError("one image per free generator required")
        self.rank = rank
        self.target = target
        self.images = tuple(images)
        reps: dict[int, FreeWord] = {target.identity: ()}
        order: list[int] = [target.identity]
        cursor = 0
        while cursor < len(order):
            g = order[cursor]
            for i in range(rank):
                for e in (1, -1):
                    img = self.images[i] if e == 1 else target.inverse(self.images[i])
                    h = target.mul(g, img)
                    if h not in reps:
                        reps[h] = reps[g] + ((i, e),)
                        order.append(h)
            cursor += 1
        self.transversal_order = order
        self.reps = reps
        self.basis: list[FreeWord] = []
        self._slot: dict[tuple[int, int], int] = {}
        for g in order:
            for i in range(rank):
                h = target.mul(g, self.images[i])
                gen = word_mul(reps[g], ((i, 1),), word_inv(reps[h]))
                if gen:
                    self._slot[(g, i)] = len(self.basis)
                    self.basis.append(gen)

    def image_of(self, w: FreeWord) -> int:
        t = self.target
        acc = t.identity
        for i, e in w:
            img = self.images[i] if e == 1 else t.inverse(self.images[i])
            acc = t.mul(acc, img)
        return acc

    def transversal(self) -> list[FreeWord]:
        return [self.reps[g] for g in self.transversal_order]

    def rewrite(self, w: FreeWord) -> FreeWord:
        """Express a kernel element over basis indices 0..len(basis)-1."""
        t = self.target
        if self.image_of(w) != t.identity:
            raise ValueError("word is not in the kernel")
        out: list[tuple[int, int]] = []
        g = t.identity
        for i, e in w:
            if e == 1:
                slot = self._slot.get((g, i))
                if slot is not None:
                    out.append((slot, 1))
                g = t.mul(g, self.images[i])
            else:
                g = t.mul(g, t.inverse(self.images[i]))
                slot = self._slot.get((g, i))
                if slot is not None:
                    out.append((slot, -1))
        return free_reduce(out)

    def expand(self, w: FreeWord) -> FreeWord:
        """Inverse of rewrite: substitute basis words for basis indices."""
        parts = []
        for slot, e in w:
            b = self.basis[slot]
            parts.append(b if e == 1 else word_inv(b))
        return word_mul(*parts) if parts else ()


def schreier_kernel_basis(
    rank: int, images: Sequence[int], target: FiniteGroup
) -> tuple[list[FreeWord], list[FreeWord]]:
    """Shortlex Schreier transversal and free basis for the kernel of the
    map x_i -> images[i] into `target`."""
    rw = SchreierRewriter(rank, images, target)
    return rw.transversal(), list(rw.basis)
