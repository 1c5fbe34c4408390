"""Finite groups on dense integer indices, plus coset and action utilities.

Elements of a FiniteGroup are the integers 0..order-1; all structure lives
in the multiplication table. Permutations are tuples acting on 0..n-1 with
composition (p * q)(x) = p[q[x]].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    CapExceeded,
    NotFree,
    NotSurjective,
    SizeMismatch,
)

DEFAULT_ORDER_CAP = 4096
DEFAULT_COSET_CAP = 10000

Perm = tuple[int, ...]


def compose(p: Perm, q: Perm) -> Perm:
    """Composite permutation applying q first, then p."""
    return tuple(p[i] for i in q)


def invert_perm(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, v in enumerate(p):
        out[v] = i
    return tuple(out)


def identity_perm(n: int) -> Perm:
    return tuple(range(n))


class FiniteGroup:
    """A finite group given by its full multiplication table.

    table[a, b] is the index of the product a*b. An optional permutation
    realization keeps one faithful permutation per element (index-aligned).
    """

    __slots__ = ("order", "table", "identity", "inv", "perms", "name")

    def __init__(
        self,
        table,
        *,
        name: str = "G",
        perms: Optional[tuple[Perm, ...]] = None,
        order_cap: int = DEFAULT_ORDER_CAP,
        check: bool = True,
    ):
        tab = np.asarray(table, dtype=np.int32)
        if tab.ndim != 2 or tab.shape[0] != tab.shape[1]:
            raise ValueError("multiplication table must be square")
        n = tab.shape[0]
        if n == 0:
            raise ValueError("empty table")
        if n > order_cap:
            raise CapExceeded(f"group order {n} exceeds cap {order_cap}")
        if tab.min() < 0 or tab.max() >= n:
            raise ValueError("table entries out of range")
        self.order = n
        self.table = tab
        self.name = name
        self.perms = perms
        self.identity = self._find_identity()
        self.inv = self._find_inverses()
        if check:
            self.verify()

    # -- construction helpers -------------------------------------------

    def _find_identity(self) -> int:
        rng = np.arange(self.order)
        for e in range(self.order):
            if np.array_equal(self.table[e], rng) and np.array_equal(
                self.table[:, e], rng
            ):
                return e
        raise ValueError("table has no two-sided identity")

    def _find_inverses(self) -> np.ndarray:
        inv = np.empty(self.order, dtype=np.int32)
        for a in range(self.order):
            hits = np.nonzero(self.table[a] == self.identity)[0]
            if len(hits) != 1 or self.table[hits[0], a] != self.identity:
                raise ValueError(f"element {a} lacks a two-sided inverse")
            inv[a] = hits[0]
        return inv

    def verify(self) -> None:
        """Exhaustive axiom check: associativity on all triples, plus the
        permutation realization (when present) being a faithful hom."""
        t = self.table
        n = self.order
        if n <= 64:
            if not np.array_equal(t[t, :], t[:, t]):
                raise ValueError("table is not associative")
        else:
            for a in range(n):
                if not np.array_equal(t[t[a], :], t[a][t]):
                    raise ValueError("table is not associative")
        if self.perms is not None:
            if len(self.perms) != n or len(set(self.perms)) != n:
                raise ValueError("permutation realization is not faithful")
            for a in range(n):
                for b in range(n):
                    if compose(self.perms[a], self.perms[b]) != self.perms[t[a, b]]:
                        raise ValueError("permutation realization is not a hom")

    # -- arithmetic ------------------------------------------------------

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def prod(self, items: Iterable[int]) -> int:
        acc = self.identity
        for x in items:
            acc = int(self.table[acc, x])
        return acc

    def inverse(self, a: int) -> int:
        return int(self.inv[a])

    def conj(self, a: int, b: int) -> int:
        """a * b * a^-1."""
        return self.mul(self.mul(a, b), self.inverse(a))

    def elements(self) -> range:
        return range(self.order)

    def element_order(self, a: int) -> int:
        k, x = 1, a
        while x != self.identity:
            x = self.mul(x, a)
            k += 1
        return k

    def regular_perms(self) -> tuple[Perm, ...]:
        """Left regular representation; row a is the permutation x -> a*x."""
        return tuple(tuple(int(v) for v in self.table[a]) for a in self.elements())

    def __repr__(self) -> str:  # pragma: no cover
        return f"FiniteGroup({self.name}, order={self.order})"


@dataclass(frozen=True)
class Subgroup:
    """A subgroup of `parent` given by its sorted element set."""

    parent: FiniteGroup
    elems: tuple[int, ...]

    def __post_init__(self):
        g = self.parent
        s = set(self.elems)
        if tuple(sorted(s)) != self.elems:
            raise ValueError("subgroup elements must be sorted and unique")
        if g.identity not in s:
            raise ValueError("subgroup must contain the identity")
        for a in self.elems:
            if g.inverse(a) not in s:
                raise ValueError("subgroup not closed under inverse")
            for b in self.elems:
                if g.mul(a, b) not in s:
                    raise ValueError("subgroup not closed under product")

    @property
    def order(self) -> int:
        return len(self.elems)

    def index(self) -> int:
        return self.parent.order // self.order

    def __contains__(self, a: int) -> bool:
        return a in set(self.elems)


@dataclass(frozen=True)
class FiniteHom:
    """A homomorphism source -> target stored as the full image array."""

    source: FiniteGroup
    target: FiniteGroup
    image: tuple[int, ...]

    def __post_init__(self):
        s, t = self.source, self.target
        if len(self.image) != s.order:
            raise ValueError("image array has wrong length")
        img = self.image
        for a in s.elements():
            if not 0 <= img[a] < t.order:
                raise ValueError("image entry out of range")
            for b in s.elements():
                if img[s.mul(a, b)] != t.mul(img[a], img[b]):
                    raise ValueError("not a homomorphism")

    def __call__(self, a: int) -> int:
        return self.image[a]

    def is_injective(self) -> bool:
        return len(set(self.image)) == self.source.order

    def is_surjective(self) -> bool:
        return len(set(self.image)) == self.target.order

    def kernel(self) -> tuple[int, ...]:
        e = self.target.identity
        return tuple(a for a in self.source.elements() if self.image[a] == e)


# -- builders --------------------------------------------------------------


def trivial_group(name: str = "1") -> FiniteGroup:
    return FiniteGroup([[0]], name=name, perms=((0,),), check=False)


def cyclic_group(n: int, name: Optional[str] = None) -> FiniteGroup:
    tab = [[(a + b) % n for b in range(n)] for a in range(n)]
    perms = tuple(tuple((a + x) % n for x in range(n)) for a in range(n))
    return FiniteGroup(tab, name=name or f"C{n}", perms=perms, check=False)


def group_from_perm_gens(
    gens: Sequence[Perm],
    degree: int,
    *,
    name: str = "P",
    order_cap: int = DEFAULT_ORDER_CAP,
) -> FiniteGroup:
    group, _ = closure_with_words(gens, degree, name=name, order_cap=order_cap)
    return group


def closure_with_words(
    gens: Sequence[Perm],
    degree: int,
    *,
    name: str = "P",
    order_cap: int = DEFAULT_ORDER_CAP,
) -> tuple[FiniteGroup, list[tuple[int, ...]]]:
    """Close a permutation generating set; element 0 is the identity.

    Returns the group (with perms attached) and, for each element, one
    expression as a tuple of generator indices (a positive word).
    """
    for p in gens:
        if sorted(p) != list(range(degree)):
            raise ValueError("generator is not a permutation of the degree")
    ident = identity_perm(degree)
    elems: list[Perm] = [ident]
    words: list[tuple[int, ...]] = [()]
    index: dict[Perm, int] = {ident: 0}
    cursor = 0
    while cursor < len(elems):
        base = elems[cursor]
        for gi, g in enumerate(gens):
            new = compose(base, g)
            if new not in index:
                if len(elems) >= order_cap:
                    raise CapExceeded(
                        f"permutation closure exceeds order cap {order_cap}"
                    )
                index[new] = len(elems)
                elems.append(new)
                words.append(words[cursor] + (gi,))
        cursor += 1
    n = len(elems)
    tab = np.empty((n, n), dtype=np.int32)
    for i, p in enumerate(elems):
        for j, q in enumerate(elems):
            tab[i, j] = index[compose(p, q)]
    group = FiniteGroup(tab, name=name, perms=tuple(elems), check=False)
    return group, words


def direct_product(g: FiniteGroup, h: FiniteGroup, *, name: Optional[str] = None) -> FiniteGroup:
    """Direct product with element (a, b) at index a * |h| + b."""
    n, m = g.order, h.order
    if n * m > DEFAULT_ORDER_CAP:
        raise CapExceeded("direct product exceeds order cap")
    gt = np.repeat(np.repeat(g.table, m, axis=0), m, axis=1).astype(np.int64)
    ht = np.tile(h.table, (n, n)).astype(np.int64)
    tab = gt * m + ht
    return FiniteGroup(
        tab, name=name or f"{g.name}x{h.name}", check=False
    )


def pack_pair(a: int, b: int, h_order: int) -> int:
    return a * h_order + b


def unpack_pair(x: int, h_order: int) -> tuple[int, int]:
    return divmod(x, h_order)


def elementary_abelian(p: int, rank: int, *, order_cap: int = DEFAULT_ORDER_CAP) -> FiniteGroup:
    """(Z/p)^rank with indices read as base-p digit vectors."""
    n = p**rank
    if n > order_cap:
        raise BudgetExceeded(
            f"elementary abelian group of order {p}^{rank} exceeds cap {order_cap}"
        )
    idx = np.arange(n)
    digits = np.empty((rank, n), dtype=np.int64)
    rem = idx.copy()
    for k in range(rank - 1, -1, -1):
        digits[k] = rem % p
        rem //= p
    tab = np.zeros((n, n), dtype=np.int64)
    weight = 1
    for k in range(rank - 1, -1, -1):
        tab += ((digits[k][:, None] + digits[k][None, :]) % p) * weight
        weight *= p
    return FiniteGroup(tab, name=f"E{p}^{rank}", check=False)


def symmetric_group(n: int) -> FiniteGroup:
    if n < 1 or n > 7:
        raise ValueError("symmetric_group supports 1 <= n <= 7")
    import itertools

    perms = tuple(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    m = len(perms)
    tab = np.empty((m, m), dtype=np.int32)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            tab[i, j] = index[compose(p, q)]
    return FiniteGroup(tab, name=f"S{n}", perms=perms, check=False)


# -- subgroup ops -----------------------------------------------------------


def closure(parent: FiniteGroup, gens: Iterable[int]) -> Subgroup:
    """Subgroup generated by `gens` (brute-force orbit of products)."""
    seen = {parent.identity}
    frontier = [parent.identity]
    gen_list = [g for g in gens]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gen_list:
                y = parent.mul(x, g)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return Subgroup(parent, tuple(sorted(seen)))


def left_transversal(parent: FiniteGroup, sub: Subgroup) -> tuple[int, ...]:
    """Representatives for the left cosets d*S: identity first, then the
    smallest uncovered index. Deterministic."""
    covered = set(sub.elems)
    reps = [parent.identity]
    for g in parent.elements():
        if g not in covered:
            reps.append(g)
            for s in sub.elems:
                covered.add(parent.mul(g, s))
    return tuple(reps)


def right_transversal(parent: FiniteGroup, sub: Subgroup) -> tuple[int, ...]:
    """Representatives for the right cosets S*d, identity first."""
    covered = set(sub.elems)
    reps = [parent.identity]
    for g in parent.elements():
        if g not in covered:
            reps.append(g)
            for s in sub.elems:
                covered.add(parent.mul(s, g))
    return tuple(reps)


def coset_decomposition(
    parent: FiniteGroup, sub: Subgroup
) -> tuple[tuple[int, ...], np.ndarray, np.ndarray]:
    """Left transversal D plus arrays rep_of / tail_of with
    x = rep_of[x] * tail_of[x] and tail_of[x] in the subgroup."""
    reps = left_transversal(parent, sub)
    rep_of = np.empty(parent.order, dtype=np.int32)
    tail_of = np.empty(parent.order, dtype=np.int32)
    sub_set = set(sub.elems)
    for d in reps:
        for s in sub.elems:
            x = parent.mul(d, s)
            rep_of[x] = d
            tail_of[x] = s
    if len(sub_set) * len(reps) != parent.order:
        raise ValueError("transversal does not tile the group")
    return reps, rep_of, tail_of


# -- actions ----------------------------------------------------------------


def is_free_action(group: FiniteGroup, x_size: int, act: Sequence[Perm]) -> bool:
    for g in group.elements():
        if g == group.identity:
            continue
        p = act[g]
        if any(p[x] == x for x in range(x_size)):
            return False
    return True


def intertwine_free_actions(
    group: FiniteGroup, x_size: int, act1: Sequence[Perm], act2: Sequence[Perm]
) -> Perm:
    """A permutation s with s(act1(g)(x)) = act2(g)(s(x)) for all g, x.

    Both actions must be free; orbits are matched in index order and the
    bijection is propagated along group elements.
    """
    if len(act1) != group.order or len(act2) != group.order:
        raise SizeMismatch("action arrays must be indexed by group elements")
    for act in (act1, act2):
        if not is_free_action(group, x_size, act):
            raise NotFree("action has a nontrivial point stabilizer")
    if x_size % group.order != 0:
        raise SizeMismatch("free action needs |X| divisible by the group order")
    sigma = [-1] * x_size
    used2 = [False] * x_size
    next2 = 0
    for x in range(x_size):
        if sigma[x] != -1:
            continue
        while next2 < x_size and used2[next2]:
            next2 += 1
        if next2 >= x_size:
            raise SizeMismatch("orbit counts differ")
        y = next2
        for g in group.elements():
            px, py = act1[g][x], act2[g][y]
            sigma[px] = py
            used2[py] = True
    result = tuple(sigma)
    for g in group.elements():
        if compose(result, act1[g]) != compose(act2[g], result):
            raise SizeMismatch("intertwiner construction failed conjugation check")
    return result


# -- word-level coset enumeration -------------------------------------------

Letter = tuple[int, int]  # (generator index, +1/-1)
Word = tuple[Letter, ...]


def word_reduce(letters: Iterable[Letter]) -> Word:
    out: list[Letter] = []
    for sym, e in letters:
        if out and out[-1][0] == sym and out[-1][1] == -e:
            out.pop()
        else:
            out.append((sym, e))
    return tuple(out)


def word_inverse(w: Word) -> Word:
    return tuple((sym, -e) for sym, e in reversed(w))


@dataclass
class CosetAction:
    """Result of enumerating cosets of a subgroup K under right multiplication.

    reps[i] is a word over the generators representing coset K * reps[i];
    table[i][j] is the coset of reps[i] * gen_j; group is the permutation
    image of the generators on the cosets, with gen_images giving each
    generator's index inside it. elem_words expresses every image element
    as a positive word over generator indices.
    """

    reps: list[Word]
    table: list[list[int]]
    group: FiniteGroup
    gen_images: list[int]
    elem_words: list[tuple[int, ...]]


def coset_bfs(
    is_member: Callable[[Word], bool],
    n_gens: int,
    *,
    coset_cap: int = DEFAULT_COSET_CAP,
) -> tuple[list[Word], list[list[int]]]:
    """BFS the right cosets of a finite-index subgroup K.

    `is_member` answers whether a word over the generators lies in K; coset
    identity K*u = K*v is decided by is_member(u * v^-1). Returns the rep
    words (identity first) and the full transition table, one row per coset
    with columns 2*gi (generator gi) and 2*gi+1 (its inverse). Raises
    BudgetExceeded past coset_cap.
    """
    reps: list[Word] = [()]
    table: list[list[Optional[int]]] = [[None] * (2 * n_gens)]
    cursor = 0
    while cursor < len(reps):
        u = reps[cursor]
        for slot in range(2 * n_gens):
            if table[cursor][slot] is not None:
                continue
            gi, e = divmod(slot, 2)
            letter = (gi, 1 if e == 0 else -1)
            cand = word_reduce(u + (letter,))
            found = None
            for j, v in enumerate(reps):
                if is_member(word_reduce(cand + word_inverse(v))):
                    found = j
                    break
            if found is None:
                if len(reps) >= coset_cap:
                    raise BudgetExceeded(f"coset enumeration exceeds cap {coset_cap}")
                reps.append(cand)
                table.append([None] * (2 * n_gens))
                found = len(reps) - 1
            table[cursor][slot] = found
        cursor += 1
    return reps, [[int(t) if t is not None else -1 for t in row] for row in table]


def action_on_cosets(
    is_member: Callable[[Word], bool],
    n_gens: int,
    *,
    coset_cap: int = DEFAULT_COSET_CAP,
    order_cap: int = DEFAULT_ORDER_CAP,
) -> CosetAction:
    """coset_bfs plus the permutation image of the generators on the cosets.

    The closure of that image is a finite quotient acting on the coset
    space; its order is unrelated to the coset count and is capped
    separately by order_cap. Generator g maps to the permutation
    Ku -> Ku*g^-1, so that composing permutations left to right matches
    multiplying group elements left to right.
    """
    reps, table = coset_bfs(is_member, n_gens, coset_cap=coset_cap)
    n = len(reps)
    gen_perms = [
        tuple(table[i][2 * gi + 1] for i in range(n)) for gi in range(n_gens)
    ]
    group, words = closure_with_words(gen_perms, n, name="Q", order_cap=order_cap)
    perm_index = {p: i for i, p in enumerate(group.perms)}
    gen_images = [perm_index[p] for p in gen_perms]
    return CosetAction(reps, table, group, gen_images, words)


def p_by_a_check(c: FiniteGroup, onto_a: FiniteHom, p: int) -> bool:
    """True when onto_a is onto and its kernel has p-power order."""
    if onto_a.source is not c:
        raise ValueError("hom source must be the candidate group")
    if not onto_a.is_surjective():
        raise NotSurjective("map to the finite quotient is not onto")
    k = len(onto_a.kernel())
    while k % p == 0:
        k //= p
    return k == 1
