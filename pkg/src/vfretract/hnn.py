"""Multiple HNN extensions over a finite base with identity stable letters.

Presentations handled here have the shape

    < A, t_1, ..., t_k | t_i b t_i^-1 = b  for all b in B_i >

with A finite and B_i <= A. Elements are kept in a canonical form
d_1 t^{e_1} d_2 t^{e_2} ... d_n t^{e_n} a  where each d_j is the chosen
left-coset representative of B_{i_j} accumulated so far; two words are equal
in the group exactly when their canonical forms coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MalformedWord, NotInKernel
from .free import FreeWord, free_reduce
from .perm import FiniteGroup, Subgroup, coset_decomposition

Token = tuple  # ("a", elem) or ("t", name, exp)


@dataclass(frozen=True)
class HnnWord:
    """Canonical form: syllables (rep elem, letter index, +1/-1) then tail."""

    syls: tuple[tuple[int, int, int], ...]
    tail: int

    def length(self) -> int:
        return len(self.syls)


class MultiHnn:
    def __init__(self, base: FiniteGroup, letters: Sequence[tuple[str, Subgroup]]):
        names = [name for name, _ in letters]
        if len(set(names)) != len(names):
            raise ValueError("stable letter names must be distinct")
        self.base = base
        self.names = tuple(names)
        self.index_of = {n: i for i, n in enumerate(self.names)}
        self.subgroups = tuple(sub for _, sub in letters)
        for sub in self.subgroups:
            if sub.parent is not base:
                raise ValueError("associated subgroups must live in the base")
        self._decomp = [coset_decomposition(base, sub) for sub in self.subgroups]
        self.identity = HnnWord((), base.identity)

    # -- construction -------------------------------------------------------

    def reduce(self, tokens: Iterable[Token]) -> HnnWord:
        """Canonical form of a product of base elements and stable letters."""
        base = self.base
        syls: list[tuple[int, int, int]] = []
        y = base.identity
        for tok in tokens:
            if tok[0] == "a":
                _, x = tok
                y = base.mul(y, x)
            elif tok[0] == "t":
                _, name, exp = tok
                if name not in self.index_of:
                    raise MalformedWord(f"unknown stable letter {name!r}")
                if not isinstance(exp, int) or exp == 0:
                    raise MalformedWord("stable letter exponent must be a nonzero integer")
                i = self.index_of[name]
                step = 1 if exp > 0 else -1
                for _ in range(abs(exp)):
                    reps, rep_of, tail_of = self._decomp[i]
                    d = int(rep_of[y])
                    b = int(tail_of[y])
                    if (
                        syls
                        and d == base.identity
                        and syls[-1][1] == i
                        and syls[-1][2] == -step
                    ):
                        d_prev = syls.pop()[0]
                        y = base.mul(d_prev, y)
                    else:
                        syls.append((d, i, step))
                        y = b
            else:
                raise MalformedWord(f"unknown token kind {tok[0]!r}")
        return HnnWord(tuple(syls), y)

    def tokens_of(self, w: HnnWord) -> list[Token]:
        out: list[Token] = []
        for d, i, e in w.syls:
            if d != self.base.identity:
                out.append(("a", d))
            out.append(("t", self.names[i], e))
        if w.tail != self.base.identity or not out:
            out.append(("a", w.tail))
        return out

    def from_base(self, x: int) -> HnnWord:
        return HnnWord((), x)

    def letter(self, name: str, exp: int = 1) -> HnnWord:
        return self.reduce([("t", name, exp)])

    def mul(self, *ws: HnnWord) -> HnnWord:
        toks: list[Token] = []
        for w in ws:
            toks.extend(self.tokens_of(w))
        return self.reduce(toks)

    def inv(self, w: HnnWord) -> HnnWord:
        toks: list[Token] = []
        for tok in reversed(self.tokens_of(w)):
            if tok[0] == "a":
                toks.append(("a", self.base.inverse(tok[1])))
            else:
                toks.append(("t", tok[1], -tok[2]))
        return self.reduce(toks)

    def pow(self, w: HnnWord, n: int) -> HnnWord:
        if n < 0:
            return self.pow(self.inv(w), -n)
        acc = self.identity
        for _ in range(n):
            acc = self.mul(acc, w)
        return acc

    def conj(self, a: HnnWord, b: HnnWord) -> HnnWord:
        """a * b * a^-1."""
        return self.mul(a, b, self.inv(a))

    def transversal(self, i: int) -> tuple[int, ...]:
        """Left-coset representatives used for the i-th associated subgroup."""
        return tuple(int(d) for d in self._decomp[i][0])

    # -- retraction onto the base -------------------------------------------

    def retraction(self, w: HnnWord) -> int:
        """Image under the retraction killing every stable letter."""
        acc = self.base.identity
        for d, _, _ in w.syls:
            acc = self.base.mul(acc, d)
        return self.base.mul(acc, w.tail)

    # -- free kernel of the retraction ---------------------------------------

    def kernel_symbols(self) -> list[tuple[str, int]]:
        """Basis symbols (letter name, rep elem), ordered by letter then rep."""
        out = []
        for i, name in enumerate(self.names):
            reps, _, _ = self._decomp[i]
            for d in reps:
                out.append((name, int(d)))
        return out

    def kernel_gen(self, symbol: tuple[str, int]) -> HnnWord:
        name, d = symbol
        return self.reduce(
            [("a", d), ("t", name, 1), ("a", self.base.inverse(d))]
        )

    def kernel_rank(self) -> int:
        return sum(len(self._decomp[i][0]) for i in range(len(self.names)))

    def rewrite_in_kernel(self, w: HnnWord) -> FreeWord:
        """Word over kernel_symbols() equal to w, when w retracts to 1."""
        base = self.base
        out: list[tuple[tuple[str, int], int]] = []
        a = base.identity
        for tok in self.tokens_of(w):
            if tok[0] == "a":
                a = base.mul(a, tok[1])
            else:
                _, name, exp = tok
                i = self.index_of[name]
                _, rep_of, _ = self._decomp[i]
                d = int(rep_of[a])
                step = 1 if exp > 0 else -1
                out.extend([((name, d), step)] * abs(exp))
        if a != base.identity:
            raise NotInKernel("word does not retract to the identity")
        return free_reduce(out)

    def expand_kernel_word(self, word: FreeWord) -> HnnWord:
        toks: list[Token] = []
        for sym, e in word:
            name, d = sym
            toks.append(("a", d))
            toks.append(("t", name, e))
            toks.append(("a", self.base.inverse(d)))
        return self.reduce(toks)
