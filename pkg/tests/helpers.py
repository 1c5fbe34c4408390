"""Shared constructions used across the test modules.

Small finite groups, a handful of graphs of groups whose fundamental
groups are well understood (Z, infinite dihedral, free and amalgamated
products, an HNN extension with a twisting stable letter), and doubles
over cyclic groups. Everything here is cheap to build, so the module
builds fresh objects per call instead of caching.
"""

from vfretract import (
    Double,
    FiniteGroup,
    FiniteHom,
    GogEdge,
    GraphOfGroups,
    MultiHnn,
    Subgroup,
    closure,
    cyclic_group,
    symmetric_group,
    trivial_group,
)


def hom(src: FiniteGroup, tgt: FiniteGroup, image) -> FiniteHom:
    return FiniteHom(src, tgt, tuple(image))


def ident_hom(g: FiniteGroup) -> FiniteHom:
    return hom(g, g, range(g.order))


def trivial_into(src: FiniteGroup, tgt: FiniteGroup) -> FiniteHom:
    return hom(src, tgt, (tgt.identity,))


# -- graphs of groups ---------------------------------------------------------


def gog_z() -> GraphOfGroups:
    """One trivial vertex with a loop; the group is infinite cyclic."""
    c1 = trivial_group()
    return GraphOfGroups(
        {"v": c1}, [GogEdge("t", "v", "v", c1, ident_hom(c1), ident_hom(c1))]
    )


def gog_dinf() -> GraphOfGroups:
    """Two C2 vertices joined over the trivial edge group: C2 * C2."""
    c2 = cyclic_group(2)
    c1 = trivial_group()
    return GraphOfGroups(
        {"l": c2, "r": c2},
        [GogEdge("e", "l", "r", c1, trivial_into(c1, c2), trivial_into(c1, c2))],
    )


def gog_c2_c3() -> GraphOfGroups:
    """Free product C2 * C3."""
    c2, c3, c1 = cyclic_group(2), cyclic_group(3), trivial_group()
    return GraphOfGroups(
        {"a": c2, "b": c3},
        [GogEdge("e", "a", "b", c1, trivial_into(c1, c2), trivial_into(c1, c3))],
    )


def gog_c4_amalg() -> GraphOfGroups:
    """C4 amalgamated with C4 over the shared C2."""
    c4, c2 = cyclic_group(4), cyclic_group(2)
    emb = hom(c2, c4, (0, 2))
    return GraphOfGroups({"a": c4, "b": c4}, [GogEdge("e", "a", "b", c2, emb, emb)])


def gog_twist() -> GraphOfGroups:
    """HNN extension of C4 whose stable letter inverts the vertex group."""
    c4 = cyclic_group(4)
    inv = hom(c4, c4, (0, 3, 2, 1))
    return GraphOfGroups(
        {"v": c4}, [GogEdge("s", "v", "v", c4, ident_hom(c4), inv)]
    )


# -- doubles -------------------------------------------------------------------


def double_c2() -> Double:
    """C2 doubled over the trivial subgroup: the infinite dihedral group."""
    c2 = cyclic_group(2)
    return Double(c2, Subgroup(c2, (0,)))


def double_c3() -> Double:
    c3 = cyclic_group(3)
    return Double(c3, Subgroup(c3, (0,)))


def double_c4_over_c2() -> Double:
    c4 = cyclic_group(4)
    return Double(c4, closure(c4, [2]))


def double_full(group: FiniteGroup) -> Double:
    """Degenerate double where the amalgam is the whole group."""
    return Double(group, Subgroup(group, tuple(range(group.order))))


# -- HNN bases -----------------------------------------------------------------


def hnn_c2_free() -> MultiHnn:
    """C2 with one stable letter over the trivial subgroup: C2 * Z."""
    c2 = cyclic_group(2)
    return MultiHnn(c2, [("t", Subgroup(c2, (0,)))])


def hnn_c2_central() -> MultiHnn:
    """C2 with one stable letter fixing all of it: C2 x Z."""
    c2 = cyclic_group(2)
    return MultiHnn(c2, [("t", Subgroup(c2, (0, 1)))])


def hnn_c2_two_letters() -> MultiHnn:
    c2 = cyclic_group(2)
    triv = Subgroup(c2, (0,))
    return MultiHnn(c2, [("s", triv), ("t", triv)])


# -- random word generators ------------------------------------------------------


def random_gog_word(rng, gog: GraphOfGroups, max_len: int = 10):
    letters = []
    for _ in range(rng.randrange(max_len + 1)):
        if gog.edge_names and rng.random() < 0.5:
            name = rng.choice(gog.edge_names)
            letters.append(("t", name, rng.choice((1, -1))))
        else:
            v = rng.choice(gog.vertex_names)
            letters.append(("v", v, rng.randrange(gog.groups[v].order)))
    return gog.reduce(letters)


def random_hnn_word(rng, hnn: MultiHnn, max_len: int = 10):
    tokens = []
    for _ in range(rng.randrange(max_len + 1)):
        if hnn.names and rng.random() < 0.5:
            tokens.append(("t", rng.choice(hnn.names), rng.choice((1, -1))))
        else:
            tokens.append(("a", rng.randrange(hnn.base.order)))
    return hnn.reduce(tokens)


def random_amalgam_word(rng, dbl: Double, max_len: int = 10):
    tokens = [
        (rng.randrange(2), rng.randrange(dbl.group.order))
        for _ in range(rng.randrange(max_len + 1))
    ]
    return dbl.normal_form(tokens)


def transposition(s3: FiniteGroup) -> int:
    return next(x for x in s3.elements() if s3.element_order(x) == 2)


def three_cycle(s3: FiniteGroup) -> int:
    return next(x for x in s3.elements() if s3.element_order(x) == 3)


S3 = symmetric_group(3)
