"""Multiple HNN extensions with identity stable letters: normal forms,
retraction to the base, and the free kernel with its rewriting."""

import random

import pytest

from vfretract import MalformedWord, NotInKernel, free_reduce

from helpers import (
    hnn_c2_central,
    hnn_c2_free,
    hnn_c2_two_letters,
    random_hnn_word,
)


def T(name, exp=1):
    return ("t", name, exp)


def A(x):
    return ("a", x)


# -- normal forms -----------------------------------------------------------------


def test_conjugating_a_fixed_element_pinches():
    hnn = hnn_c2_central()
    w = hnn.reduce([T("t"), A(1), T("t", -1)])
    assert w == hnn.from_base(1)


def test_conjugating_an_outsider_stays_long():
    hnn = hnn_c2_free()
    w = hnn.reduce([T("t"), A(1), T("t", -1)])
    assert w.length() == 2
    assert w != hnn.identity
    assert w != hnn.from_base(1)
    assert hnn.retraction(w) == 1


def test_double_pinch_collapses_to_identity():
    hnn = hnn_c2_free()
    w = hnn.reduce([T("t"), A(1), T("t", -1), T("t"), A(1), T("t", -1)])
    assert w == hnn.identity


def test_reduce_rejects_unknown_letter_and_zero_exponent():
    hnn = hnn_c2_free()
    with pytest.raises(MalformedWord):
        hnn.reduce([T("nope")])
    with pytest.raises(MalformedWord):
        hnn.reduce([T("t", 0)])


def test_normal_form_group_laws_on_random_words():
    rng = random.Random(5)
    for hnn in (hnn_c2_free(), hnn_c2_central(), hnn_c2_two_letters()):
        for _ in range(80):
            u = random_hnn_word(rng, hnn, 8)
            v = random_hnn_word(rng, hnn, 8)
            w = random_hnn_word(rng, hnn, 8)
            assert hnn.mul(hnn.mul(u, v), w) == hnn.mul(u, hnn.mul(v, w))
            assert hnn.mul(u, hnn.inv(u)) == hnn.identity
            assert hnn.mul(hnn.identity, u) == u


# -- retraction -------------------------------------------------------------------------


def test_retraction_is_identity_on_base():
    hnn = hnn_c2_free()
    for x in hnn.base.elements():
        assert hnn.retraction(hnn.from_base(x)) == x


def test_retraction_kills_stable_letters():
    for hnn in (hnn_c2_free(), hnn_c2_central(), hnn_c2_two_letters()):
        for name in hnn.names:
            assert hnn.retraction(hnn.letter(name)) == hnn.base.identity


def test_retraction_multiplies_base_letters():
    hnn = hnn_c2_central()
    for a in hnn.base.elements():
        for b in hnn.base.elements():
            for c in hnn.base.elements():
                w = hnn.reduce([A(a), T("t"), A(b), T("t", -1), A(c)])
                assert hnn.retraction(w) == hnn.base.prod([a, b, c])


def test_retraction_is_a_homomorphism_on_random_words():
    rng = random.Random(17)
    hnn = hnn_c2_two_letters()
    for _ in range(100):
        u = random_hnn_word(rng, hnn, 8)
        v = random_hnn_word(rng, hnn, 8)
        assert hnn.retraction(hnn.mul(u, v)) == hnn.base.mul(
            hnn.retraction(u), hnn.retraction(v)
        )


# -- kernel basis -------------------------------------------------------------------------


def test_kernel_basis_full_subgroup():
    hnn = hnn_c2_central()
    syms = hnn.kernel_symbols()
    assert syms == [("t", 0)]
    assert hnn.kernel_rank() == 1
    assert hnn.kernel_gen(("t", 0)) == hnn.letter("t")


def test_kernel_basis_trivial_subgroup():
    hnn = hnn_c2_free()
    syms = hnn.kernel_symbols()
    assert len(syms) == 2
    gens = [hnn.kernel_gen(s) for s in syms]
    assert hnn.letter("t") in gens
    conjugate = hnn.mul(
        hnn.from_base(1), hnn.letter("t"), hnn.inv(hnn.from_base(1))
    )
    assert conjugate in gens


def test_kernel_basis_two_letters():
    hnn = hnn_c2_two_letters()
    assert len(hnn.kernel_symbols()) == 4
    assert hnn.kernel_rank() == 4


def test_kernel_rank_matches_index_sum():
    for hnn, expected in (
        (hnn_c2_central(), 1),
        (hnn_c2_free(), 2),
        (hnn_c2_two_letters(), 4),
    ):
        total = sum(
            hnn.base.order // sub.order for sub in hnn.subgroups
        )
        assert hnn.kernel_rank() == expected == total


# -- kernel rewriting -----------------------------------------------------------------------


def test_rewrite_of_a_bare_letter():
    hnn = hnn_c2_free()
    word = hnn.rewrite_in_kernel(hnn.letter("t"))
    assert word == ((("t", 0), 1),)


def test_rewrite_of_a_conjugated_letter():
    hnn = hnn_c2_free()
    w = hnn.mul(hnn.from_base(1), hnn.letter("t"), hnn.from_base(1))
    word = hnn.rewrite_in_kernel(w)
    assert word == ((("t", 1), 1),)


def test_rewrite_of_a_commutator_shape():
    hnn = hnn_c2_free()
    w = hnn.reduce([A(1), T("t", -1), A(1), T("t", 1)])
    word = hnn.rewrite_in_kernel(w)
    assert [e for _, e in word] == [-1, 1]
    assert len({s for s, _ in word}) == 2
    assert hnn.expand_kernel_word(word) == w


def test_rewrite_requires_trivial_retraction():
    hnn = hnn_c2_free()
    with pytest.raises(NotInKernel):
        hnn.rewrite_in_kernel(hnn.from_base(1))


def test_rewrite_round_trips_on_random_kernel_words():
    rng = random.Random(29)
    for hnn in (hnn_c2_free(), hnn_c2_two_letters()):
        syms = hnn.kernel_symbols()
        gens = [hnn.kernel_gen(s) for s in syms]
        for _ in range(80):
            w = hnn.identity
            for _ in range(rng.randrange(1, 7)):
                i = rng.randrange(len(gens))
                g = gens[i] if rng.random() < 0.5 else hnn.inv(gens[i])
                w = hnn.mul(w, g)
            word = hnn.rewrite_in_kernel(w)
            assert hnn.expand_kernel_word(word) == w


def test_rewrite_reads_products_letter_by_letter():
    hnn = hnn_c2_two_letters()
    syms = hnn.kernel_symbols()
    for i, si in enumerate(syms):
        for j, sj in enumerate(syms):
            prod = hnn.mul(hnn.kernel_gen(si), hnn.kernel_gen(sj))
            expected = free_reduce([(si, 1), (sj, 1)])
            assert hnn.rewrite_in_kernel(prod) == expected
