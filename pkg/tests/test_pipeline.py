"""The embedding chain: cone quotient, special HNN, separating quotient,
power trick, single letter, double, and the certificates."""

import copy
import dataclasses
import random

import pytest

from vfretract import (
    BallTooLarge,
    BudgetExceeded,
    GraphOfGroups,
    HypothesisViolated,
    ModPSeries,
    NotRetractive,
    TrivialGenerator,
    bounded_normal_forms,
    elementary_abelian,
    embed_cone,
    embed_double,
    embed_single_hnn,
    embed_vfree_to_double,
    embedding_cert_from_data,
    embedding_certificate,
    fold_subgroup_graph,
    is_free_basis,
    member_and_rewrite,
    p_separating_quotient,
    pingpong_exponent,
    schreier_kernel_basis,
    special_s_set,
    to_special_hnn,
    trivial_group,
    verify_embedding_ball,
    verify_embedding_cert,
    word_mul,
    word_pow,
)
from vfretract.pipeline import ConeStage, ball_map_check, presentation_relations

from helpers import (
    gog_c2_c3,
    gog_c4_amalg,
    gog_dinf,
    gog_twist,
    gog_z,
    hnn_c2_central,
    hnn_c2_free,
    random_gog_word,
)

A = ((0, 1),)
B = ((1, 1),)


# -- cone stage -------------------------------------------------------------------


def test_cone_over_z_keeps_the_loop():
    cone = embed_cone(gog_z())
    assert cone.quotient.group.order == 1
    assert cone.theta.vertex_names == ("u",)
    assert cone.theta.edge_names == ("t",)
    src = gog_z()
    t = src.reduce([("t", "t", 1)])
    assert cone.map_word(cone.source.reduce([("t", "t", 1)])).length() == 1


def test_cone_over_dinf_conjugates_the_far_vertex():
    gog = gog_dinf()
    cone = embed_cone(gog)
    a = cone.quotient.embeddings["l"](1)
    left = cone.map_word(gog.reduce([("v", "l", 1)]))
    right = cone.map_word(gog.reduce([("v", "r", 1)]))
    theta = cone.theta
    assert left == theta.reduce([("v", "u", a)])
    assert right == theta.mul(
        theta.reduce([("t", "e", 1)]),
        theta.reduce([("v", "u", a)]),
        theta.reduce([("t", "e", -1)]),
    )
    assert right != left


def test_cone_map_is_injective_on_a_ball():
    for build in (gog_dinf(), gog_c2_c3(), gog_c4_amalg(), gog_twist()):
        gog = build
        cone = embed_cone(gog)
        pairs = []
        for letter in gog.generator_letters():
            g = gog.reduce([letter])
            pairs.append((g, cone.map_word(g)))
        size, injective = ball_map_check(gog, cone.theta, pairs, 3)
        assert injective and size > 1


# -- Tietze normalization to the special shape ------------------------------------------


def test_special_hnn_over_dinf_is_free_product_with_z():
    cone = embed_cone(gog_dinf())
    special = to_special_hnn(cone)
    assert special.hnn.base.order == 2
    assert [s.order for s in special.hnn.subgroups] == [1]


def test_special_hnn_fixes_its_subgroups_pointwise():
    for build in (gog_c4_amalg, gog_twist):
        special = to_special_hnn(embed_cone(build()))
        hnn = special.hnn
        for name, sub in zip(hnn.names, hnn.subgroups):
            t = hnn.letter(name)
            for b in sub.elems:
                w = hnn.mul(t, hnn.from_base(b), hnn.inv(t))
                assert w == hnn.from_base(b)


def test_special_hnn_rejects_broken_edge_elements():
    # The twisting loop inverts the C4 factor, so its edge element cannot
    # be the identity; planting the identity must trip the conjugation audit.
    cone = embed_cone(gog_twist())
    q = cone.quotient
    assert q.edge_elems["s"] != 0
    bad_q = dataclasses.replace(q, edge_elems={"s": 0})
    with pytest.raises(NotRetractive):
        to_special_hnn(ConeStage(cone.source, cone.theta, bad_q))


def test_special_map_composes_injectively_on_a_ball():
    gog = gog_dinf()
    cone = embed_cone(gog)
    special = to_special_hnn(cone)
    pairs = []
    for letter in gog.generator_letters():
        g = gog.reduce([letter])
        pairs.append((g, special.map_word(cone.map_word(g))))
    size, injective = ball_map_check(gog, special.hnn, pairs, 3)
    assert injective and size > 1


# -- mod-p series -----------------------------------------------------------------------------


def _fold_oracle(rank, p):
    target = elementary_abelian(p, rank)
    images = [p ** (rank - 1 - k) for k in range(rank)]
    _, basis = schreier_kernel_basis(rank, images, target)
    return fold_subgroup_graph(basis), basis


def _oracle_verdicts(graph, p, w):
    wit = member_and_rewrite(graph, w)
    if wit is None:
        return False, False
    counts = {}
    for s, e in wit:
        counts[s] = counts.get(s, 0) + e
    return True, all(c % p == 0 for c in counts.values())


def test_series_membership_matches_folding_oracle():
    rng = random.Random(61)
    p = 2
    for rank in (1, 2, 3):
        graph, basis = _fold_oracle(rank, p)
        series = ModPSeries(rank, p)
        words = []
        for _ in range(40):
            words.append(
                tuple(
                    (rng.randrange(rank), rng.choice((1, -1)))
                    for _ in range(rng.randrange(8))
                )
            )
        for _ in range(25):
            w = ()
            for _ in range(rng.randrange(1, 5)):
                g = basis[rng.randrange(len(basis))]
                w = word_mul(w, g if rng.random() < 0.5 else word_pow(g, -1))
            words.append(w)
        for _ in range(15):
            u = basis[rng.randrange(len(basis))]
            v = basis[rng.randrange(len(basis))]
            w = word_mul(u, v, word_pow(u, -1), word_pow(v, -1))
            if rng.random() < 0.5:
                w = word_mul(w, word_pow(basis[rng.randrange(len(basis))], p))
            words.append(w)
        for w in words:
            in1, in2 = _oracle_verdicts(graph, p, w)
            assert series.in_level(w, 1) == in1
            assert series.in_level(w, 2) == in2


def test_series_depth_of_identity_is_rejected():
    with pytest.raises(TrivialGenerator):
        ModPSeries(2, 2).depth_below(())


def test_series_depth_counts_power_layers():
    series = ModPSeries(1, 2)
    assert series.depth_below(A) == 0
    assert series.depth_below(word_pow(A, 2)) == 1
    assert series.depth_below(word_pow(A, 4)) == 2
    assert series.depth_below(word_pow(A, 6)) == 1


# -- separating quotients ---------------------------------------------------------------------


def test_quotient_for_base_only_set_is_the_base():
    hnn = hnn_c2_central()
    sep = p_separating_quotient(hnn, [hnn.from_base(0), hnn.from_base(1)], 2)
    assert sep.level == 0
    assert sep.group.order == 2


def test_quotient_separates_conjugate_pairs_at_level_one():
    hnn = hnn_c2_free()
    sep = p_separating_quotient(hnn, special_s_set(hnn), 2)
    assert sep.level == 1
    assert sep.group.order == 8


def test_quotient_image_is_a_homomorphism():
    rng = random.Random(67)
    hnn = hnn_c2_free()
    sep = p_separating_quotient(hnn, special_s_set(hnn), 2)
    from helpers import random_hnn_word

    for _ in range(80):
        u = random_hnn_word(rng, hnn, 8)
        v = random_hnn_word(rng, hnn, 8)
        assert sep.image(hnn.mul(u, v)) == sep.group.mul(sep.image(u), sep.image(v))


def test_quotient_is_injective_on_the_marked_set():
    for hnn in (hnn_c2_free(), hnn_c2_central()):
        s_set = special_s_set(hnn)
        sep = p_separating_quotient(hnn, s_set, 2)
        images = [sep.image(s) for s in s_set]
        assert len(set(images)) == len(images)


def test_quotient_rejects_duplicate_marked_elements():
    hnn = hnn_c2_free()
    with pytest.raises(HypothesisViolated):
        p_separating_quotient(hnn, [hnn.identity, hnn.from_base(0)], 2)


def test_quotient_handles_a_twisting_loop():
    # The cone quotient of the twisted loop is nonabelian, so the
    # base-translation of the enumerated action must respect products.
    special = to_special_hnn(embed_cone(gog_twist()))
    sep = p_separating_quotient(special.hnn, special_s_set(special.hnn), 2)
    c = sep.group
    assert any(c.mul(a, b) != c.mul(b, a) for a in c.elements() for b in c.elements())
    assert sep.onto_base.is_surjective()


# -- power trick -------------------------------------------------------------------------------


def test_exponent_one_for_a_conjugate_pair():
    assert pingpong_exponent([A, word_mul(B, A, word_pow(B, -1))]) == 1


def test_exponent_one_for_a_single_word():
    assert pingpong_exponent([A]) == 1


def test_exponent_rejects_commuting_words():
    with pytest.raises(HypothesisViolated):
        pingpong_exponent([A, word_pow(A, 2)])


def test_exponent_rejects_trivial_words():
    with pytest.raises(TrivialGenerator):
        pingpong_exponent([A, ()])


def test_exponent_two_for_the_redundant_triple():
    family = [A, B, word_mul(A, B)]
    assert not is_free_basis(family)
    n = pingpong_exponent(family)
    assert n == 2
    assert is_free_basis([word_pow(v, n) for v in family])


def test_exponent_budget_is_enforced():
    family = [A, B, word_mul(A, B)]
    with pytest.raises(BudgetExceeded):
        pingpong_exponent(family, exponent_cap=1)


# -- single-letter stage -----------------------------------------------------------------------


def test_single_stage_is_identity_like_when_the_subgroup_is_full():
    hnn = hnn_c2_central()
    sep = p_separating_quotient(hnn, special_s_set(hnn), 2)
    single = embed_single_hnn(hnn, sep)
    assert single.exponent == 1
    assert single.hnn.base.order == 2
    assert single.map_word(hnn.letter("t")) == single.hnn.letter("t")


def test_single_stage_letter_centralizes_the_subgroup_image():
    hnn = hnn_c2_central()
    sep = p_separating_quotient(hnn, special_s_set(hnn), 2)
    single = embed_single_hnn(hnn, sep)
    t_img = single.map_word(hnn.letter("t"))
    for b in hnn.subgroups[0].elems:
        b_img = single.map_word(hnn.from_base(b))
        assert single.hnn.mul(t_img, b_img) == single.hnn.mul(b_img, t_img)


def test_single_stage_embeds_the_free_product_case():
    hnn = hnn_c2_free()
    sep = p_separating_quotient(hnn, special_s_set(hnn), 2)
    single = embed_single_hnn(hnn, sep)
    assert single.hnn.base.order == 8
    assert len(single.hnn.names) == 1
    pairs = [
        (hnn.from_base(1), single.map_word(hnn.from_base(1))),
        (hnn.letter("t"), single.map_word(hnn.letter("t"))),
    ]
    size, injective = ball_map_check(hnn, single.hnn, pairs, 3)
    assert injective and size > 1


# -- double stage -------------------------------------------------------------------------------


def test_double_stage_of_the_direct_product_case():
    stage = embed_double(hnn_c2_central(), 2)
    assert stage.exponent == 1
    assert stage.double.group.order == 4
    assert stage.double.amalgam.order == 2
    src = hnn_c2_central()
    assert stage.map_word(src.letter("t")) == stage.h
    assert stage.map_word(src.from_base(1)) == stage.double.from_side(0, stage.lift(1))


def test_double_stage_of_the_free_product_case():
    stage = embed_double(hnn_c2_free(), 2)
    assert stage.double.group.order == 4
    assert stage.double.amalgam.order == 1
    src = hnn_c2_free()
    pairs = [
        (src.from_base(1), stage.map_word(src.from_base(1))),
        (src.letter("t"), stage.map_word(src.letter("t"))),
    ]
    size, injective = ball_map_check(src, stage.double, pairs, 3)
    assert injective and size > 1


def test_double_stage_needs_one_stable_letter():
    from helpers import hnn_c2_two_letters

    with pytest.raises(HypothesisViolated):
        embed_double(hnn_c2_two_letters(), 2)


def test_double_stage_mirror_element_has_infinite_order():
    stage = embed_double(hnn_c2_free(), 2)
    dbl = stage.double
    lengths = [dbl.pow(stage.h, k).length() for k in range(1, 6)]
    assert lengths == sorted(lengths) and len(set(lengths)) == len(lengths)


# -- end-to-end ---------------------------------------------------------------------------------


def test_full_chain_on_the_trivial_group():
    gog = GraphOfGroups({"v": trivial_group()}, [])
    dbl, cert = embed_vfree_to_double(gog, 2)
    assert dbl.group.order == 2
    assert cert.ball_size == 1
    ok, diags = verify_embedding_cert(cert.to_data())
    assert ok, diags


def test_full_chain_on_z():
    gog = gog_z()
    dbl, cert = embed_vfree_to_double(gog, 2)
    assert dbl.group.order == 2
    assert cert.ball_size == 7
    img = cert.map_form(gog.reduce([("t", "t", 1)]))
    lengths = [dbl.pow(img, k).length() for k in range(1, 6)]
    assert lengths == sorted(lengths) and len(set(lengths)) == len(lengths)
    ok, diags = verify_embedding_cert(cert.to_data())
    assert ok, diags


def test_full_chain_on_the_dihedral_example():
    dbl, cert = embed_vfree_to_double(gog_dinf(), 2)
    assert dbl.group.order == 16
    assert dbl.amalgam.order == 2
    assert cert.ball_size == 6
    assert verify_embedding_ball(cert, 3)
    ok, diags = verify_embedding_cert(cert.to_data())
    assert ok, diags


def test_full_chain_on_the_amalgam_and_the_twist():
    for build, c_order in ((gog_c4_amalg, 32), (gog_twist, 64)):
        dbl, cert = embed_vfree_to_double(build(), 2)
        assert dbl.group.order == c_order
        ok, diags = verify_embedding_cert(cert.to_data())
        assert ok, diags


def test_full_chain_reports_budget_blowups():
    # The free product with a C3 factor needs a second series level whose
    # rank puts the abelianization past the order cap; that is reported as
    # a budget failure, not silent work.
    with pytest.raises(BudgetExceeded):
        embed_vfree_to_double(gog_c2_c3(), 2)


def test_partial_stage_certificates_verify():
    for stage in ("cone", "special", "single", "double"):
        cert = embedding_certificate(gog_dinf(), 2, stage=stage)
        ok, diags = verify_embedding_cert(cert.to_data())
        assert ok, (stage, diags)


def test_chain_maps_stay_injective_on_random_words():
    rng = random.Random(71)
    gog = gog_dinf()
    _, cert = embed_vfree_to_double(gog, 2)
    seen = {}
    for _ in range(120):
        w = random_gog_word(rng, gog, 6)
        im = cert.map_form(w)
        if w in seen:
            assert seen[w] == im
        else:
            for w2, im2 in seen.items():
                assert (im2 == im) == (w2 == w)
            seen[w] = im


# -- ball utilities -------------------------------------------------------------------------------


def test_ball_counts_on_the_line_groups():
    for r in range(4):
        assert len(bounded_normal_forms(gog_z(), r)) == 2 * r + 1
    assert len(bounded_normal_forms(gog_dinf(), 0)) == 2
    assert len(bounded_normal_forms(gog_dinf(), 2)) == 6
    assert len(bounded_normal_forms(gog_dinf(), 4)) == 10


def test_ball_enumeration_cap():
    with pytest.raises(BallTooLarge):
        bounded_normal_forms(gog_c4_amalg(), 40, cap=50)


def test_ball_map_check_flags_ill_defined_maps():
    c2gog = GraphOfGroups({"v": __import__("vfretract").cyclic_group(2)}, [])
    z = gog_z()
    pairs = [(c2gog.reduce([("v", "v", 1)]), z.reduce([("t", "t", 1)]))]
    with pytest.raises(HypothesisViolated):
        ball_map_check(c2gog, z, pairs, 2)


def test_verify_ball_radius_zero_is_vacuous():
    cert = embedding_certificate(gog_dinf(), 2, stage="cone", ball_radius=1)
    assert verify_embedding_ball(cert, 0)


# -- certificate serialization and tampering -------------------------------------------------------


def test_certificate_round_trips_through_json_data():
    import json

    _, cert = embed_vfree_to_double(gog_dinf(), 2)
    data = json.loads(json.dumps(cert.to_data(), sort_keys=True))
    rebuilt = embedding_cert_from_data(data)
    assert rebuilt.to_data() == cert.to_data()
    gog = rebuilt.source
    w = gog.reduce([("v", "l", 1), ("v", "r", 1)])
    assert rebuilt.map_form(w) == cert.map_form(gog.reduce([("v", "l", 1), ("v", "r", 1)]))


def test_presentation_relations_hold_in_the_source():
    for build in (gog_dinf, gog_c4_amalg, gog_twist):
        gog = build()
        letters, relations = presentation_relations(gog)
        for rel in relations:
            parts = [gog.identity]
            for i, e in rel:
                g = gog.reduce([letters[i]])
                parts.append(g if e == 1 else gog.inv(g))
            assert gog.mul(*parts) == gog.identity


def _tampered(base, mutate):
    data = copy.deepcopy(base)
    mutate(data)
    return data


def test_tampered_certificates_are_rejected():
    import json

    _, cert = embed_vfree_to_double(gog_dinf(), 2)
    base = json.loads(json.dumps(cert.to_data()))
    ok, diags = verify_embedding_cert(copy.deepcopy(base))
    assert ok and not diags

    tampers = {
        "blanked image": lambda d: d["images"].__setitem__(0, []),
        "ball size off by one": lambda d: d.__setitem__(
            "ball_size", d["ball_size"] + 1
        ),
        "dropped relation": lambda d: d.__setitem__("relations", d["relations"][1:]),
        "chain prime flipped": lambda d: d["chain"][2].__setitem__("prime", 3),
        "letters permuted": lambda d: d.__setitem__(
            "letters", [d["letters"][1], d["letters"][0]] + d["letters"][2:]
        ),
    }
    for label, mutate in tampers.items():
        ok, diags = verify_embedding_cert(_tampered(base, mutate))
        assert not ok and diags, label
