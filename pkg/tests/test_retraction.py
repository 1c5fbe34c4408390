"""Virtual retractions on doubles: the subgroup oracle, the invariant
subtree, inversion reduction, the certificate, and the composite chain."""

import copy
import json
import random

import pytest

from vfretract import NotRetractive
from vfretract.retraction import (
    SubgroupOracle,
    cert_from_data,
    invariant_subtree,
    lr_for_vfree,
    membership_H,
    membership_NH,
    nh_reduce,
    nh_residue,
    verify_certificate,
    verify_lr_certificate,
    vertex_in_subtree,
    virtual_retraction,
)

from helpers import double_c2, double_c4_over_c2, gog_dinf, gog_z


def _gens(dbl):
    return dbl.from_side(0, 1), dbl.from_side(1, 1)


# -- membership in H ---------------------------------------------------------------


def test_membership_in_one_sided_reflection_subgroup():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    assert membership_H(dbl, [cl], cl) == ((0, 1),)
    assert membership_H(dbl, [cl], dbl.identity) == ()
    assert membership_H(dbl, [cl], cr) is None
    assert membership_H(dbl, [cl], dbl.mul(cl, cr)) is None


def test_membership_in_the_translation_subgroup():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    tr = dbl.mul(cl, cr)
    oracle = SubgroupOracle(dbl, [tr])
    cube = dbl.mul(tr, tr, tr)
    wit = oracle.member(cube)
    assert wit is not None
    assert oracle.element(wit) == cube
    assert oracle.member(cl) is None
    assert oracle.member(dbl.inv(tr)) is not None


def test_membership_witnesses_expand_to_their_elements():
    rng = random.Random(83)
    dbl = double_c4_over_c2()
    gens = [dbl.mul(dbl.from_side(0, 1), dbl.from_side(1, 1)), dbl.from_side(0, 2)]
    oracle = SubgroupOracle(dbl, gens)
    hits = 0
    for _ in range(40):
        wit = tuple(
            (rng.randrange(len(gens)), rng.choice((1, -1)))
            for _ in range(rng.randrange(6))
        )
        g = oracle.element(wit)
        back = oracle.member(g)
        assert back is not None
        assert oracle.element(back) == g
        hits += 1
    assert hits == 40


# -- the invariant subtree -----------------------------------------------------------


def test_subtree_for_one_reflection_is_a_single_orbit():
    dbl = double_c2()
    cl, _ = _gens(dbl)
    sub = invariant_subtree(dbl, [cl])
    assert sub.core_vertices == (dbl.root,)
    assert sub.core_edges == ()
    # both tree edges at the root leave U, and the reflection identifies them
    assert len(sub.boundary) == 2
    assert len(sub.boundary_reps) == 1


def test_subtree_for_the_translation_has_no_boundary():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    tr = dbl.mul(cl, cr)
    oracle = SubgroupOracle(dbl, [tr])
    sub = invariant_subtree(dbl, [tr], oracle)
    assert len(sub.core_vertices) == 2
    assert len(sub.core_edges) == 2
    assert sub.boundary == ()
    assert sub.boundary_reps == ()
    # the translation axis through the base stays inside U
    for v in dbl.geodesic(dbl.root, dbl.act_vertex(dbl.ext(tr), dbl.root)):
        assert vertex_in_subtree(dbl, oracle, sub, v)


def test_subtree_for_the_whole_group_has_no_boundary():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    sub = invariant_subtree(dbl, [cl, cr])
    assert len(sub.core_vertices) == 2
    assert sub.boundary == ()


# -- reduction by edge inversions ------------------------------------------------------


def test_swap_reduces_to_the_identity_through_the_middle_edge():
    dbl = double_c2()
    cl, _ = _gens(dbl)
    oracle = SubgroupOracle(dbl, [cl])
    sub = invariant_subtree(dbl, [cl], oracle)
    r, log = nh_reduce(dbl, sub, oracle, dbl.swap)
    assert r.flip == 0 and r.g == dbl.identity
    assert log == [dbl.identity]


def test_swap_is_in_nh_only_when_the_boundary_provides_it():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    assert membership_NH(dbl, invariant_subtree(dbl, [cl]), [cl], dbl.swap)
    tr = dbl.mul(cl, cr)
    assert not membership_NH(dbl, invariant_subtree(dbl, [tr]), [tr], dbl.swap)


def test_mirror_product_lies_in_nh_for_one_reflection():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    sub = invariant_subtree(dbl, [cl])
    assert membership_NH(dbl, sub, [cl], dbl.ext(dbl.mul(cl, cr)))


def test_nh_membership_is_a_left_coset_invariant():
    rng = random.Random(97)
    dbl = double_c2()
    cl, cr = _gens(dbl)
    oracle = SubgroupOracle(dbl, [cl])
    sub = invariant_subtree(dbl, [cl], oracle)
    inversions = [dbl.edge_inversion(z) for z, _ in sub.boundary]
    for _ in range(40):
        g = dbl.ext_identity
        for _ in range(rng.randrange(5)):
            g = dbl.ext_mul(g, dbl.ext(rng.choice((cl, cr))))
        if rng.random() < 0.5:
            g = dbl.ext_mul(g, dbl.swap)
        verdict = membership_NH(dbl, sub, [cl], g, oracle)
        assert membership_NH(dbl, sub, [cl], dbl.ext_mul(dbl.ext(cl), g), oracle) == verdict
        for inv in inversions:
            assert membership_NH(dbl, sub, [cl], dbl.ext_mul(inv, g), oracle) == verdict


def test_h_elements_reduce_with_an_empty_log():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    tr = dbl.mul(cl, cr)
    oracle = SubgroupOracle(dbl, [tr])
    sub = invariant_subtree(dbl, [tr], oracle)
    res = nh_residue(dbl, sub, oracle, dbl.ext(dbl.mul(tr, tr)))
    assert res is not None
    g, wit, log = res
    assert log == [] and g == dbl.mul(tr, tr)
    assert oracle.element(wit) == g


def test_inversion_products_stay_outside_h():
    # alternating products of the two boundary inversions are translations
    # in N, so they never meet H beyond the identity
    dbl = double_c2()
    cl, _ = _gens(dbl)
    oracle = SubgroupOracle(dbl, [cl])
    sub = invariant_subtree(dbl, [cl], oracle)
    edges = [z for z, _ in sub.boundary]
    assert len(edges) == 2
    for start in (0, 1):
        for length in (2, 4, 6):
            acc = dbl.ext_identity
            for k in range(length):
                acc = dbl.ext_mul(acc, dbl.edge_inversion(edges[(start + k) % 2]))
            assert acc.flip == 0
            assert acc.g != dbl.identity
            assert oracle.member(acc.g) is None
            moved = dbl.act_vertex(acc, sub.base)
            assert not vertex_in_subtree(dbl, oracle, sub, moved)


# -- the retraction certificate ----------------------------------------------------------


INDEX_TABLE = [
    (("L",), 1, 1, 1),
    (("R",), 3, 2, 3),
    (("LR",), 2, 2, 4),
    (("LRL",), 3, 2, 3),
    (("L", "R"), 1, 2, 2),
]


def _word(dbl, spec):
    cl, cr = _gens(dbl)
    return dbl.mul(*[dbl.identity] + [cl if ch == "L" else cr for ch in spec])


def test_certificate_index_table_for_the_infinite_dihedral_double():
    dbl = double_c2()
    for specs, index, k, nh in INDEX_TABLE:
        cert = virtual_retraction(dbl, [_word(dbl, s) for s in specs])
        assert (cert.index, cert.k_orbits, cert.nh_index) == (index, k, nh), specs
        assert cert.nh_bound == k * dbl.group.order
        assert cert.nh_index <= cert.nh_bound


def test_one_reflection_retracts_the_whole_group():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    cert = virtual_retraction(dbl, [cl])
    assert cert.index == 1
    assert cert.retract(cr) == cl
    assert cert.retract(dbl.mul(cl, cr)) == dbl.identity
    assert cert.retract(cl) == cl


def test_translation_subgroup_gets_the_identity_retraction():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    tr = dbl.mul(cl, cr)
    cert = virtual_retraction(dbl, [tr])
    assert cert.index == 2
    for k in (1, 2, 3):
        w = dbl.pow(tr, k)
        assert cert.member(w)
        assert cert.retract(w) == w
    assert not cert.member(cl)
    with pytest.raises(NotRetractive):
        cert.retract(cl)


def test_retraction_is_idempotent_and_lands_in_h():
    rng = random.Random(89)
    dbl = double_c2()
    cl, cr = _gens(dbl)
    cert = virtual_retraction(dbl, [cr])
    oracle = SubgroupOracle(dbl, [cr])
    checked = 0
    for _ in range(120):
        w = dbl.identity
        for _ in range(rng.randrange(1, 7)):
            w = dbl.mul(w, rng.choice((cl, cr)))
        if not cert.member(w):
            continue
        r = cert.retract(w)
        assert cert.retract(r) == r
        assert oracle.member(r) is not None
        checked += 1
    assert checked > 20


def test_retract_witnesses_expand_over_the_h_generators():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    tr = dbl.mul(cl, cr)
    cert = virtual_retraction(dbl, [tr])
    oracle = SubgroupOracle(dbl, [tr])
    w = dbl.pow(tr, 3)
    wit = cert.retract_witness(w)
    assert oracle.element(wit) == cert.retract(w)


def test_certificate_round_trips_through_json():
    dbl = double_c2()
    _, cr = _gens(dbl)
    cert = virtual_retraction(dbl, [cr])
    data = json.loads(json.dumps(cert.to_data(), sort_keys=True))
    rebuilt = cert_from_data(data)
    assert rebuilt.to_data() == cert.to_data()
    assert rebuilt.retract(dbl.mul(cr, cr)) == cert.retract(dbl.mul(cr, cr))


def test_fresh_certificates_verify():
    dbl = double_c2()
    cl, cr = _gens(dbl)
    for gens in ([cl], [cr], [dbl.mul(cl, cr)]):
        ok, diags = verify_certificate(virtual_retraction(dbl, gens).to_data())
        assert ok, diags


def _tampered(base, mutate):
    data = copy.deepcopy(base)
    mutate(data)
    return data


def test_tampered_retraction_certificates_are_rejected():
    dbl = double_c2()
    _, cr = _gens(dbl)
    base = json.loads(json.dumps(virtual_retraction(dbl, [cr]).to_data()))
    ok, diags = verify_certificate(copy.deepcopy(base))
    assert ok and not diags

    tampers = {
        "index off by one": lambda d: d.__setitem__("index", d["index"] + 1),
        "schreier image replaced": lambda d: d["schreier"][0].__setitem__(
            2, [[0, 1]] if d["schreier"][0][2] != [[0, 1]] else [[1, 1]]
        ),
        "nh index off by one": lambda d: d.__setitem__(
            "nh_index", d["nh_index"] + 1
        ),
        "boundary entry dropped": lambda d: d["subtree"].__setitem__(
            "boundary", d["subtree"]["boundary"][1:]
        ),
        "coset representative duplicated": lambda d: d["coset_reps"].__setitem__(
            1, d["coset_reps"][0]
        ),
        "letters reordered": lambda d: d.__setitem__(
            "letters", [d["letters"][1], d["letters"][0]] + d["letters"][2:]
        ),
    }
    for label, mutate in tampers.items():
        ok, diags = verify_certificate(_tampered(base, mutate))
        assert not ok and diags, label


# -- the composite chain for graph-of-groups inputs ------------------------------------------


def test_composite_retraction_onto_an_index_two_subgroup_of_z():
    gog = gog_z()
    t = gog.reduce([("t", "t", 1)])
    cert = lr_for_vfree(gog, [gog.mul(t, t)], 2)
    assert cert.letters_kept == ("t",)
    assert cert.final_index == 2
    assert cert.member(gog.mul(t, t)) and not cert.member(t)
    sq = gog.mul(t, t)
    assert cert.retract(sq) == sq
    assert cert.retract(gog.mul(sq, sq)) == gog.mul(sq, sq)
    ok, diags = verify_lr_certificate(json.loads(json.dumps(cert.to_data())))
    assert ok, diags


def test_composite_retraction_onto_a_vertex_reflection():
    gog = gog_dinf()
    c = gog.reduce([("v", "l", 1)])
    cert = lr_for_vfree(gog, [c], 2)
    assert cert.letters_kept == ()
    assert cert.final_index == 1
    assert cert.retract(c) == c
    # the other reflection folds onto this one, as in the double itself
    other = gog.reduce([("v", "r", 1)])
    assert cert.retract(other) == c
    ok, diags = verify_lr_certificate(json.loads(json.dumps(cert.to_data())))
    assert ok, diags


def test_composite_retraction_onto_the_whole_dihedral_group():
    gog = gog_dinf()
    gens = [gog.reduce([("v", "l", 1)]), gog.reduce([("v", "r", 1)])]
    cert = lr_for_vfree(gog, gens, 2)
    assert cert.final_index == 1
    for h in gens:
        assert cert.retract(h) == h
    w = gog.mul(gens[0], gens[1], gens[0])
    assert cert.member(w) and cert.retract(w) == w


def test_tampered_composite_certificates_are_rejected():
    gog = gog_z()
    t = gog.reduce([("t", "t", 1)])
    base = json.loads(json.dumps(lr_for_vfree(gog, [gog.mul(t, t)], 2).to_data()))
    ok, diags = verify_lr_certificate(copy.deepcopy(base))
    assert ok and not diags

    tampers = {
        "prime flipped": lambda d: d.__setitem__("prime", 3),
        "final index off by one": lambda d: d.__setitem__(
            "final_index", d["final_index"] + 1
        ),
        "kept letters blanked": lambda d: d.__setitem__("letters_kept", []),
        "inner index off by one": lambda d: d["inner"].__setitem__(
            "index", d["inner"]["index"] + 1
        ),
    }
    for label, mutate in tampers.items():
        ok, diags = verify_lr_certificate(_tampered(base, mutate))
        assert not ok and diags, label
