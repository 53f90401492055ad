import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import all_vertices, brute_vertex_action, random_element
from treegroup import DomainError
from treegroup.treealg import (PermGroupSpec, TreeAutomorphism, all_elements, apply, commutator,
                               compose, conjugate, element_order, element_order_exponent,
                               extend, from_json, from_leaf_action, index_to_position, inverse,
                               leaf_action, level_offsets, p_valuation, perm_rank, power,
                               to_json, truncate, vertex_from_index, vertex_from_position,
                               vertex_index, vertex_position)
from treegroup.zoo import adding_machine


def test_group_specs():
    c3 = PermGroupSpec.cyclic(3)
    assert c3.order == 3 and c3.prime == 3
    assert c3.elements[1] == (1, 2, 0)
    s3 = PermGroupSpec.symmetric(3)
    assert s3.order == 6 and s3.prime is None
    assert PermGroupSpec.parse("S3") == s3
    assert PermGroupSpec.parse("cyclic:5").order == 5
    with pytest.raises(DomainError):
        PermGroupSpec.cyclic(4)
    with pytest.raises(DomainError):
        PermGroupSpec.explicit([(0, 1, 2), (1, 0, 2), (1, 2, 0)])   # not closed


def test_group_json_round_trip():
    for H in (PermGroupSpec.cyclic(5), PermGroupSpec.symmetric(3),
              PermGroupSpec.explicit([(0, 1, 2, 3), (1, 0, 3, 2)])):
        assert PermGroupSpec.from_json(json.loads(json.dumps(H.to_json()))) == H


def test_multiplication_table_is_left_then_right():
    H = PermGroupSpec.symmetric(3)
    for a in range(6):
        for b in range(6):
            ab = H.mult[a, b]
            for x in range(3):
                assert H.act[ab][x] == H.act[b][H.act[a][x]]


def test_perm_rank():
    assert perm_rank(PermGroupSpec.symmetric(3)) == 2
    assert perm_rank(PermGroupSpec.cyclic(2)) == 2
    for p in (3, 5, 7):
        assert perm_rank(PermGroupSpec.cyclic(p)) == p


def test_p_valuation():
    assert p_valuation(48, 2) == 4
    assert p_valuation(48, 3) == 1
    assert p_valuation(7, 2) == 0


def test_vertex_indexing():
    d = 3
    assert level_offsets(d, 3) == [0, 1, 4, 13]
    for level in range(4):
        for pos in range(d**level):
            v = vertex_from_position(pos, level, d)
            assert vertex_position(v, d) == pos
            assert vertex_from_index(vertex_index(v, d), level, d) == v
    # first digit least significant for N(v)
    assert vertex_index((1, 0, 0), 2) == 1
    assert vertex_index((0, 0, 1), 2) == 4
    perm = index_to_position(3, 2)
    assert sorted(perm.tolist()) == list(range(8))
    assert vertex_from_position(int(perm[1]), 3, 2) == (1, 0, 0)


def test_trivial_group_d1():
    H = PermGroupSpec.trivial()
    g = TreeAutomorphism.identity(H, 5)
    assert g.labels.size == 5
    assert apply(g, (0, 0, 0)) == (0, 0, 0)


def test_apply_examples():
    C2 = PermGroupSpec.cyclic(2)
    e = TreeAutomorphism.identity(C2, 2)
    assert apply(e, (1, 0)) == (1, 0)
    s = adding_machine(2, 3)
    assert apply(s, (0, 0, 0)) == (1, 0, 0)
    assert apply(s, (1, 1, 0)) == (0, 0, 1)
    with pytest.raises(DomainError):
        apply(s, (0, 0, 0, 0))


def test_apply_matches_portrait_walk(rng):
    H = PermGroupSpec.symmetric(3)
    g = random_element(H, 3, rng)
    for level in range(4):
        for v in all_vertices(3, level):
            assert apply(g, v) == brute_vertex_action(g, v)


def test_compose_action_homomorphism(rng):
    for H in (PermGroupSpec.cyclic(2), PermGroupSpec.cyclic(3), PermGroupSpec.symmetric(3)):
        for _ in range(30):
            g, h = random_element(H, 3, rng), random_element(H, 3, rng)
            gh = compose(g, h)
            v = tuple(int(x) for x in rng.integers(0, H.degree, size=3))
            assert apply(gh, v) == apply(h, apply(g, v))


def test_compose_label_rule(rng):
    H = PermGroupSpec.symmetric(3)
    g, h = random_element(H, 2, rng), random_element(H, 2, rng)
    gh = compose(g, h)
    for level in range(2):
        for v in all_vertices(3, level):
            pos = vertex_position(v, 3)
            img = vertex_position(apply(g, v), 3)
            expected = H.mult[g.level_labels(level)[pos], h.level_labels(level)[img]]
            assert gh.level_labels(level)[pos] == expected


def test_adding_machine_squared():
    s = adding_machine(2, 3)
    s2 = compose(s, s)
    for v in all_vertices(2, 3):
        assert vertex_index(apply(s2, v), 2) == (vertex_index(v, 2) + 2) % 8


def test_group_axioms(rng):
    H = PermGroupSpec.cyclic(3)
    a, b, c = (random_element(H, 3, rng) for _ in range(3))
    e = TreeAutomorphism.identity(H, 3)
    assert compose(compose(a, b), c) == compose(a, compose(b, c))
    assert compose(a, e) == a == compose(e, a)
    assert compose(a, inverse(a)) == e
    assert power(a, 0) == e
    assert power(a, 3) == compose(compose(a, a), a)
    assert power(a, -2) == inverse(compose(a, a))
    assert a * b == compose(a, b) and ~a == inverse(a) and a**2 == compose(a, a)


def test_conjugate_and_commutator(rng):
    H = PermGroupSpec.cyclic(2)
    g, x = random_element(H, 3, rng), random_element(H, 3, rng)
    assert conjugate(g, x) == inverse(x) * g * x
    assert commutator(g, x) == inverse(g) * inverse(x) * g * x
    assert commutator(g, g).is_identity()


def test_adding_machine_order():
    for p, n in ((2, 5), (3, 3)):
        s = adding_machine(p, n)
        assert power(s, p**n).is_identity()
        assert not power(s, p ** (n - 1)).is_identity()
        assert element_order_exponent(s) == n


def test_truncation_is_homomorphism(rng):
    H = PermGroupSpec.cyclic(2)
    g, h = random_element(H, 5, rng), random_element(H, 5, rng)
    for level in range(6):
        assert truncate(compose(g, h), level) == compose(truncate(g, level), truncate(h, level))
    assert truncate(extend(g, 7), 5) == g


def test_leaf_action_round_trip(rng):
    H = PermGroupSpec.symmetric(3)
    g = random_element(H, 3, rng)
    assert from_leaf_action(H, 3, leaf_action(g)) == g
    with pytest.raises(DomainError):
        from_leaf_action(H, 2, np.roll(np.arange(9), 1)[::-1].copy())


def test_order_exponent_exhaustive_gamma3():
    C2 = PermGroupSpec.cyclic(2)
    e = TreeAutomorphism.identity(C2, 3)
    elems = all_elements(C2, 3)
    assert len(elems) == 128
    for g in elems:
        k = 0
        while not power(g, 2**k) == e:
            k += 1
        assert element_order_exponent(g) == k
        assert element_order(g) == 2**k


def test_order_exponent_gamma4_sample(rng):
    C2 = PermGroupSpec.cyclic(2)
    for _ in range(500):
        g = random_element(C2, 4, rng)
        k = 0
        while not power(g, 2**k).is_identity():
            k += 1
        assert element_order_exponent(g) == k


def test_order_sym3():
    H = PermGroupSpec.symmetric(3)
    g = TreeAutomorphism(H, 1, [H.index[(1, 2, 0)]])
    assert element_order(g) == 3
    assert element_order_exponent(g, 3) == 1
    assert element_order_exponent(g, 2) == 0


def test_json_round_trip(rng):
    for H in (PermGroupSpec.cyclic(3), PermGroupSpec.explicit([(0, 1, 2, 3), (1, 0, 3, 2)])):
        g = random_element(H, 3, rng)
        obj = json.loads(json.dumps(to_json(g)))
        assert set(obj) >= {"d", "p_kind", "depth", "labels"}
        assert from_json(obj) == g


def test_depth_zero_identity(C2):
    e = TreeAutomorphism.identity(C2, 0)
    assert e.labels.size == 0 and e.is_identity()
    assert compose(e, e) == e
    assert element_order(e) == 1


def test_bad_labels(C2):
    with pytest.raises(DomainError):
        TreeAutomorphism(C2, 2, [0, 0])
    with pytest.raises(DomainError):
        TreeAutomorphism(C2, 1, [2])
    with pytest.raises(DomainError):
        compose(TreeAutomorphism.identity(C2, 2), TreeAutomorphism.identity(C2, 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(-20, 20), st.integers(-20, 20))
def test_power_additive(seed, a, b):
    rng = np.random.default_rng(seed)
    g = random_element(PermGroupSpec.cyclic(2), 4, rng)
    assert compose(power(g, a), power(g, b)) == power(g, a + b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_inverse_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    H = PermGroupSpec.symmetric(3)
    g = random_element(H, 3, rng)
    v = tuple(int(x) for x in rng.integers(0, 3, size=3))
    assert apply(inverse(g), apply(g, v)) == v
