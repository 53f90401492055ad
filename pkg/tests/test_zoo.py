import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from treegroup import DomainError
from treegroup.grouplin import density_sequence
from treegroup.orbits import orbit_tree_of_element
from treegroup.treealg import (PermGroupSpec, apply, compose, power, truncate,
                               vertex_index)
from treegroup.zoo import (AutomatonElement, SubtreeSpec, adding_machine,
                           adding_machine_automaton, automaton_truncate, even_branching,
                           full_tree, grigorchuk_generators, half_tree, level_generators,
                           root_only, single_ray, subtree_measure, subtree_stabilizer_sampler)


def test_adding_machine_root_swap():
    s = adding_machine(2, 1)
    assert s.labels.tolist() == [1]


@pytest.mark.parametrize("p,depth", [(2, 8), (3, 5)])
def test_adding_machine_index_shift(p, depth):
    s = adding_machine(p, depth)
    for level in range(depth + 1):
        for v in itertools.product(range(p), repeat=level):
            assert vertex_index(apply(s, v), p) == (vertex_index(v, p) + 1) % p**level


def test_adding_machine_ray_and_order():
    for p in (2, 3):
        s = adding_machine(p, 5)
        t = orbit_tree_of_element(s)
        assert all(t.num_nodes(level) == 1 for level in range(6))
        assert power(s, p**5).is_identity() and not power(s, p**4).is_identity()


def test_identity_automaton():
    a = AutomatonElement(PermGroupSpec.cyclic(2), ("e",), {"e": 0}, {"e": ("e", "e")}, "e")
    assert automaton_truncate(a, 5).is_identity()


def test_adding_machine_automaton_agrees():
    for p in (2, 3):
        aut = adding_machine_automaton(p)
        for depth in range(11 if p == 2 else 7):
            assert automaton_truncate(aut, depth) == adding_machine(p, depth)


def test_automaton_truncations_coherent():
    aut = adding_machine_automaton(2)
    g = automaton_truncate(aut, 9)
    for m in range(9):
        assert truncate(g, m) == automaton_truncate(aut, m)


def test_grigorchuk_relations():
    gens = grigorchuk_generators(4)
    for name in "abcd":
        assert power(gens[name], 2).is_identity()
    assert compose(compose(gens["b"], gens["c"]), gens["d"]).is_identity()
    # (ad)^4 = 1 holds in the group, so in every truncation
    ad = compose(gens["a"], gens["d"])
    assert power(ad, 4).is_identity() and not power(ad, 2).is_identity()


def test_grigorchuk_coherent():
    g6 = grigorchuk_generators(6)
    g4 = grigorchuk_generators(4)
    for name in "abcd":
        assert truncate(g6[name], 4) == g4[name]


def test_grigorchuk_density_band():
    gens = list(grigorchuk_generators(10).values())
    seq = density_sequence(gens)
    for level in (8, 9, 10):
        assert 0.55 <= float(seq.gamma(level)) <= 0.70
    assert abs(float(seq.gamma(10)) - 0.625) < abs(float(seq.gamma(8)) - 0.625) + 1e-12


def test_automaton_json_round_trip():
    from treegroup.zoo import grigorchuk_automaton
    aut = grigorchuk_automaton()
    back = AutomatonElement.from_json(json.loads(json.dumps(aut.to_json())))
    assert automaton_truncate(back, 6) == automaton_truncate(aut, 6)


def test_bad_automaton():
    with pytest.raises(DomainError):
        AutomatonElement(PermGroupSpec.cyclic(2), ("e",), {"e": 0}, {"e": ("e",)}, "e")
    with pytest.raises(DomainError):
        AutomatonElement(PermGroupSpec.cyclic(2), ("e",), {"e": 5}, {"e": ("e", "e")}, "e")


def brute_subtree_sizes(spec, depth):
    """Level sizes of T' by walking the type rule vertex by vertex."""
    sizes = [1]
    frontier = [spec.root]
    for _ in range(depth):
        frontier = [k for t in frontier if spec.types[t] is not None for k in spec.types[t]]
        sizes.append(len(frontier))
    return sizes


def test_subtree_measures():
    assert subtree_measure(full_tree(), 6).limit == 1
    assert subtree_measure(single_ray(), 6).limit == 0
    assert subtree_measure(root_only(3), 3).levels == (1, 0, 0, 0)
    assert subtree_measure(half_tree(), 6).limit == Fraction(1, 2)
    assert subtree_measure(half_tree(3), 4).limit == Fraction(1, 3)


@pytest.mark.parametrize("spec", [full_tree(), single_ray(), half_tree(), even_branching(),
                                  half_tree(3), even_branching(3)])
def test_subtree_levels_by_direct_count(spec):
    m = subtree_measure(spec, 8)
    sizes = brute_subtree_sizes(spec, 8)
    assert m.levels == tuple(Fraction(s, spec.p**level) for level, s in enumerate(sizes))
    assert all(a >= b for a, b in zip(m.levels, m.levels[1:]))


def test_even_branching_limit_is_telescoped_product():
    m = subtree_measure(even_branching(), 12)
    # mu halves every second level from level 3 on, so the product telescopes to 0
    assert m.levels[12] == Fraction(1, 2**5)
    assert all(m.levels[2 * k + 1] == m.levels[2 * k] / 2 for k in range(1, 6))
    assert m.limit == 0


def test_custom_periodic_subtree_limit():
    # A branches into (A, B); B branches into (Z, Z): level sizes 1, 2, 1+2, ... stay below 2
    spec = SubtreeSpec(2, {"A": ("A", "B"), "B": ("Z", "Z"), "Z": None}, "A")
    m = subtree_measure(spec, 10)
    assert m.limit == 0
    assert brute_subtree_sizes(spec, 10)[-1] == m.levels[-1] * 2**10


def test_bad_subtree_spec():
    with pytest.raises(DomainError):
        SubtreeSpec(2, {"A": ("A",)}, "A")


def test_subtree_sampler_extremes(rng):
    for _ in range(5):
        assert subtree_stabilizer_sampler(full_tree(), 5, rng).is_identity()
    labels = np.concatenate([subtree_stabilizer_sampler(root_only(), 4, rng).labels
                             for _ in range(400)])
    assert 0.4 < labels.mean() < 0.6


@pytest.mark.parametrize("spec", [half_tree(), even_branching(), single_ray()])
def test_subtree_sampler_fixes_subtree(spec, rng):
    depth = 7
    for _ in range(10):
        g = subtree_stabilizer_sampler(spec, depth, rng)
        frontier = [((), spec.root)]
        for _ in range(depth + 1):
            nxt = []
            for v, t in frontier:
                assert apply(g, v) == v
                if spec.types[t] is not None and len(v) < depth:
                    nxt.extend((v + (c,), k) for c, k in enumerate(spec.types[t]))
            frontier = nxt


def test_subtree_density_matches_measure():
    # gamma_9 of three sampled generators, over 40 seeded triples
    gen = np.random.default_rng(21)
    values = []
    for _ in range(40):
        gens = [subtree_stabilizer_sampler(half_tree(), 9, gen) for _ in range(3)]
        values.append(float(density_sequence(gens).gamma(9)))
    values = np.array(values)
    assert (values <= 255 / 511).all()
    assert abs(np.median(values) - 0.5) < 0.05
    assert (abs(values - 0.5) < 0.05).mean() >= 0.8


def test_level_generators():
    gens = level_generators(2, 3, 5)
    assert len(gens) == 3
    from treegroup.grouplin import build_chain
    assert build_chain(gens).order_exponent == 7
    with pytest.raises(DomainError):
        level_generators(2, 6, 5)
