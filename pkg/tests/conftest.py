import itertools

import numpy as np
import pytest

from treegroup.treealg import PermGroupSpec, TreeAutomorphism, leaf_action


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def C2():
    return PermGroupSpec.cyclic(2)


def random_element(H, depth, rng):
    size = (H.degree**depth - 1) // (H.degree - 1) if H.degree > 1 else depth
    return TreeAutomorphism(H, depth, rng.integers(0, H.order, size=size))


def closure(perms):
    perms = [tuple(int(x) for x in p) for p in perms]
    ident = tuple(range(len(perms[0])))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for a in frontier:
            for g in perms:
                b = tuple(g[i] for i in a)
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        frontier = nxt
    return seen


def closure_size(perms):
    return len(closure(perms))


def perm_of(g):
    return tuple(int(x) for x in leaf_action(g))


def brute_vertex_action(g, v):
    """Apply g to a vertex by walking the portrait label by label."""
    d = g.arity
    out = []
    pos = 0
    for level, x in enumerate(v):
        label = g.level_labels(level)[pos]
        out.append(int(g.group.act[label][x]))
        pos = pos * d + x
    return tuple(out)


def all_vertices(d, level):
    return list(itertools.product(range(d), repeat=level))
