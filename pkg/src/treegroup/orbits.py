"""Orbit trees of tree automorphisms and of subgroups, conjugacy, tree densities.

An orbit tree is stored level by level.  At each level the orbits are sorted
by their representative (the smallest vertex position they contain), and
``parent[i]`` is the index of the orbit one level up containing the parent of
that representative.  Element orbit trees also carry the edge label of each
orbit: the set of digits ``c`` such that ``rep(parent) + (c,)`` lies in it.
For cyclic H they also keep the twist of each orbit, the rotation by which
g^m (m the orbit length) acts below the representative.  It is the one
conjugacy invariant the digit sets miss once p > 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedFeatureError
from .treealg import CYCLIC, SYMMETRIC, TreeAutomorphism, vertex_from_position


def cycle_min_labels(perm: np.ndarray) -> np.ndarray:
    """Smallest point of the cycle through each point, by pointer doubling."""
    perm = np.asarray(perm, dtype=np.int64)
    lab = np.arange(perm.size, dtype=np.int64)
    step = perm.copy()
    span = 1
    while span < perm.size:
        lab = np.minimum(lab, lab[step])
        step = step[step]
        span *= 2
    return lab


def orbit_min_labels(perms: Sequence[np.ndarray], size: int) -> np.ndarray:
    """Smallest point of the orbit of each point under the group generated by ``perms``."""
    lab = np.arange(size, dtype=np.int64)
    if not perms:
        return lab
    while True:
        old = lab
        lab = lab.copy()
        for perm in perms:
            lab = np.minimum(lab, lab[perm])
            np.minimum.at(lab, perm, lab.copy())
        while True:
            jumped = lab[lab]
            if np.array_equal(jumped, lab):
                break
            lab = jumped
        if np.array_equal(lab, old):
            return lab


@dataclass
class OrbitLevel:
    rep: np.ndarray
    size: np.ndarray
    parent: np.ndarray
    labels: list | None = None
    orbit_of: np.ndarray | None = field(default=None, repr=False)
    twist: np.ndarray | None = None    # cyclic H: label sum mod p around each orbit


@dataclass
class OrbitTree:
    d: int
    depth: int
    levels: list
    kind: str = "subgroup"
    group_kind: str | None = None

    def num_nodes(self, level: int) -> int:
        return len(self.levels[level].rep)

    def child_counts(self, level: int) -> np.ndarray:
        if level >= self.depth:
            return np.zeros(self.num_nodes(level), dtype=np.int64)
        return np.bincount(self.levels[level + 1].parent, minlength=self.num_nodes(level))

    def children(self, level: int, i: int) -> np.ndarray:
        return np.flatnonzero(self.levels[level + 1].parent == i)

    def orbit_sizes(self, level: int) -> np.ndarray:
        return self.levels[level].size

    def representative(self, level: int, i: int) -> tuple:
        return vertex_from_position(int(self.levels[level].rep[i]), level, self.d)

    def to_json(self) -> dict:
        def node(level, i):
            out = {"size": int(self.levels[level].size[i])}
            if self.levels[level].labels is not None and level > 0:
                out["label"] = list(self.levels[level].labels[i])
            if self.levels[level].twist is not None:
                out["twist"] = int(self.levels[level].twist[i])
            out["children"] = ([node(level + 1, int(c)) for c in self.children(level, i)]
                               if level < self.depth else [])
            return out
        return node(0, 0)

    @classmethod
    def from_json(cls, obj: dict, d: int, group_kind: str | None = None) -> "OrbitTree":
        levels_raw: list = []
        labelled = False

        def walk(node, level, parent):
            while len(levels_raw) <= level:
                levels_raw.append(([], [], [], []))
            sizes, parents, labels, twists = levels_raw[level]
            idx = len(sizes)
            sizes.append(node["size"])
            parents.append(parent)
            labels.append(tuple(node.get("label", ())))
            twists.append(node.get("twist"))
            for child in node.get("children", []):
                walk(child, level + 1, idx)

        walk(obj, 0, 0)
        labelled = any(lab for _, _, labs, _ in levels_raw for lab in labs)
        levels = [OrbitLevel(rep=np.arange(len(s)), size=np.array(s, dtype=np.int64),
                             parent=np.array(p, dtype=np.int64),
                             labels=labs if labelled else None,
                             twist=None if None in tw else np.array(tw, dtype=np.int64))
                  for s, p, labs, tw in levels_raw]
        return cls(d, len(levels) - 1, levels, "element" if labelled else "subgroup", group_kind)


def _build(d: int, depth: int, label_fn, with_labels: bool, kind: str, group_kind) -> OrbitTree:
    levels = [OrbitLevel(rep=np.zeros(1, dtype=np.int64), size=np.ones(1, dtype=np.int64),
                         parent=np.zeros(1, dtype=np.int64),
                         labels=[()] if with_labels else None,
                         orbit_of=np.zeros(1, dtype=np.int64))]
    for level in range(1, depth + 1):
        mins = label_fn(level)
        reps, orbit_of, sizes = np.unique(mins, return_inverse=True, return_counts=True)
        prev = levels[-1]
        parent = prev.orbit_of[reps // d]
        labels = None
        if with_labels:
            # digits c with rep(parent)*d + c in each child orbit
            grid = orbit_of[(prev.rep * d)[:, None] + np.arange(d)]
            labels = [()] * len(reps)
            for row in grid:
                for child in np.unique(row):
                    labels[child] = tuple(int(c) for c in np.flatnonzero(row == child))
        levels.append(OrbitLevel(rep=reps, size=sizes, parent=parent, labels=labels,
                                 orbit_of=orbit_of))
    return OrbitTree(d, depth, levels, kind, group_kind)


def orbit_tree_of_element(g: TreeAutomorphism) -> OrbitTree:
    tree = _build(g.arity, g.depth, lambda level: cycle_min_labels(g.actions[level]),
                  True, "element", g.group.kind)
    if g.group.kind == CYCLIC:
        for level in range(g.depth):
            lv = tree.levels[level]
            sums = np.bincount(lv.orbit_of, weights=g.level_labels(level), minlength=len(lv.rep))
            lv.twist = sums.astype(np.int64) % g.arity
    return tree


def orbit_tree_of_subgroup(gens: Sequence[TreeAutomorphism], d: int | None = None,
                           depth: int | None = None) -> OrbitTree:
    """Orbit tree of <gens>; with no generators, ``d`` and ``depth`` give the full tree."""
    gens = list(gens)
    if gens:
        g0 = gens[0]
        for g in gens[1:]:
            if g.group != g0.group or g.depth != g0.depth:
                raise DomainError("generators live in different wreath products")
        d, depth, group_kind = g0.arity, g0.depth, g0.group.kind
    else:
        if d is None or depth is None:
            raise DomainError("empty generator list needs d and depth")
        group_kind = None
    return _build(d, depth,
                  lambda level: orbit_min_labels([g.actions[level] for g in gens], d**level),
                  False, "subgroup", group_kind)


def canonical_form(tree: OrbitTree, kind: str | None = None) -> bytes:
    """Canonical byte code of a labelled orbit tree up to equivalence.

    ``symmetric_d``: a node is the sorted multiset of (cycle length, child code).
    ``cyclic_p``: a node with p children is the least cyclic rotation of the
    child codes ordered by their label digit; a node with one child records
    its twist.  Unlabelled trees use the sorted multiset of child codes.
    """
    kind = kind or tree.group_kind
    labelled = tree.levels[0].labels is not None
    if labelled and kind not in (CYCLIC, SYMMETRIC):
        raise UnsupportedFeatureError(f"conjugacy codes are not available for H of kind {kind!r}")
    codes = [b"()"] * tree.num_nodes(tree.depth)
    for level in range(tree.depth - 1, -1, -1):
        nxt = tree.levels[level + 1]
        kids: list[list[int]] = [[] for _ in range(tree.num_nodes(level))]
        for j, par in enumerate(nxt.parent):
            kids[par].append(j)
        new = []
        for ch in kids:
            if not labelled:
                parts = sorted(codes[j] for j in ch)
            elif kind == SYMMETRIC:
                parts = sorted(str(len(nxt.labels[j])).encode() + codes[j] for j in ch)
            elif len(ch) == 1:
                twist = tree.levels[level].twist
                parts = [b"" if twist is None else b"%d" % twist[len(new)], codes[ch[0]]]
            else:
                by_digit = [b""] * tree.d
                for j in ch:
                    if len(nxt.labels[j]) != 1:
                        raise DomainError("cyclic_p node with several children has a non-singleton label")
                    by_digit[nxt.labels[j][0]] = codes[j]
                parts = min(by_digit[r:] + by_digit[:r] for r in range(tree.d))
            new.append(b"(" + b"".join(parts) + b")")
        codes = new
    return codes[0]


def are_conjugate(g: TreeAutomorphism, h: TreeAutomorphism) -> bool:
    if g.group != h.group or g.depth != h.depth:
        raise DomainError("elements live in different wreath products")
    if g.group.kind not in (CYCLIC, SYMMETRIC):
        raise UnsupportedFeatureError("conjugacy is decided only for cyclic_p and symmetric_d")
    return canonical_form(orbit_tree_of_element(g)) == canonical_form(orbit_tree_of_element(h))


def solo_count(tree: OrbitTree) -> int:
    """Number of solo vertices (exactly one child) of a 1-p tree.

    Nodes at the bottom level have no children and are not counted.
    """
    p = tree.d
    total = 0
    for level in range(tree.depth):
        counts = tree.child_counts(level)
        bad = counts[(counts != 1) & (counts != p)]
        if bad.size:
            raise DomainError(f"node with {int(bad[0])} children is not allowed in a 1-{p} tree")
        total += int((counts == 1).sum())
    return total


@dataclass
class DensityProfile:
    deltas: list          # delta_i(U) as Fractions, i = 0..depth
    partial_sums: list    # sum_{i<=n} delta_i(U)
    closed_form: list     # d/(d-1) (1 - r_{n+1}(T)/d^{n+1}) for n < depth (1-d trees)
    bound: list           # d (1 - r_{n+1}(T)/d^{n+1})
    one_d_tree: bool

    @property
    def identity_holds(self) -> bool:
        if not self.one_d_tree:
            return False
        return all(s == c for s, c in zip(self.partial_sums, self.closed_form))

    @property
    def bound_holds(self) -> bool:
        return all(s <= b for s, b in zip(self.partial_sums, self.bound))


def tree_density_profile(tree, d: int | None = None,
                         predicate: Callable[[int, int, int], bool] | None = None) -> DensityProfile:
    """Density sequence delta_n(U) = r_n(U)/d^n of a vertex set U of a d-bounded tree.

    ``tree`` is an OrbitTree or a list of per-level child-count arrays (children
    of consecutive nodes are consecutive on the next level).  ``predicate(level,
    index, child_count)`` selects U; the default is "fewer than d children".
    The partial-sum identity is checked for n < depth, where every vertex of U
    still has its true degree.
    """
    if isinstance(tree, OrbitTree):
        d = tree.d if d is None else d
        counts = [tree.child_counts(level) for level in range(tree.depth + 1)]
    else:
        if d is None:
            raise DomainError("d is required for a child-count tree")
        counts = [np.asarray(c, dtype=np.int64) for c in tree]
    depth = len(counts) - 1
    for level in range(depth):
        if counts[level].size and counts[level].max() > d:
            raise DomainError("tree is not d-bounded")
        if level + 1 <= depth and int(counts[level].sum()) != counts[level + 1].size:
            raise DomainError("child counts do not match the next level")
    if predicate is None:
        predicate = lambda level, i, c: c < d  # noqa: E731
    r_t = [c.size for c in counts]
    deltas = [Fraction(sum(1 for i, c in enumerate(counts[level]) if predicate(level, i, int(c))),
                       d**level) for level in range(depth + 1)]
    partial, acc = [], Fraction(0)
    for x in deltas:
        acc += x
        partial.append(acc)
    closed = [Fraction(d, d - 1) * (1 - Fraction(r_t[n + 1], d ** (n + 1))) for n in range(depth)]
    bound = [d * (1 - Fraction(r_t[n + 1], d ** (n + 1))) for n in range(depth)]
    one_d = all(set(np.unique(counts[level]).tolist()) <= {1, d} for level in range(depth))
    return DensityProfile(deltas, partial[:depth], closed, bound, one_d)
