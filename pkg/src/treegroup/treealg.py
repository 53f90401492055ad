"""Elements of finite iterated wreath products acting on rooted d-ary trees.

An element of Gamma_n(H) is stored as its *portrait*: one H-label per
internal vertex, in level order.  Vertices of level l are addressed by their
position ``sum(x_i * d**(l - i))`` (first digit most significant), so the
children of position ``j`` are ``j*d .. j*d + d - 1`` and level ``l`` starts at
offset ``(d**l - 1) / (d - 1)`` of the label array.

Actions are on the right: ``apply(compose(g, h), v) == apply(h, apply(g, v))``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

Vertex = tuple  # path of digits in {0..d-1}; () is the root

CYCLIC = "cyclic_p"
SYMMETRIC = "symmetric_d"
EXPLICIT = "explicit"


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % q for q in range(2, math.isqrt(n) + 1))


def p_valuation(n: int, p: int) -> int:
    """Exponent of the highest power of ``p`` dividing ``n`` (n > 0)."""
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def prime_divisors(n: int) -> list[int]:
    return [q for q in range(2, n + 1) if n % q == 0 and is_prime(q)]


@dataclass(frozen=True)
class PermGroupSpec:
    """A permutation group (H, X) with X = {0..d-1}, given by all its elements.

    Elements are image tuples sorted lexicographically, so the identity always
    has index 0 and, for ``cyclic_p``, index r is the rotation x -> x + r.
    """

    degree: int
    elements: tuple
    kind: str = EXPLICIT

    def __post_init__(self):
        elems = tuple(sorted(set(tuple(int(x) for x in e) for e in self.elements)))
        object.__setattr__(self, "elements", elems)
        d = self.degree
        if d < 1:
            raise DomainError("degree must be positive")
        for e in elems:
            if sorted(e) != list(range(d)):
                raise DomainError(f"{e} is not a permutation of range({d})")
        if not elems or elems[0] != tuple(range(d)):
            raise DomainError("elements must contain the identity")
        index = {e: i for i, e in enumerate(elems)}
        for a, b in itertools.product(elems, repeat=2):
            if tuple(b[a[i]] for i in range(d)) not in index:
                raise DomainError("elements are not closed under composition")
        if self.kind == CYCLIC:
            if not is_prime(d) or len(elems) != d:
                raise DomainError("cyclic_p requires the p rotations of a prime p")
            if any(e != tuple((i + r) % d for i in range(d)) for r, e in enumerate(elems)):
                raise DomainError("cyclic_p elements must be rotations")
        elif self.kind == SYMMETRIC:
            if len(elems) != math.factorial(d):
                raise DomainError("symmetric_d requires all d! permutations")
        elif self.kind != EXPLICIT:
            raise DomainError(f"unknown group kind {self.kind!r}")

    @classmethod
    def cyclic(cls, p: int) -> "PermGroupSpec":
        if not is_prime(p):
            raise DomainError(f"C_p needs a prime, got {p}")
        return cls(p, tuple(tuple((i + r) % p for i in range(p)) for r in range(p)), CYCLIC)

    @classmethod
    def symmetric(cls, d: int) -> "PermGroupSpec":
        return cls(d, tuple(itertools.permutations(range(d))), SYMMETRIC)

    @classmethod
    def explicit(cls, elements: Iterable[Sequence[int]]) -> "PermGroupSpec":
        elements = [tuple(e) for e in elements]
        if not elements:
            raise DomainError("empty element list")
        return cls(len(elements[0]), tuple(elements), EXPLICIT)

    @classmethod
    def trivial(cls, d: int = 1) -> "PermGroupSpec":
        return cls(d, (tuple(range(d)),), EXPLICIT)

    @classmethod
    def parse(cls, text: str) -> "PermGroupSpec":
        """Parse ``C3``, ``S3``, ``cyclic:5``, ``symmetric:4`` or ``trivial``."""
        t = text.strip().lower()
        if t == "trivial":
            return cls.trivial()
        if t.startswith("cyclic:"):
            return cls.cyclic(int(t.split(":", 1)[1]))
        if t.startswith("symmetric:"):
            return cls.symmetric(int(t.split(":", 1)[1]))
        if len(t) > 1 and t[0] in "cs" and t[1:].isdigit():
            n = int(t[1:])
            return cls.cyclic(n) if t[0] == "c" else cls.symmetric(n)
        raise DomainError(f"cannot parse group spec {text!r}")

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def prime(self) -> int | None:
        """The prime p when H = C_p, else None."""
        return self.degree if self.kind == CYCLIC else None

    @cached_property
    def index(self) -> dict:
        return {e: i for i, e in enumerate(self.elements)}

    @cached_property
    def act(self) -> np.ndarray:
        """``act[h, x]`` is the image of point x under element h."""
        return np.array(self.elements, dtype=np.int64).reshape(self.order, self.degree)

    @cached_property
    def mult(self) -> np.ndarray:
        """``mult[a, b]`` is the element 'a then b'."""
        d = self.degree
        table = np.empty((self.order, self.order), dtype=np.int64)
        for i, a in enumerate(self.elements):
            for j, b in enumerate(self.elements):
                table[i, j] = self.index[tuple(b[a[x]] for x in range(d))]
        return table

    @cached_property
    def inv(self) -> np.ndarray:
        return np.array([int(np.flatnonzero(self.mult[i] == 0)[0]) for i in range(self.order)])

    @cached_property
    def code_lookup(self) -> np.ndarray:
        """Map base-d code of an image tuple to its element index (-1 if absent)."""
        d = self.degree
        table = np.full(d**d, -1, dtype=np.int64)
        weights = d ** np.arange(d - 1, -1, -1)
        table[self.act @ weights] = np.arange(self.order)
        return table

    def cycles(self, h: int) -> list[tuple[int, ...]]:
        """Cycles of element ``h`` on X, each starting at its smallest point."""
        img = self.elements[h]
        seen = [False] * self.degree
        out = []
        for x in range(self.degree):
            if seen[x]:
                continue
            cyc = [x]
            seen[x] = True
            y = img[x]
            while y != x:
                seen[y] = True
                cyc.append(y)
                y = img[y]
            out.append(tuple(cyc))
        return out

    def is_transitive(self) -> bool:
        reach = {0}
        frontier = [0]
        while frontier:
            x = frontier.pop()
            for e in self.elements:
                if e[x] not in reach:
                    reach.add(e[x])
                    frontier.append(e[x])
        return len(reach) == self.degree

    def to_json(self) -> dict:
        out = {"kind": self.kind, "degree": self.degree}
        if self.kind == EXPLICIT:
            out["elements"] = [list(e) for e in self.elements]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PermGroupSpec":
        kind = obj.get("kind", CYCLIC)
        if kind == CYCLIC:
            return cls.cyclic(int(obj["degree"]))
        if kind == SYMMETRIC:
            return cls.symmetric(int(obj["degree"]))
        return cls.explicit(obj["elements"])


def perm_rank(H: PermGroupSpec) -> int:
    """Number of orbits of H on ordered pairs of points (the rank r(H))."""
    d = H.degree
    parent = list(range(d * d))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in H.elements:
        for x in range(d):
            for y in range(d):
                a, b = find(x * d + y), find(e[x] * d + e[y])
                if a != b:
                    parent[a] = b
    return len({find(a) for a in range(d * d)})


# -- vertices -----------------------------------------------------------------

def level_offsets(d: int, depth: int) -> list[int]:
    """Start offset of each level 0..depth in a level-order label array."""
    offs = [0]
    for level in range(depth):
        offs.append(offs[-1] + d**level)
    return offs


def vertex_position(v: Vertex, d: int) -> int:
    """Level-order position of v within its level (first digit most significant)."""
    pos = 0
    for x in v:
        pos = pos * d + x
    return pos


def vertex_from_position(pos: int, level: int, d: int) -> Vertex:
    digits = []
    for _ in range(level):
        pos, x = divmod(pos, d)
        digits.append(x)
    return tuple(reversed(digits))


def vertex_index(v: Vertex, d: int) -> int:
    """N(v) = v_1 + v_2 d + ... + v_l d^(l-1) (first digit least significant)."""
    return sum(x * d**i for i, x in enumerate(v))


def vertex_from_index(n: int, level: int, d: int) -> Vertex:
    digits = []
    for _ in range(level):
        n, x = divmod(n, d)
        digits.append(x)
    return tuple(digits)


def index_to_position(level: int, d: int) -> np.ndarray:
    """Array mapping N(v) to the level-order position of v."""
    n = np.arange(d**level)
    pos = np.zeros_like(n)
    for _ in range(level):
        n, x = np.divmod(n, d)
        pos = pos * d + x
    return pos


# -- elements -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TreeAutomorphism:
    """Element of Gamma_depth(group), immutable once built."""

    group: PermGroupSpec
    depth: int
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64).ravel()
        expected = level_offsets(self.group.degree, self.depth)[-1]
        if self.depth < 0:
            raise DomainError("depth must be nonnegative")
        if labels.size != expected:
            raise DomainError(f"expected {expected} labels, got {labels.size}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.group.order):
            raise DomainError("label outside the configured group")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def identity(cls, group: PermGroupSpec, depth: int) -> "TreeAutomorphism":
        return cls(group, depth, np.zeros(level_offsets(group.degree, depth)[-1], dtype=np.int64))

    @property
    def arity(self) -> int:
        return self.group.degree

    @cached_property
    def offsets(self) -> list[int]:
        return level_offsets(self.arity, self.depth)

    def level_labels(self, level: int) -> np.ndarray:
        return self.labels[self.offsets[level]:self.offsets[level + 1]]

    @cached_property
    def actions(self) -> list[np.ndarray]:
        """``actions[l][j]`` is the position of the image of vertex j at level l."""
        d = self.arity
        act = self.group.act
        out = [np.zeros(1, dtype=np.int64)]
        for level in range(self.depth):
            lab = self.level_labels(level)
            out.append(((out[-1] * d)[:, None] + act[lab]).ravel())
        return out

    def level_action(self, level: int) -> np.ndarray:
        if not 0 <= level <= self.depth:
            raise DomainError(f"level {level} outside 0..{self.depth}")
        return self.actions[level]

    def is_identity(self) -> bool:
        return not self.labels.any()

    def key(self) -> bytes:
        return self.labels.astype(np.int16).tobytes()

    def __eq__(self, other):
        if not isinstance(other, TreeAutomorphism):
            return NotImplemented
        return (self.group == other.group and self.depth == other.depth
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.group.degree, self.depth, self.key()))

    def __mul__(self, other):
        return compose(self, other)

    def __pow__(self, k: int):
        return power(self, k)

    def __invert__(self):
        return inverse(self)

    def __repr__(self):
        return f"TreeAutomorphism(d={self.arity}, depth={self.depth}, labels={self.labels.tolist()})"


def _check_same_shape(g: TreeAutomorphism, h: TreeAutomorphism):
    if g.group != h.group or g.depth != h.depth:
        raise DomainError("elements live in different wreath products")


def apply(g: TreeAutomorphism, v: Vertex) -> Vertex:
    """Image of vertex v under g."""
    if len(v) > g.depth:
        raise DomainError(f"vertex level {len(v)} exceeds depth {g.depth}")
    d = g.arity
    act = g.group.act
    pos = 0
    out = []
    for level, x in enumerate(v):
        if not 0 <= x < d:
            raise DomainError(f"digit {x} outside 0..{d - 1}")
        out.append(int(act[g.labels[g.offsets[level] + pos], x]))
        pos = pos * d + x
    return tuple(out)


def compose(g: TreeAutomorphism, h: TreeAutomorphism) -> TreeAutomorphism:
    """The product gh ('g then h'), label-wise (gh)(u) = g(u) h(u^g)."""
    _check_same_shape(g, h)
    mult = g.group.mult
    out = np.empty_like(g.labels)
    for level in range(g.depth):
        s, e = g.offsets[level], g.offsets[level + 1]
        out[s:e] = mult[g.labels[s:e], h.labels[s:e][g.actions[level]]]
    return TreeAutomorphism(g.group, g.depth, out)


def inverse(g: TreeAutomorphism) -> TreeAutomorphism:
    out = np.empty_like(g.labels)
    inv = g.group.inv
    for level in range(g.depth):
        s, e = g.offsets[level], g.offsets[level + 1]
        out[s + g.actions[level]] = inv[g.labels[s:e]]
    return TreeAutomorphism(g.group, g.depth, out)


def power(g: TreeAutomorphism, k: int) -> TreeAutomorphism:
    if k < 0:
        return power(inverse(g), -k)
    result = TreeAutomorphism.identity(g.group, g.depth)
    base = g
    while k:
        if k & 1:
            result = compose(result, base)
        k >>= 1
        if k:
            base = compose(base, base)
    return result


def conjugate(g: TreeAutomorphism, x: TreeAutomorphism) -> TreeAutomorphism:
    """g^x = x^-1 g x."""
    return compose(compose(inverse(x), g), x)


def commutator(g: TreeAutomorphism, h: TreeAutomorphism) -> TreeAutomorphism:
    """[g, h] = g^-1 h^-1 g h."""
    return compose(compose(inverse(g), inverse(h)), compose(g, h))


def truncate(g: TreeAutomorphism, depth: int) -> TreeAutomorphism:
    """Image of g in Gamma_depth (action on the top ``depth`` levels)."""
    if not 0 <= depth <= g.depth:
        raise DomainError(f"cannot truncate depth {g.depth} to {depth}")
    return TreeAutomorphism(g.group, depth, g.labels[:g.offsets[depth]])


def extend(g: TreeAutomorphism, depth: int) -> TreeAutomorphism:
    """Embed g into a deeper tree, acting trivially below its own depth."""
    if depth < g.depth:
        raise DomainError("extend needs a larger depth")
    total = level_offsets(g.arity, depth)[-1]
    labels = np.zeros(total, dtype=np.int64)
    labels[:g.labels.size] = g.labels
    return TreeAutomorphism(g.group, depth, labels)


def leaf_action(g: TreeAutomorphism) -> np.ndarray:
    return g.actions[g.depth]


def from_leaf_action(group: PermGroupSpec, depth: int, perm: np.ndarray) -> TreeAutomorphism:
    """Rebuild the portrait of the automorphism whose action on leaves is ``perm``."""
    d = group.degree
    perm = np.asarray(perm, dtype=np.int64)
    if perm.size != d**depth:
        raise DomainError("leaf permutation has the wrong size")
    weights = d ** np.arange(d - 1, -1, -1)
    chunks = []
    for level in range(depth):
        below = d ** (depth - level - 1)
        # leftmost leaf under each child (j, c) of each level-l vertex j
        first = perm[np.arange(d ** (level + 1)) * below]
        digits = (first // below % d).reshape(d**level, d)
        idx = group.code_lookup[digits @ weights]
        if (idx < 0).any():
            raise DomainError("leaf permutation is not an element of Gamma_n(H)")
        chunks.append(idx)
    labels = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    g = TreeAutomorphism(group, depth, labels)
    if not np.array_equal(leaf_action(g), perm):
        raise DomainError("leaf permutation is not a tree automorphism")
    return g


def cycle_lengths(perm: np.ndarray) -> list[int]:
    perm = np.asarray(perm)
    seen = np.zeros(perm.size, dtype=bool)
    out = []
    for start in range(perm.size):
        if seen[start]:
            continue
        length = 0
        x = start
        while not seen[x]:
            seen[x] = True
            x = perm[x]
            length += 1
        out.append(length)
    return out


def element_order(g: TreeAutomorphism) -> int:
    return math.lcm(*cycle_lengths(leaf_action(g))) if g.depth else 1


def element_order_exponent(g: TreeAutomorphism, p: int | None = None) -> int:
    """Exponent of p in the order of g; for H = C_p the K with |g| = p^K.

    Orbit lengths multiply along root paths of the orbit tree, so the exponent
    is the largest p-adic valuation among leaf orbit lengths.
    """
    if p is None:
        p = g.group.prime
        if p is None:
            raise DomainError("a prime is required unless H = C_p")
    if g.depth == 0:
        return 0
    return max(p_valuation(n, p) for n in cycle_lengths(leaf_action(g)))


# -- serialization ------------------------------------------------------------

def to_json(g: TreeAutomorphism) -> dict:
    out = {"d": g.arity, "p_kind": g.group.kind, "depth": g.depth,
           "labels": [int(x) for x in g.labels]}
    if g.group.kind == EXPLICIT:
        out["elements"] = [list(e) for e in g.group.elements]
    return out


def from_json(obj: dict) -> TreeAutomorphism:
    kind = obj.get("p_kind", CYCLIC)
    d = int(obj["d"])
    if kind == CYCLIC:
        group = PermGroupSpec.cyclic(d)
    elif kind == SYMMETRIC:
        group = PermGroupSpec.symmetric(d)
    elif kind == EXPLICIT:
        group = PermGroupSpec.explicit(obj["elements"])
    else:
        raise DomainError(f"unknown p_kind {kind!r}")
    return TreeAutomorphism(group, int(obj["depth"]), np.array(obj["labels"], dtype=np.int64))


def all_elements(group: PermGroupSpec, depth: int) -> list[TreeAutomorphism]:
    """Every element of Gamma_depth(group); only for tiny groups."""
    total = level_offsets(group.degree, depth)[-1]
    if group.order**total > 2**20:
        raise DomainError("group too large to enumerate element by element")
    return [TreeAutomorphism(group, depth, np.array(t, dtype=np.int64))
            for t in itertools.product(range(group.order), repeat=total)]
