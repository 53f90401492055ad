"""Subgroups of Gamma_n(p) through a chain refining the level-stabilizer filtration.

Each layer l holds elements of the level-l stabilizer whose label vectors on
level l are linearly independent over F_p.  Inside that stabilizer the level-l
labels add under composition, so an element is sifted layer by layer: read
its level-l vector, cancel it with a combination of the stored elements and
move on to the next level.  The set of ordered products of stored elements
is the generated group once it is closed under conjugation by the
normalizing elements, p-th powers and commutators inside a layer; the builder
queues exactly those checks for every element it stores.

Group elements are handled as permutations of the p^n leaves (int64 arrays),
composed left to right: ``g then h`` is ``h[g]``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..errors import DomainError, NotSolvableError, ResourceError, UnsupportedFeatureError
from ..orbits import orbit_tree_of_subgroup, solo_count
from ..treealg import (TreeAutomorphism, commutator, extend, from_leaf_action,
                       leaf_action, truncate, vertex_from_position)
from .fp import IncrementalBasis

DEFAULT_MAX_POINTS = 1023
MAX_DERIVED_LENGTH = 20


def _inverse_perm(g: np.ndarray) -> np.ndarray:
    out = np.empty_like(g)
    out[g] = np.arange(g.size)
    return out


class _Layer:
    """Stored elements of one level plus product tables for fast cancellation.

    Elements are grouped in blocks of ``block`` consecutive entries; for each
    block ``tables[b][code]`` is the product of u_i^(-c_i) over the block, in
    order, where ``code`` packs the exponents c_i in base p.
    """

    def __init__(self, level: int, p: int, size: int):
        self.level = level
        self.p = p
        self.basis = IncrementalBasis(p**level, p)
        self.elements: list[np.ndarray] = []
        self.block = max(1, int(math.log(16, p) + 1e-9))
        self.tables: list[np.ndarray] = []
        self._identity = np.arange(size, dtype=np.int64)

    @property
    def rank(self) -> int:
        return len(self.elements)

    def append(self, g: np.ndarray) -> None:
        pos = len(self.elements) % self.block
        self.elements.append(g)
        inv = np.empty_like(g)
        inv[g] = self._identity
        powers = [self._identity, inv]
        for _ in range(self.p - 2):
            powers.append(inv[powers[-1]])
        old = self.tables.pop() if pos else self._identity[None, :]
        # new code = old code + c * p^pos, product continues with u^(-c)
        self.tables.append(np.concatenate([pw[old] for pw in powers]))

    def cancel(self, g: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """g times the product of u_i^(-c_i) over stored elements, in order."""
        b = self.block
        weights = self.p ** np.arange(b)
        for start in range(0, len(coeffs), b):
            part = coeffs[start:start + b]
            if part.any():
                g = self.tables[start // b][int(part @ weights[:part.size])][g]
        return g



class StabilizerChain:
    """Chain for a subgroup of Gamma_depth(p), base = vertices in level order."""

    def __init__(self, p: int, depth: int, normalizers: Sequence[np.ndarray] = (),
                 max_points: int = DEFAULT_MAX_POINTS):
        points = (p**depth - 1) // (p - 1)
        if points > max_points:
            raise ResourceError(f"{points} base points exceed the budget of {max_points}")
        self.p = p
        self.depth = depth
        self.size = p**depth
        self.normalizers = [np.asarray(x, dtype=np.int64) for x in normalizers]
        self.layers = [_Layer(level, p, self.size) for level in range(depth)]
        self.max_strong = 20 * max(depth, 1) * self.size
        self._identity = np.arange(self.size, dtype=np.int64)
        # every layer from here down spans its whole level: the rest is all of it
        self._full_from = depth

    # -- sifting --------------------------------------------------------------

    def layer_vector(self, g: np.ndarray, level: int) -> np.ndarray:
        """Level-l labels of g, assuming g fixes every vertex above level l."""
        q = p_pow = self.p ** (self.depth - level)
        return (g[::q] // (p_pow // self.p)) % self.p

    def sift(self, g: np.ndarray, start: int = 0) -> tuple[int, np.ndarray]:
        """Sift g; returns (depth, identity) for members, else (level, residue)."""
        g = np.asarray(g, dtype=np.int64)
        for layer in self.layers[start:]:
            if layer.level >= self._full_from:
                return self.depth, self._identity
            vec = self.layer_vector(g, layer.level)
            if not vec.any():
                continue
            if layer.basis.contains(vec):
                if layer.level == self.depth - 1:
                    return self.depth, self._identity
                g = layer.cancel(g, layer.basis.coefficients(vec))
            else:
                return layer.level, layer.cancel(g, layer.basis.reduce(vec)[1])
        return self.depth, g

    def contains(self, g) -> bool:
        perm = leaf_action(g) if isinstance(g, TreeAutomorphism) else g
        return self.sift(perm)[0] == self.depth

    # -- building -------------------------------------------------------------

    def _store(self, level: int, g: np.ndarray) -> None:
        layer = self.layers[level]
        layer.basis.add(self.layer_vector(g, level))
        layer.append(g)
        while self._full_from > 0 and self.layers[self._full_from - 1].rank == self.p ** (self._full_from - 1):
            self._full_from -= 1
        if self.num_strong_generators() > self.max_strong:
            raise ResourceError("strong generator budget exceeded")

    def add_generators(self, gens: Sequence[np.ndarray]) -> None:
        # conjugates are checked first; powers and commutators are deferred, by
        # which time the lower layers are often full and the check is free
        queue = deque((np.asarray(g, dtype=np.int64), 0) for g in gens)
        deferred: deque = deque()
        while queue or deferred:
            if queue:
                g, start = queue.popleft()
            else:
                kind, level, i, j = deferred.popleft()
                if level + 1 >= self._full_from:
                    continue
                u = self.layers[level].elements[i]
                if kind == "pow":
                    g = u
                    for _ in range(self.p - 1):
                        g = u[g]
                else:
                    v = self.layers[level].elements[j]
                    g = v[u[_inverse_perm(v)[_inverse_perm(u)]]]
                start = level + 1
            level, residue = self.sift(g, start)
            if level == self.depth:
                continue
            self._store(level, residue)
            for x in self.normalizers:
                queue.append((x[residue[_inverse_perm(x)]], level))
            if level < self.depth - 1:
                i = self.layers[level].rank - 1
                deferred.append(("pow", level, i, None))
                deferred.extend(("comm", level, i, j) for j in range(i))

    # -- queries --------------------------------------------------------------

    @property
    def exponents(self) -> list[int]:
        """e_l with |G intersected with the level-l stabilizer| = p^e_l, l = 0..depth."""
        out = [0] * (self.depth + 1)
        for level in range(self.depth - 1, -1, -1):
            out[level] = out[level + 1] + self.layers[level].rank
        return out

    @property
    def order_exponent(self) -> int:
        return self.exponents[0]

    def image_exponent(self, level: int) -> int:
        """log_p of the order of the image of G in Gamma_level."""
        e = self.exponents
        return e[0] - e[level]

    def transversal_sizes(self) -> list[int]:
        return [self.p**layer.rank for layer in self.layers]

    def num_strong_generators(self) -> int:
        return sum(layer.rank for layer in self.layers)

    def strong_generator_perms(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.elements]

    def strong_generators(self, group) -> list[TreeAutomorphism]:
        return [from_leaf_action(group, self.depth, g) for g in self.strong_generator_perms()]

    def base(self) -> list[tuple]:
        return [vertex_from_position(j, level, self.p)
                for level in range(self.depth) for j in range(self.p**level)]

    def is_normalized_by(self, perms: Sequence[np.ndarray]) -> bool:
        for x in perms:
            x_inv = _inverse_perm(x)
            for g in self.strong_generator_perms():
                if self.sift(x[g[x_inv]])[0] != self.depth:
                    return False
        return True


def _prepare(gens: Sequence[TreeAutomorphism], n: int | None):
    gens = list(gens)
    if not gens:
        raise DomainError("at least one generator is required")
    g0 = gens[0]
    for g in gens[1:]:
        if g.group != g0.group or g.depth != g0.depth:
            raise DomainError("generators live in different wreath products")
    if g0.group.prime is None:
        raise UnsupportedFeatureError("subgroup chains are implemented for H = C_p only")
    n = g0.depth if n is None else n
    if n < 0:
        raise DomainError("depth must be nonnegative")
    gens = [truncate(g, n) if n <= g.depth else extend(g, n) for g in gens]
    return gens, g0.group.prime, n


def build_chain(gens: Sequence[TreeAutomorphism], n: int | None = None,
                normalizers: Sequence[TreeAutomorphism] | None = None,
                max_points: int = DEFAULT_MAX_POINTS) -> StabilizerChain:
    """Chain of <gens> (or of its normal closure under ``normalizers``) at depth n."""
    gens, p, n = _prepare(gens, n)
    if normalizers is None:
        norm = [leaf_action(g) for g in gens]
    else:
        norm = [leaf_action(g) for g in _prepare(normalizers, n)[0]] if normalizers else []
    chain = StabilizerChain(p, n, norm, max_points)
    chain.add_generators([leaf_action(g) for g in gens])
    return chain


@dataclass(frozen=True)
class DensitySequence:
    p: int
    numerators: tuple     # log_p |G_l| for l = 1..n
    denominators: tuple   # log_p |Gamma_l| = (p^l - 1)/(p - 1)

    @property
    def values(self) -> list[Fraction]:
        return [Fraction(a, b) for a, b in zip(self.numerators, self.denominators)]

    @property
    def floats(self) -> list[float]:
        return [a / b for a, b in zip(self.numerators, self.denominators)]

    def gamma(self, level: int) -> Fraction:
        return Fraction(self.numerators[level - 1], self.denominators[level - 1])

    def rows(self) -> list[tuple]:
        return [(level, a, b, a / b) for level, (a, b)
                in enumerate(zip(self.numerators, self.denominators), start=1)]


def density_from_chain(chain: StabilizerChain) -> DensitySequence:
    p = chain.p
    num = tuple(chain.image_exponent(level) for level in range(1, chain.depth + 1))
    den = tuple((p**level - 1) // (p - 1) for level in range(1, chain.depth + 1))
    return DensitySequence(p, num, den)


def density_sequence(gens: Sequence[TreeAutomorphism], n: int | None = None,
                     max_points: int = DEFAULT_MAX_POINTS) -> DensitySequence:
    return density_from_chain(build_chain(gens, n, max_points=max_points))


def boundary_slice_dim(gens: Sequence[TreeAutomorphism], n: int | None = None,
                       max_points: int = DEFAULT_MAX_POINTS) -> int:
    """Dimension over F_p of the subgroup fixing every vertex of level n-1."""
    chain = build_chain(gens, n, max_points=max_points)
    return 0 if chain.depth == 0 else chain.exponents[chain.depth - 1]


def _pairwise_commutators(gens: Sequence[TreeAutomorphism]) -> list[TreeAutomorphism]:
    comms = [commutator(a, b) for a, b in itertools.combinations(gens, 2)]
    return [c for c in comms if not c.is_identity()]


def derived_subgroup_chain(gens: Sequence[TreeAutomorphism], n: int | None = None,
                           max_points: int = DEFAULT_MAX_POINTS) -> StabilizerChain:
    """Chain of G' as the normal closure in G = <gens> of the [g_i, g_j]."""
    gens, p, n = _prepare(gens, n)
    norm = [leaf_action(g) for g in gens]
    chain = StabilizerChain(p, n, norm, max_points)
    chain.add_generators([leaf_action(c) for c in _pairwise_commutators(gens)])
    return chain


def commutator_density(gens: Sequence[TreeAutomorphism], n: int | None = None,
                       max_points: int = DEFAULT_MAX_POINTS) -> int:
    """c(P) = log_p |P : P'|."""
    whole = build_chain(gens, n, max_points=max_points)
    derived = derived_subgroup_chain(gens, n, max_points=max_points)
    return whole.order_exponent - derived.order_exponent


@dataclass(frozen=True)
class SolvableSumReport:
    derived_length: int
    gamma_sum: Fraction
    constant: Fraction
    bound: Fraction
    holds: bool
    derived_orders: tuple   # log_p |G^(i)| along the derived series


def solvable_sum_check(gens: Sequence[TreeAutomorphism], n: int | None = None,
                       max_points: int = DEFAULT_MAX_POINTS,
                       max_pairs: int = 200_000) -> SolvableSumReport:
    """Derived length d of <gens> and the partial sum of gamma_1..gamma_n against C d."""
    gens, p, n = _prepare(gens, n)
    group = gens[0].group
    chain = build_chain(gens, n, max_points=max_points)
    gamma_sum = sum(density_from_chain(chain).values, Fraction(0))
    orders = [chain.order_exponent]
    length = 0
    current = chain
    while current.order_exponent > 0:
        if length >= MAX_DERIVED_LENGTH:
            raise NotSolvableError(f"derived series did not terminate within {MAX_DERIVED_LENGTH} steps")
        elems = current.strong_generators(group)
        if len(elems) * (len(elems) - 1) // 2 > max_pairs:
            raise ResourceError("too many commutator pairs for the derived series")
        norm = [leaf_action(g) for g in elems]
        nxt = StabilizerChain(p, n, norm, max_points)
        nxt.add_generators([leaf_action(c) for c in _pairwise_commutators(elems)])
        current = nxt
        orders.append(current.order_exponent)
        length += 1
    constant = Fraction(p * p + p, p - 1)
    bound = constant * length
    return SolvableSumReport(length, gamma_sum, constant, bound, gamma_sum <= bound, tuple(orders))


@dataclass(frozen=True)
class AbelianBoundReport:
    log_order: int
    solo: int
    gap: int
    holds: bool


def abelian_bound_check(gens: Sequence[TreeAutomorphism], n: int | None = None,
                        max_points: int = DEFAULT_MAX_POINTS) -> AbelianBoundReport:
    gens, p, n = _prepare(gens, n)
    if _pairwise_commutators(gens):
        raise DomainError("generators do not commute")
    log_order = build_chain(gens, n, max_points=max_points).order_exponent
    solo = solo_count(orbit_tree_of_subgroup(gens))
    return AbelianBoundReport(log_order, solo, solo - log_order, log_order <= solo)
