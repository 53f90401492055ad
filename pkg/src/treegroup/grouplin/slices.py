"""Boundary slices as polynomials in F_p[x]/(x^q - 1), q = p^(n-1), and their weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DomainError
from ..treealg import TreeAutomorphism, index_to_position, level_offsets
from ..zoo import adding_machine


@lru_cache(maxsize=16)
def _binomial_table(size: int, p: int) -> np.ndarray:
    """``table[i, j] = C(i, j) mod p`` for 0 <= i, j < size."""
    table = np.zeros((size, size), dtype=np.int64)
    table[:, 0] = 1
    for i in range(1, size):
        table[i, 1:] = (table[i - 1, 1:] + table[i - 1, :-1]) % p
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class SlicePolynomial:
    """Element sum_i c_i x^i of F_p[x]/(x^size - 1), size a power of p."""

    coeffs: np.ndarray
    p: int

    def __post_init__(self):
        c = np.mod(np.asarray(self.coeffs, dtype=np.int64).ravel(), self.p)
        size = c.size
        if size < 1 or self.p ** round(math.log(size, self.p)) != size:
            raise DomainError("slice polynomial length must be a power of p")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def size(self) -> int:
        return self.coeffs.size

    def __eq__(self, other):
        return (isinstance(other, SlicePolynomial) and self.p == other.p
                and np.array_equal(self.coeffs, other.coeffs))

    def __add__(self, other: "SlicePolynomial") -> "SlicePolynomial":
        return SlicePolynomial((self.coeffs + other.coeffs) % self.p, self.p)

    def times_x(self) -> "SlicePolynomial":
        return SlicePolynomial(np.roll(self.coeffs, 1), self.p)

    def times_y(self) -> "SlicePolynomial":
        """Multiply by y = x - 1."""
        return SlicePolynomial(np.roll(self.coeffs, 1) - self.coeffs, self.p)

    def is_zero(self) -> bool:
        return not self.coeffs.any()

    def y_coefficients(self) -> np.ndarray:
        """Coefficients of f(y + 1) in powers of y."""
        return self.coeffs @ _binomial_table(self.size, self.p) % self.p

    @classmethod
    def from_element(cls, g: TreeAutomorphism) -> "SlicePolynomial":
        """Polynomial sum_v g(v) x^N(v) of an element fixing level n-1."""
        p = g.group.prime
        if p is None or g.depth < 1:
            raise DomainError("slices need H = C_p and depth at least 1")
        n = g.depth
        if g.labels[:level_offsets(p, n - 1)[-1]].any():
            raise DomainError("element does not fix level n-1")
        last = g.level_labels(n - 1)
        return cls(last[index_to_position(n - 1, p)], p)


def weight(f: SlicePolynomial) -> float | int:
    """Largest k with (x-1)^k dividing f; infinity for f = 0."""
    if f.is_zero():
        return math.inf
    return int(np.flatnonzero(f.y_coefficients())[0])


def weight_by_division(f: SlicePolynomial) -> float | int:
    """Same as ``weight``, by repeated synthetic division by x - 1."""
    if f.is_zero():
        return math.inf
    p = f.p
    c = [int(x) for x in f.coeffs]
    k = 0
    while sum(c) % p == 0:
        # quotient of c(x) by (x - 1): q_{i-1} = c_i + q_i, from the top degree down
        q = [0] * (len(c) - 1)
        acc = 0
        for i in range(len(c) - 1, 0, -1):
            acc = (acc + c[i]) % p
            q[i - 1] = acc
        c = q
        k += 1
    return k


def polihamu_pair(n: int, k: int, p: int = 2) -> tuple[TreeAutomorphism, TreeAutomorphism]:
    """The adding machine s and an element g with dim of the slice of <s, g^(p^k)> = p^(n-1) - p^k + 1.

    g copies the labels of s above level k, is trivial on levels k..n-1 except
    for label 1 at the level-(n-1) vertex with N(v) = 0.
    """
    if n < 1 or not 0 <= k < n:
        raise DomainError(f"need 0 <= k < n, got n={n}, k={k}")
    s = adding_machine(p, n)
    offs = level_offsets(p, n)
    labels = np.zeros_like(s.labels)
    labels[:offs[k]] = s.labels[:offs[k]]
    labels[offs[n - 1]] = 1
    return s, TreeAutomorphism(s.group, n, labels)


def polihamu_formula(n: int, k: int, p: int = 2) -> int:
    return p ** (n - 1) - p**k + 1
