"""Dense linear algebra over the prime field F_p on int64 numpy arrays."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError


def as_fp(a, p: int) -> np.ndarray:
    return np.mod(np.asarray(a, dtype=np.int64), p)


def inv_mod(x: int, p: int) -> int:
    x %= p
    if x == 0:
        raise DomainError("zero has no inverse mod p")
    return pow(int(x), -1, p)


def rref(matrix, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form mod p and the pivot columns; zero rows dropped."""
    m = as_fp(matrix, p).copy()
    if m.ndim != 2:
        raise DomainError("rref expects a 2-d array")
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        k = r + nz[0]
        if k != r:
            m[[r, k]] = m[[k, r]]
        m[r] = m[r] * inv_mod(m[r, c], p) % p
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        if others.size:
            m[others] = (m[others] - np.outer(m[others, c], m[r])) % p
        pivots.append(c)
        r += 1
    return m[:r], pivots


def rank(matrix, p: int) -> int:
    m = np.asarray(matrix)
    if m.size == 0:
        return 0
    return len(rref(m, p)[1])


def solve(a, b, p: int) -> np.ndarray | None:
    """One solution x of a @ x = b (mod p), or None if inconsistent."""
    a = as_fp(a, p)
    b = as_fp(b, p).reshape(-1, 1)
    aug, pivots = rref(np.hstack([a, b]), p)
    n = a.shape[1]
    if n in pivots:
        return None
    x = np.zeros(n, dtype=np.int64)
    for row, c in enumerate(pivots):
        x[c] = aug[row, n]
    return x


def nullspace(a, p: int) -> np.ndarray:
    """Rows form a basis of {x : a @ x = 0 (mod p)}."""
    a = as_fp(a, p)
    n = a.shape[1]
    r, pivots = rref(a, p) if a.size else (np.zeros((0, n), dtype=np.int64), [])
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, c in enumerate(pivots):
            basis[i, c] = (-r[row, f]) % p
    return basis


class IncrementalBasis:
    """Row-reduced basis of a growing list of vectors, tracking combinations.

    Vectors are appended in order as ``U``; the basis rows satisfy
    ``rows = coeffs @ U`` (mod p) and are in reduced echelon form.
    """

    def __init__(self, dim: int, p: int):
        self.p = p
        self.dim = dim
        self.rows = np.zeros((0, dim), dtype=np.int64)
        self.coeffs = np.zeros((0, 0), dtype=np.int64)
        self.pivots: list[int] = []
        self._check: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.pivots)

    def _parity_check(self) -> np.ndarray:
        """Rows h with h . v = 0 for exactly the v in the span."""
        if self._check is None:
            free = np.setdiff1d(np.arange(self.dim), self.pivots)
            check = np.zeros((free.size, self.dim), dtype=np.int64)
            check[np.arange(free.size), free] = 1
            if self.pivots:
                check[:, self.pivots] = (-self.rows[:, free].T) % self.p
            self._check = check.astype(np.float64)
        return self._check

    def contains(self, v) -> bool:
        v = as_fp(v, self.p)
        if 2 * len(self.pivots) < self.dim:
            return not self.reduce(v)[0].any()
        return not ((self._parity_check() @ v) % self.p).any()

    def coefficients(self, v) -> np.ndarray:
        """Combination ``c`` with ``v = c @ U``, for v known to lie in the span."""
        if not self.pivots:
            return np.zeros(0, dtype=np.int64)
        a = as_fp(v, self.p)[self.pivots].astype(np.float64)
        return (a @ self._coeffs_f).astype(np.int64) % self.p

    def reduce(self, v) -> tuple[np.ndarray, np.ndarray]:
        """Residue ``v - c @ U`` and the combination ``c`` over the stored vectors."""
        v = as_fp(v, self.p)
        if not self.pivots:
            return v, np.zeros(0, dtype=np.int64)
        a = v[self.pivots].astype(np.float64)
        # float matmul is exact here (entries < p, at most dim terms) and uses BLAS
        residue = (v - (a @ self._rows_f).astype(np.int64)) % self.p
        return residue, (a @ self._coeffs_f).astype(np.int64) % self.p

    def add(self, residue: np.ndarray) -> None:
        """Append a vector already reduced against the basis (nonzero residue)."""
        p = self.p
        nz = np.flatnonzero(residue)
        if nz.size == 0:
            raise DomainError("cannot add a vector already in the span")
        piv = int(nz[0])
        scale = inv_mod(residue[piv], p)
        k = len(self.pivots)
        coeffs = np.zeros((k + 1, k + 1), dtype=np.int64)
        coeffs[:k, :k] = self.coeffs
        coeffs[k, k] = scale
        new_row = residue * scale % p
        rows = np.vstack([self.rows, new_row])
        factor = rows[:k, piv].copy()
        if factor.any():
            rows[:k] = (rows[:k] - np.outer(factor, new_row)) % p
            coeffs[:k] = (coeffs[:k] - np.outer(factor, coeffs[k])) % p
        self.rows, self.coeffs = rows, coeffs
        self._rows_f = rows.astype(np.float64)
        self._coeffs_f = coeffs.astype(np.float64)
        self.pivots.append(piv)
        self._check = None
