"""Arithmetic and dense linear algebra over GF(2^m), 1 <= m <= 16.

Elements are stored as non-negative integers whose bits are polynomial
coefficients.  Multiplication goes through log/antilog tables, so every
operation also works elementwise on numpy integer arrays.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DivisionByZero, InconsistentSystem, ShapeMismatch, UnderdeterminedSystem

# Irreducible reduction polynomials; all but m=8 are primitive.
DEFAULT_POLY = {
    1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11B,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x4443,
    15: 0x8003, 16: 0x1100B,
}


def poly_mulmod(a: int, b: int, poly: int, m: int) -> int:
    """Carry-less multiply then reduce, bit by bit (slow reference path)."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return result


def is_irreducible(poly: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for div in range(1 << d, 1 << (d + 1)):
            if _poly_mod(poly, div) == 0:
                return False
    return True


def _poly_mod(a: int, b: int) -> int:
    db = b.bit_length()
    while a.bit_length() >= db:
        a ^= b << (a.bit_length() - db)
    return a


class GaloisField:
    """GF(2^m) with a fixed reduction polynomial."""

    def __init__(self, m: int = 8, poly: int | None = None):
        if not 1 <= m <= 16:
            raise ValueError(f"extension degree {m} outside 1..16")
        poly = DEFAULT_POLY[m] if poly is None else int(poly)
        if poly.bit_length() - 1 != m:
            raise ValueError(f"polynomial {poly:#x} does not have degree {m}")
        self.m = m
        self.poly = poly
        self.order = 1 << m
        self.exp, self.log = _tables(m, poly)
        self.dtype = np.uint8 if m <= 8 else np.uint16

    def __repr__(self):
        return f"GaloisField(m={self.m}, poly={self.poly:#x})"

    def __eq__(self, other):
        return isinstance(other, GaloisField) and (self.m, self.poly) == (other.m, other.poly)

    def __hash__(self):
        return hash((self.m, self.poly))

    # scalar and elementwise ops -------------------------------------------

    @staticmethod
    def add(a, b):
        return a ^ b

    sub = add

    def mul(self, a, b):
        if np.isscalar(a) and np.isscalar(b):
            if a == 0 or b == 0:
                return 0
            return int(self.exp[self.log[a] + self.log[b]])
        a = np.asarray(a)
        b = np.asarray(b)
        out = self.exp[self.log[a] + self.log[b]]
        return np.where((a == 0) | (b == 0), 0, out).astype(self.dtype)

    def inv(self, a):
        if np.isscalar(a):
            if a == 0:
                raise DivisionByZero("zero has no inverse")
            return int(self.exp[(self.order - 1) - self.log[a]])
        a = np.asarray(a)
        if np.any(a == 0):
            raise DivisionByZero("zero has no inverse")
        return self.exp[(self.order - 1) - self.log[a]].astype(self.dtype)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def power(self, a: int, n: int) -> int:
        if a == 0:
            return 0 if n > 0 else 1
        return int(self.exp[(self.log[a] * n) % (self.order - 1)])

    def random(self, shape, rng: np.random.Generator, nonzero: bool = False) -> np.ndarray:
        low = 1 if nonzero else 0
        return rng.integers(low, self.order, size=shape, dtype=np.int64).astype(self.dtype)

    def scale_rows(self, factors: np.ndarray, row: np.ndarray) -> np.ndarray:
        """Outer product factors[i] * row[j]."""
        return self.mul(np.asarray(factors)[:, None], np.asarray(row)[None, :])

    def matmul(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A))
        B = np.asarray(B)
        vec = B.ndim == 1
        B = B.reshape(B.shape[0], -1)
        if A.shape[1] != B.shape[0]:
            raise ShapeMismatch(f"cannot multiply {A.shape} by {B.shape}")
        out = np.zeros((A.shape[0], B.shape[1]), dtype=self.dtype)
        for j in range(A.shape[1]):
            out ^= self.scale_rows(A[:, j], B[j])
        return out[:, 0] if vec else out

    # linear algebra ----------------------------------------------------------

    def row_reduce(self, M, rhs=None):
        """Reduced row echelon form; returns (R, rhs', pivot columns)."""
        R = np.array(M, dtype=self.dtype, copy=True)
        if R.ndim != 2:
            R = R.reshape(R.shape[0] if R.ndim else 0, -1)
        X = None if rhs is None else np.array(rhs, dtype=self.dtype, copy=True).reshape(R.shape[0], -1)
        nrows, ncols = R.shape
        pivots = []
        r = 0
        for col in range(ncols):
            if r == nrows:
                break
            nz = np.flatnonzero(R[r:, col])
            if nz.size == 0:
                continue
            p = r + nz[0]
            if p != r:
                R[[r, p]] = R[[p, r]]
                if X is not None:
                    X[[r, p]] = X[[p, r]]
            pinv = self.inv(int(R[r, col]))
            R[r] = self.mul(R[r], pinv)
            if X is not None:
                X[r] = self.mul(X[r], pinv)
            factors = R[:, col].copy()
            factors[r] = 0
            rows = np.flatnonzero(factors)
            if rows.size:
                R[rows] ^= self.scale_rows(factors[rows], R[r])
                if X is not None:
                    X[rows] ^= self.scale_rows(factors[rows], X[r])
            pivots.append(col)
            r += 1
        return R, X, pivots

    def rank(self, M) -> int:
        M = np.asarray(M)
        if M.size == 0:
            return 0
        return len(self.row_reduce(M)[2])

    def solve(self, M, rhs) -> np.ndarray:
        """Unique solution x of M x = rhs.

        rhs may be a vector or a matrix with one column per symbol.  Raises
        InconsistentSystem or UnderdeterminedSystem when no unique solution
        exists.
        """
        M = np.atleast_2d(np.asarray(M))
        rhs_arr = np.asarray(rhs)
        if rhs_arr.shape[0] != M.shape[0]:
            raise ShapeMismatch(f"{M.shape[0]} equations but {rhs_arr.shape[0]} right-hand sides")
        R, X, pivots = self.row_reduce(M, rhs_arr)
        rank = len(pivots)
        if np.any(X[rank:]):
            raise InconsistentSystem("right-hand side outside the column space")
        if rank < M.shape[1]:
            raise UnderdeterminedSystem(rank, M.shape[1])
        sol = X[:rank]
        return sol[:, 0] if rhs_arr.ndim == 1 else sol


@lru_cache(maxsize=None)
def _tables(m: int, poly: int):
    n = (1 << m) - 1
    gen = _find_generator(m, poly)
    exp = np.zeros(2 * n + 1, dtype=np.int64)
    log = np.zeros(1 << m, dtype=np.int64)
    x = 1
    for i in range(n):
        exp[i] = x
        log[x] = i
        x = poly_mulmod(x, gen, poly, m)
    exp[n:2 * n] = exp[:n]
    exp[2 * n] = exp[0]
    exp.setflags(write=False)
    log.setflags(write=False)
    return exp, log


def _find_generator(m: int, poly: int) -> int:
    n = (1 << m) - 1
    if n == 1:
        return 1
    for g in range(2, 1 << m):
        x = g
        period = 1
        while x != 1 and period <= n:
            x = poly_mulmod(x, g, poly, m)
            period += 1
        if period == n:
            return g
    raise ValueError(f"{poly:#x} is not irreducible: no multiplicative generator")


@lru_cache(maxsize=None)
def field(m: int = 8) -> GaloisField:
    """Shared instance with the default polynomial."""
    return GaloisField(m)


def full_rank_probability(k: int, order: int, rows: int | None = None) -> float:
    """Probability that a uniform random rows x k matrix (rows >= k) has rank k."""
    rows = k if rows is None else rows
    p = 1.0
    for i in range(rows - k + 1, rows + 1):
        p *= 1.0 - float(order) ** (-i)
    return p
