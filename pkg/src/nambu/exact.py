"""Exact rational linear algebra on top of ``flint.fmpq_mat``."""

from __future__ import annotations

from typing import Sequence

import flint

from .polyring import rational


class InconsistentSystem(ArithmeticError):
    """A linear system A x = b has no rational solution."""


def matrix(rows: Sequence[Sequence], ncols: int | None = None) -> flint.fmpq_mat:
    rows = [list(r) for r in rows]
    m = len(rows)
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    return flint.fmpq_mat(m, ncols, [rational(v) for r in rows for v in r])


def identity(n: int) -> flint.fmpq_mat:
    return flint.fmpq_mat(n, n, [int(i == j) for i in range(n) for j in range(n)])


def to_rows(M: flint.fmpq_mat) -> list[list]:
    return M.tolist()


def rref(M: flint.fmpq_mat) -> tuple[flint.fmpq_mat, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    R, rank = M.rref()
    pivots = []
    rows = R.tolist()
    for i in range(rank):
        for j, v in enumerate(rows[i]):
            if v != 0:
                pivots.append(j)
                break
    return R, pivots


def rank(M: flint.fmpq_mat) -> int:
    if M.nrows() == 0 or M.ncols() == 0:
        return 0
    return M.rank()


def nullspace(M: flint.fmpq_mat) -> list[list]:
    """Basis of {x : M x = 0}, one vector per free column."""
    ncols = M.ncols()
    if M.nrows() == 0:
        return [[int(i == j) for i in range(ncols)] for j in range(ncols)]
    R, pivots = rref(M)
    rows = R.tolist()
    free = [j for j in range(ncols) if j not in set(pivots)]
    basis = []
    for f in free:
        v = [flint.fmpq(0)] * ncols
        v[f] = flint.fmpq(1)
        for i, p in enumerate(pivots):
            v[p] = -rows[i][f]
        basis.append(v)
    return basis


def solve(M: flint.fmpq_mat, b: Sequence) -> list:
    """One solution of M x = b: the echelon solution with free variables set to zero."""
    m, ncols = M.nrows(), M.ncols()
    if len(b) != m:
        raise ValueError("right-hand side has the wrong length")
    if ncols == 0:
        if any(rational(v) for v in b):
            raise InconsistentSystem("no unknowns but a nonzero right-hand side")
        return []
    aug = flint.fmpq_mat(m, ncols + 1, [v for i, row in enumerate(M.tolist()) for v in row + [rational(b[i])]])
    R, pivots = rref(aug)
    if ncols in pivots:
        raise InconsistentSystem("right-hand side is not in the column space")
    rows = R.tolist()
    x = [flint.fmpq(0)] * ncols
    for i, p in enumerate(pivots):
        x[p] = rows[i][ncols]
    return x


def congruence_diagonalize(S: Sequence[Sequence]) -> tuple[list[list], list]:
    """Symmetric Gaussian elimination: returns (P, d) with P^T S P = diag(d).

    Pivots are taken on the diagonal when possible; a zero diagonal with a
    nonzero off-diagonal entry is fixed by the substitution e_i <- e_i + e_j.
    """
    n = len(S)
    A = [[rational(v) for v in row] for row in S]
    for i in range(n):
        for j in range(n):
            if A[i][j] != A[j][i]:
                raise ValueError("matrix is not symmetric")
    P = [[flint.fmpq(int(i == j)) for j in range(n)] for i in range(n)]

    def add_col_row(i, j, c):
        # column op e_i += c e_j applied as congruence
        for r in range(n):
            A[r][i] += c * A[r][j]
        for r in range(n):
            A[i][r] += c * A[j][r]
        for r in range(n):
            P[r][i] += c * P[r][j]

    def swap(i, j):
        A[i], A[j] = A[j], A[i]
        for r in range(n):
            A[r][i], A[r][j] = A[r][j], A[r][i]
        for r in range(n):
            P[r][i], P[r][j] = P[r][j], P[r][i]

    for k in range(n):
        if A[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if A[i][i] != 0), None)
            if piv is not None:
                swap(k, piv)
            else:
                off = next(((i, j) for i in range(k, n) for j in range(i + 1, n) if A[i][j] != 0), None)
                if off is None:
                    break
                i, j = off
                if i != k:
                    swap(k, i)
                    if j == k:
                        j = i
                add_col_row(k, j, flint.fmpq(1))
        piv = A[k][k]
        for j in range(k + 1, n):
            if A[k][j] != 0:
                add_col_row(j, k, -A[k][j] / piv)
    return P, [A[i][i] for i in range(n)]
