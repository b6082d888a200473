"""Exact linear algebra over Q (gmpy2 ``mpq``) or Q(i) (:class:`GaussianRational`).

Matrices are either dense lists of rows or sparse rows ``{column: value}``.
All routines are fraction-exact Gaussian elimination; no pivoting heuristics
beyond choosing the first nonzero entry, which keeps results deterministic.
"""

from __future__ import annotations

from typing import Sequence

from gmpy2 import mpq

from .series import GaussianRational

__all__ = [
    "rref_sparse",
    "nullspace_sparse",
    "rank",
    "det",
    "inverse",
    "solve",
    "nullspace",
    "RowSpan",
]


def _inv(x):
    if isinstance(x, GaussianRational):
        return x.inverse()
    return 1 / mpq(x)


def _scale(row: dict, c) -> dict:
    return {k: v * c for k, v in row.items()}


def _axpy(row: dict, c, other: dict) -> None:
    """row <- row - c * other, in place."""
    for k, v in other.items():
        cur = row.get(k)
        nv = (-(c * v)) if cur is None else cur - c * v
        if nv:
            row[k] = nv
        elif cur is not None:
            del row[k]


def rref_sparse(rows: Sequence[dict], ncols: int | None = None):
    """Reduced row echelon form of sparse rows.

    Returns ``(reduced, pivots)`` where ``reduced[j]`` has leading entry 1 in
    column ``pivots[j]`` and zeros in every other pivot column.
    """
    work = [dict(r) for r in rows if r]
    pivrows: dict[int, dict] = {}
    for row in work:
        # eliminate existing pivots, then normalise
        for col in sorted(k for k in row if k in pivrows):
            c = row.get(col)
            if c:
                _axpy(row, c, pivrows[col])
        if not row:
            continue
        col = min(row)
        row = _scale(row, _inv(row[col]))
        for other in pivrows.values():
            c = other.get(col)
            if c:
                _axpy(other, c, row)
        pivrows[col] = row
    pivots = sorted(pivrows)
    return [pivrows[p] for p in pivots], pivots


def nullspace_sparse(rows: Sequence[dict], ncols: int) -> list[dict]:
    """Basis of {x : rows * x = 0}, one vector per free column, as sparse dicts."""
    reduced, pivots = rref_sparse(rows, ncols)
    pivset = set(pivots)
    free = [c for c in range(ncols) if c not in pivset]
    # column -> list of (pivot column, coefficient) for back substitution
    by_free: dict[int, list] = {f: [] for f in free}
    for p, r in zip(pivots, reduced):
        for k, v in r.items():
            if k != p:
                by_free[k].append((p, v))
    basis = []
    one = _one_like(reduced)
    for f in free:
        vec = {f: one}
        for p, v in by_free[f]:
            vec[p] = -v
        basis.append(vec)
    return basis


def _one_like(rows):
    for r in rows:
        for v in r.values():
            return GaussianRational(1) if isinstance(v, GaussianRational) else mpq(1)
    return mpq(1)


def _dense_to_sparse(M) -> list[dict]:
    return [{j: v for j, v in enumerate(row) if v} for row in M]


def rank(M) -> int:
    return len(rref_sparse(_dense_to_sparse(M))[1])


def det(M):
    """Exact determinant of a square dense matrix."""
    n = len(M)
    if any(len(r) != n for r in M):
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return mpq(1)
    A = [list(r) for r in M]
    sample = next((v for r in A for v in r if isinstance(v, GaussianRational)), None)
    result = GaussianRational(1) if sample is not None else mpq(1)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c]), None)
        if p is None:
            return result * 0
        if p != c:
            A[c], A[p] = A[p], A[c]
            result = -result
        piv = A[c][c]
        result = result * piv
        inv = _inv(piv)
        for r in range(c + 1, n):
            f = A[r][c]
            if f:
                f = f * inv
                Ar, Ac = A[r], A[c]
                for k in range(c, n):
                    if Ac[k]:
                        Ar[k] = Ar[k] - f * Ac[k]
    return result


def solve(M, b):
    """Unique solution of the square system M x = b; raises if singular."""
    n = len(M)
    rows = [{**{j: v for j, v in enumerate(M[i]) if v}, **({n: b[i]} if b[i] else {})}
            for i in range(n)]
    reduced, pivots = rref_sparse(rows, n + 1)
    if pivots[:n] != list(range(n)) or len(pivots) > n:
        raise ZeroDivisionError("singular or inconsistent linear system")
    zero = b[0] * 0 if n else mpq(0)
    return [r.get(n, zero) for r in reduced]


def inverse(M):
    n = len(M)
    sample = next((v for r in M for v in r if isinstance(v, GaussianRational)), None)
    one = GaussianRational(1) if sample is not None else mpq(1)
    zero = one * 0
    rows = []
    for i in range(n):
        r = {j: v for j, v in enumerate(M[i]) if v}
        r[n + i] = one
        rows.append(r)
    reduced, pivots = rref_sparse(rows, 2 * n)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [[reduced[i].get(n + j, zero) for j in range(n)] for i in range(n)]


def nullspace(M, ncols: int | None = None) -> list[list]:
    ncols = len(M[0]) if ncols is None else ncols
    basis = nullspace_sparse(_dense_to_sparse(M), ncols)
    out = []
    for vec in basis:
        zero = next(iter(vec.values())) * 0
        out.append([vec.get(j, zero) for j in range(ncols)])
    return out


class RowSpan:
    """Incrementally grown row space with membership tests (echelon form kept)."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self._piv: dict[int, dict] = {}

    @property
    def dim(self) -> int:
        return len(self._piv)

    def reduce(self, row) -> dict:
        r = row if isinstance(row, dict) else {j: v for j, v in enumerate(row) if v}
        r = dict(r)
        for col in sorted(self._piv):
            c = r.get(col)
            if c:
                _axpy(r, c, self._piv[col])
        return r

    def contains(self, row) -> bool:
        return not self.reduce(row)

    def add(self, row) -> bool:
        """Add a row; returns True if it enlarged the span."""
        r = self.reduce(row)
        if not r:
            return False
        col = min(r)
        r = _scale(r, _inv(r[col]))
        for other in self._piv.values():
            c = other.get(col)
            if c:
                _axpy(other, c, r)
        self._piv[col] = r
        return True

    def basis(self) -> list[dict]:
        return [self._piv[c] for c in sorted(self._piv)]
