"""Segre maps, their generic rank, and the minimality order."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from . import linalg
from .errors import DegreeExhaustedError, PreconditionError
from .manifold import GenericManifold
from .series import (
    Block,
    GaussianRational,
    SeriesVector,
    TruncatedSeries,
    VariableBlocks,
    compose,
    conjugate_coefficients,
    differentiate,
    embed,
    evaluate,
)

__all__ = [
    "segre_blocks",
    "SegreMap",
    "segre_map",
    "GenericRank",
    "generic_rank",
    "MinimalityReport",
    "minimality_order",
    "parametrization_order",
]


def segre_blocks(n: int, q: int) -> VariableBlocks:
    return VariableBlocks(tuple(Block(f"x{j}", n, "x") for j in range(1, q + 1)))


@dataclass(frozen=True)
class SegreMap:
    q: int
    map: SeriesVector

    @property
    def trunc(self) -> int:
        return self.map.trunc

    @property
    def blocks(self) -> VariableBlocks:
        return self.map.blocks


def segre_map(M: GenericManifold, q: int) -> SegreMap:
    """S^1 = (x1, 0) and S^q = (x1, Q(x1, x2, conj(S^{q-1}_w)(x2, ..., xq)))."""
    if q < 1:
        raise PreconditionError("Segre order must be at least 1")
    D = M.trunc
    if D < q:
        raise DegreeExhaustedError(
            f"Segre map of order {q} needs truncation degree at least {q} (have {D})"
        )
    n, d = M.n, M.d
    X = segre_blocks(n, 1)
    comps = [TruncatedSeries.variable(X, D, k) for k in range(n)]
    comps += [TruncatedSeries.zero(X, D) for _ in range(d)]
    S = SeriesVector(comps)
    for level in range(2, q + 1):
        Xq = segre_blocks(n, level)
        shift = {f"x{j}": f"x{j + 1}" for j in range(1, level)}
        prev_w = [conjugate_coefficients(embed(c, Xq, shift)) for c in S.components[n:]]
        x1 = [TruncatedSeries.variable(Xq, D, k) for k in range(n)]
        x2 = [TruncatedSeries.variable(Xq, D, Xq.offset("x2") + k) for k in range(n)]
        subs = x1 + [TruncatedSeries.zero(Xq, D) for _ in range(d)] + x2 + prev_w
        w = [compose(c, SeriesVector(subs)) for c in M.Q]
        S = SeriesVector(x1 + w)
    return SegreMap(q, S)


# ---------------------------------------------------------------------------
# generic rank
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenericRank:
    rank: int
    witness: tuple  # rational point where the witness minor is nonzero
    rows: tuple
    cols: tuple
    minor_value: GaussianRational | None
    degree_bound: int  # minors were computed exactly up to this total degree
    minors_checked: int

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "witness": [str(v) for v in self.witness],
            "minor_rows": list(self.rows),
            "minor_cols": list(self.cols),
            "minor_value": None if self.minor_value is None else str(self.minor_value),
            "degree_bound": self.degree_bound,
            "vanishing_minors_checked": self.minors_checked,
        }


def _prefilter_points(m: int, count: int = 4):
    # deterministic "generic looking" rationals
    for k in range(count):
        yield [GaussianRational(f"{(3 * j + 5 * k + 2)}/{(2 * j + k + 3)}") for j in range(m)]


def _poly_copy(f: TruncatedSeries, D: int) -> TruncatedSeries:
    return TruncatedSeries(f.blocks, D, f.terms, _trusted=True)


def _minor_series(J, rows, cols, D):
    """Exact determinant of a polynomial submatrix by Laplace expansion."""

    @lru_cache(maxsize=None)
    def rec(ri: int, colset: tuple) -> TruncatedSeries:
        if ri == len(rows):
            return TruncatedSeries.constant(J[0][0].blocks, D, 1)
        total = TruncatedSeries.zero(J[0][0].blocks, D)
        for pos, c in enumerate(colset):
            entry = J[rows[ri]][c]
            if entry.is_zero():
                continue
            sub = rec(ri + 1, colset[:pos] + colset[pos + 1:])
            if sub.is_zero():
                continue
            term = entry * sub
            total = total - term if pos % 2 else total + term
        return total

    return rec(0, tuple(cols))


def _nonzero_point(f: TruncatedSeries, m: int):
    for pt in _prefilter_points(m, 8):
        if evaluate(f, pt):
            return pt
    # a nonzero polynomial of degree <= g has a non-root on any grid of side g + 1
    g = max(f.degree(), 0)
    for pt in itertools.product(range(1, g + 2), repeat=m):
        if evaluate(f, pt):
            return [GaussianRational(v) for v in pt]
    raise AssertionError("nonzero polynomial vanished on a full grid")  # pragma: no cover


def generic_rank(A: SeriesVector) -> GenericRank:
    """Rank of the Jacobian of A over the field of rational functions.

    A rational pre-filter proposes a rank and witness; the claim is then
    certified by checking that every larger minor vanishes identically as a
    polynomial in the stored representative.
    """
    if A.trunc < 1:
        raise DegreeExhaustedError("generic rank needs truncation degree at least 1")
    m = A.blocks.nvars
    N = len(A)
    deg = max((c.degree() for c in A), default=0)
    Jt = [[differentiate(c, k) for k in range(m)] for c in A]
    entry_deg = max(deg - 1, 0)
    # polynomial copies with room for exact products
    bound = entry_deg * min(N, m)
    J = [[_poly_copy(e, max(bound, e.trunc)) for e in row] for row in Jt]
    Dm = max(bound, max((e.trunc for row in J for e in row), default=0))
    best = (0, None)
    for pt in _prefilter_points(m):
        mat = [[evaluate(e, pt) for e in row] for row in J]
        r = linalg.rank(mat)
        if r > best[0]:
            best = (r, pt)
    r, pt = best
    checked = 0
    while True:
        k = r + 1
        nonzero = None
        if k <= min(N, m):
            for rows in itertools.combinations(range(N), k):
                for cols in itertools.combinations(range(m), k):
                    checked += 1
                    minor = _minor_series(J, rows, cols, Dm)
                    if not minor.is_zero():
                        nonzero = (rows, cols, minor)
                        break
                if nonzero:
                    break
        if nonzero is None:
            break
        # the pre-filter missed a larger rank: promote it with a guaranteed witness
        rows, cols, minor = nonzero
        r = k
        pt = _nonzero_point(minor, m)
    if r == 0:
        return GenericRank(0, tuple(GaussianRational(0) for _ in range(m)), (), (), None, Dm, checked)
    mat = [[evaluate(e, pt) for e in row] for row in J]
    rows, cols = _witness_minor(mat, r)
    val = linalg.det([[mat[i][j] for j in cols] for i in rows])
    return GenericRank(r, tuple(pt), rows, cols, val, Dm, checked)


def _witness_minor(mat, r):
    N, m = len(mat), len(mat[0])
    for rows in itertools.combinations(range(N), r):
        for cols in itertools.combinations(range(m), r):
            if linalg.det([[mat[i][j] for j in cols] for i in rows]):
                return rows, cols
    raise AssertionError("no nonzero minor at witness")  # pragma: no cover


# ---------------------------------------------------------------------------
# minimality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimalityReport:
    ranks: tuple
    t: int | None
    witnesses: tuple
    bound: int
    N: int

    @property
    def minimal(self) -> bool:
        return self.t is not None

    def to_dict(self) -> dict:
        return {
            "ranks": list(self.ranks),
            "t": self.t,
            "minimal": self.minimal,
            "search_bound": self.bound,
            "ambient_dimension": self.N,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def minimality_order(M: GenericManifold, bound: int | None = None) -> MinimalityReport:
    """Least q <= bound (default d + 1) with S^q of generic rank N."""
    bound = M.d + 1 if bound is None else bound
    ranks, wits = [], []
    t = None
    for q in range(1, bound + 1):
        g = generic_rank(segre_map(M, q).map)
        if ranks and g.rank < ranks[-1]:  # pragma: no cover - structural invariant
            raise AssertionError("Segre ranks decreased")
        ranks.append(g.rank)
        wits.append(g)
        if g.rank == M.N:
            t = q
            break
    return MinimalityReport(tuple(ranks), t, tuple(wits), bound, M.N)


def parametrization_order(t: int, k0: int) -> int:
    if t < 1 or k0 < 1:
        raise PreconditionError("t and k0 must be positive")
    return 2 * t * k0
