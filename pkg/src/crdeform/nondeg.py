"""Finite nondegeneracy of maps at the base point, with exact determinant certificates.

The antiholomorphic derivatives of the target gradients are taken along the
slice z = 0, tau = 0 of the complexified source, where the chart reduces to
zeta = (chi, 0) and the plain partials in chi are CR derivatives.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from . import linalg
from .errors import DegreeExhaustedError, PreconditionError, VerificationError
from .manifold import DefiningIdeal, GenericManifold, check_maps_into
from .series import (
    GaussianRational,
    SeriesVector,
    TruncatedSeries,
    compose,
    conjugate_swap,
    specialize,
)

__all__ = [
    "DerivativeRowTable",
    "NondegCertificate",
    "DegeneracyVerdict",
    "derivative_rows",
    "find_nondegeneracy",
    "is_k_nondegenerate",
    "multi_indices",
]


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All multiindices of length n and order exactly k, lex-descending."""
    out = [a for a in itertools.product(range(k, -1, -1), repeat=n) if sum(a) == k]
    return out


def _factorial(alpha) -> int:
    r = 1
    for a in alpha:
        r *= math.factorial(a)
    return r


@dataclass(frozen=True)
class DerivativeRowTable:
    """rows[(alpha, ell)] = d_chi^alpha rho_{ell, Z'}(0, Hbar(chi, 0)) at chi = 0 (ell is 0-based)."""

    n: int
    N: int
    ngens: int
    k_max: int
    rows: dict = field(hash=False)

    def ordered_keys(self) -> list[tuple]:
        keys = []
        for k in range(self.k_max + 1):
            for a in multi_indices(self.n, k):
                for ell in range(self.ngens):
                    keys.append((a, ell))
        return keys

    def row(self, alpha, ell) -> list:
        return self.rows[(tuple(alpha), ell)]


def _slice_functions(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal,
                     eps: Sequence | None = None) -> list[list[TruncatedSeries]]:
    """g[ell][k](chi) = d rho_ell / d Zp_k evaluated at (0, Hbar(chi, 0))."""
    ctx = H.blocks
    keep = set(ctx.block_slice("chi"))
    zero_all = {nm: 0 for i, nm in enumerate(ctx.names()) if i not in keep}
    hbar = [specialize(conjugate_swap(c), zero_all) for c in H]
    if ideal.eps_dim:
        ideal = ideal.at_eps(eps if eps is not None else [0] * ideal.eps_dim)
    N = ideal.N
    out = []
    for j in range(ideal.ngens):
        grads = ideal.gradient(j)
        D = min(grads[0].trunc, H.trunc)
        subs = [TruncatedSeries.zero(ctx, D) for _ in range(N)] + [h.with_trunc(D) for h in hbar]
        out.append([compose(g.with_trunc(D), SeriesVector(subs)) for g in grads])
    return out


def derivative_rows(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal, k_max: int,
                    eps: Sequence | None = None, verify_map: bool = True) -> DerivativeRowTable:
    if verify_map:
        chk = check_maps_into(H, M, ideal, eps)
        if not chk:
            raise VerificationError(f"map does not satisfy the mapping equation: {chk.describe()}")
    D = min(H.trunc, ideal.trunc, M.trunc)
    if D < k_max + 1:
        raise DegreeExhaustedError(
            f"derivative rows of order {k_max} need truncation degree at least {k_max + 1} (have {D})"
        )
    g = _slice_functions(H, M, ideal, eps)
    ctx = H.blocks
    chi = list(ctx.block_slice("chi"))
    rows = {}
    for k in range(k_max + 1):
        for a in multi_indices(M.n, k):
            exp = [0] * ctx.nvars
            for i, ai in zip(chi, a):
                exp[i] = ai
            fac = _factorial(a)
            for ell, gl in enumerate(g):
                rows[(a, ell)] = [gk.coefficient(exp) * fac for gk in gl]
    return DerivativeRowTable(M.n, ideal.N, ideal.ngens, k_max, rows)


@dataclass(frozen=True)
class NondegCertificate:
    iota: tuple  # multiindices, one per selected row
    ell: tuple  # generator indices (1-based)
    det_value: GaussianRational
    k0: int
    matrix: tuple

    def verify(self, table: DerivativeRowTable) -> bool:
        mat = [table.row(a, l - 1) for a, l in zip(self.iota, self.ell)]
        return bool(self.det_value) and linalg.det(mat) == self.det_value and \
            self.k0 == max(sum(a) for a in self.iota)

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "iota": [list(a) for a in self.iota],
            "ell": list(self.ell),
            "determinant": str(self.det_value),
            "rows": [[str(v) for v in r] for r in self.matrix],
        }


@dataclass(frozen=True)
class DegeneracyVerdict:
    k_max: int
    rank_profile: tuple  # cumulative rank after each order 0..k_max
    N: int

    def __bool__(self):
        return False

    def to_dict(self) -> dict:
        return {
            "verdict": f"degenerate up to order {self.k_max}",
            "rank_profile": list(self.rank_profile),
            "target_dimension": self.N,
        }


def _greedy(table: DerivativeRowTable):
    span = linalg.RowSpan(table.N)
    chosen = []
    profile = []
    for k in range(table.k_max + 1):
        for a in multi_indices(table.n, k):
            for ell in range(table.ngens):
                row = table.row(a, ell)
                if span.dim < table.N and span.add(row):
                    chosen.append((a, ell, row))
        profile.append(span.dim)
        if span.dim == table.N:
            break
    return chosen, profile


def certificate_from_table(table: DerivativeRowTable):
    chosen, profile = _greedy(table)
    if len(chosen) < table.N:
        return DegeneracyVerdict(table.k_max, tuple(profile), table.N)
    mat = [r for _, _, r in chosen]
    det = linalg.det(mat)
    return NondegCertificate(
        tuple(a for a, _, _ in chosen),
        tuple(l + 1 for _, l, _ in chosen),
        GaussianRational.coerce(det),
        max(sum(a) for a, _, _ in chosen),
        tuple(tuple(r) for r in mat),
    )


def default_kmax(D: int) -> int:
    return max(min(2 * (D // 2), D - 1), 0)


def find_nondegeneracy(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal,
                       k_max: int | None = None, eps: Sequence | None = None):
    """Certificate with minimal k0, or a :class:`DegeneracyVerdict` (falsy)."""
    for c in H:
        if c.constant_term():
            raise PreconditionError("map must send the base point to 0")
    if k_max is None:
        k_max = default_kmax(min(H.trunc, ideal.trunc, M.trunc))
    table = derivative_rows(H, M, ideal, k_max, eps)
    return certificate_from_table(table)


def is_k_nondegenerate(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal, k: int,
                       exact: bool = False, eps: Sequence | None = None) -> bool:
    """Rows of order <= k span; with ``exact`` additionally k equals the minimal order."""
    if k < 0:
        return False
    table = derivative_rows(H, M, ideal, k, eps)
    res = certificate_from_table(table)
    if not isinstance(res, NondegCertificate):
        return False
    return res.k0 == k if exact else True
