"""Infinitesimal deformations of a map as exact kernels of real linear systems.

Unknowns are the real and imaginary parts of the Taylor coefficients of a
holomorphic vector field Y along H (and, for a deformation, a real parameter
direction v).  The pairing 2 Re(rho_Z'(H, Hbar) . Y) + rho_eps . v = 0 on M
is imposed as the complexified identity

    A(Z, zeta) . Y(Z) + Abar(zeta, Z) . Ybar(zeta) + rho_eps . v = 0

on the chart, coefficient by coefficient up to total degree kappa.  Equations
of degree e only involve coefficients of Y of degree <= e, so the kernel at
order kappa projects onto the kernel at every lower order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from gmpy2 import mpq

from . import linalg
from .errors import BudgetError, DegreeExhaustedError, PreconditionError, VerificationError
from .manifold import (
    DefiningIdeal,
    Deformation,
    GenericManifold,
    check_maps_into,
    pull_back,
    restrict_to_M,
)
from .series import (
    I,
    Block,
    GaussianRational,
    SeriesVector,
    TruncatedSeries,
    VariableBlocks,
    conjugate_swap,
    differentiate,
    embed,
    specialize,
)

__all__ = [
    "Unknown",
    "InfDefBasis",
    "hol_jets",
    "hol_def_jets",
    "hol_residual",
    "StabilizationReport",
    "stabilized_dim",
    "evaluate_at_base",
    "CurveInT",
    "TangencyResult",
    "curve_tangency",
    "HigherOrderSystem",
    "hol_k_jets",
    "IsolationVerdict",
    "isolation_report",
    "BasepointIsoResult",
    "basepoint_iso_check",
]

_ZERO = mpq(0)


@dataclass(frozen=True)
class Unknown:
    """A real unknown: ``v`` component, or Re/Im of the Z^beta coefficient of Y_k."""

    kind: str  # "v" or "Y"
    index: int  # v component or Y component (0-based)
    beta: tuple = ()
    part: str = ""  # "re" / "im" for Y

    @property
    def degree(self) -> int:
        return sum(self.beta)

    def label(self) -> str:
        if self.kind == "v":
            return f"v.{self.index + 1}"
        return f"{self.part}(Y{self.index + 1}[{','.join(map(str, self.beta))}])"


def _monomials(nvars: int, lo: int, hi: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(lo, hi + 1):
        out += [a for a in itertools.product(range(deg, -1, -1), repeat=nvars) if sum(a) == deg]
    return out


def _z_indices(ctx: VariableBlocks) -> list[int]:
    return list(ctx.block_slice("z")) + list(ctx.block_slice("w"))


def _zeta_indices(ctx: VariableBlocks) -> list[int]:
    return list(ctx.block_slice("chi")) + list(ctx.block_slice("tau"))


class _System:
    """Shared assembly of the pairing identity for a fixed (H, M, ideal)."""

    def __init__(self, H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal,
                 kappa: int, with_eps: bool, vanish_at_base: bool, verify_map: bool = True,
                 equation_degree: int | None = None):
        self.M, self.ideal, self.H = M, ideal, H
        self.kappa = kappa
        base_ideal = ideal.at_eps([0] * ideal.eps_dim) if ideal.eps_dim else ideal
        if verify_map:
            chk = check_maps_into(H, M, base_ideal)
            if not chk:
                raise VerificationError(f"map does not satisfy the mapping equation: {chk.describe()}")
        D = min(H.trunc, M.trunc, ideal.trunc)
        E = kappa if equation_degree is None else equation_degree
        if kappa < 0 or E < kappa:
            raise PreconditionError("jet order must be non-negative and at most the equation degree")
        if E > D - 1:
            raise DegreeExhaustedError(
                f"equations of degree {E} need truncation degree at least {E + 1} (have {D})"
            )
        self.E = E  # equation degree bound
        ctx = H.blocks
        self.ctx = ctx
        self.Np = ideal.N
        zi = _z_indices(ctx)
        self.nz = len(zi)
        lo = 1 if vanish_at_base else 0
        self.lo = lo
        # gradients pulled back and restricted
        self.A, self.Ab = [], []
        self.Veps = []
        for j in range(ideal.ngens):
            grads = ideal.gradient(j)
            row, rowb = [], []
            for g in grads:
                pb = pull_back(g, H, None)
                row.append(restrict_to_M(pb, M).with_trunc(self.E))
                rowb.append(restrict_to_M(conjugate_swap(pb), M).with_trunc(self.E))
            self.A.append(row)
            self.Ab.append(rowb)
            if with_eps:
                if not ideal.eps_dim:
                    raise PreconditionError("deformation unknowns requested for an ideal without eps")
                ev = []
                for k in range(ideal.eps_dim):
                    de = differentiate(ideal.rho[j], f"eps.{k + 1}")
                    ev.append(restrict_to_M(pull_back(de, H, None), M).with_trunc(self.E))
                self.Veps.append(ev)
        # restricted monomials Z^beta and zeta^beta
        D0 = self.E
        self.betas = _monomials(self.nz, lo, kappa)
        Zvars = [TruncatedSeries.variable(ctx, D0, i) for i in zi]
        Zr = [restrict_to_M(v, M).with_trunc(D0) for v in Zvars]
        zeta = [TruncatedSeries.variable(ctx, D0, i) for i in _zeta_indices(ctx)]
        self.Zpow, self.zpow = {}, {}
        for b in self.betas:
            p = TruncatedSeries.constant(ctx, D0, 1)
            q = TruncatedSeries.constant(ctx, D0, 1)
            for v, vb, k in zip(Zr, zeta, b):
                if k:
                    p = p * v ** k
                    q = q * vb ** k
            self.Zpow[b] = p
            self.zpow[b] = q
        self.unknowns: list[Unknown] = []
        if with_eps:
            self.unknowns += [Unknown("v", k) for k in range(ideal.eps_dim)]
        for k in range(self.Np):
            for b in self.betas:
                self.unknowns += [Unknown("Y", k, b, "re"), Unknown("Y", k, b, "im")]

    def column_series(self, u: Unknown) -> list[TruncatedSeries]:
        """Contribution of a unit value of ``u`` to each generator's identity."""
        out = []
        for j in range(self.ideal.ngens):
            if u.kind == "v":
                out.append(self.Veps[j][u.index])
                continue
            a = self.A[j][u.index] * self.Zpow[u.beta]
            b = self.Ab[j][u.index] * self.zpow[u.beta]
            out.append(a + b if u.part == "re" else (a - b) * I)
        return out

    def rows(self) -> list[dict]:
        table: dict = {}
        for col, u in enumerate(self.unknowns):
            for j, s in enumerate(self.column_series(u)):
                for e, c in s.terms.items():
                    if c.re:
                        table.setdefault((j, e, 0), {})[col] = c.re
                    if c.im:
                        table.setdefault((j, e, 1), {})[col] = c.im
        return [table[k] for k in sorted(table)]


@dataclass
class InfDefBasis:
    """Exact kernel of the pairing system at jet order ``kappa``."""

    kappa: int
    equation_degree: int
    unknowns: list
    basis: list  # sparse dicts column -> mpq
    vanish_at_base: bool
    ctx: VariableBlocks = field(repr=False)
    Np: int = 0
    m: int = 0
    _system: object = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def field_of(self, vec: dict) -> tuple[list, SeriesVector]:
        """(v, Y) encoded by a kernel vector; Y is a SeriesVector over the source blocks."""
        D = self.kappa
        v = [_ZERO] * self.m
        comps: list[dict] = [dict() for _ in range(self.Np)]
        zi = _z_indices(self.ctx)
        for col, val in vec.items():
            u = self.unknowns[col]
            if u.kind == "v":
                v[u.index] = val
                continue
            exp = [0] * self.ctx.nvars
            for i, k in zip(zi, u.beta):
                exp[i] = k
            exp = tuple(exp)
            cur = comps[u.index].get(exp, GaussianRational(0))
            add = GaussianRational(val, 0) if u.part == "re" else GaussianRational(0, val)
            comps[u.index][exp] = cur + add
        Y = SeriesVector(TruncatedSeries(self.ctx, D, c) for c in comps)
        return v, Y

    def fields(self) -> list[tuple[list, SeriesVector]]:
        return [self.field_of(b) for b in self.basis]

    def projected_dim(self, order: int | None) -> int:
        if order is None:
            return self.dim
        keep = {i for i, u in enumerate(self.unknowns) if u.kind == "v" or u.degree <= order}
        rows = [{k: v for k, v in b.items() if k in keep} for b in self.basis]
        return len(linalg.rref_sparse(rows)[1])

    def vector_of(self, v: Sequence, Y: SeriesVector) -> dict:
        """Encode (v, Y) in the unknown layout (coefficients beyond kappa are ignored)."""
        zi = _z_indices(self.ctx)
        vec = {}
        for col, u in enumerate(self.unknowns):
            if u.kind == "v":
                val = mpq(v[u.index]) if v else _ZERO
            else:
                exp = [0] * self.ctx.nvars
                for i, k in zip(zi, u.beta):
                    exp[i] = k
                c = embed(Y[u.index], self.ctx).coefficient(exp)
                val = c.re if u.part == "re" else c.im
            if val:
                vec[col] = val
        return vec

    def contains(self, v: Sequence, Y: SeriesVector) -> bool:
        """Membership of the kappa-jet of (v, Y) in the kernel."""
        span = linalg.RowSpan(len(self.unknowns))
        for b in self.basis:
            span.add(b)
        return span.contains(self.vector_of(v, Y))

    def span(self) -> "linalg.RowSpan":
        s = linalg.RowSpan(len(self.unknowns))
        for b in self.basis:
            s.add(b)
        return s

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "equation_degree": self.equation_degree,
            "vanish_at_base": self.vanish_at_base,
            "unknowns": len(self.unknowns),
            "dimension": self.dim,
            "basis": [
                {"v": [str(x) for x in v], "Y": Y.to_text()} for v, Y in self.fields()
            ],
        }


def _solve(system: _System, vanish: bool, m: int) -> InfDefBasis:
    rows = system.rows()
    basis = linalg.nullspace_sparse(rows, len(system.unknowns))
    return InfDefBasis(system.kappa, system.E, system.unknowns, basis, vanish, system.ctx,
                       system.Np, m, system)


def hol_jets(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal, kappa: int,
             vanish_at_base: bool = True, equation_degree: int | None = None) -> InfDefBasis:
    """Kernel for hol(H) at jet order kappa.

    With ``vanish_at_base`` (the default) the fields satisfy Y(0) = 0; the
    relaxed space without that constraint is the one matched by base-point
    deformations.  Raising ``equation_degree`` above kappa restricts to
    polynomial fields of degree <= kappa that satisfy the identity up to that
    degree.
    """
    if ideal.eps_dim:
        ideal = ideal.at_eps([0] * ideal.eps_dim)
    system = _System(H, M, ideal, kappa, False, vanish_at_base, equation_degree=equation_degree)
    return _solve(system, vanish_at_base, 0)


def hol_def_jets(H: SeriesVector, M: GenericManifold, dfm: Deformation, kappa: int,
                 vanish_at_base: bool = True, equation_degree: int | None = None) -> InfDefBasis:
    """Kernel for hol(H, D): unknowns (v, Y), at eps = eps0 = 0."""
    if any(dfm.eps0):
        raise PreconditionError("deformations must be recentred so that eps0 = 0")
    system = _System(H, M, dfm.ideal, kappa, True, vanish_at_base,
                     equation_degree=equation_degree)
    return _solve(system, vanish_at_base, dfm.m)


def hol_residual(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal, v: Sequence,
                 Y: SeriesVector, degree: int) -> list[TruncatedSeries]:
    """Left side of the pairing identity for a concrete (v, Y), computed from scratch."""
    ctx = H.blocks
    out = []
    base = ideal.at_eps([0] * ideal.eps_dim) if ideal.eps_dim else ideal
    for j in range(ideal.ngens):
        grads = base.gradient(j)
        total = TruncatedSeries.zero(ctx, degree)
        for k, g in enumerate(grads):
            term = pull_back(g, H, None).with_trunc(degree) * embed(Y[k], ctx).with_trunc(degree)
            total = total + term
        total = total + conjugate_swap(total)
        if ideal.eps_dim and v:
            for k in range(ideal.eps_dim):
                de = differentiate(ideal.rho[j], f"eps.{k + 1}")
                total = total + pull_back(de, H, None).with_trunc(degree) * GaussianRational(v[k])
        out.append(restrict_to_M(total, M).with_trunc(degree))
    return out


# ---------------------------------------------------------------------------
# sweeps, evaluation, isolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilizationReport:
    kappas: tuple
    projection: int | None
    dims: tuple
    stabilized: bool
    value: int | None
    full_dims: tuple

    @property
    def marker(self) -> str:
        return "heuristic certificate (projected-dimension stabilization)" if self.stabilized \
            else "not stabilized in range"

    def to_dict(self) -> dict:
        return {
            "kappas": list(self.kappas),
            "projection_order": self.projection,
            "projected_dims": list(self.dims),
            "kernel_dims": list(self.full_dims),
            "stabilized": self.stabilized,
            "value": self.value,
            "status": self.marker,
        }


def stabilized_dim(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal,
                   kappa_range: Sequence[int], projection: int | None,
                   deformation: Deformation | None = None,
                   vanish_at_base: bool = True) -> StabilizationReport:
    """dim of the projection of the order-kappa kernel onto ``projection``-jets, per kappa.

    Stabilisation is flagged when the last two values agree.  The projection
    order must not exceed the smallest kappa, which makes the sequence
    non-increasing; ``projection=None`` reports full kernel dimensions.
    """
    kappas = tuple(sorted(kappa_range))
    if not kappas:
        raise PreconditionError("empty kappa range")
    if projection is not None and projection > kappas[0]:
        raise PreconditionError(
            f"projection order {projection} exceeds the smallest jet order {kappas[0]}"
        )
    dims, full = [], []
    for kappa in kappas:
        if deformation is not None:
            basis = hol_def_jets(H, M, deformation, kappa, vanish_at_base)
        else:
            basis = hol_jets(H, M, ideal, kappa, vanish_at_base)
        dims.append(basis.projected_dim(projection))
        full.append(basis.dim)
    if projection is not None:
        for a, b in zip(dims, dims[1:]):
            if b > a:  # pragma: no cover - guaranteed by the triangular structure
                raise AssertionError(f"projected dimensions increased: {dims}")
    stab = len(dims) >= 2 and dims[-1] == dims[-2]
    return StabilizationReport(kappas, projection, tuple(dims), stab,
                               dims[-1] if stab else None, tuple(full))


def evaluate_at_base(basis: InfDefBasis, deformation: Deformation | None = None) -> list[list]:
    """Reduced spanning set (rows of an echelon form) of the real span of evaluations at 0.

    Vectors are in C^N' written as 2N' real coordinates (Re_1, Im_1, ...).  For a
    basis of a base-point deformation the evaluation of Y + c'(0) v is used.
    """
    Np = basis.Np
    span = linalg.RowSpan(2 * Np)
    dc = None
    if basis.m:
        if deformation is None or deformation.chart is None:
            raise PreconditionError("evaluating (v, Y) needs the base-point chart")
        dc = _chart_derivative(deformation.chart)
    zero_exp = tuple([0] * basis.ctx.nvars)
    for v, Y in basis.fields():
        vals = [Y[k].coefficient(zero_exp) for k in range(Np)]
        if dc is not None:
            for k in range(Np):
                for j in range(basis.m):
                    if v[j]:
                        vals[k] = vals[k] + dc[k][j] * GaussianRational(v[j])
        row = {}
        for k, c in enumerate(vals):
            if c.re:
                row[2 * k] = c.re
            if c.im:
                row[2 * k + 1] = c.im
        span.add(row)
    return [[r.get(i, _ZERO) for i in range(2 * Np)] for r in span.basis()]


def _chart_derivative(chart: SeriesVector) -> list[list[GaussianRational]]:
    m = chart.blocks.nvars
    out = []
    for c in chart:
        row = []
        for j in range(m):
            e = [0] * m
            e[j] = 1
            row.append(c.coefficient(e))
        out.append(row)
    return out


@dataclass(frozen=True)
class IsolationVerdict:
    verdict: str
    dimension: int | None
    detail: str

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "dimension": self.dimension, "detail": self.detail}


def isolation_report(report: StabilizationReport) -> IsolationVerdict:
    """Apply the isolation criterion to a sweep; never claims non-isolation."""
    if not report.stabilized:
        return IsolationVerdict("inconclusive", None,
                                f"projected dimensions {list(report.dims)} did not stabilize")
    if report.value == 0:
        return IsolationVerdict("isolated", 0,
                                "stabilized infinitesimal deformation space is zero")
    return IsolationVerdict(
        "criterion inapplicable", report.value,
        f"stabilized dimension {report.value} > 0; the zero-dimension criterion does not apply",
    )


# ---------------------------------------------------------------------------
# base-point isomorphism
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasepointIsoResult:
    ok: bool
    dim_def: int
    dim_hol: int
    into: bool
    evaluation_span: tuple

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "dim_hol_def": self.dim_def,
            "dim_hol": self.dim_hol,
            "maps_into": self.into,
            "evaluation_span": [[str(x) for x in r] for r in self.evaluation_span],
        }


def basepoint_iso_check(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal,
                        deformation: Deformation, kappa: int) -> BasepointIsoResult:
    """(v, Y) -> Y + c'(0) v maps the deformation kernel onto the relaxed hol kernel.

    Both kernels are computed at the same jet order; the forward map must land
    in the relaxed kernel and the dimensions must agree (the inverse is
    W -> (W(0), W - W(0)) read through the chart).
    """
    kdef = hol_def_jets(H, M, deformation, kappa, vanish_at_base=True)
    khol = hol_jets(H, M, ideal, kappa, vanish_at_base=False)
    dc = _chart_derivative(deformation.chart)
    span = khol.span()
    into = True
    images = linalg.RowSpan(len(khol.unknowns))
    for v, Y in kdef.fields():
        comps = []
        for k in range(khol.Np):
            shift = GaussianRational(0)
            for j in range(kdef.m):
                if v[j]:
                    shift = shift + dc[k][j] * GaussianRational(v[j])
            comps.append(Y[k] + TruncatedSeries.constant(Y[k].blocks, Y[k].trunc, shift))
        vec = khol.vector_of([], SeriesVector(comps))
        if not span.contains(vec):
            into = False
        images.add(vec)
    ev = evaluate_at_base(khol)
    ok = into and kdef.dim == khol.dim and images.dim == khol.dim
    return BasepointIsoResult(ok, kdef.dim, khol.dim, into, tuple(tuple(r) for r in ev))


# ---------------------------------------------------------------------------
# curves and higher order
# ---------------------------------------------------------------------------

def _with_t(ctx: VariableBlocks) -> VariableBlocks:
    if ctx.has_block("t"):
        return ctx
    return VariableBlocks(ctx.blocks + (Block("t", 1, "t"),), ctx.pairs)


@dataclass(frozen=True)
class CurveInT:
    """eps(t) and H(t) as series over source blocks extended by a block ``t``."""

    eps: tuple  # series over the curve blocks (empty when there is no deformation)
    H: SeriesVector

    @property
    def blocks(self) -> VariableBlocks:
        return self.H.blocks


@dataclass(frozen=True)
class TangencyResult:
    ok: bool
    order: int
    failing_order: int | None = None
    witness: str | None = None

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"tangent": self.ok, "order": self.order,
                "failing_order": self.failing_order, "witness": self.witness}


def _t_coefficients(series: TruncatedSeries, r: int) -> list[TruncatedSeries]:
    ti = series.blocks.index("t")
    out = [dict() for _ in range(r + 1)]
    for e, c in series.terms.items():
        k = e[ti]
        if k <= r:
            ne = list(e)
            ne[ti] = 0
            out[k][tuple(ne)] = c
    return [TruncatedSeries(series.blocks, series.trunc - k, out[k]) for k in range(r + 1)]


def _curve_residuals(curve: CurveInT, M: GenericManifold, ideal: DefiningIdeal, r: int):
    if not curve.blocks.has_block("t"):
        raise PreconditionError("curve data must carry a block named t")
    eps = list(curve.eps) if ideal.eps_dim else None
    if ideal.eps_dim and len(eps) != ideal.eps_dim:
        raise PreconditionError("curve eps(t) has the wrong number of components")
    D = curve.H.trunc
    if D < r:
        raise DegreeExhaustedError(f"tangency to order {r} needs truncation at least {r}")
    res = []
    for rho in ideal.rho:
        val = restrict_to_M(pull_back(rho, curve.H, eps), M)
        res.append(_t_coefficients(val, r))
    return res


def curve_tangency(curve: CurveInT, M: GenericManifold, ideal: DefiningIdeal, r: int
                   ) -> TangencyResult:
    """rho(H(Z, t), Hbar, eps(t)) = O(t^(r+1)) on M, coefficientwise within the truncation."""
    res = _curve_residuals(curve, M, ideal, r)
    names = curve.blocks.names()
    for k in range(r + 1):
        for j, coeffs in enumerate(res):
            c = coeffs[k]
            low = c.lowest_term()
            if low is not None:
                mono = "*".join(names[i] if p == 1 else f"{names[i]}^{p}"
                                for i, p in enumerate(low[0]) if p) or "1"
                return TangencyResult(False, r, k,
                                      f"generator {j + 1}: coefficient {low[1]} of t^{k}*{mono}")
    return TangencyResult(True, r)


@dataclass
class HigherOrderSystem:
    """Order-k deformations (w_1..w_k, Y_1..Y_k), solved order by order.

    ``first_order`` is the order-one kernel (equal to the hol(H, D) kernel);
    higher orders form an affine tower handled by :meth:`extend`.
    """

    H: SeriesVector
    M: GenericManifold
    target: DefiningIdeal
    deformation: Deformation | None
    k: int
    kappa: int
    first_order: InfDefBasis

    @property
    def ideal(self) -> DefiningIdeal:
        return self.deformation.ideal if self.deformation else self.target

    def _curve(self, ws: Sequence[Sequence], Ys: Sequence[SeriesVector]) -> CurveInT:
        ctx = _with_t(self.H.blocks)
        D = self.kappa + self.k
        t = TruncatedSeries.variable(ctx, D, "t")
        H = [embed(c, ctx).with_trunc(D) for c in self.H]
        m = self.deformation.m if self.deformation else 0
        eps = [TruncatedSeries.zero(ctx, D) for _ in range(m)]
        tp = TruncatedSeries.constant(ctx, D, 1)
        for i, (w, Y) in enumerate(zip(ws, Ys), start=1):
            tp = tp * t
            for c in range(len(H)):
                # Y is a jet: use its polynomial representative
                yc = embed(Y[c], ctx)
                H[c] = H[c] + tp * TruncatedSeries(ctx, D, yc.terms)
            for c in range(m):
                if w[c]:
                    eps[c] = eps[c] + tp * GaussianRational(w[c])
        return CurveInT(tuple(eps), SeriesVector(H))

    def residual(self, ws, Ys, order: int) -> list[TruncatedSeries]:
        """t^order coefficients of the residual, cut to source degree kappa."""
        ideal = self.ideal
        res = _curve_residuals(self._curve(ws, Ys), self.M, ideal, order)
        return [specialize(r[order], {"t": 0}).with_trunc(self.kappa) for r in res]

    def contains(self, ws, Ys) -> bool:
        for order in range(1, len(Ys) + 1):
            if any(not r.is_zero() for r in self.residual(ws, Ys, order)):
                return False
        return True

    def extend(self, ws, Ys):
        """A next-order term (w, Y) completing the tuple, or None if none exists."""
        order = len(Ys) + 1
        if order > self.k:
            raise PreconditionError(f"tuple already has order {self.k}")
        m = self.deformation.m if self.deformation else 0
        zeroY = SeriesVector(TruncatedSeries.zero(self.H.blocks, self.H.trunc) for _ in self.H)
        rhs = self.residual(list(ws) + [[0] * m], list(Ys) + [zeroY], order)
        system = self.first_order._system
        cols = system.unknowns
        rows: dict = {}
        ncol = len(cols)
        for col, u in enumerate(cols):
            for j, s in enumerate(system.column_series(u)):
                for e, c in s.terms.items():
                    if c.re:
                        rows.setdefault((j, e, 0), {})[col] = c.re
                    if c.im:
                        rows.setdefault((j, e, 1), {})[col] = c.im
        ctx = self.H.blocks
        for j, s in enumerate(rhs):
            for e, c in s.terms.items():
                e = tuple(e[: ctx.nvars])
                if c.re:
                    rows.setdefault((j, e, 0), {})[ncol] = -c.re
                if c.im:
                    rows.setdefault((j, e, 1), {})[ncol] = -c.im
        reduced, pivots = linalg.rref_sparse([rows[k] for k in sorted(rows)], ncol + 1)
        if ncol in pivots:
            return None
        sol = {}
        for p, r in zip(pivots, reduced):
            val = r.get(ncol)
            if val:
                sol[p] = val
        v, Y = self.first_order.field_of(sol)
        return v, Y


def hol_k_jets(H: SeriesVector, M: GenericManifold, target: DefiningIdeal,
               deformation: Deformation | None, k: int, kappa: int,
               vanish_at_base: bool = True) -> HigherOrderSystem:
    """Order-k infinitesimal deformations; the first-order kernel equals hol(H, D)."""
    if k < 1:
        raise PreconditionError("order must be at least 1")
    if deformation is not None:
        first = hol_def_jets(H, M, deformation, kappa, vanish_at_base)
    else:
        first = hol_jets(H, M, target, kappa, vanish_at_base)
    D = min(H.trunc, M.trunc, target.trunc)
    if kappa + k > D:
        raise BudgetError(f"order {k} at jet order {kappa} needs truncation at least {kappa + k}")
    return HigherOrderSystem(H, M, target, deformation, k, kappa, first)
