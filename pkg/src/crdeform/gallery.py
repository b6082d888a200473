"""Worked constructions: degenerate and nondegenerate targets, a positive-dimensional
mapping locus, and hypersurfaces whose mapping locus carries a prescribed singular curve.

Every builder recomputes its verdicts from scratch and returns a report object
whose ``to_dict`` is the deterministic payload used by the command line.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import linalg
from .errors import (
    BudgetError,
    PreconditionError,
    RealityError,
    SingularJacobianError,
    VerificationError,
)
from .infdef import (
    basepoint_iso_check,
    evaluate_at_base,
    hol_jets,
    hol_residual,
)
from .manifold import (
    DefiningIdeal,
    GenericManifold,
    MapCheck,
    base_point_deformation,
    check_maps_into,
    from_graph,
    graph_blocks,
    graph_chart,
    ideal_from_graph,
    target_blocks,
)
from .nondeg import (
    DegeneracyVerdict,
    NondegCertificate,
    derivative_rows,
    find_nondegeneracy,
)
from .series import (
    I,
    Block,
    GaussianRational,
    SeriesVector,
    TruncatedSeries,
    VariableBlocks,
    compose,
    conjugate_coefficients,
    evaluate,
    jet,
    reciprocal,
    recenter,
    solve_implicit,
)

__all__ = [
    "sphere",
    "translate_target",
    "build_example_61",
    "build_example_62",
    "SingularLocusInstance",
    "singular_locus_build",
    "SINGULAR_MODELS",
    "singular_model",
    "JetPrescription",
    "jet_prescription",
    "LocusCertificate",
    "locus_certificate",
]

_HALF = GaussianRational("1/2")


def _g(v) -> GaussianRational:
    return GaussianRational.coerce(v)


def _vec_text(v: Sequence) -> list[str]:
    return [str(_g(x)) for x in v]


# ---------------------------------------------------------------------------
# shared building blocks
# ---------------------------------------------------------------------------

def sphere(n: int = 1, trunc: int = 8, name: str | None = None) -> GenericManifold:
    """Heisenberg sphere Im w = |z_1|^2 + ... + |z_n|^2."""
    G = graph_blocks(n, 1)
    phi = sum((TruncatedSeries.variable(G, trunc, f"z.{k + 1}")
               * TruncatedSeries.variable(G, trunc, f"chi.{k + 1}") for k in range(n)),
              TruncatedSeries.zero(G, trunc))
    return from_graph(phi, n, 1, name or f"sphere{n + 1}")


def _is_polynomial(f: TruncatedSeries) -> bool:
    return f.degree() < f.trunc


def translate_target(ideal: DefiningIdeal, point: Sequence) -> DefiningIdeal:
    """rho(p + Z', pbar + zeta'); the stored generators must be polynomials below the truncation."""
    p = [_g(v) for v in point]
    if len(p) != ideal.N:
        raise PreconditionError(f"point has {len(p)} coordinates, target dimension is {ideal.N}")
    if ideal.eps_dim:
        raise PreconditionError("translate a target without deformation parameters")
    for r in ideal.rho:
        if not _is_polynomial(r):
            raise BudgetError("translating a target needs polynomial defining functions "
                              f"(degree {r.degree()} reaches the truncation {r.trunc})")
    pt = p + [v.conjugate() for v in p]
    rho = []
    for j, r in enumerate(ideal.rho):
        c = recenter(r, pt)
        if c.constant_term():
            raise VerificationError(
                f"point {_vec_text(p)} is not on the target: generator {j + 1} equals {c.constant_term()}"
            )
        rho.append(c)
    return DefiningIdeal(SeriesVector(rho))


def _sqrt1p(f: TruncatedSeries) -> TruncatedSeries:
    """sqrt(1 + f) for f without constant term (binomial series)."""
    if f.constant_term():
        raise PreconditionError("sqrt(1 + f) needs f(0) = 0")
    out = TruncatedSeries.constant(f.blocks, f.trunc, 1)
    coef = Fraction(1)
    power = TruncatedSeries.constant(f.blocks, f.trunc, 1)
    for k in range(1, f.trunc + 1):
        coef = coef * (Fraction(1, 2) - (k - 1)) / k
        power = power * f
        if power.is_zero():
            break
        out = out + power * _g(f"{coef.numerator}/{coef.denominator}")
    return out


def _space(T: VariableBlocks, D: int, name: str, k: int) -> TruncatedSeries:
    return TruncatedSeries.variable(T, D, T.offset(name) + k)


# ---------------------------------------------------------------------------
# a target whose degenerate set is a union of hyperplanes
# ---------------------------------------------------------------------------

def _quartic_graph(n: int, D: int) -> TruncatedSeries:
    G = graph_blocks(n, 1)
    out = TruncatedSeries.zero(G, D)
    for k in range(n):
        z = TruncatedSeries.variable(G, D, f"z.{k + 1}")
        c = TruncatedSeries.variable(G, D, f"chi.{k + 1}")
        out = out + z * z * c * c
    return out


def whitney_heisenberg(M: GenericManifold) -> SeriesVector:
    """Whitney map (z1, z1 z2, z2^2) of the balls, conjugated by Cayley transforms.

    Sends Im w = |z|^2 into Im w' = |z1'|^2 + |z2'|^2 with 0 -> 0.
    """
    if M.n != 1 or M.d != 1:
        raise PreconditionError("Whitney map is defined on the sphere in C^2")
    B, D = M.blocks, M.trunc
    z = TruncatedSeries.variable(B, D, "z.1")
    w = TruncatedSeries.variable(B, D, "w.1")
    one = TruncatedSeries.constant(B, D, 1)
    den = reciprocal(one - w * I)
    # ball coordinates with the base point at (1, 0): normal direction first
    b1 = (one + w * I) * den
    b2 = z * den * 2
    eta = [b1, b1 * b2, b2 * b2]
    back = reciprocal(eta[0] + one)
    return SeriesVector([eta[1] * back, eta[2] * back, (eta[0] - one) * back * (-I)])


@dataclass(frozen=True)
class Example61Report:
    trunc: int
    k_max: int
    degenerate_at_origin: DegeneracyVerdict
    flat_control: NondegCertificate
    point: tuple
    map_check: MapCheck
    certificate: NondegCertificate
    H: SeriesVector

    @property
    def ok(self) -> bool:
        return (not self.degenerate_at_origin and isinstance(self.flat_control, NondegCertificate)
                and self.flat_control.k0 == 1 and bool(self.map_check)
                and isinstance(self.certificate, NondegCertificate) and self.certificate.k0 == 2)

    def to_dict(self) -> dict:
        return {
            "name": "example-6-1",
            "trunc": self.trunc,
            "k_max": self.k_max,
            "origin_verdict": self.degenerate_at_origin.to_dict(),
            "flat_control": self.flat_control.to_dict(),
            "base_point": _vec_text(self.point),
            "mapping_check": self.map_check.describe(),
            "certificate": self.certificate.to_dict(),
            "map": self.H.to_text(),
            "sampling_note": "degeneracy on the exceptional set is certified at the origin only; "
                             "membership off it is certified at the listed base point",
            "ok": self.ok,
        }


def build_example_61(trunc: int = 8, k_max: int = 4, a: int = 1, b: int = 2) -> Example61Report:
    """Quartic target Im w' = |z1'|^4 + |z2'|^4 over the sphere in C^2.

    (a) the identity of the quartic is degenerate at 0 through ``k_max``;
    control: the identity of Im w' = |z1'|^2 + |z2'|^2 is 1-nondegenerate;
    (b) at p' = (a, b, i(a^4 + b^4)) the map sqrt o (Heisenberg translate of the
    Whitney map), recentred at p', is certified 2-nondegenerate.
    """
    if not (a and b):
        raise PreconditionError("base point must lie off the coordinate hyperplanes")
    D = trunc
    quartic = from_graph(_quartic_graph(2, D), 2, 1, "quartic")
    verdict = find_nondegeneracy(quartic.identity_map(), quartic, quartic.ideal, k_max)
    if verdict:
        raise VerificationError("quartic target unexpectedly nondegenerate at the origin")
    s3 = sphere(2, D, "sphere3")
    flat = find_nondegeneracy(s3.identity_map(), s3, s3.ideal, k_max)

    M = sphere(1, D)
    F0 = whitney_heisenberg(M)
    a2, b2 = _g(a * a), _g(b * b)
    H = SeriesVector([
        (_sqrt1p(F0[0] * a2.inverse()) - 1) * _g(a),
        (_sqrt1p(F0[1] * b2.inverse()) - 1) * _g(b),
        F0[2] + (F0[0] * a2 + F0[1] * b2) * (I * 2),
    ])
    p = (_g(a), _g(b), I * _g(a ** 4 + b ** 4))
    target = translate_target(ideal_from_graph(_quartic_graph(2, D), 2, 1), p)
    chk = check_maps_into(H, M, target)
    if not chk:
        raise VerificationError(f"constructed map fails the mapping equation: {chk.describe()}")
    cert = find_nondegeneracy(H, M, target, k_max)
    return Example61Report(D, k_max, verdict, flat, p, chk, cert, H)


# ---------------------------------------------------------------------------
# a target with a two-parameter family of maps
# ---------------------------------------------------------------------------

def example_62_source(trunc: int) -> GenericManifold:
    G = graph_blocks(1, 1)
    z = TruncatedSeries.variable(G, trunc, "z.1")
    c = TruncatedSeries.variable(G, trunc, "chi.1")
    return from_graph(z * c + z * z * c * c, 1, 1, "quartic-perturbed-sphere")


def example_62_target(trunc: int) -> DefiningIdeal:
    """Im w' = |z1'|^2 + |z1'|^4 + (Re z1')^2 Im z2'."""
    G = graph_blocks(2, 1)

    def v(nm):
        return TruncatedSeries.variable(G, trunc, nm)

    z1, z2, c1, c2 = v("z.1"), v("z.2"), v("chi.1"), v("chi.2")
    re1 = (z1 + c1) * _HALF
    im2 = (z2 - c2) * (I * 2).inverse()
    return ideal_from_graph(z1 * c1 + z1 * z1 * c1 * c1 + re1 * re1 * im2, 2, 1)


def example_62_family(M: GenericManifold, s=0, t=0) -> SeriesVector:
    """H_{s,t} = (z, t, w + s) translated to vanish at 0, i.e. (z, 0, w)."""
    B, D = M.blocks, M.trunc
    del s, t
    return SeriesVector([TruncatedSeries.variable(B, D, "z.1"), TruncatedSeries.zero(B, D),
                         TruncatedSeries.variable(B, D, "w.1")])


def example_62_counter_family(M: GenericManifold, lam: str = "5/4") -> tuple:
    """(lam z, i a, lam^4 w + i a lam^2 z^2 / 2) with lam^2 = 1 + a/2, recentred at (0, i a, 0).

    Returns (a, H - H(0)).  Its base point leaves the real plane {(0, t, s)}.
    """
    L = _g(lam)
    a = (L * L - 1) * 2
    B, D = M.blocks, M.trunc
    z = TruncatedSeries.variable(B, D, "z.1")
    w = TruncatedSeries.variable(B, D, "w.1")
    L2 = L * L
    H = SeriesVector([z * L, TruncatedSeries.zero(B, D), w * (L2 * L2) + z * z * (I * a * L2 * _HALF)])
    return a, H


@dataclass(frozen=True)
class Example62Report:
    trunc: int
    kappa: int
    symbolic_check: MapCheck
    certificate: NondegCertificate
    hol_dim: int
    evaluation_span: tuple  # echelon rows in (Re_1, Im_1, ..., Re_N', Im_N')
    family_span: tuple
    family_vectors_in_kernel: bool
    family_in_span: bool  # T_pS contained in the evaluation span
    span_equals_family: bool
    counter_field: SeriesVector
    counter_field_residual_zero: bool
    counter_family_parameter: GaussianRational
    counter_family_check: MapCheck
    iso: object

    @property
    def ok(self) -> bool:
        return (bool(self.symbolic_check) and self.certificate.k0 == 2
                and self.family_vectors_in_kernel and self.family_in_span and bool(self.iso))

    def to_dict(self) -> dict:
        return {
            "name": "example-6-2",
            "trunc": self.trunc,
            "kappa": self.kappa,
            "symbolic_mapping_check": self.symbolic_check.describe(),
            "certificate": self.certificate.to_dict(),
            "hol_dimension": self.hol_dim,
            "evaluation_span": [_vec_text(r) for r in self.evaluation_span],
            "evaluation_span_dimension": len(self.evaluation_span),
            "family_tangent_span": [_vec_text(r) for r in self.family_span],
            "family_vectors_in_kernel": self.family_vectors_in_kernel,
            "family_tangent_in_evaluation_span": self.family_in_span,
            "evaluation_span_equals_family_tangent": self.span_equals_family,
            "extra_field": self.counter_field.to_text(),
            "extra_field_residual_zero": self.counter_field_residual_zero,
            "extra_family": {
                "parameter_a": str(self.counter_family_parameter),
                "base_point": ["0", str(I * self.counter_family_parameter), "0"],
                "mapping_check": self.counter_family_check.describe(),
            },
            "basepoint_isomorphism": self.iso.to_dict(),
            "ok": self.ok,
        }


def _span_rows(vectors, dim):
    sp = linalg.RowSpan(dim)
    for v in vectors:
        sp.add(v)
    return sp


def build_example_62(trunc: int = 10, kappa: int = 4) -> Example62Report:
    D = trunc
    M = example_62_source(D)
    target = example_62_target(D)
    # symbolic (s, t): a real parameter block rides along with the source variables
    ctx = M.context([Block("eps", 2, "eps")])
    Hst = SeriesVector([
        TruncatedSeries.variable(ctx, D, "z.1"),
        TruncatedSeries.variable(ctx, D, "eps.2"),
        TruncatedSeries.variable(ctx, D, "w.1") + TruncatedSeries.variable(ctx, D, "eps.1"),
    ])
    # H_{s,t}(0) = (0, t, s) lies on the target for every real (s, t); the residual of
    # rho(H_{s,t}, Hbar_{s,t}) on M must vanish identically in (s, t)
    sym = check_maps_into(Hst, M, target)
    H = example_62_family(M)
    cert = find_nondegeneracy(H, M, target, 4)
    if not isinstance(cert, NondegCertificate):
        raise VerificationError("family member is not finitely nondegenerate")
    basis = hol_jets(H, M, target, kappa, vanish_at_base=False)
    ev = evaluate_at_base(basis)
    Np = target.N
    # T_pS = real span of d/dt (0, t, s) and d/ds (0, t, s)
    fam = [[0] * (2 * Np) for _ in range(2)]
    fam[0][2] = 1
    fam[1][4] = 1
    fam_rows = _span_rows([{j: _g(x) for j, x in enumerate(r) if x} for r in fam], 2 * Np)
    ev_span = _span_rows([{j: x for j, x in enumerate(r) if x} for r in ev], 2 * Np)
    in_span = all(ev_span.contains(r) for r in fam_rows.basis())
    equal = in_span and ev_span.dim == fam_rows.dim
    B = M.blocks
    consts = [SeriesVector([TruncatedSeries.constant(B, D, 1 if k == j else 0) for k in range(Np)])
              for j in (1, 2)]
    in_kernel = all(basis.contains([], Y) for Y in consts)
    # a field whose value at 0 leaves T_pS
    z = TruncatedSeries.variable(B, D, "z.1")
    w = TruncatedSeries.variable(B, D, "w.1")
    Yc = SeriesVector([z * _HALF, TruncatedSeries.constant(B, D, I * 2), w * 2 + z * z * I])
    res = hol_residual(H, M, target, [], Yc, D - 1)
    res_zero = all(r.is_zero() for r in res)
    a, Ha = example_62_counter_family(M)
    ca = check_maps_into(Ha, M, translate_target(target, [0, I * a, 0]))
    dfm = base_point_deformation(target, graph_chart(_example_62_graph(D), 2, 1))
    iso = basepoint_iso_check(H, M, target, dfm, min(kappa, 3))
    return Example62Report(D, kappa, sym, cert, basis.dim, tuple(tuple(r) for r in ev),
                           tuple(tuple(_g(x) for x in r) for r in fam), in_kernel, in_span, equal,
                           Yc, res_zero, a, ca, iso)


def _example_62_graph(D: int) -> TruncatedSeries:
    G = graph_blocks(2, 1)

    def v(nm):
        return TruncatedSeries.variable(G, D, nm)

    z1, z2, c1, c2 = v("z.1"), v("z.2"), v("chi.1"), v("chi.2")
    re1 = (z1 + c1) * _HALF
    im2 = (z2 - c2) * (I * 2).inverse()
    return z1 * c1 + z1 * z1 * c1 * c1 + re1 * re1 * im2


# ---------------------------------------------------------------------------
# prescribed singular curves in the mapping locus
# ---------------------------------------------------------------------------

def _r_blocks() -> VariableBlocks:
    return VariableBlocks((Block("s", 1, "t"), Block("t", 1, "t")))


def _param_blocks(n: int) -> VariableBlocks:
    """Real parameters (u, x_1, y_1, ..., x_n, y_n, s, t)."""
    return VariableBlocks((Block("u", 1, "t"), Block("xy", 2 * n, "t"), Block("st", 2, "t")))


def _real_blocks(n: int) -> VariableBlocks:
    """Real target coordinates (Re z'_1, Im z'_1, ..., Re z'_{n+1}, Im z'_{n+1}, Re w')."""
    return VariableBlocks((Block("R", 2 * (n + 1) + 1, "t"),))


def singular_model(name: str, trunc: int = 8) -> TruncatedSeries:
    R = _r_blocks()
    s = TruncatedSeries.variable(R, trunc, "s")
    t = TruncatedSeries.variable(R, trunc, "t")
    models = {
        "cusp": t * t - s * s * s,
        "node": s * t,
        "tacnode": t * t - s ** 4,
    }
    if name not in models:
        raise PreconditionError(f"unknown singular model {name!r}; choose from {sorted(models)}")
    return models[name]


SINGULAR_MODELS = ("cusp", "node", "tacnode")

# rational points on the shipped models
MODEL_POINTS = {
    "cusp": (("1/4", "1/8"), ("1", "-1"), ("0", "0")),
    "node": (("1/4", "0"), ("0", "1/3")),
    "tacnode": (("1/2", "1/4"), ("1/3", "-1/9")),
}


@dataclass(frozen=True)
class SingularLocusInstance:
    n: int
    r: TruncatedSeries
    alpha: tuple
    beta: TruncatedSeries
    gamma: TruncatedSeries
    phi: SeriesVector  # over the real parameters, n + 2 complex components
    rho: DefiningIdeal  # graph defining function of M' on (Zp, zetap)
    trunc: int
    polynomial: bool  # rho is an exact polynomial (so it may be recentred)
    rank_point: tuple
    rank: int
    rank_minor: GaussianRational
    parametrization_residual_zero: bool
    inclusions: tuple = field(default=())  # (tau0, MapCheck)

    @property
    def ok(self) -> bool:
        return (self.rank == 2 * self.n + 3 and self.parametrization_residual_zero
                and all(bool(c) for _, c in self.inclusions))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "trunc": self.trunc,
            "r": self.r.to_text(),
            "alpha": [a.to_text() for a in self.alpha],
            "beta": self.beta.to_text(),
            "gamma": self.gamma.to_text(),
            "phi": self.phi.to_text(),
            "rho": self.rho.rho.to_text(),
            "rho_is_polynomial": self.polynomial,
            "rank_point": _vec_text(self.rank_point),
            "rank": self.rank,
            "rank_minor": str(self.rank_minor),
            "rho_of_phi_vanishes": self.parametrization_residual_zero,
            "inclusions": [{"tau0": _vec_text(t), "check": c.describe()} for t, c in self.inclusions],
            "ok": self.ok,
        }


def _real_jacobian(phi: SeriesVector, point) -> list[list[GaussianRational]]:
    from .series import differentiate

    m = phi.blocks.nvars
    rows = []
    for c in phi:
        vals = [evaluate(differentiate(c, k), point) for k in range(m)]
        rows.append([_g(v.re) for v in vals])
        rows.append([_g(v.im) for v in vals])
    return rows


def _max_minor(mat, r):
    N, m = len(mat), len(mat[0])
    for rows in itertools.combinations(range(N), r):
        for cols in itertools.combinations(range(m), r):
            v = linalg.det([[mat[i][j] for j in cols] for i in rows])
            if v:
                return v
    return GaussianRational(0)


def singular_locus_build(n: int = 1, r: TruncatedSeries | str = "cusp",
                         alpha: Sequence[TruncatedSeries] | None = None,
                         beta: TruncatedSeries | None = None,
                         gamma: TruncatedSeries | None = None,
                         trunc: int = 8, tau0: Sequence = ()) -> SingularLocusInstance:
    """phi(u, Z, tau) = (Z, sum z_k^2 + tau, u + i|Z|^2) + r(tau, taubar) (alpha, beta, gamma).

    ``r`` is a real polynomial in (s, t) = (Re tau, Im tau); alpha, beta, gamma are
    polynomials in the real parameters (u, x_1, y_1, ..., s, t).  Defaults:
    alpha = beta = 0, gamma = i (1 + x_1^2).  Each tau0 = (s0, t0) must satisfy r = 0.
    """
    D = trunc
    if isinstance(r, str):
        r = singular_model(r, D)
    if r.is_zero():
        raise PreconditionError("r vanishes identically; the exceptional set would be everything")
    if r.constant_term():
        raise PreconditionError("r must vanish at the origin")
    if any(not c.is_real() for c in r.terms.values()):
        raise RealityError("r must have real coefficients")
    P = _param_blocks(n)
    Dp = max(D, r.degree() * 2 + 4)

    def pv(k):
        return TruncatedSeries.variable(P, Dp, k)

    u = pv(0)
    xs = [pv(1 + 2 * k) for k in range(n)]
    ys = [pv(2 + 2 * k) for k in range(n)]
    s, t = pv(1 + 2 * n), pv(2 + 2 * n)
    zs = [x + y * I for x, y in zip(xs, ys)]
    zero = TruncatedSeries.zero(P, Dp)
    alpha = tuple(TruncatedSeries(P, Dp, a.terms) for a in alpha) if alpha else tuple(zero for _ in range(n))
    beta = TruncatedSeries(P, Dp, beta.terms) if beta is not None else zero
    gamma = TruncatedSeries(P, Dp, gamma.terms) if gamma is not None else \
        (TruncatedSeries.constant(P, Dp, 1) + xs[0] * xs[0]) * I
    if len(alpha) != n:
        raise PreconditionError(f"need {n} alpha coefficients")
    rP = compose(TruncatedSeries(r.blocks, Dp, r.terms), SeriesVector([s, t]))
    tau = s + t * I
    norm2 = sum((x * x + y * y for x, y in zip(xs, ys)), zero)
    phi = SeriesVector([zs[k] + rP * alpha[k] for k in range(n)]
                       + [sum((z * z for z in zs), zero) + tau + rP * beta,
                          u + norm2 * I + rP * gamma])
    # solve Re/Im(z'), Re w' = phi(p) for the parameters p
    Rb = _real_blocks(n)
    W = VariableBlocks(P.blocks + Rb.blocks)
    Dw = D

    def emb(f):
        return TruncatedSeries(W, Dw, {e + (0,) * Rb.nvars: c for e, c in f.terms.items()
                                       if sum(e) <= Dw})

    comps = []
    for c in phi.components[: n + 1]:
        cw, cb = emb(c), conjugate_coefficients(emb(c))
        comps += [(cw + cb) * _HALF, (cw - cb) * (I * 2).inverse()]
    cw = emb(phi[n + 1])
    comps.append((cw + conjugate_coefficients(cw)) * _HALF)
    F = SeriesVector([c - TruncatedSeries.variable(W, Dw, P.nvars + k) for k, c in enumerate(comps)])
    try:
        sol = solve_implicit(F, P.names())
    except SingularJacobianError as exc:
        raise PreconditionError(f"parametrization is not a graph over the real target chart: {exc}") from exc
    # f(R) = Im phi_w(p(R)); exact polynomial when p(R) is
    polynomial, p_of_R = _exact_inverse(phi, sol, n, Rb, D)
    Tp = p_of_R[0].trunc
    phiw = TruncatedSeries(P, Tp, phi[n + 1].terms)
    f_R = compose(phiw, p_of_R)
    f_R = (f_R - conjugate_coefficients(f_R)) * (I * 2).inverse()
    # complexified: R -> (Zp, zetap)
    T = target_blocks(n + 2)
    Dt = Tp

    def zp(k):
        return _space(T, Dt, "Zp", k)

    def zt(k):
        return _space(T, Dt, "zetap", k)

    Rsub = []
    for k in range(n + 1):
        Rsub += [(zp(k) + zt(k)) * _HALF, (zp(k) - zt(k)) * (I * 2).inverse()]
    Rsub.append((zp(n + 1) + zt(n + 1)) * _HALF)
    rho = (zp(n + 1) - zt(n + 1)) * (I * 2).inverse() - compose(f_R, SeriesVector(Rsub))
    if not polynomial:
        rho = rho.with_trunc(D)
    ideal = DefiningIdeal(SeriesVector([rho]))
    if not ideal.reality_check():  # pragma: no cover - the construction is real
        raise RealityError("graph defining function is not real")
    # rho o phi = 0 modulo D
    phiD = SeriesVector(TruncatedSeries(P, D, {e: v for e, v in c.terms.items() if sum(e) <= D})
                        for c in phi)
    back = compose(rho.with_trunc(D), SeriesVector(list(phiD) + [conjugate_coefficients(c) for c in phiD]))
    resid_zero = back.is_zero()
    # rank of d phi at the origin (and the certified minor)
    origin = [0] * P.nvars
    mat = _real_jacobian(phi, origin)
    rank = linalg.rank(mat)
    minor = _max_minor(mat, rank)
    inst = SingularLocusInstance(n, r, alpha, beta, gamma, phi, ideal, D, polynomial,
                                 tuple(_g(v) for v in origin), rank, minor, resid_zero)
    checks = tuple((tuple(_g(v) for v in t0), _inclusion(inst, t0)) for t0 in tau0)
    return SingularLocusInstance(n, r, alpha, beta, gamma, phi, ideal, D, polynomial,
                                 inst.rank_point, rank, minor, resid_zero, checks)


def _exact_inverse(phi, sol, n, Rb, D):
    """Try to certify the implicit solution p(R) as an exact polynomial.

    Returns (True, p over Rb at a truncation holding every composite exactly)
    or (False, p truncated at D).
    """
    W = sol.blocks
    P_n = W.nvars - Rb.nvars
    terms = []
    for c in sol:
        t = {e[P_n:]: v for e, v in c.terms.items()}
        if any(any(e[:P_n]) for e in c.terms):  # pragma: no cover - solve eliminates p
            raise AssertionError("implicit solution still depends on the unknowns")
        terms.append(t)
    deg_p = max((sum(e) for t in terms for e in t), default=1)
    deg_phi = max(c.degree() for c in phi)
    top = max(sol[k].degree() for k in range(len(sol)))
    Tp = max(deg_phi * max(deg_p, 1) * 2 + 1, D)
    p_poly = SeriesVector(TruncatedSeries(Rb, Tp, t) for t in terms)
    if top < sol.trunc:
        # exact check phi_R(p(R)) = R as polynomials
        P = phi.blocks
        ok = True
        k = 0
        for c in phi.components[: n + 1]:
            cc = TruncatedSeries(P, Tp, c.terms)
            val = compose(cc, p_poly)
            re = (val + conjugate_coefficients(val)) * _HALF
            im = (val - conjugate_coefficients(val)) * (I * 2).inverse()
            for part in (re, im):
                if part != TruncatedSeries.variable(Rb, Tp, k):
                    ok = False
                k += 1
        cw = compose(TruncatedSeries(P, Tp, phi[n + 1].terms), p_poly)
        if (cw + conjugate_coefficients(cw)) * _HALF != TruncatedSeries.variable(Rb, Tp, k):
            ok = False
        if ok:
            return True, p_poly
    return False, SeriesVector(TruncatedSeries(Rb, D, {e: v for e, v in t.items() if sum(e) <= D})
                               for t in terms)


def _inclusion(inst: SingularLocusInstance, tau0) -> MapCheck:
    s0, t0 = (_g(v) for v in tau0)
    if not s0.is_real() or not t0.is_real():
        raise PreconditionError("tau0 = (s0, t0) must be real")
    rv = evaluate(inst.r, [s0, t0])
    if rv:
        raise PreconditionError(f"tau0 = ({s0}, {t0}) is not on the exceptional set: r = {rv}")
    if not inst.polynomial:
        raise BudgetError("defining function is not an exact polynomial; cannot recentre at tau0")
    n, D = inst.n, inst.trunc
    p0 = [0] * n + [s0 + t0 * I, 0]
    target = translate_target(inst.rho, p0)
    target = target.with_trunc(D)
    M = sphere(n, D)
    B = M.blocks
    zs = [TruncatedSeries.variable(B, D, f"z.{k + 1}") for k in range(n)]
    psi = SeriesVector(zs + [sum((z * z for z in zs), TruncatedSeries.zero(B, D)),
                             TruncatedSeries.variable(B, D, "w.1")])
    return check_maps_into(psi, M, target)


def psi_tau0(inst: SingularLocusInstance, tau0) -> tuple:
    """(recentred target, psi_{tau0} - p0, source sphere)."""
    s0, t0 = (_g(v) for v in tau0)
    n, D = inst.n, inst.trunc
    target = translate_target(inst.rho, [0] * n + [s0 + t0 * I, 0]).with_trunc(D)
    M = sphere(n, D)
    B = M.blocks
    zs = [TruncatedSeries.variable(B, D, f"z.{k + 1}") for k in range(n)]
    psi = SeriesVector(zs + [sum((z * z for z in zs), TruncatedSeries.zero(B, D)),
                             TruncatedSeries.variable(B, D, "w.1")])
    return target, psi, M


# ---------------------------------------------------------------------------
# jet prescription
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JetPrescription:
    alpha: TruncatedSeries
    k0: int
    verified: bool

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.to_text(), "k0": self.k0, "verified": self.verified}


def jet_prescription(q: TruncatedSeries, delta: TruncatedSeries, k0: int) -> JetPrescription:
    """alpha = j^k0(delta / q); verifies j^k0(q alpha) = j^k0(delta)."""
    if not q.constant_term():
        raise PreconditionError("q must not vanish at the base point")
    if q.blocks != delta.blocks:
        raise PreconditionError("q and delta must share their variables")
    D = min(q.trunc, delta.trunc)
    if D < k0:
        raise BudgetError(f"jets of order {k0} need truncation at least {k0} (have {D})")
    alpha = jet(delta.with_trunc(D) * reciprocal(q.with_trunc(D)), k0)
    lhs = jet(q.with_trunc(k0) * alpha, k0)
    ok = lhs == jet(delta.with_trunc(D), k0)
    if not ok:  # pragma: no cover - algebraic identity
        raise VerificationError("jet identity failed")
    return JetPrescription(alpha, k0, ok)


# ---------------------------------------------------------------------------
# pointwise membership witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocusCertificate:
    point: tuple
    H: SeriesVector
    map_check: MapCheck
    certificate: NondegCertificate
    note: str
    source: GenericManifold = field(repr=False, compare=False, default=None)
    target: DefiningIdeal = field(repr=False, compare=False, default=None)

    def verify(self) -> bool:
        chk = check_maps_into(self.H, self.source, self.target)
        table = derivative_rows(self.H, self.source, self.target, self.certificate.k0,
                                verify_map=False)
        return bool(chk) and self.certificate.verify(table)

    def to_dict(self) -> dict:
        return {
            "point": _vec_text(self.point),
            "map": self.H.to_text(),
            "mapping_check": self.map_check.describe(),
            "certificate": self.certificate.to_dict(),
            "note": self.note,
        }


def locus_certificate(M: GenericManifold, target: DefiningIdeal, point: Sequence,
                      H: SeriesVector, note: str = "", k_max: int = 4) -> LocusCertificate:
    """Witness that ``point`` admits a finitely nondegenerate map.

    ``H`` is the map written in coordinates centred at ``point`` (H(0) = 0),
    and ``target`` is the unshifted target; it is translated here.
    """
    shifted = translate_target(target, point) if any(_g(v) for v in point) else target
    D = min(shifted.trunc, H.trunc, M.trunc)
    shifted = shifted.with_trunc(D)
    chk = check_maps_into(H, M, shifted)
    if not chk:
        raise VerificationError(f"no certificate: {chk.describe()}")
    cert = find_nondegeneracy(H, M, shifted, min(k_max, D - 1))
    if not isinstance(cert, NondegCertificate):
        raise VerificationError(
            f"no certificate: map is degenerate through order {cert.k_max} "
            f"(rank profile {list(cert.rank_profile)})"
        )
    lc = LocusCertificate(tuple(_g(v) for v in point), H, chk, cert, note, M, shifted)
    if not lc.verify():  # pragma: no cover - recomputation of the same data
        raise VerificationError("certificate failed to re-verify")
    return lc
