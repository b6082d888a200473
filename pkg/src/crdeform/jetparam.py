"""Reconstruction of nondegenerate maps from a finite jet.

Level data.  For q >= 0 the germ G_q(x, d) = H(S^q(x) + d) is carried as a
series in the Segre variables x1..xq and an ambient displacement block ``d``,
exact for d-degree <= m_q = t0 - q*k0.  One level step (the reflection solve)
produces G_q from G_{q-1}: on the complexified manifold the point
(Z, zeta) with Z = S^q(x) + d and zeta = (x2 + e, Qbar(x2 + e, Z)) satisfies
rho(H(Z), Hbar(zeta)) = 0; taking the e^iota coefficients selected by the
nondegeneracy certificate yields a square system for U = H(Z) whose Jacobian
at the origin is the certificate matrix (up to factorials).  Hbar(zeta) is
read off the conjugated previous level.

After 2t levels H o S^{2t}(x) is known; H is recovered either by solving the
linear system sum_beta h_beta S^{2t}(x)^beta = G(x) (default), or by a right
inverse of S^{2t} near a full-rank zero x0 (exact for polynomial expansions).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from . import linalg
from .errors import (
    BudgetError,
    DegreeExhaustedError,
    PreconditionError,
    SingularJacobianError,
    VerificationError,
)
from .manifold import DefiningIdeal, GenericManifold, MapCheck, check_maps_into
from .nondeg import NondegCertificate, certificate_from_table, derivative_rows
from .segre import minimality_order, parametrization_order, segre_map
from .series import (
    Block,
    GaussianRational,
    SeriesVector,
    TruncatedSeries,
    VariableBlocks,
    coefficient_in,
    compose,
    conjugate_coefficients,
    embed,
    evaluate,
    invert_map_slice,
    jet,
    recenter,
    solve_implicit,
    truncate_block,
)

__all__ = [
    "level_blocks",
    "jet_data",
    "reflection_solve",
    "SegreExpansion",
    "segre_expand",
    "Reconstruction",
    "reconstruct",
    "AdmissibilityResult",
    "admissible_jet",
    "find_zero_point",
]


def level_blocks(n: int, N: int, q: int) -> VariableBlocks:
    """x1..xq (n each) followed by the displacement block d (N)."""
    return VariableBlocks(tuple(Block(f"x{j}", n, "x") for j in range(1, q + 1))
                          + (Block("d", N, "x"),))


def _work_blocks(n: int, N: int, Np: int, q: int) -> VariableBlocks:
    return VariableBlocks(level_blocks(n, N, q).blocks
                          + (Block("e", n, "x"), Block("U", Np, "x")))


def jet_data(Lam: SeriesVector, M: GenericManifold, trunc: int) -> SeriesVector:
    """Level-0 data G_0(d) = Lambda(d) as series in the block d with the given truncation."""
    L0 = level_blocks(M.n, M.N, 0)
    src = Lam.blocks
    zi = list(src.block_slice("z")) + list(src.block_slice("w"))
    comps = []
    for c in Lam:
        terms = {}
        for e, v in c.terms.items():
            if any(e[i] for i in range(src.nvars) if i not in zi):
                raise PreconditionError("jet components may only depend on z and w")
            terms[tuple(e[i] for i in zi)] = v
        comps.append(TruncatedSeries(L0, trunc, terms))
    return SeriesVector(comps)


def _cert_matrix_ok(cert: NondegCertificate):
    if not isinstance(cert, NondegCertificate) or not cert.det_value:
        raise PreconditionError("a nondegeneracy certificate with nonzero determinant is required")


def reflection_solve(M: GenericManifold, ideal: DefiningIdeal, cert: NondegCertificate,
                     known: SeriesVector, q: int, t0: int) -> SeriesVector:
    """One level: G_{q-1} (over level_blocks(q-1)) -> G_q (over level_blocks(q)).

    ``t0`` fixes the d-degree budget m_q = t0 - q*k0 of the result.
    """
    _cert_matrix_ok(cert)
    n, N, Np = M.n, M.N, ideal.N
    k0 = cert.k0
    m_prev = t0 - (q - 1) * k0
    m_q = t0 - q * k0
    if m_q < 0:
        raise DegreeExhaustedError(f"jet order {t0} is exhausted at Segre level {q}")
    if ideal.eps_dim:
        ideal = ideal.at_eps([0] * ideal.eps_dim)
    D = min(known.trunc, M.trunc + k0, ideal.trunc + k0)
    W = _work_blocks(n, N, Np, q)

    def var(name, k=0, trunc=D):
        return TruncatedSeries.variable(W, trunc, W.offset(name) + k)

    # Z = S^q(x) + d
    S = segre_map(M.with_trunc(min(M.trunc, D)), q).map if q <= D else None
    if S is None:
        raise DegreeExhaustedError(f"truncation {D} too small for Segre level {q}")
    Sq = [embed(c, W).with_trunc(D) if c.trunc >= D else
          TruncatedSeries(W, D, embed(c, W).terms) for c in S]
    Z = [Sq[k] + var("d", k) for k in range(N)]
    # zeta = (x2 + e, Qbar(x2 + e, Z)); at level 1 the chi-base is 0
    chi = [(var("x2", k) if q >= 2 else TruncatedSeries.zero(W, D)) + var("e", k) for k in range(n)]
    Qb = [TruncatedSeries(c.blocks, max(c.trunc, D), c.terms) for c in M.Qbar]
    src_subs = Z[:n] + Z[n:] + chi + [TruncatedSeries.zero(W, D) for _ in range(M.d)]
    tau = [compose(c.with_trunc(D) if c.trunc >= D else c, SeriesVector(
        [s.with_trunc(min(s.trunc, c.trunc)) for s in src_subs])) for c in Qb]
    # previous Segre base S^{q-1}(x2..xq), conjugated
    if q >= 2:
        Sp = segre_map(M.with_trunc(min(M.trunc, D)), q - 1).map
        shift = {f"x{j}": f"x{j + 1}" for j in range(1, q)}
        base_w = [conjugate_coefficients(TruncatedSeries(W, D, embed(c, W, shift).terms))
                  for c in Sp.components[n:]]
    else:
        base_w = [TruncatedSeries.zero(W, D) for _ in range(M.d)]
    dprime = [var("e", k) for k in range(n)] + [tau[k] - base_w[k] for k in range(M.d)]
    dprime = [truncate_block(c, ["e", "d"], m_prev) for c in dprime]
    for c in dprime:
        if c.constant_term():  # pragma: no cover - reality identity
            raise VerificationError("Segre base point is not on the complexified manifold")
    # Gbar_{q-1}(x2..xq, d')
    gsubs = []
    for j in range(1, q):
        gsubs += [var(f"x{j + 1}", k) for k in range(n)]
    gsubs += dprime
    Gbar = []
    for c in known:
        cb = conjugate_coefficients(c)
        val = compose(cb.with_trunc(min(cb.trunc, D)), SeriesVector(
            [s.with_trunc(min(s.trunc, cb.trunc, D)) for s in gsubs]))
        Gbar.append(truncate_block(val, ["e", "d"], m_prev))
    Dg = min(g.trunc for g in Gbar)
    U = [var("U", k, Dg) for k in range(Np)]
    rsubs = U + [g.with_trunc(Dg) for g in Gbar]
    F = []
    for a, ell in zip(cert.iota, cert.ell):
        r = ideal.rho[ell - 1]
        val = compose(r.with_trunc(min(r.trunc, Dg)) if r.trunc >= Dg else r,
                      SeriesVector([s.with_trunc(min(s.trunc, r.trunc)) for s in rsubs]))
        val = truncate_block(val, ["e", "d"], m_prev)
        coef = coefficient_in(val, ["e"], a)
        F.append(truncate_block(coef, ["d"], m_q))
    Fv = SeriesVector.aligned(F)
    try:
        sol = solve_implicit(Fv, [f"U.{k + 1}" for k in range(Np)])
    except SingularJacobianError as exc:
        raise PreconditionError(
            f"reflection system is singular at the base point (determinant {exc.determinant}); "
            "the certificate does not match the data"
        ) from exc
    Lq = level_blocks(n, N, q)
    return SeriesVector(embed(truncate_block(c, ["d"], m_q), Lq) for c in sol)


@dataclass(frozen=True)
class SegreExpansion:
    q: int
    series: SeriesVector  # H o S^q over x1..xq
    attained_degree: int
    levels: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {"q": self.q, "attained_degree": self.attained_degree,
                "series": self.series.to_text()}


def segre_expand(M: GenericManifold, ideal: DefiningIdeal, cert: NondegCertificate,
                 Lam: SeriesVector, q: int, trunc: int | None = None) -> SegreExpansion:
    """H o S^q from the jet Lambda (order >= q*k0) by q reflection levels."""
    _cert_matrix_ok(cert)
    k0 = cert.k0
    t0 = _jet_order(Lam)
    if t0 < q * k0:
        raise PreconditionError(f"jet of order {t0} is too short for {q} levels (need {q * k0})")
    D = M.trunc if trunc is None else trunc
    G = jet_data(Lam, M, D)
    levels = [G]
    for level in range(1, q + 1):
        G = reflection_solve(M, ideal, cert, G, level, t0)
        levels.append(G)
    Xq = VariableBlocks(tuple(Block(f"x{j}", M.n, "x") for j in range(1, q + 1)))
    comps = []
    for c in G:
        zero_d = {e[: Xq.nvars]: v for e, v in c.terms.items() if not any(e[Xq.nvars:])}
        comps.append(TruncatedSeries(Xq, c.trunc, zero_d))
    out = SeriesVector(comps)
    return SegreExpansion(q, out, out.trunc, tuple(levels))


def _jet_order(Lam: SeriesVector) -> int:
    return Lam.trunc


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------

def find_zero_point(S: SeriesVector, box: int = 1, steps: int = 2, seeds: Sequence = ()):
    """Deterministic search for x0 with S(x0) = 0 and a nonsingular slice Jacobian.

    Candidates are the ``seeds`` followed by the grid of rationals j/steps with
    |j/steps| <= box in every coordinate.  Returns (x0, slice variable names).
    """
    X = S.blocks
    m, Nn = X.nvars, len(S)
    names = X.names()
    grid = sorted({GaussianRational(f"{j}/{steps}") for j in range(-box * steps, box * steps + 1)},
                  key=lambda g: (abs(g.re), g.re))
    cand = [list(map(GaussianRational.coerce, s)) for s in seeds]
    jac = [[_d(c, k) for k in range(m)] for c in S]

    def attempt(pt):
        if any(evaluate(c, pt) for c in S):
            return None
        mat = [[evaluate(e, pt) for e in row] for row in jac]
        for cols in itertools.combinations(range(m), Nn):
            if linalg.det([[mat[i][j] for j in cols] for i in range(Nn)]):
                return [names[j] for j in cols]
        return None

    for pt in cand:
        sl = attempt(pt)
        if sl:
            return pt, sl
    for pt in itertools.product(grid, repeat=m):
        pt = list(pt)
        sl = attempt(pt)
        if sl:
            return pt, sl
    raise VerificationError(
        f"no rational full-rank zero of the Segre map in the box |x| <= {box} with step 1/{steps}"
    )


def _d(c: TruncatedSeries, k: int) -> TruncatedSeries:
    from .series import differentiate

    return differentiate(c, k)


@dataclass(frozen=True)
class Reconstruction:
    jet: SeriesVector
    H: SeriesVector
    attained_degree: int
    method: str
    t: int
    k0: int
    t0: int
    expansion_degree: int
    consistent: bool  # the linear system / inversion produced a well-defined map
    jet_consistent: bool
    x0: tuple = ()
    slice_vars: tuple = ()

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "t": self.t,
            "k0": self.k0,
            "t0": self.t0,
            "jet": self.jet.to_text(),
            "expansion_degree": self.expansion_degree,
            "attained_degree": self.attained_degree,
            "consistent": self.consistent,
            "jet_consistent": self.jet_consistent,
            "x0": [str(v) for v in self.x0],
            "slice": list(self.slice_vars),
            "H": self.H.to_text(),
        }


def _linear_recover(M: GenericManifold, S: SeriesVector, G: SeriesVector, Np: int):
    """Solve sum_beta h_beta S^beta = G up to the expansion degree; returns (H, attained, consistent).

    The solve uses a maximal independent set of equations (taken in degree
    order); consistency is then decided by substituting back into all of them.
    """
    T = G.trunc
    N = M.N
    X = S.blocks
    Sx = [TruncatedSeries(X, T, c.terms) if c.trunc < T else c.with_trunc(T) for c in S]
    betas = [b for deg in range(T + 1)
             for b in itertools.product(range(deg, -1, -1), repeat=N) if sum(b) == deg]
    one = TruncatedSeries.constant(X, T, 1)
    pows = {}
    for b in betas:
        p = one
        for c, k in zip(Sx, b):
            if k:
                p = p * c ** k
        pows[b] = p
    betas = [b for b in betas if not pows[b].is_zero()]
    nb = len(betas)
    rows: dict = {}
    for i, b in enumerate(betas):
        for e, c in pows[b].terms.items():
            rows.setdefault(e, {})[i] = c
    keys = sorted(rows, key=lambda e: (sum(e), e))
    span = linalg.RowSpan(nb)
    indep = [k for k in keys if span.add(rows[k])]
    determined = set()
    free = set(range(nb)) - set(span._piv)
    for p, r in span._piv.items():
        if not any(k in free for k in r if k != p):
            determined.add(p)
    undetermined = [sum(betas[i]) for i in range(nb) if i not in determined]
    attained = min(undetermined) - 1 if undetermined else T
    attained = max(attained, 0)
    Bsrc = M.blocks
    zi = list(Bsrc.block_slice("z")) + list(Bsrc.block_slice("w"))
    comps = []
    consistent = True
    for comp in G:
        aug = nb
        eqs = []
        for k in indep:
            r = dict(rows[k])
            v = comp.coefficient(k)
            if v:
                r[aug] = v
            eqs.append(r)
        red, piv = linalg.rref_sparse(eqs, nb + 1)
        sol = {p: r[aug] for p, r in zip(piv, red) if p in determined and r.get(aug)}
        # back-substitute (free unknowns set to zero) and compare with every equation
        full = {p: r.get(aug) for p, r in zip(piv, red) if r.get(aug)}
        for k in set(keys) | set(comp.terms):
            lhs = sum((c * full[i] for i, c in rows.get(k, {}).items() if i in full),
                      GaussianRational(0))
            if lhs != comp.coefficient(k):
                consistent = False
                break
        terms = {}
        for i, v in sol.items():
            b = betas[i]
            if sum(b) > attained:
                continue
            e = [0] * Bsrc.nvars
            for idx, k in zip(zi, b):
                e[idx] = k
            terms[tuple(e)] = v
        comps.append(TruncatedSeries(Bsrc, attained, terms))
    return SeriesVector(comps), attained, consistent


def _slice_recover(M: GenericManifold, S: SeriesVector, G: SeriesVector, box, steps):
    if any(c.degree() >= c.trunc for c in G):
        raise BudgetError("slice reconstruction needs a polynomial Segre expansion "
                          "(top degree reached the truncation); use the linear method")
    t2 = S.blocks
    x0, sl = find_zero_point(S, box, steps, seeds=_sphere_seeds(t2, M))
    T = invert_map_slice(SeriesVector(TruncatedSeries(t2, G.trunc, c.terms) for c in S), x0, sl)
    Gr = [recenter(c, x0) for c in G]
    for c in Gr:
        if c.constant_term():
            raise VerificationError("Segre expansion does not vanish at the inversion point")
    Bsrc = M.blocks
    zi = list(Bsrc.block_slice("z")) + list(Bsrc.block_slice("w"))
    comps = []
    for c in Gr:
        h = compose(c, SeriesVector([s - s.constant_term() for s in T]))
        out = {}
        for e, v in h.terms.items():
            ne = [0] * Bsrc.nvars
            for idx, k in zip(zi, e):
                ne[idx] = k
            out[tuple(ne)] = v
        comps.append(TruncatedSeries(Bsrc, h.trunc, out))
    return SeriesVector.aligned(comps), x0, sl


def _sphere_seeds(X: VariableBlocks, M: GenericManifold):
    # (0, a, 1, a, 0, a, 1, a, ...) per coordinate of a hypersurface, a in {1, 1/2}
    if M.n != 1 or M.d != 1:
        return []
    q = X.nvars
    out = []
    for a in ("1", "1/2"):
        pt = []
        for j in range(q):
            pt.append(["0", a, "1", a][j % 4])
        out.append([GaussianRational(v) for v in pt])
    return out


def reconstruct(M: GenericManifold, ideal: DefiningIdeal, cert: NondegCertificate,
                Lam: SeriesVector, degree_goal: int, t: int | None = None,
                method: str = "linear", x0_box: int = 1, x0_steps: int = 2) -> Reconstruction:
    """Recover H from its t0-jet, t0 = 2 t k0, to at least ``degree_goal`` when the budget allows."""
    _cert_matrix_ok(cert)
    if t is None:
        rep = minimality_order(M)
        if rep.t is None:
            raise PreconditionError("manifold is not minimal within the search bound")
        t = rep.t
    k0 = cert.k0
    t0 = parametrization_order(t, k0)
    if Lam.trunc != t0:
        raise PreconditionError(f"jet must have order t0 = {t0} (got {Lam.trunc})")
    q = 2 * t
    # each level costs k0 degrees; the w-directions of S^q may need twice the goal
    need = 2 * degree_goal if method == "linear" else degree_goal
    D = need + q * k0
    if M.trunc < D:
        M = _extend_manifold(M, D)
    if ideal.trunc < D:
        ideal = _extend_ideal(ideal, D)
    exp = segre_expand(M, ideal, cert, Lam, q, D)
    S = segre_map(M.with_trunc(exp.attained_degree), q).map
    if method == "linear":
        H, att, ok = _linear_recover(M, S, exp.series, ideal.N)
        x0, sl = (), ()
    elif method == "slice":
        H, x0, sl = _slice_recover(M, S, exp.series, x0_box, x0_steps)
        att, ok = H.trunc, True
    else:
        raise PreconditionError(f"unknown reconstruction method {method!r}")
    jc = att >= t0 and jet(_polyvec(H, t0), t0) == _lift(Lam, H.blocks, t0)
    return Reconstruction(Lam, H, att, method, t, k0, t0, exp.attained_degree, ok, jc,
                          tuple(x0), tuple(sl))


def _polyvec(H: SeriesVector, t0: int) -> SeriesVector:
    return SeriesVector(TruncatedSeries(c.blocks, max(c.trunc, t0), c.terms) for c in H)


def _lift(Lam: SeriesVector, B: VariableBlocks, t0: int) -> SeriesVector:
    return SeriesVector(TruncatedSeries(B, t0, embed(c, B).terms) for c in Lam)


def _extend_manifold(M: GenericManifold, D: int) -> GenericManifold:
    """Same manifold at a larger truncation (recomputed from its graph)."""
    from .manifold import from_graph

    if M.phi is None:
        raise DegreeExhaustedError(f"manifold truncation {M.trunc} below required {D}")
    phi = SeriesVector(TruncatedSeries(c.blocks, D, c.terms) for c in M.phi)
    if any(c.degree() >= M.trunc for c in M.phi):
        raise DegreeExhaustedError(
            f"graph data known only to degree {M.trunc}; reconstruction needs {D}"
        )
    return from_graph(phi, M.n, M.d, M.name)


def _extend_ideal(ideal: DefiningIdeal, D: int) -> DefiningIdeal:
    if any(r.degree() >= r.trunc for r in ideal.rho):
        raise DegreeExhaustedError(
            f"defining functions known only to degree {ideal.trunc}; reconstruction needs {D}"
        )
    return DefiningIdeal(SeriesVector(TruncatedSeries(r.blocks, D, r.terms) for r in ideal.rho))


@dataclass(frozen=True)
class AdmissibilityResult:
    ok: bool
    reconstruction: Reconstruction | None
    check: MapCheck | None
    reasons: tuple

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        out = {"admissible": self.ok, "reasons": list(self.reasons)}
        if self.check is not None:
            out["mapping_check"] = self.check.describe()
            out["residuals"] = [r.to_text() for r in self.check.residuals]
        if self.reconstruction is not None:
            out["reconstruction"] = self.reconstruction.to_dict()
        return out


def jet_certificate(M: GenericManifold, ideal: DefiningIdeal, Lam: SeriesVector, k_max: int):
    """Nondegeneracy certificate computed from the jet alone (no mapping check)."""
    for c in Lam:
        if c.constant_term():
            raise PreconditionError("jet must send the base point to 0")
    H = SeriesVector(TruncatedSeries(c.blocks, max(c.trunc, k_max + 1), c.terms) for c in Lam)
    table = derivative_rows(H, M, ideal, k_max, verify_map=False)
    res = certificate_from_table(table)
    if not isinstance(res, NondegCertificate):
        raise PreconditionError(
            "jet is not finitely nondegenerate up to order "
            f"{k_max} (rank profile {list(res.rank_profile)}); constant maps never are"
        )
    return res


def admissible_jet(M: GenericManifold, ideal: DefiningIdeal, Lam: SeriesVector,
                   degree_goal: int, cert: NondegCertificate | None = None,
                   t: int | None = None) -> AdmissibilityResult:
    """Reconstruct from the jet and test the mapping equation modulo ``degree_goal``."""
    if cert is None:
        cert = jet_certificate(M, ideal, Lam, min(Lam.trunc, 4))
    t0 = Lam.trunc
    own = check_maps_into(Lam, M.with_trunc(min(M.trunc, t0)), ideal.with_trunc(min(ideal.trunc, t0)))
    rec = reconstruct(M, ideal, cert, Lam, degree_goal, t)
    reasons = []
    if not own:
        reasons.append(f"jet violates the mapping equation: {own.describe()}")
    if not rec.consistent:
        reasons.append("Segre expansion is not of the form H o S^(2t)")
    if not rec.jet_consistent:
        reasons.append("reconstructed map does not reproduce the input jet")
    goal = min(degree_goal, rec.attained_degree)
    Hg = SeriesVector(c.with_trunc(goal) for c in rec.H)
    Mg = M if M.trunc <= goal else M.with_trunc(goal)
    chk = check_maps_into(Hg, Mg, ideal.with_trunc(min(ideal.trunc, goal)))
    if not chk:
        reasons.append(f"mapping equation fails: {chk.describe()}")
    return AdmissibilityResult(not reasons, rec, chk, tuple(reasons))
