"""Generic submanifolds in normal coordinates and complexified defining ideals.

Block conventions
-----------------
* Source space of a manifold M with CR dimension n and codimension d uses the
  blocks ``z`` (n), ``w`` (d), ``chi`` (n), ``tau`` (d); ``chi``/``tau`` stand
  for the conjugates of ``z``/``w``.  Extra real parameter blocks may be
  appended (maps depending on parameters, curves in ``t`` ...).
* A target ideal lives on ``Zp`` (N'), ``zetap`` (N') and optionally ``eps``.
* Graph data phi(z, chi, u) uses ``z``, ``chi`` and the real block ``u`` (d).

The complexified manifold is parametrised by (z, chi, tau) -> Z = (z, Q),
zeta = (chi, tau); restricting a function to it means substituting w = Q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import (
    BlockMismatchError,
    NormalityError,
    PreconditionError,
    RealityError,
    VerificationError,
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
    conjugate_swap,
    differentiate,
    embed,
    solve_implicit,
    specialize,
    substitute,
)

__all__ = [
    "source_blocks",
    "target_blocks",
    "graph_blocks",
    "DefiningIdeal",
    "Deformation",
    "GenericManifold",
    "MapCheck",
    "from_graph",
    "ideal_from_graph",
    "restrict_to_M",
    "check_maps_into",
    "pull_back",
    "base_point_deformation",
    "graph_chart",
    "reality_check",
]

_HALF_OVER_I = (2 * I).inverse()  # 1/(2i) = -i/2


def source_blocks(n: int, d: int, extra: Sequence[Block] = ()) -> VariableBlocks:
    return VariableBlocks(
        (Block("z", n, "Z"), Block("w", d, "Z"), Block("chi", n, "zeta"), Block("tau", d, "zeta"))
        + tuple(extra),
        (("z", "chi"), ("w", "tau")),
    )


def target_blocks(N: int, m: int = 0) -> VariableBlocks:
    blocks = (Block("Zp", N, "Z"), Block("zetap", N, "zeta"))
    if m:
        blocks += (Block("eps", m, "eps"),)
    return VariableBlocks(blocks, (("Zp", "zetap"),))


def graph_blocks(n: int, d: int) -> VariableBlocks:
    return VariableBlocks(
        (Block("z", n, "Z"), Block("chi", n, "zeta"), Block("u", d, "t")), (("z", "chi"),)
    )


def _as_vector(phi) -> SeriesVector:
    if isinstance(phi, SeriesVector):
        return phi
    if isinstance(phi, TruncatedSeries):
        return SeriesVector([phi])
    return SeriesVector.aligned(phi)


# ---------------------------------------------------------------------------
# ideals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DefiningIdeal:
    """Generators rho_1..rho_d' of a real ideal on (Zp, zetap[, eps])."""

    rho: SeriesVector

    def __post_init__(self):
        b = self.rho.blocks
        if not (b.has_block("Zp") and b.has_block("zetap")):
            raise BlockMismatchError("a defining ideal needs blocks Zp and zetap")
        for c in self.rho:
            if c.constant_term():
                raise PreconditionError("defining functions must vanish at the base point")

    @property
    def blocks(self) -> VariableBlocks:
        return self.rho.blocks

    @property
    def N(self) -> int:
        return self.blocks.block("Zp").arity

    @property
    def ngens(self) -> int:
        return len(self.rho)

    @property
    def trunc(self) -> int:
        return self.rho.trunc

    @property
    def eps_dim(self) -> int:
        return self.blocks.block("eps").arity if self.blocks.has_block("eps") else 0

    def gradient(self, j: int) -> list[TruncatedSeries]:
        """Holomorphic gradient (d rho_j / d Zp_k)_k, truncation D - 1."""
        return [differentiate(self.rho[j], f"Zp.{k + 1}") for k in range(self.N)]

    def at_eps(self, values: Sequence) -> "DefiningIdeal":
        """Specialise the parameter block; returns an ideal without ``eps``."""
        if not self.eps_dim:
            return self
        spec = [specialize(c, {"eps": list(values)}) for c in self.rho]
        plain = target_blocks(self.N)
        return DefiningIdeal(SeriesVector(embed(c, plain) for c in spec))

    def reality_check(self) -> bool:
        return reality_check(self)

    def with_trunc(self, D: int) -> "DefiningIdeal":
        return DefiningIdeal(self.rho.with_trunc(D))


def reality_check(ideal: DefiningIdeal) -> bool:
    """True iff the bar operation fixes every generator."""
    return all(conjugate_swap(c) == c for c in ideal.rho)


@dataclass(frozen=True)
class Deformation:
    """Parameter-dependent ideal together with its distinguished parameter value."""

    ideal: DefiningIdeal
    eps0: tuple = ()
    chart: SeriesVector | None = None

    def __post_init__(self):
        m = self.ideal.eps_dim
        if not m:
            raise BlockMismatchError("a deformation needs a nonempty eps block")
        if not self.eps0:
            object.__setattr__(self, "eps0", tuple(GaussianRational(0) for _ in range(m)))
        if len(self.eps0) != m:
            raise BlockMismatchError("eps0 arity does not match the eps block")

    @property
    def m(self) -> int:
        return self.ideal.eps_dim

    def at_base(self) -> DefiningIdeal:
        return self.ideal.at_eps(self.eps0)


# ---------------------------------------------------------------------------
# manifolds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenericManifold:
    """Germ at 0 in normal coordinates, w = Q(z, chi, tau) on its complexification."""

    n: int
    d: int
    Q: SeriesVector
    ideal: DefiningIdeal
    phi: SeriesVector | None = field(default=None, compare=False)
    name: str = field(default="M", compare=False)

    @property
    def N(self) -> int:
        return self.n + self.d

    @property
    def trunc(self) -> int:
        return self.Q.trunc

    @property
    def blocks(self) -> VariableBlocks:
        return self.Q.blocks

    @property
    def Qbar(self) -> SeriesVector:
        """conjugate_swap(Q): the series Qbar(chi, z, w) in the source blocks."""
        return SeriesVector(conjugate_swap(c) for c in self.Q)

    def chart(self) -> SeriesVector:
        """(z, chi, tau) -> (z, Q, chi, tau) as series over the source blocks."""
        B, D = self.blocks, self.trunc
        comps = [TruncatedSeries.variable(B, D, f"z.{k + 1}") for k in range(self.n)]
        comps += list(self.Q)
        comps += [TruncatedSeries.variable(B, D, f"chi.{k + 1}") for k in range(self.n)]
        comps += [TruncatedSeries.variable(B, D, f"tau.{k + 1}") for k in range(self.d)]
        return SeriesVector(comps)

    def context(self, extra: Sequence[Block] = ()) -> VariableBlocks:
        return source_blocks(self.n, self.d, extra)

    def identity_map(self, blocks: VariableBlocks | None = None, trunc: int | None = None
                     ) -> SeriesVector:
        B = blocks or self.blocks
        D = self.trunc if trunc is None else trunc
        return SeriesVector(
            [TruncatedSeries.variable(B, D, f"z.{k + 1}") for k in range(self.n)]
            + [TruncatedSeries.variable(B, D, f"w.{k + 1}") for k in range(self.d)]
        )

    def normality_holds(self) -> bool:
        zero_chi = {"chi": [0] * self.n}
        zero_z = {"z": [0] * self.n}
        for k, c in enumerate(self.Q):
            tau = TruncatedSeries.variable(self.blocks, self.trunc, f"tau.{k + 1}")
            if specialize(c, zero_chi) != tau or specialize(c, zero_z) != tau:
                return False
        return True

    def reality_holds(self, degree: int | None = None) -> bool:
        """Q(z, chi, Qbar(chi, z, w)) == w modulo the truncation."""
        qb = list(self.Qbar)
        for k, c in enumerate(self.Q):
            lhs = substitute(c, {"tau": qb})
            w = TruncatedSeries.variable(self.blocks, lhs.trunc, f"w.{k + 1}")
            if not lhs.equal_mod(w, degree):
                return False
        return True

    def restrict(self, f: TruncatedSeries) -> TruncatedSeries:
        return restrict_to_M(f, self)

    def with_trunc(self, D: int) -> "GenericManifold":
        return GenericManifold(self.n, self.d, self.Q.with_trunc(D), self.ideal.with_trunc(D),
                               None if self.phi is None else self.phi.with_trunc(D), self.name)


_HALF = GaussianRational.parse("1/2")


def _check_graph(phi: SeriesVector, n: int, d: int):
    G = graph_blocks(n, d)
    if phi.blocks != G:
        raise BlockMismatchError(
            f"graph data must live in blocks z({n}), chi({n}), u({d}); got {phi.blocks.block_names()}"
        )
    if len(phi) != d:
        raise BlockMismatchError(f"graph data needs {d} components, got {len(phi)}")
    for k, c in enumerate(phi):
        if conjugate_swap(c) != c:
            raise RealityError(f"graph component {k + 1} is not real (bar(phi) != phi)")
        if c.constant_term():
            raise PreconditionError(f"graph component {k + 1} does not vanish at 0")
        for j in range(d):
            e = [0] * G.nvars
            e[G.offset("u") + j] = 1
            if c.coefficient(e):
                raise PreconditionError(
                    f"graph component {k + 1} has a linear term in u.{j + 1}; "
                    "the implicit solve for w needs d phi/du (0) = 0"
                )


def ideal_from_graph(phi, n: int, d: int) -> DefiningIdeal:
    """Ideal of {Im w = phi(z, zbar, Re w)} on (Zp, zetap); no normality required."""
    phi = _as_vector(phi)
    _check_graph(phi, n, d)
    T = target_blocks(n + d)
    # rename: z -> Zp.1..n, w -> Zp.n+1.., chi -> zetap.1..n, tau -> zetap.n+1..
    D = phi.trunc

    def zp(k):
        return TruncatedSeries.variable(T, D, T.offset("Zp") + k)

    def zt(k):
        return TruncatedSeries.variable(T, D, T.offset("zetap") + k)

    subs = [zp(k) for k in range(n)] + [zt(k) for k in range(n)]
    subs += [(zp(n + k) + zt(n + k)) * _HALF for k in range(d)]
    pulled = [compose(c, SeriesVector(subs)) for c in phi]
    rho = [(zp(n + k) - zt(n + k)) * _HALF_OVER_I - pulled[k] for k in range(d)]
    return DefiningIdeal(SeriesVector(rho))


def from_graph(phi, n: int, d: int | None = None, name: str = "M") -> GenericManifold:
    """Manifold {Im w = phi(z, zbar, Re w)}; Q is obtained by an implicit solve.

    Raises :class:`NormalityError` unless phi(z, 0, u) = phi(0, chi, u) = 0.
    """
    phi = _as_vector(phi)
    d = len(phi) if d is None else d
    _check_graph(phi, n, d)
    for k, c in enumerate(phi):
        if not specialize(c, {"chi": [0] * n}).is_zero() or not specialize(c, {"z": [0] * n}).is_zero():
            raise NormalityError(
                f"graph component {k + 1} is not in normal form: phi(z,0,u) and phi(0,chi,u) must vanish"
            )
    B = source_blocks(n, d)
    D = phi.trunc

    def var(name, k):
        return TruncatedSeries.variable(B, D, B.offset(name) + k)

    subs = [var("z", k) for k in range(n)] + [var("chi", k) for k in range(n)]
    subs += [(var("w", k) + var("tau", k)) * _HALF for k in range(d)]
    pulled = [compose(c, SeriesVector(subs)) for c in phi]
    rho = [(var("w", k) - var("tau", k)) * _HALF_OVER_I - pulled[k] for k in range(d)]
    Q = solve_implicit(SeriesVector(rho), [f"w.{k + 1}" for k in range(d)])
    M = GenericManifold(n, d, Q, ideal_from_graph(phi, n, d), phi, name)
    if not M.normality_holds():  # pragma: no cover - guaranteed by the checks above
        raise NormalityError("solved Q is not normal")
    if not M.reality_holds():
        raise RealityError("reality identity Q(z, chi, Qbar(chi, z, w)) = w fails")
    return M


def restrict_to_M(f: TruncatedSeries, M: GenericManifold) -> TruncatedSeries:
    """Substitute w = Q(z, chi, tau); f lives on the source blocks (plus extras)."""
    if not f.blocks.has_block("w"):
        return f
    Qc = [embed(c, f.blocks) for c in M.Q]
    D = min(f.trunc, M.trunc)
    return substitute(f.with_trunc(D), {"w": [c.with_trunc(D) for c in Qc]})


# ---------------------------------------------------------------------------
# mapping equation
# ---------------------------------------------------------------------------

def _check_holomorphic(H: SeriesVector):
    for k, c in enumerate(H):
        for blk in ("chi", "tau"):
            if c.blocks.has_block(blk) and c.depends_on(blk):
                raise PreconditionError(f"map component {k + 1} depends on {blk}; maps must be holomorphic")


def pull_back(f: TruncatedSeries, H: SeriesVector, eps: Sequence | None = None
              ) -> TruncatedSeries:
    """f(H(Z), Hbar(zeta)[, eps]) as a series over H's blocks (not yet restricted).

    A target ``eps`` block is sent to the same-named block of H's context if
    present.  Otherwise ``eps`` is either a list of series over H's blocks
    (substituted as they are) or a list of constants (default 0).
    """
    ctx = H.blocks
    N = len(H)
    fb = f.blocks
    if fb.block("Zp").arity != N:
        raise BlockMismatchError(f"map has {N} components but target has dimension {fb.block('Zp').arity}")
    for k, c in enumerate(H):
        if c.constant_term():
            raise PreconditionError(
                f"map component {k + 1} has constant term {c.constant_term()}; translate so H(0) = 0"
            )
    eps_series = eps is not None and any(isinstance(e, TruncatedSeries) for e in eps)
    if fb.has_block("eps") and not ctx.has_block("eps") and not eps_series:
        m = fb.block("eps").arity
        f = specialize(f, {"eps": list(eps) if eps is not None else [0] * m})
    D = min(f.trunc, H.trunc)
    Hb = [conjugate_swap(c) for c in H]
    subs = list(H) + Hb
    if fb.has_block("eps"):
        if eps_series:
            subs += [e if isinstance(e, TruncatedSeries) else TruncatedSeries.constant(ctx, D, e)
                     for e in eps]
        elif ctx.has_block("eps"):
            subs += [TruncatedSeries.variable(ctx, D, f"eps.{k + 1}") for k in range(fb.block("eps").arity)]
        else:
            subs += [TruncatedSeries.zero(ctx, D) for _ in range(fb.block("eps").arity)]
    if fb.nvars != len(subs):
        raise BlockMismatchError(f"unexpected target blocks {fb.block_names()}")
    return compose(f.with_trunc(D), SeriesVector([s.with_trunc(D) for s in subs]))


@dataclass(frozen=True)
class MapCheck:
    ok: bool
    degree: int
    residuals: tuple
    witness: tuple | None = None  # (generator index, exponent names, coefficient)

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return f"maps into target modulo degree {self.degree}"
        j, mono, c = self.witness
        return f"residual of generator {j + 1} at {mono}: {c}"


def check_maps_into(H: SeriesVector, M: GenericManifold, ideal: DefiningIdeal,
                    eps: Sequence | None = None) -> MapCheck:
    """Mapping equation rho_j(H, Hbar) = 0 on the complexified M, modulo truncation."""
    _check_holomorphic(H)
    residuals = []
    best = None
    for j, r in enumerate(ideal.rho):
        res = restrict_to_M(pull_back(r, H, eps), M)
        residuals.append(res)
        low = res.lowest_term()
        if low is not None:
            key = (sum(low[0]), j)
            if best is None or key < best[0]:
                best = (key, j, low)
    D = residuals[0].trunc if residuals else min(H.trunc, M.trunc)
    if best is None:
        return MapCheck(True, D, tuple(residuals))
    _, j, (e, c) = best
    names = H.blocks.names()
    mono = "*".join(names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k) or "1"
    return MapCheck(False, D, tuple(residuals), (j, mono, c))


# ---------------------------------------------------------------------------
# base-point deformations
# ---------------------------------------------------------------------------

def graph_chart(phi, n: int, d: int) -> SeriesVector:
    """Real chart of {Im w = phi} near 0.

    Parameters eps = (x_1, y_1, ..., x_n, y_n, u_1, ..., u_d) are sent to
    z = x + i y, w = u + i phi(z, zbar, u).
    """
    phi = _as_vector(phi)
    _check_graph(phi, n, d)
    m = 2 * n + d
    E = VariableBlocks((Block("eps", m, "eps"),))
    D = phi.trunc

    def e(k):
        return TruncatedSeries.variable(E, D, k)

    zs = [e(2 * k) + e(2 * k + 1) * I for k in range(n)]
    zb = [e(2 * k) - e(2 * k + 1) * I for k in range(n)]
    us = [e(2 * n + k) for k in range(d)]
    vals = [compose(c, SeriesVector(zs + zb + us)) for c in phi]
    return SeriesVector(zs + [us[k] + vals[k] * I for k in range(d)])


def base_point_deformation(ideal: DefiningIdeal, chart: SeriesVector) -> Deformation:
    """rho_j(Z', zeta', eps) = varrho_j(Z' + c(eps), zeta' + cbar(eps)).

    ``chart`` is a SeriesVector over a single real block ``eps`` with c(0) = 0.
    The result is truncated in the joint degree of (Z', zeta', eps).
    """
    if ideal.eps_dim:
        raise BlockMismatchError("base-point deformation of an already deformed ideal")
    E = chart.blocks
    if E.block_names() != ["eps"] or E.block("eps").role != "eps":
        raise BlockMismatchError("chart must live on a single real block named eps")
    N = ideal.N
    if len(chart) != N:
        raise BlockMismatchError(f"chart has {len(chart)} components, target dimension is {N}")
    for k, c in enumerate(chart):
        if c.constant_term():
            raise PreconditionError(f"chart component {k + 1} does not vanish at eps = 0")
    m = E.block("eps").arity
    D = min(ideal.trunc, chart.trunc)
    # chart must land in the target
    cb = [conjugate_coefficients(c) for c in chart]
    for j, r in enumerate(ideal.rho):
        val = compose(r.with_trunc(D), SeriesVector([c.with_trunc(D) for c in list(chart) + cb]))
        if not val.is_zero():
            low = val.lowest_term()
            raise VerificationError(
                f"chart does not map into the target: generator {j + 1} leaves residual "
                f"{low[1]} at exponent {low[0]}"
            )
    T = target_blocks(N, m)

    def shift(k, zeta: bool):
        base = TruncatedSeries.variable(T, D, T.offset("zetap" if zeta else "Zp") + k)
        c = (cb if zeta else list(chart))[k]
        return base + embed(c.with_trunc(D), T)

    subs = [shift(k, False) for k in range(N)] + [shift(k, True) for k in range(N)]
    rho = [compose(r.with_trunc(D), SeriesVector(subs)) for r in ideal.rho]
    return Deformation(DefiningIdeal(SeriesVector(rho)), (), chart)
