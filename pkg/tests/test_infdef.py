import sympy as sp
import pytest

from crdeform.errors import BudgetError, PreconditionError
from crdeform.gallery import example_62_source, example_62_target, sphere
from crdeform.infdef import (
    CurveInT,
    basepoint_iso_check,
    curve_tangency,
    evaluate_at_base,
    hol_def_jets,
    hol_jets,
    hol_k_jets,
    hol_residual,
    isolation_report,
    stabilized_dim,
)
from crdeform.infdef import _with_t
from crdeform.manifold import base_point_deformation, graph_blocks, graph_chart
from crdeform.series import GaussianRational, SeriesVector, TruncatedSeries

G = GaussianRational


def sphere_polynomial_fields(kappa: int) -> int:
    """Real dimension of polynomial (Y1, Y2) of degree <= kappa, Y(0) = 0, with
    Re(-zbar Y1 + Y2/(2i)) = 0 on Im w = |z|^2, solved as a dense sympy system."""
    z, w, c, t = sp.symbols("z w c t")
    monos = [(a, b) for a in range(kappa + 1) for b in range(kappa + 1 - a) if a + b > 0]
    unknowns = []
    Y, Yb = [], []
    for comp in range(2):
        f = fb = 0
        for a, b in monos:
            re, im = sp.symbols(f"r{comp}_{a}_{b} i{comp}_{a}_{b}", real=True)
            unknowns += [re, im]
            f += (re + sp.I * im) * z ** a * w ** b
            fb += (re - sp.I * im) * c ** a * t ** b
        Y.append(f)
        Yb.append(fb)
    expr = -c * Y[0] + Y[1] / (2 * sp.I) - z * Yb[0] - Yb[1] / (2 * sp.I)
    expr = sp.expand(expr.subs(w, t + 2 * sp.I * z * c))
    eqs = []
    for coeff in sp.Poly(expr, z, c, t).coeffs():
        re, im = sp.expand(coeff).as_real_imag()
        eqs += [re, im]
    A, _ = sp.linear_eq_to_matrix(eqs, unknowns)
    return len(unknowns) - A.rank()


def sphere_id(D=12):
    M = sphere(1, D)
    return M.identity_map(), M


class TestHolSphere:
    @pytest.mark.parametrize("kappa", [2, 3])
    def test_dense_oracle_agrees_with_deep_projection(self, kappa):
        # classical isotropy count: 8-dimensional automorphism algebra minus 3 translations
        assert sphere_polynomial_fields(kappa) == 8 - 3
        H, M = sphere_id()
        basis = hol_jets(H, M, M.ideal, kappa + 4)
        assert basis.projected_dim(kappa) == 5

    def test_fields_have_zero_residual(self):
        H, M = sphere_id(10)
        basis = hol_jets(H, M, M.ideal, 4)
        for v, Y in basis.fields()[:6]:
            assert all(r.is_zero() for r in hol_residual(H, M, M.ideal, v, Y, 4))

    def test_rotation_field_is_in_kernel(self):
        H, M = sphere_id(10)
        basis = hol_jets(H, M, M.ideal, 4)
        z = TruncatedSeries.variable(M.blocks, 10, "z.1")
        zero = TruncatedSeries.zero(M.blocks, 10)
        assert basis.contains([], SeriesVector([z * G(0, 1), zero]))
        assert not basis.contains([], SeriesVector([z, zero]))

    def test_stabilization_sweep(self):
        H, M = sphere_id()
        rep = stabilized_dim(H, M, M.ideal, range(4, 9), 4)
        assert rep.dims == (22, 12, 8, 5, 5)
        assert rep.stabilized and rep.value == 5
        assert "heuristic" in rep.marker

    def test_projection_must_not_exceed_smallest_kappa(self):
        H, M = sphere_id()
        with pytest.raises(PreconditionError):
            stabilized_dim(H, M, M.ideal, [2, 3], 3)

    def test_isolation_verdicts(self):
        H, M = sphere_id()
        rep = stabilized_dim(H, M, M.ideal, range(4, 8), 2)
        verdict = isolation_report(rep)
        assert verdict.verdict == "criterion inapplicable" and verdict.dimension == 5
        short = stabilized_dim(H, M, M.ideal, [2, 3], 2)
        assert isolation_report(short).verdict == "inconclusive"


class TestBasePoint:
    def test_sphere_dimensions_agree(self):
        D = 8
        H, M = sphere_id(D)
        phi = M.phi
        dfm = base_point_deformation(M.ideal, graph_chart(phi, 1, 1))
        for kappa, dim in ((2, 14), (3, 20)):
            res = basepoint_iso_check(H, M, M.ideal, dfm, kappa)
            assert res.ok and res.dim_hol == res.dim_def == dim

    def test_relaxed_hol_evaluates_onto_tangent_space(self):
        H, M = sphere_id(8)
        basis = hol_jets(H, M, M.ideal, 3, vanish_at_base=False)
        assert len(evaluate_at_base(basis)) == 3


class TestHigherOrder:
    def test_first_order_equals_hol_def(self):
        D = 8
        H, M = sphere_id(D)
        dfm = base_point_deformation(M.ideal, graph_chart(M.phi, 1, 1))
        sysk = hol_k_jets(H, M, M.ideal, dfm, 1, 3)
        direct = hol_def_jets(H, M, dfm, 3)
        assert sysk.first_order.dim == direct.dim
        assert all(direct.contains(v, Y) for v, Y in sysk.first_order.fields())

    def test_rotation_extends_to_second_order(self):
        H, M = sphere_id(8)
        sysk = hol_k_jets(H, M, M.ideal, None, 2, 3)
        z = TruncatedSeries.variable(M.blocks, 8, "z.1")
        zero = TruncatedSeries.zero(M.blocks, 8)
        Y1 = SeriesVector([z * G(0, 1), zero])
        nxt = sysk.extend([[]], [Y1])
        assert nxt is not None
        assert sysk.contains([[], nxt[0]], [Y1, nxt[1]])

    def test_budget(self):
        H, M = sphere_id(5)
        with pytest.raises(BudgetError):
            hol_k_jets(H, M, M.ideal, None, 3, 4)


class TestTangency:
    def curve(self, M, comps):
        ctx = _with_t(M.blocks)
        D = M.trunc
        v = {n: TruncatedSeries.variable(ctx, D, n) for n in ("z.1", "w.1", "t.1")}
        return CurveInT((), SeriesVector([f(v) for f in comps]))

    def test_dilation_curve_is_tangent(self):
        M = sphere(1, 8)
        c = self.curve(M, [lambda v: (1 + v["t.1"]) * v["z.1"],
                           lambda v: (1 + v["t.1"]) ** 2 * v["w.1"]])
        assert curve_tangency(c, M, M.ideal, 3)

    def test_unbalanced_rotation_fails_at_second_order(self):
        M = sphere(1, 8)
        c = self.curve(M, [lambda v: v["z.1"] + v["t.1"] * v["z.1"] * G(0, 1), lambda v: v["w.1"]])
        assert curve_tangency(c, M, M.ideal, 1)
        res = curve_tangency(c, M, M.ideal, 2)
        assert not res and res.failing_order == 2


class TestQuarticFamily:
    def test_family_derivatives_are_in_hol_def(self):
        D = 8
        M = example_62_source(D)
        tgt = example_62_target(D)
        G2 = graph_blocks(2, 1)
        z1, z2, c1, c2 = (TruncatedSeries.variable(G2, D, n) for n in ("z.1", "z.2", "chi.1", "chi.2"))
        phi = z1 * c1 + z1 * z1 * c1 * c1 + ((z1 + c1) * G("1/2")) ** 2 * (z2 - c2) * G(0, "-1/2")
        dfm = base_point_deformation(tgt, graph_chart(phi, 2, 1))
        z = TruncatedSeries.variable(M.blocks, D, "z.1")
        w = TruncatedSeries.variable(M.blocks, D, "w.1")
        H = SeriesVector([z, TruncatedSeries.zero(M.blocks, D), w])
        basis = hol_def_jets(H, M, dfm, 3)
        zero = SeriesVector([TruncatedSeries.zero(M.blocks, D)] * 3)
        # chart parameters (Re z1, Im z1, Re z2, Im z2, Re w); the family moves Re z2 and Re w
        inside = []
        for k in range(5):
            v = [0] * 5
            v[k] = 1
            inside.append(basis.contains(v, zero))
        assert inside == [False, False, True, False, True]
