import sympy as sp
import pytest

from crdeform.errors import NormalityError, PreconditionError, RealityError, VerificationError
from crdeform.gallery import example_62_source, example_62_target, sphere
from crdeform.manifold import (
    DefiningIdeal,
    base_point_deformation,
    check_maps_into,
    from_graph,
    graph_blocks,
    graph_chart,
    ideal_from_graph,
    restrict_to_M,
    source_blocks,
)
from crdeform.series import GaussianRational, SeriesVector, TruncatedSeries

from conftest import sym_var, to_sympy

G = GaussianRational
I = G(0, 1)


def gvar(n, d, D, name):
    return TruncatedSeries.variable(graph_blocks(n, d), D, name)


def src(M, name):
    return TruncatedSeries.variable(M.blocks, M.trunc, name)


class TestFromGraph:
    def test_sphere_q(self):
        M = sphere(1, 8)
        assert M.Q[0] == src(M, "tau.1") + src(M, "z.1") * src(M, "chi.1") * G(0, 2)

    def test_flat_model(self):
        M = from_graph(TruncatedSeries.zero(graph_blocks(1, 1), 6), 1, 1)
        assert M.Q[0] == src(M, "tau.1")

    def test_quartic_source_is_polynomial(self):
        # phi does not involve u, so w = tau + 2i(z chi + z^2 chi^2) exactly
        M = example_62_source(10)
        z, c = src(M, "z.1"), src(M, "chi.1")
        assert M.Q[0] == src(M, "tau.1") + (z * c + z * z * c * c) * G(0, 2)

    def test_u_dependent_graph_against_sympy(self):
        D = 7
        z, c, u = gvar(1, 1, D, "z.1"), gvar(1, 1, D, "chi.1"), gvar(1, 1, D, "u.1")
        M = from_graph(z * c * (1 + u), 1, 1)
        # (w - tau)/(2i) = z chi (1 + (w + tau)/2)  solved by hand for w
        Z, C, T = sym_var("z.1"), sym_var("chi.1"), sym_var("tau.1")
        e = sp.Symbol("e")
        closed = (T + 2 * sp.I * Z * C + sp.I * Z * C * T) / (1 - sp.I * Z * C)
        ser = sp.expand(sp.series(closed.subs({Z: e * Z, C: e * C, T: e * T}), e, 0, D + 1).removeO())
        want = sp.expand(ser.subs(e, 1))
        assert sp.expand(to_sympy(M.Q[0]) - want) == 0

    def test_invariants_hold(self):
        for M in (sphere(1, 10), example_62_source(10), sphere(2, 8)):
            assert M.normality_holds()
            assert M.reality_holds()

    def test_non_real_graph_rejected(self):
        z, c = gvar(1, 1, 6, "z.1"), gvar(1, 1, 6, "chi.1")
        with pytest.raises(RealityError):
            from_graph(z * c * I, 1, 1)

    def test_non_normal_graph_rejected(self):
        z = gvar(1, 1, 6, "z.1")
        with pytest.raises(NormalityError):
            from_graph(z * z + gvar(1, 1, 6, "chi.1") ** 2, 1, 1)


class TestRestriction:
    def test_defining_function_vanishes(self):
        M = sphere(1, 8)
        w, t = src(M, "w.1"), src(M, "tau.1")
        f = w - t - src(M, "z.1") * src(M, "chi.1") * G(0, 2)
        assert restrict_to_M(f, M).is_zero()

    def test_z_is_untouched(self):
        M = sphere(1, 8)
        assert restrict_to_M(src(M, "z.1"), M) == src(M, "z.1")


class TestCheckMapsInto:
    def test_identity(self):
        M = sphere(1, 8)
        assert check_maps_into(M.identity_map(), M, M.ideal)

    def test_bad_map_reports_degree_two(self):
        M = sphere(1, 8)
        z, w = src(M, "z.1"), src(M, "w.1")
        chk = check_maps_into(SeriesVector([z, w + z * z]), M, M.ideal)
        assert not chk
        j, mono, coeff = chk.witness
        assert mono == "z.1^2" and coeff == G(0, "-1/2")

    def test_family_into_quartic_target(self):
        M = example_62_source(8)
        B = M.blocks
        z, w = src(M, "z.1"), src(M, "w.1")
        H = SeriesVector([z, TruncatedSeries.zero(B, 8), w])
        assert check_maps_into(H, M, example_62_target(8))

    def test_antiholomorphic_map_rejected(self):
        M = sphere(1, 6)
        with pytest.raises(PreconditionError):
            check_maps_into(SeriesVector([src(M, "chi.1"), src(M, "w.1")]), M, M.ideal)


class TestBasePointDeformation:
    def test_reproduces_target_at_zero(self):
        D = 6
        phi = gvar(1, 1, D, "z.1") * gvar(1, 1, D, "chi.1")
        ideal = ideal_from_graph(phi, 1, 1)
        dfm = base_point_deformation(ideal, graph_chart(phi, 1, 1))
        assert dfm.m == 3
        assert dfm.at_base() == ideal

    def test_chart_must_land_in_target(self):
        D = 6
        phi = gvar(1, 1, D, "z.1") * gvar(1, 1, D, "chi.1")
        ideal = ideal_from_graph(phi, 1, 1)
        wrong = graph_chart(phi * 2, 1, 1)
        with pytest.raises(VerificationError):
            base_point_deformation(ideal, wrong)

    def test_defining_ideal_reality(self):
        ideal = sphere(1, 6).ideal
        assert isinstance(ideal, DefiningIdeal)
        assert ideal.reality_check()
        assert source_blocks(1, 1).names() == ["z.1", "w.1", "chi.1", "tau.1"]
