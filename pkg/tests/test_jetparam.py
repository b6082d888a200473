import pytest

from crdeform.errors import PreconditionError
from crdeform.gallery import sphere
from crdeform.jetparam import (
    admissible_jet,
    find_zero_point,
    jet_certificate,
    reconstruct,
    segre_expand,
)
from crdeform.segre import segre_map
from crdeform.series import GaussianRational, SeriesVector, TruncatedSeries, compose, evaluate

G = GaussianRational


def sphere_jet(D=4):
    M = sphere(1, 8)
    z = TruncatedSeries.variable(M.blocks, D, "z.1")
    w = TruncatedSeries.variable(M.blocks, D, "w.1")
    return M, z, w


class TestSegreExpansion:
    def test_identity_expansion_is_segre_map(self):
        M, z, w = sphere_jet()
        Lam = SeriesVector([z, w])
        cert = jet_certificate(M, M.ideal, Lam, 3)
        exp = segre_expand(M, M.ideal, cert, Lam, 4)
        S4 = segre_map(sphere(1, exp.series.trunc), 4).map
        assert exp.series.to_text() == S4.with_trunc(exp.series.trunc).to_text()
        assert exp.attained_degree >= 4

    def test_zero_point_search_on_segre_map(self):
        S = segre_map(sphere(1, 6), 4).map
        x0, slice_vars = find_zero_point(S, 1, 2)
        assert all(not evaluate(c, x0) for c in S)
        assert any(x0)
        assert len(slice_vars) == 2


class TestReconstruction:
    def test_identity_linear(self):
        M, z, w = sphere_jet()
        Lam = SeriesVector([z, w])
        cert = jet_certificate(M, M.ideal, Lam, 3)
        assert cert.k0 == 1
        rec = reconstruct(M, M.ideal, cert, Lam, 6)
        assert rec.t0 == 4 and rec.t == 2
        assert rec.attained_degree >= 6
        assert rec.H.to_text() == ["1*z.1", "1*w.1"]
        assert rec.consistent and rec.jet_consistent

    def test_identity_slice(self):
        M, z, w = sphere_jet()
        Lam = SeriesVector([z, w])
        cert = jet_certificate(M, M.ideal, Lam, 3)
        rec = reconstruct(M, M.ideal, cert, Lam, 6, method="slice")
        assert rec.attained_degree >= 6
        assert rec.H.with_trunc(6).to_text() == ["1*z.1", "1*w.1"]

    def test_dilation_round_trip(self):
        # (2z, 4w) is a sphere automorphism; its 4-jet must rebuild it exactly
        M, z, w = sphere_jet()
        Lam = SeriesVector([z * 2, w * 4])
        cert = jet_certificate(M, M.ideal, Lam, 3)
        rec = reconstruct(M, M.ideal, cert, Lam, 6)
        assert rec.H.with_trunc(6).to_text() == ["2*z.1", "4*w.1"]

    def test_constant_jet_rejected(self):
        M, z, w = sphere_jet()
        zero = TruncatedSeries.zero(M.blocks, 4)
        with pytest.raises(PreconditionError):
            jet_certificate(M, M.ideal, SeriesVector([zero, zero]), 3)


class TestAdmissibility:
    def test_identity_jet_is_admissible(self):
        M, z, w = sphere_jet()
        res = admissible_jet(M, M.ideal, SeriesVector([z, w]), 6)
        assert res.ok

    def test_perturbed_jet_fails_with_exact_residual(self):
        M, z, w = sphere_jet()
        res = admissible_jet(M, M.ideal, SeriesVector([z + z * w, w]), 6)
        assert not res.ok
        assert any("-2" in r for r in res.reasons)
        resid = [r for r in res.check.residuals if not r.is_zero()]
        assert resid
        low = resid[0].lowest_term()
        assert low[1] == G(8)

    def test_reconstructed_map_satisfies_composition(self):
        M, z, w = sphere_jet()
        Lam = SeriesVector([z, w])
        cert = jet_certificate(M, M.ideal, Lam, 3)
        rec = reconstruct(M, M.ideal, cert, Lam, 6)
        S = segre_map(sphere(1, 8), 4).map
        zero = TruncatedSeries.zero(S.blocks, 8)
        HS = [compose(c.with_trunc(8), [S[0], S[1], zero, zero]) for c in rec.H]
        assert [c.to_text() for c in HS] == S.to_text()
